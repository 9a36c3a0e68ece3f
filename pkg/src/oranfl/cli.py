"""Command-line entry point (``oranfl`` or ``python -m oranfl``)."""

from __future__ import annotations

import argparse
import logging
import sys

from . import harness
from .config import ConfigError, default_config, parse_config, reference_text
from .engine import Policy


def _config(args):
    return parse_config(args.config) if args.config else default_config()


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="oranfl",
                                description="Multi-service federated learning over a simulated O-RAN.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seeds: bool):
        sp.add_argument("--config", help="TOML config (default: the shipped scenario)")
        sp.add_argument("--out", default="out", help="output directory (default: out)")
        if seeds:
            sp.add_argument("--seeds", default="0..4", help="A..B inclusive, or a comma list")
            sp.add_argument("--jobs", type=int, default=1, help="parallel simulations")

    r = sub.add_parser("run", help="one simulation, round log CSV")
    common(r, seeds=False)
    r.add_argument("--policy", default="efl", choices=["efl", "baseline1", "baseline2"])
    r.add_argument("--seed", type=int, default=None, help="override the config seed")

    common(sub.add_parser("compare", help="all policies over a seed range"), seeds=True)

    a = sub.add_parser("ablate-a2", help="sweep the second service's weight")
    common(a, seeds=True)
    a.set_defaults(seeds="0..2")
    a.add_argument("--a2-values", default=",".join(f"{v:g}" for v in harness.DEFAULT_A2))
    a.add_argument("--policy", default="efl", choices=["efl", "baseline1", "baseline2"])

    g = sub.add_parser("gen-synth", help="write synthetic datasets as IDX files")
    g.add_argument("--config")
    g.add_argument("--out", default="data")
    g.add_argument("--seed", type=int, default=0)

    sub.add_parser("print-config-reference", help="every config key with its default")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "print-config-reference":
            sys.stdout.write(reference_text())
            return 0
        cfg = _config(args)
        if args.command == "run":
            seed = cfg.seed if args.seed is None else args.seed
            print(harness.cmd_run(cfg, Policy.parse(args.policy), seed, args.out))
        elif args.command == "compare":
            print(harness.cmd_compare(cfg, harness.parse_seeds(args.seeds), args.out, args.jobs))
        elif args.command == "ablate-a2":
            print(harness.cmd_ablate_a2(cfg, harness.parse_floats(args.a2_values),
                                        harness.parse_seeds(args.seeds), args.out,
                                        Policy.parse(args.policy), args.jobs))
        elif args.command == "gen-synth":
            for path in harness.cmd_gen_synth(cfg, args.out, args.seed):
                print(path)
    except (ConfigError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
