"""Walkthrough: one seed of the default scenario under all three policies.

EFL re-plans every 3 s on predicted positions; Baseline1 freezes a plan at
each round start; Baseline2 splits every cell equally. Each run takes a few
seconds. Run with ``python3 notebooks/03_policy_comparison.py``.
"""

import numpy as np

from oranfl import Policy, default_config, run

cfg = default_config()
seed = 0
for policy in Policy:
    log = run(cfg, policy, seed)
    print(f"\n{policy.value}")
    for sid in (1, 2):
        rows = log.service_rows(sid)
        succ = [r.successful for r in rows]
        print(f"  service {sid}: successful per round {succ} "
              f"(mean {np.mean(succ):.1f}), final accuracy {rows[-1].accuracy:.3f}")

# The same comparison over several seeds, written as CSV:
#   oranfl compare --seeds 0..4 --out out/compare
# and the weight sweep for service 2:
#   oranfl ablate-a2 --a2-values 10,30,100,300 --seeds 0..2 --out out/ablate
