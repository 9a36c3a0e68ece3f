"""Multi-rate simulation loop and the three resource-control policies.

One tick is one MAC interval (10 ms by default). On each tick the engine
samples positions on the non-RT period, opens and closes FL rounds, runs the
near-RT controller on its period (EFL only), allocates per-client bandwidth
according to the policy, integrates upload progress on true channels, and
finally moves the clients.

Rounds of different services run on their own clocks: a service opens its
next round on the tick its previous one closes.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

import numpy as np

from . import controller as ctl
from . import radio
from .config import SimConfig, validate
from .data import Dataset, PartitionSpec, class_centres, dirichlet_partition, load_idx, synth_dataset
from .descriptor import (ClientDescriptor, MobilityPredictor, Registry, ServiceDescriptor,
                         clamp, fallback_predictor, predict_displacement, record_positions,
                         recruit, train_eapp)
from .mac import conserve, greedy_split, service_order
from .metrics import AllocationRecord, MetricsLog, RoundRecord
from .mobility import LevyWalkers
from .model import (AggregationError, ModelParams, TrainConfig, evaluate, fedavg, init_model,
                    local_train, payload_bits)

log = logging.getLogger(__name__)

IDLE, COMPUTING, UPLOADING, DONE, FAILED = range(5)

# stream tags for SeedSequence-derived generators
_MOBILITY, _DATA, _MODEL, _COMPUTE, _TRAIN, _EAPP, _SHADOW = range(7)


class Policy(str, Enum):
    EFL = "EFL"
    BASELINE1 = "Baseline1"
    BASELINE2 = "Baseline2"

    @classmethod
    def parse(cls, text: "str | Policy") -> "Policy":
        if isinstance(text, Policy):
            return text
        for p in cls:
            if p.value.lower() == str(text).lower():
                return p
        raise ValueError(f"unknown policy {text!r}; expected efl, baseline1 or baseline2")


GUARD_TICKS = 0.5


def stream(seed: int, *tags: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, *tags]))


@dataclass
class SimClock:
    tick: int
    mac_dt: float
    nearrt_ticks: int
    nonrt_ticks: int

    @property
    def t(self) -> float:
        return self.tick * self.mac_dt

    @property
    def nearrt_period(self) -> float:
        return self.nearrt_ticks * self.mac_dt

    @property
    def nonrt_period(self) -> float:
        return self.nonrt_ticks * self.mac_dt


@dataclass
class RoundState:
    service: int
    round_index: int = -1
    start_tick: int = 0
    end_tick: int = 0
    active: bool = False
    finished: bool = False
    success: set[int] = field(default_factory=set)
    failure: set[int] = field(default_factory=set)
    alloc_hz_sum: float = 0.0
    alloc_samples: int = 0
    handovers: int = 0


@dataclass
class ServiceFL:
    descriptor: ServiceDescriptor
    clients: np.ndarray  # global client indices, ascending
    shards: list[Dataset]
    test: Dataset
    model: ModelParams
    payload: float
    accuracy: float = 0.0


def ticks(seconds: float, dt: float) -> int:
    return int(round(seconds / dt))


def build_service_data(cfg: SimConfig, sidx: int, seed: int) -> tuple[Dataset, Dataset, list]:
    """Training pool, test set and Dirichlet shards for one service."""
    svc = cfg.services[sidx]
    dcfg = cfg.datasets[svc.dataset_type]
    rng = stream(seed, _DATA, sidx)
    n_train = cfg.fl.samples_per_client * svc.n_clients
    if dcfg.source == "synth":
        centres = class_centres(dcfg.n_classes, dcfg.n_features, dcfg.separation,
                                dcfg.noise_std, rng)
        per_class = max(1, n_train // dcfg.n_classes)
        train = synth_dataset(dcfg.n_classes, per_class, dcfg.n_features, rng,
                              noise_std=dcfg.noise_std, centres=centres)
        test = synth_dataset(dcfg.n_classes, cfg.fl.test_samples_per_class, dcfg.n_features, rng,
                             noise_std=dcfg.noise_std, centres=centres)
    else:
        pool = cfg.fl.pool_to or None
        full = load_idx(dcfg.train_images, dcfg.train_labels, pool, dcfg.n_classes)
        full_test = load_idx(dcfg.test_images, dcfg.test_labels, pool, dcfg.n_classes)
        train = full.subset(np.sort(rng.choice(len(full), min(n_train, len(full)), replace=False)))
        keep = []
        for c in range(dcfg.n_classes):
            idx = np.flatnonzero(full_test.labels == c)
            keep.append(idx[:cfg.fl.test_samples_per_class])
        test = full_test.subset(np.concatenate(keep))
    shards = dirichlet_partition(train, PartitionSpec(svc.alpha, svc.n_clients), rng)
    return train, test, shards


def baseline2_allocate(se_true: np.ndarray, oru_bandwidths: np.ndarray):
    """Best-gain attachment and an equal split of each O-RU among its attached clients.

    Deadlines, services and upload progress play no part. Returns
    ``(oru_per_client, hz_per_client)``.
    """
    oru = np.argmax(se_true, axis=1)
    counts = np.bincount(oru, minlength=len(oru_bandwidths))
    return oru, equal_shares(oru_bandwidths, counts)[oru]


def equal_shares(oru_bandwidths, counts) -> np.ndarray:
    """``B_o / n_o`` per O-RU, rounded down where ``n_o`` copies would exceed ``B_o``."""
    out = np.zeros(len(counts))
    for o, (b, n) in enumerate(zip(oru_bandwidths, counts)):
        if n:
            share = float(b) / int(n)
            if Fraction(share) * int(n) > Fraction(float(b)):
                share = float(np.nextafter(share, 0.0))
            out[o] = share
    return out


def baseline1_allocate(se_true: np.ndarray, previous: ctl.AssignmentPlan, service_of: np.ndarray,
                       service: int, bits: np.ndarray, window: np.ndarray, weights,
                       oru_bandwidths: np.ndarray, f_min: float, hysteresis: float,
                       reserved: np.ndarray, objective: str = "sum", order_rule: str = "gain",
                       running: np.ndarray | None = None):
    """Round-start snapshot allocation for one service, frozen for the round.

    Runs the same assignment and slice split as the controller on true
    positions with every recruited client's full payload, then one MAC-style
    division of the service's slice per O-RU using each client's whole upload
    window. ``reserved`` is bandwidth per O-RU still frozen by other services;
    ``running`` masks the clients whose service is mid-run (default: all).
    Returns ``(plan, hz_per_client, fractions)``; only clients of ``service``
    receive bandwidth.
    """
    plan = ctl.assign_clients(se_true, previous, hysteresis)
    n_services = len(weights)
    running = service_of >= 0 if running is None else running
    K = ctl.compute_load(plan.oru, service_of, bits, running, se_true, oru_bandwidths, n_services)
    fractions = ctl.split_all(weights, K, f_min, objective)
    B = np.asarray(oru_bandwidths, dtype=float)
    free = np.array([float(conserve(np.array([max(b - r, 0.0), r]), b)[0]) if r > 0 else b
                     for b, r in zip(B, reserved)])
    slice_bw = np.minimum(fractions[:, service] * B, free)
    hz = np.zeros(len(se_true))
    ids = np.arange(len(se_true))
    for o in range(len(B)):
        members = np.flatnonzero((plan.oru == o) & (service_of == service))
        if len(members) == 0 or slice_bw[o] <= 0:
            continue
        se = se_true[members, o]
        order = service_order(se, ids[members], None, bits[members], window[members], order_rule)
        hz[members] = greedy_split(bits[members], window[members], se, slice_bw[o], order)
    return plan, hz, fractions


class Simulation:
    """Owns every piece of mutable state for one run."""

    def __init__(self, cfg: SimConfig, policy: Policy | str, seed: int, on_tick=None):
        validate(cfg)
        self.cfg = cfg
        self.policy = Policy.parse(policy)
        self.seed = int(seed)
        self.on_tick = on_tick
        c = cfg.control
        self.clock = SimClock(0, c.mac_dt, ticks(c.nearrt_period, c.mac_dt),
                              ticks(c.nonrt_period, c.mac_dt))
        self.warmup_ticks = ticks(c.warmup, c.mac_dt)
        self.radio = cfg.radio.params()
        self.sites = radio.build_hex_grid(cfg.topology.rings, cfg.topology.inter_site_distance,
                                          cfg.topology.bandwidth_hz)
        self.oru_pos = radio.site_positions(self.sites)
        self.oru_bw = radio.site_bandwidths(self.sites)
        self.bounds = radio.grid_bounds(self.sites)
        self.n_oru = len(self.sites)
        self.n_services = len(cfg.services)
        self.weights = np.array([s.weight for s in cfg.services], dtype=float)

        n = cfg.n_clients
        self.walkers = LevyWalkers.random(n, self.bounds, cfg.mobility.params(),
                                          stream(self.seed, _MOBILITY))
        self.shadow = radio.shadowing(stream(self.seed, _SHADOW), (n, self.n_oru), self.radio)
        self.service_of = np.full(n, -1, dtype=np.int64)
        start = 0
        for sidx, svc in enumerate(cfg.services):
            self.service_of[start:start + svc.n_clients] = sidx
            start += svc.n_clients

        # registry and recruitment
        self.registry = Registry()
        rng_c = stream(self.seed, _COMPUTE)
        iters = max(cfg.fl.local_iterations, 1)
        compute_total = rng_c.uniform(cfg.fl.compute_time_min, cfg.fl.compute_time_max, n)
        self.compute_time = compute_total if cfg.fl.local_iterations else np.zeros(n)
        for cid in range(n):
            sidx = self.service_of[cid]
            dtype = cfg.services[sidx].dataset_type if sidx >= 0 else "unrecruited"
            self.registry.register_client(ClientDescriptor(
                cid, dtype, 0, float(compute_total[cid] / iters)))
        for sidx, svc in enumerate(cfg.services):
            self.registry.register_service(ServiceDescriptor(
                sidx + 1, svc.dataset_type, svc.deadline, svc.weight, svc.target_accuracy,
                svc.recruitment_budget))
        recruit(list(self.registry.clients.values()), list(self.registry.services.values()))

        # FL workloads
        self.train_cfg = TrainConfig(cfg.fl.local_iterations, cfg.fl.learning_rate,
                                     cfg.fl.batch_size)
        self.fl: list[ServiceFL] = []
        for sidx, svc in enumerate(cfg.services):
            train, test, shards = build_service_data(cfg, sidx, self.seed)
            members = np.flatnonzero(self.service_of == sidx)
            sizes = [train.n_features, *cfg.fl.hidden_layers, train.n_classes]
            model = init_model(sizes, stream(self.seed, _MODEL, sidx))
            payload = cfg.fl.payload_bits or payload_bits(model, cfg.fl.bits_per_param)
            for cid, shard in zip(members, shards):
                self.registry.client(int(cid)).dataset_size = len(shard)
            self.fl.append(ServiceFL(self.registry.service(sidx + 1), members,
                                     [train.subset(s) for s in shards], test, model,
                                     float(payload), evaluate(model, test)))

        # per-client round state
        self.status = np.full(n, IDLE, dtype=np.int8)
        self.bits_total = np.zeros(n)
        self.bits_sent = np.zeros(n)
        self.upload_tick = np.zeros(n, dtype=np.int64)
        self.deadline_tick = np.zeros(n, dtype=np.int64)
        self.rounds = [RoundState(s) for s in range(self.n_services)]

        # control state
        self.plan = ctl.AssignmentPlan.empty(n)
        self.slice_bw = np.zeros((self.n_oru, self.n_services))
        self.predictor: MobilityPredictor = fallback_predictor(
            cfg.eapp.window, cfg.eapp.horizon, cfg.control.nonrt_period, self.bounds)
        self.eapp_flagged = True
        self.pred_rate = np.zeros((n, 2))
        self.b1_plan = ctl.AssignmentPlan.empty(n)
        self.b1_hz = np.zeros(n)
        self.b2_oru = np.full(n, -1, dtype=np.int64)
        self.last_hz = np.zeros(n)
        self.last_oru = np.full(n, -1, dtype=np.int64)

        self._sampled_tick = -1
        self.metrics = MetricsLog(self.policy.value, self.seed, cfg.config_hash())
        self.counters = self.metrics.counters
        self.counters.update(controller_invocations=0, nonrt_samples=0, b1_allocation_events=0,
                             max_oru_load=0.0)

    # ------------------------------------------------------------------ helpers

    def true_se(self, rows=None, orus=None) -> np.ndarray:
        pos = self.walkers.positions if rows is None else self.walkers.positions[rows]
        if orus is None:
            d = radio.distance_matrix(pos, self.oru_pos)
            g = radio.channel_gain(d, self.radio)
            if rows is None:
                g = g * self.shadow
            else:
                g = g * self.shadow[rows]
            return radio.spectral_efficiency(g, self.radio)
        d = np.hypot(*(pos - self.oru_pos[orus]).T)
        g = radio.channel_gain(d, self.radio) * self.shadow[rows, orus]
        return radio.spectral_efficiency(g, self.radio)

    def recruited(self) -> np.ndarray:
        return np.flatnonzero(self.service_of >= 0)

    def participating(self) -> np.ndarray:
        """Recruited clients whose service still has rounds to run."""
        running = np.array([not r.finished for r in self.rounds] + [False])
        return np.flatnonzero(running[self.service_of])

    def history_windows(self) -> tuple[np.ndarray, np.ndarray]:
        """Latest ``k`` samples per client (oldest padded) and their newest timestamp."""
        k = self.cfg.eapp.window
        n = self.cfg.n_clients
        win = np.zeros((n, k, 2))
        t_last = np.zeros(n)
        for cid in range(n):
            hist = self.registry.client(cid).position_history
            if not hist:
                win[cid] = self.walkers.positions[cid]
                t_last[cid] = self.clock.t
                continue
            pts = [(x, y) for _, x, y in hist[-k:]]
            pts = [pts[0]] * (k - len(pts)) + pts
            win[cid] = pts
            t_last[cid] = hist[-1][0]
        return win, t_last

    # -------------------------------------------------------------- FL rounds

    def start_round(self, sidx: int) -> None:
        rs = self.rounds[sidx]
        fl = self.fl[sidx]
        svc = self.cfg.services[sidx]
        dt = self.clock.mac_dt
        i = self.clock.tick
        rs.round_index += 1
        rs.start_tick = i
        rs.active = True
        rs.success, rs.failure = set(), set()
        rs.alloc_hz_sum, rs.alloc_samples, rs.handovers = 0.0, 0, 0
        members = fl.clients
        ready = self.cfg.fl.downlink_delay + self.compute_time[members]
        self.upload_tick[members] = i + np.ceil(ready / dt - 1e-9).astype(np.int64)
        if self.cfg.fl.deadline_includes_compute:
            self.deadline_tick[members] = i + ticks(svc.deadline, dt)
        else:
            self.deadline_tick[members] = self.upload_tick[members] + ticks(svc.deadline, dt)
        rs.end_tick = int(self.deadline_tick[members].max())
        self.status[members] = COMPUTING
        self.bits_total[members] = fl.payload
        self.bits_sent[members] = 0.0
        if self.policy is Policy.BASELINE1:
            self._baseline1_round_start(sidx)

    def close_round(self, sidx: int) -> RoundRecord:
        """Aggregate the successful uploads, evaluate, and log the round."""
        rs = self.rounds[sidx]
        fl = self.fl[sidx]
        members = fl.clients
        done = members[self.status[members] == DONE]
        rs.success = set(int(c) for c in done)
        rs.failure = set(int(c) for c in members) - rs.success
        self.status[members[self.status[members] != DONE]] = FAILED
        models, sizes = [], []
        for local, cid in enumerate(members):
            if int(cid) not in rs.success:
                continue
            shard = fl.shards[local]
            if len(shard) == 0:
                continue
            rng = stream(self.seed, _TRAIN, sidx, rs.round_index, int(cid))
            models.append(local_train(fl.model, shard, self.train_cfg, rng))
            sizes.append(len(shard))
        try:
            fl.model = fedavg(models, sizes)
            fl.accuracy = evaluate(fl.model, fl.test)
        except AggregationError:
            log.info("service %d round %d: no usable uploads, global model carried over",
                     sidx + 1, rs.round_index)
        rec = RoundRecord(
            self.policy.value, self.seed, sidx + 1, rs.round_index,
            len(rs.success), len(rs.failure), float(fl.accuracy),
            rs.start_tick * self.clock.mac_dt, self.clock.t,
            rs.alloc_hz_sum / rs.alloc_samples if rs.alloc_samples else 0.0, rs.handovers)
        self.metrics.rounds.append(rec)
        rs.active = False
        self.status[members] = IDLE
        return rec

    # -------------------------------------------------------------- EFL control

    def train_predictor(self) -> None:
        e = self.cfg.eapp
        hists = [self.registry.client(c).position_history for c in range(self.cfg.n_clients)]
        self.predictor, self.eapp_flagged = train_eapp(
            hists, e.window, e.horizon, e.epochs, stream(self.seed, _EAPP, self.clock.tick),
            self.bounds, self.cfg.control.nonrt_period, tuple(e.hidden_layers),
            e.learning_rate, e.batch_size)

    def controller_step(self) -> None:
        """Predict, re-assign, and re-split every O-RU's band among the slices."""
        self.counters["controller_invocations"] += 1
        horizon = self.clock.nearrt_period
        win, _ = self.history_windows()
        now = self.clock.t
        disp = predict_displacement(self.predictor, win)
        # anchor on the positions observed at this invocation; the eApp supplies the drift
        self.pred_rate = disp / self.predictor.horizon
        pos = clamp(self.walkers.positions + self.pred_rate * horizon, self.bounds)
        se = radio.spectral_efficiency(
            radio.channel_gain(radio.distance_matrix(pos, self.oru_pos), self.radio), self.radio)
        rec = self.recruited()
        sub = ctl.AssignmentPlan(self.plan.oru[rec])
        new = ctl.assign_clients(se[rec], sub, self.cfg.radio.hysteresis_margin)
        self.plan.oru[rec] = new.oru
        moved = np.zeros((self.n_oru, self.n_services), dtype=int)
        for local, _, dst in new.handovers:
            cid = rec[local]
            sidx = self.service_of[cid]
            moved[dst, sidx] += 1
            if self.rounds[sidx].active:
                self.rounds[sidx].handovers += 1
        self.plan.handovers = [(int(rec[c]), a, b) for c, a, b in new.handovers]

        i = self.clock.tick
        active = (self.status == UPLOADING) | (
            (self.status == COMPUTING) & (self.upload_tick < i + self.clock.nearrt_ticks))
        remaining = self.bits_total - self.bits_sent
        K = ctl.compute_load(self.plan.oru, self.service_of, remaining, active, se, self.oru_bw,
                             self.n_services)
        fractions = ctl.split_all(self.weights, K, self.cfg.control.f_min,
                                  self.cfg.control.objective)
        # exact per-O-RU fit, so per-slice MAC sums can never add up past B_o
        self.slice_bw = np.vstack([conserve(f * b, b) for f, b in zip(fractions, self.oru_bw)])
        for o in range(self.n_oru):
            for s in range(self.n_services):
                self.metrics.allocations.append(AllocationRecord(
                    now, o, s + 1, float(fractions[o, s]), float(self.slice_bw[o, s]),
                    int(moved[o, s])))

    def efl_allocate(self, up: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        i = self.clock.tick
        dt = self.clock.mac_dt
        now = self.clock.t
        oru = self.plan.oru[up]
        if self.cfg.control.mac_use_true_position:
            se_pred = self.true_se(up, oru)
        else:
            # measured position now, moved along the controller's predicted drift for one tick
            pos = clamp(self.walkers.positions[up] + self.pred_rate[up] * dt, self.bounds)
            d = np.hypot(*(pos - self.oru_pos[oru]).T)
            se_pred = radio.spectral_efficiency(radio.channel_gain(d, self.radio), self.radio)
        hz = np.zeros(len(up))
        remaining = self.bits_total[up] - self.bits_sent[up]
        # aim half a tick early: the last tick then carries 2x headroom against small
        # prediction and rounding errors that would otherwise strand a few bits
        time_left = (self.deadline_tick[up] - i - GUARD_TICKS) * dt
        svc = self.service_of[up]
        key = oru * self.n_services + svc
        for k in np.unique(key):
            o, s = divmod(int(k), self.n_services)
            W = self.slice_bw[o, s]
            if W <= 0:
                continue
            m = np.flatnonzero(key == k)
            order = service_order(se_pred[m], up[m], None, remaining[m], time_left[m],
                                  self.cfg.control.mac_order)
            hz[m] = greedy_split(remaining[m], time_left[m], se_pred[m], W, order)
        return oru, hz

    # -------------------------------------------------------------- baselines

    def _baseline1_round_start(self, sidx: int) -> None:
        self.counters["b1_allocation_events"] += 1
        fl = self.fl[sidx]
        rec = self.recruited()
        se = self.true_se()[rec]
        dt = self.clock.mac_dt
        window = np.maximum(self.deadline_tick[rec] - self.upload_tick[rec] - GUARD_TICKS,
                            GUARD_TICKS) * dt
        bits = np.array([self.fl[s].payload for s in self.service_of[rec]])
        held = [[] for _ in range(self.n_oru)]
        for cid in rec:
            s = self.service_of[cid]
            if s != sidx and self.rounds[s].active and self.b1_plan.oru[cid] >= 0:
                held[self.b1_plan.oru[cid]].append(self.b1_hz[cid])
        # rounded up, so the float never understates the exact frozen total
        reserved = np.array([np.nextafter(math.fsum(h), np.inf) if h else 0.0 for h in held])
        prev = ctl.AssignmentPlan(self.b1_plan.oru[rec])
        plan, hz, fractions = baseline1_allocate(
            se, prev, self.service_of[rec], sidx, bits, window, self.weights, self.oru_bw,
            self.cfg.control.f_min, self.cfg.radio.hysteresis_margin, reserved,
            self.cfg.control.objective, self.cfg.control.mac_order,
            np.isin(rec, self.participating()))
        members = fl.clients
        mine = self.service_of[rec] == sidx
        self.b1_plan.oru[rec[mine]] = plan.oru[mine]
        self.b1_hz[members] = 0.0
        self.b1_hz[rec[mine]] = hz[mine]
        self.rounds[sidx].handovers += sum(1 for c, _, _ in plan.handovers if mine[c])
        now = self.clock.t
        for o in range(self.n_oru):
            bw = float(self.b1_hz[members][self.b1_plan.oru[members] == o].sum())
            self.metrics.allocations.append(AllocationRecord(
                now, o, sidx + 1, float(fractions[o, sidx]), bw, 0))

    def baseline2_step(self) -> None:
        # every recruited client counts, whether or not it has bits left to send
        rec = self.recruited()
        oru, _ = baseline2_allocate(self.true_se(rec), self.oru_bw)
        prev = self.b2_oru[rec]
        changed = (prev >= 0) & (prev != oru)
        for cid in rec[changed]:
            s = self.service_of[cid]
            if self.rounds[s].active:
                self.rounds[s].handovers += 1
        self.b2_oru[rec] = oru

    def policy_allocate(self, up: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        if self.policy is Policy.EFL:
            return self.efl_allocate(up)
        if self.policy is Policy.BASELINE1:
            return self.b1_plan.oru[up], self.b1_hz[up]
        rec = self.recruited()
        counts = np.bincount(self.b2_oru[rec], minlength=self.n_oru)
        oru = self.b2_oru[up]
        return oru, equal_shares(self.oru_bw, counts)[oru]

    # -------------------------------------------------------------- main loop

    def warmup(self) -> None:
        while self.clock.tick < self.warmup_ticks:
            if self.clock.tick % self.clock.nonrt_ticks == 0:
                self.sample_positions()
            self.walkers.advance(self.clock.mac_dt)
            self.clock.tick += 1

    def sample_positions(self) -> None:
        record_positions(self.registry, self.clock.t, self.walkers.positions)
        self.counters["nonrt_samples"] += 1

    def begin(self) -> None:
        """Warm up, train the eApp, and open round 0 of every service."""
        self.warmup()
        if self.clock.tick % self.clock.nonrt_ticks == 0:
            self.sample_positions()
            self._sampled_tick = self.clock.tick
        if self.policy is Policy.EFL:
            self.train_predictor()
        for sidx in range(self.n_services):
            self.start_round(sidx)

    @property
    def finished(self) -> bool:
        return all(r.finished for r in self.rounds)

    def advance_tick(self) -> None:
        """Run every layer that fires on the current tick, then move time on by one tick."""
        clock = self.clock
        i = clock.tick
        dt = clock.mac_dt
        e = self.cfg.eapp
        if i % clock.nonrt_ticks == 0 and self._sampled_tick != i:
            self.sample_positions()
            if (self.policy is Policy.EFL and e.refresh_period > 0
                    and i % ticks(e.refresh_period, dt) == 0):
                self.train_predictor()
        # close every due round before opening any, so simultaneous starts see the same state
        due = [k for k, rs in enumerate(self.rounds) if rs.active and i >= rs.end_tick]
        for sidx in due:
            self.close_round(sidx)
            rs = self.rounds[sidx]
            rs.finished = rs.round_index + 1 >= self.cfg.fl.rounds
        for sidx in due:
            if not self.rounds[sidx].finished:
                self.start_round(sidx)
        self.status[(self.status == COMPUTING) & (self.upload_tick <= i)] = UPLOADING
        if self.policy is Policy.EFL and i % clock.nearrt_ticks == 0:
            self.controller_step()
        if self.policy is Policy.BASELINE2:
            self.baseline2_step()

        up = np.flatnonzero(self.status == UPLOADING)
        self.last_hz[:] = 0.0
        self.last_oru[:] = -1
        if len(up):
            oru, hz = self.policy_allocate(up)
            self.last_hz[up] = hz
            self.last_oru[up] = oru
            load = np.bincount(oru, weights=hz, minlength=self.n_oru) / self.oru_bw
            self.counters["max_oru_load"] = max(self.counters["max_oru_load"], float(load.max()))
            se = self.true_se(up, oru)
            self.bits_sent[up] = np.minimum(self.bits_sent[up] + se * hz * dt, self.bits_total[up])
            finished = self.bits_sent[up] >= self.bits_total[up]
            self.status[up[finished]] = DONE
            late = ~finished & (i + 1 >= self.deadline_tick[up])
            self.status[up[late]] = FAILED
            svc = self.service_of[up]
            for sidx, rs in enumerate(self.rounds):
                mask = svc == sidx
                if mask.any():
                    rs.alloc_hz_sum += float(hz[mask].sum())
                    rs.alloc_samples += int(mask.sum())
            if self.cfg.control.log_mac_ticks:
                for cid, o, w in zip(up, oru, hz):
                    self.metrics.mac_ticks.append(
                        (clock.t, int(o), int(self.service_of[cid]) + 1, int(cid), float(w)))
        if self.on_tick is not None:
            self.on_tick(self)
        self.walkers.advance(dt)
        clock.tick += 1

    def run(self) -> MetricsLog:
        self.begin()
        while not self.finished:
            self.advance_tick()
        return self.metrics


def run(cfg: SimConfig, policy: Policy | str, seed: int | None = None, on_tick=None) -> MetricsLog:
    """Simulate ``cfg`` under ``policy`` until every service finishes its rounds."""
    return Simulation(cfg, policy, cfg.seed if seed is None else seed, on_tick).run()
