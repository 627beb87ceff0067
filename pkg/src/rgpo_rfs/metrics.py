"""Monte Carlo orchestration and metric aggregation."""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .bench import default_clairvoyant
from .sim import ScenarioConfig, TruthRecord, generate_scans, generate_trajectory
from .tracker import RfsTracker, TrackerConfig

TRACKER_NAMES = ("adaptive", "nonadaptive", "naive", "clairvoyant")


@dataclass(frozen=True)
class TrackerSpec:
    """A named tracker and the configuration it runs with.

    ``config`` is ignored for the clairvoyant tracker apart from its priors.
    """

    name: str
    config: TrackerConfig = field(default_factory=TrackerConfig)
    label: Optional[str] = None

    def __post_init__(self):
        if self.name not in TRACKER_NAMES:
            raise ValueError(f"unknown tracker {self.name!r}; expected one of {TRACKER_NAMES}")

    @property
    def key(self) -> str:
        """Column name in the aggregate table."""
        return self.label or self.name


def tracker_spec(name: str, scenario: ScenarioConfig, multi_component: Optional[bool] = None,
                 **overrides) -> TrackerSpec:
    """Tracker matched to a scenario's noise levels.

    Multi-component management defaults to on whenever the scenario has
    overlapping attacks.
    """
    if multi_component is None:
        multi_component = has_overlapping_attacks(scenario)
    mode = name if name != "clairvoyant" else "naive"
    cfg = TrackerConfig(mode=mode, multi_component=multi_component, delta=scenario.delta,
                        sigma_q=scenario.sigma_q, sigma_r=scenario.sigma_r, p_d=scenario.p_d,
                        lambda0_bar=scenario.clutter.lambda0_bar, fov=scenario.clutter.fov,
                        radar_position=tuple(scenario.radar_position))
    return TrackerSpec(name, replace(cfg, **overrides))


def has_overlapping_attacks(scenario: ScenarioConfig) -> bool:
    n = scenario.n_steps
    spans = [(a.start_step, n if a.end_step is None else a.end_step) for a in scenario.attacks]
    return any(s2 <= e1 and s1 <= e2 for i, (s1, e1) in enumerate(spans)
               for (s2, e2) in spans[i + 1:])


@dataclass
class RunRecord:
    """Per-step outputs of one tracker on one replica."""

    tracker: str
    positions: np.ndarray      # (n, 2)
    p_jam: np.ndarray
    bias_mean: np.ndarray
    bias_std: np.ndarray
    c_k: np.ndarray

    def __post_init__(self):
        n = self.positions.shape[0]
        for name in ("p_jam", "bias_mean", "bias_std", "c_k"):
            if getattr(self, name).shape != (n,):
                raise ValueError(f"{name} length does not match the number of steps")

    @property
    def n_steps(self) -> int:
        return self.positions.shape[0]


@dataclass
class AggregateTable:
    """Per-step statistics across replicas, one row block per tracker."""

    steps: np.ndarray
    trackers: list
    rmse: dict
    p_jam: dict
    bias_true: np.ndarray
    bias_est: dict
    bias_std: dict
    c_k: dict
    pcrb: Optional[np.ndarray] = None
    records: dict = field(default_factory=dict)   # tracker -> list[RunRecord], replica order
    truth: Optional[TruthRecord] = None

    def rows(self):
        """Yield CSV rows as tuples in the fixed column order."""
        for name in self.trackers:
            for i, k in enumerate(self.steps):
                row = (int(k), name, self.rmse[name][i], self.p_jam[name][i], self.bias_true[i],
                       self.bias_est[name][i], self.bias_std[name][i], self.c_k[name][i])
                if self.pcrb is not None:
                    row = row + (self.pcrb[i],)
                yield row


def position_rmse(estimates, truth) -> np.ndarray:
    """Per-step RMSE over replicas; ``estimates`` is (runs, n, 2), ``truth`` (n, 2)."""
    est = np.asarray(estimates, dtype=float)
    tru = np.asarray(truth, dtype=float)
    if est.ndim == 2:
        est = est[None]
    if est.shape[1:] != tru.shape:
        raise ValueError(f"estimate shape {est.shape[1:]} does not match truth shape {tru.shape}")
    err = ((est - tru) ** 2).sum(-1)
    return np.sqrt(err.mean(0))


def reported_true_bias(truth: TruthRecord, starts: Sequence[int]) -> np.ndarray:
    """Bias of the most recently started active attack at each step (NaN when none)."""
    out = np.full(truth.n_steps, np.nan)
    order = np.argsort(starts, kind="stable")
    for a in order:
        col = truth.biases[:, a]
        ok = ~np.isnan(col)
        out[ok] = col[ok]
    return out


def _run_replica(args) -> list[RunRecord]:
    cfg, specs, truth, seed = args
    scans = generate_scans(truth, cfg, seed)
    n = truth.n_steps
    records = []
    for spec in specs:
        pos = np.empty((n, 2))
        p_jam, b_mean, b_std, c_k = (np.full(n, np.nan) for _ in range(4))
        if spec.name == "clairvoyant":
            tc = spec.config
            trk = default_clairvoyant(tc.sigma_q, tc.sigma_r, tc.delta, tc.prior_mean, tc.prior_var,
                                      tc.radar_position)
            for k, scan in enumerate(scans, start=1):
                pos[k - 1] = trk.step(scan, truth.active_biases(k)).mean[:2]
            c_k[:] = 0.0
        else:
            trk = RfsTracker(spec.config)
            for k, scan in enumerate(scans):
                rep = trk.step(scan)
                pos[k] = rep.position
                p_jam[k], b_mean[k], b_std[k], c_k[k] = rep.p_jam, rep.bias_mean, rep.bias_std, rep.c_k
        records.append(RunRecord(spec.key, pos, p_jam, b_mean, b_std, c_k))
    return records


def worker_count() -> int:
    env = os.environ.get("RGPO_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError as exc:
            raise ValueError(f"RGPO_THREADS must be a positive integer, got {env!r}") from exc
        if n < 1:
            raise ValueError(f"RGPO_THREADS must be a positive integer, got {env!r}")
        return n
    return os.cpu_count() or 1


def _nanmean(a: np.ndarray) -> np.ndarray:
    ok = ~np.isnan(a)
    cnt = ok.sum(0)
    tot = np.where(ok, a, 0.0).sum(0)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(cnt > 0, tot / np.maximum(cnt, 1), np.nan)


def run_monte_carlo(cfg: ScenarioConfig, trackers: Sequence[TrackerSpec], n_runs: int,
                    base_seed: int = 0, truth: Optional[TruthRecord] = None,
                    pcrb: Optional[np.ndarray] = None, workers: Optional[int] = None) -> AggregateTable:
    """Run every tracker on ``n_runs`` replicas of a fixed trajectory.

    Replica ``r`` draws its scans with seed ``base_seed + r`` and every
    tracker sees the same scans. Results are reduced in replica order, so
    the table does not depend on which worker finishes first.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be at least 1")
    if not trackers:
        raise ValueError("at least one tracker is required")
    names = [t.key for t in trackers]
    if len(set(names)) != len(names):
        raise ValueError("tracker labels must be unique")
    truth = generate_trajectory(cfg) if truth is None else truth
    jobs = [(cfg, tuple(trackers), truth, base_seed + r) for r in range(n_runs)]
    workers = worker_count() if workers is None else workers
    if workers <= 1 or n_runs == 1:
        results = [_run_replica(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, n_runs)) as pool:
            results = list(pool.map(_run_replica, jobs))

    records = {name: [res[i] for res in results] for i, name in enumerate(names)}
    return aggregate(records, truth, [a.start_step for a in cfg.attacks], pcrb)


def aggregate(records: dict, truth: TruthRecord, attack_starts: Sequence[int] = (),
              pcrb: Optional[np.ndarray] = None) -> AggregateTable:
    """Reduce ``{tracker: [RunRecord, ...]}`` to per-step statistics."""
    names = list(records)
    tab = AggregateTable(np.arange(1, truth.n_steps + 1), names, {}, {},
                         reported_true_bias(truth, attack_starts), {}, {}, {}, pcrb, records, truth)
    for name in names:
        recs = records[name]
        if not recs:
            raise ValueError(f"no replicas recorded for {name!r}")
        tab.rmse[name] = position_rmse(np.stack([r.positions for r in recs]), truth.positions)
        tab.p_jam[name] = _nanmean(np.stack([r.p_jam for r in recs]))
        tab.bias_est[name] = _nanmean(np.stack([r.bias_mean for r in recs]))
        tab.bias_std[name] = _nanmean(np.stack([r.bias_std for r in recs]))
        tab.c_k[name] = _nanmean(np.stack([r.c_k for r in recs]))
    return tab
