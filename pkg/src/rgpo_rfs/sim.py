"""Ground truth, RGPO attack synthesis and scan generation."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .models import ClutterModel

G = 9.81
MAX_REDRAWS = 1000


class TrajectoryError(ValueError):
    pass


@dataclass(frozen=True)
class AttackSchedule:
    """Linear pull-off attack active on steps ``start_step..end_step`` inclusive."""

    start_step: int
    end_step: Optional[int] = None
    pull_off_velocity: float = 0.5

    def __post_init__(self):
        if self.pull_off_velocity <= 0:
            raise ValueError("pull-off velocity must be positive")
        if self.end_step is not None and self.end_step <= self.start_step:
            raise ValueError("attack end must come after its start")

    def active(self, k: int, n_steps: int) -> bool:
        end = n_steps if self.end_step is None else self.end_step
        return self.start_step <= k <= end


@dataclass(frozen=True)
class ScenarioConfig:
    id: int = 1
    n_steps: int = 100
    delta: float = 0.5
    initial_state: tuple = (430.0, 380.0, 6.0, 4.5)
    turn_starts: tuple = ()
    turn_directions: tuple = ()
    turn_accel: float = 3 * G
    attacks: tuple = ()
    sigma_r: float = math.sqrt(5.0)
    sigma_q: float = math.sqrt(5.0)
    p_d: float = 0.98
    p_j: float = 0.98
    clutter: ClutterModel = field(default_factory=lambda: ClutterModel(20.0))
    radar_position: tuple = (0.0, 0.0)
    seed: int = 0

    def __post_init__(self):
        for a in self.attacks:
            end = self.n_steps if a.end_step is None else a.end_step
            if a.start_step < 1 or end > self.n_steps:
                raise ValueError(f"attack {a} lies outside steps 1..{self.n_steps}")

    @property
    def times(self) -> np.ndarray:
        return self.delta * np.arange(1, self.n_steps + 1)


@dataclass
class TruthRecord:
    """True states for steps 1..n (row k-1 is step k) and per-attack biases.

    ``biases[k-1, a]`` is NaN when attack ``a`` is inactive at step ``k``.
    """

    states: np.ndarray
    biases: np.ndarray
    delta: float

    @property
    def n_steps(self) -> int:
        return self.states.shape[0]

    @property
    def positions(self) -> np.ndarray:
        return self.states[:, :2]

    def active_biases(self, k: int) -> dict:
        row = self.biases[k - 1]
        return {a + 1: float(b) for a, b in enumerate(row) if not np.isnan(b)}


@dataclass
class ScanSet:
    """One scan of 2D detections; ``labels`` are for oracle use only."""

    points: np.ndarray
    labels: tuple = ()

    def __len__(self):
        return self.points.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.points if dtype is None else self.points.astype(dtype)


def rgpo_bias(v_po: float, t_k: float, t_0: float) -> float:
    if t_k < t_0:
        raise ValueError("dwell time precedes the attack start")
    return v_po * (t_k - t_0)


def _ct_step(state: np.ndarray, omega: float, delta: float) -> np.ndarray:
    x, y, vx, vy = state
    wd = omega * delta
    s, c = math.sin(wd), math.cos(wd)
    a, b = s / omega, (1.0 - c) / omega
    return np.array([x + a * vx - b * vy, y + b * vx + a * vy,
                     c * vx - s * vy, s * vx + c * vy])


def turn_schedule(speed: float, accel: float, delta: float) -> tuple[float, int]:
    """Turn rate and step count for a roughly quarter-circle coordinated turn."""
    omega = accel / speed
    return omega, math.ceil((math.pi / 2) / (omega * delta))


def generate_trajectory(cfg: ScenarioConfig) -> TruthRecord:
    n, dt = cfg.n_steps, cfg.delta
    states = np.empty((n, 4))
    states[0] = cfg.initial_state
    dirs = list(cfg.turn_directions) or [1.0] * len(cfg.turn_starts)
    turning = {}
    for start, sgn in zip(cfg.turn_starts, dirs):
        speed = float(np.hypot(*states[0, 2:]))  # speed is invariant along the path
        omega, steps = turn_schedule(speed, cfg.turn_accel, dt)
        for k in range(start, start + steps):
            turning[k] = sgn * omega
    F = np.eye(4)
    F[0, 2] = F[1, 3] = dt
    for k in range(1, n):
        # transition from step k to k+1
        if k in turning:
            states[k] = _ct_step(states[k - 1], turning[k], dt)
        else:
            states[k] = F @ states[k - 1]
    inside = cfg.clutter.contains(states[:, :2])
    if not inside.all():
        bad = int(np.flatnonzero(~inside)[0]) + 1
        raise TrajectoryError(f"trajectory leaves the field of view at step {bad}")

    biases = np.full((n, len(cfg.attacks)), np.nan)
    for a, att in enumerate(cfg.attacks):
        for k in range(1, n + 1):
            if att.active(k, n):
                biases[k - 1, a] = rgpo_bias(att.pull_off_velocity, k * dt, att.start_step * dt)
    return TruthRecord(states, biases, dt)


def true_los(position, radar_position=(0.0, 0.0)) -> np.ndarray:
    d = np.asarray(position, dtype=float) - np.asarray(radar_position, dtype=float)
    return d / np.hypot(d[0], d[1])


def generate_scan(truth: TruthRecord, step: int, cfg: ScenarioConfig,
                  rng: np.random.Generator) -> ScanSet:
    """Draw the detections of one scan.

    Target and jammer returns falling outside the field of view are not
    observed; clutter is drawn uniformly inside it.
    """
    if not 1 <= step <= truth.n_steps:
        raise ValueError(f"step {step} outside 1..{truth.n_steps}")
    pos = truth.states[step - 1, :2]
    pts, labels = [], []

    def draw(centre, label):
        # redraw the noise so returns stay inside the FOV; a centre far
        # outside gives up after a bounded number of tries and drops the return
        for _ in range(MAX_REDRAWS):
            z = centre + cfg.sigma_r * rng.standard_normal(2)
            if cfg.clutter.contains(z[None])[0]:
                pts.append(z)
                labels.append(label)
                return

    if rng.random() < cfg.p_d:
        draw(pos, "target")
    los = true_los(pos, cfg.radar_position)
    for a, b in truth.active_biases(step).items():
        if rng.random() < cfg.p_j:
            draw(pos + b * los, f"jammer-{a}")
    n_c = rng.poisson(cfg.clutter.lambda0_bar)
    lo = np.array([b[0] for b in cfg.clutter.fov])
    hi = np.array([b[1] for b in cfg.clutter.fov])
    clutter = lo + (hi - lo) * rng.random((n_c, 2))
    points = np.vstack([np.array(pts).reshape(-1, 2), clutter])
    labels = labels + ["clutter"] * n_c
    order = rng.permutation(points.shape[0])
    return ScanSet(points[order], tuple(labels[i] for i in order))


def generate_scans(truth: TruthRecord, cfg: ScenarioConfig, seed: int) -> list[ScanSet]:
    rng = np.random.default_rng(seed)
    return [generate_scan(truth, k, cfg, rng) for k in range(1, truth.n_steps + 1)]


TURNS = (10, 40, 70)


def preset_scenarios() -> list[ScenarioConfig]:
    """The four evaluation scenarios (straight or three 3 g turns, one or many attacks)."""
    s = math.sqrt
    return [
        ScenarioConfig(1, attacks=(AttackSchedule(10, 75, 0.5), AttackSchedule(85, None, 0.5)),
                       sigma_q=s(5.0)),
        ScenarioConfig(2, turn_starts=TURNS, turn_directions=(1.0, -1.0, -1.0),
                       attacks=(AttackSchedule(10, None, 5.0),), sigma_q=s(40.0)),
        ScenarioConfig(3, attacks=(AttackSchedule(1, 50, 5.0), AttackSchedule(15, 75, 3.0),
                                   AttackSchedule(85, None, 3.0)), sigma_q=s(5.0)),
        ScenarioConfig(4, turn_starts=TURNS, turn_directions=(1.0, -1.0, -1.0),
                       attacks=(AttackSchedule(1, 60, 5.0), AttackSchedule(40, 80, 3.0)),
                       sigma_q=s(40.0)),
    ]


def scenario(scenario_id: int) -> ScenarioConfig:
    for cfg in preset_scenarios():
        if cfg.id == scenario_id:
            return cfg
    raise ValueError(f"unknown scenario {scenario_id}")
