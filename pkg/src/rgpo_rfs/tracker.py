"""Single-target Gaussian-mixture RFS Bayes recursion with jammer-aware clutter.

Each posterior component is one data-association hypothesis: the target is
either missed or explains exactly one measurement, and every other
measurement is charged to uniform clutter or to one of the jammer mixture
components.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from .gaussmix import (Mixture, batch_logpdf, batch_update, gate_negative_bias, mahalanobis_sq,
                       mixture_moments, reduce_mixture, symmetrize)
from .models import (AdaptiveJammerModel, ClutterModel, MeasurementModel, MotionModel,
                     NonAdaptiveJammerModel, build_cv_model, clutter_mixture_weights,
                     stack_jammer_obs)

VIGILANT, ACTIVE, DORMANT = "vigilant", "active", "dormant"

# chi-square (2 dof) gate; exp(-DEFAULT_GATE / 2) is ~1e-13
DEFAULT_GATE = 60.0

TARGET = -1
UNIFORM = 0


@dataclass
class JammerComponentRecord:
    status: str = VIGILANT
    below_timer: int = 0
    above_timer: int = 0
    state_slot: Optional[int] = None

    @property
    def awake(self) -> bool:
        return self.status != DORMANT


@dataclass(frozen=True)
class AssociationHypothesis:
    """Lineage of a posterior component.

    ``labels[j]`` is ``TARGET`` (-1), ``UNIFORM`` (0) or the 1-based jammer
    component that measurement ``j`` was charged to.
    """

    parent: int
    target: Optional[int]
    labels: tuple
    log_weight: float = 0.0

    @property
    def clutter_assignment(self) -> dict:
        return {j: lab for j, lab in enumerate(self.labels) if lab != TARGET}


@dataclass
class Belief:
    mixture: Mixture
    registry: list = field(default_factory=list)
    timestep: int = 0
    kinematic_dim: int = 4

    def __post_init__(self):
        if self.mixture.dim != self.kinematic_dim + self.n_awake:
            raise ValueError(
                f"mixture dim {self.mixture.dim} != {self.kinematic_dim} + {self.n_awake} awake biases")

    @property
    def awake(self) -> list:
        return [r for r in self.registry if r.awake]

    @property
    def n_awake(self) -> int:
        return sum(r.awake for r in self.registry)

    @property
    def bias_slots(self) -> list:
        return [r.state_slot for r in self.registry if r.awake]

    def replace(self, **kw) -> "Belief":
        kw.setdefault("registry", [dataclasses.replace(r) for r in self.registry])
        return dataclasses.replace(self, **kw)


def initial_belief(mean, cov, n_bias: int = 0, kinematic_dim: int = 4) -> Belief:
    """Single-component belief; trailing ``n_bias`` coordinates are vigilant biases."""
    mix = Mixture.single(mean, cov)
    registry = [JammerComponentRecord(VIGILANT, state_slot=kinematic_dim + i) for i in range(n_bias)]
    return Belief(mix, registry, 0, kinematic_dim)


def predict(belief: Belief, motion: MotionModel) -> Belief:
    F, Q = motion.F, motion.Q
    mix = belief.mixture
    if F.shape[0] != mix.dim:
        raise ValueError(f"motion model dim {F.shape[0]} does not match belief dim {mix.dim}")
    means = mix.means @ F.T
    covs = symmetrize(F @ mix.covs @ F.T + Q)
    out = Mixture(mix.log_weights.copy(), means, covs, list(mix.lineage))
    return belief.replace(mixture=out, timestep=belief.timestep + 1)


@dataclass
class RawHypotheses:
    """Unreduced association hypotheses produced by :func:`enumerate_hypotheses`."""

    log_weights: np.ndarray
    means: np.ndarray
    covs: np.ndarray
    parent: np.ndarray
    labels: np.ndarray

    def __len__(self):
        return self.log_weights.shape[0]

    def target_index(self, i: int) -> Optional[int]:
        hit = np.flatnonzero(self.labels[i] == TARGET)
        return int(hit[0]) if hit.size else None

    def hypothesis(self, i: int, log_weight: float = 0.0) -> AssociationHypothesis:
        return AssociationHypothesis(int(self.parent[i]), self.target_index(i),
                                     tuple(int(x) for x in self.labels[i]), float(log_weight))


def _log(x):
    with np.errstate(divide="ignore"):
        return np.log(x)


def _jammer_arrays(builder, means, c_total):
    if c_total == 0:
        return None
    return stack_jammer_obs(builder, means, c_total)


def _predicted_gate(means, covs, Z, meas_model, jam, gate):
    """Which (component, measurement, option) triples survive the chi-square gate.

    Option 0 is the target; option i >= 1 is jammer component i.
    """
    H, R = meas_model.H, meas_model.R
    M, n = means.shape[0], Z.shape[0]
    C = 0 if jam is None else jam[0].shape[1]
    act = np.zeros((M, n, 1 + C), dtype=bool)
    S = symmetrize(H @ covs @ H.T + R)
    nu = Z[None, :, :] - (means @ H.T)[:, None, :]
    act[:, :, 0] = _mahalanobis(nu, S[:, None]) <= gate
    if C:
        B, off, D = jam
        mu = (B @ means[:, None, :, None])[..., 0] + off          # (M, C, dz)
        Sig = symmetrize(B @ covs[:, None] @ np.swapaxes(B, -1, -2) + D)
        nu = Z[None, None, :, :] - mu[:, :, None, :]              # (M, C, n, dz)
        d2 = _mahalanobis(nu, Sig[:, :, None])
        act[:, :, 1:] = np.moveaxis(d2, 1, 2) <= gate
    return act


def _mahalanobis(nu, S):
    return mahalanobis_sq(nu, S)


def enumerate_hypotheses(predicted: Belief, scan, meas_model: MeasurementModel,
                         clutter: ClutterModel, jammer_obs_builder, p_d: float,
                         gate: Optional[float] = DEFAULT_GATE,
                         max_branches: Optional[int] = None) -> RawHypotheses:
    """Expand the set-valued likelihood into association hypotheses.

    With ``gate=None`` the expansion is exhaustive: every predicted component
    yields ``(1+C)**n`` misdetection and ``n*(1+C)**(n-1)`` detection
    hypotheses for ``n`` measurements and ``C`` jammer components. With a gate,
    options whose predicted chi-square distance exceeds it are dropped, and a
    measurement gated out of every option for every component is left as
    uniform clutter everywhere (its common factor cancels on normalization).
    """
    mix = predicted.mixture
    if len(mix) == 0:
        raise ValueError("predicted mixture is empty")
    Z = np.asarray(scan, dtype=float)
    dz = meas_model.H.shape[0]
    Z = Z.reshape(-1, dz)
    n = Z.shape[0]
    M, d = mix.means.shape
    C = clutter.n_jammer
    jam = _jammer_arrays(jammer_obs_builder, mix.means, C)

    log_unif = _log(clutter.lambda0_bar * clutter.uniform_density)
    log_rates = _log(np.asarray(clutter.lambda_i_bar, dtype=float))
    log_pd, log_qd = _log(p_d), _log(1.0 - p_d)
    H, R = meas_model.H, meas_model.R

    if gate is None:
        act = np.ones((M, n, 1 + C), dtype=bool)
    else:
        act = _predicted_gate(mix.means, mix.covs, Z, meas_model, jam, gate)

    root = np.arange(M)
    lw = mix.log_weights.copy()
    means, covs = mix.means.copy(), mix.covs.copy()
    has_t = np.zeros(M, dtype=bool)
    labels = np.zeros((M, n), dtype=np.int8)

    for j in np.flatnonzero(act.any(axis=(0, 2))):
        z = Z[j]
        parts = [(np.arange(len(lw)), lw + log_unif, means, covs, UNIFORM)]
        sel = np.flatnonzero(~has_t & act[root, j, 0])
        if sel.size:
            m2, P2, ll = batch_update(means[sel], covs[sel], H, 0.0, R, z)
            parts.append((sel, lw[sel] + log_pd + ll, m2, P2, TARGET))
        for i in range(C):
            sel = np.flatnonzero(act[root, j, 1 + i])
            if not sel.size:
                continue
            r = root[sel]
            m2, P2, ll = batch_update(means[sel], covs[sel], jam[0][r, i], jam[1][r, i],
                                      jam[2][r, i], z)
            parts.append((sel, lw[sel] + log_rates[i] + ll, m2, P2, i + 1))

        idx = np.concatenate([p[0] for p in parts])
        lw = np.concatenate([p[1] for p in parts])
        means = np.concatenate([p[2] for p in parts])
        covs = np.concatenate([p[3] for p in parts])
        root = root[idx]
        labels = labels[idx]
        labels[:, j] = np.concatenate([np.full(p[0].size, p[4], dtype=np.int8) for p in parts])
        has_t = has_t[idx] | (labels[:, j] == TARGET)

        keep = None
        if gate is not None:
            finite = np.isfinite(lw)
            if finite.any() and not finite.all():
                keep = np.flatnonzero(finite)
        if max_branches is not None and (len(lw) if keep is None else keep.size) > max_branches:
            cand = np.arange(len(lw)) if keep is None else keep
            score = lw[cand] + np.where(has_t[cand], 0.0, log_qd)
            top = np.lexsort((cand, -score))[:max_branches]
            keep = np.sort(cand[top])
        if keep is not None:
            lw, means, covs = lw[keep], means[keep], covs[keep]
            root, labels, has_t = root[keep], labels[keep], has_t[keep]

    lw = lw + np.where(has_t, 0.0, log_qd)
    return RawHypotheses(lw, means, symmetrize(covs), root, labels)


def update(belief: Belief, scan, meas_model: MeasurementModel, clutter: ClutterModel,
           jammer_obs_builder, p_d: float, prune_threshold: float = 1e-5, cap: int = 100,
           gate: Optional[float] = DEFAULT_GATE, bias_gate: bool = True,
           max_branches: Optional[int] = None) -> Belief:
    """Measurement update of a predicted belief with one scan.

    The posterior components carry :class:`AssociationHypothesis` lineage.
    Hypotheses with a negative bias mean are zeroed when ``bias_gate`` is set,
    then the mixture is pruned and capped.
    """
    raw = enumerate_hypotheses(belief, scan, meas_model, clutter, jammer_obs_builder, p_d,
                               gate=gate, max_branches=max_branches)
    mix = Mixture(raw.log_weights, raw.means, raw.covs, list(range(len(raw))))
    if not np.isfinite(logsumexp(mix.log_weights)):
        # every hypothesis has zero likelihood; keep the predicted density
        return belief.replace(mixture=belief.mixture.copy())
    mix = mix.normalized()
    if bias_gate and belief.bias_slots:
        mix = gate_negative_bias(mix, belief.bias_slots)
    mix = reduce_mixture(mix, prune_threshold, cap)
    mix.lineage = [raw.hypothesis(i, lw) for i, lw in zip(mix.lineage, mix.log_weights)]
    return belief.replace(mixture=mix)


def detect_jamming(posterior: Belief, scan, predicted: Belief, clutter: ClutterModel,
                   jammer_obs_builder, return_per_hypothesis: bool = False):
    """Posterior probability that at least one measurement is jammer-generated.

    Each secondary measurement's clutter probability uses the parent predicted
    component of the hypothesis; the returned value is the posterior-weighted
    average over hypotheses.
    """
    mix = posterior.mixture
    w = np.exp(mix.log_weights - logsumexp(mix.log_weights))
    C = clutter.n_jammer
    cw = clutter_mixture_weights(clutter)
    Z = np.asarray(scan, dtype=float)
    pmix = predicted.mixture
    dz = Z.shape[-1] if Z.size else 2
    Z = Z.reshape(-1, dz)
    n = Z.shape[0]
    if n == 0 or C == 0 or not np.any(cw[1:] > 0):
        p = np.zeros(len(mix))
        return (0.0, p) if return_per_hypothesis else 0.0

    B, off, D = stack_jammer_obs(jammer_obs_builder, pmix.means, C)
    mu = (B @ pmix.means[:, None, :, None])[..., 0] + off
    Sig = symmetrize(B @ pmix.covs[:, None] @ np.swapaxes(B, -1, -2) + D)
    nu = Z[None, None, :, :] - mu[:, :, None, :]                     # (M, C, n, dz)
    logN = batch_logpdf(nu, np.broadcast_to(Sig[:, :, None], nu.shape[:3] + (dz, dz)))
    log_u = _log(cw[0] * clutter.uniform_density)
    terms = np.concatenate([np.full((pmix.means.shape[0], 1, n), log_u),
                            _log(cw[1:])[None, :, None] + logN], axis=1)
    log_f = log_u - logsumexp(terms, axis=1)                          # (Mpred, n)

    p = np.empty(len(mix))
    for k, hyp in enumerate(mix.lineage):
        row = log_f[hyp.parent]
        mask = np.ones(n, dtype=bool)
        if hyp.target is not None:
            mask[hyp.target] = False
        if not mask.any():
            p[k] = 0.0
            continue
        s = row[mask].sum()
        p[k] = -np.expm1(s) if np.isfinite(s) else 1.0
    p = np.clip(p, 0.0, 1.0)
    total = float(np.clip(w @ p, 0.0, 1.0))
    return (total, p) if return_per_hypothesis else total


def augment_bias(belief: Belief, prior_mean: float = 0.0, prior_var: float = 500.0) -> Belief:
    mix = belief.mixture
    M, d = mix.means.shape
    means = np.hstack([mix.means, np.full((M, 1), float(prior_mean))])
    covs = np.zeros((M, d + 1, d + 1))
    covs[:, :d, :d] = mix.covs
    covs[:, d, d] = prior_var
    registry = [dataclasses.replace(r) for r in belief.registry]
    registry.append(JammerComponentRecord(VIGILANT, state_slot=d))
    return belief.replace(mixture=Mixture(mix.log_weights.copy(), means, covs, list(mix.lineage)),
                          registry=registry)


def remove_bias(belief: Belief, slot: int) -> Belief:
    if slot not in belief.bias_slots:
        raise ValueError(f"state coordinate {slot} is not an awake bias slot")
    mix = belief.mixture
    keep = np.delete(np.arange(mix.dim), slot)
    out_mix = Mixture(mix.log_weights.copy(), mix.means[:, keep],
                      mix.covs[:, keep][:, :, keep], list(mix.lineage))
    registry = [dataclasses.replace(r) for r in belief.registry]
    for rec in registry:
        if not rec.awake:
            continue
        if rec.state_slot == slot:
            rec.status, rec.state_slot = DORMANT, None
            rec.below_timer = rec.above_timer = 0
        elif rec.state_slot > slot:
            rec.state_slot -= 1
    return belief.replace(mixture=out_mix, registry=registry)


def reset_bias(belief: Belief, slot: int, prior_mean: float, prior_var: float) -> Belief:
    """Replace the bias marginal at ``slot`` by the prior, decoupled from the rest."""
    mix = belief.mixture
    means = mix.means.copy()
    covs = mix.covs.copy()
    means[:, slot] = prior_mean
    covs[:, slot, :] = 0.0
    covs[:, :, slot] = 0.0
    covs[:, slot, slot] = prior_var
    return belief.replace(mixture=Mixture(mix.log_weights.copy(), means, covs, list(mix.lineage)))


@dataclass(frozen=True)
class LifecycleThresholds:
    u_act: float = 5.0
    t_act: float = 7.0
    u_dorm: float = 5.0
    t_dorm: float = 4.0


def bias_std(belief: Belief) -> np.ndarray:
    """Moment-matched standard deviation of every awake bias coordinate."""
    slots = belief.bias_slots
    if not slots:
        return np.zeros(0)
    _, cov = mixture_moments(belief.mixture)
    return np.sqrt(np.maximum(np.diag(cov)[slots], 0.0))


def manage_lifecycle(belief: Belief, thresholds: LifecycleThresholds = LifecycleThresholds(),
                     delta: float = 0.5, prior_bias=(0.0, 500.0),
                     single_component: bool = False) -> Belief:
    """Advance vigilance timers and apply activation, dormancy or restart.

    Only active components can go dormant; the vigilant component is kept so
    that a new attack can always be picked up. With ``single_component`` the
    lone bias is restarted from the prior instead of going dormant.
    """
    act_steps = int(round(thresholds.t_act / delta))
    dorm_steps = int(round(thresholds.t_dorm / delta))
    out = belief.replace()
    for rec, s in zip(out.awake, bias_std(out)):
        rec.below_timer = rec.below_timer + 1 if s < thresholds.u_act else 0
        rec.above_timer = rec.above_timer + 1 if s > thresholds.u_dorm else 0

    if single_component:
        for k, rec in enumerate(out.registry):
            if rec.awake and rec.above_timer >= dorm_steps:
                out = reset_bias(out, rec.state_slot, *prior_bias)
                out.registry[k].above_timer = out.registry[k].below_timer = 0
        return out

    for k in range(len(out.registry)):
        rec = out.registry[k]
        if rec.status == ACTIVE and rec.above_timer >= dorm_steps:
            out = remove_bias(out, rec.state_slot)
    need_vigilant = True
    for rec in out.registry:
        if rec.status != VIGILANT:
            continue
        if rec.below_timer >= act_steps:
            rec.status = ACTIVE
            rec.above_timer = 0
        else:
            need_vigilant = False
    if need_vigilant:
        out = augment_bias(out, *prior_bias)
    return out


def estimate_state(belief: Belief):
    """Moment-matched position, velocity and awake bias means."""
    mean, _ = mixture_moments(belief.mixture)
    k = belief.kinematic_dim
    half = k // 2
    return mean[:half].copy(), mean[half:k].copy(), [float(mean[s]) for s in belief.bias_slots]


@dataclass
class TrackerConfig:
    """Parameters of the resilient and naive RFS trackers."""

    mode: str = "adaptive"                  # adaptive | nonadaptive | naive
    multi_component: bool = False           # dynamic jammer-component management
    delta: float = 0.5
    sigma_q: float = float(np.sqrt(5.0))
    sigma_r: float = float(np.sqrt(5.0))
    alpha: float = 10.0
    p_d: float = 0.98
    lambda0_bar: float = 20.0
    lambda1_bar: float = 3.0
    fov: tuple = ((0.0, 1000.0), (0.0, 1000.0))
    b_na: float = 70.0
    na_eigvals: tuple = (500.0, 1.0)
    prune_threshold: float = 1e-5
    cap: int = 100
    gate: Optional[float] = DEFAULT_GATE
    thresholds: LifecycleThresholds = LifecycleThresholds()
    prior_mean: tuple = (500.0, 500.0, 0.0, 0.0)
    prior_var: tuple = (1e4, 1e4, 1e2, 1e2)
    prior_bias: tuple = (0.0, 500.0)
    radar_position: tuple = (0.0, 0.0)
    max_branches: Optional[int] = 4000


@dataclass
class StepReport:
    position: np.ndarray
    velocity: np.ndarray
    p_jam: float
    bias_mean: float
    bias_std: float
    c_k: int
    n_components: int


class RfsTracker:
    """Adaptive, non-adaptive or naive Gaussian-mixture RFS tracker."""

    def __init__(self, config: TrackerConfig = TrackerConfig()):
        if config.mode not in ("adaptive", "nonadaptive", "naive"):
            raise ValueError(f"unknown tracker mode {config.mode!r}")
        self.config = cfg = config
        self.meas = MeasurementModel.position(cfg.sigma_r)
        self.clutter = ClutterModel(cfg.lambda0_bar, (), cfg.fov)
        if cfg.mode == "adaptive":
            self.builder = AdaptiveJammerModel(self.meas, tuple(cfg.radar_position))
            n_bias = 1
        elif cfg.mode == "nonadaptive":
            self.builder = NonAdaptiveJammerModel(cfg.b_na, tuple(cfg.na_eigvals),
                                                  tuple(cfg.radar_position))
            n_bias = 0
        else:
            self.builder = None
            n_bias = 0
        mean = list(cfg.prior_mean) + [cfg.prior_bias[0]] * n_bias
        var = list(cfg.prior_var) + [cfg.prior_bias[1]] * n_bias
        self.belief = initial_belief(mean, np.diag(var), n_bias)
        self._motions: dict = {}

    def motion(self, n_bias: int) -> MotionModel:
        if n_bias not in self._motions:
            self._motions[n_bias] = build_cv_model(self.config.delta, self.config.sigma_q,
                                                   self.config.alpha, n_bias)
        return self._motions[n_bias]

    def n_jammer_components(self) -> int:
        if self.config.mode == "adaptive":
            return self.belief.n_awake
        return 1 if self.config.mode == "nonadaptive" else 0

    def step(self, scan) -> StepReport:
        cfg = self.config
        pred = predict(self.belief, self.motion(self.belief.n_awake))
        C = self.n_jammer_components()
        clutter = self.clutter.with_jammer_rates([cfg.lambda1_bar] * C)
        meas = self.meas.widened(pred.mixture.dim)
        post = update(pred, scan, meas, clutter, self.builder, cfg.p_d, cfg.prune_threshold,
                      cfg.cap, gate=cfg.gate, bias_gate=True, max_branches=cfg.max_branches)
        p_jam = detect_jamming(post, scan, pred, clutter, self.builder) if C else 0.0
        if cfg.mode == "adaptive":
            post = manage_lifecycle(post, cfg.thresholds, cfg.delta, cfg.prior_bias,
                                    single_component=not cfg.multi_component)
        self.belief = post
        pos, vel, biases = estimate_state(post)
        stds = bias_std(post)
        if biases:
            i = int(np.argmin(stds))
            b_mean, b_std = biases[i], float(stds[i])
        else:
            b_mean = b_std = float("nan")
        return StepReport(pos, vel, float(p_jam), b_mean, b_std, post.n_awake, len(post.mixture))
