"""Baselines: naive tracker, clairvoyant tracker and the posterior Cramer-Rao bound."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .gaussmix import GaussianComponent, linear_gaussian_update
from .models import ClutterModel, MeasurementModel, MotionModel, build_cv_model
from .sim import ScanSet, true_los
from .tracker import DEFAULT_GATE, Belief, update


def naive_update(belief: Belief, scan, meas_model: MeasurementModel, clutter: ClutterModel,
                 p_d: float, prune_threshold: float = 1e-5, cap: int = 100,
                 gate: Optional[float] = DEFAULT_GATE) -> Belief:
    """Update with a uniform-only clutter model (no jammer components)."""
    if belief.n_awake:
        raise ValueError("the naive tracker has no bias states")
    clutter = clutter.with_jammer_rates(())
    return update(belief, scan, meas_model, clutter, None, p_d, prune_threshold, cap,
                  gate=gate, bias_gate=False)


def clairvoyant_step(prior: GaussianComponent, scan: ScanSet, true_biases: dict,
                     meas_model: MeasurementModel, radar_position=(0.0, 0.0)) -> GaussianComponent:
    """Kalman update using oracle knowledge of which detection came from where.

    The target detection is used as is; each jammer detection is turned into
    an extra position observation by removing its known bias along the LOS of
    the prior position. Clutter is discarded.
    """
    H, R = meas_model.H, meas_model.R
    los = true_los(prior.mean[:2], radar_position)
    post = prior
    pts = np.asarray(scan.points)
    for z, lab in zip(pts, scan.labels):
        if lab == "target":
            post, _ = linear_gaussian_update(post, H, np.zeros(2), R, z)
    for z, lab in zip(pts, scan.labels):
        if lab.startswith("jammer-"):
            b = true_biases[int(lab.split("-")[1])]
            post, _ = linear_gaussian_update(post, H, np.zeros(2), R, z - b * los)
    return post


class ClairvoyantTracker:
    """Constant-velocity Kalman filter without association uncertainty."""

    def __init__(self, motion: MotionModel, meas_model: MeasurementModel, prior_mean, prior_cov,
                 radar_position=(0.0, 0.0)):
        self.motion = motion
        self.meas = meas_model
        self.radar_position = radar_position
        self.state = GaussianComponent(1.0, prior_mean, prior_cov)

    def step(self, scan: ScanSet, true_biases: dict) -> GaussianComponent:
        F, Q = self.motion.F, self.motion.Q
        m = F @ self.state.mean
        P = F @ self.state.cov @ F.T + Q
        pred = GaussianComponent(1.0, m, 0.5 * (P + P.T))
        self.state = clairvoyant_step(pred, scan, true_biases, self.meas, self.radar_position)
        return self.state


@dataclass
class PcrbCurve:
    information: np.ndarray      # (n_steps + 1, d, d); index 0 is the prior
    bound: np.ndarray            # position RMSE lower bound per index

    def __len__(self):
        return self.bound.shape[0]


def pcrb_curve(motion: MotionModel, meas: MeasurementModel, prior_cov, n_steps: int,
               position_index=(0, 1)) -> PcrbCurve:
    """Information recursion for the linear-Gaussian case.

    ``J_0 = P_0^{-1}`` and ``J_k = (F J_{k-1}^{-1} F^T + Q)^{-1} + H^T R^{-1} H``;
    the bound is the root of the trace of the position block of ``J_k^{-1}``.
    """
    F, Q, H = motion.F, motion.Q, meas.H
    J = np.linalg.inv(np.atleast_2d(prior_cov))
    HRH = H.T @ np.linalg.solve(meas.R, H)
    d = J.shape[0]
    info = np.empty((n_steps + 1, d, d))
    bound = np.empty(n_steps + 1)
    idx = list(position_index)
    for k in range(n_steps + 1):
        if k:
            try:
                Jinv = np.linalg.inv(J)
                J = np.linalg.inv(F @ Jinv @ F.T + Q) + HRH
            except np.linalg.LinAlgError as exc:
                raise np.linalg.LinAlgError(f"information matrix singular at step {k}") from exc
        J = 0.5 * (J + J.T)
        info[k] = J
        bound[k] = np.sqrt(np.trace(np.linalg.inv(J)[np.ix_(idx, idx)]))
    return PcrbCurve(info, bound)


def default_clairvoyant(sigma_q: float, sigma_r: float, delta: float = 0.5,
                        prior_mean=(500.0, 500.0, 0.0, 0.0),
                        prior_var=(1e4, 1e4, 1e2, 1e2),
                        radar_position=(0.0, 0.0)) -> ClairvoyantTracker:
    return ClairvoyantTracker(build_cv_model(delta, sigma_q, 0.0, 0), MeasurementModel.position(sigma_r),
                              np.asarray(prior_mean, float), np.diag(prior_var), radar_position)
