"""Motion, measurement, jammer-observation and clutter models."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class MotionModel:
    F: np.ndarray
    Q: np.ndarray
    delta: float
    sigma_q: float
    alpha: float
    n_bias: int

    @property
    def dim(self) -> int:
        return self.F.shape[0]

    def with_n_bias(self, n_bias: int) -> "MotionModel":
        return build_cv_model(self.delta, self.sigma_q, self.alpha, n_bias)


@dataclass(frozen=True)
class MeasurementModel:
    H: np.ndarray
    R: np.ndarray

    @classmethod
    def position(cls, sigma_r: float, dim: int = 4) -> "MeasurementModel":
        H = np.zeros((2, dim))
        H[0, 0] = H[1, 1] = 1.0
        return cls(H, sigma_r**2 * np.eye(2))

    def widened(self, dim: int) -> "MeasurementModel":
        """Same model acting on a state padded with extra trailing coordinates."""
        H = np.zeros((self.H.shape[0], dim))
        H[:, : self.H.shape[1]] = self.H[:, :dim]
        return MeasurementModel(H, self.R)


@dataclass(frozen=True)
class JammerObservation:
    B: np.ndarray
    offset: np.ndarray
    D: np.ndarray
    component_index: int = 1


@dataclass(frozen=True)
class ClutterModel:
    """Uniform clutter plus per-jammer-component Poisson rates.

    ``fov`` lists one ``(low, high)`` interval per measurement axis.
    """

    lambda0_bar: float
    lambda_i_bar: tuple = ()
    fov: tuple = ((0.0, 1000.0), (0.0, 1000.0))

    def __post_init__(self):
        object.__setattr__(self, "lambda_i_bar", tuple(float(x) for x in self.lambda_i_bar))
        object.__setattr__(self, "fov", tuple((float(lo), float(hi)) for lo, hi in self.fov))
        if self.lambda0_bar < 0 or any(x < 0 for x in self.lambda_i_bar):
            raise ValueError("clutter rates must be nonnegative")

    @classmethod
    def from_density(cls, density: float, fov, lambda_i_bar=()) -> "ClutterModel":
        fov = tuple(tuple(b) for b in fov)
        return cls(density * float(np.prod([hi - lo for lo, hi in fov])), tuple(lambda_i_bar), fov)

    @property
    def volume(self) -> float:
        return float(np.prod([hi - lo for lo, hi in self.fov]))

    @property
    def uniform_density(self) -> float:
        return 1.0 / self.volume

    @property
    def n_jammer(self) -> int:
        return len(self.lambda_i_bar)

    def with_jammer_rates(self, rates: Sequence[float]) -> "ClutterModel":
        return ClutterModel(self.lambda0_bar, tuple(rates), self.fov)

    def contains(self, z) -> np.ndarray:
        z = np.atleast_2d(z)
        lo = np.array([b[0] for b in self.fov])
        hi = np.array([b[1] for b in self.fov])
        return np.all((z >= lo) & (z <= hi), axis=-1)


def build_cv_model(delta: float, sigma_q: float, alpha: float = 10.0, n_bias: int = 0) -> MotionModel:
    """Constant-velocity model in 2D with ``n_bias`` random-walk bias states.

    ``sigma_q`` is the process-noise standard deviation; each bias gets
    independent noise of variance ``alpha * delta * sigma_q**2``.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    if n_bias < 0:
        raise ValueError("n_bias must be nonnegative")
    d = 4 + n_bias
    I2 = np.eye(2)
    F = np.eye(d)
    F[0:2, 2:4] = delta * I2
    q = sigma_q**2
    Q = np.zeros((d, d))
    Q[0:2, 0:2] = q * delta**4 / 4 * I2
    Q[0:2, 2:4] = Q[2:4, 0:2] = q * delta**3 / 2 * I2
    Q[2:4, 2:4] = q * delta**2 * I2
    Q[4:, 4:] = q * alpha * delta * np.eye(n_bias)
    return MotionModel(F, Q, float(delta), float(sigma_q), float(alpha), int(n_bias))


def los_unit_vector(pred_mean_position, radar_position=(0.0, 0.0)) -> np.ndarray:
    d = np.asarray(pred_mean_position, dtype=float)[:2] - np.asarray(radar_position, dtype=float)
    r = np.hypot(d[0], d[1])
    if r == 0:
        raise ValueError("predicted position coincides with the radar; line of sight undefined")
    return d / r


def _los_batch(positions: np.ndarray, radar_position) -> np.ndarray:
    d = positions - np.asarray(radar_position, dtype=float)
    r = np.hypot(d[:, 0], d[:, 1])
    if np.any(r == 0):
        raise ValueError("predicted position coincides with the radar; line of sight undefined")
    return d / r[:, None]


def build_jammer_obs_adaptive(los, component_index: int, c_total: int,
                              meas_model: MeasurementModel) -> JammerObservation:
    """Jammer return observes position plus the indexed bias along the LOS."""
    if not 1 <= component_index <= c_total:
        raise ValueError(f"component index {component_index} outside 1..{c_total}")
    los = np.asarray(los, dtype=float)
    B = np.zeros((2, 4 + c_total))
    B[:, :2] = np.eye(2)
    B[:, 4 + component_index - 1] = los
    return JammerObservation(B, np.zeros(2), np.array(meas_model.R, dtype=float), component_index)


def los_frame(los) -> np.ndarray:
    """Orthonormal basis with ``los`` first and its +90 degree rotation second."""
    los = np.asarray(los, dtype=float)
    return np.array([[los[0], -los[1]], [los[1], los[0]]])


def build_jammer_obs_nonadaptive(los, b_na: float = 70.0, eigvals=(500.0, 1.0)) -> JammerObservation:
    """Fixed-bias jammer model with covariance stretched along the LOS."""
    if b_na < 0:
        raise ValueError("b_na must be nonnegative")
    eigvals = np.asarray(eigvals, dtype=float)
    if np.any(eigvals <= 0):
        raise ValueError("eigenvalues must be positive")
    los = np.asarray(los, dtype=float)
    U = los_frame(los)
    B = np.zeros((2, 4))
    B[:, :2] = np.eye(2)
    return JammerObservation(B, b_na * los, U @ np.diag(eigvals) @ U.T, 1)


def clutter_mixture_weights(cm: ClutterModel) -> np.ndarray:
    rates = np.array((cm.lambda0_bar,) + cm.lambda_i_bar, dtype=float)
    total = rates.sum()
    if total <= 0:
        raise ValueError("all clutter rates are zero")
    return rates / total


@dataclass(frozen=True)
class AdaptiveJammerModel:
    """Per-component jammer observations for the bias-augmented state."""

    meas_model: MeasurementModel
    radar_position: tuple = (0.0, 0.0)

    def __call__(self, pred_mean, c_total: int) -> list[JammerObservation]:
        los = los_unit_vector(pred_mean[:2], self.radar_position)
        return [build_jammer_obs_adaptive(los, i, c_total, self.meas_model)
                for i in range(1, c_total + 1)]

    def batch(self, means: np.ndarray, c_total: int):
        m, d = means.shape
        los = _los_batch(means[:, :2], self.radar_position)
        B = np.zeros((m, c_total, 2, d))
        B[:, :, 0, 0] = B[:, :, 1, 1] = 1.0
        for i in range(c_total):
            B[:, i, :, 4 + i] = los
        off = np.zeros((m, c_total, 2))
        D = np.broadcast_to(self.meas_model.R, (m, c_total, 2, 2))
        return B, off, D


@dataclass(frozen=True)
class NonAdaptiveJammerModel:
    b_na: float = 70.0
    eigvals: tuple = (500.0, 1.0)
    radar_position: tuple = (0.0, 0.0)

    def __call__(self, pred_mean, c_total: int = 1) -> list[JammerObservation]:
        if c_total != 1:
            raise ValueError("the non-adaptive jammer model has exactly one component")
        los = los_unit_vector(pred_mean[:2], self.radar_position)
        return [build_jammer_obs_nonadaptive(los, self.b_na, self.eigvals)]

    def batch(self, means: np.ndarray, c_total: int = 1):
        m, d = means.shape
        los = _los_batch(means[:, :2], self.radar_position)
        B = np.zeros((m, 1, 2, d))
        B[:, 0, 0, 0] = B[:, 0, 1, 1] = 1.0
        off = (self.b_na * los)[:, None, :]
        U = np.empty((m, 2, 2))
        U[:, 0, 0], U[:, 1, 0] = los[:, 0], los[:, 1]
        U[:, 0, 1], U[:, 1, 1] = -los[:, 1], los[:, 0]
        D = (U * np.asarray(self.eigvals, dtype=float)) @ np.swapaxes(U, -1, -2)
        return B, off, D[:, None]


def stack_jammer_obs(builder, means: np.ndarray, c_total: int):
    """Batch jammer observation arrays (M, C, dz, d) for any builder."""
    if hasattr(builder, "batch"):
        return builder.batch(means, c_total)
    obs = [builder(m, c_total) for m in means]
    B = np.array([[o.B for o in row] for row in obs], dtype=float)
    off = np.array([[o.offset for o in row] for row in obs], dtype=float)
    D = np.array([[o.D for o in row] for row in obs], dtype=float)
    return B, off, D
