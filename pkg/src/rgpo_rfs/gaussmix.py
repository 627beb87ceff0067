"""Gaussian and Gaussian-mixture numerics.

Weights are carried in the log domain; hypothesis weights produced by the
set-valued likelihood routinely span hundreds of orders of magnitude.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy.special import logsumexp

LOG_2PI = np.log(2.0 * np.pi)


class NumericalDomainError(ValueError):
    """Raised when a covariance is not symmetric positive definite."""


@dataclass
class GaussianComponent:
    weight: float
    mean: np.ndarray
    cov: np.ndarray
    lineage: Any = None

    def __post_init__(self):
        self.mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        self.cov = np.atleast_2d(np.asarray(self.cov, dtype=float))

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


@dataclass
class Mixture:
    """Array-backed Gaussian mixture.

    ``log_weights`` has shape (M,), ``means`` (M, d) and ``covs`` (M, d, d).
    ``lineage`` holds one opaque association label per component.
    """

    log_weights: np.ndarray
    means: np.ndarray
    covs: np.ndarray
    lineage: list = field(default_factory=list)

    def __post_init__(self):
        self.log_weights = np.asarray(self.log_weights, dtype=float).reshape(-1)
        self.means = np.asarray(self.means, dtype=float)
        self.covs = np.asarray(self.covs, dtype=float)
        m = self.log_weights.shape[0]
        if self.means.ndim != 2 or self.covs.ndim != 3:
            raise ValueError("means must be (M, d) and covs (M, d, d)")
        if self.means.shape[0] != m or self.covs.shape[0] != m:
            raise ValueError("component count mismatch between weights, means and covs")
        d = self.means.shape[1]
        if self.covs.shape[1:] != (d, d):
            raise ValueError("all components must share the same dimension")
        if not self.lineage:
            self.lineage = [None] * m
        elif len(self.lineage) != m:
            raise ValueError("lineage length does not match component count")

    @classmethod
    def from_components(cls, components: Sequence[GaussianComponent]) -> "Mixture":
        if not components:
            raise ValueError("a mixture needs at least one component")
        dims = {c.dim for c in components}
        if len(dims) != 1:
            raise ValueError("all components must share the same dimension")
        with np.errstate(divide="ignore"):
            lw = np.log([c.weight for c in components])
        return cls(lw, np.stack([c.mean for c in components]),
                   np.stack([c.cov for c in components]),
                   [c.lineage for c in components])

    @classmethod
    def single(cls, mean, cov, lineage=None) -> "Mixture":
        mean = np.atleast_1d(np.asarray(mean, dtype=float))
        cov = np.atleast_2d(np.asarray(cov, dtype=float))
        return cls(np.zeros(1), mean[None], cov[None], [lineage])

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    @property
    def components(self) -> list[GaussianComponent]:
        w = self.weights
        return [GaussianComponent(w[i], self.means[i].copy(), self.covs[i].copy(), self.lineage[i])
                for i in range(len(self))]

    def __len__(self) -> int:
        return self.log_weights.shape[0]

    def select(self, idx) -> "Mixture":
        idx = np.asarray(idx, dtype=int)
        return Mixture(self.log_weights[idx].copy(), self.means[idx].copy(),
                       self.covs[idx].copy(), [self.lineage[i] for i in idx])

    def normalized(self) -> "Mixture":
        total = logsumexp(self.log_weights)
        if not np.isfinite(total):
            raise NumericalDomainError("mixture has no finite weight to normalize")
        return Mixture(self.log_weights - total, self.means, self.covs, list(self.lineage))

    def copy(self) -> "Mixture":
        return Mixture(self.log_weights.copy(), self.means.copy(), self.covs.copy(),
                       list(self.lineage))


def symmetrize(P: np.ndarray) -> np.ndarray:
    return 0.5 * (P + np.swapaxes(P, -1, -2))


def gaussian_logpdf(x, mean, cov) -> float:
    """log N(x; mean, cov) via a Cholesky factorization."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    if x.shape != mean.shape or cov.shape != (x.shape[0], x.shape[0]):
        raise ValueError("dimension mismatch between x, mean and cov")
    try:
        L = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise NumericalDomainError("covariance is not positive definite") from exc
    r = np.linalg.solve(L, x - mean)
    return float(-0.5 * (r @ r) - np.log(np.diag(L)).sum() - 0.5 * x.shape[0] * LOG_2PI)


def batch_logpdf(innov: np.ndarray, S: np.ndarray) -> np.ndarray:
    """Vectorized log N(innov; 0, S) over leading axes."""
    Sinv, logdet = _inv_logdet(S)
    maha = (innov * (Sinv @ innov[..., None])[..., 0]).sum(-1)
    return -0.5 * maha - 0.5 * logdet - 0.5 * innov.shape[-1] * LOG_2PI


def mahalanobis_sq(innov: np.ndarray, S: np.ndarray) -> np.ndarray:
    Sinv, _ = _inv_logdet(np.broadcast_to(S, innov.shape + innov.shape[-1:]))
    return (innov * (Sinv @ innov[..., None])[..., 0]).sum(-1)


def _inv_logdet(S):
    """Inverse and log-determinant of a batch of SPD matrices.

    2x2 blocks (the common measurement size) use the closed form.
    """
    if S.shape[-1] == 2:
        a, b, d = S[..., 0, 0], S[..., 0, 1], S[..., 1, 1]
        det = a * d - b * b
        if not (np.all(a > 0) and np.all(det > 0)):
            raise np.linalg.LinAlgError("matrix is not positive definite")
        inv = np.stack([np.stack([d, -b], -1), np.stack([-b, a], -1)], -2) / det[..., None, None]
        return inv, np.log(det)
    L = np.linalg.cholesky(S)
    eye = np.broadcast_to(np.eye(S.shape[-1]), S.shape)
    Linv = np.linalg.solve(L, eye)
    return np.swapaxes(Linv, -1, -2) @ Linv, 2.0 * np.log(np.diagonal(L, axis1=-2, axis2=-1)).sum(-1)


def batch_update(means, covs, B, offset, D, z):
    """Conjugate Gaussian update for a batch of priors.

    Likelihood is N(z; B x + offset, D). Every argument carries a leading
    batch axis except that ``z`` and ``offset`` may broadcast. Returns the
    posterior means, covariances (Joseph form, symmetrized) and the marginal
    log-likelihood of ``z``.
    """
    PBt = covs @ np.swapaxes(B, -1, -2)
    S = symmetrize(B @ PBt + D)
    innov = z - (B @ means[..., None])[..., 0] - offset
    Sinv, logdet = _inv_logdet(S)
    K = PBt @ Sinv
    new_means = means + (K @ innov[..., None])[..., 0]
    eye = np.eye(means.shape[-1])
    A = eye - K @ B
    new_covs = A @ covs @ np.swapaxes(A, -1, -2) + K @ D @ np.swapaxes(K, -1, -2)
    maha = (innov * (Sinv @ innov[..., None])[..., 0]).sum(-1)
    loglik = -0.5 * maha - 0.5 * logdet - 0.5 * innov.shape[-1] * LOG_2PI
    return new_means, symmetrize(new_covs), loglik


def linear_gaussian_update(prior: GaussianComponent, obs_matrix, obs_offset, obs_cov, z):
    """Exact posterior of ``prior`` under z ~ N(H x + b, R).

    Returns ``(posterior, marginal_loglik)``; the posterior keeps the prior's
    weight and lineage.
    """
    H = np.atleast_2d(np.asarray(obs_matrix, dtype=float))
    b = np.atleast_1d(np.asarray(obs_offset, dtype=float))
    R = np.atleast_2d(np.asarray(obs_cov, dtype=float))
    z = np.atleast_1d(np.asarray(z, dtype=float))
    dz = z.shape[0]
    if H.shape != (dz, prior.dim) or b.shape != (dz,) or R.shape != (dz, dz):
        raise ValueError(
            f"observation model dims {H.shape}, {b.shape}, {R.shape} "
            f"do not match prior dim {prior.dim} and measurement dim {dz}")
    try:
        m, P, ll = batch_update(prior.mean[None], prior.cov[None], H[None], b, R[None], z)
    except np.linalg.LinAlgError as exc:
        raise NumericalDomainError("innovation covariance is not positive definite") from exc
    return GaussianComponent(prior.weight, m[0], P[0], prior.lineage), float(ll[0])


def _keep_argmax(mix: Mixture, lw: np.ndarray) -> Mixture:
    i = int(np.argmax(lw))
    out = mix.select([i])
    out.log_weights[:] = 0.0
    return out


def _order_key(lw: np.ndarray) -> np.ndarray:
    # weight descending, ties broken by original position
    return np.lexsort((np.arange(len(lw)), -lw))


def reduce_mixture(mix: Mixture, prune_threshold: float, cap: int) -> Mixture:
    """Prune components under ``prune_threshold``, keep at most ``cap``, renormalize.

    If pruning would empty the mixture, the single heaviest component is kept
    with weight one.
    """
    if cap < 1:
        raise ValueError("cap must be at least 1")
    lw = mix.log_weights - logsumexp(mix.log_weights)
    if prune_threshold > 0:
        keep = lw >= np.log(prune_threshold)
    else:
        keep = np.ones(lw.shape, dtype=bool)
    if not keep.any():
        return _keep_argmax(mix, mix.log_weights)
    idx = np.flatnonzero(keep)
    if idx.size > cap:
        order = _order_key(lw[idx])
        idx = np.sort(idx[order[:cap]])
    out = mix.select(idx)
    total = logsumexp(out.log_weights)
    if not np.isfinite(total):
        return _keep_argmax(mix, mix.log_weights)
    out.log_weights = out.log_weights - total
    return out


def gate_negative_bias(mix: Mixture, bias_indices: Sequence[int]) -> Mixture:
    """Zero the weight of every component whose mean has a negative bias."""
    bias_indices = list(bias_indices)
    if not bias_indices:
        return mix.copy()
    neg = (mix.means[:, bias_indices] < 0).any(axis=1)
    if not neg.any():
        return mix.copy()
    if neg.all():
        return _keep_argmax(mix, mix.log_weights)
    lw = mix.log_weights.copy()
    lw[neg] = -np.inf
    out = Mixture(lw, mix.means.copy(), mix.covs.copy(), list(mix.lineage))
    return out.normalized()


def mixture_moments(mix: Mixture) -> tuple[np.ndarray, np.ndarray]:
    """Moment-matched single Gaussian (law of total mean and covariance)."""
    w = np.exp(mix.log_weights - logsumexp(mix.log_weights))
    mean = w @ mix.means
    dev = mix.means - mean
    cov = np.einsum("i,ijk->jk", w, mix.covs) + np.einsum("i,ij,ik->jk", w, dev, dev)
    return mean, symmetrize(cov)


def is_spd(P: np.ndarray, rtol: float = 1e-9) -> bool:
    """Symmetric (to ``rtol`` relative to the trace) with strictly positive eigenvalues."""
    P = np.asarray(P, dtype=float)
    scale = abs(np.trace(P))
    if not np.allclose(P, P.T, rtol=0, atol=rtol * max(1.0, scale)):
        return False
    return bool(np.linalg.eigvalsh(P).min() > 0)
