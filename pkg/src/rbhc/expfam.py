"""Exponential-family Bregman generators.

Each family is described by a :class:`FamilyDescriptor`. The generator
``phi`` is the convex conjugate of the family's log-partition function,
evaluated on (mean) sufficient statistics after optional smoothing.

All evaluation functions accept either a single statistic of shape ``(D,)``
or a stack of shape ``(..., D)`` and broadcast over the leading axes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import xlogy

FAMILIES = ("gaussian_spherical", "gaussian_full", "poisson", "multinomial")
SMOOTHING_MODES = ("none", "convex_blend", "shift")


class SingularGeneratorError(ValueError):
    """Raised when a statistic falls outside the (smoothed) generator domain."""


@dataclass(frozen=True)
class SmoothingConfig:
    mode: str = "none"
    weight: float = 0.0
    anchor: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.mode not in SMOOTHING_MODES:
            raise ValueError(f"unknown smoothing mode {self.mode!r}")
        if self.mode != "none":
            if not 0.0 < self.weight < 1.0:
                raise ValueError("smoothing weight must lie in (0, 1)")
            if self.anchor is None:
                raise ValueError("smoothing requires an anchor vector")
            anchor = np.array(self.anchor, dtype=float)
            anchor.flags.writeable = False
            object.__setattr__(self, "anchor", anchor)

    def apply(self, t: np.ndarray) -> np.ndarray:
        if self.mode == "convex_blend":
            return (1.0 - self.weight) * t + self.weight * self.anchor
        if self.mode == "shift":
            return t + self.weight * self.anchor
        return t

    @property
    def jacobian_scale(self) -> float:
        # d(smoothed)/dt is a multiple of the identity for every mode
        return 1.0 - self.weight if self.mode == "convex_blend" else 1.0


def stat_dim(family: str, dim: int) -> int:
    """Length of the flat sufficient-statistic vector."""
    return dim + dim * dim if family == "gaussian_full" else dim


def default_smoothing(family: str, dim: int, m: Optional[int] = None) -> SmoothingConfig:
    """Smoothing used in the synthetic experiments for each family."""
    if family == "poisson":
        return SmoothingConfig("shift", 0.01, np.ones(dim))
    if family == "multinomial":
        return SmoothingConfig("convex_blend", 0.1, np.full(dim, m / dim))
    if family == "gaussian_full":
        anchor = np.concatenate([np.zeros(dim), np.eye(dim).ravel()])
        return SmoothingConfig("shift", 0.01, anchor)
    return SmoothingConfig()


@dataclass(frozen=True)
class FamilyDescriptor:
    """An exponential-family generator together with its configuration.

    ``smoothing=None`` selects :func:`default_smoothing` for the family.
    ``beta`` is the variance divisor of the scaled family; it is carried for
    data generation and does not enter the generator itself.
    """

    family: str
    dim: int
    sigma2: float = 1.0
    m: Optional[int] = None
    smoothing: Optional[SmoothingConfig] = None
    beta: float = 1.0
    stat_size: int = field(init=False, repr=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError("dim must be a positive integer")
        if not self.sigma2 > 0:
            raise ValueError("sigma2 must be positive")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.family == "multinomial":
            if self.m is None or int(self.m) != self.m or self.m < 1:
                raise ValueError("multinomial family needs an integer trial count m >= 1")
        if self.smoothing is None:
            object.__setattr__(self, "smoothing", default_smoothing(self.family, self.dim, self.m))
        size = stat_dim(self.family, self.dim)
        anchor = self.smoothing.anchor
        if anchor is not None and anchor.shape != (size,):
            raise ValueError(f"smoothing anchor must have length {size}")
        object.__setattr__(self, "stat_size", size)


def sufficient_stat(fam: FamilyDescriptor, x) -> np.ndarray:
    """Map one observation to its sufficient statistic ``t(x)``."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != fam.dim:
        raise ValueError(f"expected an observation of length {fam.dim}, got {x.shape[0]}")
    _check_observation(fam, x[None, :])
    if fam.family == "gaussian_full":
        return np.concatenate([x, np.outer(x, x).ravel()])
    return x.copy()


def sufficient_stats(fam: FamilyDescriptor, points) -> np.ndarray:
    """Row-wise :func:`sufficient_stat` for an ``(n, dim)`` array."""
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None] if fam.dim == 1 else X[None, :]
    if X.ndim != 2 or X.shape[1] != fam.dim:
        raise ValueError(f"expected data of shape (n, {fam.dim}), got {X.shape}")
    _check_observation(fam, X)
    if fam.family == "gaussian_full":
        outer = np.einsum("ni,nj->nij", X, X).reshape(len(X), -1)
        return np.concatenate([X, outer], axis=1)
    return X.copy()


def _check_observation(fam: FamilyDescriptor, X: np.ndarray) -> None:
    if not np.all(np.isfinite(X)):
        raise ValueError("observations must be finite")
    if fam.family in ("poisson", "multinomial"):
        if np.any(X < 0) or np.any(X != np.round(X)):
            raise ValueError(f"{fam.family} observations must be nonnegative integers")
    if fam.family == "multinomial":
        sums = X.sum(axis=1)
        bad = np.flatnonzero(sums != fam.m)
        if bad.size:
            raise ValueError(
                f"multinomial counts must sum to m={fam.m} (row {bad[0]} sums to {sums[bad[0]]:g})"
            )


# ---------------------------------------------------------------------------
# raw generators, evaluated on already-smoothed statistics


def _gaussian_full_split(fam, s):
    d = fam.dim
    x = s[..., :d]
    X = s[..., d:].reshape(s.shape[:-1] + (d, d))
    return x, X - x[..., :, None] * x[..., None, :]


def _cholesky(S):
    try:
        return np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        raise SingularGeneratorError("second-moment block minus mean outer product is not positive definite") from None


def _raw_value(fam, s):
    if fam.family == "gaussian_spherical":
        return np.sum(s * s, axis=-1) / (2.0 * fam.sigma2)
    if fam.family == "poisson":
        if np.any(s < 0):
            raise SingularGeneratorError("poisson statistic must be nonnegative")
        return np.sum(xlogy(s, s) - s, axis=-1)
    if fam.family == "multinomial":
        if np.any(s < 0):
            raise SingularGeneratorError("multinomial statistic must be nonnegative")
        return np.sum(xlogy(s, s / fam.m), axis=-1)
    _, S = _gaussian_full_split(fam, s)
    L = _cholesky(0.5 * (S + np.swapaxes(S, -1, -2)))
    if np.array_equal(S, np.swapaxes(S, -1, -2)):
        return -np.sum(np.log(np.diagonal(L, axis1=-2, axis2=-1)), axis=-1)
    # off-symmetric perturbations (finite differences) need the general determinant
    return -0.5 * np.linalg.slogdet(S)[1]


def _require_interior(fam, s):
    if fam.family in ("poisson", "multinomial") and np.any(s <= 0):
        raise SingularGeneratorError(f"{fam.family} derivatives need a strictly positive statistic")


def _raw_gradient(fam, s):
    _require_interior(fam, s)
    if fam.family == "gaussian_spherical":
        return s / fam.sigma2
    if fam.family == "poisson":
        return np.log(s)
    if fam.family == "multinomial":
        return np.log(s / fam.m) + 1.0
    x, S = _gaussian_full_split(fam, s)
    _cholesky(S)
    P = np.linalg.inv(S)
    gx = np.einsum("...ij,...j->...i", P, x)
    gX = -0.5 * np.swapaxes(P, -1, -2)
    return np.concatenate([gx, gX.reshape(gX.shape[:-2] + (-1,))], axis=-1)


def _raw_hessian(fam, s):
    _require_interior(fam, s)
    D = fam.stat_size
    if fam.family == "gaussian_spherical":
        return np.broadcast_to(np.eye(D) / fam.sigma2, s.shape[:-1] + (D, D)).copy()
    if fam.family == "poisson":
        return _diag(1.0 / s)
    if fam.family == "multinomial":
        return _diag(1.0 / s)
    return _gaussian_full_hessian(fam, s)


def _diag(v):
    out = np.zeros(v.shape + (v.shape[-1],))
    idx = np.arange(v.shape[-1])
    out[..., idx, idx] = v
    return out


def _gaussian_full_hessian(fam, s):
    # phi = -1/2 logdet S, S = X - x x^T. With dS = dX - dx x^T - x dx^T:
    # d2phi[u, v] = 1/2 tr(P dS_u P dS_v) + dx_u^T P dx_v,  P = S^{-1}
    d = fam.dim
    x, S = _gaussian_full_split(fam, s)
    _cholesky(S)
    P = np.linalg.inv(S)
    lead = s.shape[:-1]
    D = fam.stat_size
    # J maps a flat perturbation to dS (as a d*d vector)
    J = np.zeros(lead + (d * d, D))
    J[..., :, d:] = np.eye(d * d)
    eye = np.eye(d)
    # -(dx x^T + x dx^T) : entry (a, b) gets -(e_k[a] x[b] + x[a] e_k[b]) for dx = e_k
    dx_part = -(
        eye[:, None, :] * x[..., None, :, None] + x[..., :, None, None] * eye[None, :, :]
    )
    J[..., :, :d] = dx_part.reshape(lead + (d * d, d))
    # K[(j,k),(l,i)] = P[i,j] P[k,l] so that vec(A)^T K vec(B) = tr(P A P B)
    K = np.einsum("...ij,...kl->...jkli", P, P).reshape(lead + (d * d, d * d))
    H = 0.5 * (np.swapaxes(J, -1, -2) @ K @ J)
    H[..., :d, :d] += P
    return 0.5 * (H + np.swapaxes(H, -1, -2))


# ---------------------------------------------------------------------------
# public surface


def _as_stat(fam, t):
    t = np.asarray(t, dtype=float)
    if t.shape[-1:] != (fam.stat_size,):
        raise ValueError(f"statistic must have trailing length {fam.stat_size}, got shape {t.shape}")
    return t


def generator(fam: FamilyDescriptor, t) -> np.ndarray | float:
    """Smoothed generator ``phi(t)``.

    Raises :class:`SingularGeneratorError` if the smoothed statistic is
    outside the domain of ``phi``.
    """
    t = _as_stat(fam, t)
    value = _raw_value(fam, fam.smoothing.apply(t))
    return float(value) if np.ndim(value) == 0 else value


def generator_gradient(fam: FamilyDescriptor, t) -> np.ndarray:
    t = _as_stat(fam, t)
    return fam.smoothing.jacobian_scale * _raw_gradient(fam, fam.smoothing.apply(t))


def generator_hessian(fam: FamilyDescriptor, t) -> np.ndarray:
    """Closed-form Hessian of the smoothed generator at ``t``."""
    t = _as_stat(fam, t)
    scale = fam.smoothing.jacobian_scale
    return scale * scale * _raw_hessian(fam, fam.smoothing.apply(t))


def _raw_quadratic_form(fam, s, v):
    if fam.family == "gaussian_spherical":
        return np.sum(v * v, axis=-1) / fam.sigma2
    if fam.family in ("poisson", "multinomial"):
        return np.sum(v * v / s, axis=-1)
    # second directional derivative of -1/2 logdet S along v = (u, U):
    # 1/2 tr((P A)^2) + u^T P u  with  A = U - u x^T - x u^T
    d = fam.dim
    x, S = _gaussian_full_split(fam, s)
    _cholesky(S)
    P = np.linalg.inv(S)
    u = v[..., :d]
    U = v[..., d:].reshape(v.shape[:-1] + (d, d))
    A = U - u[..., :, None] * x[..., None, :] - x[..., :, None] * u[..., None, :]
    PA = P @ A
    return 0.5 * np.einsum("...ij,...ji->...", PA, PA) + np.einsum("...i,...ij,...j->...", u, P, u)


def generator_quadratic_form(fam: FamilyDescriptor, t, v) -> np.ndarray | float:
    """``v^T phi''(t) v`` without forming the Hessian."""
    t = _as_stat(fam, t)
    v = _as_stat(fam, v)
    _require_interior(fam, fam.smoothing.apply(t))
    scale = fam.smoothing.jacobian_scale
    value = scale * scale * _raw_quadratic_form(fam, fam.smoothing.apply(t), v)
    return float(value) if np.ndim(value) == 0 else value


def fd_step(t: np.ndarray) -> float:
    return 1e-5 * (1.0 + float(np.linalg.norm(t)))


def numerical_gradient(fam: FamilyDescriptor, t, h: Optional[float] = None) -> np.ndarray:
    """Five-point central-difference gradient of :func:`generator` (single statistic)."""
    t = _as_stat(fam, t).astype(float)
    h = fd_step(t) if h is None else h
    g = np.empty_like(t)
    for i in range(t.size):
        e = np.zeros_like(t)
        e[i] = h
        g[i] = (
            -generator(fam, t + 2 * e) + 8 * generator(fam, t + e) - 8 * generator(fam, t - e) + generator(fam, t - 2 * e)
        ) / (12 * h)
    return g


def numerical_hessian(fam: FamilyDescriptor, t, h: Optional[float] = None) -> np.ndarray:
    """Central second differences of :func:`generator` (single statistic).

    Uses only generator values, so it is independent of the closed forms.
    """
    t = _as_stat(fam, t).astype(float)
    h = fd_step(t) if h is None else h
    D = t.size
    f0 = generator(fam, t)
    H = np.empty((D, D))
    for i in range(D):
        ei = np.zeros(D)
        ei[i] = h
        H[i, i] = (generator(fam, t + ei) - 2 * f0 + generator(fam, t - ei)) / (h * h)
        for j in range(i):
            ej = np.zeros(D)
            ej[j] = h
            v = (
                generator(fam, t + ei + ej)
                - generator(fam, t + ei - ej)
                - generator(fam, t - ei + ej)
                + generator(fam, t - ei - ej)
            ) / (4 * h * h)
            H[i, j] = H[j, i] = v
    return H
