"""Finite Koopman mode decomposition by vector Prony analysis.

All channels share one characteristic polynomial, so the discrete
eigenvalues are common to every channel and only the mode vectors differ.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import DegenerateSpectrumError, EmptySelectionError, InsufficientDataError
from .series import TimeSeriesSet

DISTINCT_RTOL = 1e-10

# Pipeline defaults for 60 Hz swing data: a long strided recurrence fits the
# nonlinear response well, and the estimator then works from its most
# energetic modes.
DEFAULT_ORDER = 100
DEFAULT_STRIDE = 5
DEFAULT_KEEP = 16


def to_continuous(z, period: float):
    """Continuous-time eigenvalue ``Log(z) / period`` on the principal branch.

    Works elementwise on arrays.
    """
    arr = np.asarray(z, dtype=complex)
    if np.any(arr == 0):
        raise ValueError("logarithm of a zero discrete eigenvalue is undefined")
    if arr.ndim == 0:
        return cmath.log(complex(arr)) / period
    return np.log(arr) / period


@dataclass(frozen=True, eq=False)
class KoopmanSpectrum:
    """Discrete eigenvalues ``discrete[j]`` with mode vectors ``modes[j, channel]``."""

    discrete: np.ndarray
    modes: np.ndarray
    period: float
    labels: tuple[str, ...]
    n_samples: int
    prediction_rank: int = 0
    prediction_condition: float = 1.0
    stride: int = 1
    continuous: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "continuous", to_continuous(self.discrete, self.period))

    @property
    def order(self) -> int:
        return len(self.discrete)

    @property
    def frequency_hz(self) -> np.ndarray:
        return self.continuous.imag / (2.0 * math.pi)

    @property
    def energy(self) -> np.ndarray:
        return mode_energy(self.discrete, self.modes, self.n_samples)

    def subset(self, idx) -> "KoopmanSpectrum":
        idx = np.asarray(idx, dtype=int)
        return KoopmanSpectrum(self.discrete[idx], self.modes[idx], self.period, self.labels,
                               self.n_samples, self.prediction_rank, self.prediction_condition,
                               self.stride)

    def channel_modes(self, label: str) -> np.ndarray:
        return self.modes[:, self.labels.index(label)]


def mode_energy(discrete: np.ndarray, modes: np.ndarray, n_samples: int) -> np.ndarray:
    """sum_k |z_j|^(2k) * ||V_j||^2 over k = 0..n_samples-1."""
    r2 = np.abs(discrete) ** 2
    k = np.arange(n_samples)
    with np.errstate(over="ignore"):
        geometric = np.sum(r2[:, None] ** k[None, :], axis=1)
    return geometric * np.sum(np.abs(modes) ** 2, axis=1)


def min_samples(m: int, stride: int = 1) -> int:
    """Fewest samples for which every channel alone determines the recurrence."""
    return m * (stride + 1) + 1


def max_order(n_samples: int, stride: int = 1) -> int:
    return max((n_samples - 1) // (stride + 1), 0)


def _prediction_system(Y: np.ndarray, m: int, stride: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Rows ``y[k + m*s] = sum_l c_l y[k + (m - l)*s]`` for every channel and shift k."""
    K, C = Y.shape
    s = stride
    rows = K - m * s
    A = np.empty((rows * C, m))
    b = np.empty(rows * C)
    for c in range(C):
        y = Y[:, c]
        for l in range(1, m + 1):
            A[c * rows:(c + 1) * rows, l - 1] = y[(m - l) * s:(m - l) * s + rows]
        b[c * rows:(c + 1) * rows] = y[m * s:]
    return A, b


def companion(coeffs: np.ndarray) -> np.ndarray:
    """Companion matrix of z^m - c_1 z^(m-1) - ... - c_m."""
    m = len(coeffs)
    C = np.zeros((m, m))
    C[0, :] = coeffs
    C[np.arange(1, m), np.arange(m - 1)] = 1.0
    return C


def _check_distinct(z: np.ndarray) -> None:
    for i in range(len(z)):
        for j in range(i + 1, len(z)):
            scale = max(abs(z[i]), abs(z[j]))
            if abs(z[i] - z[j]) <= DISTINCT_RTOL * scale:
                raise DegenerateSpectrumError(
                    f"repeated discrete eigenvalue {z[i]:.6g} (modes {i} and {j})")


def conjugate_partners(z: np.ndarray) -> np.ndarray:
    """Index of the conjugate partner of each eigenvalue (itself if real)."""
    partner = np.empty(len(z), dtype=int)
    for j, zj in enumerate(z):
        partner[j] = int(np.argmin(np.abs(z - np.conj(zj))))
    return partner


def _vandermonde_fit(z: np.ndarray, Y: np.ndarray) -> np.ndarray:
    K = Y.shape[0]
    k = np.arange(K)[:, None]
    # columns of growing modes are normalised by their last entry to avoid overflow
    log_z = np.log(z.astype(complex))
    shift = np.where(np.abs(z) > 1.0, (K - 1) * np.log(np.abs(z)), 0.0)
    Z = np.exp(k * log_z[None, :] - shift[None, :])
    coef, *_ = np.linalg.lstsq(Z, Y.astype(complex), rcond=None)
    with np.errstate(under="ignore"):
        return coef * np.exp(-shift)[:, None]


def _symmetrize(z: np.ndarray, V: np.ndarray) -> np.ndarray:
    V = V.copy()
    partner = conjugate_partners(z)
    for j, p in enumerate(partner):
        if p == j:
            V[j] = V[j].real
        elif j < p:
            avg = 0.5 * (V[j] + np.conj(V[p]))
            V[j], V[p] = avg, np.conj(avg)
    return V


def _stride_root(roots: np.ndarray, stride: int) -> np.ndarray:
    roots = roots.astype(complex)
    if stride == 1:
        return roots
    z = np.exp(np.log(roots) / stride)
    # a real root must stay real or it loses its conjugate partner; negative
    # ones map to the real stride-th root (exact for odd strides, a
    # Nyquist-rate stand-in for even ones)
    real = roots.imag == 0
    z[real] = np.sign(roots.real[real]) * np.abs(roots.real[real]) ** (1.0 / stride)
    return z


def vector_prony(data: TimeSeriesSet, m: int, stride: int = 1) -> KoopmanSpectrum:
    """Vector Prony analysis of order ``m``.

    A single linear-prediction recurrence of length ``m`` is fitted jointly to
    every channel by least squares; its characteristic roots are the discrete
    eigenvalues and the mode vectors come from a Vandermonde least-squares fit.
    Modes are returned in order of decreasing energy over the data window.

    With ``stride > 1`` the recurrence links samples ``stride`` apart, so its
    roots are ``z**stride`` and the principal ``stride``-th root is taken.
    This spreads the roots of slow modes away from ``z = 1`` and keeps the
    prediction problem well conditioned at high sample rates, at the price of
    aliasing content above ``1 / (2 * stride * period)`` Hz.  Mode vectors are
    always fitted on the full-rate samples.
    """
    if m < 1:
        raise ValueError("Prony order must be at least 1")
    if stride < 1:
        raise ValueError("prediction stride must be at least 1")
    Y = np.asarray(data.values, dtype=float)
    K = Y.shape[0]
    need = min_samples(m, stride)
    if K < need:
        raise InsufficientDataError(
            f"{K} samples are too few for order {m} at stride {stride} (need at least {need})")
    if not np.all(np.isfinite(Y)):
        raise ValueError("time series contains non-finite samples")

    A, b = _prediction_system(Y, m, stride)
    coeffs, _, rank, sv = np.linalg.lstsq(A, b, rcond=None)
    cond = float(sv[0] / sv[-1]) if sv.size and sv[-1] > 0 else math.inf
    roots = np.linalg.eigvals(companion(coeffs))
    if np.any(roots == 0):
        raise DegenerateSpectrumError("prediction polynomial has a zero root")
    _check_distinct(roots)
    z = _stride_root(roots, stride)
    V =_symmetrize(z, _vandermonde_fit(z, Y))

    energy = mode_energy(z, V, K)
    # stable ordering: energy first, then positive frequency ahead of its conjugate
    order = np.lexsort((-z.imag, -energy))
    return KoopmanSpectrum(z[order], V[order], data.period, data.labels, K, int(rank), cond,
                           stride)


class Reconstruction(NamedTuple):
    values: np.ndarray
    imag_residue: float


def reconstruct(spec: KoopmanSpectrum, k=None) -> Reconstruction:
    """Evaluate sum_j z_j^k V_j at sample indices ``k`` (default: the fitted window)."""
    k = np.arange(spec.n_samples) if k is None else np.atleast_1d(np.asarray(k))
    powers = spec.discrete[None, :] ** k[:, None]
    y = powers @ spec.modes
    residue = float(np.max(np.abs(y.imag))) if y.size else 0.0
    return Reconstruction(y.real, residue)


def select_modes(spec: KoopmanSpectrum, order: int | None = None,
                 energy_eps: float | None = None) -> KoopmanSpectrum:
    """Keep the ``order`` most energetic modes, or modes above ``energy_eps`` of the total.

    Conjugate partners are always kept or dropped together.
    """
    if (order is None) == (energy_eps is None):
        raise ValueError("give exactly one of order or energy_eps")
    energy = spec.energy
    partner = conjugate_partners(spec.discrete)
    keep = np.zeros(spec.order, dtype=bool)
    if order is not None:
        if order < 1:
            raise EmptySelectionError("order must be at least 1")
        for j in np.argsort(-energy, kind="stable"):
            if keep.sum() >= order:
                break
            keep[j] = keep[partner[j]] = True
    else:
        if energy_eps < 0:
            raise ValueError("energy_eps must be non-negative")
        keep = energy >= energy_eps * energy.sum()
        if energy_eps > 0:
            keep &= energy > 0
        keep |= keep[partner]
    if not keep.any():
        raise EmptySelectionError("mode selection retained no modes")
    return spec.subset(np.flatnonzero(keep))


@dataclass(frozen=True)
class DecompositionSettings:
    """Prony fit followed by mode selection, as used by the estimation pipeline.

    ``order`` is an upper bound: windows too short for it are fitted at the
    largest order they support, unless ``adapt_order`` is off.  ``keep`` and ``energy_eps`` are the two
    selection policies; when both are None every fitted mode is kept.
    """

    order: int = DEFAULT_ORDER
    stride: int = DEFAULT_STRIDE
    keep: int | None = DEFAULT_KEEP
    energy_eps: float | None = None
    adapt_order: bool = True

    def __post_init__(self):
        if self.order < 1 or self.stride < 1:
            raise ValueError("order and stride must be at least 1")
        if self.keep is not None and self.energy_eps is not None:
            raise ValueError("give at most one of keep and energy_eps")

    def fit_order(self, n_samples: int) -> int:
        if not self.adapt_order:
            return self.order
        m = min(self.order, max_order(n_samples, self.stride))
        if m < 1:
            raise InsufficientDataError(
                f"{n_samples} samples cannot support stride {self.stride}")
        return m


def decompose(data: TimeSeriesSet, settings: DecompositionSettings = DecompositionSettings()
              ) -> KoopmanSpectrum:
    spec = vector_prony(data, settings.fit_order(data.n_samples), settings.stride)
    if settings.keep is not None:
        return select_modes(spec, order=settings.keep)
    if settings.energy_eps is not None:
        return select_modes(spec, energy_eps=settings.energy_eps)
    return spec
