"""Inertia estimation from Koopman spectra of rotor speeds and accelerating power.

Every mode j contributes one equation ``lambda_j * (V_j^omega . M) = V_j^P``,
which follows from ``M . domega/dt = deltaP`` once both sides are expanded in
the common eigenvalues.  The stacked system is solved for a real M.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import (
    ChannelError,
    DegenerateSpectrumError,
    InertiaToolError,
    NoInformationError,
    WindowError,
)
from .kmd import DecompositionSettings, KoopmanSpectrum, decompose
from .series import POWER_CHANNEL, TimeSeriesSet

STATIONARY_TOL = 1e-6  # 1/s
RANK_RTOL = 1e-10
DEFAULT_WINDOW = 10.0
DEFAULT_SETTINGS = DecompositionSettings()


@dataclass(frozen=True, eq=False)
class EstimationProblem:
    H: np.ndarray  # (rows, n_omega) complex
    b: np.ndarray  # (rows,) complex
    eigenvalues: np.ndarray  # continuous eigenvalue of each row
    omega_labels: tuple[str, ...]
    power_label: str
    window: float | None = None
    start: float = 0.0


@dataclass(frozen=True, eq=False)
class InertiaEstimate:
    M: np.ndarray
    labels: tuple[str, ...]
    residual: float
    condition: float
    solver: str  # "least-squares" or "pseudo-inverse"
    window: float | None = None
    n_rows: int = 0

    @property
    def system_wide(self) -> float:
        return float(np.sum(self.M))

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.labels, self.M.tolist()))


def assemble_system(spec: KoopmanSpectrum, omega_labels=None,
                    power_label: str = POWER_CHANNEL,
                    window: float | None = None) -> EstimationProblem:
    """Build ``H[j] = lambda_j * V_j^omega`` and ``b[j] = V_j^P``, skipping stationary modes."""
    if power_label not in spec.labels:
        raise ChannelError(f"spectrum has no {power_label!r} channel")
    if omega_labels is None:
        omega_labels = tuple(lab for lab in spec.labels if lab != power_label)
    omega_labels = tuple(omega_labels)
    if not omega_labels:
        raise ChannelError("no rotor-speed channels to estimate from")
    if power_label in omega_labels:
        raise ChannelError("the power channel cannot also be a speed channel")
    if spec.order < 1:
        raise NoInformationError("spectrum has no modes")
    lam = spec.continuous
    for i in range(len(lam)):
        for j in range(i + 1, len(lam)):
            if lam[i] == lam[j]:
                raise DegenerateSpectrumError(f"duplicate eigenvalue {lam[i]:.6g}")
    cols = [spec.labels.index(lab) for lab in omega_labels]
    rows = np.abs(lam) >= STATIONARY_TOL
    H = lam[rows, None] * spec.modes[np.ix_(rows, cols)]
    b = spec.modes[rows, spec.labels.index(power_label)]
    return EstimationProblem(H, b, lam[rows], omega_labels, power_label, window)


def estimate_inertia(prob: EstimationProblem, rank_rtol: float = RANK_RTOL) -> InertiaEstimate:
    """Solve the real-stacked system ``[Re H; Im H] M = [Re b; Im b]``.

    Full column rank gives the ordinary least-squares solution; otherwise the
    minimum-norm pseudo-inverse solution is returned and flagged.
    """
    if prob.H.size == 0 or not np.any(prob.H):
        raise NoInformationError("the estimation matrix carries no information")
    A = np.vstack([prob.H.real, prob.H.imag])
    y = np.concatenate([prob.b.real, prob.b.imag])
    sv = np.linalg.svd(A, compute_uv=False)
    n = A.shape[1]
    full_rank = len(sv) >= n and sv[n - 1] > rank_rtol * sv[0]
    if full_rank:
        M, *_ = np.linalg.lstsq(A, y, rcond=None)
        solver = "least-squares"
        condition = float(sv[0] / sv[n - 1])
    else:
        M = np.linalg.pinv(A, rcond=rank_rtol) @ y
        solver = "pseudo-inverse"
        condition = float("inf")
    residual = float(np.linalg.norm(prob.H @ M - prob.b))
    return InertiaEstimate(M, prob.omega_labels, residual, condition, solver,
                           prob.window, A.shape[0] // 2)


def estimate_from_series(data: TimeSeriesSet, window: float | None = DEFAULT_WINDOW,
                         settings: DecompositionSettings = DEFAULT_SETTINGS,
                         omega_labels=None, power_label: str = POWER_CHANNEL) -> InertiaEstimate:
    """Window, decompose and estimate in one call."""
    if omega_labels is not None:
        data = data.select(tuple(omega_labels) + (power_label,))
    chunk = data.window(window) if window is not None else data
    spec = decompose(chunk, settings)
    prob = assemble_system(spec, omega_labels, power_label, window=chunk.duration)
    return estimate_inertia(prob)


def window_sweep(data: TimeSeriesSet, windows,
                 settings: DecompositionSettings = DEFAULT_SETTINGS, jobs: int = 1) -> list[tuple[float, InertiaEstimate]]:
    """Estimate over the first ``w`` seconds of data for each ``w`` in ``windows``."""
    windows = [float(w) for w in windows]

    def run(w):
        try:
            return w, estimate_from_series(data, w, settings)
        except InertiaToolError as exc:
            raise WindowError(w, exc) from exc

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(run, windows))
    return [run(w) for w in windows]


def leave_one_out(data: TimeSeriesSet, dropped: str, window: float = DEFAULT_WINDOW,
                  settings: DecompositionSettings = DEFAULT_SETTINGS) -> InertiaEstimate:
    """Estimate with one rotor-speed channel withheld.

    The system-wide figure is the plain sum over the remaining generators.
    """
    if dropped == POWER_CHANNEL:
        raise ChannelError("the accelerating-power channel cannot be dropped")
    reduced = data.drop(dropped)
    remaining = tuple(lab for lab in reduced.labels if lab != POWER_CHANNEL)
    if not remaining:
        raise ChannelError(f"dropping {dropped} leaves no rotor-speed channels")
    return estimate_from_series(reduced, window, settings)


def leave_each_out(data: TimeSeriesSet, window: float = DEFAULT_WINDOW,
                   settings: DecompositionSettings = DEFAULT_SETTINGS,
                   jobs: int = 1) -> list[tuple[str, InertiaEstimate]]:
    labels = [lab for lab in data.labels if lab != POWER_CHANNEL]

    def run(lab):
        return lab, leave_one_out(data, lab, window, settings)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(run, labels))
    return [run(lab) for lab in labels]
