"""Time evolution of density matrices: populations, coherences, purity.

The default propagator is spectral (one eigendecomposition amortized over
all output times), which is the only practical option for trajectories
spanning ten decades of time.  A fixed-step fourth-order Runge-Kutta
integrator is kept as an independent cross-check oracle.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .liouvillian import (LiouvillianOperator, SpectralDecomposition,
                          decompose, unvec, vec, zero_mode_tolerance)


class PropagationError(RuntimeError):
    pass


def site_state(n: int, i: int) -> np.ndarray:
    """Density matrix |i><i|."""
    rho = np.zeros((n, n), dtype=complex)
    rho[i, i] = 1.0
    return rho


def validate_density_matrix(rho: np.ndarray, herm_tol: float = 1e-10,
                            trace_tol: float = 1e-10, pos_tol: float = 1e-8) -> None:
    """Check Hermiticity, unit trace, and positivity with numerical slack."""
    rho = np.asarray(rho)
    if np.abs(rho - rho.conj().T).max() > herm_tol:
        raise ValueError("density matrix is not Hermitian within tolerance")
    if abs(rho.trace() - 1.0) > trace_tol:
        raise ValueError("density matrix trace differs from 1")
    evals = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    if evals.min() < -pos_tol:
        raise ValueError("density matrix has a significantly negative eigenvalue")


@dataclass(frozen=True)
class Trajectory:
    """Stored observables of one evolution.

    ``populations[k, j]`` is P_j(times[k]); ``purity[k]`` is Tr rho(t)^2.
    Coherence storage is opt-in to bound memory on large sweeps.
    """

    times: np.ndarray
    populations: np.ndarray
    purity: np.ndarray
    coherences: Optional[np.ndarray] = None

    @property
    def n_sites(self) -> int:
        return self.populations.shape[1]


def log_time_grid(t_min: float, t_max: float, n: int) -> np.ndarray:
    """Logarithmic output grid, the natural choice for multi-decade relaxation."""
    if not (0 < t_min < t_max) or n < 2:
        raise ValueError("need 0 < t_min < t_max and n >= 2")
    return np.geomspace(t_min, t_max, n)


def evolve(liou: LiouvillianOperator, rho0: np.ndarray, times,
           spec: Optional[SpectralDecomposition] = None,
           store_coherences: bool = False) -> Trajectory:
    """Propagate rho(t) = exp(L t) rho(0) on the given output grid.

    Uses the spectral decomposition (computed once, or passed in).  The
    steady eigenvalue is snapped to exactly zero inside its tolerance so
    that trace and steady populations do not drift over long horizons.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0 or np.any(np.diff(times) <= 0) or times[0] < 0:
        raise ValueError("times must be a strictly increasing grid starting at >= 0")
    validate_density_matrix(rho0)
    n = liou.n_sites
    if spec is None:
        spec = decompose(liou, require_unique_zero=False)
    vals = spec.eigenvalues.copy()
    tol = zero_mode_tolerance(vals)
    vals[np.abs(vals) < tol] = 0.0
    c0 = spec.left_modes @ vec(rho0)
    weights = np.exp(np.outer(times, vals)) * c0       # (T, n^2) mode amplitudes
    diag_pos = np.arange(n) * (n + 1)
    populations = (weights @ spec.right_modes[diag_pos, :].T).real
    # purity = ||rho||_F^2; computed from the full state per output time
    purity = np.empty(times.size)
    coherences = np.empty((times.size, n, n), dtype=complex) if store_coherences else None
    for k in range(times.size):
        rho = unvec(spec.right_modes @ weights[k], n)
        rho = 0.5 * (rho + rho.conj().T)
        purity[k] = float(np.vdot(rho, rho).real)
        if store_coherences:
            coherences[k] = rho
    return Trajectory(times=times, populations=populations, purity=purity,
                      coherences=coherences)


def evolve_rk4(liou: LiouvillianOperator, rho0: np.ndarray, times,
               max_step: Optional[float] = None) -> Trajectory:
    """Classic fixed-step RK4 on the vectorized equation; cross-check oracle.

    The step is capped by the fastest scale of the generator.  Diverging
    norms raise instead of returning garbage.
    """
    times = np.asarray(times, dtype=float)
    validate_density_matrix(rho0)
    n = liou.n_sites
    M = liou.matrix
    if max_step is None:
        max_step = 0.1 / max(np.abs(M).sum(axis=1).max(), 1e-300)
    x = vec(np.asarray(rho0, dtype=complex))
    out_pop = np.empty((times.size, n))
    out_pur = np.empty(times.size)
    diag_pos = np.arange(n) * (n + 1)
    t = 0.0
    for k, t_target in enumerate(times):
        span = t_target - t
        if span > 0:
            steps = max(1, int(np.ceil(span / max_step)))
            h = span / steps
            for _ in range(steps):
                k1 = M @ x
                k2 = M @ (x + 0.5 * h * k1)
                k3 = M @ (x + 0.5 * h * k2)
                k4 = M @ (x + h * k3)
                x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            t = t_target
        if not np.isfinite(x).all() or np.abs(x).max() > 1e6:
            raise PropagationError("stepping integrator diverged")
        rho = unvec(x, n)
        out_pop[k] = np.diag(rho).real
        out_pur[k] = float(np.vdot(rho, rho).real)
    return Trajectory(times=times, populations=out_pop, purity=out_pur)


@dataclass(frozen=True)
class PlateauReport:
    """Window averages with a flatness score (max deviation over mean)."""

    window: tuple
    populations: np.ndarray
    purity: float
    flatness: np.ndarray
    purity_flatness: float


def plateau_report(traj: Trajectory, window) -> PlateauReport:
    """Time-averaged populations and purity over ``window = (t_lo, t_hi)``."""
    t_lo, t_hi = window
    mask = (traj.times >= t_lo) & (traj.times <= t_hi)
    if not mask.any():
        raise ValueError("window contains no stored times")
    pops = traj.populations[mask]
    mean = pops.mean(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        flat = np.abs(pops - mean).max(axis=0) / np.abs(mean)
    pur = traj.purity[mask]
    return PlateauReport(window=(float(t_lo), float(t_hi)),
                         populations=mean, purity=float(pur.mean()),
                         flatness=np.nan_to_num(flat),
                         purity_flatness=float(np.abs(pur - pur.mean()).max()
                                               / abs(pur.mean())))
