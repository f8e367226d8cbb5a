"""Integrated survival and transfer measures, and trap-based passage times.

T[i, j] is the time integral of (P_j(t) - 1/n) for an excitation prepared
at site i.  The steady component is removed (it would make the integral
diverge), so rows sum to zero, the diagonal is the positive survival
measure, and persistently underpopulated sites carry negative entries.

Two independent routes compute T: a deflated linear solve (default; the
zero mode is shifted away by a rank-one update and projected off) and the
spectral sum over nonzero modes.  They must agree; tests enforce it.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import LinAlgWarning, get_lapack_funcs, lu_factor, lu_solve

from .liouvillian import (LiouvillianOperator, SpectralDecomposition,
                          LossChannel, build_liouvillian, trace_functional, vec)


class SolverError(RuntimeError):
    """Linear solve failed or is too ill-conditioned to trust."""


@dataclass(frozen=True)
class TransferMatrix:
    """Steady-subtracted integrated population measures at one dephasing."""

    values: np.ndarray
    gamma: float
    imag_residue: float
    condition_estimate: float

    @property
    def n_sites(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class MfptResult:
    """Trap-based mean first passage time and per-site residence times."""

    tau_total: float
    tau_site: np.ndarray
    trap_rate: float


def _deflated_operator(liou: LiouvillianOperator):
    """LU of L + sigma |rho_ss><l0|, shifting the zero mode to sigma.

    For loss-free local-dephasing generators the steady state is the
    maximally mixed one, exactly; the rank-one update leaves every other
    eigenpair untouched.
    """
    n = liou.n_sites
    r0 = vec(np.eye(n, dtype=complex) / n)
    l0 = trace_functional(n)
    sigma = -float(np.abs(liou.matrix).sum(axis=1).max())
    A = liou.matrix + sigma * np.outer(r0, l0.conj())
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, piv = lu_factor(A)
    gecon = get_lapack_funcs("gecon", (A,))
    anorm = float(np.abs(A).sum(axis=0).max())
    rcond, _ = gecon(lu, anorm)
    return (lu, piv), A, r0, l0, (1.0 / rcond if rcond > 0 else np.inf)


def _refined_solve(lu_piv, A, B, iterations: int = 2) -> np.ndarray:
    """LU solve with iterative refinement (double-precision residuals)."""
    X = lu_solve(lu_piv, B)
    for _ in range(iterations):
        X += lu_solve(lu_piv, B - A @ X)
    return X


def transfer_matrix(liou: LiouvillianOperator,
                    spec: Optional[SpectralDecomposition] = None,
                    method: str = "solve",
                    sites=None) -> TransferMatrix:
    """Full T matrix (or selected preparation rows) of a loss-free generator.

    Parameters
    ----------
    method : {"solve", "spectral"}
        "solve" uses one LU of the deflated operator for all preparation
        sites; "spectral" sums over the nonzero modes of ``spec`` (computed
        on demand).  Both paths agree to solver accuracy.
    sites : iterable of int, optional
        Preparation sites to compute (default: all).  Rows not requested
        are left at zero.

    Raises
    ------
    SolverError
        On a non-unique zero mode or an untrustworthy solve.
    """
    if liou.loss is not None and liou.loss.rate > 0:
        raise SolverError("transfer_matrix requires a loss-free generator")
    n = liou.n_sites
    which = list(range(n)) if sites is None else [int(s) for s in sites]
    diag_pos = np.arange(n) * (n + 1)
    values = np.zeros((n, n))
    worst_imag = 0.0

    if method == "solve":
        lu_piv, A, r0, l0, cond = _deflated_operator(liou)
        if not np.isfinite(cond):
            raise SolverError("deflated operator is numerically singular")
        B = np.zeros((n * n, len(which)), dtype=complex)
        for col, i in enumerate(which):
            B[i * (n + 1), col] = 1.0
            B[:, col] -= r0
        X = _refined_solve(lu_piv, A, B)
        X -= np.outer(r0, l0.conj() @ X)
        for col, i in enumerate(which):
            row = -X[diag_pos, col]
            worst_imag = max(worst_imag, float(np.abs(row.imag).max()))
            values[i] = row.real
    elif method == "spectral":
        from .liouvillian import decompose
        if spec is None:
            spec = decompose(liou)
        if spec.zero_mode_index < 0:
            raise SolverError("spectral route needs an identified zero mode")
        vals = spec.eigenvalues
        cond = float(np.abs(vals).max()
                     / min(abs(v) for k, v in enumerate(vals)
                           if k != spec.zero_mode_index))
        inv = np.zeros_like(vals)
        for k, v in enumerate(vals):
            if k != spec.zero_mode_index:
                inv[k] = 1.0 / v
        Rd = spec.right_modes[diag_pos, :]              # (n, n^2)
        for i in which:
            c = spec.left_modes @ _site_vec(n, i)
            row = -(Rd @ (inv * c))
            worst_imag = max(worst_imag, float(np.abs(row.imag).max()))
            values[i] = row.real
    else:
        raise ValueError(f"unknown method {method!r}")

    scale = max(np.abs(values).max(), 1e-300)
    return TransferMatrix(values=values, gamma=float(np.max(liou.dephasing_rates)),
                          imag_residue=worst_imag / scale,
                          condition_estimate=cond)


def _site_vec(n: int, i: int) -> np.ndarray:
    b = np.zeros(n * n, dtype=complex)
    b[i * (n + 1)] = 1.0
    return b


def gamma_grid(lo: float = 1e-6, hi: float = 1.0, n: int = 50,
               dense_lo: float = 1e-4, dense_hi: float = 1e-2,
               dense_factor: int = 2) -> np.ndarray:
    """Log-spaced dephasing grid with densified sampling in a middle band."""
    base = np.geomspace(lo, hi, n)
    if dense_factor > 1 and dense_lo < dense_hi:
        per_decade = (n - 1) / np.log10(hi / lo)
        extra_n = int(np.ceil(per_decade * dense_factor
                              * np.log10(dense_hi / dense_lo)))
        extra = np.geomspace(dense_lo, dense_hi, max(extra_n, 2))
        base = np.unique(np.concatenate([base, extra]))
    return base


@dataclass(frozen=True)
class SurvivalCurve:
    """T_ii against dephasing for one preparation site."""

    site: int
    gammas: np.ndarray
    t_ii: np.ndarray
    gamma_star: float
    t_min: float

    @property
    def inv_t_ii(self) -> np.ndarray:
        return 1.0 / self.t_ii


def refine_log_minimum(gammas: np.ndarray, values: np.ndarray):
    """Sub-grid minimum via a parabola in (log gamma, log value).

    Falls back to the discrete minimum when it sits on the grid edge or the
    local curvature is not convex.
    """
    k = int(np.argmin(values))
    if 0 < k < len(values) - 1 and np.all(values[k - 1:k + 2] > 0):
        lx = np.log(gammas[k - 1:k + 2])
        ly = np.log(values[k - 1:k + 2])
        a, b, c = np.polyfit(lx, ly, 2)
        if a > 0:
            x_star = -b / (2 * a)
            if lx[0] <= x_star <= lx[2]:
                return float(np.exp(x_star)), float(np.exp(np.polyval([a, b, c], x_star)))
    return float(gammas[k]), float(values[k])


def survival_curve(build, site: int, gammas) -> SurvivalCurve:
    """T_ii(Gamma) for one site; ``build(gamma)`` returns the generator.

    The minimum location is refined parabolically in log-log around the
    discrete grid minimum.
    """
    gammas = np.asarray(gammas, dtype=float)
    if np.any(gammas <= 0):
        raise ValueError("dephasing grid must be positive")
    t_ii = np.empty(gammas.size)
    for k, g in enumerate(gammas):
        liou = build(g)
        t_ii[k] = transfer_matrix(liou, sites=[site]).values[site, site]
    gamma_star, t_min = refine_log_minimum(gammas, t_ii)
    return SurvivalCurve(site=site, gammas=gammas, t_ii=t_ii,
                         gamma_star=gamma_star, t_min=t_min)


def dephasing_builder(h):
    """Convenience: map a scalar Gamma to a uniform-dephasing generator."""
    def build(gamma: float) -> LiouvillianOperator:
        return build_liouvillian(h, np.full(h.n_sites, float(gamma)))
    return build


def mfpt_with_trap(liou: LiouvillianOperator, rho0: np.ndarray) -> MfptResult:
    """Mean first passage time into an absorbing trap.

    Requires an "absorb" loss channel; the residence times are
    [(-L)^{-1} rho0]_jj and their sum is the MFPT.  No output time grid is
    involved.  A generator with surviving zero modes is still acceptable as
    long as the initial state has no weight on them (the trap must be
    reachable from the support of rho0); otherwise this raises.
    """
    if liou.loss is None or liou.loss.rate <= 0 or liou.loss.kind != "absorb":
        raise SolverError("mfpt_with_trap needs an absorbing loss channel")
    n = liou.n_sites
    A = -liou.matrix
    b = vec(np.asarray(rho0, dtype=complex))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LinAlgWarning)
        lu_piv = lu_factor(A)
    gecon = get_lapack_funcs("gecon", (A,))
    rcond, _ = gecon(lu_piv[0], float(np.abs(A).sum(axis=0).max()))
    if rcond > 1e3 * np.finfo(float).eps:
        x = _refined_solve(lu_piv, A, b)
    else:
        # stationary directions exist; integrate spectrally over the decaying
        # modes and insist the initial state avoids the surviving ones
        vals, right = np.linalg.eig(liou.matrix)
        c = np.linalg.solve(right, b)
        tol = 1e-10 * np.abs(vals).max()
        stuck = np.abs(vals) < tol
        if np.abs(c[stuck]).max(initial=0.0) > 1e-8:
            raise SolverError(
                "trap unreachable from the support of the initial state")
        inv = np.where(stuck, 0.0, -1.0 / np.where(stuck, 1.0, vals))
        x = right @ (inv * c)
    tau = x[np.arange(n) * (n + 1)].real
    return MfptResult(tau_total=float(tau.sum()), tau_site=tau,
                      trap_rate=float(liou.loss.rate))


def absorbing_liouvillian(h, gammas, trap_site: int, trap_rate: float
                          ) -> LiouvillianOperator:
    """Generator with local dephasing plus an absorbing trap on one site."""
    loss = LossChannel(source=trap_site, sink=trap_site, rate=trap_rate,
                       kind="absorb")
    return build_liouvillian(h, gammas, loss=loss)
