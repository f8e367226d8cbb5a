"""Nonequilibrium steady states: trace-pinned solve, flux, current maps.

Injection at site n and extraction at site m are realized by the recycling
jump sqrt(gl)|n><m| added to the local-dephasing generator.  The steady
state solves the linear system obtained by replacing the row of rho_nn in
the generator with the vectorized identity (the trace condition) and
putting 1 on the right-hand side at that row.

The population flux is eta = gl * rho_mm at the extraction site, and the
bond-resolved probability current is F[m, n] = 2 H[n, m] Im rho[m, n]
(current flowing from m to n).  Kirchhoff balance at every non-terminal
site and inflow eta at the extraction site hold to solver precision; the
solve uses extended-precision iterative refinement so those identities
survive even when eta is many orders below the population scale.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgWarning, get_lapack_funcs, lu_factor, lu_solve
from scipy.signal import find_peaks

from .liouvillian import (Hamiltonian, LiouvillianOperator, LossChannel,
                          build_liouvillian, trace_functional, unvec)


class NessSolverError(RuntimeError):
    """Pinned steady-state system is singular or inconsistent."""


@dataclass(frozen=True)
class NessProblem:
    """Injection/extraction setup on top of a dephasing network."""

    hamiltonian: Hamiltonian
    dephasing_rates: np.ndarray
    inject: int
    extract: int
    loss_rate: float

    def __post_init__(self):
        if self.inject == self.extract:
            raise ValueError("injection and extraction sites must differ")
        if self.loss_rate <= 0:
            raise ValueError("loss rate must be positive")

    def liouvillian(self) -> LiouvillianOperator:
        loss = LossChannel(source=self.inject, sink=self.extract,
                           rate=self.loss_rate, kind="recycle")
        return build_liouvillian(self.hamiltonian, self.dephasing_rates, loss=loss)


@dataclass(frozen=True)
class NessResult:
    """Steady state, flux, currents, and the unpinned residual."""

    rho: np.ndarray
    eta: float
    currents: np.ndarray
    residual: float

    def inflow(self) -> np.ndarray:
        """Net current into each site (sums the Kirchhoff balance)."""
        return self.currents.sum(axis=0)


def probability_currents(h: Hamiltonian, rho: np.ndarray) -> np.ndarray:
    """Antisymmetric bond current matrix F[m, n] = 2 H[n, m] Im rho[m, n]."""
    return 2.0 * h.matrix.T * np.imag(rho)


def solve_ness(problem: NessProblem, refine_iterations: int = 3) -> NessResult:
    """Solve the trace-pinned steady-state system.

    Iterative refinement runs with extended-precision residuals so that the
    component-wise accuracy of the tiny steady coherences (and with them
    the Kirchhoff identities) is preserved.

    Raises
    ------
    NessSolverError
        If the pinned system is singular, which signals a disconnected
        injection/extraction pair.
    """
    liou = problem.liouvillian()
    n = liou.n_sites
    pin = problem.inject * (n + 1)
    pinned = liou.matrix.copy()
    pinned[pin, :] = trace_functional(n).conj()
    b = np.zeros(n * n, dtype=complex)
    b[pin] = 1.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LinAlgWarning)
        lu_piv = lu_factor(pinned)
    gecon = get_lapack_funcs("gecon", (pinned,))
    rcond, _ = gecon(lu_piv[0], float(np.abs(pinned).sum(axis=0).max()))
    if not np.isfinite(lu_piv[0]).all() or rcond < 100 * np.finfo(float).eps ** 2:
        raise NessSolverError(
            "pinned steady-state system is singular: injection and extraction "
            f"are not connected (rcond={rcond:.1e})")
    x = lu_solve(lu_piv, b)
    if not np.isfinite(x).all():
        raise NessSolverError("pinned steady-state solve produced non-finite values")
    if refine_iterations > 0:
        A_ext = pinned.astype(np.clongdouble)
        b_ext = b.astype(np.clongdouble)
        x_ext = x.astype(np.clongdouble)
        for _ in range(refine_iterations):
            r = b_ext - A_ext @ x_ext
            x_ext = x_ext + lu_solve(lu_piv, np.ascontiguousarray(
                r.astype(complex))).astype(np.clongdouble)
        x = x_ext.astype(complex)
    rho = unvec(x, n)
    rho = 0.5 * (rho + rho.conj().T)
    # residual of the original (unpinned) generator, excluding the pinned row
    full_res = liou.matrix @ x
    full_res[pin] = 0.0
    residual = float(np.abs(full_res).max())
    eta = float(problem.loss_rate * rho[problem.extract, problem.extract].real)
    currents = probability_currents(problem.hamiltonian, rho)
    return NessResult(rho=rho, eta=eta, currents=currents, residual=residual)


@dataclass(frozen=True)
class FluxSweep:
    """eta over a (Gamma, gamma_l) grid, with per-gamma_l peak locations."""

    gammas: np.ndarray
    loss_rates: np.ndarray
    eta: np.ndarray            # shape (len(loss_rates), len(gammas))
    peaks: dict                # loss_rate -> array of peak Gammas


def find_flux_peaks(gammas: np.ndarray, etas: np.ndarray,
                    prominence_fraction: float = 0.05) -> np.ndarray:
    """Local maxima of the flux curve.

    Peaks are detected on the log-log curve and kept when their linear
    prominence reaches ``prominence_fraction`` of the global maximum.
    """
    etas = np.asarray(etas, dtype=float)
    if etas.size < 3:
        return np.array([])
    idx, _ = find_peaks(etas, prominence=prominence_fraction * etas.max())
    return np.asarray(gammas)[idx]


def flux_sweep(h: Hamiltonian, inject: int, extract: int, gammas,
               loss_rates, refine_iterations: int = 3) -> FluxSweep:
    """eta(Gamma; gamma_l) on a grid, one pinned solve per point."""
    gammas = np.asarray(gammas, dtype=float)
    loss_rates = np.atleast_1d(np.asarray(loss_rates, dtype=float))
    if np.any(gammas <= 0) or np.any(loss_rates <= 0):
        raise ValueError("grids must be positive")
    n = h.n_sites
    eta = np.empty((loss_rates.size, gammas.size))
    for a, gl in enumerate(loss_rates):
        for k, g in enumerate(gammas):
            problem = NessProblem(hamiltonian=h,
                                  dephasing_rates=np.full(n, g),
                                  inject=inject, extract=extract, loss_rate=gl)
            eta[a, k] = solve_ness(problem, refine_iterations).eta
    peaks = {float(gl): find_flux_peaks(gammas, eta[a])
             for a, gl in enumerate(loss_rates)}
    return FluxSweep(gammas=gammas, loss_rates=loss_rates, eta=eta, peaks=peaks)


@dataclass(frozen=True)
class Pathway:
    """Dominant-current edges oriented along the flow.

    ``edges`` are (from_site, to_site, current) with positive current;
    ``is_chain`` reports whether they form one unbranched walk from the
    injection site to the extraction site.
    """

    edges: list
    is_chain: bool


def dominant_pathway(result: NessResult, inject: int, extract: int,
                     threshold: float = 0.2) -> Pathway:
    """Edges with |F| >= threshold * max|F|, ordered along the flow.

    When the kept edges form a single unbranched chain from injection to
    extraction they are returned in walk order; otherwise they come sorted
    by decreasing current magnitude with ``is_chain=False``.
    """
    F = result.currents
    n = F.shape[0]
    fmax = np.abs(F).max()
    if fmax == 0.0:
        return Pathway(edges=[], is_chain=False)
    kept = []
    for a in range(n):
        for b in range(a + 1, n):
            if abs(F[a, b]) >= threshold * fmax:
                m, t = (a, b) if F[a, b] > 0 else (b, a)
                kept.append((m, t, float(abs(F[a, b]))))
    out_edges: dict[int, list] = {}
    in_deg: dict[int, int] = {}
    for m, t, f in kept:
        out_edges.setdefault(m, []).append((t, f))
        in_deg[t] = in_deg.get(t, 0) + 1
    # chain = unique outgoing edge per visited node, covering all kept edges
    walk, seen = [], set()
    node = inject
    while node in out_edges and len(out_edges[node]) == 1:
        t, f = out_edges[node][0]
        edge = (node, t, f)
        if edge in seen:
            break
        walk.append(edge)
        seen.add(edge)
        node = t
    is_chain = (len(walk) == len(kept) > 0 and node == extract
                and all(in_deg.get(t, 0) == 1 for _, t, _ in walk))
    if is_chain:
        return Pathway(edges=walk, is_chain=True)
    return Pathway(edges=sorted(kept, key=lambda e: -e[2]), is_chain=False)
