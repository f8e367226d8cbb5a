"""Tight-binding Hamiltonians and vectorized Lindblad generators.

Vectorization is column-stacking: the density matrix element rho_ab maps to
vector index a + n*b, so vec(A rho B) = kron(B.T, A) vec(rho) and the
coherent part of the generator is -1j*(kron(I, H) - kron(H.T, I)).

Local dephasing uses projector jump operators L_j = |j><j| with rates
Gamma_j; it is diagonal in the vectorized basis and leaves populations
untouched.  Two loss channels are supported on top: a trace-preserving
"recycle" jump sqrt(gl)|n><m| (population extracted at m reappears at n,
used for steady-state transport) and a trace-draining "absorb" channel
(anticommutator part only, used for trapping-based first-passage times).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from .geometry import CouplingMatrix, SpinConfiguration


class DegenerateSteadyStateError(RuntimeError):
    """More than one steady mode found: the coupling graph is disconnected."""


@dataclass(frozen=True)
class Hamiltonian:
    """Real symmetric single-excitation Hamiltonian."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.ascontiguousarray(np.asarray(self.matrix, dtype=float))
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("Hamiltonian must be square")
        if not np.allclose(m, m.T):
            raise ValueError("Hamiltonian must be symmetric")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @property
    def n_sites(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class LossChannel:
    """Loss descriptor: population leaves site ``sink`` at rate ``rate``.

    kind="recycle" reinjects it at ``source`` (trace preserving);
    kind="absorb" removes it from the tracked network (source ignored).
    """

    source: int
    sink: int
    rate: float
    kind: str = "recycle"

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError("loss rate must be >= 0")
        if self.kind not in ("recycle", "absorb"):
            raise ValueError(f"unknown loss kind {self.kind!r}")
        if self.kind == "recycle" and self.source == self.sink:
            raise ValueError("recycle loss needs distinct source and sink")


@dataclass(frozen=True)
class LiouvillianOperator:
    """Dense vectorized generator together with its physical ingredients."""

    matrix: np.ndarray
    n_sites: int
    dephasing_rates: np.ndarray
    hamiltonian: Hamiltonian
    loss: Optional[LossChannel] = None

    @property
    def dim(self) -> int:
        return self.n_sites ** 2


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigen data of a Liouvillian, sorted by descending real part.

    ``left_modes[k]`` (rows) and ``right_modes[:, k]`` (columns) are
    biorthonormal: left_modes @ right_modes = identity up to the reported
    inversion accuracy.  ``residual`` is max_k |L R_k - lambda_k R_k|.
    """

    eigenvalues: np.ndarray
    right_modes: np.ndarray
    left_modes: np.ndarray
    zero_mode_index: int
    residual: float


def vec(rho: np.ndarray) -> np.ndarray:
    """Column-stack a matrix (rho_ab -> index a + n*b)."""
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v: np.ndarray, n: int) -> np.ndarray:
    """Inverse of :func:`vec`."""
    return np.asarray(v).reshape((n, n), order="F")


def build_hamiltonian(config: SpinConfiguration, cm: CouplingMatrix) -> Hamiltonian:
    """Assemble H with on-site energies on the diagonal and couplings off it."""
    if cm.n_sites != config.n_sites:
        raise ValueError("configuration and coupling matrix sizes differ")
    m = cm.values.copy()
    m[np.diag_indices_from(m)] = config.energies
    return Hamiltonian(matrix=m)


def dephasing_diagonal(gammas: np.ndarray) -> np.ndarray:
    """Diagonal of the local-dephasing dissipator in the vectorized basis.

    Element (a, b) decays at (Gamma_a + Gamma_b)/2 off the diagonal and is
    untouched on it.
    """
    g = np.asarray(gammas, dtype=float)
    n = g.shape[0]
    a = np.tile(g, n)                 # index a varies fastest (column stacking)
    b = np.repeat(g, n)
    diag = -0.5 * (a + b)
    diag[np.arange(n) * (n + 1)] = 0.0
    return diag


def build_liouvillian(h: Hamiltonian, gammas, loss: Optional[LossChannel] = None
                      ) -> LiouvillianOperator:
    """Dense Lindblad generator for local dephasing plus an optional loss.

    The builder only materializes arrays of the final operator's size.
    """
    H = h.matrix
    n = h.n_sites
    g = np.asarray(gammas, dtype=float)
    if g.shape != (n,):
        raise ValueError("gammas must have one rate per site")
    if np.any(g < 0):
        raise ValueError("dephasing rates must be >= 0")
    eye = np.eye(n)
    L = (-1j * (np.kron(eye, H) - np.kron(H.T, eye))).astype(complex)
    L[np.arange(n * n), np.arange(n * n)] += dephasing_diagonal(g)
    if loss is not None and loss.rate > 0:
        m_idx = loss.sink
        if not (0 <= m_idx < n) or not (0 <= loss.source < n):
            raise ValueError("loss sites out of range")
        # -rate/2 {|m><m|, rho}: damps row m and column m of rho
        cols = np.arange(n * n)
        a_idx = cols % n
        b_idx = cols // n
        drain = -0.5 * loss.rate * ((a_idx == m_idx).astype(float)
                                    + (b_idx == m_idx).astype(float))
        L[cols, cols] += drain
        if loss.kind == "recycle":
            # rate * |n><m| rho |m><n|: moves rho_mm to rho_ss(source)
            L[loss.source * (n + 1), m_idx * (n + 1)] += loss.rate
    return LiouvillianOperator(matrix=L, n_sites=n, dephasing_rates=g,
                               hamiltonian=h, loss=loss)


def trace_functional(n: int) -> np.ndarray:
    """Vectorized identity: the left zero mode of every trace-preserving generator."""
    out = np.zeros(n * n, dtype=complex)
    out[np.arange(n) * (n + 1)] = 1.0
    return out


def zero_mode_tolerance(eigenvalues: np.ndarray) -> float:
    return 1e-10 * float(np.abs(eigenvalues).max())


def decompose(liou: LiouvillianOperator, require_unique_zero: bool = True
              ) -> SpectralDecomposition:
    """Full biorthogonal eigendecomposition.

    Left modes are obtained by inverting the right eigenvector matrix, which
    enforces biorthonormality to within the inversion accuracy; the residual
    field reports max_k |L R_k - lambda_k R_k| so silently degraded
    decompositions are visible to the caller.

    Raises
    ------
    DegenerateSteadyStateError
        If more than one eigenvalue lies inside the zero-mode tolerance
        while ``require_unique_zero`` is set and the generator is loss free.
    """
    M = liou.matrix
    vals, right = scipy.linalg.eig(M)
    order = np.argsort(-vals.real, kind="stable")
    vals = vals[order]
    right = right[:, order]
    left = np.linalg.inv(right)
    residual = float(np.abs(M @ right - right * vals[None, :]).max())
    tol = zero_mode_tolerance(vals)
    zero_candidates = np.nonzero(np.abs(vals) < tol)[0]
    if liou.loss is None or liou.loss.rate == 0 or liou.loss.kind == "recycle":
        if len(zero_candidates) == 0:
            raise DegenerateSteadyStateError("no steady mode found within tolerance")
        if len(zero_candidates) > 1 and require_unique_zero:
            raise DegenerateSteadyStateError(
                f"{len(zero_candidates)} near-zero eigenvalues: disconnected network")
        zero_idx = int(zero_candidates[np.argmin(np.abs(vals[zero_candidates]))])
    else:
        # absorbing generator: everything decays; flag a surviving zero mode
        if len(zero_candidates) and require_unique_zero:
            raise DegenerateSteadyStateError(
                "absorbing generator retains a zero mode (trap unreachable)")
        zero_idx = -1
    return SpectralDecomposition(eigenvalues=vals, right_modes=right,
                                 left_modes=left, zero_mode_index=zero_idx,
                                 residual=residual)


def mode_site_weights(spec: SpectralDecomposition, indices,
                      n_sites: int | None = None) -> np.ndarray:
    """Population weight of selected modes on each site.

    Row k holds |diag(matricized R_k)| normalized to unit sum; rows of pure
    coherence modes (no population component) are left as zeros.
    """
    if n_sites is None:
        n_sites = int(round(np.sqrt(spec.eigenvalues.size)))
    idx = np.atleast_1d(np.asarray(indices, dtype=int))
    out = np.zeros((idx.size, n_sites))
    diag_pos = np.arange(n_sites) * (n_sites + 1)
    for row, k in enumerate(idx):
        w = np.abs(spec.right_modes[diag_pos, k])
        s = w.sum()
        if s > 1e-14 * np.abs(spec.right_modes[:, k]).max():
            out[row] = w / s
    return out


def slow_mode_indices(spec: SpectralDecomposition, count: int) -> np.ndarray:
    """Indices of the ``count`` slowest non-steady modes by |Re lambda|."""
    order = np.argsort(np.abs(spec.eigenvalues.real), kind="stable")
    keep = [k for k in order if k != spec.zero_mode_index]
    return np.asarray(keep[:count], dtype=int)


def export_spectrum_rows(spec: SpectralDecomposition):
    """(index, re, im) rows for the eigenvalue table export."""
    return [(k, float(v.real), float(v.imag))
            for k, v in enumerate(spec.eigenvalues)]
