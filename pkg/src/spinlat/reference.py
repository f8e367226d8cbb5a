"""Closed-form three-site results: golden-rule rate, regime timescales,
exact steady flux, and the dark-state rotation of the hybridized pair.

These are the independent oracles the numerical machinery is checked
against.  The minimal model couples two nearby sites |0>, |1> strongly (J)
and both weakly (eps) to a remote site |2>; local dephasing Gamma acts on
every site.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .liouvillian import Hamiltonian, build_liouvillian
from .dynamics import evolve, log_time_grid, site_state


class RegimeError(ValueError):
    """Dephasing sits in the crossover window where no regime formula applies."""


@dataclass(frozen=True)
class MinimalModelParams:
    """Couplings and rates of the three-site model (units of j_max)."""

    j: float
    eps: float
    gamma: float
    gamma_l: Optional[float] = None

    def __post_init__(self):
        if min(self.j, self.eps, self.gamma) < 0:
            raise ValueError("couplings and rates must be >= 0")
        if self.gamma_l is not None and self.gamma_l < 0:
            raise ValueError("gamma_l must be >= 0")

    @property
    def is_weak_dephasing(self) -> bool:
        return self.gamma * 3.0 <= self.j

    @property
    def is_strong_dephasing(self) -> bool:
        return self.gamma >= 3.0 * self.j


def hierarchical_hamiltonian(p: MinimalModelParams) -> Hamiltonian:
    """Strongly hybridized pair plus weakly attached remote site."""
    return Hamiltonian(np.array([[0.0, p.j, p.eps],
                                 [p.j, 0.0, p.eps],
                                 [p.eps, p.eps, 0.0]]))


def homogeneous_hamiltonian(coupling: float, n: int = 3) -> Hamiltonian:
    """All pairs coupled at one scale; the contrast case to hierarchy."""
    m = np.full((n, n), float(coupling))
    np.fill_diagonal(m, 0.0)
    return Hamiltonian(m)


def plus_minus_hamiltonian(p: MinimalModelParams) -> np.ndarray:
    """Hamiltonian rotated to the {|+>, |->, |2>} basis of the pair.

    The antisymmetric combination decouples exactly from the remote site
    (the dark state); the symmetric one couples with element sqrt(2)*eps
    and carries the internally generated detuning J.
    """
    s = 1.0 / np.sqrt(2.0)
    u = np.array([[s, s, 0.0], [s, -s, 0.0], [0.0, 0.0, 1.0]])
    return u @ hierarchical_hamiltonian(p).matrix @ u.T


def golden_rule_rate(p: MinimalModelParams) -> float:
    """Dephasing-assisted escape rate from the pair to the remote site.

    4 eps^2 Gamma / (J^2 + Gamma^2); zero at Gamma=0 (no broadening, no
    off-resonant transfer) by construction, not as an error.
    """
    if p.gamma == 0.0:
        return 0.0
    return 4.0 * p.eps ** 2 * p.gamma / (p.j ** 2 + p.gamma ** 2)


def analytic_eta(p: MinimalModelParams) -> float:
    """Exact steady flux of the three-site model with recycling loss.

    Injection at site 0, extraction at site 2 with rate gamma_l; verified
    symbolically against the trace-pinned steady state.
    """
    if p.gamma_l is None or p.gamma_l <= 0:
        raise ValueError("analytic_eta needs gamma_l > 0")
    J, e, G, gl = p.j, p.eps, p.gamma, p.gamma_l
    num = 4.0 * G * gl * (2.0 * G + gl) * e ** 2
    den = (4.0 * G ** 3 * gl + 4.0 * gl ** 2 * e ** 2
           + 4.0 * G ** 2 * (gl ** 2 + 6.0 * e ** 2)
           + G * (gl ** 3 + 4.0 * gl * (J ** 2 + 5.0 * e ** 2)))
    return num / den


CONNECTIVITIES = ("hierarchical", "homogeneous-strong", "homogeneous-weak")


def regime_timescale(p: MinimalModelParams, connectivity: str) -> float:
    """Representative relaxation timescale for a connectivity and regime.

    Weak dephasing (Gamma << J): hierarchical J^2/(eps^2 Gamma), both
    homogeneous cases 1/Gamma.  Strong dephasing (Gamma >> J): hierarchical
    and homogeneous-weak Gamma/eps^2, homogeneous-strong Gamma/J^2.

    Raises
    ------
    RegimeError
        Inside the crossover window Gamma/J in [1/3, 3], where neither
        asymptotic formula is honest.
    """
    if connectivity not in CONNECTIVITIES:
        raise ValueError(f"connectivity must be one of {CONNECTIVITIES}")
    if p.is_weak_dephasing:
        if connectivity == "hierarchical":
            return p.j ** 2 / (p.eps ** 2 * p.gamma)
        return 1.0 / p.gamma
    if p.is_strong_dephasing:
        if connectivity == "homogeneous-strong":
            return p.gamma / p.j ** 2
        return p.gamma / p.eps ** 2
    raise RegimeError(
        f"Gamma/J = {p.gamma / p.j:.3g} lies in the crossover window [1/3, 3]")


def equilibration_time(h: Hamiltonian, gamma: float, init: int, target: int,
                       p_steady: float, t_span=(1e-2, 1e12),
                       points_per_decade: int = 120) -> float:
    """Simulated 1 - 1/e equilibration time of one site's population.

    Returns the last grid time at which |P_target - p_steady| still exceeds
    1/e of its initial deviation, i.e. the time after which the population
    stays within the band (robust against coherent oscillations).
    """
    n = h.n_sites
    liou = build_liouvillian(h, np.full(n, float(gamma)))
    decades = np.log10(t_span[1] / t_span[0])
    times = log_time_grid(t_span[0], t_span[1], int(decades * points_per_decade) + 1)
    traj = evolve(liou, site_state(n, init), times)
    dev = np.abs(traj.populations[:, target] - p_steady)
    threshold = abs((1.0 if init == target else 0.0) - p_steady) / np.e
    above = np.nonzero(dev > threshold)[0]
    if above.size == 0:
        return float(times[0])
    if above[-1] == times.size - 1:
        return float("inf")
    return float(times[above[-1] + 1])


def simulated_regime_time(p: MinimalModelParams, connectivity: str) -> float:
    """1 - 1/e equilibration time of site 2 in the named three-site model."""
    if connectivity == "hierarchical":
        h = hierarchical_hamiltonian(p)
    elif connectivity == "homogeneous-strong":
        h = homogeneous_hamiltonian(p.j)
    elif connectivity == "homogeneous-weak":
        h = homogeneous_hamiltonian(p.eps)
    else:
        raise ValueError(f"connectivity must be one of {CONNECTIVITIES}")
    return equilibration_time(h, p.gamma, init=0, target=2, p_steady=1.0 / 3.0)


def table_rows(j: float = 1e-2, eps: float = 1e-4,
               weak_gamma: float = 1e-5, strong_gamma: float = 1e-1):
    """Regime-grid rows: (connectivity, regime, J, eps, Gamma, timescale)."""
    rows = []
    for regime, gamma in (("weak", weak_gamma), ("strong", strong_gamma)):
        p = MinimalModelParams(j=j, eps=eps, gamma=gamma)
        for connectivity in CONNECTIVITIES:
            rows.append((connectivity, regime, j, eps, gamma,
                         regime_timescale(p, connectivity)))
    return rows
