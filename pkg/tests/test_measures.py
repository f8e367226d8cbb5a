import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_network_liouvillian
from spinlat.dynamics import evolve, site_state
from spinlat.geometry import coupling_matrix, generate_configuration, tight_cluster_configuration
from spinlat.liouvillian import Hamiltonian, build_hamiltonian, build_liouvillian, decompose
from spinlat.measures import (SolverError, absorbing_liouvillian,
                              dephasing_builder, gamma_grid, mfpt_with_trap,
                              refine_log_minimum, survival_curve,
                              transfer_matrix)


def quadrature_transfer_row(liou, site, t_max=1e9, points=350_000):
    """Independent oracle: integrate (P_j(t) - 1/n) dt by trapezoid.

    ~25k points per decade keeps the trapezoid error well below 1e-6
    relative; the horizon must cover the slowest relaxation mode.
    """
    n = liou.n_sites
    times = np.concatenate([[0.0], np.geomspace(1e-5, t_max, points)])
    traj = evolve(liou, site_state(n, site), times)
    return np.trapezoid(traj.populations - 1.0 / n, times, axis=0)


def test_two_site_closed_form():
    """T_00 = Gamma/(8 J^2), the frozen closed-form value."""
    h = Hamiltonian(np.array([[0.0, 1.0], [1.0, 0.0]]))
    liou = build_liouvillian(h, np.full(2, 1.0))
    tm = transfer_matrix(liou)
    assert tm.values[0, 0] == pytest.approx(0.125, abs=1e-10)
    assert tm.values[0, 1] == pytest.approx(-0.125, abs=1e-10)
    # and at other parameters
    for j, g in ((0.5, 0.2), (2.0, 3.0)):
        liou = build_liouvillian(Hamiltonian(np.array([[0.0, j], [j, 0.0]])),
                                 np.full(2, g))
        assert transfer_matrix(liou).values[0, 0] == pytest.approx(
            g / (8 * j ** 2), rel=1e-10)


@given(seed=st.integers(0, 4000))
@settings(max_examples=25, deadline=None)
def test_row_sums_and_realness(seed):
    liou = random_network_liouvillian(seed, n=int(3 + seed % 6))
    tm = transfer_matrix(liou)
    assert np.abs(tm.values.sum(axis=1)).max() < 1e-8 * max(1.0, np.abs(tm.values).max())
    assert tm.imag_residue < 1e-8
    assert np.all(np.diag(tm.values) > 0)


@given(seed=st.integers(0, 3000))
@settings(max_examples=12, deadline=None)
def test_solve_vs_spectral_routes(seed):
    liou = random_network_liouvillian(seed, n=int(3 + seed % 8))
    spec = decompose(liou)
    a = transfer_matrix(liou, method="solve")
    b = transfer_matrix(liou, spec=spec, method="spectral")
    scale = np.abs(a.values).max()
    assert np.abs(a.values - b.values).max() < 1e-8 * scale


def test_quadrature_oracle_agreement():
    """Deflated solve against time quadrature on small well-mixed networks."""
    for seed in (1, 2, 3):
        rng = np.random.default_rng(seed)
        cfg = generate_configuration(4, 5.0, seed, min_separation=1.0)
        h = build_hamiltonian(cfg, coupling_matrix(cfg))
        liou = build_liouvillian(h, np.full(4, 10 ** rng.uniform(-1.5, -0.5)))
        tm = transfer_matrix(liou)
        for i in (0, 2):
            quad = quadrature_transfer_row(liou, i)
            assert tm.values[i] == pytest.approx(quad, rel=1e-6, abs=1e-8)


def test_underpopulated_site_negative():
    """A site whose population stays below 1/n accumulates negative T."""
    h = Hamiltonian(np.array([[0.0, 1.0], [1.0, 0.0]]))
    liou = build_liouvillian(h, np.full(2, 1.0))
    tm = transfer_matrix(liou)
    assert tm.values[0, 1] < 0


def test_loss_free_requirement():
    liou = absorbing_liouvillian(Hamiltonian(np.array([[0.0, 1.0], [1.0, 0.0]])),
                                 np.full(2, 0.1), trap_site=1, trap_rate=0.5)
    with pytest.raises(SolverError):
        transfer_matrix(liou)


def test_disconnected_network_rejected():
    # second steady mode survives the deflation shift -> singular solve
    h = Hamiltonian(np.array([
        [0.0, 0.5, 0.0, 0.0],
        [0.5, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.3],
        [0.0, 0.0, 0.3, 0.0]]))
    liou = build_liouvillian(h, np.full(4, 0.1))
    with pytest.raises(SolverError):
        transfer_matrix(liou)


def test_gamma_grid_properties():
    g = gamma_grid(1e-6, 1.0, 50)
    assert g[0] == pytest.approx(1e-6) and g[-1] == pytest.approx(1.0)
    assert np.all(np.diff(g) > 0)
    # densified band carries at least twice the base density
    base_per_decade = 49 / 6.0
    in_band = np.sum((g >= 1e-4) & (g <= 1e-2))
    assert in_band >= 2 * base_per_decade * 2 * 0.9


def test_refine_log_minimum_quadratic():
    gammas = np.geomspace(1e-4, 1e0, 41)
    true_star = 3.17e-3
    values = (np.log(gammas / true_star)) ** 2 + 0.5
    star, vmin = refine_log_minimum(gammas, values)
    assert star == pytest.approx(true_star, rel=0.02)
    # edge minimum falls back to the grid point
    v_edge = gammas.copy()
    star_edge, _ = refine_log_minimum(gammas, v_edge)
    assert star_edge == gammas[0]


def test_survival_curve_minimum_shift():
    """Tight-cluster sites need stronger dephasing to relax: their minimum
    sits to the right of the loose sites'."""
    cfg = tight_cluster_configuration()
    h = build_hamiltonian(cfg, coupling_matrix(cfg))
    build = dephasing_builder(h)
    gammas = gamma_grid(1e-6, 1.0, 25)
    star_cluster = survival_curve(build, 0, gammas).gamma_star
    star_loose = survival_curve(build, 8, gammas).gamma_star
    assert star_cluster > 1.5 * star_loose


def test_survival_curve_rejects_bad_grid():
    h = Hamiltonian(np.array([[0.0, 1.0], [1.0, 0.0]]))
    with pytest.raises(ValueError):
        survival_curve(dephasing_builder(h), 0, np.array([0.0, 1.0]))


def test_mfpt_pure_drain():
    """Trap on the prepared site with J=0: exact exponential, tau = 1/rate."""
    h = Hamiltonian(np.zeros((2, 2)))
    for rate in (0.2, 1.0, 5.0):
        liou = absorbing_liouvillian(h, np.full(2, 0.3), trap_site=0,
                                     trap_rate=rate)
        result = mfpt_with_trap(liou, site_state(2, 0))
        assert result.tau_total == pytest.approx(1.0 / rate, rel=1e-12)
        assert result.tau_site[1] == pytest.approx(0.0, abs=1e-14)


def test_mfpt_equals_quadrature():
    """tau_total equals the integrated total surviving population."""
    for seed in (4, 5):
        cfg = generate_configuration(4, 5.0, seed, min_separation=1.0)
        h = build_hamiltonian(cfg, coupling_matrix(cfg))
        liou = absorbing_liouvillian(h, np.full(4, 0.2), trap_site=3,
                                     trap_rate=0.7)
        result = mfpt_with_trap(liou, site_state(4, 0))
        times = np.concatenate([[0.0], np.geomspace(1e-4, 1e6, 20000)])
        traj = evolve(liou, site_state(4, 0), times)
        quad = np.trapezoid(traj.populations.sum(axis=1), times)
        assert result.tau_total == pytest.approx(quad, rel=1e-6)
        assert result.tau_total == pytest.approx(result.tau_site.sum(), rel=1e-12)
        assert result.tau_total > 0


def test_mfpt_three_site_fortress_scaling():
    """Remote trap behind a hybridized pair: passage time tracks the
    dephasing-assisted escape time 1/gamma_tr ~ J^2/(4 eps^2 Gamma)."""
    from spinlat.reference import (MinimalModelParams, golden_rule_rate,
                                   hierarchical_hamiltonian)
    taus = {}
    for gamma in (1e-4, 1e-5):
        p = MinimalModelParams(j=1e-2, eps=1e-4, gamma=gamma)
        # the trap must stay far below the intrinsic rates it probes
        liou = absorbing_liouvillian(hierarchical_hamiltonian(p),
                                     np.full(3, gamma), trap_site=2,
                                     trap_rate=1e-6)
        tau = mfpt_with_trap(liou, site_state(3, 0)).tau_total
        escape = 1.0 / golden_rule_rate(p)
        assert escape / 4.0 < tau < escape * 4.0
        taus[gamma] = tau
    # 1/Gamma scaling across the decade
    assert taus[1e-5] / taus[1e-4] == pytest.approx(10.0, rel=0.15)


def test_transfer_row_cluster_sign_structure():
    """Preparation on the tight cluster: cluster sites accumulate excess
    population (positive T), distant sites stay underpopulated (negative);
    the bridging site flips sign once dephasing reaches the cluster
    coupling scale."""
    from spinlat.geometry import tight_cluster_configuration
    cfg = tight_cluster_configuration()
    h = build_hamiltonian(cfg, coupling_matrix(cfg))

    def row_at(gamma):
        liou = build_liouvillian(h, np.full(10, gamma))
        return transfer_matrix(liou, sites=[0]).values[0]

    weak = row_at(1e-5)
    assert np.all(weak[:3] > 0) and np.all(weak[3:] < 0)
    strong = row_at(1e-1)
    assert strong[3] > 0  # bridge joins the cluster once Gamma ~ J_cluster


def test_transfer_row_pathway_sign_exchange():
    """Route switching in the competing-pathway network: at weak dephasing
    the non-fortress side co-equilibrates with the source (positive T_5i),
    at strong dephasing the tight pairs take over and the weak-route
    mediators drop below their steady share."""
    from spinlat.geometry import competing_pathway_configuration
    cfg = competing_pathway_configuration()
    h = build_hamiltonian(cfg, coupling_matrix(cfg))

    def row_at(gamma):
        liou = build_liouvillian(h, np.full(10, gamma))
        return transfer_matrix(liou, sites=[5]).values[5]

    weak = row_at(1e-4)
    assert np.all(weak[4:] > 0) and np.all(weak[:4] < 0)
    strong = row_at(1e-1)
    assert np.all(strong[:4] > 0)
    assert strong[9] < 0 and strong[7] < 0


def test_mfpt_requires_absorbing_channel():
    liou = random_network_liouvillian(seed=1, n=3)
    with pytest.raises(SolverError):
        mfpt_with_trap(liou, site_state(3, 0))


def test_mfpt_unreachable_trap_raises():
    # disconnected trap: generator keeps a zero mode
    h = Hamiltonian(np.array([
        [0.0, 0.5, 0.0], [0.5, 0.0, 0.0], [0.0, 0.0, 0.0]]))
    liou = absorbing_liouvillian(h, np.full(3, 0.1), trap_site=2, trap_rate=0.4)
    with pytest.raises(SolverError):
        mfpt_with_trap(liou, site_state(3, 0))
