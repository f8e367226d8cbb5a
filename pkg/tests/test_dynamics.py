import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_network_liouvillian
from spinlat.dynamics import (evolve, evolve_rk4, log_time_grid,
                              plateau_report, site_state,
                              validate_density_matrix)
from spinlat.geometry import coupling_matrix, tight_cluster_configuration
from spinlat.liouvillian import Hamiltonian, build_hamiltonian, build_liouvillian


def two_site_population(t, j=1.0, gamma=0.1):
    """Closed-form P_0(t) for rho(0)=|0><0|: damped oscillation about 1/2."""
    omega = np.sqrt(4 * j ** 2 - gamma ** 2 / 4.0)
    return 0.5 + 0.5 * np.exp(-gamma * t / 2.0) * (
        np.cos(omega * t) + gamma / (2.0 * omega) * np.sin(omega * t))


def test_two_site_closed_form(two_site_generator):
    times = np.linspace(0.01, 60.0, 400)
    traj = evolve(two_site_generator, site_state(2, 0), times)
    assert traj.populations[:, 0] == pytest.approx(two_site_population(times),
                                                   abs=1e-10)


def test_unitary_evolution_keeps_purity():
    h = Hamiltonian(np.array([[0.0, 0.4, 0.1],
                              [0.4, 0.0, 0.2],
                              [0.1, 0.2, 0.0]]))
    liou = build_liouvillian(h, np.zeros(3))
    traj = evolve(liou, site_state(3, 0), np.linspace(0.1, 50.0, 200))
    assert np.abs(traj.purity - 1.0).max() < 1e-8


def test_long_time_fully_mixed():
    liou = random_network_liouvillian(seed=5, n=7, gamma=0.05)
    times = log_time_grid(1e-1, 1e9, 400)  # far beyond the slowest rate
    traj = evolve(liou, site_state(7, 2), times)
    assert traj.populations[-1] == pytest.approx(np.full(7, 1 / 7), abs=1e-8)
    assert traj.purity[-1] == pytest.approx(1 / 7, abs=1e-6)


@given(seed=st.integers(0, 4000))
@settings(max_examples=20, deadline=None)
def test_state_validity_along_trajectory(seed):
    liou = random_network_liouvillian(seed, n=5)
    times = log_time_grid(1e-2, 1e6, 60)
    traj = evolve(liou, site_state(5, 0), times, store_coherences=True)
    n = liou.n_sites
    assert np.abs(traj.populations.sum(axis=1) - 1.0).max() < 1e-8
    assert np.all(traj.purity <= 1.0 + 1e-8)
    assert np.all(traj.purity >= 1.0 / n - 1e-10)
    for k in (0, len(times) // 2, -1):
        # evolved states obey the trajectory tolerances (1e-8), looser than
        # the 1e-10 demanded of caller-supplied initial states
        validate_density_matrix(traj.coherences[k], herm_tol=1e-8,
                                trace_tol=1e-8)


def test_dephasing_only_populations_frozen():
    h = Hamiltonian(np.zeros((4, 4)))
    liou = build_liouvillian(h, np.array([0.3, 0.1, 0.7, 0.2]))
    rho0 = np.diag([0.4, 0.3, 0.2, 0.1]).astype(complex)
    traj = evolve(liou, rho0, np.linspace(0.5, 20.0, 40))
    assert traj.populations == pytest.approx(
        np.tile([0.4, 0.3, 0.2, 0.1], (40, 1)), abs=1e-12)


@given(seed=st.integers(0, 2000))
@settings(max_examples=10, deadline=None)
def test_spectral_matches_rk4(seed):
    """Spectral propagation against the fourth-order stepping oracle."""
    liou = random_network_liouvillian(seed, n=int(3 + seed % 4), gamma=0.5)
    times = np.linspace(0.2, 8.0, 9)
    a = evolve(liou, site_state(liou.n_sites, 0), times)
    b = evolve_rk4(liou, site_state(liou.n_sites, 0), times)
    assert a.populations == pytest.approx(b.populations, abs=1e-6)
    assert a.purity == pytest.approx(b.purity, abs=1e-6)


def test_bad_time_grid_rejected(two_site_generator):
    with pytest.raises(ValueError):
        evolve(two_site_generator, site_state(2, 0), np.array([1.0, 0.5]))
    with pytest.raises(ValueError):
        evolve(two_site_generator, site_state(2, 0), np.array([-1.0, 0.5]))


def test_invalid_density_matrix_rejected(two_site_generator):
    rho = np.array([[0.9, 0.0], [0.0, 0.2]], dtype=complex)  # trace 1.1
    with pytest.raises(ValueError):
        evolve(two_site_generator, rho, np.array([1.0]))


def test_plateau_fully_equilibrated():
    liou = random_network_liouvillian(seed=9, n=5, gamma=0.2)
    times = log_time_grid(1e6, 1e9, 50)
    traj = evolve(liou, site_state(5, 1), times)
    report = plateau_report(traj, (1e7, 1e9))
    assert report.populations == pytest.approx(np.full(5, 0.2), abs=1e-6)
    assert report.flatness.max() < 1e-5
    assert report.purity == pytest.approx(0.2, abs=1e-6)


def test_plateau_windows_of_cluster_geometry():
    """Intermediate local equilibration: 1/3 on the tight cluster, 1/7 on the
    complementary subnetwork."""
    cfg = tight_cluster_configuration()
    h = build_hamiltonian(cfg, coupling_matrix(cfg))
    liou = build_liouvillian(h, np.full(10, 1e-5))
    times = log_time_grid(1e-2, 1e12, 900)
    for init, expected in ((0, 1 / 3), (5, 1 / 7)):
        traj = evolve(liou, site_state(10, init), times)
        report = plateau_report(traj, (3e6, 3e7))
        assert report.populations[init] == pytest.approx(expected, abs=0.02)
        # and full mixing at the end of the run
        assert traj.populations[-1, init] == pytest.approx(0.1, abs=1e-6)


def test_plateau_empty_window_raises():
    liou = random_network_liouvillian(seed=2, n=3, gamma=0.1)
    traj = evolve(liou, site_state(3, 0), np.linspace(1.0, 2.0, 5))
    with pytest.raises(ValueError):
        plateau_report(traj, (10.0, 20.0))
