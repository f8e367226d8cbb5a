import numpy as np
import pytest

from spinlat import (build_hamiltonian, build_liouvillian, coupling_matrix,
                     generate_configuration)


def random_network_liouvillian(seed, n=None, gamma=None, radius=16.0):
    """Connected dipolar network with uniform dephasing; test workhorse."""
    rng = np.random.default_rng(seed)
    if n is None:
        n = int(rng.integers(2, 13))
    if gamma is None:
        gamma = 10.0 ** rng.uniform(-4, 0)
    cfg = generate_configuration(n, radius, int(rng.integers(0, 2 ** 31)),
                                 min_separation=1.0)
    h = build_hamiltonian(cfg, coupling_matrix(cfg))
    return build_liouvillian(h, np.full(n, gamma))


@pytest.fixture
def two_site_generator():
    """J=1, Gamma=0.1: the analytically solved pair."""
    from spinlat.liouvillian import Hamiltonian
    h = Hamiltonian(np.array([[0.0, 1.0], [1.0, 0.0]]))
    return build_liouvillian(h, np.full(2, 0.1))
