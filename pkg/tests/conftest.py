"""Shared fixtures: converged states at the named operating points are
expensive, so they are solved once per session and reused by the unit,
spectrum and acceptance tests."""

import numpy as np
import pytest

from rcsoc.meanfield import SolverConfig, solve_steady_state
from rcsoc.model import PlaneWaveBasis, SpinorField, make_symmetric_params


@pytest.fixture(scope="session")
def basis():
    return PlaneWaveBasis()


@pytest.fixture(scope="session")
def solved():
    """Lazily solved steady states keyed by (delta, eta)."""
    cache = {}
    basis = PlaneWaveBasis()

    def get(delta, eta, **cfg_kw):
        key = (delta, eta)
        if key not in cache:
            kw = dict(n_seeds=2)
            kw.update(cfg_kw)
            cfg = SolverConfig(**kw)
            p = make_symmetric_params(delta, eta)
            cache[key] = solve_steady_state(p, cfg, basis=basis)
        return cache[key]

    return get


@pytest.fixture()
def pw_archetype(basis):
    """psi_dn = e^{ikz}/sqrt(2 lambda), psi_up = e^{-ikz}/sqrt(2 lambda)."""
    amp = 1.0 / np.sqrt(2.0 * basis.domain_length)
    dn = amp * np.exp(1j * basis.z)
    up = amp * np.exp(-1j * basis.z)
    return SpinorField(basis, dn, up)


@pytest.fixture()
def uniform_field(basis):
    return SpinorField.uniform(basis)
