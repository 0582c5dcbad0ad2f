import time

import pytest

import cusp_spectra as cs


@pytest.fixture(scope="session")
def family_metric():
    return cs.gapped_cusp_metric(0.1, s0=1.0)


@pytest.fixture(scope="session")
def family_potential(family_metric):
    return cs.function_potential(family_metric)


@pytest.fixture(scope="session")
def family_bands(family_potential):
    """Band structure of the reference family at delta = 0.1, with build time."""
    t0 = time.perf_counter()
    structure = cs.essential_spectrum_halfline(family_potential, 60.0, 1e-4)
    elapsed = time.perf_counter() - t0
    return structure, elapsed
