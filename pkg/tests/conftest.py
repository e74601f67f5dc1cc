import numpy as np
import pytest

from dhymflow.geometry import ScalarField, build_domain


@pytest.fixture(scope="session")
def domain1():
    return build_domain(1, 16)


@pytest.fixture(scope="session")
def domain2():
    return build_domain(2, 16)


def random_band_limited(domain, seed, max_mode=2, amplitude=1.0):
    """Real trig polynomial with |k| <= max_mode per axis."""
    rng = np.random.default_rng(seed)
    vals = np.zeros(domain.shape)
    for _ in range(6):
        k = rng.integers(-max_mode, max_mode + 1, size=2 * domain.n)
        phase = rng.uniform(0, 2 * np.pi)
        coef = rng.normal()
        arg = phase
        for a, ka in enumerate(k):
            arg = arg + 2 * np.pi * ka * domain.coords[a]
        vals = vals + coef * np.cos(arg)
    peak = np.abs(vals).max()
    if peak > 0:
        vals *= amplitude / peak
    return ScalarField(domain, vals.reshape(-1).copy())


def random_hermitian(rng, n, scale=1.0, shift=0.0):
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    A = scale * (A + A.conj().T) / 2
    return A + shift * np.eye(n)


def random_spd(rng, n):
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return A @ A.conj().T + n * np.eye(n)
