import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hostpar.pmf import ConvPowerCache, PmfVector, convolve_trunc


def test_delta_within_range():
    d = PmfVector.delta(3, 8)
    assert d.probs[3] == 1.0 and d.overflow == 0.0


def test_delta_beyond_range_is_overflow():
    d = PmfVector.delta(9, 8)
    assert d.overflow == 1.0 and d.probs.sum() == 0.0


def test_mass_must_be_one():
    with pytest.raises(ValueError):
        PmfVector(np.array([0.5, 0.4]))


def test_conditional_positive():
    pmf = PmfVector(np.array([0.5, 0.25, 0.2]), overflow=0.05)
    cond = pmf.conditional_positive()
    assert cond.probs[0] == 0.0
    assert cond.probs[1] == pytest.approx(0.5)
    assert cond.overflow == pytest.approx(0.1)


def test_mean_bounds_bracket():
    pmf = PmfVector(np.array([0.0, 0.5, 0.3]), overflow=0.2)
    lower, overflow = pmf.mean_bounds()
    # overflow values are at least k_max + 1 = 3
    assert lower == pytest.approx(0.5 + 0.6 + 3 * 0.2)
    assert overflow == 0.2


def test_truncated_convolution_is_exact_below_cut():
    a = np.array([0.5, 0.25, 0.25])
    b = np.array([0.1, 0.9])
    full = np.convolve(a, b)
    got = convolve_trunc(a, b, 2)
    assert np.allclose(got, full[:3])


def test_power_cache_matches_naive():
    base = np.array([0.2, 0.5, 0.3])
    cache = ConvPowerCache(base, k_max=12)
    naive = np.zeros(13)
    naive[0] = 1.0
    for z in range(1, 7):
        naive = np.convolve(naive, base)[:13]
        assert np.allclose(cache.power(z), naive, atol=1e-14), z


def test_powers_upto_matches_power():
    base = np.array([0.25, 0.25, 0.5])
    c1 = ConvPowerCache(base, k_max=16)
    c2 = ConvPowerCache(base, k_max=16)
    mat = c1.powers_upto(9)
    for z in range(10):
        assert np.allclose(mat[z], c2.power(z), atol=1e-14)


@given(
    st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=2, max_size=5),
    st.integers(min_value=1, max_value=10),
    st.integers(min_value=2, max_value=20),
)
@settings(max_examples=80, deadline=None)
def test_power_mass_conservation(weights, z, k_max):
    total = sum(weights)
    if total <= 0:
        return
    base = np.array(weights) / total
    p = ConvPowerCache(base, k_max).power(z)
    assert p.min() >= 0
    assert p.sum() <= 1.0 + 1e-9
    # the untruncated power has total mass one, so the deficit is overflow
    if (len(base) - 1) * z <= k_max:
        assert p.sum() == pytest.approx(1.0, abs=1e-9)


@given(st.integers(min_value=0, max_value=30), st.integers(min_value=4, max_value=16))
@settings(max_examples=50, deadline=None)
def test_tv_distance_symmetric(k, k_max):
    a = PmfVector.delta(k % (k_max + 1), k_max)
    b = PmfVector.delta((k + 1) % (k_max + 1), k_max)
    assert a.tv_distance(b) == b.tv_distance(a)
    assert a.tv_distance(a) == 0.0
