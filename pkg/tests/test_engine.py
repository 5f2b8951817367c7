import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hostpar.engine import (
    SimCaps,
    draw_joint_sums,
    draw_sums,
    rng_for,
    simulate_bpre_A,
    simulate_cell_line,
    simulate_gw_B,
    simulate_tree,
)
from hostpar.model import CellType, derive
from hostpar.modelio import load_bundled


@pytest.fixture(scope="module")
def m1():
    return load_bundled("m1")


# --- draw helpers -----------------------------------------------------------


def test_draw_sums_deterministic_support():
    rng = rng_for(0, 0)
    z = np.array([1, 5, 100], dtype=np.int64)
    out = draw_sums(rng, z, np.array([2]), np.array([1.0]))
    assert (out == 2 * z).all()


def test_draw_joint_sums_marginal_totals():
    rng = rng_for(1, 0)
    z = np.full(2000, 3, dtype=np.int64)
    s0, s1 = draw_joint_sums(
        rng, z, np.array([1, 2]), np.array([1, 0]), np.array([0.5, 0.5])
    )
    # each parasite contributes (1,1) or (2,0): totals satisfy s0 + s1 = 2z
    assert ((s0 + s1) == 6).all()
    assert (s1 <= 3).all()


@given(st.integers(min_value=1, max_value=40), st.integers(min_value=0, max_value=2**31))
@settings(max_examples=40, deadline=None)
def test_draw_sums_bounds(z, seed):
    rng = rng_for(seed, 0)
    out = draw_sums(
        rng, np.array([z]), np.array([0, 1, 3]), np.array([0.3, 0.4, 0.3])
    )
    assert 0 <= out[0] <= 3 * z


# --- full tree --------------------------------------------------------------


def test_tree_deterministic(m1):
    a = simulate_tree(m1, 8, seed=42)
    b = simulate_tree(m1, 8, seed=42)
    for x, y in zip(a, b):
        assert (x.Z_A, x.Z_B, x.G_star_A, x.G_star_B) == (y.Z_A, y.Z_B, y.G_star_A, y.G_star_B)
    c = simulate_tree(m1, 8, seed=43)
    assert any(x.Z_B != y.Z_B for x, y in zip(a, c))


def test_tree_cell_count_conserved(m1):
    for seed in range(5):
        for s in simulate_tree(m1, 7, seed=seed):
            total = s.G_star_A + s.G_star_B + s.clean_A + s.clean_B
            assert total == 2**s.n


def test_tree_initial_state(m1):
    s0 = simulate_tree(m1, 0, seed=0)[0]
    assert (s0.G_star_A, s0.Z_A, s0.G_star_B, s0.Z_B) == (1, 1, 0, 0)


def test_tree_start_type_B(m1):
    s = simulate_tree(m1, 3, seed=5, start_type=CellType.B)
    for gen in s:
        assert gen.G_star_A == 0 and gen.clean_A == 0  # B never produces A


def test_tree_fk_counts_consistent(m1):
    for s in simulate_tree(m1, 6, seed=9):
        assert s.fk_A.sum() <= s.G_star_A
        assert s.fk_B.sum() <= s.G_star_B


def test_roster_cap_truncates(m1):
    caps = SimCaps(max_generations=12, max_roster=8)
    out = simulate_tree(m1, 12, seed=3, caps=caps)
    assert out[-1].truncated
    assert len(out) <= 13


# --- cell line --------------------------------------------------------------


def test_cell_line_shape_and_types(m1):
    st_ = simulate_cell_line(m1, 10, seed=4)
    assert len(st_.types) == 11 and len(st_.zs) == 11
    # unilateral reproduction: once B, always B
    seen_b = False
    for t in st_.types:
        if seen_b:
            assert t is CellType.B
        seen_b = seen_b or (t is CellType.B)


def test_cell_line_zero_absorbing_in_value(m1):
    for seed in range(20):
        zs = simulate_cell_line(m1, 12, seed=seed).zs
        died = False
        for z in zs:
            if died:
                assert z == 0
            died = died or z == 0


# --- reduced processes ------------------------------------------------------


def test_bpre_path_deterministic(m1):
    p1, sat1 = simulate_bpre_A(m1, 10, seed=7)
    p2, _ = simulate_bpre_A(m1, 10, seed=7)
    assert p1 == p2 and not sat1
    assert p1[0] == 1


def test_gw_path_growth_bound(m1):
    path, _ = simulate_gw_B(m1, 10, seed=11)
    # M1 B-parasites double deterministically: sum-law is the point mass at 2
    assert path == [2**n for n in range(11)]


def test_gw_start_zero_stays_zero(m1):
    path, _ = simulate_gw_B(m1, 5, seed=1, start_z=0)
    assert path == [0] * 6
