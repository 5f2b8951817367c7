import math

import numpy as np
import pytest

from hostpar.model import CellType, bpre_environment, derive, mean_contaminated_B_daughters
from hostpar.modelio import load_bundled
from hostpar.oracle import (
    brute_force_tree,
    exact_bpre_distribution,
    exact_cell_line_distribution,
    gw_extinction_prob,
    bpre_pmf_trajectory,
    yaglom_proxy_B,
)


@pytest.fixture(scope="module")
def m1():
    return load_bundled("m1")


@pytest.fixture(scope="module")
def m3():
    return load_bundled("m3")


# --- annealed pmf recursion -------------------------------------------------


def test_one_step_mixture(m1):
    pmf = exact_bpre_distribution(bpre_environment(m1), 1, 4)
    assert np.allclose(pmf.probs[:3], [0.25, 0.4, 0.35], atol=1e-15)
    assert pmf.overflow == 0.0


def test_trajectory_starts_at_delta(m1):
    traj = bpre_pmf_trajectory(bpre_environment(m1), 3, 16)
    assert traj[0].probs[1] == 1.0
    assert len(traj) == 4


def test_annealed_mean_matches_power(m1):
    d = derive(m1)
    env = bpre_environment(m1)
    for n in range(5):
        pmf = exact_bpre_distribution(env, n, 2**n + 1)
        assert pmf.overflow <= 1e-12
        assert pmf.mean_lower() == pytest.approx((d.gamma / d.nu) ** n, abs=1e-12)


def test_start_z_two_doubles_the_mean(m1):
    # both initial parasites ride the same environment sequence, so the law
    # is not a two-fold convolution, but the mean is still additive
    d = derive(m1)
    env = bpre_environment(m1)
    two = exact_bpre_distribution(env, 2, 32, start_z=2)
    assert two.overflow <= 1e-12
    assert two.mean_lower() == pytest.approx(2 * (d.gamma / d.nu) ** 2, abs=1e-12)


# --- random cell line -------------------------------------------------------


def test_type_mass_closed_form(m1):
    nu = m1.nu
    for n in range(8):
        dist = exact_cell_line_distribution(m1, n, 2**n + 1)
        assert dist.prob_type_A() == pytest.approx((nu / 2) ** n, abs=1e-13)


def test_conditional_matches_bpre(m1):
    env = bpre_environment(m1)
    for n in range(5):
        cell = exact_cell_line_distribution(m1, n, 2**n + 1).conditional_given_A()
        bpre = exact_bpre_distribution(env, n, 2**n + 1)
        assert np.allclose(cell.probs, bpre.probs, atol=1e-13)


# --- exhaustive tree enumeration -------------------------------------------


def test_brute_force_outcome_mass(m1):
    for n in range(4):
        table = brute_force_tree(m1, n)
        assert sum(p for p, _ in table.outcomes) == pytest.approx(1.0, abs=1e-12)
        total_cells = sum(v for v in table.expected_counts[n].values())
        assert total_cells == pytest.approx(2.0**n, abs=1e-10)


def test_brute_force_parasite_mean(m1):
    d = derive(m1)
    table = brute_force_tree(m1, 3)
    for n in range(4):
        z_a = table.expected_parasites(n, CellType.A)
        assert z_a == pytest.approx(d.gamma**n, abs=1e-10)


def test_brute_force_first_generation_B(m1):
    table = brute_force_tree(m1, 1)
    assert table.expected_g_star(1, CellType.B) == pytest.approx(
        mean_contaminated_B_daughters(m1.params), abs=1e-12
    )
    d = derive(m1)
    assert table.expected_parasites(1, CellType.B) == pytest.approx(2 * d.eta, abs=1e-12)


def test_brute_force_cell_line_marginal(m1):
    # the random-cell-line law is the expected count profile over 2^n paths
    table = brute_force_tree(m1, 2)
    dist = exact_cell_line_distribution(m1, 2, 8)
    for z in range(6):
        assert table.cell_line_marginal(2, CellType.A, z) == pytest.approx(
            float(dist.pA[z]), abs=1e-12
        )


def test_brute_force_refuses_deep_trees(m1):
    with pytest.raises(ValueError):
        brute_force_tree(m1, 4)


# --- extinction fixed point -------------------------------------------------


def test_gw_fixed_point_values():
    assert gw_extinction_prob(np.array([0.25, 0.0, 0.75])).q == pytest.approx(
        1 / 3, abs=1e-10
    )
    assert gw_extinction_prob(np.array([0.5, 0.0, 0.5])).q == 1.0  # critical
    assert gw_extinction_prob(np.array([0.0, 0.3, 0.7])).q == pytest.approx(0.0)


def test_gw_degenerate_flag():
    res = gw_extinction_prob(np.array([0.0, 1.0]))
    assert res.degenerate and res.q == 0.0


def test_gw_subcritical_dies():
    assert gw_extinction_prob(np.array([0.6, 0.2, 0.2])).q == 1.0


# --- Yaglom proxy -----------------------------------------------------------


def test_yaglom_proxy_converges(m3):
    proxies = yaglom_proxy_B(m3, 20, k_max=256, warn_hypotheses=False)
    tv_early = proxies[5].tv_distance(proxies[10])
    tv_late = proxies[15].tv_distance(proxies[20])
    assert tv_late < tv_early
    assert tv_late < 1e-3
    for pmf in proxies[1:]:
        assert pmf.probs[0] == 0.0  # conditioned on a positive count


def test_yaglom_proxy_warns_outside_regime(m1):
    with pytest.warns(RuntimeWarning):
        yaglom_proxy_B(m1, 3, k_max=32)
