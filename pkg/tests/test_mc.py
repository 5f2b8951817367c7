import numpy as np
import pytest

from hostpar.engine import SimCaps
from hostpar.mc import (
    AllRejected,
    McConfig,
    NoContaminatedCells,
    estimate_Fk,
    gw_B_extinction_freq,
    proportion_A,
    run_mc,
    simulate_bpre_A_batch,
    simulate_cell_line_batch,
    survival_curves,
    yaglom_compare,
)
from hostpar.model import CellType, bpre_environment, derive
from hostpar.modelio import load_bundled
from hostpar.oracle import brute_force_tree, exact_bpre_distribution


@pytest.fixture(scope="module")
def m1():
    return load_bundled("m1")


@pytest.fixture(scope="module")
def m3():
    return load_bundled("m3")


def _cfg(**kw):
    base = dict(replicates=4000, n_gens=6, master_seed=77, chunk_size=512,
                caps=SimCaps(max_generations=12))
    base.update(kw)
    return McConfig(**base)


# --- determinism and merging ------------------------------------------------


def test_worker_count_invariance(m1):
    s1 = run_mc(m1, _cfg(workers=1))
    s2 = run_mc(m1, _cfg(workers=4))
    assert s1.n_accepted == s2.n_accepted
    for name in ("Z_A", "W", "prop_A"):
        assert np.array_equal(s1.stat_sum[name], s2.stat_sum[name])
        assert np.array_equal(s1.stat_count[name], s2.stat_count[name])
    assert np.array_equal(s1.fk_sum, s2.fk_sum)
    assert np.array_equal(s1.surv_A, s2.surv_A)


def test_seed_changes_results(m1):
    s1 = run_mc(m1, _cfg())
    s2 = run_mc(m1, _cfg(master_seed=78))
    assert not np.array_equal(s1.stat_sum["Z_A"], s2.stat_sum["Z_A"])


# --- estimator sanity against exact values ----------------------------------


def test_survival_and_means_match_brute_force(m1):
    # generation 2 exact values from exhaustive enumeration
    table = brute_force_tree(m1, 2)
    cfg = _cfg(replicates=20000, n_gens=2)
    s = run_mc(m1, cfg)
    for n in range(3):
        mean, se, _ = s.stat_mean("Z_A", n)
        exact = table.expected_parasites(n, CellType.A)
        assert abs(mean - exact) < 5 * max(se, 1e-9)
        mean, se, _ = s.stat_mean("G_star_B", n)
        exact = table.expected_g_star(n, CellType.B)
        assert abs(mean - exact) < 5 * max(se, 1e-9)


def test_fk_ratio_matches_brute_force(m1):
    table = brute_force_tree(m1, 2)
    s = run_mc(m1, _cfg(replicates=20000, n_gens=2))
    for k in (1, 2):
        est, se = estimate_Fk(s, 2, k, CellType.A)
        exact = table.expected_count(2, CellType.A, k) / table.expected_g_star(
            2, CellType.A
        )
        assert abs(est - exact) < 5 * max(se, 1e-9)


def test_estimate_Fk_validates_k(m1):
    s = run_mc(m1, _cfg(replicates=500))
    with pytest.raises(ValueError):
        estimate_Fk(s, 2, 0, CellType.A)
    with pytest.raises(ValueError):
        estimate_Fk(s, 2, s.cfg.k_top + 1, CellType.A)


def test_proportion_A_between_zero_and_one(m1):
    s = run_mc(m1, _cfg())
    for n in range(7):
        p, se = proportion_A(s, n)
        assert 0.0 <= p <= 1.0


# --- conditioning -----------------------------------------------------------


def test_conditioning_filters_replicates(m1):
    s = run_mc(m1, _cfg(condition="survival_A_at_n"))
    assert 0 < s.n_accepted < s.n_total
    assert s.n_accepted == s.surv_A[6]
    # conditioned mean of Z_A at the horizon exceeds the unconditioned one
    u = run_mc(m1, _cfg())
    mc, _, _ = s.stat_mean("Z_A", 6)
    mu, _, _ = u.stat_mean("Z_A", 6)
    assert mc > mu


def test_all_rejected(m1):
    # starting from a B-cell, A-parasites never exist
    with pytest.raises(AllRejected):
        run_mc(m1, _cfg(replicates=200, condition="survival_A_at_n",
                        start_type=CellType.B))


def test_no_contaminated_cells_flag(m1):
    s = run_mc(m1, _cfg(replicates=200, start_type=CellType.B))
    with pytest.raises(NoContaminatedCells):
        estimate_Fk(s, 3, 1, CellType.A)


# --- a_only tracking --------------------------------------------------------


def test_a_only_matches_full_on_aggregates(m1):
    """Both tracking modes are exact for Z_B, so the two estimates of its
    mean must agree up to Monte Carlo error; W stays unbiased in a_only."""
    full = run_mc(m1, _cfg(replicates=8000, track="full"))
    light = run_mc(m1, _cfg(replicates=8000, track="a_only"))
    for n in range(7):
        mf, sef, _ = full.stat_mean("Z_B", n)
        ml, sel, _ = light.stat_mean("Z_B", n)
        assert abs(mf - ml) < 5 * max(np.hypot(sef, sel), 1e-9)
    d = derive(m1)
    for n in range(7):
        m, se, _ = light.stat_mean("W", n)
        assert abs(m - 1.0) < 5 * max(se, 1e-9)


def test_survival_curves_shape(m1):
    out = survival_curves(m1, _cfg(replicates=2000, track="a_only"))
    assert out["surv_A"][0] == 1.0
    assert all(a <= b + 1e-12 for a, b in zip(out["surv_A"][1:], out["surv_A"]))
    assert all(f >= a for f, a in zip(out["surv_all"], out["surv_A"]))


# --- batched reduced processes ----------------------------------------------


def test_bpre_batch_matches_exact_pmf(m1):
    env = bpre_environment(m1)
    exact = exact_bpre_distribution(env, 4, 32)
    res = simulate_bpre_A_batch(m1, 4, 50000, seed=5, k_top=32)
    for k in range(6):
        f, se = res.final_freq(k)
        assert abs(f - float(exact.probs[k])) < 5 * max(se, 1e-9)


def test_cell_line_batch_type_frequency(m1):
    t, z = simulate_cell_line_batch(m1, 3, 40000, seed=6)
    target = (m1.nu / 2) ** 3
    sigma = (target * (1 - target) / 40000) ** 0.5
    assert abs((t == 0).mean() - target) < 5 * sigma


def test_gw_B_extinction_freq_range(m3):
    f, se = gw_B_extinction_freq(m3, horizon=40, replicates=20000, seed=8)
    # M3's B sum-law is subcritical-adjacent (mean 1.05): extinction is common
    assert 0.5 < f <= 1.0


# --- yaglom comparison ------------------------------------------------------


def test_yaglom_compare_rows(m3):
    rows = yaglom_compare(m3, _cfg(replicates=20000, caps=SimCaps(max_generations=10)),
                          n=8, k_top=4)
    assert [r[0] for r in rows] == [1, 2, 3, 4]
    for _, est, proxy, diff in rows:
        assert diff == pytest.approx(abs(est - proxy))
        assert 0 <= est <= 1 and 0 <= proxy <= 1
