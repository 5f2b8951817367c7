"""Acceptance suite: one test per criterion, at the stated tolerance.

Each test delegates to the corresponding check in hostpar.verify (the same
code the `hostpar verify` subcommand runs) and prints a single pass/fail line
with the observed and expected values.  Stochastic checks operate on a
3-sigma budget with one reseeded retry.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-check lines.
"""

import pytest

from hostpar import verify


def _report(result, label):
    status = "PASS" if result.passed else "FAIL"
    print(f"[{status}] {label}: observed {result.observed}; expected {result.expected}")
    assert result.passed, f"{label}: {result.observed} (expected {result.expected}) {result.detail}"


def test_criterion_01_cell_line_identity():
    _report(verify.check_cell_line_matches_bpre(),
            "conditional cell-line pmf equals annealed BPRE pmf (n <= 6, 1e-12)")


def test_criterion_02_size_biased_counts():
    _report(verify.check_size_biased_tree_counts(),
            "nu^-n expected A-cell counts equal BPRE pmf (n <= 3, 1e-10)")


def test_criterion_03_type_A_probability():
    _report(verify.check_type_A_probability("full"),
            "P(type A at n) = (nu/2)^n, exact and MC")


def test_criterion_04_mean_identities():
    _report(verify.check_mean_identities("full"),
            "normalized means W, GA and the reduced-process mean")


def test_criterion_05_extinction_vs_simulation():
    _report(verify.check_extinction_vs_simulation("full"),
            "classification against 30-generation survival frequencies")


def test_criterion_06_gw_fixed_point():
    _report(verify.check_gw_fixed_point("full"),
            "extinction fixed point 1/3 and MC frequency")


def test_criterion_07_phi_minimization():
    _report(verify.check_phi_minimization(),
            "phi minimum 0.5 at theta = 1 on M2")


def test_criterion_08_proportion_decay():
    _report(verify.check_proportion_decay("full"),
            "contaminated-A proportion decays from n = 6 to 12")


def test_criterion_09_fk_decay():
    _report(verify.check_fk_decay("full"),
            "F_1 + F_2 for A-cells decays from n = 6 to 12")


def test_criterion_10_yaglom_comparison():
    _report(verify.check_yaglom_comparison("full"),
            "F_k(15, B) tracks the exact conditional B-line pmf on M3")


def test_criterion_11_martingale_directions():
    _report(verify.check_martingale_directions("full"),
            "WB means non-decreasing, LA means non-increasing")


def test_criterion_12_determinism():
    _report(verify.check_determinism("full"),
            "byte-identical mc output for workers 1, 4, 16")
