"""Exact, deterministic computations on small instances: pmf recursions for
the reduced processes, brute-force enumeration of tiny trees, and
generating-function fixed points.  These are the ground truth for every
stochastic test in the package.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .model import (
    CellType,
    Environment,
    JointOffspringLaw,
    ValidatedModel,
    b_line_environment,
    classify,
)
from .pmf import ConvPowerCache, PmfVector

OVERFLOW_WARN = 1e-6


class BudgetExceeded(RuntimeError):
    def __init__(self, attempted: int, budget: int):
        self.attempted = attempted
        self.budget = budget
        super().__init__(f"enumeration budget exceeded: {attempted} > {budget}")


# ---------------------------------------------------------------------------
# BPRE pmf recursion
# ---------------------------------------------------------------------------


def _env_kernel(env: Environment, k_max: int) -> np.ndarray:
    """K[z, k] = P(next = k | current = z) for the annealed one-step mixture,
    z, k in {0..k_max}.  Bucket entries are exact; overflow-z rows are exact
    conditional on z (the caller drops overflowed z-mass, giving lower
    bounds)."""
    kern = np.zeros((k_max + 1, k_max + 1))
    for w, pmf in env.entries:
        kern += w * ConvPowerCache(pmf, k_max).powers_upto(k_max)
    return kern


def bpre_pmf_trajectory(
    env: Environment, n: int, k_max: int, start_z: int = 1
) -> list[PmfVector]:
    """Annealed pmfs of Z_0, ..., Z_n for a BPRE with iid environment `env`.

    Bucket values are exact lower bounds (exact whenever overflow is 0); the
    upper bound on any bucket is its value plus the overflow mass.
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    kern = _env_kernel(env, k_max)
    out = [PmfVector.delta(start_z, k_max)]
    for _ in range(n):
        cur = out[-1]
        probs = cur.probs @ kern
        overflow = max(0.0, 1.0 - float(probs.sum()))
        out.append(PmfVector(probs, overflow))
    if out[-1].overflow > OVERFLOW_WARN:
        warnings.warn(
            f"overflow mass {out[-1].overflow:.3g} at n={n}; increase k_max",
            RuntimeWarning,
            stacklevel=2,
        )
    return out


def exact_bpre_distribution(
    env: Environment, n: int, k_max: int, start_z: int = 1
) -> PmfVector:
    """Annealed pmf of the A-line branching process at generation n."""
    return bpre_pmf_trajectory(env, n, k_max, start_z=start_z)[-1]


# ---------------------------------------------------------------------------
# Random cell line: exact joint law of (type, parasite count)
# ---------------------------------------------------------------------------


@dataclass
class CellLineDistribution:
    """Exact joint pmf of (T_[n], Z_[n]): dense z-buckets per type plus the
    per-type overflow mass (z > k_max)."""

    n: int
    pA: np.ndarray
    pB: np.ndarray
    overflow_A: float
    overflow_B: float

    def prob_type_A(self) -> float:
        return float(self.pA.sum()) + self.overflow_A

    def conditional_given_A(self) -> PmfVector:
        total = self.prob_type_A()
        if total <= 0.0:
            raise ValueError("type-A mass is zero")
        return PmfVector(self.pA / total, self.overflow_A / total)

    def conditional_given_B(self) -> PmfVector:
        total = float(self.pB.sum()) + self.overflow_B
        if total <= 0.0:
            raise ValueError("type-B mass is zero")
        return PmfVector(self.pB / total, self.overflow_B / total)


def exact_cell_line_distribution(
    model: ValidatedModel,
    n: int,
    k_max: int,
    start_z: int = 1,
    start_type: CellType = CellType.A,
) -> CellLineDistribution:
    """Exact forward recursion for the uniformly random cell line.

    From (A, z) the line moves, per daughter pair s and child i (probability
    p_s/2 each), to (type of child i under s, i-marginal of the s-law
    convolved z times); from (B, z) to (B, marginal_i(law_B)^{*z}).

    Type marginals are exact for any k_max because the type chain does not
    depend on z: P(T_[n]=A) = (nu/2)^n.
    """
    p = model.params
    nu = model.nu

    def powers(law: JointOffspringLaw, i: int) -> np.ndarray:
        return ConvPowerCache(law.marginal(i), k_max).powers_upto(k_max)

    # kernels mapping a z-vector to the next z-vector, split by type route
    kern_AA = np.zeros((k_max + 1, k_max + 1))
    kern_AB = np.zeros((k_max + 1, k_max + 1))  # A mother -> B child
    if p.p_AA > 0:
        kern_AA += (p.p_AA / 2.0) * (powers(p.law_A_AA, 0) + powers(p.law_A_AA, 1))
    if p.p_AB > 0:
        kern_AA += (p.p_AB / 2.0) * powers(p.law_A_AB, 0)
        kern_AB += (p.p_AB / 2.0) * powers(p.law_A_AB, 1)
    if p.p_BB > 0:
        kern_AB += (p.p_BB / 2.0) * (powers(p.law_A_BB, 0) + powers(p.law_A_BB, 1))
    kern_BB = 0.5 * (powers(p.law_B, 0) + powers(p.law_B, 1))

    pA = np.zeros(k_max + 1)
    pB = np.zeros(k_max + 1)
    if start_type is CellType.A:
        pA[min(start_z, k_max)] = 1.0 if start_z <= k_max else 0.0
        overflow_A, overflow_B = (0.0, 0.0) if start_z <= k_max else (1.0, 0.0)
    else:
        pB[min(start_z, k_max)] = 1.0 if start_z <= k_max else 0.0
        overflow_A, overflow_B = (0.0, 0.0) if start_z <= k_max else (0.0, 1.0)

    type_a_mass = 1.0 if start_type is CellType.A else 0.0
    for _ in range(n):
        new_pA = pA @ kern_AA
        new_pB = pA @ kern_AB + pB @ kern_BB
        type_a_mass *= nu / 2.0
        pA, pB = new_pA, new_pB
        overflow_A = max(0.0, type_a_mass - float(pA.sum()))
        overflow_B = max(0.0, (1.0 - type_a_mass) - float(pB.sum()))
    if overflow_A + overflow_B > OVERFLOW_WARN:
        warnings.warn(
            f"cell-line overflow mass {overflow_A + overflow_B:.3g} at n={n}",
            RuntimeWarning,
            stacklevel=2,
        )
    return CellLineDistribution(n=n, pA=pA, pB=pB, overflow_A=overflow_A, overflow_B=overflow_B)


# ---------------------------------------------------------------------------
# Brute-force enumeration of the full tree
# ---------------------------------------------------------------------------

_A, _B = 0, 1


def _joint_power(law: JointOffspringLaw, z: int, cache: dict) -> dict:
    """z-fold convolution of the joint law, as {(s0, s1): prob}."""
    key = (id(law), z)
    if key in cache:
        return cache[key]
    if z == 0:
        result = {(0, 0): 1.0}
    else:
        prev = _joint_power(law, z - 1, cache)
        result: dict = {}
        for (a0, a1), pa in prev.items():
            for x0, x1, px in law.support:
                k = (a0 + x0, a1 + x1)
                result[k] = result.get(k, 0.0) + pa * px
    cache[key] = result
    return result


@dataclass
class TreeOutcomeTable:
    """Exhaustive enumeration of the population process up to generation n.

    `outcomes` lists (probability, population) at generation n, a population
    being a sorted tuple of (type_code, z) over all 2^n cells (z = 0 cells
    included).  `expected_counts[m][(type_code, z)]` is the expected number of
    cells in that state at generation m <= n.
    """

    n: int
    outcomes: list[tuple[float, tuple[tuple[int, int], ...]]]
    expected_counts: list[dict[tuple[int, int], float]]

    def expected_count(self, m: int, cell_type: CellType, z: int) -> float:
        code = _A if cell_type is CellType.A else _B
        return self.expected_counts[m].get((code, z), 0.0)

    def expected_g_star(self, m: int, cell_type: CellType) -> float:
        code = _A if cell_type is CellType.A else _B
        return sum(
            v for (t, z), v in self.expected_counts[m].items() if t == code and z > 0
        )

    def expected_parasites(self, m: int, cell_type: CellType) -> float:
        code = _A if cell_type is CellType.A else _B
        return sum(
            z * v for (t, z), v in self.expected_counts[m].items() if t == code
        )

    def cell_line_marginal(self, m: int, cell_type: CellType, z: int) -> float:
        """P(T_[m] = t, Z_[m] = z) for the uniformly random cell line."""
        return self.expected_count(m, cell_type, z) / 2.0**m


def brute_force_tree(
    model: ValidatedModel,
    n: int,
    budget: int = 10**7,
    start_z: int = 1,
    start_type: CellType = CellType.A,
) -> TreeOutcomeTable:
    """Exact distribution of the full population process by exhaustive
    enumeration (feasible for n <= 3 and finite-support laws)."""
    if n > 3:
        raise ValueError("brute force enumeration is limited to n <= 3")
    p = model.params
    pair_choices = [
        (p.p_AA, (_A, _A), p.law_A_AA),
        (p.p_AB, (_A, _B), p.law_A_AB),
        (p.p_BB, (_B, _B), p.law_A_BB),
    ]
    conv_cache: dict = {}
    start_code = _A if start_type is CellType.A else _B
    dist: dict[tuple, float] = {((start_code, start_z),): 1.0}
    expected: list[dict] = []
    attempted = 0

    def record(d: dict[tuple, float]) -> dict:
        table: dict[tuple[int, int], float] = {}
        for state, w in d.items():
            for cell in state:
                table[cell] = table.get(cell, 0.0) + w
        return table

    expected.append(record(dist))
    for _ in range(n):
        new_dist: dict[tuple, float] = {}
        for state, w in dist.items():
            # per-cell daughter outcomes: list of [(prob, (t0,z0), (t1,z1))]
            per_cell = []
            for t, z in state:
                outs = []
                if t == _A:
                    for p_pair, (t0, t1), law in pair_choices:
                        if p_pair == 0.0:
                            continue
                        for (z0, z1), pz in _joint_power(law, z, conv_cache).items():
                            outs.append((p_pair * pz, (t0, z0), (t1, z1)))
                else:
                    for (z0, z1), pz in _joint_power(p.law_B, z, conv_cache).items():
                        outs.append((pz, (_B, z0), (_B, z1)))
                per_cell.append(outs)
            # cartesian product over the cells of this state
            partial: list[tuple[float, tuple]] = [(w, ())]
            for outs in per_cell:
                attempted += len(partial) * len(outs)
                if attempted > budget:
                    raise BudgetExceeded(attempted, budget)
                partial = [
                    (wp * po, cells + (c0, c1))
                    for wp, cells in partial
                    for po, c0, c1 in outs
                ]
            for wp, cells in partial:
                key = tuple(sorted(cells))
                new_dist[key] = new_dist.get(key, 0.0) + wp
        dist = new_dist
        expected.append(record(dist))

    outcomes = sorted(dist.items(), key=lambda kv: kv[0])
    return TreeOutcomeTable(
        n=n,
        outcomes=[(w, state) for state, w in outcomes],
        expected_counts=expected,
    )


# ---------------------------------------------------------------------------
# Galton-Watson extinction probability
# ---------------------------------------------------------------------------


class GwExtinction(NamedTuple):
    q: float
    degenerate: bool  # offspring law is the point mass at 1


def gw_extinction_prob(offspring: np.ndarray, tol: float = 1e-12) -> GwExtinction:
    """Smallest fixed point of the offspring generating function.

    Monotone iteration q <- f(q) from 0.  Returns 1 when the mean is <= 1,
    except for the degenerate law delta_1 (deterministic single offspring
    never dies), which returns 0 with the degeneracy flag set.
    """
    pmf = np.asarray(offspring, dtype=float)
    ks = np.arange(len(pmf))
    if len(pmf) > 1 and pmf[1] >= 1.0 - 1e-12:
        return GwExtinction(0.0, True)
    mean = float(np.dot(ks, pmf))
    if mean <= 1.0:
        return GwExtinction(1.0, False)
    q = 0.0
    for _ in range(100000):
        q_next = float(np.dot(pmf, q**ks))
        if abs(q_next - q) < tol:
            return GwExtinction(q_next, False)
        q = q_next
    return GwExtinction(q, False)


# ---------------------------------------------------------------------------
# Yaglom proxy for the B-cell line
# ---------------------------------------------------------------------------


def yaglom_proxy_B(
    model: ValidatedModel, n: int, k_max: int, warn_hypotheses: bool = True
) -> list[PmfVector]:
    """Conditional pmfs P_{1,B}(Z_[m] = k | Z_[m] > 0), m = 0..n, from the
    exact B-line recursion (environments = law_B marginals, weights 1/2).

    Successive entries let the caller inspect convergence towards the
    quasi-stationary (Yaglom) law; total variation between consecutive
    entries is the committed convergence diagnostic.
    """
    if warn_hypotheses:
        report = classify(model)
        if not report.thm32c_applies:
            warnings.warn(
                "model is outside the strong B-subcritical regime; the "
                "conditional pmfs may not stabilize",
                RuntimeWarning,
                stacklevel=2,
            )
    env = b_line_environment(model)
    trajectory = bpre_pmf_trajectory(env, n, k_max)
    return [pmf.conditional_positive() for pmf in trajectory]
