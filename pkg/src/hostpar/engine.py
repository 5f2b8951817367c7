"""Exact forward simulation: the full cell tree, the uniformly random cell
line, and the three reduced processes (A-line BPRE, B-line BPRE, B-parasite
Galton-Watson).

Contaminated cells are simulated individually; uncontaminated cells advance at
count level (their subtrees stay parasite-free forever).  Per-parasite
offspring sums are drawn exactly: a single categorical draw for z = 1, a
multinomial allocation over the joint support (iterated binomials) for larger
z, so the cost per cell is O(support size) instead of O(z).

RNG contract: counter-based Philox streams keyed by (seed, stream...), so any
consumer (replicate chunk, trajectory) is reproducible independent of worker
count.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import CellType, Environment, JointOffspringLaw, ValidatedModel, bpre_environment, b_line_environment

# z values beyond this are saturated (int64 sums stay exact below it)
Z_SATURATE = 2**53
CLEAN_B_OVERFLOW = 2**128

A_CODE, B_CODE = 0, 1


class CapExceeded(RuntimeError):
    def __init__(self, what: str, value: int, cap: int):
        self.what = what
        super().__init__(f"{what} = {value} exceeds cap {cap}")


@dataclass(frozen=True)
class SimCaps:
    max_generations: int = 40
    max_roster: int = 10**7
    max_parasites_per_cell: int = 2**63 - 1

    def __post_init__(self):
        if min(self.max_generations, self.max_roster, self.max_parasites_per_cell) <= 0:
            raise ValueError("all caps must be positive")

    @property
    def z_cap(self) -> int:
        return min(self.max_parasites_per_cell, Z_SATURATE)


def rng_for(seed: int, *stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=(seed,) + stream))


# ---------------------------------------------------------------------------
# Vectorized offspring draws
# ---------------------------------------------------------------------------


def draw_joint_sums(
    rng: np.random.Generator,
    z: np.ndarray,
    x0: np.ndarray,
    x1: np.ndarray,
    p: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Per entry of z: coordinate-wise sum of z iid draws from the joint pmf
    {(x0[j], x1[j]): p[j]}.  Exact for any z (multinomial over support
    points); z = 1 takes a single categorical draw."""
    z = np.asarray(z, dtype=np.int64)
    s0 = np.zeros_like(z)
    s1 = np.zeros_like(z)
    one = z == 1
    if one.any():
        cum = np.cumsum(p)
        idx = np.searchsorted(cum, rng.random(int(one.sum())) * cum[-1], side="right")
        idx = np.minimum(idx, len(p) - 1)
        s0[one] = x0[idx]
        s1[one] = x1[idx]
    many = z >= 2
    if many.any():
        remaining = z[many].copy()
        p_rest = 1.0
        for j in range(len(p) - 1):
            frac = min(1.0, max(0.0, p[j] / p_rest))
            cnt = rng.binomial(remaining, frac)
            s0[many] += cnt * x0[j]
            s1[many] += cnt * x1[j]
            remaining -= cnt
            p_rest -= p[j]
        s0[many] += remaining * x0[-1]
        s1[many] += remaining * x1[-1]
    return s0, s1


def draw_sums(
    rng: np.random.Generator, z: np.ndarray, values: np.ndarray, p: np.ndarray
) -> np.ndarray:
    """Per entry of z: sum of z iid draws from the pmf {values[j]: p[j]}."""
    s, _ = draw_joint_sums(rng, z, values, np.zeros_like(values), p)
    return s


def law_arrays(law: JointOffspringLaw) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    return law.x0, law.x1, law.p


def dense_to_support(pmf: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Dense pmf array -> (values, probs) with zero-probability points removed."""
    values = np.nonzero(pmf > 0)[0].astype(np.int64)
    return values, np.asarray(pmf, dtype=float)[values]


# ---------------------------------------------------------------------------
# Full-tree generation step
# ---------------------------------------------------------------------------


@dataclass
class GenerationState:
    """Exact population at generation n: individual contaminated cells plus
    count-level tallies of parasite-free cells."""

    n: int
    types: np.ndarray  # int8 codes, one per contaminated cell
    z: np.ndarray  # int64 parasite counts, all >= 1
    clean_A: int
    clean_B: int  # python int: exact beyond 64 bits
    truncated: bool = False
    saturated: bool = False

    @classmethod
    def initial(cls, start_z: int = 1, start_type: CellType = CellType.A) -> "GenerationState":
        code = A_CODE if start_type is CellType.A else B_CODE
        if start_z > 0:
            return cls(0, np.array([code], dtype=np.int8), np.array([start_z], dtype=np.int64), 0, 0)
        return cls(
            0,
            np.empty(0, dtype=np.int8),
            np.empty(0, dtype=np.int64),
            1 if code == A_CODE else 0,
            1 if code == B_CODE else 0,
        )

    @property
    def G_star_A(self) -> int:
        return int((self.types == A_CODE).sum())

    @property
    def G_star_B(self) -> int:
        return int((self.types == B_CODE).sum())

    @property
    def Z_A(self) -> int:
        return int(self.z[self.types == A_CODE].sum())

    @property
    def Z_B(self) -> int:
        return int(self.z[self.types == B_CODE].sum())

    def fk_counts(self, k_top: int) -> tuple[np.ndarray, np.ndarray]:
        """Counts of contaminated cells with z = k, k = 1..k_top, per type."""
        out = []
        for code in (A_CODE, B_CODE):
            zs = self.z[self.types == code]
            zs = zs[zs <= k_top]
            out.append(np.bincount(zs, minlength=k_top + 1)[1 : k_top + 1])
        return out[0], out[1]


def _split_clean_A(rng: np.random.Generator, clean_a: int, model: ValidatedModel) -> tuple[int, int]:
    """Advance parasite-free A-cells one generation at count level; returns
    the new (clean_A, clean_B contribution)."""
    if clean_a == 0:
        return 0, 0
    p = model.params
    n_aa, n_ab, n_bb = rng.multinomial(clean_a, [p.p_AA, p.p_AB, p.p_BB])
    return int(2 * n_aa + n_ab), int(n_ab + 2 * n_bb)


def step_generation(
    state: GenerationState,
    model: ValidatedModel,
    rng: np.random.Generator,
    caps: SimCaps = SimCaps(),
) -> GenerationState:
    """One exact synchronous generation: every contaminated cell draws its
    daughter-type pair and shares z iid offspring pairs into the daughters;
    clean tallies advance by multinomial splits (A) and doubling (B)."""
    p = model.params
    types, z = state.types, state.z
    a_mask = types == A_CODE

    # daughter-type pair per contaminated A-cell: 0=AA, 1=AB, 2=BB
    pair = np.full(len(types), 3, dtype=np.int8)  # 3 = B-mother (BB surely)
    if a_mask.any():
        u = rng.random(int(a_mask.sum()))
        pair_a = np.where(u < p.p_AA, 0, np.where(u < p.p_AA + p.p_AB, 1, 2))
        pair[a_mask] = pair_a

    d0_z = np.zeros(len(types), dtype=np.int64)
    d1_z = np.zeros(len(types), dtype=np.int64)
    laws = [p.law_A_AA, p.law_A_AB, p.law_A_BB, p.law_B]
    for code, law in enumerate(laws):
        mask = pair == code
        if mask.any():
            x0, x1, pr = law_arrays(law)
            d0_z[mask], d1_z[mask] = draw_joint_sums(rng, z[mask], x0, x1, pr)

    # daughter types: pair 0 -> (A,A), 1 -> (A,B), 2/3 -> (B,B)
    d0_t = np.where(pair <= 1, A_CODE, B_CODE).astype(np.int8)
    d1_t = np.where(pair == 0, A_CODE, B_CODE).astype(np.int8)

    saturated = state.saturated
    cap = caps.z_cap
    if d0_z.size and (int(d0_z.max(initial=0)) > cap or int(d1_z.max(initial=0)) > cap):
        saturated = True
        np.minimum(d0_z, cap, out=d0_z)
        np.minimum(d1_z, cap, out=d1_z)

    all_t = np.concatenate([d0_t, d1_t])
    all_z = np.concatenate([d0_z, d1_z])
    keep = all_z > 0
    new_types = all_t[keep]
    new_z = all_z[keep]
    clean_from_roster_A = int(((~keep) & (all_t == A_CODE)).sum())
    clean_from_roster_B = int(((~keep) & (all_t == B_CODE)).sum())

    new_clean_a, clean_b_from_a = _split_clean_A(rng, state.clean_A, model)
    new_clean_a += clean_from_roster_A
    new_clean_b = 2 * state.clean_B + clean_b_from_a + clean_from_roster_B

    if len(new_z) > caps.max_roster:
        raise CapExceeded("roster", len(new_z), caps.max_roster)
    if new_clean_b >= CLEAN_B_OVERFLOW:
        raise CapExceeded("clean_B", new_clean_b, CLEAN_B_OVERFLOW)

    return GenerationState(
        n=state.n + 1,
        types=new_types,
        z=new_z,
        clean_A=new_clean_a,
        clean_B=new_clean_b,
        truncated=state.truncated,
        saturated=saturated,
    )


@dataclass
class GenSummary:
    n: int
    G_star_A: int
    G_star_B: int
    clean_A: int
    clean_B: int
    Z_A: int
    Z_B: int
    fk_A: np.ndarray  # counts of contaminated A-cells with z = 1..k_top
    fk_B: np.ndarray
    truncated: bool = False
    saturated: bool = False


def _summarize(state: GenerationState, k_top: int) -> GenSummary:
    fk_a, fk_b = state.fk_counts(k_top)
    return GenSummary(
        n=state.n,
        G_star_A=state.G_star_A,
        G_star_B=state.G_star_B,
        clean_A=state.clean_A,
        clean_B=state.clean_B,
        Z_A=state.Z_A,
        Z_B=state.Z_B,
        fk_A=fk_a,
        fk_B=fk_b,
        truncated=state.truncated,
        saturated=state.saturated,
    )


def simulate_tree(
    model: ValidatedModel,
    n_gens: int,
    seed: int,
    caps: SimCaps = SimCaps(),
    start_z: int = 1,
    start_type: CellType = CellType.A,
    k_top: int = 16,
) -> list[GenSummary]:
    """Trajectory of per-generation summaries of the full population process.

    Deterministic given (model, seed, caps, start).  On a cap violation the
    trajectory is cut short and its last summary carries truncated=True.
    """
    if n_gens > caps.max_generations:
        raise ValueError(f"n_gens {n_gens} exceeds max_generations {caps.max_generations}")
    rng = rng_for(seed, 0)
    state = GenerationState.initial(start_z=start_z, start_type=start_type)
    out = [_summarize(state, k_top)]
    for _ in range(n_gens):
        try:
            state = step_generation(state, model, rng, caps)
        except CapExceeded:
            out[-1].truncated = True
            break
        out.append(_summarize(state, k_top))
    return out


# ---------------------------------------------------------------------------
# Random cell line
# ---------------------------------------------------------------------------


@dataclass
class CellLineState:
    n: int
    T_cur: CellType
    Z_cur: int
    path: list[int] = field(default_factory=list)  # the U_k draws
    types: list[CellType] = field(default_factory=list)
    zs: list[int] = field(default_factory=list)
    saturated: bool = False


def simulate_cell_line(
    model: ValidatedModel,
    n: int,
    seed: int,
    start_z: int = 1,
    start_type: CellType = CellType.A,
    caps: SimCaps = SimCaps(),
) -> CellLineState:
    """The uniformly random root-to-depth-n path: per step, draw the daughter
    pair of the current cell, pick the child U uniformly, and sum Z_cur iid
    draws of the U-marginal of the matching law.  Z = 0 is absorbing in value
    only; types keep evolving."""
    p = model.params
    rng = rng_for(seed, 0)
    state = CellLineState(0, start_type, start_z, types=[start_type], zs=[start_z])
    pair_laws = {
        0: (p.law_A_AA, (CellType.A, CellType.A)),
        1: (p.law_A_AB, (CellType.A, CellType.B)),
        2: (p.law_A_BB, (CellType.B, CellType.B)),
    }
    cap = caps.z_cap
    for _ in range(n):
        if state.T_cur is CellType.A:
            u_pair = rng.random()
            code = 0 if u_pair < p.p_AA else (1 if u_pair < p.p_AA + p.p_AB else 2)
            law, children = pair_laws[code]
        else:
            law, children = p.law_B, (CellType.B, CellType.B)
        u = int(rng.integers(0, 2))
        marg = law.marginal(u)
        values, probs = dense_to_support(marg)
        z_next = int(draw_sums(rng, np.array([state.Z_cur], dtype=np.int64), values, probs)[0])
        if z_next > cap:
            z_next = cap
            state.saturated = True
        state.T_cur = children[u]
        state.Z_cur = z_next
        state.n += 1
        state.path.append(u)
        state.types.append(state.T_cur)
        state.zs.append(z_next)
    return state


# ---------------------------------------------------------------------------
# Reduced processes
# ---------------------------------------------------------------------------


def _env_support(env: Environment) -> list[tuple[float, np.ndarray, np.ndarray]]:
    out = []
    for w, pmf in env.entries:
        values, probs = dense_to_support(pmf)
        out.append((w, values, probs))
    return out


def simulate_bpre(
    env: Environment,
    n: int,
    seed: int,
    start_z: int = 1,
    caps: SimCaps = SimCaps(),
) -> tuple[list[int], bool]:
    """One path of a BPRE with iid environment `env`; returns (path, saturated)."""
    rng = rng_for(seed, 0)
    entries = _env_support(env)
    weights = np.array([w for w, _, _ in entries])
    cum = np.cumsum(weights)
    cap = caps.z_cap
    path = [start_z]
    saturated = False
    z = start_z
    for _ in range(n):
        e = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
        e = min(e, len(entries) - 1)
        _, values, probs = entries[e]
        z = int(draw_sums(rng, np.array([z], dtype=np.int64), values, probs)[0])
        if z > cap:
            z = cap
            saturated = True
        path.append(z)
    return path, saturated


def simulate_bpre_A(
    model: ValidatedModel, n: int, seed: int, caps: SimCaps = SimCaps()
) -> tuple[list[int], bool]:
    """The A-line BPRE: one ancestor, environment drawn fresh each generation."""
    return simulate_bpre(bpre_environment(model), n, seed, start_z=1, caps=caps)


def simulate_bpre_B(
    model: ValidatedModel, n: int, seed: int, start_z: int = 1, caps: SimCaps = SimCaps()
) -> tuple[list[int], bool]:
    """The B-started cell-line BPRE: environments are the two marginals of the
    B-law, weight 1/2 each; mean per step mu_B/2."""
    return simulate_bpre(b_line_environment(model), n, seed, start_z=start_z, caps=caps)


def simulate_gw_B(
    model: ValidatedModel, n: int, seed: int, start_z: int = 1, caps: SimCaps = SimCaps()
) -> tuple[list[int], bool]:
    """Ordinary Galton-Watson for the B-parasite total in a pure-B world:
    offspring law = distribution of X0(B) + X1(B)."""
    rng = rng_for(seed, 0)
    values, probs = dense_to_support(model.params.law_B.sum_law())
    cap = caps.z_cap
    path = [start_z]
    z = start_z
    saturated = False
    for _ in range(n):
        z = int(draw_sums(rng, np.array([z], dtype=np.int64), values, probs)[0])
        if z > cap:
            z = cap
            saturated = True
        path.append(z)
    return path, saturated
