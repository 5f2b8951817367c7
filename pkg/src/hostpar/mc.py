"""Replicated Monte Carlo orchestration and estimators.

Replicates are processed in fixed-size chunks; chunk c draws from the Philox
stream keyed (master_seed, chunk_index), and chunk reductions are combined in
chunk order, so results are bit-identical for any worker count.  All cells of
a chunk are advanced together as flat numpy arrays (a replicate-id column
separates them), which is what makes 1e5-replicate runs feasible.

Tracking modes:
  * "full"    - contaminated cells of both types are individual roster rows.
  * "a_only"  - only contaminated A-cells are rostered; the B-parasite total
    is advanced exactly at count level (aggregate multinomial draws from the
    X0(B)+X1(B) sum-law).  B-side cell counts are unavailable, but Z_B, and
    hence survival of all parasites, stays exact.  This is the mode for long
    horizons, where the contaminated-B roster grows geometrically.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .engine import (
    A_CODE,
    B_CODE,
    SimCaps,
    dense_to_support,
    draw_joint_sums,
    draw_sums,
    law_arrays,
    rng_for,
)
from .model import CellType, Environment, ValidatedModel, b_line_environment, bpre_environment, derive
from .oracle import yaglom_proxy_B
from .pmf import PmfVector

STAT_NAMES = (
    "Z_A",
    "Z_B",
    "G_star_A",
    "G_star_B",
    "G_star",
    "clean_A",
    "clean_B",
    "W",
    "LA",
    "L",
    "WB",
    "GA_norm",
    "prop_A",
)

CONDITIONS = ("none", "survival_A_at_n", "survival_at_n")
TRACK_MODES = ("full", "a_only")


class AllRejected(RuntimeError):
    def __init__(self, survival_freq: float):
        self.survival_freq = survival_freq
        super().__init__(
            f"conditioning event never occurred (observed frequency {survival_freq})"
        )


class NoContaminatedCells(RuntimeError):
    pass


@dataclass(frozen=True)
class McConfig:
    replicates: int
    n_gens: int
    master_seed: int
    workers: int = 1
    condition: str = "none"
    k_top: int = 16
    start_z: int = 1
    start_type: CellType = CellType.A
    track: str = "full"
    chunk_size: int = 1024
    caps: SimCaps = SimCaps()

    def __post_init__(self):
        if self.replicates < 1 or self.k_top < 1:
            raise ValueError("replicates and k_top must be >= 1")
        if self.condition not in CONDITIONS:
            raise ValueError(f"condition must be one of {CONDITIONS}")
        if self.track not in TRACK_MODES:
            raise ValueError(f"track must be one of {TRACK_MODES}")


@dataclass
class McSummary:
    """Order-independent reductions over replicates.

    Shapes: per-generation arrays have length n_gens+1; F_k arrays are
    (n_gens+1, 2, k_top) with axis 1 indexing (A, B).
    """

    cfg: McConfig
    n_total: int = 0
    n_accepted: int = 0
    n_saturated: int = 0
    n_truncated: int = 0
    surv_A: np.ndarray = None  # unconditional counts of {Z_A(n) > 0}
    surv_all: np.ndarray = None
    stat_sum: dict = None
    stat_sumsq: dict = None
    stat_count: dict = None
    fk_sum: np.ndarray = None
    fk_sumsq: np.ndarray = None
    fk_cross: np.ndarray = None  # sum of count_k * G_star_t
    gstar_sum: np.ndarray = None  # (n+1, 2)
    gstar_sumsq: np.ndarray = None

    @classmethod
    def empty(cls, cfg: McConfig) -> "McSummary":
        n1 = cfg.n_gens + 1
        return cls(
            cfg=cfg,
            surv_A=np.zeros(n1, dtype=np.int64),
            surv_all=np.zeros(n1, dtype=np.int64),
            stat_sum={s: np.zeros(n1) for s in STAT_NAMES},
            stat_sumsq={s: np.zeros(n1) for s in STAT_NAMES},
            stat_count={s: np.zeros(n1, dtype=np.int64) for s in STAT_NAMES},
            fk_sum=np.zeros((n1, 2, cfg.k_top)),
            fk_sumsq=np.zeros((n1, 2, cfg.k_top)),
            fk_cross=np.zeros((n1, 2, cfg.k_top)),
            gstar_sum=np.zeros((n1, 2)),
            gstar_sumsq=np.zeros((n1, 2)),
        )

    def merge(self, other: "McSummary") -> None:
        self.n_total += other.n_total
        self.n_accepted += other.n_accepted
        self.n_saturated += other.n_saturated
        self.n_truncated += other.n_truncated
        self.surv_A += other.surv_A
        self.surv_all += other.surv_all
        for s in STAT_NAMES:
            self.stat_sum[s] += other.stat_sum[s]
            self.stat_sumsq[s] += other.stat_sumsq[s]
            self.stat_count[s] += other.stat_count[s]
        self.fk_sum += other.fk_sum
        self.fk_sumsq += other.fk_sumsq
        self.fk_cross += other.fk_cross
        self.gstar_sum += other.gstar_sum
        self.gstar_sumsq += other.gstar_sumsq

    # --- accessors ---------------------------------------------------------

    def rejection_rate(self) -> float:
        return 1.0 - self.n_accepted / self.n_total

    def stat_mean(self, name: str, n: int) -> tuple[float, float, int]:
        """(mean, standard error, count) of a per-replicate statistic."""
        m = int(self.stat_count[name][n])
        if m == 0:
            return math.nan, math.nan, 0
        mean = self.stat_sum[name][n] / m
        if m < 2:
            return mean, math.nan, m
        var = max(0.0, (self.stat_sumsq[name][n] - m * mean**2) / (m - 1))
        return mean, math.sqrt(var / m), m

    def survival_freq(self, n: int, which: str = "A") -> tuple[float, float]:
        counts = self.surv_A if which == "A" else self.surv_all
        f = counts[n] / self.n_total
        se = math.sqrt(max(f * (1 - f), 0.0) / self.n_total)
        return f, se


def _type_index(t: CellType) -> int:
    return 0 if t is CellType.A else 1


def estimate_Fk(summary: McSummary, n: int, k: int, t: CellType) -> tuple[float, float]:
    """Ratio-of-sums estimator of F_k(n, t) with a delta-method normal SE."""
    ti = _type_index(t)
    if not 1 <= k <= summary.cfg.k_top:
        raise ValueError(f"k must be in 1..{summary.cfg.k_top}")
    sg = summary.gstar_sum[n, ti]
    if sg <= 0:
        raise NoContaminatedCells(f"no contaminated {t.value}-cells at n={n}")
    sc = summary.fk_sum[n, ti, k - 1]
    ratio = sc / sg
    m = summary.n_accepted
    ss = (
        summary.fk_sumsq[n, ti, k - 1]
        - 2 * ratio * summary.fk_cross[n, ti, k - 1]
        + ratio**2 * summary.gstar_sumsq[n, ti]
    )
    se = math.sqrt(max(ss, 0.0)) / sg * math.sqrt(m / max(m - 1, 1))
    return ratio, se


def proportion_A(summary: McSummary, n: int) -> tuple[float, float]:
    """Mean over replicates of #G*_n(A)/#G*_n (replicates with no
    contaminated cells at n are excluded)."""
    mean, se, m = summary.stat_mean("prop_A", n)
    if m == 0:
        raise NoContaminatedCells(f"no contaminated cells at n={n}")
    return mean, se


def survival_curves(model: ValidatedModel, cfg: McConfig) -> dict:
    """Per-generation frequencies of {Z_n(A) > 0} and {Z_n > 0} with SEs.

    Runs in a_only tracking (exact for both events) and without conditioning.
    """
    cfg = replace(cfg, condition="none", track="a_only")
    summary = run_mc(model, cfg)
    out = {"n": list(range(cfg.n_gens + 1)), "surv_A": [], "se_A": [], "surv_all": [], "se_all": []}
    for n in out["n"]:
        f, se = summary.survival_freq(n, "A")
        out["surv_A"].append(f)
        out["se_A"].append(se)
        f, se = summary.survival_freq(n, "all")
        out["surv_all"].append(f)
        out["se_all"].append(se)
    return out


def yaglom_compare(
    model: ValidatedModel, cfg: McConfig, n: int, k_top: int
) -> list[tuple[int, float, float, float]]:
    """Rows (k, F_k(n,B) MC estimate, exact B-line conditional pmf value,
    absolute difference), k = 1..k_top."""
    cfg = replace(cfg, n_gens=n, k_top=max(cfg.k_top, k_top))
    summary = run_mc(model, cfg)
    d = derive(model)
    growth = max(2.0, d.mu_B)
    k_max = max(64, int(min(growth**n, 4096)))
    proxy = yaglom_proxy_B(model, n, k_max, warn_hypotheses=False)[-1]
    rows = []
    for k in range(1, k_top + 1):
        est, _ = estimate_Fk(summary, n, k, CellType.B)
        px = float(proxy.probs[k]) if k <= proxy.k_max else 0.0
        rows.append((k, est, px, abs(est - px)))
    return rows


# ---------------------------------------------------------------------------
# Chunked tree runner
# ---------------------------------------------------------------------------


def _chunk_tree(model: ValidatedModel, cfg: McConfig, chunk_idx: int, n_reps: int) -> McSummary:
    """Simulate n_reps replicate trees in lockstep and reduce them."""
    rng = rng_for(cfg.master_seed, chunk_idx)
    p = model.params
    caps = cfg.caps
    n1 = cfg.n_gens + 1
    k_top = cfg.k_top
    full = cfg.track == "full"
    d = derive(model)

    # roster: one row per contaminated cell
    start_code = A_CODE if cfg.start_type is CellType.A else B_CODE
    rep = np.arange(n_reps, dtype=np.int64)
    ctype = np.full(n_reps, start_code, dtype=np.int8)
    cz = np.full(n_reps, cfg.start_z, dtype=np.int64)
    if cfg.start_z == 0:
        rep = rep[:0]
        ctype = ctype[:0]
        cz = cz[:0]

    clean_A = np.zeros(n_reps, dtype=np.int64)
    clean_B = np.zeros(n_reps, dtype=np.int64)
    if cfg.start_z == 0:
        (clean_A if start_code == A_CODE else clean_B)[:] = 1
    zB_agg = np.zeros(n_reps, dtype=np.int64)  # a_only mode: exact B-parasite total
    saturated = np.zeros(n_reps, dtype=bool)
    truncated = np.zeros(n_reps, dtype=bool)

    # per-replicate, per-generation records
    rec = {
        name: np.zeros((n1, n_reps), dtype=np.int64)
        for name in ("G_star_A", "G_star_B", "clean_A", "clean_B", "Z_A", "Z_B")
    }
    fk = np.zeros((n1, 2, n_reps, k_top), dtype=np.int64)

    b_values, b_probs = dense_to_support(p.law_B.sum_law())
    laws = [p.law_A_AA, p.law_A_AB, p.law_A_BB, p.law_B]
    z_cap = caps.z_cap

    def record(g: int) -> None:
        a_mask = ctype == A_CODE
        rec["G_star_A"][g] = np.bincount(rep[a_mask], minlength=n_reps)
        rec["Z_A"][g] = np.bincount(rep[a_mask], weights=cz[a_mask], minlength=n_reps).astype(np.int64)
        if full:
            b_mask = ~a_mask
            rec["G_star_B"][g] = np.bincount(rep[b_mask], minlength=n_reps)
            rec["Z_B"][g] = np.bincount(rep[b_mask], weights=cz[b_mask], minlength=n_reps).astype(np.int64)
        else:
            rec["G_star_B"][g] = -1  # unavailable in a_only mode
            rec["Z_B"][g] = zB_agg
        rec["clean_A"][g] = clean_A
        rec["clean_B"][g] = clean_B
        small = cz <= k_top
        for ti, code in enumerate((A_CODE, B_CODE)):
            mask = small & (ctype == code)
            if mask.any():
                idx = rep[mask] * k_top + (cz[mask] - 1)
                fk[g, ti] = np.bincount(idx, minlength=n_reps * k_top).reshape(n_reps, k_top)

    record(0)
    for g in range(1, n1):
        # daughter-type pair per cell: 0=AA 1=AB 2=BB 3=B-mother
        a_mask = ctype == A_CODE
        pair = np.full(len(ctype), 3, dtype=np.int8)
        n_a = int(a_mask.sum())
        if n_a:
            u = rng.random(n_a)
            pair[a_mask] = np.where(u < p.p_AA, 0, np.where(u < p.p_AA + p.p_AB, 1, 2))

        d0_z = np.zeros(len(ctype), dtype=np.int64)
        d1_z = np.zeros(len(ctype), dtype=np.int64)
        for code, law in enumerate(laws):
            mask = pair == code
            if mask.any():
                x0, x1, pr = law_arrays(law)
                d0_z[mask], d1_z[mask] = draw_joint_sums(rng, cz[mask], x0, x1, pr)
        d0_t = np.where(pair <= 1, A_CODE, B_CODE).astype(np.int8)
        d1_t = np.where(pair == 0, A_CODE, B_CODE).astype(np.int8)

        if len(d0_z) and max(int(d0_z.max()), int(d1_z.max())) > z_cap:
            over = (d0_z > z_cap) | (d1_z > z_cap)
            saturated |= np.bincount(rep[over], minlength=n_reps).astype(bool)
            np.minimum(d0_z, z_cap, out=d0_z)
            np.minimum(d1_z, z_cap, out=d1_z)

        all_rep = np.concatenate([rep, rep])
        all_t = np.concatenate([d0_t, d1_t])
        all_z = np.concatenate([d0_z, d1_z])

        # zero-parasite daughters to the clean tallies
        dead = all_z == 0
        if dead.any():
            dead_a = dead & (all_t == A_CODE)
            clean_from_roster_A = np.bincount(all_rep[dead_a], minlength=n_reps)
            clean_from_roster_B = np.bincount(all_rep[dead & ~dead_a], minlength=n_reps)
        else:
            clean_from_roster_A = clean_from_roster_B = 0

        keep = ~dead
        if not full:
            # contaminated B daughters feed the aggregate parasite count
            to_agg = keep & (all_t == B_CODE)
            if to_agg.any():
                flux = np.bincount(
                    all_rep[to_agg], weights=all_z[to_agg], minlength=n_reps
                ).astype(np.int64)
            else:
                flux = np.zeros(n_reps, dtype=np.int64)
            keep = keep & (all_t == A_CODE)
            # existing B parasites reproduce via the sum-law, cell-free
            zB_agg = draw_sums(rng, zB_agg, b_values, b_probs) + flux
            over = zB_agg > z_cap
            if over.any():
                saturated |= over
                np.minimum(zB_agg, z_cap, out=zB_agg)

        rep, ctype, cz = all_rep[keep], all_t[keep], all_z[keep]

        # per-replicate roster cap: freeze offenders as truncated
        roster_per_rep = np.bincount(rep, minlength=n_reps)
        over = roster_per_rep > caps.max_roster
        if over.any():
            truncated |= over
            keep2 = ~over[rep]
            rep, ctype, cz = rep[keep2], ctype[keep2], cz[keep2]

        # vectorized multinomial split of clean_A over (AA, AB, BB)
        n_aa = rng.binomial(clean_A, p.p_AA)
        rest = clean_A - n_aa
        frac = p.p_AB / (1.0 - p.p_AA) if p.p_AA < 1.0 else 0.0
        n_ab = rng.binomial(rest, min(1.0, max(0.0, frac)))
        n_bb = rest - n_ab
        clean_A = 2 * n_aa + n_ab + clean_from_roster_A
        clean_B = 2 * clean_B + n_ab + 2 * n_bb + clean_from_roster_B

        record(g)

    # --- acceptance and reduction -----------------------------------------
    summary = McSummary.empty(cfg)
    summary.n_total = n_reps
    summary.n_saturated = int(saturated.sum())
    summary.n_truncated = int(truncated.sum())
    z_total = rec["Z_A"] + np.maximum(rec["Z_B"], 0)
    summary.surv_A = (rec["Z_A"] > 0).sum(axis=1).astype(np.int64)
    summary.surv_all = (z_total > 0).sum(axis=1).astype(np.int64)

    if cfg.condition == "survival_A_at_n":
        accepted = rec["Z_A"][cfg.n_gens] > 0
    elif cfg.condition == "survival_at_n":
        accepted = z_total[cfg.n_gens] > 0
    else:
        accepted = np.ones(n_reps, dtype=bool)
    summary.n_accepted = int(accepted.sum())
    usable = accepted & ~saturated & ~truncated

    gens = np.arange(n1)
    with np.errstate(invalid="ignore", divide="ignore"):
        g_star = rec["G_star_A"] + np.maximum(rec["G_star_B"], 0)
        stats = {
            "Z_A": rec["Z_A"].astype(float),
            "Z_B": np.where(rec["Z_B"] >= 0, rec["Z_B"], np.nan).astype(float),
            "G_star_A": rec["G_star_A"].astype(float),
            "G_star_B": np.where(rec["G_star_B"] >= 0, rec["G_star_B"], np.nan).astype(float),
            "clean_A": rec["clean_A"].astype(float),
            "clean_B": rec["clean_B"].astype(float),
        }
        stats["G_star"] = stats["G_star_A"] + stats["G_star_B"]
        stats["W"] = stats["Z_A"] / (d.gamma ** gens)[:, None] if d.gamma > 0 else np.full((n1, n_reps), np.nan)
        stats["LA"] = stats["G_star_A"] / (d.nu ** gens)[:, None] if d.nu > 0 else np.full((n1, n_reps), np.nan)
        stats["L"] = stats["G_star"] / (2.0 ** gens)[:, None]
        stats["WB"] = stats["Z_B"] / (d.mu_B ** gens)[:, None] if d.mu_B > 0 else np.full((n1, n_reps), np.nan)
        stats["GA_norm"] = (
            (stats["G_star_A"] + stats["clean_A"]) / (d.nu ** gens)[:, None]
            if d.nu > 0
            else np.full((n1, n_reps), np.nan)
        )
        stats["prop_A"] = np.where(stats["G_star"] > 0, stats["G_star_A"] / stats["G_star"], np.nan)

    for name in STAT_NAMES:
        vals = stats[name][:, usable]
        ok = np.isfinite(vals)
        safe = np.where(ok, vals, 0.0)
        summary.stat_sum[name] = safe.sum(axis=1)
        summary.stat_sumsq[name] = (safe**2).sum(axis=1)
        summary.stat_count[name] = ok.sum(axis=1).astype(np.int64)

    if full:
        fk_u = fk[:, :, usable, :].astype(float)
        gs_u = np.stack(
            [rec["G_star_A"][:, usable], rec["G_star_B"][:, usable]], axis=1
        ).astype(float)
        summary.fk_sum = fk_u.sum(axis=2)
        summary.fk_sumsq = (fk_u**2).sum(axis=2)
        summary.fk_cross = (fk_u * gs_u[:, :, :, None]).sum(axis=2)
        summary.gstar_sum = gs_u.sum(axis=2)
        summary.gstar_sumsq = (gs_u**2).sum(axis=2)
    return summary


def _chunk_task(args):
    model, cfg, chunk_idx, n_reps = args
    return chunk_idx, _chunk_tree(model, cfg, chunk_idx, n_reps)


def run_mc(model: ValidatedModel, cfg: McConfig) -> McSummary:
    """Replicated tree simulation, reduced on the fly; deterministic for a
    given master_seed regardless of cfg.workers."""
    chunks = []
    remaining = cfg.replicates
    idx = 0
    while remaining > 0:
        take = min(cfg.chunk_size, remaining)
        chunks.append((model, cfg, idx, take))
        remaining -= take
        idx += 1

    results: list[tuple[int, McSummary]] = []
    if cfg.workers <= 1 or len(chunks) == 1:
        results = [_chunk_task(c) for c in chunks]
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_chunk_task, chunks))
    results.sort(key=lambda r: r[0])

    summary = McSummary.empty(cfg)
    for _, part in results:
        summary.merge(part)
    if cfg.condition != "none" and summary.n_accepted == 0:
        raise AllRejected(summary.surv_A[cfg.n_gens] / summary.n_total)
    return summary


# ---------------------------------------------------------------------------
# Batched reduced-process runners (used by tests and the verify suite)
# ---------------------------------------------------------------------------


@dataclass
class BpreMcResult:
    n: int
    replicates: int
    sum_z: np.ndarray  # per generation, over unsaturated replicates
    sumsq_z: np.ndarray
    count: np.ndarray
    final_counts: np.ndarray  # histogram of Z_n over k = 0..k_top
    final_overflow: int
    n_saturated: int

    def mean(self, g: int) -> tuple[float, float]:
        m = int(self.count[g])
        mean = self.sum_z[g] / m
        var = max(0.0, (self.sumsq_z[g] - m * mean**2) / max(m - 1, 1))
        return mean, math.sqrt(var / m)

    def final_freq(self, k: int) -> tuple[float, float]:
        f = self.final_counts[k] / self.replicates
        return f, math.sqrt(max(f * (1 - f), 0.0) / self.replicates)


def simulate_bpre_batch(
    env: Environment,
    n: int,
    replicates: int,
    seed: int,
    start_z: int = 1,
    k_top: int = 64,
    caps: SimCaps = SimCaps(),
) -> BpreMcResult:
    """All replicates of a BPRE advanced in lockstep."""
    rng = rng_for(seed, 0)
    entries = [(w,) + dense_to_support(pmf) for w, pmf in env.entries]
    weights = np.array([e[0] for e in entries])
    cum = np.cumsum(weights)
    z = np.full(replicates, start_z, dtype=np.int64)
    saturated = np.zeros(replicates, dtype=bool)
    cap = caps.z_cap
    n1 = n + 1
    sum_z = np.zeros(n1)
    sumsq_z = np.zeros(n1)
    count = np.zeros(n1, dtype=np.int64)

    def record(g):
        ok = ~saturated
        sum_z[g] = z[ok].sum()
        sumsq_z[g] = (z[ok].astype(float) ** 2).sum()
        count[g] = ok.sum()

    record(0)
    for g in range(1, n1):
        e = np.searchsorted(cum, rng.random(replicates) * cum[-1], side="right")
        e = np.minimum(e, len(entries) - 1)
        new_z = np.zeros_like(z)
        for j, (_, values, probs) in enumerate(entries):
            mask = e == j
            if mask.any():
                new_z[mask] = draw_sums(rng, z[mask], values, probs)
        z = new_z
        over = z > cap
        if over.any():
            saturated |= over
            np.minimum(z, cap, out=z)
        record(g)

    in_range = z <= k_top
    final_counts = np.bincount(z[in_range], minlength=k_top + 1)
    return BpreMcResult(
        n=n,
        replicates=replicates,
        sum_z=sum_z,
        sumsq_z=sumsq_z,
        count=count,
        final_counts=final_counts,
        final_overflow=int((~in_range).sum()),
        n_saturated=int(saturated.sum()),
    )


def simulate_bpre_A_batch(model: ValidatedModel, n: int, replicates: int, seed: int, **kw) -> BpreMcResult:
    return simulate_bpre_batch(bpre_environment(model), n, replicates, seed, **kw)


def simulate_bpre_B_batch(
    model: ValidatedModel, n: int, replicates: int, seed: int, start_z: int = 1, **kw
) -> BpreMcResult:
    return simulate_bpre_batch(
        b_line_environment(model), n, replicates, seed, start_z=start_z, **kw
    )


def gw_B_extinction_freq(
    model: ValidatedModel, horizon: int, replicates: int, seed: int, start_z: int = 1
) -> tuple[float, float]:
    """MC frequency of extinction by `horizon` of the B-parasite GW process."""
    rng = rng_for(seed, 0)
    values, probs = dense_to_support(model.params.law_B.sum_law())
    z = np.full(replicates, start_z, dtype=np.int64)
    cap = SimCaps().z_cap
    for _ in range(horizon):
        alive = z > 0
        if not alive.any():
            break
        z[alive] = draw_sums(rng, z[alive], values, probs)
        np.minimum(z, cap, out=z)
    f = float((z == 0).mean())
    return f, math.sqrt(max(f * (1 - f), 0.0) / replicates)


def simulate_cell_line_batch(
    model: ValidatedModel,
    n: int,
    replicates: int,
    seed: int,
    start_z: int = 1,
    start_type: CellType = CellType.A,
    caps: SimCaps = SimCaps(),
) -> tuple[np.ndarray, np.ndarray]:
    """Final (type codes, parasite counts) of `replicates` random cell lines."""
    rng = rng_for(seed, 0)
    p = model.params
    t = np.full(replicates, A_CODE if start_type is CellType.A else B_CODE, dtype=np.int8)
    z = np.full(replicates, start_z, dtype=np.int64)
    cap = caps.z_cap
    # route index: (pair, child) for A-mothers, plus the two B-marginals
    routes = [
        (p.law_A_AA.marginal(0), A_CODE),
        (p.law_A_AA.marginal(1), A_CODE),
        (p.law_A_AB.marginal(0), A_CODE),
        (p.law_A_AB.marginal(1), B_CODE),
        (p.law_A_BB.marginal(0), B_CODE),
        (p.law_A_BB.marginal(1), B_CODE),
        (p.law_B.marginal(0), B_CODE),
        (p.law_B.marginal(1), B_CODE),
    ]
    supports = [dense_to_support(m) for m, _ in routes]
    child_type = np.array([ct for _, ct in routes], dtype=np.int8)
    for _ in range(n):
        a_mask = t == A_CODE
        u_pair = rng.random(replicates)
        pair = np.where(u_pair < p.p_AA, 0, np.where(u_pair < p.p_AA + p.p_AB, 1, 2))
        child = rng.integers(0, 2, size=replicates)
        route = np.where(a_mask, 2 * pair + child, 6 + child)
        new_z = np.zeros_like(z)
        for r in range(8):
            mask = route == r
            if mask.any():
                values, probs = supports[r]
                new_z[mask] = draw_sums(rng, z[mask], values, probs)
        t = child_type[route]
        z = np.minimum(new_z, cap)
    return t, z
