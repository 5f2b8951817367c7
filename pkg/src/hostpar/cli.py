"""Command-line surface: classify / simulate / cell-line / exact / mc / verify.

Exit codes: 0 success, 1 check failure (verify), 2 usage or parse error.
CSV is the tabular format; each output CSV gets a JSON metadata sidecar
carrying the tool version, params hash, seed, and caps so outputs from
different models or runs cannot be mixed up silently.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from pathlib import Path

from . import __version__
from .engine import SimCaps, simulate_cell_line, simulate_tree
from .model import (
    CellType,
    ModelValidationError,
    b_line_environment,
    bpre_environment,
    classify,
    derive,
)
from .modelio import ParseError, bundled_model_path, load_model, params_hash
from .mc import STAT_NAMES, CONDITIONS, TRACK_MODES, McConfig, estimate_Fk, run_mc
from .oracle import exact_bpre_distribution, exact_cell_line_distribution
from .pmf import PmfVector

Z95 = 1.959963984540054


def _fmt(x: float) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return format(float(x), ".12g")


def _metadata(model_path: str, model, seed, caps: SimCaps, extra: dict | None = None) -> dict:
    meta = {
        "tool": "hostpar",
        "version": __version__,
        "model_file": str(model_path),
        "params_hash": params_hash(model),
        "seed": seed,
        "caps": dataclasses.asdict(caps),
    }
    if extra:
        meta.update(extra)
    return meta


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else _fmt(v) if isinstance(v, float) else str(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def _write_meta(path: Path, meta: dict) -> None:
    path.with_suffix(path.suffix + ".meta.json").write_text(json.dumps(meta, indent=2) + "\n")


def _resolve_model(name: str) -> Path:
    """A --model value is a path, or the name of a bundled model."""
    p = Path(name)
    if p.exists():
        return p
    try:
        return bundled_model_path(name)
    except KeyError:
        return p  # let load_model report the missing file


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_classify(args) -> int:
    model = load_model(_resolve_model(args.model))
    report = classify(model)
    d = report.derived
    payload = {
        "params_hash": params_hash(model),
        "derived": dataclasses.asdict(d),
        "regime": {
            k: v
            for k, v in dataclasses.asdict(report).items()
            if k not in ("derived", "boundary")
        },
        "boundary": list(report.boundary),
    }
    if args.format == "json":
        print(json.dumps(payload, indent=2))
    else:
        print(f"model {args.model}  (params hash {payload['params_hash']})")
        print("derived quantities:")
        for k, v in payload["derived"].items():
            print(f"  {k:22s} {v}")
        print("regime flags:")
        for k, v in payload["regime"].items():
            print(f"  {k:28s} {v}")
        if report.boundary:
            print("near-boundary comparisons: " + ", ".join(report.boundary))
    return 0


def cmd_simulate(args) -> int:
    model = load_model(_resolve_model(args.model))
    caps = SimCaps(max_generations=max(args.n_gens, 1))
    d = derive(model)
    summaries = simulate_tree(model, args.n_gens, args.seed, caps=caps)
    rows = []
    for s in summaries:
        w = s.Z_A / d.gamma**s.n if d.gamma > 0 else math.nan
        la = s.G_star_A / d.nu**s.n if d.nu > 0 else math.nan
        ell = (s.G_star_A + s.G_star_B) / 2.0**s.n
        rows.append(
            [0, s.n, s.G_star_A, s.G_star_B, s.clean_A, s.clean_B, s.Z_A, s.Z_B,
             w, la, ell, int(s.truncated or s.saturated)]
        )
    header = ["replicate", "n", "G_star_A", "G_star_B", "clean_A", "clean_B",
              "Z_A", "Z_B", "W_n", "LA_n", "L_n", "truncated_flag"]
    out = Path(args.out)
    _write_csv(out, header, rows)
    _write_meta(out, _metadata(args.model, model, args.seed, caps, {"n_gens": args.n_gens}))
    return 0


def cmd_cell_line(args) -> int:
    model = load_model(_resolve_model(args.model))
    caps = SimCaps(max_generations=max(args.n_gens, 1))
    state = simulate_cell_line(model, args.n_gens, args.seed, caps=caps)
    rows = [[n, t.value, z] for n, (t, z) in enumerate(zip(state.types, state.zs))]
    out = Path(args.out)
    _write_csv(out, ["n", "type", "Z"], rows)
    _write_meta(out, _metadata(args.model, model, args.seed, caps,
                               {"n_gens": args.n_gens, "saturated": state.saturated}))
    return 0


def cmd_exact(args) -> int:
    model = load_model(_resolve_model(args.model))
    out = Path(args.out) if args.out else None
    if args.line == "cell":
        dist = exact_cell_line_distribution(model, args.n, args.k_max, start_z=args.start_z)
        pmf = dist.conditional_given_A() if args.condition_type == "A" else None
        if args.condition_type == "B":
            pmf = dist.conditional_given_B()
        if pmf is None:
            # unconditional law of Z along the random cell line
            pmf = PmfVector(dist.pA + dist.pB, dist.overflow_A + dist.overflow_B)
    else:
        env = bpre_environment(model) if args.line == "A" else b_line_environment(model)
        pmf = exact_bpre_distribution(env, args.n, args.k_max, start_z=args.start_z)
    rows = [[k, float(p)] for k, p in enumerate(pmf.probs)]
    meta = _metadata(args.model, model, None, SimCaps(), {
        "n": args.n,
        "k_max": args.k_max,
        "line": args.line,
        "overflow_mass": pmf.overflow,
        "error_bound": "buckets are exact; mass above k_max is in overflow_mass",
    })
    if out:
        _write_csv(out, ["k", "probability"], rows)
        _write_meta(out, meta)
    else:
        print("k,probability")
        for k, p in rows:
            print(f"{k},{_fmt(p)}")
        print(f"# overflow_mass={_fmt(pmf.overflow)}", file=sys.stderr)
    return 0


def mc_summary_rows(summary) -> list[list]:
    """Long-format rows (generation, statistic, k, estimate, ci_lo, ci_hi)."""
    rows = []
    n1 = summary.cfg.n_gens + 1
    for g in range(n1):
        for which in ("A", "all"):
            f, se = summary.survival_freq(g, which)
            rows.append([g, f"surv_{which}", "", f, f - Z95 * se, f + Z95 * se])
        for name in STAT_NAMES:
            mean, se, m = summary.stat_mean(name, g)
            if m == 0:
                rows.append([g, name, "", math.nan, math.nan, math.nan])
            else:
                lo = mean - Z95 * se if not math.isnan(se) else math.nan
                hi = mean + Z95 * se if not math.isnan(se) else math.nan
                rows.append([g, name, "", mean, lo, hi])
        if summary.cfg.track == "full":
            for t, ti in ((CellType.A, 0), (CellType.B, 1)):
                if summary.gstar_sum[g, ti] <= 0:
                    continue
                for k in range(1, summary.cfg.k_top + 1):
                    est, se = estimate_Fk(summary, g, k, t)
                    rows.append([g, f"F_k_{t.value}", str(k), est, est - Z95 * se, est + Z95 * se])
    return rows


def cmd_mc(args) -> int:
    model = load_model(_resolve_model(args.model))
    caps = SimCaps(max_generations=max(args.n_gens, 1))
    cfg = McConfig(
        replicates=args.replicates,
        n_gens=args.n_gens,
        master_seed=args.seed,
        workers=args.workers,
        condition=args.condition,
        k_top=args.k_top,
        track=args.track,
        chunk_size=args.chunk_size,
        caps=caps,
    )
    summary = run_mc(model, cfg)
    out = Path(args.out)
    _write_csv(out, ["generation", "statistic", "k", "estimate", "ci_lo", "ci_hi"],
               mc_summary_rows(summary))
    _write_meta(out, _metadata(args.model, model, args.seed, caps, {
        "replicates": args.replicates,
        "n_gens": args.n_gens,
        "workers": args.workers,
        "condition": args.condition,
        "track": args.track,
        "k_top": args.k_top,
        "chunk_size": args.chunk_size,
        "n_total": summary.n_total,
        "n_accepted": summary.n_accepted,
        "n_saturated": summary.n_saturated,
        "n_truncated": summary.n_truncated,
    }))
    return 0


def cmd_verify(args) -> int:
    from . import verify

    results = verify.run_all(budget=args.budget, workers=args.workers)
    failed = verify.print_report(results)
    return 1 if failed else 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="hostpar",
        description="Two-type host-parasite branching model: simulation, "
        "exact distributions, Monte Carlo, and regime classification.",
    )
    ap.add_argument("--version", action="version", version=f"hostpar {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def add_model(p):
        p.add_argument("--model", required=True,
                       help="model JSON file, or a bundled model name (m1, m2, m3, ...)")

    p = sub.add_parser("classify", help="derived quantities and regime flags")
    add_model(p)
    p.add_argument("--format", choices=("pretty", "json"), default="pretty")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("simulate", help="one replicate of the full cell tree")
    add_model(p)
    p.add_argument("--n-gens", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("cell-line", help="one random cell line trajectory")
    add_model(p)
    p.add_argument("--n-gens", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_cell_line)

    p = sub.add_parser("exact", help="exact pmf of a reduced process")
    add_model(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k-max", type=int, default=256)
    p.add_argument("--start-z", type=int, default=1)
    p.add_argument("--line", choices=("A", "B", "cell"), default="A",
                   help="A: A-line parasite BPRE; B: B-line BPRE; cell: random cell line")
    p.add_argument("--condition-type", choices=("A", "B", "none"), default="none",
                   help="with --line cell: condition on the final cell type")
    p.add_argument("--out")
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("mc", help="replicated Monte Carlo with reductions")
    add_model(p)
    p.add_argument("--replicates", type=int, required=True)
    p.add_argument("--n-gens", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--condition", choices=CONDITIONS, default="none")
    p.add_argument("--k-top", type=int, default=16)
    p.add_argument("--track", choices=TRACK_MODES, default="full")
    p.add_argument("--chunk-size", type=int, default=1024)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mc)

    p = sub.add_parser("verify", help="run the acceptance suite on bundled models")
    p.add_argument("--budget", choices=("full", "small"), default="full")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, ModelValidationError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
