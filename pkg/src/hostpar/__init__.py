"""Two-type host-parasite branching model: simulation and analysis toolkit.

A-cells split into AA / AB / BB daughter pairs; B-cells only into BB.  Each
parasite in a mother cell places a random pair of offspring counts into the
two daughters, with a law depending on the mother type and the daughter pair.
The package provides exact reduced-process oracles, full-tree simulation,
replicated Monte Carlo with deterministic parallel streams, and closed-form
regime classification.
"""

__version__ = "0.1.0"

from .model import (
    AssumptionViolated,
    CellType,
    DaughterTypePair,
    DegenerateModel,
    DerivedQuantities,
    Environment,
    JointOffspringLaw,
    ModelParams,
    ModelValidationError,
    NormalizationError,
    RegimeReport,
    ValidatedModel,
    b_line_environment,
    bpre_environment,
    check,
    classify,
    derive,
    minimize_phi,
    phi,
    truncate,
    validate,
)
from .pmf import ConvPowerCache, PmfVector, convolve_trunc
from .oracle import (
    CellLineDistribution,
    TreeOutcomeTable,
    bpre_pmf_trajectory,
    brute_force_tree,
    exact_bpre_distribution,
    exact_cell_line_distribution,
    gw_extinction_prob,
    yaglom_proxy_B,
)
from .engine import (
    CapExceeded,
    CellLineState,
    GenerationState,
    GenSummary,
    SimCaps,
    rng_for,
    simulate_bpre,
    simulate_bpre_A,
    simulate_bpre_B,
    simulate_cell_line,
    simulate_gw_B,
    simulate_tree,
)
from .mc import (
    AllRejected,
    McConfig,
    McSummary,
    NoContaminatedCells,
    estimate_Fk,
    proportion_A,
    run_mc,
    survival_curves,
    yaglom_compare,
)
from .modelio import (
    ParseError,
    bundled_model_path,
    load_bundled,
    load_model,
    params_hash,
    save_model,
)
