"""Model parameterization, standing-assumption checks, derived quantities and
regime classification for the two-type (A/B) host-parasite branching model.

An A-cell splits into a daughter pair of types AA, AB or BB (probabilities
p_AA, p_AB, p_BB); a B-cell always splits BB.  Each parasite in a mother cell
draws an iid pair (x0, x1) of offspring counts, sent to daughters 0 and 1,
from a joint law that depends on the mother type and the daughter pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

PROB_TOL = 1e-12
BOUNDARY_TOL = 1e-9

NOT_APPLICABLE = "not_applicable"


class CellType(Enum):
    A = "A"
    B = "B"


class DaughterTypePair(Enum):
    """Types of the two daughters of an A-cell; (B, A) is unrepresentable."""

    AA = "AA"
    AB = "AB"  # daughter 0 is A, daughter 1 is B
    BB = "BB"


class ModelValidationError(ValueError):
    """Raised when a model violates the standing assumptions.

    `violations` lists the names of all violated conditions.
    """

    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__("model invalid: " + ", ".join(self.violations))


class NormalizationError(ModelValidationError):
    pass


class AssumptionViolated(ModelValidationError):
    pass


class DegenerateModel(ValueError):
    """No A-daughters are possible (nu = 0); BPRE quantities are undefined."""


@dataclass(frozen=True)
class JointOffspringLaw:
    """Finite-support joint pmf on pairs (x0, x1) of per-parasite offspring
    counts sent to daughter 0 and daughter 1."""

    support: tuple[tuple[int, int, float], ...]

    def __post_init__(self):
        seen = set()
        for x0, x1, p in self.support:
            if x0 < 0 or x1 < 0 or int(x0) != x0 or int(x1) != x1:
                raise ValueError(f"support values must be counts, got ({x0}, {x1})")
            if p < 0:
                raise ValueError(f"negative probability {p} at ({x0}, {x1})")
            if (x0, x1) in seen:
                raise ValueError(f"duplicate support point ({x0}, {x1})")
            seen.add((x0, x1))
        total = sum(p for _, _, p in self.support)
        if abs(total - 1.0) > PROB_TOL:
            raise NormalizationError([f"joint law mass {total!r} != 1"])

    @classmethod
    def from_pairs(cls, pairs) -> "JointOffspringLaw":
        """Build from (x0, x1, p) triples or a {(x0, x1): p} mapping."""
        if isinstance(pairs, dict):
            pairs = [(x0, x1, p) for (x0, x1), p in pairs.items()]
        return cls(tuple((int(x0), int(x1), float(p)) for x0, x1, p in pairs))

    @classmethod
    def independent(cls, marg0: dict, marg1: dict) -> "JointOffspringLaw":
        pairs = [
            (x0, x1, p0 * p1)
            for x0, p0 in sorted(marg0.items())
            for x1, p1 in sorted(marg1.items())
        ]
        return cls.from_pairs(pairs)

    @classmethod
    def point(cls, x0: int, x1: int) -> "JointOffspringLaw":
        return cls.from_pairs([(x0, x1, 1.0)])

    # --- array views -------------------------------------------------------

    @property
    def x0(self) -> np.ndarray:
        return np.array([s[0] for s in self.support], dtype=np.int64)

    @property
    def x1(self) -> np.ndarray:
        return np.array([s[1] for s in self.support], dtype=np.int64)

    @property
    def p(self) -> np.ndarray:
        return np.array([s[2] for s in self.support], dtype=float)

    def marginal(self, i: int) -> np.ndarray:
        """Marginal pmf of coordinate i as a dense array indexed by value."""
        xs = self.x0 if i == 0 else self.x1
        probs = np.zeros(int(xs.max()) + 1)
        np.add.at(probs, xs, self.p)
        return probs

    def sum_law(self) -> np.ndarray:
        """Pmf of x0 + x1 as a dense array indexed by value."""
        s = self.x0 + self.x1
        probs = np.zeros(int(s.max()) + 1)
        np.add.at(probs, s, self.p)
        return probs

    def mean(self, i: int) -> float:
        xs = self.x0 if i == 0 else self.x1
        return float(np.dot(xs, self.p))

    @property
    def mu0(self) -> float:
        return self.mean(0)

    @property
    def mu1(self) -> float:
        return self.mean(1)

    def prob_zero(self, i: int) -> float:
        """P(X_i = 0)."""
        xs = self.x0 if i == 0 else self.x1
        return float(self.p[xs == 0].sum())

    def prob_both_le_one(self) -> float:
        """P(X0 <= 1 and X1 <= 1)."""
        mask = (self.x0 <= 1) & (self.x1 <= 1)
        return float(self.p[mask].sum())

    def max_value(self) -> int:
        return int(max(self.x0.max(), self.x1.max()))


@dataclass(frozen=True)
class ModelParams:
    """Raw model parameterization; validate() turns it into a ValidatedModel."""

    p_AA: float
    p_AB: float
    p_BB: float
    law_A_AA: JointOffspringLaw
    law_A_AB: JointOffspringLaw
    law_A_BB: JointOffspringLaw
    law_B: JointOffspringLaw


@dataclass(frozen=True)
class ValidatedModel:
    """Wrapper certifying that `params` passed all standing assumptions.

    Immutable; safe to share across threads/processes.
    """

    params: ModelParams

    def __getattr__(self, name):
        # guard keeps unpickling (attribute lookup before __init__) finite
        if name.startswith("_") or name == "params":
            raise AttributeError(name)
        return getattr(self.params, name)

    @property
    def nu(self) -> float:
        return 2.0 * self.params.p_AA + self.params.p_AB

    def law_for(self, mother: CellType, pair: DaughterTypePair) -> JointOffspringLaw:
        if mother is CellType.B:
            return self.params.law_B
        return {
            DaughterTypePair.AA: self.params.law_A_AA,
            DaughterTypePair.AB: self.params.law_A_AB,
            DaughterTypePair.BB: self.params.law_A_BB,
        }[pair]


def mean_contaminated_B_daughters(params: ModelParams) -> float:
    """Expected number of contaminated B-daughters of an A-cell hosting one
    parasite: p_AB*P(X1(A,AB)>=1) + p_BB*(P(X0(A,BB)>=1) + P(X1(A,BB)>=1))."""
    return params.p_AB * (1.0 - params.law_A_AB.prob_zero(1)) + params.p_BB * (
        (1.0 - params.law_A_BB.prob_zero(0)) + (1.0 - params.law_A_BB.prob_zero(1))
    )


def check(params: ModelParams, require_AA_means: bool = True) -> list[str]:
    """Return the list of violated standing assumptions (empty iff valid).

    `require_AA_means=False` relaxes the positivity of the AA-law means (and
    SA3) when p_AA = 0, where those laws never act.
    """
    violations: list[str] = []
    total = params.p_AA + params.p_AB + params.p_BB
    if abs(total - 1.0) > PROB_TOL:
        violations.append("normalization:type_probs")
    if min(params.p_AA, params.p_AB, params.p_BB) < 0:
        violations.append("normalization:type_probs_negative")
    strict_AA = require_AA_means or params.p_AA > 0
    if params.p_AA >= 1.0 - PROB_TOL:
        violations.append("SA2")
    if strict_AA and params.law_A_AA.prob_both_le_one() >= 1.0 - PROB_TOL:
        violations.append("SA3")
    if params.law_B.prob_both_le_one() >= 1.0 - PROB_TOL:
        violations.append("SA4")
    sa5_ok = (
        params.law_B.mu0 > 0
        and params.law_B.mu1 > 0
        and mean_contaminated_B_daughters(params) > 0
        and (not strict_AA or (params.law_A_AA.mu0 > 0 and params.law_A_AA.mu1 > 0))
    )
    if not sa5_ok:
        violations.append("SA5")
    return violations


def validate(params: ModelParams, require_AA_means: bool = True) -> ValidatedModel:
    """Validate the standing assumptions; raise with all violation names on
    failure, otherwise return an immutable ValidatedModel."""
    violations = check(params, require_AA_means=require_AA_means)
    if violations:
        if all(v.startswith("normalization") for v in violations):
            raise NormalizationError(violations)
        raise AssumptionViolated(violations)
    return ValidatedModel(params)


# ---------------------------------------------------------------------------
# Derived quantities
# ---------------------------------------------------------------------------


def _xlogx(x: float) -> float:
    # convention 0*log 0 = 0
    if x == 0.0:
        return 0.0
    return x * math.log(x)


def _wlog(w: float, x: float) -> float:
    # convention w*log 0 = -inf for w > 0, 0*log 0 = 0
    if w == 0.0:
        return 0.0
    if x == 0.0:
        return -math.inf
    return w * math.log(x)


@dataclass(frozen=True)
class Environment:
    """Law of the random environment of the A-line branching process: a
    weighted list of marginal offspring pmfs (dense arrays indexed by value).
    """

    entries: tuple[tuple[float, np.ndarray], ...]

    def __post_init__(self):
        total = sum(w for w, _ in self.entries)
        if abs(total - 1.0) > PROB_TOL:
            raise NormalizationError([f"environment weights sum {total!r} != 1"])
        for w, _ in self.entries:
            if w < 0:
                raise NormalizationError(["environment weight negative"])

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for w, _ in self.entries])

    @property
    def pmfs(self) -> list[np.ndarray]:
        return [pmf for _, pmf in self.entries]

    def mean(self) -> float:
        """Mean offspring number of the annealed one-step law."""
        return float(
            sum(w * np.dot(np.arange(len(pmf)), pmf) for w, pmf in self.entries)
        )

    def max_value(self) -> int:
        return max(len(pmf) - 1 for pmf in self.entries)


def bpre_environment(model: ValidatedModel) -> Environment:
    """Environment law of the A-line BPRE: marginal 0 and 1 of the AA-law each
    with weight p_AA/nu, marginal 0 of the AB-law with weight p_AB/nu.
    Zero-weight entries are dropped."""
    nu = model.nu
    if nu <= 0.0:
        raise DegenerateModel("nu = 0: no A-daughters possible")
    p = model.params
    raw = [
        (p.p_AA / nu, p.law_A_AA.marginal(0)),
        (p.p_AA / nu, p.law_A_AA.marginal(1)),
        (p.p_AB / nu, p.law_A_AB.marginal(0)),
    ]
    return Environment(tuple((w, pmf) for w, pmf in raw if w > 0))


def b_line_environment(model: ValidatedModel) -> Environment:
    """Environment law of the B-started random cell line: the two marginals of
    the B-law, weight 1/2 each."""
    p = model.params
    return Environment(
        ((0.5, p.law_B.marginal(0)), (0.5, p.law_B.marginal(1)))
    )


@dataclass(frozen=True)
class DerivedQuantities:
    nu: float
    gamma: float
    gamma_hat: float
    mu_0B: float
    mu_1B: float
    mu_B: float
    mu_B_product: float
    E_log_gprime: float  # extended real, -inf allowed; nan when nu = 0
    E_gprime_log_gprime: float
    supc_product: float
    phi_min: float
    theta_star: float
    beta: float
    eta: float
    ab_flux: float
    B_sslog: float


def phi(model: ValidatedModel, theta: float) -> float:
    """The convex map theta -> E g'(1)^theta of the A-line environment:
    (p_AA/nu)*(mu0AA^th + mu1AA^th) + (p_AB/nu)*mu0AB^th.  phi(0) = 1."""
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"theta must be in [0, 1], got {theta}")
    nu = model.nu
    if nu <= 0.0:
        raise DegenerateModel("nu = 0")
    p = model.params

    def pw(m: float) -> float:
        if m == 0.0:
            return 1.0 if theta == 0.0 else 0.0
        return m**theta

    return (p.p_AA / nu) * (pw(p.law_A_AA.mu0) + pw(p.law_A_AA.mu1)) + (
        p.p_AB / nu
    ) * pw(p.law_A_AB.mu0)


_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def minimize_phi(model: ValidatedModel, tol: float = 1e-10) -> tuple[float, float]:
    """Golden-section search for the minimum of phi on [0, 1].

    phi is convex, so the bracket shrinks monotonically; returns
    (theta_star, phi_min) with |theta_star - argmin| <= tol.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    a, b = 0.0, 1.0
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = phi(model, c), phi(model, d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = phi(model, c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = phi(model, d)
    theta_star = 0.5 * (a + b)
    # the boundary can strictly dominate the interior for monotone phi
    candidates = [(phi(model, t), t) for t in (0.0, theta_star, 1.0)]
    fmin, tmin = min(candidates)
    return tmin, fmin


def derive(model: ValidatedModel, tol: float = 1e-10) -> DerivedQuantities:
    """All closed-form derived quantities of a validated model."""
    p = model.params
    nu = model.nu
    m0AA, m1AA = p.law_A_AA.mu0, p.law_A_AA.mu1
    m0AB, m1AB = p.law_A_AB.mu0, p.law_A_AB.mu1
    m0BB, m1BB = p.law_A_BB.mu0, p.law_A_BB.mu1
    mu_0B, mu_1B = p.law_B.mu0, p.law_B.mu1

    gamma = p.p_AA * (m0AA + m1AA) + p.p_AB * m0AB
    gamma_hat = p.p_AA * (m0AA**2 + m1AA**2) + p.p_AB * m0AB**2

    if nu > 0.0:
        E_log = _wlog(p.p_AA / nu, m0AA) + _wlog(p.p_AA / nu, m1AA) + _wlog(
            p.p_AB / nu, m0AB
        )
        E_glg = (p.p_AA / nu) * (_xlogx(m0AA) + _xlogx(m1AA)) + (
            p.p_AB / nu
        ) * _xlogx(m0AB)
        supc = m0AA**p.p_AA * m1AA**p.p_AA * m0AB**p.p_AB
        theta_star, phi_min = minimize_phi(model, tol=tol)
    else:
        E_log = E_glg = supc = phi_min = theta_star = math.nan

    beta = p.p_AB * float(p.law_A_AB.prob_zero(1) < 1.0) + p.p_BB * (
        float(p.law_A_BB.prob_zero(0) < 1.0) + float(p.law_A_BB.prob_zero(1) < 1.0)
    )
    # mean parasite count reaching a B-cell along the random line after one step
    eta = 0.5 * (p.p_BB * m0BB + p.p_AB * m1AB + p.p_BB * m1BB)
    mu_B = mu_0B + mu_1B
    B_sslog = _xlogx(mu_0B) + _xlogx(mu_1B)

    return DerivedQuantities(
        nu=nu,
        gamma=gamma,
        gamma_hat=gamma_hat,
        mu_0B=mu_0B,
        mu_1B=mu_1B,
        mu_B=mu_B,
        mu_B_product=mu_0B * mu_1B,
        E_log_gprime=E_log,
        E_gprime_log_gprime=E_glg,
        supc_product=supc,
        phi_min=phi_min,
        theta_star=theta_star,
        beta=beta,
        eta=eta,
        ab_flux=2.0 * eta,
        B_sslog=B_sslog,
    )


# ---------------------------------------------------------------------------
# Regime classification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RegimeReport:
    a_parasites_as_extinction: bool
    all_parasites_as_extinction: bool
    bpre_class: str  # supercritical | critical | subcritical_{strong,intermediate,weak} | not_applicable
    kappa: object  # 0.0, 0.5, 1.5 or "not_applicable"
    LA_trivial: bool
    L_trivial: bool
    thm31_applies: bool
    thm32_applies: bool
    thm32c_applies: bool
    derived: DerivedQuantities
    boundary: tuple[str, ...] = ()  # comparisons within BOUNDARY_TOL of their threshold


def classify(model: ValidatedModel, tol: float = BOUNDARY_TOL) -> RegimeReport:
    """Full regime decision tree from the closed-form derived quantities.

    Comparisons within `tol` of their threshold are reported in `boundary`
    (the classification still picks a side).
    """
    p = model.params
    d = derive(model)
    boundary: list[str] = []

    def near(value: float, threshold: float, name: str) -> None:
        if math.isfinite(value) and abs(value - threshold) < tol:
            boundary.append(name)

    near(d.nu, 1.0, "nu~1")
    near(d.mu_B, 1.0, "mu_B~1")
    near(d.mu_B_product, 1.0, "mu_0B*mu_1B~1")
    near(d.mu_B, d.gamma, "mu_B~gamma")
    near(d.B_sslog, 0.0, "B_sslog~0")
    if math.isfinite(d.E_log_gprime):
        near(d.E_log_gprime, 0.0, "E_log_gprime~0")
    if math.isfinite(d.supc_product):
        near(d.supc_product, 1.0, "supc_product~1")

    if p.p_AA == 0.0:
        near(p.law_A_AB.mu0, 1.0, "mu_0A(AB)~1")
        a_ext = p.law_A_AB.mu0 <= 1.0 or d.nu < 1.0
    else:
        if d.nu <= 1.0:
            a_ext = True
        else:
            near(d.phi_min, 1.0 / d.nu, "phi_min~1/nu")
            a_ext = d.E_log_gprime < 0.0 and d.phi_min <= 1.0 / d.nu

    all_ext = a_ext and d.mu_B <= 1.0

    if d.nu <= 0.0:
        bpre_class = NOT_APPLICABLE
        kappa: object = NOT_APPLICABLE
        la_trivial = True
    else:
        if d.E_log_gprime > 0.0:
            bpre_class = "supercritical"
            kappa = NOT_APPLICABLE
        elif d.E_log_gprime == 0.0:
            bpre_class = "critical"
            kappa = NOT_APPLICABLE
        else:
            if math.isinf(d.E_log_gprime) or d.E_gprime_log_gprime < 0.0:
                bpre_class = "subcritical_strong"
                kappa = 0.0
            elif d.E_gprime_log_gprime == 0.0:
                bpre_class = "subcritical_intermediate"
                kappa = 0.5
            else:
                bpre_class = "subcritical_weak"
                kappa = 1.5
            near(d.E_gprime_log_gprime, 0.0, "E_gprime_log_gprime~0")
        la_trivial = d.E_log_gprime <= 0.0 or d.nu <= 1.0

    return RegimeReport(
        a_parasites_as_extinction=a_ext,
        all_parasites_as_extinction=all_ext,
        bpre_class=bpre_class,
        kappa=kappa,
        LA_trivial=la_trivial,
        L_trivial=d.mu_B_product <= 1.0,
        thm31_applies=d.mu_B_product > 1.0,
        thm32_applies=bool(math.isfinite(d.supc_product) and d.supc_product > 1.0),
        thm32c_applies=bool(
            math.isfinite(d.supc_product)
            and d.supc_product > 1.0
            and d.mu_B > d.gamma
            and d.B_sslog < 0.0
        ),
        derived=d,
        boundary=tuple(boundary),
    )


# ---------------------------------------------------------------------------
# Truncation transform
# ---------------------------------------------------------------------------


def _truncate_law(law: JointOffspringLaw, n_max: int) -> JointOffspringLaw:
    merged: dict[tuple[int, int], float] = {}
    for x0, x1, p in law.support:
        key = (x0 if x0 <= n_max else 0, x1 if x1 <= n_max else 0)
        merged[key] = merged.get(key, 0.0) + p
    return JointOffspringLaw.from_pairs(
        [(x0, x1, p) for (x0, x1), p in sorted(merged.items())]
    )


def truncate(model: ValidatedModel, n_max: int) -> ValidatedModel:
    """Truncated model: every A-mother law has coordinate values > n_max moved
    to 0 (mass redistributed coordinate-wise); law_B and cell-split
    probabilities are unchanged.  The result is re-validated and truncation may
    surface SA3/SA5 violations for tiny n_max."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    p = model.params
    return validate(
        ModelParams(
            p_AA=p.p_AA,
            p_AB=p.p_AB,
            p_BB=p.p_BB,
            law_A_AA=_truncate_law(p.law_A_AA, n_max),
            law_A_AB=_truncate_law(p.law_A_AB, n_max),
            law_A_BB=_truncate_law(p.law_A_BB, n_max),
            law_B=p.law_B,
        )
    )
