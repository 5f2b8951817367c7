"""Model (de)serialization: JSON files, canonical hashing, bundled models.

File schema (all probabilities decimal):

    {
      "p_AA": 0.5, "p_AB": 0.25, "p_BB": 0.25,
      "law_A_AA": [[x0, x1, p], ...],
      "law_A_AB": [...], "law_A_BB": [...], "law_B": [...]
    }

A file written by `save_model` parses back to a field-identical ModelParams.
"""

from __future__ import annotations

import hashlib
import json
from importlib import resources
from pathlib import Path

from .model import JointOffspringLaw, ModelParams, ValidatedModel, validate

LAW_FIELDS = ("law_A_AA", "law_A_AB", "law_A_BB", "law_B")
BUNDLED_MODELS = ("m1", "m2", "m3", "p_aa_zero", "delta_one")


class ParseError(ValueError):
    """Malformed model file; `field` names the offending entry when known."""

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(message if field is None else f"{field}: {message}")


def _law_from_json(entries, field: str) -> JointOffspringLaw:
    if not isinstance(entries, list) or not entries:
        raise ParseError("expected a nonempty list of [x0, x1, p] triples", field)
    pairs = {}
    for i, row in enumerate(entries):
        if not (isinstance(row, list) and len(row) == 3):
            raise ParseError(f"entry {i} is not an [x0, x1, p] triple", field)
        x0, x1, p = row
        if not (isinstance(x0, int) and isinstance(x1, int)) or x0 < 0 or x1 < 0:
            raise ParseError(f"entry {i}: offspring counts must be nonnegative integers", field)
        if not isinstance(p, (int, float)) or p < 0:
            raise ParseError(f"entry {i}: probability must be a nonnegative number", field)
        if (x0, x1) in pairs:
            raise ParseError(f"duplicate support point ({x0}, {x1})", field)
        pairs[(x0, x1)] = float(p)
    try:
        return JointOffspringLaw.from_pairs(pairs)
    except ValueError as exc:
        raise ParseError(str(exc), field) from exc


def params_from_dict(data: dict) -> ModelParams:
    if not isinstance(data, dict):
        raise ParseError("model file must contain a JSON object")
    missing = [f for f in ("p_AA", "p_AB", "p_BB") + LAW_FIELDS if f not in data]
    if missing:
        raise ParseError(f"missing fields: {', '.join(missing)}")
    probs = {}
    for f in ("p_AA", "p_AB", "p_BB"):
        if not isinstance(data[f], (int, float)):
            raise ParseError("expected a number", f)
        probs[f] = float(data[f])
    laws = {f: _law_from_json(data[f], f) for f in LAW_FIELDS}
    return ModelParams(**probs, **laws)


def params_to_dict(params: ModelParams) -> dict:
    out = {"p_AA": params.p_AA, "p_AB": params.p_AB, "p_BB": params.p_BB}
    for f in LAW_FIELDS:
        law: JointOffspringLaw = getattr(params, f)
        out[f] = [[x0, x1, p] for x0, x1, p in law.support]
    return out


def load_model(path: str | Path, require_AA_means: bool = True) -> ValidatedModel:
    """Parse and validate a model file.  Raises ParseError on malformed input
    and NormalizationError / AssumptionViolated on invalid parameters."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return validate(params_from_dict(data), require_AA_means=require_AA_means)


def save_model(params: ModelParams | ValidatedModel, path: str | Path) -> None:
    if isinstance(params, ValidatedModel):
        params = params.params
    Path(path).write_text(json.dumps(params_to_dict(params), indent=2) + "\n")


def params_hash(params: ModelParams | ValidatedModel) -> str:
    """Short stable digest of the parameters (canonical-JSON sha256)."""
    if isinstance(params, ValidatedModel):
        params = params.params
    canon = json.dumps(params_to_dict(params), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def bundled_model_path(name: str) -> Path:
    if name not in BUNDLED_MODELS:
        raise KeyError(f"unknown bundled model {name!r}; have {BUNDLED_MODELS}")
    return Path(resources.files("hostpar").joinpath("models", f"{name}.json"))


def load_bundled(name: str, **kw) -> ValidatedModel:
    return load_model(bundled_model_path(name), **kw)
