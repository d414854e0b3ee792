"""
Experiment configs: YAML documents with the sections

    seed, output, tolerances, operators, geometry, runs

Validation collects every problem before failing, so a broken config is
reported in one pass.
"""
import logging
import os
import re
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from asymlab.errors import AsymlabError, ConfigValidationError, ParseError
from asymlab.operators.fluxes.flux_loader import KINDS, build_flux

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCES = {
    "quad_tol": 1e-10,
    "solver_tol": 1e-8,
    "residual_tol": 1e-6,
    "ode_tol": 1e-5,
    "classify_band": 0.05,
    "newton_max_iter": 50,
    "oracle_tol": 5e-4,
    "probe_oracle_tol": 5e-3,
    "probe_cauchy_tol": 2e-2,
    "order_min": 1.9,
}

RUN_KINDS = ("classify", "barriers", "residuals", "radial-bvp", "disk-solve", "removability-probe")

IDENTIFIER_KEYS = ("name", "operator", "operators")

_NUMBER = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$|^[+-]?(inf|nan)$", re.IGNORECASE)


def asymlab_home():
    return Path(os.environ.get("ASYMLAB_HOME", Path.home() / ".asymlab"))


def coerce_numbers(value):
    """
    Turn numeric strings (YAML reads `1e-10` as a string) into floats,
    recursively. Identifiers (block names and operator references) stay
    strings; the `operators` section itself is still coerced.
    """
    if isinstance(value, str) and _NUMBER.match(value.strip()):
        return float(value)
    if isinstance(value, dict):
        return {k: v if k in IDENTIFIER_KEYS and not isinstance(v, dict) else coerce_numbers(v)
                for k, v in value.items()}
    if isinstance(value, list):
        return [coerce_numbers(v) for v in value]
    return value


@dataclass(frozen=True)
class OperatorConfig:
    name: str
    kind: str
    params: dict = field(default_factory=dict)

    def to_dict(self):
        return {"kind": self.kind, **self.params}


@dataclass(frozen=True)
class RunBlock:
    kind: str
    params: dict = field(default_factory=dict)
    name: str = ""

    def to_dict(self):
        return {"kind": self.kind, **({"name": self.name} if self.name else {}), **self.params}


@dataclass(frozen=True)
class ExperimentConfig:
    runs: tuple
    operators: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    geometry: dict = field(default_factory=lambda: {"n": 2, "c": 1.0})
    seed: int = 0
    output: str = "asymlab-out"

    def operator(self, name):
        return self.operators[name]

    def to_dict(self):
        return {
            "seed": self.seed,
            "output": self.output,
            "tolerances": dict(self.tolerances),
            "geometry": dict(self.geometry),
            "operators": {name: op.to_dict() for name, op in self.operators.items()},
            "runs": [r.to_dict() for r in self.runs],
        }


def serialize_config(config: ExperimentConfig):
    return yaml.safe_dump(config.to_dict(), sort_keys=False)


def user_defaults():
    """Tolerance overrides from `~/.asymlab/defaults.yaml` (or `$ASYMLAB_HOME/defaults.yaml`)."""
    path = asymlab_home() / "defaults.yaml"
    if not path.exists():
        return {}
    try:
        content = yaml.safe_load(path.read_text()) or {}
    except yaml.YAMLError as e:
        logger.warning(f"🔴 ignoring unreadable {path}: {e}")
        return {}
    return coerce_numbers(content.get("tolerances", {}) or {})


DEFAULTS_EXAMPLE = Path(__file__).parent / "templates" / "defaults-example.yaml"


def seed_user_defaults():
    """
    Write the commented tolerance table to the user defaults file unless one exists.

    Returns:
        Path | None: the file written, None when it was already there.
    """
    path = asymlab_home() / "defaults.yaml"
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.exists():
        return None
    path.write_text(DEFAULTS_EXAMPLE.read_text(encoding="utf-8"), encoding="utf-8")
    logger.info(f"seeded {path} with the default tolerances")
    return path


def _load_yaml(text):
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        problem = getattr(e, "problem", None) or str(e)
        raise ParseError(problem, line=mark.line + 1 if mark else None)


def _operator_refs(block):
    refs = block.get("operators") if block.get("kind") == "classify" else None
    if refs is None:
        ref = block.get("operator")
        return [] if ref is None else [ref]
    return list(refs) if isinstance(refs, list) else [refs]


_NUMERIC_PARAMS = ("n", "c", "n_nodes", "delta", "b", "rho", "K", "count", "h", "order_points", "R", "n_r",
                   "n_theta", "plateau", "r0", "r1", "u_lo", "u_hi", "oracle_tol", "cauchy_tol", "max_workers")
_PAIR_PARAMS = ("annulus", "d_range", "p1", "exponent_range")
_CHOICES = {
    "family": ("scherk", "annulus", "singular"),
    "oracle": ("annulus", "singular"),
    "mode": ("spike", "trace"),
    "distance": ("geodesic", "hyperplane"),
    "width_rule": ("horoball", "inverse"),
}
_DATA_KINDS = ("constant", "spike", "singular-trace")


def _is_number(value):
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _block_problems(where, kind, block):
    """Type and shape problems of a run block's parameters."""
    problems = []
    for key in _NUMERIC_PARAMS:
        if block.get(key) is not None and not _is_number(block[key]):
            problems.append(f"{where}: `{key}` must be a number (got {block[key]!r})")
    for key in _PAIR_PARAMS:
        value = block.get(key)
        if value is not None and not (isinstance(value, list) and len(value) == 2 and all(map(_is_number, value))):
            problems.append(f"{where}: `{key}` must be a pair of numbers (got {value!r})")
    for key, choices in _CHOICES.items():
        if key in block and block[key] not in choices:
            problems.append(f"{where}: `{key}` must be one of {', '.join(choices)} (got {block[key]!r})")
    if kind == "radial-bvp" and block.get("oracle") is None:
        for key in ("r0", "r1", "u_lo", "u_hi"):
            if key not in block:
                problems.append(f"{where}: radial-bvp without an oracle needs `{key}`")
    if kind == "removability-probe":
        seq = block.get("R_sequence")
        if seq is not None and not (isinstance(seq, list) and seq and all(map(_is_number, seq))
                                    and all(a < b for a, b in zip(seq, seq[1:]))):
            problems.append(f"{where}: `R_sequence` must be an increasing list of numbers (got {seq!r})")
        if not isinstance(block.get("grid", {}) or {}, dict):
            problems.append(f"{where}: `grid` must be a mapping")
    if kind == "disk-solve":
        data = block.get("data", {}) or {}
        if not isinstance(data, dict):
            problems.append(f"{where}: `data` must be a mapping")
        elif data.get("kind", "constant") not in _DATA_KINDS:
            problems.append(f"{where}: data `kind` must be one of {', '.join(_DATA_KINDS)} "
                            f"(got {data.get('kind')!r})")
    if kind == "barriers":
        for i, entry in enumerate(block.get("check_at", []) or []):
            if not (isinstance(entry, dict) and _is_number(entry.get("d")) and _is_number(entry.get("value"))):
                problems.append(f"{where}: check_at[{i}] needs numeric `d` and `value`")
    return problems


def parse_config(text, defaults=None):
    """
    Parse and validate an experiment config.

    Args:
        text (str): YAML text.
        defaults (dict): tolerance overrides applied under the config's own
            `tolerances`; defaults to the user defaults file.

    Returns:
        ExperimentConfig: with every default filled in.

    Raises:
        ParseError: the text is not valid YAML (with its line number).
        ConfigValidationError: every semantic problem found.
    """
    raw = _load_yaml(text)
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ParseError("a config must be a mapping of sections", line=1)
    raw = coerce_numbers(raw)
    problems = []

    unknown = set(raw) - {"seed", "output", "tolerances", "operators", "geometry", "runs"}
    for key in sorted(unknown):
        problems.append(f"unknown section `{key}`")

    tolerances = dict(DEFAULT_TOLERANCES)
    tolerances.update(user_defaults() if defaults is None else defaults)
    own = raw.get("tolerances") or {}
    if not isinstance(own, dict):
        problems.append("section `tolerances` must be a mapping")
        own = {}
    for key, value in own.items():
        if key not in DEFAULT_TOLERANCES:
            problems.append(f"tolerances: unknown tolerance `{key}`")
        elif not isinstance(value, (int, float)) or isinstance(value, bool) or not value > 0:
            problems.append(f"tolerances: `{key}` must be a positive number (got {value!r})")
        else:
            tolerances[key] = value

    raw_geometry = raw.get("geometry") or {}
    if not isinstance(raw_geometry, dict):
        problems.append("section `geometry` must be a mapping with `n` and `c`")
        raw_geometry = {}
    geometry = {"n": 2, "c": 1.0, **raw_geometry}
    n, c = geometry.get("n"), geometry.get("c")
    if not isinstance(n, (int, float)) or int(n) != n or n < 2:
        problems.append(f"geometry: `n` must be an integer >= 2 (got {n!r})")
    else:
        geometry["n"] = int(n)
    if not isinstance(c, (int, float)) or not c > 0:
        problems.append(f"geometry: `c` must be positive (got {c!r})")

    operators = {}
    raw_ops = raw.get("operators")
    if raw_ops is not None and not isinstance(raw_ops, dict):
        problems.append("section `operators` must map names to operator definitions")
        raw_ops = {}
    for name, body in (raw_ops or {}).items():
        if not isinstance(body, dict) or "kind" not in body:
            problems.append(f"operators.{name}: needs a `kind` ({', '.join(KINDS)})")
            continue
        params = {k: v for k, v in body.items() if k != "kind"}
        try:
            build_flux(body["kind"], params)
        except AsymlabError as e:
            problems.append(f"operators.{name}: {e}")
            continue
        operators[name] = OperatorConfig(str(name), body["kind"], params)

    runs = []
    raw_runs = raw.get("runs")
    if not raw_runs:
        problems.append("missing section `runs` (at least one run block)")
        raw_runs = []
    elif not isinstance(raw_runs, list):
        problems.append("section `runs` must be a list of run blocks")
        raw_runs = []
    for i, block in enumerate(raw_runs):
        where = f"runs[{i}]"
        if not isinstance(block, dict):
            problems.append(f"{where}: a run block must be a mapping")
            continue
        kind = block.get("kind")
        if kind not in RUN_KINDS:
            problems.append(f"{where}: `kind` must be exactly one of {', '.join(RUN_KINDS)} (got {kind!r})")
            continue
        refs = _operator_refs(block)
        if not refs:
            problems.append(f"{where}: {kind} needs an operator reference")
        if refs and raw_ops is None:
            problems.append(f"{where}: references operators but the config has no `operators` section")
        elif refs:
            for ref in refs:
                if ref not in (raw_ops or {}):
                    problems.append(f"{where}: unknown operator `{ref}`")
        problems.extend(_block_problems(where, kind, block))
        params = {k: v for k, v in block.items() if k not in ("kind", "name")}
        runs.append(RunBlock(kind, params, str(block.get("name", ""))))

    seed = raw.get("seed", 0)
    if not isinstance(seed, (int, float)) or int(seed) != seed:
        problems.append(f"`seed` must be an integer (got {seed!r})")
        seed = 0
    env_seed = os.environ.get("ASYMLAB_SEED")
    if env_seed is not None:
        try:
            seed = int(env_seed)
        except ValueError:
            problems.append(f"ASYMLAB_SEED must be an integer (got {env_seed!r})")

    if problems:
        raise ConfigValidationError(problems)
    return ExperimentConfig(runs=tuple(runs), operators=operators, tolerances=tolerances, geometry=geometry,
                            seed=int(seed), output=str(raw.get("output", "asymlab-out")))


def load_config(path, defaults=None):
    return parse_config(Path(path).read_text(encoding="utf-8"), defaults=defaults)
