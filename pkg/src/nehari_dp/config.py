"""JSON run configuration: parsing, validation and serialisation."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields

from .errors import ConfigError, HypothesisViolation
from .fibering import Problem
from .mesh import build_interval_mesh, build_rect_mesh
from .orlicz import Exponents, ScalarField
from .solver import SolverOptions


@dataclass(frozen=True)
class DomainSpec:
    kind: str = "square"  # "square" or "interval"
    nx: int = 32
    ny: int = 32

    def build(self):
        if self.kind == "interval":
            return build_interval_mesh(self.nx)
        return build_rect_mesh(self.nx, self.ny)

    def to_dict(self) -> dict:
        if self.kind == "interval":
            return {"kind": "interval", "n": self.nx}
        return {"kind": "square", "nx": self.nx, "ny": self.ny}


@dataclass(frozen=True)
class RunConfig:
    domain: DomainSpec = field(default_factory=DomainSpec)
    exps: Exponents = field(default_factory=lambda: Exponents(1.8, 2.2, 0.5, 3.0))
    lam: float = 0.05
    mu: ScalarField = field(default_factory=lambda: ScalarField.affine(0.0, 1.0, 0.0))
    a: ScalarField = field(default_factory=lambda: ScalarField.constant(1.0))
    solver: SolverOptions = field(default_factory=SolverOptions)
    output: str = "out"

    def build_problem(self, lam: float | None = None) -> Problem:
        return Problem(self.exps, self.lam if lam is None else lam, self.mu, self.a, self.domain.build())

    def to_dict(self) -> dict:
        return {
            "problem": {
                "domain": self.domain.to_dict(),
                "exponents": {"p": self.exps.p, "q": self.exps.q, "gamma": self.exps.gamma, "r": self.exps.r},
                "lambda": self.lam,
                "mu": _field_to_dict(self.mu),
                "a": _field_to_dict(self.a),
            },
            "solver": asdict(self.solver),
            "output": self.output,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False)


def _field_to_dict(f: ScalarField) -> dict:
    if f.kind == "constant":
        return {"kind": "constant", "value": f.coeffs[0]}
    if f.kind == "affine":
        c = list(f.coeffs) + [0.0] * (3 - len(f.coeffs))
        return {"kind": "affine", "c0": c[0], "c1": c[1], "c2": c[2]}
    return {"kind": "nodal", "values": list(f.coeffs)}


def _take(obj, allowed, where, required=()):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected an object")
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")
    missing = [k for k in required if k not in obj]
    if missing:
        raise ConfigError(f"{where}: missing key(s) {', '.join(missing)}")
    return obj


def _num(obj, key, where, default=None, kind=float):
    if key not in obj:
        if default is None:
            raise ConfigError(f"{where}.{key}: missing")
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}.{key}: expected a number, got {v!r}")
    if kind is int:
        if int(v) != v:
            raise ConfigError(f"{where}.{key}: expected an integer, got {v!r}")
        return int(v)
    return float(v)


def _parse_field(obj, where) -> ScalarField:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ConfigError(f"{where}: expected an object with a 'kind'")
    kind = obj["kind"]
    if kind == "constant":
        _take(obj, {"kind", "value"}, where, ["value"])
        return ScalarField.constant(_num(obj, "value", where))
    if kind == "affine":
        _take(obj, {"kind", "c0", "c1", "c2"}, where)
        return ScalarField.affine(*(_num(obj, k, where, 0.0) for k in ("c0", "c1", "c2")))
    if kind == "nodal":
        _take(obj, {"kind", "values"}, where, ["values"])
        vals = obj["values"]
        if not isinstance(vals, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in vals):
            raise ConfigError(f"{where}.values: expected a list of numbers")
        return ScalarField.nodal(vals)
    raise ConfigError(f"{where}.kind: unknown coefficient kind {kind!r}")


def _parse_domain(obj) -> DomainSpec:
    where = "problem.domain"
    kind = obj.get("kind", "square") if isinstance(obj, dict) else None
    if kind == "interval":
        _take(obj, {"kind", "n"}, where)
        return DomainSpec("interval", _num(obj, "n", where, 64, int), 0)
    if kind == "square":
        _take(obj, {"kind", "nx", "ny"}, where)
        return DomainSpec("square", _num(obj, "nx", where, 32, int), _num(obj, "ny", where, 32, int))
    raise ConfigError(f"{where}.kind: expected 'square' or 'interval', got {kind!r}")


def _parse_solver(obj) -> SolverOptions:
    where = "solver"
    names = {f.name: f for f in fields(SolverOptions)}
    _take(obj, names, where)
    kwargs = {}
    for k, v in obj.items():
        if k == "eps_singular" and v is None:
            kwargs[k] = None
            continue
        kind = int if names[k].type in ("int", int) else float
        kwargs[k] = _num(obj, k, where, kind=kind)
    try:
        return SolverOptions(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def parse_config(text: str) -> RunConfig:
    """Parse and validate a JSON run configuration.

    Raises :class:`ConfigError` for malformed text (with location) and
    :class:`HypothesisViolation` naming any failed structural inequality.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    _take(raw, {"problem", "solver", "output"}, "<root>")
    prob = _take(raw.get("problem", {}), {"domain", "exponents", "lambda", "mu", "a"}, "problem")
    domain = _parse_domain(prob.get("domain", {"kind": "square"}))
    ex = _take(prob.get("exponents", {}), {"p", "q", "gamma", "r"}, "problem.exponents")
    base = DEFAULT_CONFIG.exps
    exps = Exponents(*(_num(ex, k, "problem.exponents", getattr(base, k)) for k in ("p", "q", "gamma", "r")))
    lam = _num(prob, "lambda", "problem", DEFAULT_CONFIG.lam)
    if not lam > 0:
        raise HypothesisViolation("λ>0", f"lambda={lam}")
    # omitted entries fall back to the default problem
    mu = _parse_field(prob.get("mu", _field_to_dict(DEFAULT_CONFIG.mu)), "problem.mu")
    a = _parse_field(prob.get("a", _field_to_dict(DEFAULT_CONFIG.a)), "problem.a")
    output = raw.get("output", "out")
    if not isinstance(output, str):
        raise ConfigError("output: expected a string")
    cfg = RunConfig(domain, exps, lam, mu, a, _parse_solver(raw.get("solver", {})), output)
    try:
        cfg.build_problem()
    except HypothesisViolation:
        raise
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"problem: {exc}") from None
    return cfg


DEFAULT_CONFIG = RunConfig()


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())

