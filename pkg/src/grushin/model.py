"""Problem declaration: dimensions, exponents, weights and hypothesis checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Mapping, NamedTuple

import numpy as np

from .errors import DomainError

WEIGHT_KINDS = ("constant", "polynomial", "piecewise-sign-changing", "tabulated")
REGIMES = ("subcritical", "critical")

# sample density used when checking sign hypotheses on the weights
_CHECK_NODES = 65


class Exponents(NamedTuple):
    Q: float
    crit: float


def derived_exponents(spec) -> Exponents:
    """Homogeneous dimension ``Q = n + (1 + lam) m`` and ``crit = 2Q / (Q - 2)``.

    ``spec`` is anything carrying ``n``, ``m`` and ``lam`` attributes.
    """
    Q = spec.n + (1.0 + spec.lam) * spec.m
    if Q <= 2:
        raise DomainError(f"critical exponent undefined (Q = {Q:g} <= 2)")
    return Exponents(Q, 2.0 * Q / (Q - 2.0))


@dataclass(frozen=True)
class WeightSpec:
    """A weight function g or h given as a closed-form or tabulated expression.

    Kinds and their ``params``:

    ``constant``
        ``value`` (default 1).
    ``polynomial``
        ``terms``: list of ``[coef, [k_1, ..., k_N]]`` giving
        ``sum coef * prod z_i**k_i`` with coordinates ordered x first, then y.
    ``piecewise-sign-changing``
        ``region`` (per-axis ``[lo, hi]``), ``inside`` and ``outside`` values.
    ``tabulated``
        ``axes`` (per-axis node coordinates) and ``values`` (nested lists);
        evaluation is a nearest-node lookup.
    """

    kind: str = "constant"
    params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in WEIGHT_KINDS:
            raise DomainError(f"unknown weight kind {self.kind!r}; expected one of {WEIGHT_KINDS}")

    @classmethod
    def constant(cls, value: float = 1.0) -> "WeightSpec":
        return cls("constant", {"value": float(value)})

    def __call__(self, points: np.ndarray) -> np.ndarray:
        """Evaluate at ``points`` of shape ``(..., N)``."""
        points = np.asarray(points, dtype=float)
        shape = points.shape[:-1]
        p = self.params
        if self.kind == "constant":
            return np.full(shape, float(p.get("value", 1.0)))
        if self.kind == "polynomial":
            out = np.zeros(shape)
            for coef, powers in p["terms"]:
                term = np.full(shape, float(coef))
                for i, k in enumerate(powers):
                    if k:
                        term = term * points[..., i] ** k
                out += term
            return out
        if self.kind == "piecewise-sign-changing":
            inside = np.ones(shape, dtype=bool)
            for i, (lo, hi) in enumerate(p["region"]):
                inside &= (points[..., i] >= lo) & (points[..., i] <= hi)
            return np.where(inside, float(p["inside"]), float(p["outside"]))
        # tabulated
        values = np.asarray(p["values"], dtype=float)
        index = []
        for i, axis in enumerate(p["axes"]):
            axis = np.asarray(axis, dtype=float)
            j = np.searchsorted(axis, points[..., i])
            j = np.clip(j, 1, len(axis) - 1)
            left = axis[j - 1]
            j = np.where(points[..., i] - left <= axis[j] - points[..., i], j - 1, j)
            index.append(j)
        return values[tuple(index)]

    def is_constant(self, value: float | None = None) -> bool:
        if self.kind != "constant":
            return False
        return value is None or float(self.params.get("value", 1.0)) == value

    def to_dict(self) -> dict:
        return {"kind": self.kind, **{k: _plain(v) for k, v in self.params.items()}}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any] | float | None) -> "WeightSpec":
        if data is None:
            return cls.constant(1.0)
        if isinstance(data, (int, float)):
            return cls.constant(data)
        data = dict(data)
        kind = data.pop("kind", "constant")
        return cls(kind, data)


@dataclass(frozen=True)
class ProblemSpec:
    """The continuous problem ``-Delta_lam u = mu g |u|^{r-1} u + h |u|^{s-1} u``.

    Construction only normalizes types; hypothesis checking is left to
    :func:`validate` so that invalid specs can still be reported on.
    ``s=None`` in the critical regime means ``s = crit - 1``.
    """

    n: int = 1
    m: int = 1
    lam: float = 1.0
    r: float = 0.5
    s: float | None = 3.0
    mu: float = 0.1
    box: tuple = ((-1.0, 1.0), (-1.0, 1.0))
    g_weight: WeightSpec = field(default_factory=WeightSpec.constant)
    h_weight: WeightSpec = field(default_factory=WeightSpec.constant)
    regime: str = "subcritical"
    q: float | None = None
    p: float | None = None
    ball_center: tuple | None = None
    ball_radius: float | None = None

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise DomainError(f"unknown regime {self.regime!r}")
        object.__setattr__(self, "box", tuple((float(lo), float(hi)) for lo, hi in self.box))
        if self.ball_center is not None:
            object.__setattr__(self, "ball_center", tuple(float(c) for c in self.ball_center))
        if self.s is None:
            if self.regime != "critical":
                raise DomainError("s may only be omitted in the critical regime")
            object.__setattr__(self, "s", derived_exponents(self).crit - 1.0)

    @property
    def dim(self) -> int:
        return self.n + self.m

    @property
    def Q(self) -> float:
        return derived_exponents(self).Q

    @property
    def crit(self) -> float:
        return derived_exponents(self).crit

    @property
    def q_exp(self) -> float:
        """Integrability exponent for g, defaulting to the middle of ``(r+1, crit)``."""
        if self.q is not None:
            return float(self.q)
        return 0.5 * (self.r + 1.0 + self.crit)

    @property
    def p_exp(self) -> float:
        """Integrability exponent for h; ``crit`` itself in the critical regime."""
        if self.p is not None:
            return float(self.p)
        if self.regime == "critical":
            return self.crit
        return 0.5 * (self.s + 1.0 + self.crit)

    @property
    def a(self) -> float:
        return self.q_exp / (self.q_exp - (self.r + 1.0))

    @property
    def b(self) -> float:
        gap = self.p_exp - (self.s + 1.0)
        return math.inf if gap <= 0 else self.p_exp / gap

    def with_params(self, **changes) -> "ProblemSpec":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        out = {
            "n": self.n,
            "m": self.m,
            "lambda": self.lam,
            "r": self.r,
            "s": self.s,
            "mu": self.mu,
            "box": [list(b) for b in self.box],
            "g_weight": self.g_weight.to_dict(),
            "h_weight": self.h_weight.to_dict(),
            "regime": self.regime,
            "q": self.q_exp,
            "p": self.p_exp,
        }
        if self.ball_center is not None:
            out["ball"] = {"center": list(self.ball_center), "radius": self.ball_radius}
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ProblemSpec":
        data = dict(data)
        known = {"n", "m", "lambda", "r", "s", "mu", "box", "g_weight", "h_weight",
                 "regime", "q", "p", "ball"}
        unknown = set(data) - known
        if unknown:
            raise DomainError(f"unknown problem keys: {sorted(unknown)}")
        kwargs: dict[str, Any] = {}
        for key in ("n", "m"):
            if key in data:
                kwargs[key] = int(data[key])
        if "lambda" in data:
            kwargs["lam"] = float(data["lambda"])
        for key in ("r", "mu", "q", "p"):
            if data.get(key) is not None:
                kwargs[key] = float(data[key])
        if "s" in data:
            kwargs["s"] = None if data["s"] is None else float(data["s"])
        if "box" in data:
            kwargs["box"] = tuple(tuple(b) for b in data["box"])
        if "regime" in data:
            kwargs["regime"] = data["regime"]
            if kwargs["regime"] == "critical" and "s" not in data:
                kwargs["s"] = None
        for key in ("g_weight", "h_weight"):
            if key in data:
                kwargs[key] = WeightSpec.from_dict(data[key])
        if data.get("ball"):
            kwargs["ball_center"] = tuple(data["ball"]["center"])
            kwargs["ball_radius"] = float(data["ball"]["radius"])
        return cls(**kwargs)


def benchmark_spec(mu: float = 0.1) -> ProblemSpec:
    """Default subcritical benchmark: n = m = 1, lam = 1, g = h = 1, r = 1/2, s = 3."""
    return ProblemSpec(mu=mu)


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[Check, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "checks": [{"name": c.name, "passed": c.passed, "detail": c.detail} for c in self.checks],
        }


def _sample_points(spec: ProblemSpec) -> np.ndarray:
    axes = [np.linspace(lo, hi, _CHECK_NODES) for lo, hi in spec.box]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack(mesh, axis=-1)


def ball_inside_box(spec: ProblemSpec, center, radius: float) -> bool:
    """Whether the closure of the gauge ball ``B_radius(center)`` lies inside the open box."""
    for i, (lo, hi) in enumerate(spec.box):
        # gauge balls are boxes of half-width radius in x, radius^(1+lam)/(1+lam) in y
        half = radius if i < spec.n else radius ** (1.0 + spec.lam) / (1.0 + spec.lam)
        if not (lo < center[i] - half and center[i] + half < hi):
            return False
    return True


def ball_misses_sigma(spec: ProblemSpec, center, radius: float) -> bool:
    """Whether the closed gauge ball stays away from the degeneracy set ``{x = 0}``."""
    return float(np.linalg.norm(np.asarray(center[: spec.n]))) > radius


def validate(spec: ProblemSpec) -> ValidationReport:
    """Check every structural hypothesis and report each one with its value."""
    checks: list[Check] = []
    add = checks.append

    add(Check("dimensions n, m >= 1", spec.n >= 1 and spec.m >= 1, f"n={spec.n}, m={spec.m}"))
    add(Check("lambda > 0", spec.lam > 0, f"lambda={spec.lam:g}"))
    add(Check("box has one interval per coordinate", len(spec.box) == spec.dim,
              f"{len(spec.box)} intervals for N={spec.dim}"))
    try:
        Q, crit = derived_exponents(spec)
    except DomainError as exc:
        add(Check("Q > 2", False, str(exc)))
        return ValidationReport(tuple(checks))
    add(Check("Q > 2", True, f"Q={Q:g}, 2*_lambda={crit:g}"))
    add(Check("0 <= r < 1", 0 <= spec.r < 1, f"r={spec.r:g}"))
    add(Check("s > 1", spec.s > 1, f"s={spec.s:g}"))
    add(Check("mu > 0", spec.mu > 0, f"mu={spec.mu:g}"))
    if spec.regime == "subcritical":
        ok = spec.s < crit - 1
        add(Check("h: s < 2*_lambda-1", ok,
                  "" if ok else f"s < 2*_lambda-1 violated ({spec.s:g} >= {crit - 1:g})"))
    else:
        ok = math.isclose(spec.s, crit - 1, rel_tol=1e-12, abs_tol=1e-12)
        add(Check("critical s = 2*_lambda-1", ok, f"s={spec.s:g}, 2*_lambda-1={crit - 1:g}"))

    if len(spec.box) == spec.dim:
        straddles = all(lo < 0 < hi for lo, hi in spec.box[: spec.n])
        add(Check("box meets the plane x = 0", straddles, f"x-intervals {list(spec.box[: spec.n])}"))

        q, p = spec.q_exp, spec.p_exp
        add(Check("g: q in (r+1, 2*_lambda)", spec.r + 1 < q < crit,
                  f"q={q:g}, a={spec.a:g}"))
        if spec.regime == "subcritical":
            add(Check("h: p in (s+1, 2*_lambda)", spec.s + 1 < p < crit,
                      f"p={p:g}, b={spec.b:g}"))

        pts = _sample_points(spec)
        g = spec.g_weight(pts)
        h = spec.h_weight(pts)
        add(Check("g: g+ not identically zero", bool(np.any(g > 0)), f"max g = {g.max():g}"))
        add(Check("h: h+ not identically zero", bool(np.any(h > 0)), f"max h = {h.max():g}"))
        if spec.r == 0:
            add(Check("g: r = 0 requires g >= 0", bool(np.all(g >= 0)),
                      f"g is non-negative required; min g = {g.min():g}"))
        if spec.regime == "critical":
            add(Check("critical regime requires g >= 0", bool(np.all(g >= 0)), f"min g = {g.min():g}"))
            add(Check("critical regime requires h = 1", bool(np.all(h == 1.0)),
                      f"h range [{h.min():g}, {h.max():g}]"))
            if spec.ball_center is None or spec.ball_radius is None:
                add(Check("positivity ball: rho-ball B_2R(z0) supplied", False, "no ball given"))
            else:
                c, R = spec.ball_center, spec.ball_radius
                inside = len(c) == spec.dim and R > 0 and ball_inside_box(spec, c, 2 * R)
                add(Check("positivity ball: B_2R(z0) inside the box", inside, f"z0={list(c)}, R={R:g}"))
                misses = len(c) == spec.dim and ball_misses_sigma(spec, c, 2 * R)
                add(Check("positivity ball: B_2R(z0) away from x = 0", misses, f"|x0|={np.linalg.norm(c[: spec.n]):g}, 2R={2 * R:g}"))
                add(Check("positivity ball: g bounded on B_R(z0)", bool(np.all(np.isfinite(g))), "closed-form weights are bounded"))
    return ValidationReport(tuple(checks))


def _plain(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    return value
