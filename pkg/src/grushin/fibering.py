"""One-dimensional analysis of the fibering map ``t -> I_mu(t u)``.

Along a ray the energy only depends on three numbers, ``A = ||u||^2``,
``B = int g |u|^{r+1}`` and ``C = int h |u|^{s+1}``:

    F(t) = t^2 A / 2 - mu t^{r+1} B / (r+1) - t^{s+1} C / (s+1)
    F'(t) = t^r (G(t) - mu B),   G(t) = t^{1-r} A - t^{s-r} C

so the Nehari projections are the roots of ``G(t) = mu B``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import BranchEmptyError, DomainError, ThresholdError

_RTOL = 4 * np.finfo(float).eps


@dataclass(frozen=True)
class RayData:
    A: float
    B: float
    C: float
    r: float
    s: float
    mu: float

    def __post_init__(self):
        if not self.A > 0:
            raise DomainError("ray of the zero field: ||u||_lam^2 must be positive")

    @classmethod
    def from_field(cls, functional, u) -> "RayData":
        ray = functional.ray_integrals(u)
        spec = functional.spec
        return cls(ray.A, ray.B, ray.C, spec.r, spec.s, spec.mu)

    def F(self, t):
        t = np.asarray(t, dtype=float)
        r, s = self.r, self.s
        return 0.5 * t ** 2 * self.A - self.mu * t ** (r + 1) * self.B / (r + 1) - t ** (s + 1) * self.C / (s + 1)

    def dF(self, t):
        t = np.asarray(t, dtype=float)
        return t * self.A - self.mu * t ** self.r * self.B - t ** self.s * self.C

    def d2F(self, t):
        t = np.asarray(t, dtype=float)
        r, s = self.r, self.s
        return self.A - self.mu * r * t ** (r - 1) * self.B - s * t ** (s - 1) * self.C

    def G(self, t):
        return g_function(self, t)


@dataclass(frozen=True)
class FiberingReport:
    t0: float | None
    G_at_t0: float | None
    t_plus: float | None = None
    t_minus: float | None = None
    F_plus: float | None = None
    F_minus: float | None = None
    d2F_plus: float | None = None
    d2F_minus: float | None = None
    case: str = "b"
    branches: dict = field(default_factory=dict)

    def root(self, branch: str) -> float:
        t = self.t_plus if branch == "plus" else self.t_minus
        if t is None:
            raise BranchEmptyError(f"no t_{branch} root in case ({self.case})")
        return t

    def to_dict(self) -> dict:
        return {
            "t0": self.t0,
            "G_at_t0": self.G_at_t0,
            "t_plus": self.t_plus,
            "t_minus": self.t_minus,
            "F_plus": self.F_plus,
            "F_minus": self.F_minus,
            "d2F_plus": self.d2F_plus,
            "d2F_minus": self.d2F_minus,
            "case": self.case,
            "branches": dict(self.branches),
        }


def g_function(ray: RayData, t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("G is defined for t >= 0")
    return t ** (1 - ray.r) * ray.A - t ** (ray.s - ray.r) * ray.C


def t_zero(ray: RayData) -> float:
    """Unique maximizer of G, ``((1-r) A / ((s-r) C))^{1/(s-1)}``."""
    if ray.C <= 0:
        raise DomainError("no interior maximum: G monotone (int h|u|^{s+1} <= 0)")
    return float(((1 - ray.r) * ray.A / ((ray.s - ray.r) * ray.C)) ** (1.0 / (ray.s - 1)))


def sup_g(ray: RayData) -> float:
    """``max_t G(t)``, evaluated by substituting the maximizer into G."""
    return float(g_function(ray, t_zero(ray)))


def sup_g_closed_form(ray: RayData) -> float:
    """Simplified closed form of ``G(t0)``, kept separate as a cross-check."""
    r, s = ray.r, ray.s
    return float(((1 - r) / (s - r)) ** ((1 - r) / (s - 1)) * ((s - 1) / (s - r))
                 * ray.A ** ((s - r) / (s - 1)) / ray.C ** ((1 - r) / (s - 1)))


def _solve(func, lo: float, hi: float) -> float:
    return float(brentq(func, lo, hi, xtol=1e-300, rtol=_RTOL, maxiter=500))


def find_roots(ray: RayData) -> FiberingReport:
    """Solve ``G(t) = mu B`` on both sides of ``t0``.

    ``B <= 0`` gives the single root ``t_minus > t0`` (case a); ``0 < mu B <
    G(t0)`` gives ``t_plus < t0 < t_minus`` (case b).
    """
    t0 = t_zero(ray)
    gmax = float(g_function(ray, t0))
    level = ray.mu * ray.B
    if ray.B > 0 and level >= gmax:
        raise ThresholdError("mu above fibering threshold for this ray "
                             f"(mu*B = {level:.6g} >= sup G = {gmax:.6g})")

    def shifted(t):
        return float(g_function(ray, t)) - level

    hi = 2.0 * t0
    while shifted(hi) >= 0:
        hi *= 2.0
    t_minus = _solve(shifted, t0, hi)
    out = dict(t0=t0, G_at_t0=gmax, t_minus=t_minus, F_minus=float(ray.F(t_minus)),
               d2F_minus=float(ray.d2F(t_minus)))
    branches = {"minus": "minus"}
    if ray.B > 0:
        t_plus = _solve(shifted, 0.0, t0)
        out.update(t_plus=t_plus, F_plus=float(ray.F(t_plus)), d2F_plus=float(ray.d2F(t_plus)))
        branches["plus"] = "plus"
        case = "b"
    else:
        case = "a"
    return FiberingReport(case=case, branches=branches, **out)


def mu_zero(spec, Sq: float, Sp: float, g_norm: float, h_norm: float) -> float:
    """Fibering threshold below which every admissible ray has both roots.

    ``g_norm`` is ``||g||_a`` and ``h_norm`` is ``||h||_b``; ``Sq`` and ``Sp``
    are the embedding constants in ``||u||_q <= S_q ||u||_lam``.
    """
    if min(Sq, Sp, g_norm, h_norm) <= 0:
        raise DomainError("embedding constants and weight norms must be positive")
    r, s = spec.r, spec.s
    return float((s - 1) / (s - r) * ((1 - r) / (s - r)) ** ((1 - r) / (s - 1))
                 * (Sp ** (1 + s) * h_norm) ** (-(1 - r) / (s - 1)) / (Sq ** (1 + r) * g_norm))


def scale_to_nehari(functional, u, branch: str) -> np.ndarray:
    """Return ``t u`` with ``t`` the fibering root of the requested branch."""
    if branch not in ("plus", "minus"):
        raise DomainError(f"branch must be 'plus' or 'minus', got {branch!r}")
    ray = RayData.from_field(functional, u)
    if ray.C <= 0:
        raise BranchEmptyError("branch empty along ray: int h|u|^{s+1} <= 0")
    report = find_roots(ray)
    return report.root(branch) * np.asarray(u, dtype=float)
