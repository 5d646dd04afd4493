"""Critical-exponent pipeline: bubbles, thresholds, local minimizer, mountain pass."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import ConvergenceError, DomainError, ThresholdError
from .functional import EnergyFunctional
from .grid import build_cutoff, dilate, smoothstep5
from .nehari_solver import SolveResult
from .operator import lp_norm
from .reference import ReferenceProfile, reference_profile
from .sobolev import estimate_sobolev_constants

logger = logging.getLogger(__name__)

DEFAULT_EPS = (0.2, 0.1, 0.05, 0.025)
MIN_NODES_ACROSS = 8

__all__ = [
    "AsymptoticsTable", "BubbleFamily", "CriticalThresholds", "GapRow", "GapTable", "MountainPassResult",
    "asymptotics_experiment", "build_bubble_family", "compute_thresholds", "critical_constants",
    "default_bubble_placement", "estimate_sobolev_constants", "floor_check", "local_minimize_in_ball",
    "mountain_level_1d", "mountain_pass", "verify_energy_gap",
]


# ---------------------------------------------------------------- bubbles

@dataclass
class BubbleFamily:
    """Cut-off, dilated copies of the reference profile sampled on a grid.

    ``eps`` lists the scales resolved on the grid; ``requested`` keeps the
    full list, which the dilated-coordinate asymptotics still use.
    """

    profile: ReferenceProfile
    center: tuple
    R: float
    cutoff: np.ndarray
    requested: tuple
    eps: tuple
    u: dict
    w: dict
    skipped: tuple = ()

    def nodes_across(self, grid, eps: float) -> np.ndarray:
        return resolution(self.profile, grid, eps)


def default_bubble_placement(spec) -> tuple[tuple, float]:
    """Center on ``x = 0`` at the middle of the y range; radius 90% of the largest fit."""
    k = 1.0 + spec.lam
    y_mid = [0.5 * (lo + hi) for lo, hi in spec.box[spec.n:]]
    center = (0.0,) * spec.n + tuple(y_mid)
    limits = []
    for i, (lo, hi) in enumerate(spec.box):
        half = min(center[i] - lo, hi - center[i])
        limits.append(half / 2.0 if i < spec.n else (k * half) ** (1.0 / k) / 2.0)
    return center, 0.9 * min(limits)


def resolution(profile: ReferenceProfile, grid, eps: float) -> np.ndarray:
    """Nodes across the half-height width of ``v_eps`` along each axis."""
    widths = profile.half_max_widths()
    scale = np.array([eps if i < grid.n else eps ** (1.0 + profile.lam) for i in range(grid.dim)])
    return widths * scale / grid.spacing


def _check_center(spec, center):
    if np.linalg.norm(np.asarray(center[: spec.n])) > 0:
        raise DomainError("bubble center must lie on x = 0, where dilations about it are symmetries")


def sample_bubble(profile: ReferenceProfile, grid, center, eps: float) -> np.ndarray:
    """``v_eps(z) = eps^{(2-Q)/2} v(delta_{1/eps}(z - z0))`` at interior nodes."""
    xi = dilate(grid.points - np.asarray(center, dtype=float), 1.0 / eps, profile.lam, grid.n)
    return eps ** ((2.0 - profile.Q) / 2.0) * profile(xi)


def build_bubble_family(spec, op, center=None, R=None, eps_list=DEFAULT_EPS, profile=None,
                        strict: bool = False, min_nodes: float = MIN_NODES_ACROSS) -> BubbleFamily:
    """Sample ``u_eps = phi v_eps`` and ``w_eps = u_eps / ||u_eps||_crit`` for each resolved eps.

    Scales with fewer than ``min_nodes`` nodes across the half-height width
    along some axis are skipped, or rejected when ``strict``.
    """
    grid = op.grid
    if center is None or R is None:
        c0, r0 = default_bubble_placement(spec)
        center = c0 if center is None else center
        R = r0 if R is None else R
    center = tuple(float(c) for c in center)
    _check_center(spec, center)
    if profile is None:
        profile = reference_profile(spec.n, spec.m, spec.lam)
    phi = build_cutoff(grid, center, R, spec.lam, allow_sigma=True)
    eps_list = tuple(sorted((float(e) for e in eps_list), reverse=True))
    if any(e <= 0 for e in eps_list):
        raise DomainError("epsilon values must be positive")
    kept, skipped, u, w = [], [], {}, {}
    for eps in eps_list:
        across = resolution(profile, grid, eps)
        if across.min() < min_nodes:
            if strict:
                raise DomainError(f"epsilon under-resolved: eps={eps:g} has {across.min():.1f} nodes "
                                  f"across its half-height width (need {min_nodes:g})")
            skipped.append(eps)
            continue
        ue = phi * sample_bubble(profile, grid, center, eps)
        kept.append(eps)
        u[eps] = ue
        w[eps] = ue / lp_norm(grid, ue, spec.crit)
    if not kept:
        raise DomainError(f"epsilon under-resolved: none of {eps_list} is resolved on this grid")
    return BubbleFamily(profile, center, float(R), phi, eps_list, tuple(kept), u, w, tuple(skipped))


# ---------------------------------------------------------------- asymptotics

@dataclass
class SlopeFit:
    quantity: str
    observed: float
    predicted: float
    tolerance: float

    @property
    def rel_error(self) -> float:
        return abs(self.observed - self.predicted) / abs(self.predicted)

    @property
    def ok(self) -> bool:
        return self.rel_error <= self.tolerance

    def to_dict(self) -> dict:
        return {**asdict(self), "rel_error": self.rel_error, "ok": self.ok}


@dataclass
class AsymptoticsTable:
    eps: tuple
    gammas: tuple
    rows: list
    fits: list
    reference: dict

    def fit(self, quantity: str) -> SlopeFit:
        for f in self.fits:
            if f.quantity == quantity:
                return f
        raise KeyError(quantity)

    def to_dict(self) -> dict:
        return {"eps": list(self.eps), "gammas": list(self.gammas), "rows": self.rows,
                "fits": [f.to_dict() for f in self.fits], "reference": self.reference}


def asymptotics_experiment(family: BubbleFamily, gammas=(4.5, 5.0), eps_list=None,
                           slope_tol: float = 0.15, deviation_tol: float = 0.25) -> AsymptoticsTable:
    """Integrals of ``u_eps`` versus eps, fitted on log-log axes.

    The integrals are evaluated on the reference grid after the change of
    variables ``z = z0 + delta_eps(xi)``, where ``u_eps`` becomes
    ``phi(z0 + delta_eps xi) v(xi)`` times a power of eps; this keeps every
    scale equally resolved.
    """
    prof = family.profile
    space = prof.space
    Q, crit = prof.Q, prof.crit
    eps_list = tuple(family.requested if eps_list is None else eps_list)
    if len(eps_list) < 4:
        raise DomainError("need at least four epsilon values")
    gammas = tuple(float(g) for g in gammas)
    for g in gammas:
        if not crit / 2 < g < crit:
            raise DomainError(f"gamma must lie in ({crit / 2:g}, {crit:g}), got {g:g}")
    rho = prof.gauge()
    v = prof.values
    dir_inf = space.energy(v)
    crit_inf = space.power_integral(v, crit)

    rows = []
    for eps in eps_list:
        psi = smoothstep5((eps * rho - family.R) / family.R) * v
        row = {
            "eps": eps,
            "dirichlet": space.energy(psi),
            "critical": space.power_integral(psi, crit),
            "l2": eps ** 2 * space.power_integral(psi, 2.0),
        }
        for g in gammas:
            row[f"gamma_{g:g}"] = eps ** (Q - g * (Q - 2.0) / 2.0) * space.power_integral(psi, g)
        row["dirichlet_excess"] = row["dirichlet"] - dir_inf
        row["critical_deficit"] = crit_inf - row["critical"]
        rows.append(row)

    log_eps = np.log(np.array(eps_list))

    def slope(key):
        vals = np.abs(np.array([r[key] for r in rows]))
        return float(np.polyfit(log_eps, np.log(vals), 1)[0])

    l2_pred = Q - 2.0 if Q < 4 else 2.0
    fits = [SlopeFit(f"gamma_{g:g}", slope(f"gamma_{g:g}"), Q - g * (Q - 2.0) / 2.0, slope_tol) for g in gammas]
    fits.append(SlopeFit("critical_deficit", slope("critical_deficit"), Q, deviation_tol))
    fits.append(SlopeFit("dirichlet_excess", slope("dirichlet_excess"), Q - 2.0, deviation_tol))
    fits.append(SlopeFit("l2", slope("l2"), l2_pred, slope_tol))
    reference = {"dirichlet": dir_inf, "critical": crit_inf, "quotient": prof.quotient}
    return AsymptoticsTable(eps_list, gammas, rows, fits, reference)


# ---------------------------------------------------------------- thresholds

@dataclass(frozen=True)
class CriticalThresholds:
    """Radius ``delta`` of the ball, the bound ``mu*`` and the compactness level.

    ``alpha_delta`` is ``delta^2/4 - S_p^{s+1} ||h||_b delta^crit / crit``,
    positive by the choice of ``delta``.  ``c_tilde_hat`` stays None until a
    negative critical level ``beta`` is supplied through :meth:`with_level`;
    it is certified only over the critical points actually computed.
    """

    delta: float
    delta_root: float
    mu_star: float
    S_lambda_hat: float
    alpha_delta: float
    Sq: float
    Sp: float
    g_norm: float
    h_norm: float
    Q: float
    c_tilde_hat: float | None = None

    @property
    def compact_level(self) -> float:
        """``S^{Q/2} / Q``, the energy a single bubble carries."""
        return self.S_lambda_hat ** (self.Q / 2.0) / self.Q

    def with_level(self, beta: float) -> "CriticalThresholds":
        return replace(self, c_tilde_hat=float(beta) + self.compact_level)

    def to_dict(self) -> dict:
        return asdict(self)


def critical_constants(spec, op, **kwargs) -> dict:
    """Estimated ``S_q`` and ``S_crit`` on the grid, keyed by exponent."""
    return estimate_sobolev_constants(op, (spec.q_exp, spec.crit), **kwargs)


def compute_thresholds(spec, op, S_map: dict) -> CriticalThresholds:
    """``delta`` is half the positive root of ``delta/4 = S^{s+1}||h|| delta^{crit-1}/crit``."""
    if spec.regime != "critical":
        raise DomainError("compute_thresholds expects a critical problem")
    grid = op.grid
    q, crit, r, s = spec.q_exp, spec.crit, spec.r, spec.s
    try:
        Sq, Sp = float(S_map[q]), float(S_map[crit])
    except KeyError as exc:
        raise DomainError(f"S_map lacks exponent {exc.args[0]}") from None
    g = grid.sample(spec.g_weight)
    h = grid.sample(spec.h_weight)
    g_norm = lp_norm(grid, g, spec.a)
    h_norm = lp_norm(grid, h, spec.b)
    if min(Sq, Sp, g_norm, h_norm) <= 0 or not np.isfinite([Sq, Sp, g_norm, h_norm]).all():
        raise DomainError("degenerate norms: embedding constants and weight norms must be positive")
    coef = Sp ** (s + 1.0) * h_norm
    delta_root = (crit / (4.0 * coef)) ** (1.0 / (crit - 2.0))
    delta = 0.5 * delta_root
    alpha = delta ** 2 / 4.0 - coef * delta ** crit / crit
    mu_star = (1.0 + r) * delta ** (1.0 - r) / (8.0 * g_norm * Sq ** (1.0 + r))
    return CriticalThresholds(delta, delta_root, mu_star, Sp ** -2.0, alpha, Sq, Sp, g_norm, h_norm, spec.Q)


def floor_check(functional: EnergyFunctional, thr: CriticalThresholds, samples: int = 100,
                seed: int = 0) -> dict:
    """Sample random fields on the sphere ``||u|| = delta`` and on random radii.

    Returns the smallest slack of ``I(u) >= delta^2/8`` on the sphere and of
    the lower bound built from the embedding constants at random radii.
    """
    op = functional.op
    spec = functional.spec
    rng = np.random.default_rng(seed)
    crit, r = spec.crit, spec.r
    floor_slack = np.inf
    chain_slack = np.inf
    for _ in range(samples):
        u = op.solve(rng.standard_normal(op.size))
        if rng.random() < 0.5:
            u = np.abs(u)
        u /= np.sqrt(op.energy(u))
        floor_slack = min(floor_slack, functional.value(thr.delta * u) - thr.delta ** 2 / 8.0)
        t = thr.delta * 10.0 ** rng.uniform(-2, 0.5)
        bound = (0.5 * t ** 2 - functional.mu * thr.Sq ** (1 + r) * thr.g_norm * t ** (1 + r) / (1 + r)
                 - thr.Sp ** crit * thr.h_norm * t ** crit / crit)
        chain_slack = min(chain_slack, functional.value(t * u) - bound)
    return {"floor_slack": float(floor_slack), "chain_slack": float(chain_slack), "samples": samples}


# ---------------------------------------------------------------- local minimizer

def _positive_start(functional: EnergyFunctional) -> np.ndarray:
    op = functional.op
    mask = (functional.g > 0).astype(float)
    u = op.solve(op.grid.cell_volume * mask)
    return u / np.sqrt(op.energy(u))


def local_minimize_in_ball(functional: EnergyFunctional, thr: CriticalThresholds, tol: float = 1e-8,
                           max_iter: int = 5000, start_fraction: float = 1e-3,
                           armijo: float = 1e-4) -> SolveResult:
    """Minimize the critical functional over ``||u||_lam <= delta``.

    Sobolev-gradient steps that leave the ball are pulled back radially to
    ``0.99 delta``; the start ``t u0`` has ``u0 >= 0`` and small ``t``.
    """
    if functional.mu >= thr.mu_star:
        raise ThresholdError(f"mu above threshold (mu = {functional.mu:.6g} >= mu* = {thr.mu_star:.6g})")
    op = functional.op
    radius = 0.99 * thr.delta
    u = start_fraction * thr.delta * _positive_start(functional)
    value = functional.value(u)
    grad = functional.gradient(u)
    res = functional.residual_norm(u, grad)
    trace = [(value, res, functional.breakdown(u).tau)]
    step = 1.0
    it = 0
    while it < max_iter and res > tol:
        it += 1
        while True:
            cand = u - step * grad
            norm = np.sqrt(op.energy(cand))
            if norm > radius:
                cand *= radius / norm
            cand_value = functional.value(cand)
            if cand_value <= value - armijo * step * res * res or step < 1e-12:
                break
            step *= 0.5
        u, value = cand, cand_value
        grad = functional.gradient(u)
        res = functional.residual_norm(u, grad)
        trace.append((value, res, functional.breakdown(u).tau))
        step = min(1.0, 2.0 * step)
    result = SolveResult(u, value, res, functional.classify(u) if np.any(u) else None, it, trace, 0, "ball")
    if not value < 0:
        raise ConvergenceError("no negative-energy minimizer found", result)
    if res > tol:
        raise ConvergenceError(f"iteration cap reached with residual {res:.3e} > tol {tol:.1e}", result)
    if not np.sqrt(op.energy(u)) < thr.delta:
        raise ConvergenceError("local minimizer reached the boundary of the ball", result)
    return result


# ---------------------------------------------------------------- mountain pass

@dataclass
class MountainPassResult:
    solve: SolveResult
    eps: float
    T: float
    path_t: np.ndarray
    path_energy: np.ndarray
    flags: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"solve": self.solve.to_dict(), "eps": self.eps, "T": self.T, "flags": list(self.flags)}


class _Ray:
    """The segment ``u_mu + theta v`` and its energy maximum."""

    def __init__(self, functional, base, base_energy, direction, points):
        self.f = functional
        self.base = base
        self.base_energy = base_energy
        self.v = direction
        self.points = points

    def energy(self, theta):
        return self.f.value(self.base + theta * self.v)

    def far_end(self, start):
        T = start
        while self.energy(T) >= self.base_energy:
            T *= 1.5
            if T > 1e8:
                raise ConvergenceError("path energy never drops below the base level")
        return T

    def maximum(self, start):
        T = self.far_end(start)
        thetas = np.linspace(0.0, T, self.points)
        vals = np.array([self.energy(t) for t in thetas])
        k = int(np.argmax(vals))
        if k == 0 or vals[k] - max(vals[0], vals[-1]) <= 1e-12 * max(1.0, abs(vals[k])):
            raise ConvergenceError("no pass detected along the path")
        lo, hi = thetas[k - 1], thetas[min(k + 1, self.points - 1)]
        opt = minimize_scalar(lambda t: -self.energy(t), bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-12 * T})
        return float(opt.x), float(-opt.fun), T, thetas, vals


def mountain_pass(functional: EnergyFunctional, u_mu, family: BubbleFamily, thr: CriticalThresholds,
                  eps: float | None = None, points: int = 64, tol: float = 1e-6, max_iter: int = 500,
                  armijo: float = 1e-4, gap_certified: bool | None = None) -> MountainPassResult:
    """Mountain-pass critical point between ``u_mu`` and ``u_mu + T w_eps``.

    The segment path from ``u_mu`` in direction ``v`` (unit in ``||.||_lam``)
    is sampled at ``points`` nodes and its maximum refined by a bounded
    scalar search.  The path is pushed down by moving ``v`` along the
    tangential part of the Sobolev gradient at the maximum, with Armijo
    control of the maximal energy.  The far endpoint is re-pinned each time
    as the first sampled point whose energy lies below ``I(u_mu)``.
    """
    if points < 64:
        raise DomainError("the path needs at least 64 points")
    op = functional.op
    eps = min(family.eps) if eps is None else float(eps)
    if eps not in family.w:
        raise DomainError(f"eps={eps:g} is not a resolved member of the family")
    u_mu = np.asarray(u_mu, dtype=float)
    base_energy = functional.value(u_mu)
    w = family.w[eps]
    flags = []
    if gap_certified is False:
        flags.append("energy gap not certified for any resolved epsilon")

    T = 1.0
    while not (functional.value(u_mu + T * w) < base_energy and np.sqrt(op.energy(u_mu + T * w)) > thr.delta):
        T *= 1.5
        if T > 1e8:
            raise ConvergenceError("no far endpoint below the base energy")
    norm_w = np.sqrt(op.energy(w))
    ray = _Ray(functional, u_mu, base_energy, w / norm_w, points)
    s, J, Tr, thetas, vals = ray.maximum(T * norm_w)
    trace = [(J, np.nan, np.nan)]
    step = 1.0
    it = 0
    while True:
        p = u_mu + s * ray.v
        grad = functional.gradient(p)
        res = functional.residual_norm(p, grad)
        trace[-1] = (J, res, functional.breakdown(p).tau)
        if res < tol or it >= max_iter:
            break
        it += 1
        tangential = grad - op.inner(grad, ray.v) * ray.v
        slope = op.energy(tangential)
        step = min(1.0, 2.0 * step)
        while True:
            v_new = ray.v - (step / s) * tangential
            v_new /= np.sqrt(op.energy(v_new))
            cand = _Ray(functional, u_mu, base_energy, v_new, points)
            try:
                out = cand.maximum(Tr)
            except ConvergenceError:
                out = None
            if out is not None and out[1] <= J - armijo * step * slope:
                break
            step *= 0.5
            if step < 1e-12:
                out = None
                break
        if out is None:
            break
        ray = cand
        s, J, Tr, thetas, vals = out
        trace.append((J, np.nan, np.nan))

    u_t = u_mu + s * ray.v
    result = SolveResult(u_t, functional.value(u_t), res, functional.classify(u_t), it, trace, 0, "mountain-pass")
    mp = MountainPassResult(result, eps, Tr, thetas, vals, flags)
    if res > tol:
        raise ConvergenceError(f"iteration cap reached with residual {res:.3e} > tol {tol:.1e}", mp)
    return mp


# ---------------------------------------------------------------- energy gap

@dataclass
class GapRow:
    eps: float
    t_max: float
    max_energy: float
    bound: float
    margin: float

    @property
    def holds(self) -> bool:
        return self.margin > 0

    def to_dict(self) -> dict:
        return {**asdict(self), "holds": self.holds}


@dataclass
class GapTable:
    """``margin = bound - max_t I(u_mu + t w_eps)``; positive means the strict inequality holds."""

    rows: list
    base_energy: float
    bound: float

    @property
    def holding(self) -> list:
        return [r.eps for r in self.rows if r.holds]

    def smallest_hold(self, count: int = 2) -> bool:
        rows = sorted(self.rows, key=lambda r: r.eps)[:count]
        return len(rows) == count and all(r.holds for r in rows)

    @property
    def trend_improves(self) -> bool:
        margins = [r.margin for r in sorted(self.rows, key=lambda r: -r.eps)]
        return all(b >= a for a, b in zip(margins, margins[1:]))

    @property
    def t_bracket(self) -> tuple:
        ts = [r.t_max for r in self.rows]
        return (min(ts), max(ts))

    def to_dict(self) -> dict:
        return {"rows": [r.to_dict() for r in self.rows], "base_energy": self.base_energy, "bound": self.bound,
                "holding": self.holding, "trend_improves": self.trend_improves, "t_bracket": list(self.t_bracket)}


def golden_max(func, ts, vals) -> tuple[float, float]:
    """Refine the best sample of ``func`` on the grid ``ts`` by golden-section search."""
    k = int(np.argmax(vals))
    if k == 0 or k == len(ts) - 1:
        return float(ts[k]), float(vals[k])
    opt = minimize_scalar(lambda t: -func(t), bracket=(ts[k - 1], ts[k], ts[k + 1]), method="golden", tol=1e-10)
    if -opt.fun < vals[k]:
        return float(ts[k]), float(vals[k])
    return float(opt.x), float(-opt.fun)


def _ray_max(functional, base, w, base_energy, samples):
    def energy(t):
        return functional.value(base + t * w)

    T = 1.0
    while energy(T) >= base_energy:
        T *= 1.5
    ts = np.linspace(0.0, T, samples)
    return golden_max(energy, ts, np.array([energy(t) for t in ts]))


def verify_energy_gap(functional: EnergyFunctional, u_mu, family: BubbleFamily, S_hat: float,
                   samples: int = 400, n_jobs: int = 1) -> GapTable:
    """``max_t I(u_mu + t w_eps)`` against ``I(u_mu) + S^{Q/2}/Q`` for every resolved eps."""
    u_mu = np.asarray(u_mu, dtype=float)
    base = functional.value(u_mu)
    Q = functional.spec.Q
    bound = base + S_hat ** (Q / 2.0) / Q

    def row(eps):
        t, e = _ray_max(functional, u_mu, family.w[eps], base, samples)
        return GapRow(eps, t, e, bound, bound - e)

    with ThreadPoolExecutor(max_workers=max(1, n_jobs)) as pool:
        rows = list(pool.map(row, family.eps))
    return GapTable(rows, base, bound)


def mountain_level_1d(S: float, Q: float, samples: int = 201) -> tuple[float, float]:
    """Golden-section maximum of ``S t^2/2 - t^crit/crit`` and its closed form ``S^{Q/2}/Q``."""
    if not (S > 0 and Q > 2):
        raise DomainError("need S > 0 and Q > 2")
    crit = 2.0 * Q / (Q - 2.0)

    def f(t):
        return S * t * t / 2.0 - t ** crit / crit

    T = 1.0
    while f(T) > 0:
        T *= 2.0
    ts = np.linspace(0.0, T, samples)
    _, best = golden_max(f, ts, f(ts))
    return best, float(S ** (Q / 2.0) / Q)
