"""Projected Sobolev-gradient descent on the Nehari branches (subcritical case)."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla
from sklearn.base import BaseEstimator

from .errors import BranchEmptyError, ConvergenceError, DomainError, GrushinError, ThresholdError
from .fibering import RayData, find_roots, mu_zero, scale_to_nehari
from .functional import EnergyFunctional, NehariClass
from .operator import lp_norm
from .sobolev import estimate_sobolev_constants

logger = logging.getLogger(__name__)


@dataclass
class SolveResult:
    field: np.ndarray
    energy: float
    residual: float
    nehari_class: NehariClass | None
    iterations: int
    trace: list = field(default_factory=list)
    seed: int = 0
    branch: str = ""
    flags: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "branch": self.branch,
            "energy": self.energy,
            "residual": self.residual,
            "nehari_class": None if self.nehari_class is None else self.nehari_class.to_dict(),
            "iterations": self.iterations,
            "seed": self.seed,
            "min_value": float(np.min(self.field)),
            "max_value": float(np.max(self.field)),
            "flags": list(self.flags),
        }


@dataclass(frozen=True)
class Thresholds:
    """Constants gating the subcritical solver.

    ``minorant(t)`` is ``c1 t^2 - mu c2 t^{r+1}``, the lower bound of
    ``I_mu`` on the Nehari manifold at ``||u||_lam = t``.
    """

    mu0: float
    Sq: float
    Sp: float
    g_norm: float
    h_norm: float
    c1: float
    c2: float
    mu: float
    r: float
    minus_norm_bound: float

    def minorant(self, norm):
        norm = np.asarray(norm, dtype=float)
        return self.c1 * norm ** 2 - self.mu * self.c2 * norm ** (self.r + 1)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("mu0", "Sq", "Sp", "g_norm", "h_norm", "c1", "c2", "mu", "minus_norm_bound")}


def weight_norms(functional: EnergyFunctional) -> tuple[float, float]:
    spec, grid = functional.spec, functional.grid
    return lp_norm(grid, functional.g, spec.a), lp_norm(grid, functional.h, spec.b)


def thresholds(functional: EnergyFunctional, constants: dict | None = None) -> Thresholds:
    """``mu0`` from estimated embedding constants plus the coercivity minorant.

    ``constants`` may carry precomputed ``{q: S_q, p: S_p}``.
    """
    spec = functional.spec
    q, p = spec.q_exp, spec.p_exp
    if constants is None or q not in constants or p not in constants:
        constants = estimate_sobolev_constants(functional.op, (q, p))
    Sq, Sp = constants[q], constants[p]
    g_norm, h_norm = weight_norms(functional)
    r, s = spec.r, spec.s
    mu0 = mu_zero(spec, Sq, Sp, g_norm, h_norm)
    c1 = 0.5 - 1.0 / (s + 1)
    c2 = (s - r) / ((r + 1) * (s + 1)) * Sq ** (1 + r) * g_norm
    bound = ((1 - r) / (Sp ** (s + 1) * (s - r) * h_norm)) ** (1.0 / (s - 1))
    return Thresholds(mu0, Sq, Sp, g_norm, h_norm, c1, c2, spec.mu, r, bound)


def principal_mode(functional: EnergyFunctional, mask: np.ndarray, iters: int = 40) -> np.ndarray:
    """First Dirichlet eigenvector of the operator restricted to ``mask`` nodes."""
    K = functional.op.matrix.tocsr()[mask][:, mask].tocsc()
    lu = spla.splu(K)
    v = np.ones(int(mask.sum()))
    for _ in range(iters):
        v = lu.solve(v)
        v /= np.linalg.norm(v)
    out = np.zeros(functional.grid.size)
    out[mask] = np.abs(v)
    return out


def initial_field(functional: EnergyFunctional, branch: str, seed: int = 0) -> np.ndarray:
    """Start with the sign conditions for both fibering roots already met.

    The minus branch starts from the principal mode on the support of
    ``h+``, the plus branch from the one on the support of ``g+`` where
    ``h+`` also lives (falling back to ``g+`` alone).  A seeded positive
    perturbation separates multi-start runs.
    """
    h_pos = functional.h > 0
    g_pos = functional.g > 0
    if branch == "minus":
        mask = h_pos
    else:
        mask = g_pos & h_pos
        if not mask.any():
            mask = g_pos
    if not mask.any():
        raise BranchEmptyError(f"branch empty along ray: no support for the {branch} branch")
    u = principal_mode(functional, mask)
    rng = np.random.default_rng(seed)
    if seed:
        u = u + 0.05 * u.max() * rng.random(u.size) * mask
    return u / np.sqrt(functional.op.energy(u))


class NehariSolver(BaseEstimator):
    """Minimize ``I_mu`` over one Nehari branch.

    Each step takes a Sobolev-gradient step and projects back along the ray
    onto the requested branch; step sizes follow Armijo backtracking on the
    energy.  The limit is replaced by its absolute value and re-polished.

    Parameters
    ----------
    branch : {"plus", "minus"}
    tol : float
        Stop once ``||I'(u)||`` (dual norm) is below this value.
    max_iter : int
    seed : int
        Selects the initial perturbation; 0 means unperturbed.
    limits : Thresholds or None
        Gating constants; estimated from the grid when None.
    polish_iter : int
        Iterations allowed after taking ``|u|``.
    """

    def __init__(self, branch: str = "minus", tol: float = 1e-6, max_iter: int = 5000, seed: int = 0,
                 limits: Thresholds | None = None, polish_iter: int = 10, armijo: float = 1e-4):
        self.branch = branch
        self.tol = tol
        self.max_iter = max_iter
        self.seed = seed
        self.limits = limits
        self.polish_iter = polish_iter
        self.armijo = armijo

    def fit(self, functional: EnergyFunctional, init=None):
        if self.branch not in ("plus", "minus"):
            raise DomainError(f"branch must be 'plus' or 'minus', got {self.branch!r}")
        limits = self.limits if self.limits is not None else thresholds(functional)
        if functional.mu >= limits.mu0:
            raise ThresholdError(f"mu above threshold (mu = {functional.mu:.6g} >= mu0 = {limits.mu0:.6g})")
        u0 = initial_field(functional, self.branch, self.seed) if init is None else np.asarray(init, dtype=float)
        u = self._project(functional, u0)
        trace: list = []
        u, it, res = self._descend(functional, u, self.max_iter, trace)
        u = self._project(functional, np.abs(u))
        u, extra, res = self._descend(functional, u, self.polish_iter, trace)
        it += extra

        result = SolveResult(
            field=u,
            energy=functional.value(u),
            residual=res,
            nehari_class=functional.classify(u),
            iterations=it,
            trace=trace,
            seed=self.seed,
            branch=self.branch,
        )
        if self.branch == "minus" and np.sqrt(functional.op.energy(u)) < limits.minus_norm_bound:
            result.flags.append("mu possibly above mu-tilde")
        self.result_ = result
        self.field_ = u
        self.energy_ = result.energy
        self.residual_ = res
        self.nehari_class_ = result.nehari_class
        self.n_iter_ = it
        if res > self.tol:
            raise ConvergenceError(f"iteration cap reached with residual {res:.3e} > tol {self.tol:.1e}", result)
        return self

    def _project(self, functional, u):
        try:
            return scale_to_nehari(functional, u, self.branch)
        except ThresholdError as exc:
            raise ThresholdError(f"mu above threshold: {exc}") from exc

    def _descend(self, functional, u, max_iter, trace):
        value = functional.value(u)
        grad = functional.gradient(u)
        res = functional.residual_norm(u, grad)
        step = 1.0
        it = 0
        failures = 0
        while it < max_iter and res > 0.1 * self.tol:
            it += 1
            slope = res * res
            while True:
                try:
                    cand = scale_to_nehari(functional, u - step * grad, self.branch)
                    cand_value = functional.value(cand)
                    if cand_value <= value - self.armijo * step * slope:
                        break
                except (BranchEmptyError, ThresholdError):
                    pass
                step *= 0.5
                if step < 1e-12:
                    failures += 1
                    break
            if step < 1e-12:
                if failures > 3:
                    raise BranchEmptyError("branch empty along ray: projection failed persistently")
                step = 1.0
                if res < self.tol:
                    break
                continue
            u, value = cand, cand_value
            grad = functional.gradient(u)
            res = functional.residual_norm(u, grad)
            e = functional.breakdown(u)
            trace.append((value, res, e.tau))
            step = min(step * 2.0, 1.0)
        return u, it, res


def minimize_on_branch(functional: EnergyFunctional, branch: str, init=None, **opts) -> SolveResult:
    solver = NehariSolver(branch=branch, **opts)
    return solver.fit(functional, init).result_


@dataclass
class TwoSolutions:
    first: SolveResult
    second: SolveResult
    distinctness: float


def two_solutions(functional: EnergyFunctional, seeds=(0, 1, 2), distinct_tol: float = 1e-2,
                  n_jobs: int = 1, **opts) -> TwoSolutions:
    """Run both branches from several seeds and keep the lowest energy of each.

    ``first`` is the minus-branch minimizer and ``second`` the plus-branch one.
    """
    if functional.spec.regime != "subcritical":
        raise DomainError("two_solutions expects a subcritical problem")
    if opts.get("limits") is None:
        opts["limits"] = thresholds(functional)

    def run(branch, seed):
        try:
            return minimize_on_branch(functional, branch, seed=seed, **opts)
        except ConvergenceError as exc:
            logger.warning("%s branch, seed %d: %s", branch, seed, exc)
            return exc.result

    best = {}
    for branch in ("minus", "plus"):
        with ThreadPoolExecutor(max_workers=max(1, n_jobs)) as pool:
            results = list(pool.map(lambda s: run(branch, s), seeds))
        results = [r for r in results if r is not None]
        if not results:
            raise GrushinError(f"no {branch} branch run produced a result")
        best[branch] = min(results, key=lambda r: (r.energy, r.seed))
        if best[branch].residual > opts.get("tol", 1e-6):
            raise ConvergenceError(f"{branch} branch did not converge", best[branch])
    first, second = best["minus"], best["plus"]
    distinct = lp_norm(functional.grid, first.field - second.field, 2)
    if distinct < distinct_tol:
        raise GrushinError(f"solutions coincide (L2 distance {distinct:.3e})")
    return TwoSolutions(first, second, distinct)


def reprojection_t_minus(functional: EnergyFunctional, u) -> float:
    """Fibering root ``t_minus`` of a field already on the minus branch."""
    return find_roots(RayData.from_field(functional, u)).t_minus
