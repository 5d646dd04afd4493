"""Embedding constants ``S_p`` by Rayleigh-quotient minimization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .errors import DomainError
from .operator import GrushinOperator, lp_norm


@dataclass(frozen=True)
class SobolevEstimate:
    """Result for one exponent; ``S = quotient ** -0.5``."""

    p: float
    S: float
    quotient: float
    converged: bool
    iterations: int
    field: np.ndarray


def initial_bump(grid, center=None) -> np.ndarray:
    """Positive product-cosine bump vanishing on the box boundary."""
    u = np.ones(grid.size)
    for i, (lo, hi) in enumerate(grid.box):
        t = (grid.points[:, i] - lo) / (hi - lo)
        u *= np.sin(np.pi * t)
    return u


def minimize_quotient(op: GrushinOperator, p: float, u0=None, tol: float = 1e-10,
                      max_iter: int = 2000) -> SobolevEstimate:
    """Minimize ``||u||_lam^2 / ||u||_p^2`` by normalized Sobolev-gradient descent.

    With ``||u||_p = 1`` the Sobolev gradient of the quotient is
    ``2 (u - R K^{-1}(|u|^{p-2} u))``; a half step is the nonlinear inverse
    power iteration.  Steps are backtracked whenever the quotient would rise.
    """
    if p < 1:
        raise DomainError("p must be >= 1")
    grid = op.grid
    u = initial_bump(grid) if u0 is None else np.abs(np.asarray(u0, dtype=float))
    u = u / lp_norm(grid, u, p)
    R = op.energy(u)
    step = 1.0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        target = op.riesz(np.abs(u) ** (p - 2) * u) * R
        direction = u - target
        while True:
            cand = u - step * direction
            cand /= lp_norm(grid, cand, p)
            R_new = op.energy(cand)
            if R_new <= R * (1 + 1e-14) or step < 1e-6:
                break
            step *= 0.5
        change = (R - R_new) / R
        u, R = cand, R_new
        step = min(1.0, 2.0 * step)
        if abs(change) < tol:
            converged = True
            break
    return SobolevEstimate(float(p), float(R ** -0.5), float(R), converged, it, u)


class SobolevEstimator(BaseEstimator):
    """Estimate ``S_p`` for several exponents on one operator.

    After ``fit`` the attribute ``constants_`` maps each exponent to ``S_p``
    and ``estimates_`` keeps the full :class:`SobolevEstimate` records.
    """

    def __init__(self, exponents=(2.0,), tol: float = 1e-10, max_iter: int = 2000):
        self.exponents = exponents
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, op: GrushinOperator, y=None):
        self.estimates_ = {}
        for p in self.exponents:
            self.estimates_[float(p)] = minimize_quotient(op, float(p), tol=self.tol, max_iter=self.max_iter)
        self.constants_ = {p: est.S for p, est in self.estimates_.items()}
        return self


def estimate_sobolev_constants(op: GrushinOperator, exponents, **kwargs) -> dict:
    return SobolevEstimator(tuple(exponents), **kwargs).fit(op).constants_
