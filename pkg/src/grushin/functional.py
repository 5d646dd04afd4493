"""Energy functional, Sobolev gradient, Nehari pairing and classification."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import DomainError
from .model import ProblemSpec
from .operator import GrushinOperator

NEHARI_CLASSES = ("plus", "minus", "zero", "off_manifold")


@dataclass(frozen=True)
class EnergyBreakdown:
    dirichlet: float
    concave: float
    convex: float
    total: float
    tau: float
    tau_prime_pairing: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class NehariClass:
    label: str
    tau: float
    tau_prime: float
    tol: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class RayIntegrals:
    """The three integrals that determine the fibering map of a field."""

    A: float  # ||u||_lam^2
    B: float  # int g |u|^{r+1}
    C: float  # int h |u|^{s+1}


class EnergyFunctional:
    """``I_mu`` on a grid, with weights sampled once at the interior nodes.

    The subcritical regime uses ``|u|``; the critical regime uses ``u+`` in
    both nonlinear terms and the exponent ``s + 1 = 2*_lam``.
    """

    def __init__(self, spec: ProblemSpec, op: GrushinOperator):
        self.spec = spec
        self.op = op
        self.grid = op.grid
        self.g = self.grid.sample(spec.g_weight)
        self.h = self.grid.sample(spec.h_weight)
        self.critical = spec.regime == "critical"

    @property
    def mu(self) -> float:
        return self.spec.mu

    def with_mu(self, mu: float) -> "EnergyFunctional":
        new = object.__new__(EnergyFunctional)
        new.__dict__.update(self.__dict__)
        new.spec = self.spec.with_params(mu=mu)
        return new

    def _base(self, u):
        return np.maximum(u, 0.0) if self.critical else np.abs(u)

    def ray_integrals(self, u) -> RayIntegrals:
        u = np.asarray(u, dtype=float)
        base = self._base(u)
        vol = self.grid.cell_volume
        r, s = self.spec.r, self.spec.s
        B = float(np.sum(self.g * base ** (r + 1.0)) * vol)
        C = float(np.sum(self.h * base ** (s + 1.0)) * vol)
        return RayIntegrals(self.op.energy(u), B, C)

    def breakdown(self, u) -> EnergyBreakdown:
        A, B, C = _astuple(self.ray_integrals(u))
        r, s, mu = self.spec.r, self.spec.s, self.mu
        concave = mu * B / (r + 1.0)
        convex = C / (s + 1.0)
        total = 0.5 * A - concave - convex
        tau = A - mu * B - C
        pairing = 2.0 * A - mu * (r + 1.0) * B - (s + 1.0) * C
        return EnergyBreakdown(0.5 * A, concave, convex, total, tau, pairing)

    def value(self, u) -> float:
        return self.breakdown(u).total

    def load(self, u) -> np.ndarray:
        """Nodal nonlinearity ``mu g |u|^{r-1} u + h |u|^{s-1} u`` (or its ``u+`` form)."""
        u = np.asarray(u, dtype=float)
        r, s = self.spec.r, self.spec.s
        if self.critical:
            pos = np.maximum(u, 0.0)
            concave = np.where(u > 0, pos ** r, 0.0)
            return self.mu * self.g * concave + self.h * pos ** s
        a = np.abs(u)
        sign = np.sign(u)
        return self.mu * self.g * sign * a ** r + self.h * sign * a ** s

    def derivative(self, u) -> np.ndarray:
        """Vector of ``<I'(u), e_i>`` over the nodal basis."""
        return self.op.matrix @ u - self.grid.cell_volume * self.load(u)

    def gradient(self, u) -> np.ndarray:
        """Sobolev gradient: the ``||.||_lam`` Riesz representative of ``I'(u)``."""
        u = np.asarray(u, dtype=float)
        return u - self.op.riesz(self.load(u))

    def residual_norm(self, u, grad=None) -> float:
        """Dual norm ``||I'(u)||`` measured as ``||gradient(u)||_lam``."""
        if grad is None:
            grad = self.gradient(u)
        return float(np.sqrt(max(self.op.energy(grad), 0.0)))

    def nehari_tol(self, u) -> float:
        return 1e-8 * self.op.energy(u)

    def classify(self, u, tol: float | None = None) -> NehariClass:
        u = np.asarray(u, dtype=float)
        if not np.any(u):
            raise DomainError("Nehari manifold excludes 0")
        e = self.breakdown(u)
        if tol is None:
            tol = self.nehari_tol(u)
        if abs(e.tau) > tol:
            label = "off_manifold"
        elif e.tau_prime_pairing > tol:
            label = "plus"
        elif e.tau_prime_pairing < -tol:
            label = "minus"
        else:
            label = "zero"
        return NehariClass(label, e.tau, e.tau_prime_pairing, tol)


def _astuple(ray: RayIntegrals):
    return ray.A, ray.B, ray.C


def energy(spec: ProblemSpec, op: GrushinOperator, u) -> EnergyBreakdown:
    return EnergyFunctional(spec, op).breakdown(u)


def gradient(spec: ProblemSpec, op: GrushinOperator, u) -> np.ndarray:
    return EnergyFunctional(spec, op).gradient(u)


def residual_norm(spec: ProblemSpec, op: GrushinOperator, u) -> float:
    return EnergyFunctional(spec, op).residual_norm(u)


def classify(spec: ProblemSpec, op: GrushinOperator, u, tol: float | None = None) -> NehariClass:
    return EnergyFunctional(spec, op).classify(u, tol)
