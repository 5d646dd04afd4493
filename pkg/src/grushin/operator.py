"""Discrete Grushin operator and the integrals built from it."""

from __future__ import annotations

from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DomainError
from .grid import TensorGrid


def _second_difference(k: int, h: float) -> sp.csr_matrix:
    return sp.diags([-np.ones(k - 1), 2.0 * np.ones(k), -np.ones(k - 1)], [-1, 0, 1]) / (h * h)


class GrushinOperator:
    """Stiffness matrix of ``-Delta_lam`` with homogeneous Dirichlet conditions.

    ``matrix`` is scaled by the cell volume so that ``u @ matrix @ u`` is the
    discrete ``||u||_lam^2`` consistent with trapezoid quadrature; the nodal
    operator is ``matrix / cell_volume``.

    The y second differences carry the weight ``|x|^{2 lam}`` of the node's
    own x coordinate, which is the face value as well because y faces share
    x.  The weight vanishes on ``x = 0`` with no regularization.
    """

    def __init__(self, grid: TensorGrid, lam: float):
        self.grid = grid
        self.lam = float(lam)
        shape = grid.interior_shape
        eyes = [sp.identity(k, format="csr") for k in shape]

        def along(axis):
            factors = list(eyes)
            factors[axis] = _second_difference(shape[axis], grid.spacing[axis])
            out = factors[0]
            for f in factors[1:]:
                out = sp.kron(out, f, format="csr")
            return out

        lap_x = sum(along(i) for i in range(grid.n))
        lap_y = sum(along(i) for i in range(grid.n, grid.dim))
        # 0**0 == 1 keeps lam = 0 equal to the plain Laplacian
        weight = np.power(grid.x_norm, 2.0 * self.lam)
        self.y_weight = weight
        self.matrix = (grid.cell_volume * (lap_x + sp.diags(weight) @ lap_y)).tocsr()

    @classmethod
    def assemble(cls, grid: TensorGrid, lam: float) -> "GrushinOperator":
        return cls(grid, lam)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @cached_property
    def _lu(self):
        return spla.splu(self.matrix.tocsc())

    def apply(self, u) -> np.ndarray:
        """Nodal values of ``-Delta_lam u``."""
        return self.matrix @ u / self.grid.cell_volume

    def energy(self, u) -> float:
        """Discrete ``||u||_lam^2``."""
        u = np.asarray(u, dtype=float)
        return float(u @ (self.matrix @ u))

    def inner(self, u, v) -> float:
        return float(np.asarray(u) @ (self.matrix @ np.asarray(v)))

    def solve(self, b) -> np.ndarray:
        """Solve ``matrix @ x = b`` with the cached sparse factorization."""
        return self._lu.solve(np.asarray(b, dtype=float))

    def riesz(self, load) -> np.ndarray:
        """Representative in the energy inner product of a nodal load ``int f phi``."""
        return self.solve(self.grid.cell_volume * np.asarray(load, dtype=float))

    @cached_property
    def poincare_constant(self) -> float:
        """Smallest ``c`` with ``||u||_lam^2 >= c ||u||_2^2`` on this grid."""
        vol = self.grid.cell_volume
        inv = spla.LinearOperator(self.matrix.shape, matvec=lambda b: self.solve(b) * vol)
        val = spla.eigsh(inv, k=1, which="LM", return_eigenvectors=False, tol=1e-10)
        return float(1.0 / val[0])

    def dump(self, path) -> None:
        """Write the matrix in coordinate ``row col value`` text format."""
        coo = self.matrix.tocoo()
        with open(path, "w") as fh:
            for i, j, v in zip(coo.row, coo.col, coo.data):
                fh.write(f"{i} {j} {v:.17g}\n")


def assemble(grid: TensorGrid, lam: float) -> GrushinOperator:
    return GrushinOperator(grid, lam)


def grushin_energy(op: GrushinOperator, u) -> float:
    return op.energy(u)


def weighted_power_integral(grid: TensorGrid, w, u, exponent: float, signed_mode: str = "abs") -> float:
    """Quadrature of ``w |u|^exponent`` (``abs``) or ``w (u+)^exponent`` (``positive_part``)."""
    if exponent <= 0:
        raise DomainError("exponent must be positive")
    u = np.asarray(u, dtype=float)
    if signed_mode == "abs":
        base = np.abs(u)
    elif signed_mode == "positive_part":
        base = np.maximum(u, 0.0)
    else:
        raise DomainError(f"unknown signed_mode {signed_mode!r}")
    return grid.integrate(np.asarray(w, dtype=float) * base ** exponent)


def lp_norm(grid: TensorGrid, u, p: float) -> float:
    if p < 1:
        raise DomainError("p must be >= 1")
    if np.isinf(p):
        return float(np.max(np.abs(u)))
    return grid.integrate(np.abs(np.asarray(u, dtype=float)) ** p) ** (1.0 / p)
