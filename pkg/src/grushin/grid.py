"""Tensor-product grids, trapezoid quadrature and the gauge geometry.

A *field* is a plain float array holding one value per interior node in C
order over the axes (x axes first, then y axes).  Boundary values are zero
and never stored.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DomainError


def gauge_norm(z, lam: float, n: int = 1) -> np.ndarray:
    """Gauge norm ``(|x|^{2(1+lam)} + (1+lam)^2 |y|^2)^{1/(2(1+lam))}``.

    ``z`` has shape ``(..., n + m)``; the first ``n`` components are x.
    """
    z = np.asarray(z, dtype=float)
    x2 = np.sum(z[..., :n] ** 2, axis=-1)
    y2 = np.sum(z[..., n:] ** 2, axis=-1)
    k = 1.0 + lam
    return (x2 ** k + k * k * y2) ** (0.5 / k)


def dilate(z, t: float, lam: float, n: int = 1) -> np.ndarray:
    """Anisotropic dilation ``(x, y) -> (t x, t^{1+lam} y)``."""
    if not t > 0:
        raise DomainError(f"dilation factor must be positive, got {t!r}")
    z = np.array(z, dtype=float)
    z[..., :n] *= t
    z[..., n:] *= t ** (1.0 + lam)
    return z


def _check_nodes(count: int) -> None:
    k = count - 1
    if count < 5 or k & (k - 1):
        raise DomainError(f"node count per axis must be 2**k + 1 >= 5, got {count}")


@dataclass(frozen=True, eq=False)
class TensorGrid:
    """Uniform tensor grid on a box with Dirichlet boundary.

    Parameters
    ----------
    box : sequence of (lo, hi)
        Interval per axis, x axes first.
    nodes : sequence of int
        Node count per axis including both boundary nodes; each must be
        ``2**k + 1`` so that the midpoint of the interval is a node.
    n : int
        Number of x axes.
    """

    box: tuple
    nodes: tuple
    n: int = 1

    def __post_init__(self):
        box = tuple((float(lo), float(hi)) for lo, hi in self.box)
        nodes = tuple(int(c) for c in self.nodes)
        if len(box) != len(nodes):
            raise DomainError("box and nodes must have one entry per axis")
        if not 1 <= self.n < len(box):
            raise DomainError("need at least one x axis and one y axis")
        for (lo, hi), count in zip(box, nodes):
            if not hi > lo:
                raise DomainError(f"empty interval ({lo}, {hi})")
            _check_nodes(count)
        object.__setattr__(self, "box", box)
        object.__setattr__(self, "nodes", nodes)
        for i in range(self.n):
            lo, hi = box[i]
            ax = self.axes[i]
            if lo < 0 < hi and not np.any(np.isclose(ax, 0.0, atol=1e-12 * (hi - lo))):
                raise DomainError(f"x axis {i} straddles 0 but has no node there")

    @classmethod
    def from_spec(cls, spec, nodes) -> "TensorGrid":
        if np.isscalar(nodes):
            nodes = (int(nodes),) * spec.dim
        return cls(spec.box, tuple(nodes), spec.n)

    @property
    def dim(self) -> int:
        return len(self.box)

    @cached_property
    def axes(self) -> tuple:
        axes = []
        for (lo, hi), count in zip(self.box, self.nodes):
            ax = np.linspace(lo, hi, count)
            mid = np.abs(ax).argmin()
            if abs(ax[mid]) < 1e-12 * (hi - lo):
                ax[mid] = 0.0
            axes.append(ax)
        return tuple(axes)

    @cached_property
    def spacing(self) -> np.ndarray:
        return np.array([(hi - lo) / (c - 1) for (lo, hi), c in zip(self.box, self.nodes)])

    @property
    def interior_shape(self) -> tuple:
        return tuple(c - 2 for c in self.nodes)

    @property
    def size(self) -> int:
        """Number of interior nodes (length of a field)."""
        return int(np.prod(self.interior_shape))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @cached_property
    def points(self) -> np.ndarray:
        """Interior node coordinates, shape ``(size, dim)``."""
        mesh = np.meshgrid(*[ax[1:-1] for ax in self.axes], indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    @cached_property
    def full_points(self) -> np.ndarray:
        """All node coordinates including the boundary, shape ``nodes + (dim,)``."""
        return np.stack(np.meshgrid(*self.axes, indexing="ij"), axis=-1)

    @cached_property
    def x_norm(self) -> np.ndarray:
        """Euclidean norm of the x part of each interior node."""
        return np.linalg.norm(self.points[:, : self.n], axis=1)

    @cached_property
    def trapezoid_weights(self) -> np.ndarray:
        w = np.ones(self.nodes)
        for i, h in enumerate(self.spacing):
            wi = np.full(self.nodes[i], h)
            wi[[0, -1]] = 0.5 * h
            shape = [1] * self.dim
            shape[i] = -1
            w = w * wi.reshape(shape)
        return w

    def sample(self, func, full: bool = False) -> np.ndarray:
        """Evaluate ``func(points)`` at interior nodes (a field) or at all nodes."""
        pts = self.full_points if full else self.points
        return np.asarray(func(pts), dtype=float)

    def to_full(self, u) -> np.ndarray:
        """Embed a field into the full node array with zero boundary values."""
        full = np.zeros(self.nodes)
        full[tuple(slice(1, -1) for _ in self.nodes)] = np.reshape(u, self.interior_shape)
        return full

    def integrate(self, values) -> float:
        """Composite trapezoid rule.

        ``values`` is either a field (interior values, boundary taken as
        zero) or an array over all nodes of shape ``nodes``.
        """
        values = np.asarray(values, dtype=float)
        if values.shape == self.nodes:
            return float(np.sum(values * self.trapezoid_weights))
        if values.size != self.size:
            raise DomainError(f"expected {self.size} interior values or shape {self.nodes}, got {values.shape}")
        # interior trapezoid weights all equal the cell volume
        return float(np.sum(values) * self.cell_volume)

    def gauge_distance(self, center, lam: float) -> np.ndarray:
        """``rho(z - center)`` at every interior node."""
        return gauge_norm(self.points - np.asarray(center, dtype=float), lam, self.n)

    def to_csv(self, path, u, header: str = "value") -> None:
        """Write one row per interior node: coordinates then value."""
        u = np.ravel(u)
        names = [f"x{i + 1}" for i in range(self.n)] + [f"y{j + 1}" for j in range(self.dim - self.n)]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(names + [header])
            for pt, val in zip(self.points, u):
                writer.writerow([f"{c:.12g}" for c in pt] + [f"{val:.12g}"])


def smoothstep5(zeta) -> np.ndarray:
    """Quintic blend from 1 at ``zeta <= 0`` to 0 at ``zeta >= 1`` with C2 joins."""
    zeta = np.clip(zeta, 0.0, 1.0)
    return 1.0 - zeta ** 3 * (10.0 - 15.0 * zeta + 6.0 * zeta ** 2)


def build_cutoff(grid: TensorGrid, center, R: float, lam: float, *, allow_sigma: bool = False) -> np.ndarray:
    """Cut-off field equal to 1 on ``B_R(center)`` and 0 outside ``B_2R(center)``.

    The balls are gauge balls.  By default ``B_2R`` must avoid the plane
    ``x = 0``; ``allow_sigma=True`` lifts that requirement (bubbles that
    concentrate on the degeneracy set need it).
    """
    center = np.asarray(center, dtype=float)
    if R <= 0:
        raise DomainError("cut-off radius must be positive")
    two_r = 2.0 * R
    for i, (lo, hi) in enumerate(grid.box):
        half = two_r if i < grid.n else two_r ** (1.0 + lam) / (1.0 + lam)
        if not (lo < center[i] - half and center[i] + half < hi):
            raise DomainError("ball B_2R(z0) touches the boundary of the box")
    if not allow_sigma and np.linalg.norm(center[: grid.n]) <= two_r:
        raise DomainError("ball B_2R(z0) touches the degeneracy set x = 0")
    rho = grid.gauge_distance(center, lam)
    return smoothstep5((rho - R) / R)
