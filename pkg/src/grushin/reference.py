"""Numerical extremal of the critical embedding on a large graded box.

The profile is computed with conforming multilinear finite elements on a
tensor grid that is uniform near the origin and geometrically stretched
outside.  Conformity matters: every discrete quotient is then a quotient of
an actual ``H^{1,lam}`` function, so the minimizer cannot collapse onto the
mesh the way a lumped finite-difference quotient does.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.interpolate import RegularGridInterpolator

from .errors import ConvergenceError, DomainError
from .grid import gauge_norm
from .model import derived_exponents

logger = logging.getLogger(__name__)

_GAUSS = np.polynomial.legendre.leggauss(4)


def graded_axis(h0: float, ratio: float, extent: float, core: float) -> np.ndarray:
    """Symmetric nodes with spacing ``h0`` on ``[-core, core]``, growing by ``ratio`` beyond."""
    if not (h0 > 0 and ratio >= 1 and extent > core >= 0):
        raise DomainError("graded axis needs h0 > 0, ratio >= 1 and extent > core >= 0")
    pos = [0.0]
    h = h0
    while pos[-1] < extent:
        pos.append(pos[-1] + h)
        if pos[-1] >= core:
            h *= ratio
    pos = np.array(pos)
    return np.concatenate([-pos[:0:-1], pos])


def _element_matrices(nodes, weight_power: float = 0.0):
    """P1 stiffness and (|x|^w-weighted) consistent mass on interior nodes."""
    gp, gw = _GAUSS
    a, b = nodes[:-1], nodes[1:]
    h = b - a
    xq = 0.5 * (a + b)[:, None] + 0.5 * h[:, None] * gp[None, :]
    wq = 0.5 * h[:, None] * gw[None, :] * np.abs(xq) ** weight_power
    n0 = (b[:, None] - xq) / h[:, None]
    n1 = (xq - a[:, None]) / h[:, None]
    m00, m01, m11 = (wq * n0 * n0).sum(1), (wq * n0 * n1).sum(1), (wq * n1 * n1).sum(1)
    k = len(nodes)
    diag_m = np.zeros(k)
    diag_m[:-1] += m00
    diag_m[1:] += m11
    diag_s = np.zeros(k)
    diag_s[:-1] += 1.0 / h
    diag_s[1:] += 1.0 / h
    S = sp.diags([-1.0 / h, diag_s, -1.0 / h], [-1, 0, 1], format="csr")[1:-1, 1:-1]
    M = sp.diags([m01, diag_m, m01], [-1, 0, 1], format="csr")[1:-1, 1:-1]
    return S, M


def _quadrature_1d(nodes):
    """Two-point Gauss evaluation matrix (rows: quadrature points) and weights."""
    gp = np.array([-1.0, 1.0]) / np.sqrt(3.0)
    a, b = nodes[:-1], nodes[1:]
    h = b - a
    ne = len(h)
    xq = 0.5 * (a + b)[:, None] + 0.5 * h[:, None] * gp[None, :]
    rows = np.repeat(np.arange(2 * ne), 2)
    cols = np.stack([np.repeat(np.arange(ne), 2), np.repeat(np.arange(ne), 2) + 1], axis=1).ravel()
    vals = np.stack([((b[:, None] - xq) / h[:, None]).ravel(), ((xq - a[:, None]) / h[:, None]).ravel()], axis=1).ravel()
    P = sp.csr_matrix((vals, (rows, cols)), shape=(2 * ne, len(nodes)))[:, 1:-1]
    return P.tocsr(), np.repeat(0.5 * h, 2)


def _kron_all(mats):
    out = mats[0]
    for m in mats[1:]:
        out = sp.kron(out, m, format="csr")
    return out


class FEMSpace:
    """Multilinear elements on a tensor grid with the Grushin stiffness.

    ``matrix`` gives ``int |D_lam u|^2`` exactly for the weight in one x
    direction; with several x axes the weight ``|x|^{2 lam}`` is applied as
    a nodal diagonal scaling of the x mass, which is second-order accurate
    away from ``x = 0``.
    """

    def __init__(self, axes, n: int, lam: float):
        self.axes = tuple(np.asarray(a, dtype=float) for a in axes)
        self.n = n
        self.lam = float(lam)
        dim = len(self.axes)
        pieces = [_element_matrices(a) for a in self.axes]
        S = [p[0] for p in pieces]
        M = [p[1] for p in pieces]
        self.shape = tuple(len(a) - 2 for a in self.axes)
        self.size = int(np.prod(self.shape))

        x_part = sum(_kron_all([S[k] if k == j else M[k] for k in range(n)]) for j in range(n))
        if n == 1:
            x_weighted = _element_matrices(self.axes[0], 2.0 * self.lam)[1]
        else:
            mesh = np.meshgrid(*[a[1:-1] for a in self.axes[:n]], indexing="ij")
            r = np.sqrt(sum(m.ravel() ** 2 for m in mesh))
            d = sp.diags(r ** self.lam)
            x_weighted = d @ _kron_all(M[:n]) @ d
        y_stiff = sum(_kron_all([S[k] if k == j else M[k] for k in range(n, dim)]) for j in range(n, dim))
        self.matrix = (sp.kron(x_part, _kron_all(M[n:])) + sp.kron(x_weighted, y_stiff)).tocsr()

        quads = [_quadrature_1d(a) for a in self.axes]
        self.quad_matrix = _kron_all([q[0] for q in quads])
        w = quads[0][1]
        for q in quads[1:]:
            w = np.kron(w, q[1])
        self.quad_weights = w

    @cached_property
    def _lu(self):
        return spla.splu(self.matrix.tocsc())

    def solve(self, b):
        return self._lu.solve(np.asarray(b, dtype=float))

    def energy(self, u) -> float:
        return float(u @ (self.matrix @ u))

    def power_integral(self, u, exponent: float) -> float:
        return float(self.quad_weights @ np.abs(self.quad_matrix @ u) ** exponent)

    def power_load(self, u, exponent: float) -> np.ndarray:
        """Gradient of ``int |u|^exponent / exponent`` with respect to nodal values."""
        pu = self.quad_matrix @ u
        return self.quad_matrix.T @ (self.quad_weights * np.abs(pu) ** (exponent - 2.0) * pu)

    @cached_property
    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*[a[1:-1] for a in self.axes], indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)


@dataclass
class ReferenceProfile:
    """Positive solution ``v`` of ``-Delta_lam v = v^{crit-1}`` normalized by ``v(0) = 1``.

    ``axes`` hold the node coordinates (boundary included) of the graded box
    after the dilation that enforces the normalization, and ``values`` the
    interior nodal values in C order.
    """

    n: int
    m: int
    lam: float
    axes: tuple
    values: np.ndarray
    quotient: float
    residual: float
    iterations: int

    @property
    def Q(self) -> float:
        return self.n + (1.0 + self.lam) * self.m

    @property
    def crit(self) -> float:
        return 2.0 * self.Q / (self.Q - 2.0)

    @cached_property
    def space(self) -> FEMSpace:
        return FEMSpace(self.axes, self.n, self.lam)

    @cached_property
    def _interpolator(self):
        full = np.zeros(tuple(len(a) for a in self.axes))
        full[tuple(slice(1, -1) for _ in self.axes)] = self.values.reshape(self.space.shape)
        return RegularGridInterpolator(self.axes, full, bounds_error=False, fill_value=0.0)

    def __call__(self, points) -> np.ndarray:
        """Multilinear interpolant of ``v``; zero outside the reference box."""
        points = np.asarray(points, dtype=float)
        return self._interpolator(points.reshape(-1, points.shape[-1])).reshape(points.shape[:-1])

    def gauge(self) -> np.ndarray:
        """Gauge norm of every interior reference node."""
        return gauge_norm(self.space.points, self.lam, self.n)

    def half_max_widths(self) -> np.ndarray:
        """Full width at half maximum along each coordinate axis through 0."""
        widths = []
        for i, ax in enumerate(self.axes):
            pts = np.zeros((len(ax), len(self.axes)))
            pts[:, i] = ax
            vals = self(pts)
            pos = ax >= 0
            xs, vs = ax[pos], vals[pos]
            k = int(np.argmax(vs < 0.5))
            t = (vs[k - 1] - 0.5) / (vs[k - 1] - vs[k])
            widths.append(2.0 * (xs[k - 1] + t * (xs[k] - xs[k - 1])))
        return np.array(widths)

    def save(self, path) -> None:
        np.savez(path, n=self.n, m=self.m, lam=self.lam, values=self.values, quotient=self.quotient,
                 residual=self.residual, iterations=self.iterations,
                 **{f"axis{i}": a for i, a in enumerate(self.axes)})

    @classmethod
    def load(cls, path) -> "ReferenceProfile":
        with np.load(path) as data:
            dim = int(data["n"]) + int(data["m"])
            axes = tuple(data[f"axis{i}"] for i in range(dim))
            return cls(int(data["n"]), int(data["m"]), float(data["lam"]), axes, data["values"],
                       float(data["quotient"]), float(data["residual"]), int(data["iterations"]))


DEFAULT_GRADING = {"h0": 0.05, "ratio": 1.08, "extent": 1000.0, "core": 2.0}


def _initial_guess(space: FEMSpace, lam: float, Q: float) -> np.ndarray:
    rho = gauge_norm(space.points, lam, space.n)
    return (1.0 + rho ** 2) ** (-(Q - 2.0) / 2.0)


def compute_reference_profile(n: int = 1, m: int = 1, lam: float = 1.0, h0: float = 0.05,
                              ratio: float = 1.08, extent: float = 1000.0, core: float = 2.0,
                              tol: float = 1e-14, max_iter: int = 20000) -> ReferenceProfile:
    """Minimize ``||u||_lam^2 / ||u||_crit^2`` on the graded box, then rescale.

    ``extent`` is the gauge radius of the box; y axes reach
    ``extent^{1+lam} / (1+lam)``.  The minimizer ``u`` with ``||u||_crit = 1``
    and quotient ``S`` gives ``v = S^{1/(crit-2)} u``, which solves the
    discrete equation; a final dilation sets ``v(0) = 1``.
    """
    Q, crit = derived_exponents(type("D", (), {"n": n, "m": m, "lam": lam})())
    k = 1.0 + lam
    axes = [graded_axis(h0, ratio, extent, core) for _ in range(n)]
    axes += [graded_axis(h0, ratio, extent ** k / k, core ** k / k) for _ in range(m)]
    space = FEMSpace(axes, n, lam)

    def lp(u):
        return space.power_integral(u, crit) ** (1.0 / crit)

    u = _initial_guess(space, lam, Q)
    u /= lp(u)
    R = space.energy(u)
    step = 1.0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        target = space.solve(space.power_load(u, crit)) * R
        while True:
            cand = u - step * (u - target)
            cand /= lp(cand)
            R_new = space.energy(cand)
            if R_new <= R * (1 + 1e-15) or step < 1e-6:
                break
            step *= 0.5
        change = (R - R_new) / R
        u, R = cand, R_new
        step = min(1.0, 2.0 * step)
        if abs(change) < tol:
            converged = True
            break
    if not converged:
        raise ConvergenceError(f"reference profile did not converge in {max_iter} iterations")

    v = R ** (1.0 / (crit - 2.0)) * np.abs(u)
    resid = space.matrix @ v - space.power_load(v, crit)
    residual = float(np.sqrt(max(resid @ space.solve(resid), 0.0)))
    # v_new(xi) = kappa^{(Q-2)/2} v(delta_kappa xi) with v_new(0) = 1
    kappa = float(v.max()) ** (-2.0 / (Q - 2.0))
    scale = kappa ** ((Q - 2.0) / 2.0)
    new_axes = tuple(a / kappa for a in axes[:n]) + tuple(a / kappa ** k for a in axes[n:])
    return ReferenceProfile(n, m, float(lam), new_axes, v * scale, float(R), residual, it)


def cache_dir() -> Path:
    root = os.environ.get("GRUSHIN_CACHE")
    if root:
        return Path(root)
    return Path(os.environ.get("XDG_CACHE_HOME", Path.home() / ".cache")) / "grushin"


def reference_profile(n: int = 1, m: int = 1, lam: float = 1.0, use_cache: bool = True,
                      **grading) -> ReferenceProfile:
    """Cached :func:`compute_reference_profile` keyed by dimensions and grading."""
    opts = {**DEFAULT_GRADING, **grading}
    key = json.dumps({"n": n, "m": m, "lam": float(lam), **{k: float(v) for k, v in opts.items()}}, sort_keys=True)
    digest = hashlib.sha256(key.encode()).hexdigest()[:16]
    path = cache_dir() / f"profile-{digest}.npz"
    if use_cache and path.exists():
        try:
            return ReferenceProfile.load(path)
        except (OSError, KeyError, ValueError) as exc:
            logger.warning("ignoring unreadable cached profile %s: %s", path, exc)
    profile = compute_reference_profile(n, m, lam, **opts)
    if use_cache:
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp = path.with_suffix(".tmp.npz")
            profile.save(tmp)
            os.replace(tmp, path)
        except OSError as exc:
            logger.warning("could not cache profile at %s: %s", path, exc)
    return profile
