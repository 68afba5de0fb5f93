"""Ball-model hyperbolic geometry in the radial coordinate s = sinh(distance).

The hyperbolic metric on the unit ball is ``b = rho**-2 * delta`` with
``rho = (1 - |x|^2) / 2``.  Every rotationally symmetric quantity in the package
is sampled on a :class:`RadialGrid` in the coordinate ``s = 2|x| / (1 - |x|^2)``,
in which ``b = ds^2 / (1 + s^2) + s^2 g_round``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from math import gamma, pi

import numpy as np
import scipy.sparse as sp
from scipy.integrate import quad

from .errors import DomainError, OrderingError, StencilError

__all__ = [
    "ChartPoint",
    "RadialGrid",
    "chart_point",
    "radius_from_s",
    "geodesic_distance",
    "unit_sphere_volume",
    "make_grid",
    "fd_weights",
    "radial_laplacian",
    "sphere_area",
    "volume_density",
    "annulus_measure",
    "radial_integral",
]

MIN_NODES = 16
QUAD_EPSREL = 1e-12
QUAD_EPSABS = 1e-10


@dataclass(frozen=True)
class ChartPoint:
    euclidean_radius: float
    rho: float
    s: float
    v0: float


def chart_point(euclidean_radius: float) -> ChartPoint:
    """Ball-model data at Euclidean radius ``|x|``."""
    x = float(euclidean_radius)
    if not (0.0 <= x < 1.0):
        raise DomainError(f"euclidean radius must lie in [0, 1), got {x!r}")
    rho = (1.0 - x * x) / 2.0
    s = 2.0 * x / (1.0 - x * x)
    return ChartPoint(euclidean_radius=x, rho=rho, s=s, v0=float(np.hypot(1.0, s)))


def radius_from_s(s):
    """Inverse of ``|x| -> s``; the form ``s / (1 + sqrt(1 + s^2))`` avoids cancellation."""
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise DomainError("s must be non-negative")
    return s / (1.0 + np.hypot(1.0, s))


def geodesic_distance(euclidean_radius):
    """Hyperbolic distance from the origin, ``ln((1+|x|)/(1-|x|))``."""
    x = np.asarray(euclidean_radius, dtype=float)
    return 2.0 * np.arctanh(x)


def unit_sphere_volume(n: int) -> float:
    """Area of the unit sphere S^{n-1}: ``2 pi^(n/2) / Gamma(n/2)``."""
    return 2.0 * pi ** (n / 2.0) / gamma(n / 2.0)


def fd_weights(z: float, x: np.ndarray, m: int) -> np.ndarray:
    """Finite-difference weights for derivatives 0..m at ``z`` on nodes ``x``.

    Fornberg's recursion; returns an array of shape (m+1, len(x)).
    """
    x = np.asarray(x, dtype=float)
    npts = x.size
    c = np.zeros((m + 1, npts))
    c1 = 1.0
    c4 = x[0] - z
    c[0, 0] = 1.0
    for i in range(1, npts):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - z
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[k, i] = c1 * (k * c[k - 1, i - 1] - c5 * c[k, i - 1]) / c2
                c[0, i] = -c1 * c5 * c[0, i - 1] / c2
            for k in range(mn, 0, -1):
                c[k, j] = (c4 * c[k, j] - k * c[k - 1, j]) / c3
            c[0, j] = c4 * c[0, j] / c3
        c1 = c2
    return c


def _uniform_diff_matrix(num: int, h: float, order: int, accuracy: int = 4) -> sp.csr_matrix:
    """Sparse derivative matrix on a uniform grid; one-sided windows at the ends."""
    centered = 2 * ((order + 1) // 2) - 1 + accuracy
    onesided = order + accuracy
    if num < onesided:
        raise StencilError(f"need at least {onesided} nodes for derivative order {order}")
    half = centered // 2
    rows, cols, vals = [], [], []
    offsets_c = np.arange(-half, half + 1)
    w_c = fd_weights(0.0, offsets_c.astype(float), order)[order] / h**order
    for i in range(num):
        if i - half >= 0 and i + half < num:
            idx = i + offsets_c
            w = w_c
        else:
            start = 0 if i - half < 0 else num - onesided
            idx = np.arange(start, start + onesided)
            w = fd_weights(float(i), idx.astype(float), order)[order] / h**order
        rows.extend([i] * idx.size)
        cols.extend(idx.tolist())
        vals.extend(w.tolist())
    return sp.csr_matrix((vals, (rows, cols)), shape=(num, num))


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Sampling nodes in s for a fixed dimension.

    ``spacing`` is ``"log"`` (uniform in ln s) or ``"uniform"`` (uniform in s).
    Derivatives are taken with fourth-order stencils in the uniform
    computational variable and mapped back to s by the chain rule.
    """

    n: int
    nodes: np.ndarray
    spacing: str = "log"
    omega: float = field(init=False)

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        if int(self.n) != self.n or self.n < 3:
            raise DomainError(f"dimension must be an integer >= 3, got {self.n!r}")
        if nodes.ndim != 1 or nodes.size < MIN_NODES:
            raise StencilError(f"a grid needs at least {MIN_NODES} nodes")
        if np.any(nodes <= 0):
            raise DomainError("grid nodes must be positive (s = 0 is excluded)")
        if np.any(np.diff(nodes) <= 0):
            raise DomainError("grid nodes must be strictly increasing")
        if self.spacing not in ("log", "uniform"):
            raise DomainError(f"unknown spacing {self.spacing!r}")
        object.__setattr__(self, "omega", unit_sphere_volume(self.n))

    @property
    def s(self) -> np.ndarray:
        return self.nodes

    @property
    def size(self) -> int:
        return self.nodes.size

    @cached_property
    def h(self) -> float:
        x = self.computational
        return float((x[-1] - x[0]) / (x.size - 1))

    @cached_property
    def computational(self) -> np.ndarray:
        return np.log(self.nodes) if self.spacing == "log" else self.nodes.copy()

    def _xdiff(self, order: int) -> sp.csr_matrix:
        key = f"_dx{order}"
        cache = self.__dict__
        if key not in cache:
            cache[key] = _uniform_diff_matrix(self.size, self.h, order)
        return cache[key]

    def diff_matrix(self, order: int) -> sp.csr_matrix:
        """Sparse matrix of d^order/ds^order (order 1, 2 or 3)."""
        key = f"_ds{order}"
        cache = self.__dict__
        if key in cache:
            return cache[key]
        if self.spacing == "uniform":
            mat = self._xdiff(order)
        else:
            inv = sp.diags(1.0 / self.nodes)
            d1, d2 = self._xdiff(1), self._xdiff(2)
            if order == 1:
                mat = inv @ d1
            elif order == 2:
                mat = inv @ inv @ (d2 - d1)
            elif order == 3:
                mat = inv @ inv @ inv @ (self._xdiff(3) - 3.0 * d2 + 2.0 * d1)
            else:
                raise StencilError("derivative order must be 1, 2 or 3")
        cache[key] = sp.csr_matrix(mat)
        return cache[key]

    def derivative(self, u, order: int = 1) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != self.nodes.shape:
            raise StencilError("profile must be sampled on every grid node")
        return self.diff_matrix(order) @ u

    @cached_property
    def laplacian_matrix(self) -> sp.csr_matrix:
        s = self.nodes
        n = self.n
        return sp.csr_matrix(
            sp.diags(1.0 + s * s) @ self.diff_matrix(2)
            + sp.diags(n * s + (n - 1) / s) @ self.diff_matrix(1)
        )

    def refined(self, factor: int = 2) -> "RadialGrid":
        """Same hull with the computational spacing divided by ``factor``."""
        num = (self.size - 1) * factor + 1
        return make_grid(self.n, self.nodes[0], self.nodes[-1], num, self.spacing)


def make_grid(n: int, s_min: float, s_max: float, num: int, spacing: str = "log") -> RadialGrid:
    if not (0 < s_min < s_max):
        raise DomainError(f"need 0 < s_min < s_max, got ({s_min}, {s_max})")
    if spacing == "log":
        nodes = np.exp(np.linspace(np.log(s_min), np.log(s_max), int(num)))
    else:
        nodes = np.linspace(s_min, s_max, int(num))
    nodes[0], nodes[-1] = s_min, s_max
    return RadialGrid(n=n, nodes=nodes, spacing=spacing)


def radial_laplacian(u, grid: RadialGrid, n: int | None = None) -> np.ndarray:
    """``(1+s^2) u'' + (n s + (n-1)/s) u'`` for a radial profile sampled on ``grid``."""
    if n is None or n == grid.n:
        return grid.laplacian_matrix @ np.asarray(u, dtype=float)
    s = grid.nodes
    return (1.0 + s * s) * grid.derivative(u, 2) + (n * s + (n - 1) / s) * grid.derivative(u, 1)


def sphere_area(s, n: int):
    """Hyperbolic area of the geodesic sphere at radial coordinate s."""
    return unit_sphere_volume(n) * np.asarray(s, dtype=float) ** (n - 1)


def volume_density(s, n: int):
    """Radial density of the hyperbolic volume: ``omega s^(n-1) / sqrt(1+s^2)``."""
    s = np.asarray(s, dtype=float)
    return unit_sphere_volume(n) * s ** (n - 1) / np.hypot(1.0, s)


def radial_integral(f, a: float, b: float, points=(), epsrel: float = QUAD_EPSREL,
                    epsabs: float = 0.0) -> float:
    """Adaptive quadrature of ``f`` on [a, b], split at interior ``points``."""
    if b < a:
        raise OrderingError(f"integration bounds out of order: {a} > {b}")
    if a == b:
        return 0.0
    cuts = sorted({a, b, *(p for p in points if a < p < b)})
    total = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        val, _ = quad(f, lo, hi, epsabs=epsabs, epsrel=epsrel, limit=200)
        total += val
    return total


def annulus_measure(r1: float, r2: float, n: int) -> float:
    """Hyperbolic volume of the annulus r1 < s < r2."""
    if r1 > r2:
        raise OrderingError(f"annulus radii out of order: {r1} > {r2}")
    if r1 < 0:
        raise DomainError("annulus radii must be non-negative")
    if r1 == r2:
        return 0.0
    omega = unit_sphere_volume(n)
    scale = r2 ** (n - 1)
    val, _ = quad(lambda s: s ** (n - 1) / np.hypot(1.0, s), r1, r2,
                  epsabs=QUAD_EPSABS * scale, epsrel=QUAD_EPSREL, limit=200)
    return omega * val
