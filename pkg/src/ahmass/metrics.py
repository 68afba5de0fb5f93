"""Rotationally symmetric perturbations e = g - b of the hyperbolic metric.

A radial symmetric two-tensor is stored through two profiles in the
b-orthonormal frame: ``alpha = e(N, N)`` for the unit radial vector N and
``beta`` for the (n-1)-fold tangential eigenvalue.  In the s coordinate

    g = (1 + alpha) ds^2 / (1 + s^2) + (1 + beta) s^2 g_round.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .errors import AmplitudeError, DomainError, MetricError, RangeError, RegularityError
from .hypgeom import RadialGrid

__all__ = [
    "REGULARITY_LEVELS",
    "RadialPerturbation",
    "WarpedMetric",
    "EvalRecord",
    "zero_perturbation",
    "constant_perturbation",
    "schwarzschild_ads",
    "schwarzschild_horizon",
    "c0_kink",
    "triangle_wave",
    "evaluate",
    "write_profile_csv",
    "read_profile_csv",
]

REGULARITY_LEVELS = {"C0": 0, "C1": 1, "C2": 2, "analytic": 3}

Profile = Callable[[np.ndarray], np.ndarray]


class EvalRecord(NamedTuple):
    alpha: float
    beta: float
    trace: float
    radial_quadratic: float
    norm_b: float


@dataclass(frozen=True, eq=False)
class RadialPerturbation:
    """Profiles alpha(s), beta(s) sampled on a grid, with optional exact callables.

    When ``alpha_fn``/``beta_fn`` are given they are used for off-grid
    evaluation; otherwise C0 profiles are interpolated linearly (no overshoot,
    corners preserved) and smoother ones with cubic splines.
    """

    grid: RadialGrid
    alpha: np.ndarray
    beta: np.ndarray
    tau: float
    regularity: str = "C2"
    alpha_fn: Profile | None = None
    beta_fn: Profile | None = None
    label: str = ""
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        a = np.array(self.alpha, dtype=float)
        b = np.array(self.beta, dtype=float)
        if a.shape != self.grid.nodes.shape or b.shape != self.grid.nodes.shape:
            raise DomainError("alpha and beta must be sampled on the grid nodes")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)
        if self.regularity not in REGULARITY_LEVELS:
            raise DomainError(f"unknown regularity tag {self.regularity!r}")
        if not (self.tau > 0):
            raise DomainError("decay exponent tau must be positive")
        if np.any(1.0 + a <= 0) or np.any(1.0 + b <= 0):
            raise MetricError("g = b + e is not positive definite at some node")

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def s(self) -> np.ndarray:
        return self.grid.nodes

    @property
    def trace(self) -> np.ndarray:
        return self.alpha + (self.n - 1) * self.beta

    @property
    def norm_b(self) -> np.ndarray:
        return np.sqrt(self.alpha**2 + (self.n - 1) * self.beta**2)

    def sup_norm(self) -> float:
        return float(np.max(self.norm_b))

    def require(self, level: str):
        if REGULARITY_LEVELS[self.regularity] < REGULARITY_LEVELS[level]:
            raise RegularityError(
                f"operation needs a {level} profile but e is tagged {self.regularity}; "
                "mollify it with the flow first"
            )

    def decay_constant(self, s_from: float = 10.0) -> float:
        """``sup_{s >= s_from} s^tau (|alpha| + |beta|)`` over the sampled nodes."""
        mask = self.s >= s_from
        if not np.any(mask):
            return 0.0
        s = self.s[mask]
        return float(np.max(s**self.tau * (np.abs(self.alpha[mask]) + np.abs(self.beta[mask]))))

    # -- interpolation -------------------------------------------------
    def _interp(self, which: str, deriv: int):
        key = (which, deriv)
        if key in self._cache:
            return self._cache[key]
        values = self.alpha if which == "alpha" else self.beta
        if deriv:
            values = self.grid.derivative(values, deriv)
        if self.regularity == "C0":
            s = self.s
            fn = lambda x, v=values: np.interp(x, s, v)  # noqa: E731
        else:
            fn = CubicSpline(self.s, values)
        self._cache[key] = fn
        return fn

    def _check_hull(self, s):
        s = np.asarray(s, dtype=float)
        lo, hi = self.s[0], self.s[-1]
        tol = 1e-12 * hi
        if np.any(s < lo - tol) or np.any(s > hi + tol):
            raise RangeError(f"s outside the sampled hull [{lo}, {hi}]")
        return np.clip(s, lo, hi)

    def alpha_at(self, s, deriv: int = 0):
        s = self._check_hull(s)
        if deriv == 0 and self.alpha_fn is not None:
            return self.alpha_fn(s)
        if deriv:
            self.require("C1" if deriv == 1 else "C2")
        return self._interp("alpha", deriv)(s)

    def beta_at(self, s, deriv: int = 0):
        s = self._check_hull(s)
        if deriv == 0 and self.beta_fn is not None:
            return self.beta_fn(s)
        if deriv:
            self.require("C1" if deriv == 1 else "C2")
        return self._interp("beta", deriv)(s)

    def grid_derivatives(self, order: int = 2):
        """(alpha', beta'[, alpha'', beta'']) on the grid nodes."""
        self.require("C1" if order == 1 else "C2")
        key = ("grid_derivatives", order)
        if key not in self._cache:
            g = self.grid
            out = [g.derivative(self.alpha, 1), g.derivative(self.beta, 1)]
            if order >= 2:
                out += [g.derivative(self.alpha, 2), g.derivative(self.beta, 2)]
            self._cache[key] = tuple(out)
        return self._cache[key]

    # -- algebra -------------------------------------------------------
    def scaled(self, lam: float) -> "RadialPerturbation":
        """The perturbation ``lam * e`` on the same grid."""
        afn = (lambda x, f=self.alpha_fn: lam * f(x)) if self.alpha_fn else None
        bfn = (lambda x, f=self.beta_fn: lam * f(x)) if self.beta_fn else None
        return replace(self, alpha=lam * self.alpha, beta=lam * self.beta,
                       alpha_fn=afn, beta_fn=bfn, _cache={})

    def with_profiles(self, alpha, beta, regularity: str | None = None) -> "RadialPerturbation":
        return replace(self, alpha=alpha, beta=beta, alpha_fn=None, beta_fn=None,
                       regularity=regularity or self.regularity, _cache={})


@dataclass(frozen=True, eq=False)
class WarpedMetric:
    """``g = p(s) ds^2 + q2(s) g_round`` sampled on a grid."""

    grid: RadialGrid
    p: np.ndarray
    q2: np.ndarray
    regularity: str = "C2"

    def __post_init__(self):
        if np.any(np.asarray(self.p) <= 0) or np.any(np.asarray(self.q2) <= 0):
            raise MetricError("warped coefficients must be positive")

    @property
    def n(self) -> int:
        return self.grid.n

    @classmethod
    def from_perturbation(cls, e: RadialPerturbation) -> "WarpedMetric":
        s = e.s
        return cls(e.grid, (1.0 + e.alpha) / (1.0 + s * s), (1.0 + e.beta) * s * s, e.regularity)

    @classmethod
    def hyperbolic(cls, grid: RadialGrid) -> "WarpedMetric":
        s = grid.nodes
        return cls(grid, 1.0 / (1.0 + s * s), s * s, "analytic")

    def to_perturbation(self, tau: float = 1.0) -> RadialPerturbation:
        s = self.grid.nodes
        return RadialPerturbation(self.grid, self.p * (1.0 + s * s) - 1.0, self.q2 / (s * s) - 1.0,
                                  tau=tau, regularity=self.regularity)

    def scaled(self, c: float) -> "WarpedMetric":
        return WarpedMetric(self.grid, c * np.asarray(self.p), c * np.asarray(self.q2), self.regularity)


def zero_perturbation(grid: RadialGrid, tau: float = 1.0) -> RadialPerturbation:
    z = np.zeros_like(grid.nodes)
    zero = lambda x: np.zeros_like(np.asarray(x, dtype=float))  # noqa: E731
    return RadialPerturbation(grid, z, z, tau=tau, regularity="analytic",
                              alpha_fn=zero, beta_fn=zero, label="zero")


def constant_perturbation(grid: RadialGrid, eps: float) -> RadialPerturbation:
    """``e = eps * b``; not decaying, so tau is nominal."""
    c = np.full_like(grid.nodes, eps)
    const = lambda x: np.full_like(np.asarray(x, dtype=float), eps)  # noqa: E731
    return RadialPerturbation(grid, c, c.copy(), tau=1.0, regularity="analytic",
                              alpha_fn=const, beta_fn=const, label=f"constant({eps})")


def schwarzschild_horizon(m: float, n: int) -> float:
    """Largest s with ``1 + s^2 - 2 m s^(2-n) = 0`` (0 when m = 0)."""
    if m < 0:
        raise DomainError("mass parameter must be non-negative")
    if m == 0:
        return 0.0
    lapse = lambda s: 1.0 + s * s - 2.0 * m * s ** (2 - n)  # noqa: E731
    hi = 1.0
    while lapse(hi) <= 0:
        hi *= 2.0
    return brentq(lapse, 1e-300 ** (1.0 / n), hi, xtol=1e-15, rtol=1e-15)


def schwarzschild_ads(m: float, n: int, grid: RadialGrid) -> RadialPerturbation:
    """AdS-Schwarzschild written as a radial perturbation of b.

    ``alpha = (1+s^2) / (1+s^2 - 2 m s^(2-n)) - 1``, ``beta = 0``.
    """
    if grid.n != n:
        raise DomainError("grid dimension does not match n")
    horizon = schwarzschild_horizon(m, n)
    if grid.nodes[0] <= horizon:
        raise DomainError(f"grid reaches the horizon; the minimal admissible s is {horizon:.12g}")

    def alpha_fn(s):
        s = np.asarray(s, dtype=float)
        w = 2.0 * m * s ** (2 - n)
        return w / (1.0 + s * s - w)

    zero = lambda x: np.zeros_like(np.asarray(x, dtype=float))  # noqa: E731
    s = grid.nodes
    return RadialPerturbation(grid, alpha_fn(s), np.zeros_like(s), tau=float(n),
                              regularity="analytic", alpha_fn=alpha_fn, beta_fn=zero,
                              label=f"schwarzschild_ads(m={m})")


def triangle_wave(x, rise: float = 0.5):
    """Period-1 wave in [0, 1]: rises on a fraction ``rise`` of each period, then falls.

    Corners sit at the integers and at ``integer + rise``.
    """
    if not (0.0 < rise < 1.0):
        raise DomainError("rise fraction must lie in (0, 1)")
    frac = np.asarray(x, dtype=float) % 1.0
    return np.where(frac < rise, frac / rise, (1.0 - frac) / (1.0 - rise))


def c0_kink(amplitude: float, tau: float, kink_scale: float, n: int, grid: RadialGrid,
            phase: float = 0.5, rise: float = 0.5, weight: float = 0.5) -> RadialPerturbation:
    """Continuous, piecewise-smooth perturbation with corners at geometric spacing.

    ``alpha = amplitude * <s>^-tau * (1 + weight * tri(ln s / ln kink_scale))`` and
    ``beta`` uses the same wave shifted by ``phase``.  ``<s> = sqrt(1+s^2)`` keeps
    the profile bounded near the origin while decaying like ``s^-tau``.
    """
    if grid.n != n:
        raise DomainError("grid dimension does not match n")
    if kink_scale <= 1.0:
        raise DomainError("kink_scale must exceed 1")
    lk = np.log(kink_scale)

    def make(shift):
        def fn(s):
            s = np.asarray(s, dtype=float)
            env = amplitude * (1.0 + s * s) ** (-tau / 2.0)
            return env * (1.0 + weight * triangle_wave(np.log(s) / lk + shift, rise))
        return fn

    afn, bfn = make(0.0), make(phase)
    s = grid.nodes
    alpha, beta = afn(s), bfn(s)
    if np.any(1.0 + alpha <= 0) or np.any(1.0 + beta <= 0):
        raise AmplitudeError(f"amplitude {amplitude} makes g degenerate")
    return RadialPerturbation(grid, alpha, beta, tau=float(tau), regularity="C0",
                              alpha_fn=afn, beta_fn=bfn,
                              label=f"c0_kink(amp={amplitude}, tau={tau}, k={kink_scale})")


def evaluate(e: RadialPerturbation, s: float) -> EvalRecord:
    a = float(e.alpha_at(s))
    b = float(e.beta_at(s))
    n = e.n
    return EvalRecord(alpha=a, beta=b, trace=a + (n - 1) * b, radial_quadratic=a,
                      norm_b=float(np.sqrt(a * a + (n - 1) * b * b)))


def write_profile_csv(path, s, values, name: str):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["s", name])
        for x, v in zip(np.asarray(s, dtype=float), np.asarray(values, dtype=float)):
            w.writerow([repr(float(x)), repr(float(v))])


def read_profile_csv(path):
    """Return ``(name, s, values)`` from a two-column profile CSV."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if len(header) != 2 or header[0] != "s":
        raise DomainError(f"unexpected profile header {header}")
    data = np.array([[float(a), float(b)] for a, b in body])
    return header[1], data[:, 0], data[:, 1]
