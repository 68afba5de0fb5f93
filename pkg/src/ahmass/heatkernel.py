"""Radial heat kernels on hyperbolic space.

The solver is a cell-centred finite-volume scheme in geodesic distance d with cells
``[i h, (i+1) h]``.  Fluxes cross faces weighted by ``sinh^(n-1)`` of the face, so the face at
the origin carries no flux (the even extension of a radial profile) and a no-flux face closes
the far end.  The discrete mass ``sum |cell| u`` is then conserved by every step.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from .errors import ConfigError, DomainError, FitError, OrderingError, StencilError
from .hypgeom import unit_sphere_volume

__all__ = [
    "KernelRun",
    "GaussianBound",
    "KernelIdentity",
    "hyperbolic_kernel_3d",
    "KernelGrid",
    "kernel_grid",
    "solve_kernel",
    "continue_kernel",
    "gaussian_bound_fit",
    "tail_mass",
    "rescaled_kernel_identity",
    "write_kernel_csv",
    "write_kernel_fit",
]

MIN_SOURCE_NODES = 8


def hyperbolic_kernel_3d(d, t):
    """Heat kernel of H^3: ``(4 pi t)^(-3/2) e^(-t) (d / sinh d) e^(-d^2 / 4t)``."""
    d = np.asarray(d, dtype=float)
    ratio = np.where(d > 1e-8, d / np.sinh(np.maximum(d, 1e-300)), 1.0)
    return (4.0 * np.pi * t) ** -1.5 * np.exp(-t) * ratio * np.exp(-d * d / (4.0 * t))


@dataclass(frozen=True)
class KernelGrid:
    n: int
    h: float
    centers: np.ndarray
    faces: np.ndarray
    volumes: np.ndarray
    areas: np.ndarray

    @property
    def size(self) -> int:
        return self.centers.size


def kernel_grid(n: int, d_max: float = 10.0, h: float = 1e-3) -> KernelGrid:
    if n < 2 or int(n) != n:
        raise DomainError("dimension must be an integer >= 2")
    num = int(round(d_max / h))
    faces = np.linspace(0.0, num * h, num + 1)
    centers = 0.5 * (faces[:-1] + faces[1:])
    omega = unit_sphere_volume(n)
    # exact cell volumes of the sinh^(n-1) density by 8-point Gauss per cell
    x, w = np.polynomial.legendre.leggauss(8)
    nodes = centers[:, None] + 0.5 * h * x
    volumes = omega * 0.5 * h * (np.sinh(nodes) ** (n - 1) @ w)
    areas = omega * np.sinh(faces) ** (n - 1)
    areas[0] = areas[-1] = 0.0
    return KernelGrid(n, h, centers, faces, volumes, areas)


def _operator_bands(grid: KernelGrid):
    """Lower, diagonal, upper entries of the finite-volume Laplacian."""
    coupling = grid.areas[1:-1] / grid.h
    lower = np.zeros(grid.size)
    upper = np.zeros(grid.size)
    upper[:-1] = coupling / grid.volumes[:-1]
    lower[1:] = coupling / grid.volumes[1:]
    diag = -(np.concatenate([[0.0], coupling]) + np.concatenate([coupling, [0.0]])) / grid.volumes
    return lower, diag, upper


def _apply(bands, u):
    lower, diag, upper = bands
    out = diag * u
    out[1:] += lower[1:] * u[:-1]
    out[:-1] += upper[:-1] * u[1:]
    return out


def _step(bands, u, dt, theta):
    """One theta-scheme step of ``u_t = L u`` (theta = 1/2 Crank-Nicolson, 1 implicit Euler)."""
    lower, diag, upper = bands
    ab = np.zeros((3, u.size))
    ab[0, 1:] = -theta * dt * upper[:-1]
    ab[1] = 1.0 - theta * dt * diag
    ab[2, :-1] = -theta * dt * lower[1:]
    rhs = u + (1.0 - theta) * dt * _apply(bands, u) if theta < 1 else u
    return solve_banded((1, 1), ab, rhs)


@dataclass(frozen=True, eq=False)
class KernelRun:
    """Radial kernel samples ``K[k, i]`` at ``times[k]`` and cell centres ``d[i]``.

    ``time_offset = sigma0^2 / 2`` is the age a Gaussian source of width sigma0 already has
    when read as a heat kernel; oracles compare against kernels at ``t + time_offset``.
    """

    n: int
    sigma0: float
    grid: KernelGrid
    times: np.ndarray
    K: np.ndarray
    mass: np.ndarray
    time_offset: float
    settings: dict = field(default_factory=dict)

    @property
    def d(self) -> np.ndarray:
        return self.grid.centers

    def at(self, t: float) -> np.ndarray:
        k = int(np.argmin(np.abs(self.times - t)))
        if not math.isclose(self.times[k], t, rel_tol=1e-9, abs_tol=1e-15):
            raise OrderingError(f"t = {t} is not a stored sample")
        return self.K[k]


def _gaussian_source(grid: KernelGrid, sigma0: float, weight: float = 1.0):
    u = np.exp(-grid.centers**2 / (2.0 * sigma0**2))
    return u / (weight * np.sum(grid.volumes * u))


def _march(grid, u, t_start, times, dt0, growth, dt_max, coefficient=None, startup=2, rel_dt=None):
    """Step ``u_t = c(t) L u`` from t_start through the increasing ``times``; returns snapshots."""
    bands = _operator_bands(grid)
    out = []
    t = t_start
    dt = dt0
    done = 0
    for target in times:
        while t < target - 1e-15:
            step = min(dt, target - t)
            theta = 1.0 if done < 2 * startup else 0.5
            if coefficient is not None:
                c = coefficient(t + 0.5 * step)
                scaled = tuple(c * band for band in bands)
            else:
                scaled = bands
            if theta == 1.0:
                # two implicit Euler half steps per step at start-up (Rannacher)
                u = _step(scaled, _step(scaled, u, 0.5 * step, 1.0), 0.5 * step, 1.0)
                done += 2
            else:
                u = _step(scaled, u, step, 0.5)
            t += step
            dt = min(dt * growth, dt_max)
            if rel_dt is not None:
                dt = min(dt, max(rel_dt * (t - t_start), dt0))
        out.append(u.copy())
    return np.array(out), u


def solve_kernel(n: int, t_max: float, sigma0: float = 1e-2, times=None, num_times: int = 60,
                 d_max: float = 10.0, h: float = 1e-3, dt0: float = 1e-7, growth: float = 1.03,
                 dt_max: float = 2e-4, rel_dt: float = 1e-3) -> KernelRun:
    """Evolve a unit-mass Gaussian source of width sigma0 by the radial heat equation."""
    if not (0 < sigma0 < 0.1):
        raise ConfigError("the source width must satisfy 0 < sigma0 << 1")
    if sigma0 / h < MIN_SOURCE_NODES:
        raise StencilError(f"source width {sigma0} resolved by fewer than {MIN_SOURCE_NODES} cells")
    if t_max <= 0:
        raise ConfigError("t_max must be positive")
    grid = kernel_grid(n, d_max, h)
    if times is None:
        times = np.geomspace(4.0 * sigma0**2, t_max, num_times)
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) <= 0) or times[0] <= 0 or times[-1] > t_max * (1 + 1e-12):
        raise OrderingError("sample times must increase within (0, t_max]")
    u0 = _gaussian_source(grid, sigma0)
    K, _ = _march(grid, u0, 0.0, times, dt0, growth, dt_max, rel_dt=rel_dt)
    mass = K @ grid.volumes
    if np.any(K < -1e-12 * K.max(axis=1, keepdims=True)):
        raise FitError("kernel lost positivity")
    settings = dict(d_max=d_max, h=h, dt0=dt0, growth=growth, dt_max=dt_max, rel_dt=rel_dt)
    return KernelRun(n, sigma0, grid, times, K, mass, 0.5 * sigma0**2, settings)


def continue_kernel(run: KernelRun, t_from: float, extra_times) -> np.ndarray:
    """Restart the solver from the stored slice at ``t_from`` (semigroup check)."""
    s = run.settings
    u = run.at(t_from).copy()
    extra = np.asarray(extra_times, dtype=float)
    K, _ = _march(run.grid, u, 0.0, extra, s["dt0"], s["growth"], s["dt_max"], rel_dt=s["rel_dt"])
    return K


# -- Gaussian bounds ----------------------------------------------------------

@dataclass(frozen=True)
class GaussianBound:
    C: float
    D: float
    C_floor: float
    candidates: np.ndarray
    C_of_D: np.ndarray
    tail_checks: list
    C_tail: float = float("nan")


def tail_mass(run: KernelRun, k: int, radius: float) -> float:
    """``int_{d > radius} K dmu_b`` at sample k, splitting the straddling cell linearly."""
    g = run.grid
    u = run.K[k]
    j = int(np.searchsorted(g.faces, radius) - 1)
    j = min(max(j, 0), g.size - 1)
    frac = (g.faces[j + 1] - radius) / g.h
    return float(frac * g.volumes[j] * u[j] + np.sum(g.volumes[j + 1:] * u[j + 1:]))


def gaussian_bound_fit(run: KernelRun, d_range=(0.0, 3.0), t_min: float | None = None,
                       candidates=None, slack: float = 2.0, tail_multiples=(1.0, 2.0, 3.0, 5.0),
                       floor: float = 1e-12) -> GaussianBound:
    """Fit ``K(d, t) <= C t^(-n/2) exp(-d^2 / (D t))`` over the stored samples.

    Elapsed times are measured from the source, so every sample is read as a kernel started
    at the origin of its own interval.  For each candidate D the smallest
    admissible C is ``max K t^(n/2) exp(d^2/(D t))``; the reported pair is the smallest D whose
    C is within ``slack`` of the large-D floor ``max K t^(n/2)``.  Samples below ``floor`` times
    the slice maximum are excluded as round-off.
    """
    n = run.n
    if t_min is None:
        t_min = 4.0 * run.sigma0**2
    sel_t = run.times >= t_min
    if sel_t.sum() < 2 or run.times[sel_t][-1] / run.times[sel_t][0] < 10.0:
        raise FitError("kernel run must cover at least one decade of t")
    if candidates is None:
        candidates = np.round(np.arange(2.0, 16.0 + 1e-9, 0.05), 10)
    candidates = np.asarray(candidates, dtype=float)
    d = run.d
    sel_d = (d >= d_range[0]) & (d <= d_range[1])
    t = run.times[sel_t] + run.time_offset
    K = run.K[sel_t][:, sel_d]
    dd = d[sel_d]
    valid = K > floor * K.max(axis=1, keepdims=True)
    base = np.log(np.where(valid, K, 1.0)) + 0.5 * n * np.log(t)[:, None]
    c_floor = float(np.exp(np.max(np.where(valid, base, -np.inf))))
    c_of_d = np.array([float(np.exp(np.max(np.where(valid, base + dd**2 / (D * t[:, None]), -np.inf))))
                       for D in candidates])
    ok = np.nonzero(c_of_d <= slack * c_floor)[0]
    if ok.size == 0:
        raise FitError("no feasible (C, D) on the candidate grid")
    i = int(ok[0])
    C, D = float(c_of_d[i]), float(candidates[i])
    # Integrating the pointwise bound over {d > r} gives the Gaussian tail
    # C_tail exp(-r^2 / (2 D t)) with C_tail = C sup_t t^(-n/2) int exp(-d^2/(2 D t)) dmu_b.
    g = run.grid
    ks = np.nonzero(sel_t)[0]
    t_all = run.times[ks] + run.time_offset
    c_tail = C * float(max(tt ** (-n / 2.0) * np.sum(g.volumes * np.exp(-g.centers**2 / (2 * D * tt)))
                           for tt in t_all))
    tails = []
    for k, tk in zip(ks, t_all):
        point_bound = C * tk ** (-n / 2.0) * g.volumes * np.exp(-g.centers**2 / (D * tk))
        for mult in tail_multiples:
            rad = mult * math.sqrt(tk)
            if rad >= g.faces[-1]:
                continue
            val = tail_mass(run, int(k), rad)
            j = int(np.searchsorted(g.faces, rad))
            integrated = float(np.sum(point_bound[max(j - 1, 0):]))
            gauss = c_tail * math.exp(-rad * rad / (2.0 * D * tk))
            tails.append({"t": float(run.times[k]), "radius": rad, "multiple": mult, "tail": val,
                          "integrated_bound": integrated, "gaussian_bound": gauss,
                          "holds": bool(val <= integrated and val <= gauss)})
    return GaussianBound(C, D, c_floor, candidates, c_of_d, tails, c_tail)


# -- rescaled kernel along the flow launched from b --------------------------

@dataclass(frozen=True)
class KernelIdentity:
    n: int
    tbar: float
    sbar: float
    lhs: float
    rhs: float
    error: float


def rescaled_kernel_identity(n: int, tbar: float, sbar: float, sigma0: float = 1e-2,
                             h: float = 1e-3, d_max: float = 10.0, dt_max: float = 2e-5) -> KernelIdentity:
    """``int H(x, tbar; y, sbar) dmu_{g(sbar)}(y)`` versus ``exp(2(n-1)(tbar - sbar) - n(n-1) sbar)``.

    Along the normalized flow launched from b the metric stays b, and the unnormalized flow is
    ``gbar(t) = (1 + 2(n-1)t) b``.  Its heat kernel is produced numerically by integrating
    ``u_t = (1 + 2(n-1)t)^(-1) Lap_b u`` between the reparametrized times, starting from a source
    of unit mass under ``dmu_{gbar(s)}``; H then carries the factor ``exp(2(n-1)(tbar - sbar))``
    and is integrated against ``dmu_b``.
    """
    if not tbar > sbar:
        raise OrderingError("need tbar > sbar")
    if sbar < 0:
        raise DomainError("sbar must be nonnegative")
    k = 2.0 * (n - 1)
    t_of = lambda x: math.expm1(k * x) / k  # noqa: E731
    t0, t1 = t_of(sbar), t_of(tbar)
    grid = kernel_grid(n, d_max, h)
    lam0 = 1.0 + k * t0
    # unit mass under dmu_{gbar(s)} = lam0^(n/2) dmu_b
    u = _gaussian_source(grid, sigma0, weight=lam0 ** (n / 2.0))
    K, _ = _march(grid, u, t0, [t1], dt0=1e-8, growth=1.03, dt_max=dt_max,
                  coefficient=lambda t: 1.0 / (1.0 + k * t))
    H = math.exp(k * (tbar - sbar)) * K[0]
    lhs = float(np.sum(grid.volumes * H))
    rhs = math.exp(k * (tbar - sbar) - n * (n - 1) * sbar)
    return KernelIdentity(n, tbar, sbar, lhs, rhs, abs(lhs - rhs) / rhs)


# -- output ----------------------------------------------------------------

def write_kernel_csv(run: KernelRun, path, d_stride: int = 50):
    with open(path, "w") as fh:
        fh.write("t,s,K\n")
        for k, t in enumerate(run.times):
            for i in range(0, run.grid.size, d_stride):
                fh.write(f"{float(t)!r},{float(math.sinh(run.d[i]))!r},{float(run.K[k, i])!r}\n")


def write_kernel_fit(bound: GaussianBound, path):
    payload = {"C": bound.C, "D": bound.D, "C_floor": bound.C_floor, "C_tail": bound.C_tail,
               "tail_checks": bound.tail_checks}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
