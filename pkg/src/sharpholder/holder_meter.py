"""Regularity measurements: radial energy profiles, exponent fits, Hölder quotients.

``g(r)`` is the Dirichlet energy ``int_{|x - x0| < r} <A grad u, grad u>``.  If
``r^(-2 alpha) g(r)`` is nondecreasing then ``g`` decays like ``r^(2 alpha)``
and ``u`` is ``alpha``-Hölder at ``x0``; the slope of ``log g`` against
``log r`` therefore measures twice the exponent.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .coeff_field import TWO_PI, AngularField, CoefficientField
from .errors import CenterOutsideDomain, DegenerateWindow
from .fem_solver import SolutionField, interpolate
from .sharp_example import AnalyticSolution

ANALYTIC_CUTOFF = 1e-8
FEM_MONOTONICITY_RTOL = 1e-6

@dataclass
class EnergyTrace:
    center: tuple
    radii: np.ndarray
    energies: np.ndarray

    def normalized(self, alpha: float) -> np.ndarray:
        """``G(r) = r^(-2 alpha) g(r)``."""
        return self.radii ** (-2.0 * alpha) * self.energies

    def write_csv(self, path, alpha: float) -> Path:
        path = Path(path)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "g", "G"])
            for r, g, G in zip(self.radii, self.energies, self.normalized(alpha)):
                w.writerow([repr(float(r)), repr(float(g)), repr(float(G))])
        return path


class FitResult(NamedTuple):
    exponent: float
    residual: float
    n_points: int


def _check_center(domain, center, radii):
    center = np.asarray(center, dtype=float)
    if not domain.contains(center):
        raise CenterOutsideDomain(f"center {center.tolist()} lies outside the domain")
    radii = np.asarray(radii, dtype=float)
    if radii.ndim != 1 or radii.size == 0 or np.any(np.diff(radii) <= 0) or radii[0] <= 0:
        raise ValueError("radii must be positive and strictly increasing")
    if radii[-1] > domain.dist_to_boundary(center) * (1 + 1e-12):
        raise ValueError("largest radius leaves the domain")
    return center, radii


def energy_profile(field: CoefficientField, u, center, radii, n_theta: int = 256,
                   order: int = 16) -> EnergyTrace:
    """Energy in the disks ``|x - center| < r`` for each radius.

    FEM fields have constant energy density per triangle, so triangles cut
    by the circle contribute density times the exact clipped area.
    Analytic handles use polar quadrature about ``center`` ring by ring
    (Gauss-Legendre in r, geometric panels down to ANALYTIC_CUTOFF on the
    innermost ring, trapezoid or breakpoint-aligned panels in angle). The
    disk inside the cutoff is filled in by a geometric tail.
    """
    center, radii = _check_center(field.domain, center, radii)
    if isinstance(u, SolutionField):
        g = _fem_energies(u, center, radii)
    else:
        if not isinstance(u, AnalyticSolution):
            u = AnalyticSolution(u)
        g = np.cumsum(_ring_energies(field, u, center, radii, n_theta, order))
    return EnergyTrace((float(center[0]), float(center[1])), radii, g)


def disk_triangle_area(P: np.ndarray, center, r: float) -> np.ndarray:
    """Exact area of ``triangle ∩ disk`` for triangles P (T, 3, 2), counterclockwise.

    Sums, over the edges A->B, the signed area of the disk intersected with
    the triangle (center, A, B): straight pieces inside the circle contribute
    ``cross/2``, pieces outside contribute a circular sector.
    """
    A = P - np.asarray(center, dtype=float)
    B = np.roll(A, -1, axis=1)
    d = B - A
    a = np.sum(d * d, axis=-1)
    b = np.sum(A * d, axis=-1)
    c = np.sum(A * A, axis=-1) - r * r
    disc = b * b - a * c
    sq = np.sqrt(np.maximum(disc, 0.0))
    hit = disc > 0
    t1 = np.where(hit, np.clip((-b - sq) / a, 0.0, 1.0), 1.0)
    t2 = np.where(hit, np.clip((-b + sq) / a, 0.0, 1.0), 1.0)
    P1 = A + t1[..., None] * d
    P2 = A + t2[..., None] * d

    def cross(u, v):
        return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]

    def sector(u, v):
        return 0.5 * r * r * np.arctan2(cross(u, v), np.sum(u * v, axis=-1))

    total = sector(A, P1) + 0.5 * cross(P1, P2) + sector(P2, B)
    return np.sum(total, axis=1)


def _fem_energies(sol: SolutionField, center, radii):
    mesh = sol.mesh
    dens = sol.energy_density()
    P = mesh.vertices[mesh.triangles]
    area = np.abs(mesh.areas())
    dv = np.hypot(P[..., 0] - center[0], P[..., 1] - center[1])
    cen = P.mean(axis=1)
    dc = np.hypot(cen[:, 0] - center[0], cen[:, 1] - center[1])
    spread = np.max(np.hypot(P[..., 0] - cen[:, None, 0], P[..., 1] - cen[:, None, 1]), axis=1)
    out = np.empty(len(radii))
    for i, r in enumerate(radii):
        full = np.all(dv <= r, axis=1)
        cut = ~full & (dc < r + spread)
        clipped = np.clip(disk_triangle_area(P[cut], center, r), 0.0, area[cut])
        out[i] = np.sum(dens[full] * area[full]) + np.sum(dens[cut] * clipped)
    return out


def _angle_rule(field, center, n_theta, order):
    if (isinstance(field, AngularField) and not field.profile.is_smooth
            and field.center[0] == center[0] and field.center[1] == center[1]):
        bp = field.profile.breakpoints
        x, w = np.polynomial.legendre.leggauss(order)
        per = max(1, int(np.ceil(n_theta / (order * (bp.size - 1)))))
        edges = np.concatenate([np.linspace(a, b, per + 1)[:-1] for a, b in zip(bp[:-1], bp[1:])] + [[TWO_PI]])
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[:-1] + edges[1:])
        return (mid[:, None] + half[:, None] * x).ravel(), (half[:, None] * w).ravel()
    t = np.arange(n_theta) * (TWO_PI / n_theta)
    return t, np.full(n_theta, TWO_PI / n_theta)


def _ring_energies(field, u, center, radii, n_theta, order):
    t, wt = _angle_rule(field, center, n_theta, order)
    e = np.stack([np.cos(t), np.sin(t)], axis=-1)
    x, w = np.polynomial.legendre.leggauss(order)

    def ring(edges):
        half = 0.5 * np.diff(edges)
        r = ((0.5 * (edges[:-1] + edges[1:]))[:, None] + half[:, None] * x).ravel()
        wr = (half[:, None] * w).ravel()
        pts = center + r[:, None, None] * e[None, :, :]
        gu = u.gradient(pts)
        A = field.entries(pts)
        dens = A[..., 0] * gu[..., 0] ** 2 + 2 * A[..., 1] * gu[..., 0] * gu[..., 1] + A[..., 2] * gu[..., 1] ** 2
        return float(np.sum((wr * r)[:, None] * wt[None, :] * dens))

    a = min(ANALYTIC_CUTOFF, 0.5 * radii[0])
    inner = np.concatenate([[a], radii[:-1]])
    out = np.empty(len(radii))
    for i, (lo, hi) in enumerate(zip(inner, radii)):
        if i == 0:
            n_pan = max(1, int(np.ceil(np.log2(hi / lo))))
            out[i] = ring(np.geomspace(lo, hi, n_pan + 1))
        else:
            out[i] = ring(np.linspace(lo, hi, 3))
    # energy inside the cutoff disk: geometric extrapolation from the two
    # innermost dyadic rings, exact when u is homogeneous about the center
    e1, e2 = ring(np.array([a, 2 * a])), ring(np.array([2 * a, 4 * a]))
    if e1 > 0 and np.isfinite(e2) and e2 > e1:
        out[0] += e1 / (e2 / e1 - 1.0)
    return out


def fit_exponent(trace: EnergyTrace, window=None, rmin=None, rmax=None) -> FitResult:
    """Half the least-squares slope of ``log g`` against ``log r``.

    ``window`` is an index range (slice or ``(start, stop)``); ``rmin``/``rmax``
    additionally restrict by radius.
    """
    idx = np.arange(trace.radii.size)
    if window is not None:
        sl = window if isinstance(window, slice) else slice(*window)
        idx = idx[sl]
    r, g = trace.radii[idx], trace.energies[idx]
    keep = np.ones(r.size, dtype=bool)
    if rmin is not None:
        keep &= r >= rmin
    if rmax is not None:
        keep &= r <= rmax
    r, g = r[keep], g[keep]
    if r.size < 4 or np.any(g <= 0):
        raise DegenerateWindow("fit window needs at least 4 points with positive energy")
    X = np.log(r)
    Y = np.log(g)
    slope, intercept = np.polyfit(X, Y, 1)
    resid = float(np.sqrt(np.mean((Y - (slope * X + intercept)) ** 2)))
    return FitResult(float(slope / 2.0), resid, int(r.size))


def monotonicity_check(trace: EnergyTrace, alpha: float) -> float:
    """Smallest increment of ``G(r) = r^(-2 alpha) g(r)`` between consecutive radii."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    G = trace.normalized(alpha)
    return float(np.min(np.diff(G))) if G.size > 1 else 0.0


def fem_monotonicity_tolerance(trace: EnergyTrace) -> float:
    return FEM_MONOTONICITY_RTOL * float(trace.energies[-1])


def _evaluate(u, pts):
    if isinstance(u, SolutionField):
        return interpolate(u, pts)
    return np.asarray(u(pts), dtype=float)


def pointwise_holder(u, compact, alpha: float, sample_n: int = 200, seed: int = 0, grid_n: int = 12) -> float:
    """Sampled Hölder seminorm on a disk: a lower bound for the true supremum.

    Uses ``sample_n`` random pairs plus every pair from a coarse grid.
    """
    if sample_n < 100:
        raise ValueError("sample_n must be at least 100")
    rng = np.random.default_rng(seed)
    c = np.asarray(compact.center, dtype=float)
    R = compact.radius
    rad = R * np.sqrt(rng.uniform(size=2 * sample_n))
    ang = rng.uniform(0, TWO_PI, size=2 * sample_n)
    pts = c + np.stack([rad * np.cos(ang), rad * np.sin(ang)], axis=-1)
    vals = _evaluate(u, pts)
    d = np.hypot(*(pts[:sample_n] - pts[sample_n:]).T)
    ok = d > 0
    best = float(np.max(np.abs(vals[:sample_n] - vals[sample_n:])[ok] / d[ok] ** alpha))

    g = np.linspace(-R, R, grid_n)
    xx, yy = np.meshgrid(g, g)
    gp = np.stack([xx.ravel(), yy.ravel()], axis=-1)
    gp = gp[np.hypot(gp[:, 0], gp[:, 1]) <= R] + c
    gv = _evaluate(u, gp)
    dist = np.hypot(gp[:, None, 0] - gp[None, :, 0], gp[:, None, 1] - gp[None, :, 1])
    diff = np.abs(gv[:, None] - gv[None, :])
    mask = dist > 0
    best = max(best, float(np.max(diff[mask] / dist[mask] ** alpha)))
    return best


def radial_quotients(u, center, radii, alpha: float, n_angles: int = 4096) -> np.ndarray:
    """``max_theta |u(center + rho e^{i theta}) - u(center)| / rho^alpha`` for each rho."""
    center = np.asarray(center, dtype=float)
    t = np.arange(n_angles) * (TWO_PI / n_angles)
    e = np.stack([np.cos(t), np.sin(t)], axis=-1)
    u0 = float(_evaluate(u, center[None, :])[0])
    out = []
    for rho in np.asarray(radii, dtype=float):
        v = _evaluate(u, center + rho * e)
        out.append(np.max(np.abs(v - u0)) / rho ** alpha)
    return np.array(out)
