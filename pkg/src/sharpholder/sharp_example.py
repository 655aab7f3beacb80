"""The extremal field ``A = (1/k) I + (k - 1/k) x x^T / |x|^2`` and its exact solution.

With ``abar = 2 pi / int k`` the function ``u = |x|^abar cos(abar int_0^{arg x} k)``
solves ``div(A grad u) = 0`` weakly in the unit disk and is Hölder continuous
with exponent exactly ``abar`` at the origin.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .coeff_field import TWO_PI, AngularField, AngularProfile, CoefficientField, DiskDomain
from .errors import QuadratureBreakdown

FD_STEP = 1e-5
INNER_CUTOFF = 1e-6


class AnalyticSolution:
    """A scalar function with an optional exact gradient.

    ``value`` and ``gradient`` act on arrays of points of shape (..., 2).
    Without ``gradient`` central differences with step ``FD_STEP`` are used.
    """

    def __init__(self, value, gradient=None, singular_point=None):
        self._value = value
        self._gradient = gradient
        self.singular_point = singular_point

    def __call__(self, pts):
        return self._value(np.asarray(pts, dtype=float))

    def gradient(self, pts):
        pts = np.asarray(pts, dtype=float)
        if self._gradient is not None:
            return self._gradient(pts)
        ex = np.array([FD_STEP, 0.0])
        ey = np.array([0.0, FD_STEP])
        gx = (self._value(pts + ex) - self._value(pts - ex)) / (2 * FD_STEP)
        gy = (self._value(pts + ey) - self._value(pts - ey)) / (2 * FD_STEP)
        return np.stack([gx, gy], axis=-1)


def adef_entries(profile: AngularProfile, pts) -> np.ndarray:
    """Entries of ``(1/k) I + (k - 1/k) x x^T/|x|^2`` computed literally."""
    pts = np.asarray(pts, dtype=float)
    x, y = pts[..., 0], pts[..., 1]
    r2 = x * x + y * y
    k = profile(np.arctan2(y, x))
    ik = 1.0 / k
    d = (k - ik) / r2
    return np.stack([ik + d * x * x, d * x * y, ik + d * y * y], axis=-1)


@dataclass
class SharpExample:
    k: AngularProfile
    field: AngularField
    alpha_bar: float

    def phase(self, theta):
        """``abar * int_0^theta k`` for theta in [0, 2 pi)."""
        return self.alpha_bar * self.k.cumulative(np.mod(theta, TWO_PI))

    def value(self, pts):
        pts = np.asarray(pts, dtype=float)
        rho = np.hypot(pts[..., 0], pts[..., 1])
        theta = np.arctan2(pts[..., 1], pts[..., 0])
        return rho ** self.alpha_bar * np.cos(self.phase(theta))

    def gradient(self, pts):
        """Cartesian gradient from the polar derivatives ``u_rho`` and ``u_theta / rho``."""
        pts = np.asarray(pts, dtype=float)
        rho = np.hypot(pts[..., 0], pts[..., 1])
        theta = np.arctan2(pts[..., 1], pts[..., 0])
        ab = self.alpha_bar
        ph = self.phase(theta)
        rpow = rho ** (ab - 1.0)
        u_rho = ab * rpow * np.cos(ph)
        u_t_over_rho = -ab * self.k(theta) * rpow * np.sin(ph)
        c, s = np.cos(theta), np.sin(theta)
        return np.stack([c * u_rho - s * u_t_over_rho, s * u_rho + c * u_t_over_rho], axis=-1)

    @property
    def solution(self) -> AnalyticSolution:
        return AnalyticSolution(self.value, self.gradient, singular_point=(0.0, 0.0))

    def energy(self, r):
        """Exact Dirichlet energy over the disk of radius r about the origin: ``pi r^(2 abar)``."""
        return math.pi * np.asarray(r, dtype=float) ** (2 * self.alpha_bar)


def build(k: AngularProfile) -> SharpExample:
    field = AngularField(k, (0.0, 0.0), DiskDomain((0.0, 0.0), 1.0))
    return SharpExample(k, field, TWO_PI / k.integral())


def eval_solution(ex: SharpExample, x) -> float:
    return float(ex.value(np.asarray(x, dtype=float)))


def max_formula_inverse_alpha_bar(k: AngularProfile, n: int = 200_000) -> float:
    """``max(mean k, sup (k + 1/k)/2)``; the supremum is taken on a dense angle sample."""
    t = np.arange(n) * (TWO_PI / n)
    kt = k(t)
    return max(k.integral() / TWO_PI, float(np.max(0.5 * (kt + 1.0 / kt))))


# -- weak residual ---------------------------------------------------------------

def _bump(s):
    out = np.zeros_like(s)
    inside = s < 1.0
    out[inside] = np.exp(1.0 / (s[inside] ** 2 - 1.0))
    return out


def _bump_ds(s):
    out = np.zeros_like(s)
    inside = s < 1.0
    si = s[inside]
    d = si ** 2 - 1.0
    out[inside] = np.exp(1.0 / d) * (-2.0 * si / d ** 2)
    return out


def bump_family(domain: DiskDomain, test_n: int):
    """Centers on a ``test_n x test_n`` grid and a common support radius inside the domain."""
    R = domain.radius
    g = np.linspace(-0.45 * R, 0.45 * R, test_n)
    xx, yy = np.meshgrid(g, g, indexing="ij")
    centers = np.stack([xx.ravel(), yy.ravel()], axis=-1) + np.asarray(domain.center)
    return centers, 0.3 * R


def bump_integral(delta: float) -> float:
    """``int v`` for the radial bump of support radius delta (1D quadrature)."""
    x, w = np.polynomial.legendre.leggauss(200)
    s = 0.5 * (x + 1.0)
    return float(TWO_PI * delta ** 2 * 0.5 * np.sum(w * _bump(s) * s))


def _flux_pairing(field, u, pts, wts, c, delta):
    grad_u = u.gradient(pts)
    e = field.entries(pts)
    fx = e[..., 0] * grad_u[..., 0] + e[..., 1] * grad_u[..., 1]
    fy = e[..., 1] * grad_u[..., 0] + e[..., 2] * grad_u[..., 1]
    dx, dy = pts[..., 0] - c[0], pts[..., 1] - c[1]
    dist = np.hypot(dx, dy)
    s = dist / delta
    with np.errstate(invalid="ignore", divide="ignore"):
        g = np.where(dist > 0, _bump_ds(s) / (delta * dist), 0.0)
    val = wts * g * (fx * dx + fy * dy)
    if not np.all(np.isfinite(val)):
        raise QuadratureBreakdown("non-finite integrand in weak residual")
    return float(val.sum())


def _pairing_bump_centered(field, u, c, delta, n_r=48, n_t=256):
    x, w = np.polynomial.legendre.leggauss(n_r)
    r = 0.5 * delta * (x + 1.0)
    wr = 0.5 * delta * w
    t = np.arange(n_t) * (TWO_PI / n_t)
    pts = c + r[:, None, None] * np.stack([np.cos(t), np.sin(t)], axis=-1)[None, :, :]
    wts = (wr * r)[:, None] * np.full(n_t, TWO_PI / n_t)[None, :]
    return _flux_pairing(field, u, pts, wts, c, delta)


def _panels(lo, hi, cuts, max_width, order):
    """Gauss-Legendre nodes/weights on [lo, hi] split at ``cuts`` and to ``max_width``."""
    edges = [lo, *sorted(x for x in cuts if lo < x < hi), hi]
    x, w = np.polynomial.legendre.leggauss(order)
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        m = max(1, int(np.ceil((b - a) / max_width)))
        sub = np.linspace(a, b, m + 1)
        half = 0.5 * np.diff(sub)
        mid = 0.5 * (sub[:-1] + sub[1:])
        nodes.append((mid[:, None] + half[:, None] * x[None, :]).ravel())
        weights.append((half[:, None] * w[None, :]).ravel())
    return np.concatenate(nodes), np.concatenate(weights)


def _angle_cuts(field, p, lo, hi):
    if not isinstance(field, AngularField) or field.profile.is_smooth:
        return []
    if np.hypot(field.center[0] - p[0], field.center[1] - p[1]) > 0:
        return []
    bp = field.profile.breakpoints
    shifts = TWO_PI * np.arange(np.floor(lo / TWO_PI) - 1, np.ceil(hi / TWO_PI) + 2)
    return (bp[None, :] + shifts[:, None]).ravel().tolist()


def _pairing_about_point(field, u, c, delta, p, order=16, chord_panels=12):
    """Integrate in polar coordinates about the singular point ``p``.

    Rays leaving ``p`` cross the bump support on ``[rho_in, rho_out]``; when
    ``p`` is inside the support ``rho_in`` is INNER_CUTOFF and radial panels
    are geometric.  Angular panels are split at the profile breakpoints so a
    piecewise-constant field is smooth on every panel.
    """
    p = np.asarray(p, dtype=float)
    d = p - c
    dn = float(np.hypot(*d))
    inside = dn < delta
    if inside:
        lo, hi = 0.0, TWO_PI
    else:
        phi_c = math.atan2(-d[1], -d[0])
        beta = math.asin(min(1.0, delta / dn))
        lo, hi = phi_c - beta, phi_c + beta
    t, wt = _panels(lo, hi, _angle_cuts(field, p, lo, hi), TWO_PI / 64, order)
    e = np.stack([np.cos(t), np.sin(t)], axis=-1)
    b = e @ d
    disc = np.maximum(b * b - (dn * dn - delta * delta), 0.0)
    rho_out = -b + np.sqrt(disc)
    x, w = np.polynomial.legendre.leggauss(order)
    if inside:
        n_pan = int(np.ceil(np.log2(0.25 * rho_out.max() / INNER_CUTOFF))) + 1
        fr = np.concatenate([np.geomspace(INNER_CUTOFF, 0.25, n_pan),
                             np.linspace(0.25, 1.0, chord_panels + 1)[1:]])
        edges = fr[None, :] * rho_out[:, None]
        edges[:, 0] = INNER_CUTOFF
    else:
        rho_in = np.maximum(-b - np.sqrt(disc), 0.0)
        edges = rho_in[:, None] + np.linspace(0.0, 1.0, chord_panels + 1)[None, :] * (rho_out - rho_in)[:, None]

    def pairing(edges):
        a, bb = edges[:, :-1], edges[:, 1:]
        half = 0.5 * (bb - a)
        r = ((0.5 * (a + bb))[..., None] + half[..., None] * x).reshape(len(t), -1)
        wr = (half[..., None] * w).reshape(len(t), -1)
        pts = p + r[..., None] * e[:, None, :]
        return _flux_pairing(field, u, pts, wr * r * wt[:, None], c, delta)

    total = pairing(edges)
    if inside:
        # the disk rho < INNER_CUTOFF: grad v is nearly constant there and the
        # flux homogeneous, so dyadic rings scale geometrically
        ring = lambda f: pairing(np.tile([f * INNER_CUTOFF, 2 * f * INNER_CUTOFF], (len(t), 1)))
        i1, i2 = ring(1.0), ring(2.0)
        if i1 != 0 and 1.0 < i2 / i1 < 4.0:
            total += i1 / (i2 / i1 - 1.0)
    return total


def weak_residual(field: CoefficientField, u, test_n: int = 8) -> float:
    """Max over a family of bump test functions ``v`` of ``|int <A grad u, grad v>|``.

    Bumps whose support contains the singular point of ``u`` or ``A`` (and
    every bump, when ``A`` jumps along rays from that point) are integrated in
    polar coordinates about the singular point with inner cutoff
    INNER_CUTOFF, plus a geometric tail for the cut-out disk; the rest in
    polar coordinates about the bump center.
    """
    if test_n < 8:
        raise ValueError("test_n must be at least 8")
    if not isinstance(u, AnalyticSolution):
        u = AnalyticSolution(u)
    centers, delta = bump_family(field.domain, test_n)
    sing = getattr(u, "singular_point", None)
    if sing is None:
        sing = field.singular_point
    worst = 0.0
    for c in centers:
        near = sing is not None and np.hypot(sing[0] - c[0], sing[1] - c[1]) < delta
        if near or (sing is not None and _angle_cuts(field, sing, 0.0, TWO_PI)):
            val = _pairing_about_point(field, u, c, delta, sing)
        else:
            val = _pairing_bump_centered(field, u, c, delta)
        worst = max(worst, abs(val))
    return worst
