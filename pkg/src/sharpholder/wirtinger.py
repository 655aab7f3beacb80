"""Sharp weighted Wirtinger inequality on the circle.

For a positive periodic weight ``a`` and periodic ``w`` with ``int a w = 0``::

    int a w^2  <=  (mean of a)^2 * int (1/a) (w')^2

The optimal quotient ``int (1/a) w'^2 / int a w^2`` is ``(2 pi / int a)^2`` and
is attained exactly by ``C cos(2 pi Theta(t) / int a + phi)`` where
``Theta(t) = int_0^t a``.  :func:`rayleigh_minimize` recovers the same value
from a piecewise-linear finite-element eigenproblem that knows nothing about
the closed form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .coeff_field import TWO_PI, AngularProfile
from .errors import ConstraintViolated, EigenIterationDiverged, ZeroAmplitude

QUAD_TOL = 1e-8
CONSTRAINT_TOL = 1e-8
EIG_RTOL = 1e-12
EIG_MAXITER = 500
PHASE_GRID = 4096

_GL16 = np.polynomial.legendre.leggauss(16)


@dataclass
class PeriodicFunction:
    """Nodal samples on ``n`` uniform points of [0, 2 pi), optionally with exact callables.

    Without callables the function is represented by its trigonometric
    interpolant, which gives exact derivatives of the interpolant.
    """

    values: np.ndarray
    func: Optional[Callable] = None
    deriv: Optional[Callable] = None
    tag: Optional[str] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.size < 16:
            raise ValueError("periodic functions need at least 16 nodes")

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def thetas(self) -> np.ndarray:
        return np.arange(self.n) * (TWO_PI / self.n)

    @classmethod
    def from_callable(cls, f, df, n: int, tag=None) -> "PeriodicFunction":
        t = np.arange(n) * (TWO_PI / n)
        return cls(f(t), f, df, tag)

    def _trig(self, theta, order):
        n = self.n
        c = np.fft.rfft(self.values) / n
        k = np.arange(c.size)
        wgt = np.full(c.size, 2.0)
        wgt[0] = 1.0
        if n % 2 == 0:
            wgt[-1] = 1.0
        theta = np.asarray(theta, dtype=float)
        ph = np.exp(1j * np.multiply.outer(theta, k))
        coef = wgt * c * (1j * k) ** order
        return np.real(ph @ coef)

    def __call__(self, theta):
        if self.func is not None:
            return self.func(np.asarray(theta, dtype=float))
        return self._trig(theta, 0)

    def derivative(self, theta):
        if self.deriv is not None:
            return self.deriv(np.asarray(theta, dtype=float))
        return self._trig(theta, 1)

    def shifted(self, c: float) -> "PeriodicFunction":
        f = None if self.func is None else (lambda t, f=self.func: f(t) - c)
        out = PeriodicFunction(self.values - c, f, self.deriv, self.tag)
        return out


@dataclass
class WirtingerResult:
    constant: float
    minimizer: PeriodicFunction
    amplitude: float
    phase: float
    iterations: int = 0


def quadrature(a: AngularProfile, n: int = 1024):
    """Nodes and weights for integrals of ``a``-dependent integrands over a period.

    Smooth profiles use the periodic trapezoid rule on ``n`` points; piecewise
    profiles use 16-point Gauss-Legendre panels aligned with the sectors, so
    the integrand is smooth on every panel.
    """
    if a.is_smooth:
        t = np.arange(n) * (TWO_PI / n)
        return t, np.full(n, TWO_PI / n)
    bp = a.breakpoints
    m = bp.size - 1
    per = max(1, math.ceil(n / (16 * m)))
    edges = np.linspace(0.0, TWO_PI, m * per + 1)
    x, w = _GL16
    lo, hi = edges[:-1], edges[1:]
    half = 0.5 * (hi - lo)
    nodes = (0.5 * (hi + lo))[:, None] + half[:, None] * x[None, :]
    weights = half[:, None] * w[None, :]
    return nodes.ravel(), weights.ravel()


def wirtinger_constant(a: AngularProfile) -> float:
    return (TWO_PI / a.integral()) ** 2


def weighted_integral(a: AngularProfile, w: PeriodicFunction, n: Optional[int] = None) -> float:
    """``int_0^{2 pi} a w``."""
    t, q = quadrature(a, max(w.n, 1024) if n is None else n)
    return float(np.sum(q * a(t) * w(t)))


def project(a: AngularProfile, w: PeriodicFunction) -> PeriodicFunction:
    """Subtract the a-weighted mean so that ``int a w = 0``."""
    return w.shifted(weighted_integral(a, w) / a.integral())


def inequality_sides(a: AngularProfile, w: PeriodicFunction, n: Optional[int] = None):
    """(lhs, rhs) = (int a w^2, (mean a)^2 int (1/a) w'^2)."""
    t, q = quadrature(a, max(w.n, 1024) if n is None else n)
    at = a(t)
    lhs = float(np.sum(q * at * w(t) ** 2))
    dirichlet = float(np.sum(q * w.derivative(t) ** 2 / at))
    return lhs, (a.integral() / TWO_PI) ** 2 * dirichlet


def quotient(a: AngularProfile, w: PeriodicFunction, n: Optional[int] = None) -> float:
    """Rayleigh quotient ``int (1/a) w'^2 / int a w^2``."""
    lhs, rhs = inequality_sides(a, w, n)
    return rhs / (a.integral() / TWO_PI) ** 2 / lhs


def minimizer(a: AngularProfile, C: float = 1.0, phi: float = 0.0, n: int = 1024) -> PeriodicFunction:
    """Sample the extremal ``C cos(2 pi Theta / int a + phi)``.

    ``Theta`` is the exact antiderivative of the profile, so the weighted mean
    vanishes up to rounding for both profile kinds.
    """
    if C == 0:
        raise ZeroAmplitude("amplitude C must be nonzero")
    if n < 16:
        raise ValueError("n must be at least 16")
    c = TWO_PI / a.integral()

    def f(t):
        return C * np.cos(c * a.cumulative(t) + phi)

    def df(t):
        return -C * c * a(t) * np.sin(c * a.cumulative(t) + phi)

    return PeriodicFunction.from_callable(f, df, n, tag="minimizer")


def check_inequality(a: AngularProfile, w: PeriodicFunction) -> float:
    """Return ``rhs - lhs``; nonnegative up to QUAD_TOL for admissible ``w``."""
    t, q = quadrature(a, max(w.n, 1024))
    wt = w(t)
    mean = float(np.sum(q * a(t) * wt))
    scale = a.integral() * max(float(np.max(np.abs(wt))), 1e-300)
    if abs(mean) > CONSTRAINT_TOL * scale:
        raise ConstraintViolated(f"int a w = {mean:.3e}; project w first")
    lhs, rhs = inequality_sides(a, w)
    return rhs - lhs


# -- finite-element oracle ----------------------------------------------------

def assemble_forms(a: AngularProfile, n: int):
    """Periodic P1 stiffness ``int (1/a) u' v'`` and mass ``int a u v`` on ``n`` elements.

    Elements are cut at the profile breakpoints; each cut piece is integrated
    with 3-point Gauss-Legendre, which is exact for piecewise-constant ``a``.
    """
    h = TWO_PI / n
    nodes = np.arange(n + 1) * h
    if a.is_smooth:
        pts = nodes
        gx, gw = np.polynomial.legendre.leggauss(6)
    else:
        pts = np.union1d(nodes, a.breakpoints)
        pts = pts[np.concatenate([[True], np.diff(pts) > 1e-14 * TWO_PI])]
        gx, gw = np.polynomial.legendre.leggauss(3)
    lo, hi = pts[:-1], pts[1:]
    elem = np.minimum(np.floor(0.5 * (lo + hi) / h).astype(int), n - 1)
    half = 0.5 * (hi - lo)
    t = 0.5 * (hi + lo)[:, None] + half[:, None] * gx[None, :]
    q = half[:, None] * gw[None, :]
    at = a(t)
    right = (t - elem[:, None] * h) / h
    left = 1.0 - right
    m_ll = np.bincount(elem, np.sum(q * at * left * left, axis=1), n)
    m_lr = np.bincount(elem, np.sum(q * at * left * right, axis=1), n)
    m_rr = np.bincount(elem, np.sum(q * at * right * right, axis=1), n)
    inv = np.bincount(elem, np.sum(q / at, axis=1), n) / h ** 2

    i = np.arange(n)
    j = (i + 1) % n
    rows = np.concatenate([i, i, j, j])
    cols = np.concatenate([i, j, i, j])
    K = sp.coo_matrix((np.concatenate([inv, -inv, -inv, inv]), (rows, cols)), shape=(n, n)).tocsr()
    M = sp.coo_matrix((np.concatenate([m_ll, m_lr, m_lr, m_rr]), (rows, cols)), shape=(n, n)).tocsr()
    return K, M


def rayleigh_minimize(a: AngularProfile, n: int = 1024) -> WirtingerResult:
    """Smallest constrained eigenpair of ``K x = lam M x`` by block inverse iteration.

    The constraint ``int a w = 0`` is the M-orthogonal complement of the
    constants; iterates are deflated against that direction and the singular
    stiffness is regularised with the rank-one term ``l l^T / int a``
    (``l = M 1``), which leaves it unchanged on the complement.
    """
    if n < 64:
        raise ValueError("n must be at least 64")
    K, M = assemble_forms(a, n)
    ones = np.ones(n)
    ell = M @ ones
    total = float(ell.sum())
    Kt = K.toarray() + np.outer(ell, ell) / total
    factor = scipy.linalg.cho_factor(Kt)

    def deflate(x):
        return x - (ell @ x) / total

    t = np.arange(n) * (TWO_PI / n)
    # the periodic eigenvalue is (nearly) double, so iterate on a block and
    # extract the lowest Ritz pair each sweep
    X = deflate(np.stack([np.cos(t), np.sin(t), np.cos(2 * t)], axis=1))
    lam_old = np.inf
    for it in range(1, EIG_MAXITER + 1):
        Y = deflate(scipy.linalg.cho_solve(factor, M @ X))
        Ks, Ms = Y.T @ (K @ Y), Y.T @ (M @ Y)
        vals, vecs = scipy.linalg.eigh(0.5 * (Ks + Ks.T), 0.5 * (Ms + Ms.T))
        X = Y @ vecs
        lam = float(vals[0])
        if not np.isfinite(lam):
            raise EigenIterationDiverged("non-finite Rayleigh quotient")
        if abs(lam - lam_old) <= EIG_RTOL * lam:
            break
        lam_old = lam
    else:
        raise EigenIterationDiverged(f"no convergence in {EIG_MAXITER} iterations")
    x = X[:, 0]
    x = x / math.sqrt(x @ (M @ x))

    c = math.sqrt(wirtinger_constant(a))
    phase_arg = c * a.cumulative(t)
    basis = np.stack([np.cos(phase_arg), np.sin(phase_arg)], axis=1)
    (ca, cb), *_ = np.linalg.lstsq(basis, x, rcond=None)
    amp = math.hypot(ca, cb)
    phase = math.atan2(-cb, ca)
    return WirtingerResult(lam, PeriodicFunction(x, tag="fe-eigenvector"), amp, phase, it)


def minimizer_mismatch(a: AngularProfile, w: PeriodicFunction) -> tuple[float, float]:
    """Distance from ``w`` to the extremal family, after phase alignment.

    Both functions are scaled to unit a-weighted norm on the nodes; the phase is
    chosen from a uniform grid to maximise the correlation.  Returns
    ``(relative L2 mismatch, best phase)``.
    """
    t = w.thetas
    at = a(t)
    wt = w.values / math.sqrt(np.sum(at * w.values ** 2))
    c = math.sqrt(wirtinger_constant(a))
    s = c * a.cumulative(t)
    phis = np.arange(PHASE_GRID) * (TWO_PI / PHASE_GRID)
    cs, sn = np.cos(s), np.sin(s)
    # cos(s + phi) = cos s cos phi - sin s sin phi
    pc = np.sum(at * wt * cs)
    ps = np.sum(at * wt * sn)
    ncc = np.sum(at * cs * cs)
    nss = np.sum(at * sn * sn)
    ncs = np.sum(at * cs * sn)
    cp, spp = np.cos(phis), np.sin(phis)
    norm2 = ncc * cp ** 2 + nss * spp ** 2 - 2 * ncs * cp * spp
    corr = (pc * cp - ps * spp) / np.sqrt(norm2)
    best = int(np.argmax(corr))
    ref = np.cos(s + phis[best])
    ref /= math.sqrt(np.sum(at * ref ** 2))
    return float(math.sqrt(np.sum(at * (wt - ref) ** 2))), float(phis[best])


def substitute(a: AngularProfile, w: PeriodicFunction, m: int = 256):
    """Express ``w`` in the variable ``Theta = int_0^t a``.

    Returns ``(Theta grid, W values)`` on ``m`` uniform points of
    ``[0, int a)``; the inverse of ``Theta`` is found by safeguarded Newton
    steps (``Theta' = a > 0``).
    """
    total = a.integral()
    target = np.arange(m) * (total / m)
    t = target / total * TWO_PI
    lo, hi = np.zeros(m), np.full(m, TWO_PI)
    for _ in range(100):
        f = a.cumulative(t) - target
        lo = np.where(f < 0, t, lo)
        hi = np.where(f > 0, t, hi)
        step = t - f / a(t)
        t = np.where((step > lo) & (step < hi), step, 0.5 * (lo + hi))
        if np.max(np.abs(f)) < 1e-14 * total:
            break
    return target, w(t)
