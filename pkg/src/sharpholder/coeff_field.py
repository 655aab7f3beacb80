"""Symmetric unit-determinant coefficient fields on a disk.

A field is stored as a callable returning the three independent entries
``(a11, a12, a22)`` of a symmetric 2x2 matrix at a batch of points.  Three
variants exist: the identity, the angular field built from a periodic profile
``k`` (``A = J(theta) diag(k, 1/k) J(theta)^T`` with ``theta`` the polar angle
about a center), and a piecewise-constant field sampled on a Cartesian grid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import (
    AngularCenterSingularity,
    ConfigError,
    DeterminantViolation,
    InvalidProfile,
    NonPositiveDefinite,
    PointOutsideDomain,
)

TWO_PI = 2.0 * math.pi

DET_TOL_EXACT = 1e-12
DET_TOL_GRID = 1e-10

# dense sample used to bound Fourier profiles
_PROFILE_SAMPLE = 8192


def rotation(theta: float) -> np.ndarray:
    """The rotation matrix J(theta); maps the polar frame (e_rho, e_theta) to Cartesian axes."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class SymMatrix2:
    a11: float
    a12: float
    a22: float

    @classmethod
    def from_array(cls, m) -> "SymMatrix2":
        m = np.asarray(m, dtype=float)
        return cls(float(m[0, 0]), float(0.5 * (m[0, 1] + m[1, 0])), float(m[1, 1]))

    def as_array(self) -> np.ndarray:
        return np.array([[self.a11, self.a12], [self.a12, self.a22]])

    @property
    def det(self) -> float:
        return self.a11 * self.a22 - self.a12 * self.a12

    @property
    def trace(self) -> float:
        return self.a11 + self.a22

    def eigvals(self) -> tuple[float, float]:
        lo, hi = _eig_entries(np.array([[self.a11, self.a12, self.a22]]))
        return float(lo[0]), float(hi[0])

    def is_positive_definite(self) -> bool:
        return self.a11 > 0 and self.det > 0

    def quadratic(self, xi) -> float:
        x, y = xi
        return self.a11 * x * x + 2.0 * self.a12 * x * y + self.a22 * y * y


def _eig_entries(e: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a11, a12, a22 = e[..., 0], e[..., 1], e[..., 2]
    half_tr = 0.5 * (a11 + a22)
    disc = np.hypot(0.5 * (a11 - a22), a12)
    return half_tr - disc, half_tr + disc


def conjugate_entries(e: np.ndarray, theta) -> np.ndarray:
    """Entries of J(theta)^T A J(theta), vectorised over the leading axes."""
    c, s = np.cos(theta), np.sin(theta)
    a11, a12, a22 = e[..., 0], e[..., 1], e[..., 2]
    cs = c * s
    p11 = c * c * a11 + 2.0 * cs * a12 + s * s * a22
    p12 = -cs * a11 + (c * c - s * s) * a12 + cs * a22
    p22 = s * s * a11 - 2.0 * cs * a12 + c * c * a22
    return np.stack([p11, p12, p22], axis=-1)


class AngularProfile:
    """A positive 2*pi-periodic function of the angle.

    Either a truncated Fourier series ``mean + sum cos[j-1] cos(j t) + sin[j-1] sin(j t)``
    or piecewise-constant values on ``m`` equal sectors ``[2 pi i/m, 2 pi (i+1)/m)``.
    """

    def __init__(self, kind: str, mean: float = 0.0, cos: Sequence[float] = (),
                 sin: Sequence[float] = (), values: Sequence[float] = ()):
        if kind not in ("fourier", "piecewise"):
            raise InvalidProfile(f"unknown profile kind {kind!r}")
        self.kind = kind
        if kind == "fourier":
            self.mean = float(mean)
            n = max(len(cos), len(sin))
            self.cos = np.zeros(n)
            self.sin = np.zeros(n)
            self.cos[: len(cos)] = cos
            self.sin[: len(sin)] = sin
            self.values = None
            t = np.arange(_PROFILE_SAMPLE) * (TWO_PI / _PROFILE_SAMPLE)
            sample = self(t)
            self.k_min, self.k_max = float(sample.min()), float(sample.max())
        else:
            self.values = np.asarray(values, dtype=float).ravel()
            if self.values.size == 0:
                raise InvalidProfile("piecewise profile needs at least one value")
            self.mean = float(self.values.mean())
            self.cos = self.sin = None
            self.k_min, self.k_max = float(self.values.min()), float(self.values.max())
            w = TWO_PI / self.values.size
            self._cum = np.concatenate([[0.0], np.cumsum(self.values * w)])
        if not (np.isfinite(self.k_min) and np.isfinite(self.k_max)):
            raise InvalidProfile("profile values must be finite")
        if self.k_min <= 0:
            raise InvalidProfile(f"profile must be bounded away from 0 (min {self.k_min:g})")

    @classmethod
    def fourier(cls, mean, cos=(), sin=()) -> "AngularProfile":
        return cls("fourier", mean=mean, cos=cos, sin=sin)

    @classmethod
    def piecewise(cls, values) -> "AngularProfile":
        return cls("piecewise", values=values)

    @classmethod
    def constant(cls, c: float) -> "AngularProfile":
        return cls("fourier", mean=c)

    @property
    def is_smooth(self) -> bool:
        return self.kind == "fourier"

    @property
    def n_sectors(self) -> int:
        return 0 if self.values is None else self.values.size

    @property
    def breakpoints(self) -> Optional[np.ndarray]:
        if self.values is None:
            return None
        return np.arange(self.values.size + 1) * (TWO_PI / self.values.size)

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.kind == "fourier":
            out = np.full(theta.shape, self.mean)
            for j, (a, b) in enumerate(zip(self.cos, self.sin), start=1):
                if a:
                    out = out + a * np.cos(j * theta)
                if b:
                    out = out + b * np.sin(j * theta)
            return out
        return self.values[self._sector(np.mod(theta, TWO_PI))]

    def _sector(self, t):
        # sector index for t in [0, 2 pi); a breakpoint computed with rounding
        # error (such as 2 pi j/m) is assigned to the sector it starts
        m = self.values.size
        return np.minimum(np.floor(t * (m / TWO_PI) + 1e-12).astype(int), m - 1)

    def derivative(self, theta):
        """k'(theta); zero almost everywhere for piecewise profiles."""
        theta = np.asarray(theta, dtype=float)
        if self.kind == "piecewise":
            return np.zeros(theta.shape)
        out = np.zeros(theta.shape)
        for j, (a, b) in enumerate(zip(self.cos, self.sin), start=1):
            out = out - j * a * np.sin(j * theta) + j * b * np.cos(j * theta)
        return out

    def integral(self) -> float:
        """Integral of k over one period (exact for both representations)."""
        if self.kind == "fourier":
            return TWO_PI * self.mean
        return float(self._cum[-1])

    def cumulative(self, theta):
        """Exact antiderivative ``int_0^theta k``, valid for every real theta."""
        theta = np.asarray(theta, dtype=float)
        if self.kind == "fourier":
            out = self.mean * theta
            for j, (a, b) in enumerate(zip(self.cos, self.sin), start=1):
                if a:
                    out = out + (a / j) * np.sin(j * theta)
                if b:
                    out = out + (b / j) * (1.0 - np.cos(j * theta))
            return out
        w = TWO_PI / self.values.size
        turns = np.floor(theta / TWO_PI)
        t = theta - turns * TWO_PI
        idx = self._sector(t)
        return turns * self._cum[-1] + self._cum[idx] + self.values[idx] * (t - idx * w)

    def to_dict(self) -> dict:
        if self.kind == "fourier":
            return {"kind": "fourier", "mean": self.mean,
                    "cos": self.cos.tolist(), "sin": self.sin.tolist()}
        return {"kind": "piecewise", "values": self.values.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "AngularProfile":
        kind = d.get("kind")
        if kind == "fourier":
            return cls.fourier(d.get("mean", 1.0), d.get("cos", []), d.get("sin", []))
        if kind == "piecewise":
            return cls.piecewise(d["values"])
        raise InvalidProfile(f"unknown profile kind {kind!r}")

    def __repr__(self):
        if self.kind == "fourier":
            return f"AngularProfile.fourier(mean={self.mean}, cos={self.cos.tolist()}, sin={self.sin.tolist()})"
        return f"AngularProfile.piecewise({self.values.tolist()})"


@dataclass(frozen=True)
class DiskDomain:
    center: tuple = (0.0, 0.0)
    radius: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        if not self.radius > 0:
            raise ValueError("disk radius must be positive")

    def contains(self, pts, tol: float = 1e-12) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        d = np.hypot(pts[..., 0] - self.center[0], pts[..., 1] - self.center[1])
        return d <= self.radius * (1.0 + tol)

    def dist_to_boundary(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        return self.radius - np.hypot(pts[..., 0] - self.center[0], pts[..., 1] - self.center[1])


@dataclass(frozen=True)
class EllipticityBounds:
    lower: float
    upper: float

    @property
    def ratio(self) -> float:
        return self.upper / self.lower


class CoefficientField:
    """Base class; subclasses implement :meth:`entries`."""

    variant = "base"
    det_tol = DET_TOL_EXACT

    def __init__(self, domain: DiskDomain | None = None):
        self.domain = domain if domain is not None else DiskDomain()

    @property
    def singular_point(self):
        return None

    def entries(self, pts) -> np.ndarray:
        """(a11, a12, a22) at ``pts`` (shape (..., 2)) as an array of shape (..., 3)."""
        raise NotImplementedError

    def _sample_points(self, n: int) -> np.ndarray:
        cx, cy = self.domain.center
        r = (np.arange(n) + 0.5) / n * self.domain.radius
        t = np.arange(n) * (TWO_PI / n) + 0.5 / n
        rr, tt = np.meshgrid(r, t, indexing="ij")
        return np.stack([cx + rr * np.cos(tt), cy + rr * np.sin(tt)], axis=-1).reshape(-1, 2)

    def _declared_bounds(self):
        return None


class IdentityField(CoefficientField):
    variant = "identity"

    def entries(self, pts):
        pts = np.asarray(pts, dtype=float)
        out = np.zeros(pts.shape[:-1] + (3,))
        out[..., 0] = 1.0
        out[..., 2] = 1.0
        return out


class AngularField(CoefficientField):
    """``A(x) = J(t) diag(k(t), 1/k(t)) J(t)^T`` with ``t = arg(x - center)``."""

    variant = "angular"

    def __init__(self, profile: AngularProfile, center=(0.0, 0.0), domain: DiskDomain | None = None):
        super().__init__(domain if domain is not None else DiskDomain())
        self.profile = profile
        self.center = (float(center[0]), float(center[1]))

    @property
    def singular_point(self):
        return self.center

    def entries(self, pts):
        pts = np.asarray(pts, dtype=float)
        dx = pts[..., 0] - self.center[0]
        dy = pts[..., 1] - self.center[1]
        if np.any((dx == 0) & (dy == 0)):
            raise AngularCenterSingularity("angular field is undefined at its center")
        theta = np.arctan2(dy, dx)
        return self.entries_polar(theta)

    def entries_polar(self, theta):
        """Entries as a function of the polar angle about the field center."""
        k = self.profile(theta)
        c, s = np.cos(theta), np.sin(theta)
        ik = 1.0 / k
        return np.stack([k * c * c + ik * s * s, (k - ik) * s * c, k * s * s + ik * c * c], axis=-1)

    def _declared_bounds(self):
        p = self.profile
        return max(p.k_max, 1.0 / p.k_min)


class GridField(CoefficientField):
    """Piecewise-constant field on a uniform Cartesian grid covering the domain's bounding box."""

    variant = "grid"
    det_tol = DET_TOL_GRID

    def __init__(self, values, domain: DiskDomain | None = None):
        super().__init__(domain if domain is not None else DiskDomain())
        self.values = np.asarray(values, dtype=float)
        if self.values.ndim != 3 or self.values.shape[2] != 3:
            raise ValueError("grid values must have shape (ny, nx, 3)")
        ny, nx = self.values.shape[:2]
        cx, cy = self.domain.center
        R = self.domain.radius
        self.x0, self.y0 = cx - R, cy - R
        self.dx, self.dy = 2 * R / nx, 2 * R / ny

    def entries(self, pts):
        pts = np.asarray(pts, dtype=float)
        ny, nx = self.values.shape[:2]
        i = np.clip(np.floor((pts[..., 0] - self.x0) / self.dx).astype(int), 0, nx - 1)
        j = np.clip(np.floor((pts[..., 1] - self.y0) / self.dy).astype(int), 0, ny - 1)
        return self.values[j, i]

    def _sample_points(self, n):
        ny, nx = self.values.shape[:2]
        x = self.x0 + (np.arange(nx) + 0.5) * self.dx
        y = self.y0 + (np.arange(ny) + 0.5) * self.dy
        xx, yy = np.meshgrid(x, y)
        return np.stack([xx, yy], axis=-1).reshape(-1, 2)

    @classmethod
    def random(cls, rng: np.random.Generator, n: int = 8, max_log_stretch: float = 1.0,
               domain: DiskDomain | None = None) -> "GridField":
        """Random cells ``R(phi) diag(e^s, e^-s) R(phi)^T``."""
        s = rng.uniform(0, max_log_stretch, size=(n, n))
        phi = rng.uniform(0, math.pi, size=(n, n))
        diag = np.stack([np.exp(s), np.zeros_like(s), np.exp(-s)], axis=-1)
        return cls(conjugate_entries(diag, -phi), domain)


def eval_matrix(field: CoefficientField, x) -> SymMatrix2:
    x = np.asarray(x, dtype=float)
    if not field.domain.contains(x):
        raise PointOutsideDomain(f"point {x.tolist()} lies outside the domain")
    e = field.entries(x)
    return SymMatrix2(float(e[0]), float(e[1]), float(e[2]))


def check_entries(e: np.ndarray, tol: float) -> None:
    e = e.reshape(-1, 3)
    det = e[:, 0] * e[:, 2] - e[:, 1] ** 2
    bad = np.abs(det - 1.0) > tol
    if np.any(bad):
        i = int(np.argmax(bad))
        raise DeterminantViolation(f"det A = {det[i]!r} at sample {i} (tolerance {tol:g})")
    if np.any(e[:, 0] <= 0):
        raise NonPositiveDefinite("coefficient matrix is not positive definite")


def validate(field: CoefficientField, sample_n: int = 32) -> EllipticityBounds:
    """Check det A = 1 and positivity on samples; return (min, max) eigenvalue.

    Angular fields also fold in the profile range, since the eigenvalues of
    the angular matrix are exactly ``k`` and ``1/k``.
    """
    if sample_n < 16:
        raise ValueError("sample_n must be at least 16")
    e = field.entries(field._sample_points(sample_n))
    check_entries(e, field.det_tol)
    lo, hi = _eig_entries(e)
    upper = float(hi.max())
    lower = float(lo.min())
    declared = field._declared_bounds()
    if declared is not None and declared > upper:
        upper, lower = declared, 1.0 / declared
    return EllipticityBounds(lower, upper)


def polar_conjugate(field: CoefficientField, center, rho: float, theta: float) -> SymMatrix2:
    """P = J(theta)^T A(center + rho e^{i theta}) J(theta)."""
    if not rho > 0:
        raise ValueError("rho must be positive")
    x = np.asarray(center, dtype=float) + rho * np.array([math.cos(theta), math.sin(theta)])
    A = eval_matrix(field, x)
    p = conjugate_entries(np.array([A.a11, A.a12, A.a22]), theta)
    return SymMatrix2(float(p[0]), float(p[1]), float(p[2]))


# -- JSON field specification -------------------------------------------------

def field_from_spec(spec: dict) -> CoefficientField:
    """Build a field from the JSON field specification used by the CLI."""
    if not isinstance(spec, dict):
        raise ConfigError("field spec must be an object")
    dom = spec.get("domain", {})
    try:
        domain = DiskDomain(tuple(dom.get("center", (0.0, 0.0))), float(dom.get("radius", 1.0)))
    except (TypeError, ValueError, IndexError) as exc:
        raise ConfigError(f"bad domain: {exc}") from exc
    variant = spec.get("variant")
    if variant == "identity":
        return IdentityField(domain)
    if variant == "angular":
        ang = spec.get("angular")
        if not isinstance(ang, dict) or "profile" not in ang:
            raise ConfigError("angular variant needs an 'angular.profile' entry")
        try:
            profile = AngularProfile.from_dict(ang["profile"])
        except InvalidProfile:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad profile: {exc}") from exc
        return AngularField(profile, tuple(ang.get("center", (0.0, 0.0))), domain)
    if variant == "grid":
        grid = spec.get("grid")
        if not isinstance(grid, dict) or "values" not in grid:
            raise ConfigError("grid variant needs a 'grid.values' entry")
        try:
            return GridField(grid["values"], domain)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    raise ConfigError(f"unknown field variant {variant!r}")


def field_to_spec(field: CoefficientField) -> dict:
    dom = {"center": list(field.domain.center), "radius": field.domain.radius}
    if isinstance(field, AngularField):
        return {"variant": "angular", "domain": dom,
                "angular": {"profile": field.profile.to_dict(), "center": list(field.center)}}
    if isinstance(field, GridField):
        return {"variant": "grid", "domain": dom, "grid": {"values": field.values.tolist()}}
    return {"variant": "identity", "domain": dom}
