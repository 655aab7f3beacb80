"""Piecewise-linear finite elements for ``div(A grad u) = 0`` on a disk.

Meshes are rings of vertices whose spacing shrinks toward the center like
``h sqrt(r / R)``; a small polygon of radius ``h^2 / R`` is fanned to a
center vertex.  Coefficients are frozen per triangle at the barycenter, except
on the center fan where the average over the innermost ring is used.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .coeff_field import TWO_PI, CoefficientField, DiskDomain
from .errors import InvalidMeshSize, SingularSystem, SolverStagnation

CG_RTOL = 1e-10

# degree-4 symmetric rule on the reference triangle (barycentric points, weights sum to 1)
_DUNAVANT4_PTS = np.array([
    [0.445948490915965, 0.445948490915965, 0.108103018168070],
    [0.445948490915965, 0.108103018168070, 0.445948490915965],
    [0.108103018168070, 0.445948490915965, 0.445948490915965],
    [0.091576213509771, 0.091576213509771, 0.816847572980459],
    [0.091576213509771, 0.816847572980459, 0.091576213509771],
    [0.816847572980459, 0.091576213509771, 0.091576213509771],
])
_DUNAVANT4_W = np.array([0.223381589678011] * 3 + [0.109951743655322] * 3)


@dataclass
class Mesh:
    vertices: np.ndarray
    triangles: np.ndarray
    boundary: np.ndarray
    h: float
    domain: DiskDomain
    n_cap: int
    ring_radii: np.ndarray
    ring_counts: np.ndarray

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def barycenters(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)


def _ring_radii(R: float, h: float, cap_radius=None) -> np.ndarray:
    r_cap = h * h / R
    sq0, sq1 = math.sqrt(r_cap), math.sqrt(R)
    n = max(1, math.ceil(2.0 * sq1 * (sq1 - sq0) / h))
    while True:
        r = (sq0 + np.arange(n + 1) * ((sq1 - sq0) / n)) ** 2
        if r[1] / r[0] <= 2.0:
            break
        n += 1
    r[-1] = R
    if cap_radius is not None and cap_radius < r_cap:
        # halving rings down to the requested cap
        m = math.ceil(math.log2(r_cap / cap_radius))
        r = np.concatenate([r_cap * 0.5 ** np.arange(m, 0, -1), r])
    return r


def _zipper(inner: np.ndarray, outer: np.ndarray) -> list:
    """Triangulate the strip between two closed rings by merging their angles.

    Node ``i`` of a ring with ``n`` nodes sits at angle fraction ``i / n``;
    comparisons are done in exact integer arithmetic so shared angles (sector
    breakpoints) become mesh edges.
    """
    a, b = len(inner), len(outer)
    tris = []
    i = j = 0
    while i < a or j < b:
        if j == b or (i < a and (i + 1) * b <= (j + 1) * a):
            tris.append((inner[i % a], outer[j % b], inner[(i + 1) % a]))
            i += 1
        else:
            tris.append((inner[i % a], outer[j % b], outer[(j + 1) % b]))
            j += 1
    return tris


# every ring has at least ANGULAR_FLOOR * 2 pi R / h nodes
ANGULAR_FLOOR = 0.45
MIN_AREA = 1e-14


def build_mesh(domain: DiskDomain, h: float, sectors: int = 0, offset: float = 0.0,
               cap_radius: float | None = None) -> Mesh:
    """Graded ring triangulation of the disk.

    ``sectors`` > 0 forces every ring's node count to a multiple of it, so the
    rays at ``offset + 2 pi j / sectors`` are unions of mesh edges.

    The center cap has radius ``h^2 / R`` unless a smaller ``cap_radius`` is
    given, in which case rings of ratio 2 continue down to it.  Every ring
    has at least ``ANGULAR_FLOOR * 2 pi R / h`` nodes: for strongly
    anisotropic angular fields the P1 error near the center is governed by
    the angular step, not by the ring circumference.  Meshes with a triangle
    of area at most MIN_AREA are rejected.
    """
    R = domain.radius
    if not (0 < h < R / 4):
        raise InvalidMeshSize(f"mesh size must satisfy 0 < h < radius/4 (got {h})")
    if cap_radius is not None and not cap_radius > 0:
        raise InvalidMeshSize(f"cap radius must be positive (got {cap_radius})")
    radii = _ring_radii(R, h, cap_radius)
    counts = np.maximum(6, np.ceil(TWO_PI * np.sqrt(radii * R) / h).astype(int))
    counts = np.maximum(counts, math.ceil(ANGULAR_FLOOR * TWO_PI * R / h))
    if sectors:
        counts = sectors * np.ceil(counts / sectors).astype(int)
    cx, cy = domain.center
    verts = [(cx, cy)]
    rings = []
    for r, n in zip(radii, counts):
        t = offset + np.arange(n) * (TWO_PI / n)
        start = len(verts)
        verts.extend(zip(cx + r * np.cos(t), cy + r * np.sin(t)))
        rings.append(np.arange(start, start + n))
    tris = []
    cap = rings[0]
    for j in range(len(cap)):
        tris.append((0, cap[j], cap[(j + 1) % len(cap)]))
    for inner, outer in zip(rings[:-1], rings[1:]):
        tris.extend(_zipper(inner, outer))
    V = np.array(verts, dtype=float)
    T = np.array(tris, dtype=np.int64)
    # orient counterclockwise
    p = V[T]
    cross = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0])
    flip = cross < 0
    T[flip] = T[flip][:, [0, 2, 1]]
    boundary = np.zeros(len(V), dtype=bool)
    boundary[rings[-1]] = True
    mesh = Mesh(V, T, boundary, h, domain, len(cap), radii, counts)
    if mesh.areas().min() <= MIN_AREA:
        raise InvalidMeshSize(f"mesh has degenerate triangles (area <= {MIN_AREA}); increase h or cap_radius")
    return mesh


@dataclass
class SolutionField:
    mesh: Mesh
    values: np.ndarray
    coeffs: np.ndarray
    info: dict = dc_field(default_factory=dict)

    def gradients(self) -> np.ndarray:
        """Constant gradient on every triangle, shape (T, 2)."""
        G, _ = _basis_gradients(self.mesh)
        return np.einsum("tid,ti->td", G, self.values[self.mesh.triangles])

    def energy_density(self) -> np.ndarray:
        g = self.gradients()
        e = self.coeffs
        return e[:, 0] * g[:, 0] ** 2 + 2 * e[:, 1] * g[:, 0] * g[:, 1] + e[:, 2] * g[:, 1] ** 2

    def energy(self) -> float:
        return float(np.sum(self.energy_density() * self.mesh.areas()))

    def __call__(self, pts):
        return interpolate(self, pts)


def _basis_gradients(mesh: Mesh):
    p = mesh.vertices[mesh.triangles]
    x, y = p[..., 0], p[..., 1]
    area2 = (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0])
    G = np.empty(p.shape)
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        G[:, i, 0] = (y[:, j] - y[:, k]) / area2
        G[:, i, 1] = (x[:, k] - x[:, j]) / area2
    return G, 0.5 * area2


def element_coefficients(field: CoefficientField, mesh: Mesh) -> np.ndarray:
    e = field.entries(mesh.barycenters())
    cap_ring = mesh.triangles[: mesh.n_cap, 1]
    e[: mesh.n_cap] = field.entries(mesh.vertices[cap_ring]).mean(axis=0)
    return e


def assemble(field: CoefficientField, mesh: Mesh):
    """Global stiffness matrix (CSR) and the per-triangle coefficients used."""
    G, area = _basis_gradients(mesh)
    e = element_coefficients(field, mesh)
    AG0 = e[:, None, 0] * G[..., 0] + e[:, None, 1] * G[..., 1]
    AG1 = e[:, None, 1] * G[..., 0] + e[:, None, 2] * G[..., 1]
    Kloc = area[:, None, None] * (AG0[:, :, None] * G[:, None, :, 0] + AG1[:, :, None] * G[:, None, :, 1])
    T = mesh.triangles
    rows = np.repeat(T, 3, axis=1).ravel()
    cols = np.tile(T, (1, 3)).ravel()
    n = mesh.n_vertices
    K = sp.coo_matrix((Kloc.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    return K, e


def pcg(A, b, x0=None, rtol=CG_RTOL, maxiter=None):
    """Jacobi-preconditioned conjugate gradients; stops at ``|r| <= rtol |b|``.

    Returns ``(x, iterations, relative residual)``.
    """
    n = b.shape[0]
    maxiter = 20 * n if maxiter is None else maxiter
    d = A.diagonal()
    if np.any(d <= 0):
        raise SingularSystem("nonpositive diagonal entry")
    inv_d = 1.0 / d
    x = np.zeros(n) if x0 is None else x0.copy()
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return np.zeros(n), 0, 0.0
    r = b - A @ x
    z = inv_d * r
    p = z.copy()
    rz = r @ z
    for it in range(1, maxiter + 1):
        Ap = A @ p
        pAp = p @ Ap
        if not pAp > 0:
            raise SingularSystem("matrix is not positive definite along a search direction")
        step = rz / pAp
        x += step * p
        r -= step * Ap
        res = np.linalg.norm(r) / bnorm
        if res <= rtol:
            return x, it, float(res)
        z = inv_d * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverStagnation(f"CG did not reach rtol {rtol:g} in {maxiter} iterations (residual {res:.2e})")


def solve_dirichlet(field: CoefficientField, mesh: Mesh, g) -> SolutionField:
    """Solve with ``u = g`` on boundary vertices; ``g`` maps points (N, 2) to values."""
    K, coeffs = assemble(field, mesh)
    bnd = mesh.boundary
    inner = ~bnd
    u = np.zeros(mesh.n_vertices)
    u[bnd] = g(mesh.vertices[bnd])
    K_ii = K[inner][:, inner]
    rhs = -(K[inner][:, bnd] @ u[bnd])
    x, its, res = pcg(K_ii, rhs)
    u[inner] = x
    full_res = K @ u
    scale = max(np.linalg.norm(rhs), np.finfo(float).tiny)
    info = {"cg_iterations": its, "cg_relative_residual": res,
            "interior_residual": float(np.linalg.norm(full_res[inner]) / scale)}
    return SolutionField(mesh, u, coeffs, info)


def locate(mesh: Mesh, pts) -> tuple[np.ndarray, np.ndarray]:
    """Triangle index and barycentric coordinates for points (brute force, chunked)."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    P = mesh.vertices[mesh.triangles]
    v0 = P[:, 0]
    d1 = P[:, 1] - v0
    d2 = P[:, 2] - v0
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    tri = np.full(len(pts), -1)
    bary = np.zeros((len(pts), 3))
    for s in range(0, len(pts), 256):
        q = pts[s:s + 256, None, :] - v0[None, :, :]
        l1 = (q[..., 0] * d2[:, 1] - q[..., 1] * d2[:, 0]) / det
        l2 = (d1[:, 0] * q[..., 1] - d1[:, 1] * q[..., 0]) / det
        l0 = 1.0 - l1 - l2
        score = np.minimum(np.minimum(l0, l1), l2)
        best = np.argmax(score, axis=1)
        rows = np.arange(len(best))
        tri[s:s + 256] = best
        bary[s:s + 256] = np.stack([l0[rows, best], l1[rows, best], l2[rows, best]], axis=-1)
    return tri, bary


def interpolate(sol: SolutionField, pts) -> np.ndarray:
    pts = np.asarray(pts, dtype=float)
    shape = pts.shape[:-1]
    tri, bary = locate(sol.mesh, pts.reshape(-1, 2))
    vals = np.sum(bary * sol.values[sol.mesh.triangles[tri]], axis=1)
    return vals.reshape(shape)


def l2_error(sol: SolutionField, exact, relative: bool = True) -> float:
    """L2 distance between the P1 field and a callable, by a degree-4 rule per triangle."""
    mesh = sol.mesh
    P = mesh.vertices[mesh.triangles]
    area = np.abs(mesh.areas())
    qp = np.einsum("qi,tid->tqd", _DUNAVANT4_PTS, P)
    uh = np.einsum("qi,ti->tq", _DUNAVANT4_PTS, sol.values[mesh.triangles])
    ue = exact(qp)
    err = float(np.sqrt(np.sum(area[:, None] * _DUNAVANT4_W * (uh - ue) ** 2)))
    if not relative:
        return err
    return err / float(np.sqrt(np.sum(area[:, None] * _DUNAVANT4_W * ue ** 2)))


# -- boundary data -------------------------------------------------------------

def boundary_data(kind: str, example=None):
    """Boundary data handles used by the CLI: coordinate, harmonic-2theta, exact-sharp."""
    if kind == "coordinate":
        return lambda p: p[..., 0]
    if kind == "harmonic-2theta":
        return lambda p: p[..., 0] ** 2 - p[..., 1] ** 2
    if kind == "exact-sharp":
        if example is None:
            raise ValueError("exact-sharp boundary data needs a sharp example")
        return example.value
    raise ValueError(f"unknown boundary data kind {kind!r}")


# -- export ------------------------------------------------------------------------

def write_mesh_csv(mesh: Mesh, out_dir) -> list:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    vpath, tpath = out / "vertices.csv", out / "triangles.csv"
    with open(vpath, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "x", "y", "boundary"])
        for i, ((x, y), b) in enumerate(zip(mesh.vertices, mesh.boundary)):
            w.writerow([i, repr(float(x)), repr(float(y)), int(b)])
    with open(tpath, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "v0", "v1", "v2"])
        for i, t in enumerate(mesh.triangles):
            w.writerow([i, *map(int, t)])
    return [vpath, tpath]


def write_solution_csv(sol: SolutionField, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "x", "y", "u"])
        for i, ((x, y), v) in enumerate(zip(sol.mesh.vertices, sol.values)):
            w.writerow([i, repr(float(x)), repr(float(y)), repr(float(v))])
    return path
