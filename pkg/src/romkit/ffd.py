"""Free Form Deformation with trivariate Bernstein lattices.

A lattice embeds a box with ``(L+1) x (M+1) x (N+1)`` control points.
Displacing control points by ``d_ijk`` moves an interior point ``x`` to
``x + sum_ijk B_i^L(s) B_j^M(t) B_k^N(r) d_ijk`` where ``(s, t, r)`` are the
box-local coordinates; since Bernstein polynomials reproduce linear
functions this equals the classic ``sum B P_ijk`` over displaced control
points, and it stays well defined on degenerate (degree 0) axes. Points
outside the box are left where they are.
"""
import csv
import hashlib
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import comb

from .exceptions import InvalidMeshError
from .fom.mesh import TriMesh

AXES = "xyz"


def bernstein(n, s):
    """All degree-``n`` Bernstein polynomials at ``s``; shape ``(len(s), n+1)``."""
    s = np.asarray(s, dtype=np.float64)[:, None]
    i = np.arange(n + 1)[None, :]
    return comb(n, i) * s**i * (1.0 - s) ** (n - i)


def bernstein_derivative(n, s):
    s = np.asarray(s, dtype=np.float64)
    if n == 0:
        return np.zeros((s.size, 1))
    lower = bernstein(n - 1, s)
    pad = np.zeros((s.size, 1))
    return n * (np.hstack([pad, lower]) - np.hstack([lower, pad]))


@dataclass(frozen=True)
class FfdLattice:
    """Bernstein control lattice over an axis-aligned box.

    ``active`` lists the parameter-driven control degrees of freedom as
    ``(i, j, k, axis)`` tuples, in parameter order. When omitted, every
    control point off the outer shell is active along every axis, so the
    deformation vanishes on the box boundary.
    """

    origin: np.ndarray
    extents: np.ndarray
    degrees: tuple = (2, 2, 2)
    displacements: np.ndarray = None
    active: tuple = None

    def __post_init__(self):
        origin = np.asarray(self.origin, dtype=np.float64).reshape(3)
        extents = np.asarray(self.extents, dtype=np.float64).reshape(3)
        if np.any(extents <= 0):
            raise ValueError(f"box extents must be positive, got {extents}")
        degrees = tuple(int(d) for d in self.degrees)
        if len(degrees) != 3 or min(degrees) < 0:
            raise ValueError("degrees must be three nonnegative integers")
        shape = tuple(d + 1 for d in degrees) + (3,)
        disp = np.zeros(shape) if self.displacements is None else np.asarray(self.displacements, dtype=np.float64)
        if disp.shape != shape:
            raise ValueError(f"displacements must have shape {shape}, got {disp.shape}")
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "extents", extents)
        object.__setattr__(self, "degrees", degrees)
        object.__setattr__(self, "displacements", disp)
        active = self.active
        if active is None:
            active = default_active(degrees)
        active = tuple((int(i), int(j), int(k), int(a)) for i, j, k, a in active)
        for i, j, k, a in active:
            if not (0 <= i <= degrees[0] and 0 <= j <= degrees[1] and 0 <= k <= degrees[2] and 0 <= a < 3):
                raise ValueError(f"active dof {(i, j, k, a)} outside the lattice")
        object.__setattr__(self, "active", active)
        if any(_on_shell((i, j, k), degrees) for i, j, k, _ in active):
            warnings.warn(
                "active control points on the lattice shell: the morph is discontinuous across the box boundary",
                RuntimeWarning,
                stacklevel=3,
            )

    @classmethod
    def planar(cls, origin, extents, degrees=(2, 2), active=None):
        """2-D lattice (degree 0 along z) for points with z = 0."""
        if active is not None:
            active = tuple((i, j, 0, a) for i, j, a in active)
        return cls(
            np.array([origin[0], origin[1], -0.5]), np.array([extents[0], extents[1], 1.0]), (degrees[0], degrees[1], 0), active=active
        )

    @property
    def n_parameters(self):
        return len(self.active)

    def dof_registry(self):
        return [f"P[{i},{j},{k}].{AXES[a]}" for i, j, k, a in self.active]

    def registry_checksum(self):
        return hashlib.sha256("\n".join(self.dof_registry()).encode()).hexdigest()

    def control_points(self):
        grids = [np.linspace(0, 1, d + 1) if d else np.zeros(1) for d in self.degrees]
        S, T, R = np.meshgrid(*grids, indexing="ij")
        local = np.stack([S, T, R], axis=-1)
        return self.origin + local * self.extents + self.displacements

    def is_identity(self):
        return not np.any(self.displacements)

    def local_coordinates(self, points):
        return (points - self.origin) / self.extents

    def _inside(self, local):
        return np.all((local >= 0.0) & (local <= 1.0), axis=1)

    def weights(self, local):
        """Tensor Bernstein weights, shape ``(n, L+1, M+1, N+1)``."""
        bs = [bernstein(d, local[:, a]) for a, d in enumerate(self.degrees)]
        return np.einsum("pi,pj,pk->pijk", *bs)

    def morph(self, points):
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] not in (2, 3):
            raise ValueError("points must have shape (n, 2) or (n, 3)")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        if self.is_identity():
            return pts.copy()
        planar = pts.shape[1] == 2
        p3 = np.column_stack([pts, np.zeros(len(pts))]) if planar else pts.copy()
        local = self.local_coordinates(p3)
        inside = self._inside(local)
        out = p3.copy()
        if np.any(inside):
            W = self.weights(local[inside])
            out[inside] += np.einsum("pijk,ijkc->pc", W, self.displacements)
        return out[:, :2] if planar else out

    def jacobian(self, points):
        """Jacobian of the morph at interior points, shape ``(n, 3, 3)``."""
        p3 = np.asarray(points, dtype=np.float64)
        if p3.shape[1] == 2:
            p3 = np.column_stack([p3, np.zeros(len(p3))])
        local = self.local_coordinates(p3)
        b = [bernstein(d, local[:, a]) for a, d in enumerate(self.degrees)]
        db = [bernstein_derivative(d, local[:, a]) for a, d in enumerate(self.degrees)]
        J = np.repeat(np.eye(3)[None], len(p3), axis=0)
        for a in range(3):
            parts = [db[c] if c == a else b[c] for c in range(3)]
            dW = np.einsum("pi,pj,pk->pijk", *parts) / self.extents[a]
            J[:, :, a] += np.einsum("pijk,ijkc->pc", dW, self.displacements)
        return J

    def check_injective(self, probes=9):
        """Spot-check a positive Jacobian determinant on a probe grid."""
        g = [np.linspace(0, 1, probes) if d else np.array([0.5]) for d in self.degrees]
        S, T, R = np.meshgrid(*g, indexing="ij")
        pts = self.origin + np.stack([S.ravel(), T.ravel(), R.ravel()], axis=1) * self.extents
        return bool(np.all(np.linalg.det(self.jacobian(pts)) > 0))


def _on_shell(ijk, degrees):
    return any(d > 0 and (c == 0 or c == d) for c, d in zip(ijk, degrees))


def default_active(degrees):
    moving_axes = [a for a, d in enumerate(degrees) if d > 0]
    active = []
    for i in range(degrees[0] + 1):
        for j in range(degrees[1] + 1):
            for k in range(degrees[2] + 1):
                if not _on_shell((i, j, k), degrees):
                    active.extend((i, j, k, a) for a in moving_axes)
    return tuple(active)


def from_parameters(template, mu, checksum=None):
    """Lattice whose active dofs are displaced by the entries of ``mu``."""
    mu = np.atleast_1d(np.asarray(mu, dtype=np.float64))
    if mu.shape != (template.n_parameters,):
        raise ValueError(f"expected {template.n_parameters} parameters, got {mu.shape[0]}")
    if checksum is not None and checksum != template.registry_checksum():
        raise ValueError("parameter registry checksum mismatch: control dof ordering differs from the declared one")
    disp = template.displacements.copy()
    for value, (i, j, k, a) in zip(mu, template.active):
        disp[i, j, k, a] += value
    return replace(template, displacements=disp)


def _normals(verts, tris):
    p = verts[tris]
    return np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])


def element_quality(mesh, reference=None):
    """Signed areas for planar meshes; for 3-D surfaces, normal agreement with ``reference``."""
    if mesh.vertices.shape[1] == 2:
        return mesh.signed_areas()
    n = _normals(mesh.vertices, mesh.triangles)
    if reference is None:
        return 0.5 * np.linalg.norm(n, axis=1)
    n0 = _normals(reference.vertices, reference.triangles)
    n0 /= np.linalg.norm(n0, axis=1, keepdims=True)
    return 0.5 * np.einsum("ij,ij->i", n, n0)


def morph_mesh(lattice, mesh, tol=1e-12):
    """Morph mesh vertices, keep connectivity, reject inverted elements.

    Returns ``(morphed_mesh, report)`` where ``report`` carries the minimum
    element quality (signed area) and the element count.
    """
    new = TriMesh(lattice.morph(mesh.vertices), mesh.triangles.copy())
    q = element_quality(new, mesh)
    bad = np.flatnonzero(q < -tol)
    if bad.size:
        raise InvalidMeshError(f"morph inverted {bad.size} elements (first: {bad[:10].tolist()})", bad)
    return new, {"min_quality": float(q.min()) if q.size else 0.0, "elements": int(q.size)}


def write_mesh(path, mesh):
    """ASCII: vertex count, ``x y z`` lines, triangle count, 0-based triplets."""
    v = mesh.vertices if mesh.vertices.shape[1] == 3 else np.column_stack([mesh.vertices, np.zeros(len(mesh.vertices))])
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(v)}\n")
        for x, y, z in v:
            fh.write(f"{x:.17g} {y:.17g} {z:.17g}\n")
        fh.write(f"{len(mesh.triangles)}\n")
        for a, b, c in mesh.triangles:
            fh.write(f"{a} {b} {c}\n")


def read_mesh(path, planar=False):
    with open(path, encoding="utf-8") as fh:
        tokens = fh.read().split()
    try:
        nv = int(tokens[0])
        verts = np.array(tokens[1 : 1 + 3 * nv], dtype=float).reshape(nv, 3)
        nt = int(tokens[1 + 3 * nv])
        tris = np.array(tokens[2 + 3 * nv : 2 + 3 * nv + 3 * nt], dtype=np.int64).reshape(nt, 3)
    except (IndexError, ValueError) as exc:
        raise ValueError(f"{path}: malformed mesh file: {exc}") from exc
    if len(tokens) != 2 + 3 * nv + 3 * nt:
        raise ValueError(f"{path}: trailing or missing tokens")
    return TriMesh(verts[:, :2] if planar else verts, tris)


def read_mesh_csv(path, planar=False):
    """CSV rows ``v,x,y,z`` for vertices and ``t,i,j,k`` for triangles."""
    verts, tris = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if not row:
                continue
            if row[0] == "v":
                verts.append([float(c) for c in row[1:4]])
            elif row[0] == "t":
                tris.append([int(c) for c in row[1:4]])
            else:
                raise ValueError(f"{path}: unknown record type {row[0]!r}")
    verts = np.array(verts)
    return TriMesh(verts[:, :2] if planar else verts, np.array(tris, dtype=np.int64).reshape(-1, 3))
