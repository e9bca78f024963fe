"""Triangle meshes and linear (P1) finite element assembly."""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

# degree-2 exact Dunavant rule on the reference triangle (weights sum to 1)
_QUAD_BARY = np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]])
_QUAD_W = np.full(3, 1 / 3)
# degree-5 seven-point rule for error norms
_a1, _b1 = 0.059715871789770, 0.470142064105115
_a2, _b2 = 0.797426985353087, 0.101286507323456
_QUAD5_BARY = np.array(
    [
        [1 / 3, 1 / 3, 1 / 3],
        [_a1, _b1, _b1],
        [_b1, _a1, _b1],
        [_b1, _b1, _a1],
        [_a2, _b2, _b2],
        [_b2, _a2, _b2],
        [_b2, _b2, _a2],
    ]
)
_QUAD5_W = np.array([0.225] + [0.132394152788506] * 3 + [0.125939180544827] * 3)


@dataclass
class TriMesh:
    vertices: np.ndarray  # (n, 2) or (n, 3)
    triangles: np.ndarray  # (m, 3) int, counter-clockwise

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64)
        self.triangles = np.asarray(self.triangles, dtype=np.int64)
        if self.triangles.ndim != 2 or self.triangles.shape[1] != 3:
            raise ValueError("triangles must be an (m, 3) index array")
        if self.triangles.size and (self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices)):
            raise ValueError("triangle index out of range")

    @property
    def xy(self):
        return self.vertices[:, :2]

    def signed_areas(self):
        p = self.xy[self.triangles]
        e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def boundary_vertices(self):
        """Vertices on edges that belong to exactly one triangle."""
        t = self.triangles
        edges = np.sort(np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), axis=1)
        uniq, counts = np.unique(edges, axis=0, return_counts=True)
        return np.unique(uniq[counts == 1])

    def barycenter(self):
        """Area-weighted centroid of the meshed region."""
        areas = self.signed_areas()
        centroids = self.xy[self.triangles].mean(axis=1)
        return (areas[:, None] * centroids).sum(axis=0) / areas.sum()

    def quadrature_points(self, rule=5):
        """Physical quadrature points and weights (area included)."""
        bary, w = (_QUAD5_BARY, _QUAD5_W) if rule == 5 else (_QUAD_BARY, _QUAD_W)
        p = self.xy[self.triangles]  # (m, 3, 2)
        pts = np.einsum("qk,mkd->mqd", bary, p)
        weights = np.abs(self.signed_areas())[:, None] * w[None, :]
        return pts, weights, bary


def unit_square_mesh(n):
    """``n x n`` cells on [0, 1]^2, each split along its main diagonal."""
    g = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(g, g, indexing="xy")
    verts = np.column_stack([X.ravel(), Y.ravel()])
    idx = np.arange((n + 1) ** 2).reshape(n + 1, n + 1)
    v00, v10 = idx[:-1, :-1].ravel(), idx[:-1, 1:].ravel()
    v01, v11 = idx[1:, :-1].ravel(), idx[1:, 1:].ravel()
    tris = np.concatenate([np.column_stack([v00, v10, v11]), np.column_stack([v00, v11, v01])])
    return TriMesh(verts, tris)


def disk_mesh(n_rings, center=(0.0, 0.0), radius=1.0):
    """Concentric-ring triangulation of a disk (ring ``k`` has ``6k`` nodes)."""
    verts = [np.array(center, dtype=float)]
    ring_start = [0]
    for k in range(1, n_rings + 1):
        ang = 2 * np.pi * np.arange(6 * k) / (6 * k)
        r = radius * k / n_rings
        ring_start.append(len(verts))
        verts.extend(np.column_stack([center[0] + r * np.cos(ang), center[1] + r * np.sin(ang)]))
    verts = np.array(verts)
    tris = []
    for k in range(1, n_rings + 1):
        outer = ring_start[k] + np.arange(6 * k)
        if k == 1:
            for i in range(6):
                tris.append([0, outer[i], outer[(i + 1) % 6]])
            continue
        inner = ring_start[k - 1] + np.arange(6 * (k - 1))
        # walk both rings by angle, emitting triangles in ccw order
        i = j = 0
        n_in, n_out = len(inner), len(outer)
        while i < n_in or j < n_out:
            a_in = (i + 1) / n_in if i < n_in else np.inf
            a_out = (j + 1) / n_out if j < n_out else np.inf
            if a_out <= a_in:
                tris.append([inner[i % n_in], outer[j], outer[(j + 1) % n_out]])
                j += 1
            else:
                tris.append([inner[i % n_in], outer[j % n_out], inner[(i + 1) % n_in]])
                i += 1
    return TriMesh(verts, np.array(tris))


def _gradients(mesh):
    p = mesh.xy[mesh.triangles]
    area2 = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1])
    # grad of barycentric coordinate i = rot90(edge opposite i) / (2 area)
    gx = np.stack([p[:, 1, 1] - p[:, 2, 1], p[:, 2, 1] - p[:, 0, 1], p[:, 0, 1] - p[:, 1, 1]], axis=1) / area2[:, None]
    gy = np.stack([p[:, 2, 0] - p[:, 1, 0], p[:, 0, 0] - p[:, 2, 0], p[:, 1, 0] - p[:, 0, 0]], axis=1) / area2[:, None]
    return gx, gy, 0.5 * np.abs(area2)


def stiffness(mesh, element_weight=None):
    """P1 stiffness ``int w grad(phi_i) . grad(phi_j)`` with piecewise-constant ``w``."""
    gx, gy, area = _gradients(mesh)
    w = area if element_weight is None else area * element_weight
    Ke = w[:, None, None] * (gx[:, :, None] * gx[:, None, :] + gy[:, :, None] * gy[:, None, :])
    t = mesh.triangles
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    n = len(mesh.vertices)
    K = sp.coo_matrix((Ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    K.sum_duplicates()
    return K


def load_vector(mesh, f):
    """``int f phi_i`` with the degree-5 rule; ``f`` maps (k, 2) points to (k,)."""
    pts, weights, bary = mesh.quadrature_points(5)
    vals = f(pts.reshape(-1, 2)).reshape(pts.shape[:2])
    contrib = np.einsum("mq,qk->mk", vals * weights, bary)
    return np.bincount(mesh.triangles.ravel(), contrib.ravel(), minlength=len(mesh.vertices))


def l2_error(mesh, u_nodal, exact):
    """``||u_h - exact||_L2`` of the P1 interpolant of ``u_nodal``."""
    pts, weights, bary = mesh.quadrature_points(5)
    uh = np.einsum("qk,mk->mq", bary, u_nodal[mesh.triangles])
    ue = exact(pts.reshape(-1, 2)).reshape(pts.shape[:2])
    return float(np.sqrt(np.sum(weights * (uh - ue) ** 2)))


def l2_norm(mesh, func):
    pts, weights, _ = mesh.quadrature_points(5)
    return float(np.sqrt(np.sum(weights * func(pts.reshape(-1, 2)).reshape(pts.shape[:2]) ** 2)))
