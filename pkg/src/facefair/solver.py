"""Global quadratic vertex optimization.

Minimizes  ||V^ - V||^2 + lambda_v ||L V^||^2 + eta ||K V^||^2  over the
stacked vertex vector, where L is the anisotropic bilateral Laplacian
(per-vertex sums of face-normal projectors applied to vertex-to-ring-
centroid offsets) and K is the face-fairness operator (tangential offset
of each interior vertex from the mean centroid of its 1-ring faces). All
weights are frozen at assembly time, so the cost is exactly quadratic and
the normal-equations solve is closed-form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import (
    MeshError,
    face_centroids,
    mean_edge_length,
    vertex_face_ring,
)

__all__ = [
    "SolverParams",
    "SolveInfo",
    "SparseBlockOperator",
    "laplacian_weight",
    "assemble_laplacian",
    "fairness_weight",
    "fairness_weights",
    "assemble_fairness",
    "cost_and_gradient",
    "solve_vertices",
]


@dataclass
class SolverParams:
    """Weights and solve controls for the vertex optimization.

    sigma1 is the normal-offset bandwidth and sigma2 the spatial bandwidth
    of the bilateral Laplacian weights, both in multiples of the local
    scale l_i. delta is the flatness margin of the fairness weight.
    """

    lambda_v: float = 1.0
    eta: float = 1.0
    sigma1: float = 0.35
    sigma2: float = 1.0
    delta: float = 0.2
    max_iters: int = 500
    grad_tol: float = 1e-6
    step_policy: str = "armijo"  # "armijo" (halve from 1.0) or "exact"
    method: str = "direct"  # "direct" or "gradient"

    def __post_init__(self):
        if self.lambda_v < 0 or self.eta < 0:
            raise ValueError("lambda_v and eta must be nonnegative")
        if self.sigma1 <= 0 or self.sigma2 <= 0:
            raise ValueError("bandwidths must be positive")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if self.grad_tol <= 0:
            raise ValueError("grad_tol must be positive")
        if self.step_policy not in ("armijo", "exact"):
            raise ValueError(f"unknown step policy {self.step_policy!r}")
        if self.method not in ("direct", "gradient"):
            raise ValueError(f"unknown solve method {self.method!r}")


@dataclass
class SolveInfo:
    method: str
    iterations: int
    converged: bool
    cost: float
    grad_inf_norm: float
    cost_history: list | None = None  # per accepted iteration (gradient method)


class SparseBlockOperator:
    """Sparse operator on the stacked (3 * n_vertices) coordinate vector.

    Assembled from 3x3 blocks indexed by (row vertex, column vertex);
    duplicate blocks are summed. Vertex i owns rows/columns 3i..3i+2.
    """

    def __init__(self, matrix, n_vertices):
        self.matrix = matrix.tocsr()
        self.n_vertices = n_vertices

    @classmethod
    def from_blocks(cls, n_vertices, block_rows, block_cols, blocks):
        block_rows = np.asarray(block_rows, dtype=np.int64)
        block_cols = np.asarray(block_cols, dtype=np.int64)
        blocks = np.asarray(blocks, dtype=np.float64)
        if blocks.shape != (len(block_rows), 3, 3):
            raise ValueError("blocks must be a (k, 3, 3) array")
        if len(block_rows):
            if block_rows.min() < 0 or block_rows.max() >= n_vertices:
                raise ValueError("block row vertex out of range")
            if block_cols.min() < 0 or block_cols.max() >= n_vertices:
                raise ValueError("block column vertex out of range")
        off = np.arange(3)
        rows = (3 * block_rows[:, None, None] + off[None, :, None])
        cols = (3 * block_cols[:, None, None] + off[None, None, :])
        rows = np.broadcast_to(rows, blocks.shape).ravel()
        cols = np.broadcast_to(cols, blocks.shape).ravel()
        n = 3 * n_vertices
        matrix = sp.coo_matrix((blocks.ravel(), (rows, cols)), shape=(n, n))
        return cls(matrix, n_vertices)

    @property
    def shape(self):
        return self.matrix.shape

    def apply(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (3 * self.n_vertices,):
            raise ValueError("vector length does not match the operator")
        return self.matrix @ x

    def rmatvec(self, y):
        return self.matrix.T @ y

    def gram(self):
        """A^T A as a CSR matrix."""
        return (self.matrix.T @ self.matrix).tocsr()

    def row_block(self, i):
        """Dense 3 x 3n slice owned by vertex i (diagnostics/tests)."""
        return self.matrix[3 * i : 3 * i + 3].toarray()

    def is_finite(self):
        return bool(np.isfinite(self.matrix.data).all())


def _bilateral_factors(normal_offset, sq_distance, scale, sigma1, sigma2):
    """Range kernel a = exp(-offset^2 / (2 s1^2 l^2)) and spatial kernel
    b = exp(-d^2 / (2 s2^2 l^2))."""
    a = np.exp(-(normal_offset**2) / (2.0 * sigma1**2 * scale**2))
    b = np.exp(-sq_distance / (2.0 * sigma2**2 * scale**2))
    return a, b


def laplacian_weight(mesh, v, f, face_normals, local_scale, sigma1, sigma2):
    """Bilateral weight w_ij and projector block A_j for one ring face.

    Returns (w, A) where A is the outer product of the face normal with
    itself and w combines the normal-offset and spatial kernels over the
    ring of v:  w = a b / ((1 + a) sum_ring b).
    """
    ring = vertex_face_ring(mesh, v)
    ring = ring[~face_normals.degenerate[ring]]
    if len(ring) == 0:
        raise MeshError(f"vertex {v} has no non-degenerate ring face")
    if f not in ring:
        raise MeshError(f"face {f} is not a usable ring face of vertex {v}")
    scale = float(local_scale[v]) if np.ndim(local_scale) else float(local_scale)
    if not np.isfinite(scale) or scale <= 0.0:
        raise MeshError(f"vertex {v} has non-positive local scale")

    centroids = face_centroids(mesh)
    delta = centroids[ring] - mesh.vertices[v]
    offsets = (face_normals.values[ring] * delta).sum(axis=1)
    a, b = _bilateral_factors(offsets, (delta**2).sum(axis=1), scale, sigma1, sigma2)
    k = int(np.nonzero(ring == f)[0][0])
    w = a[k] * b[k] / ((1.0 + a[k]) * b.sum())
    n = face_normals.values[f]
    return float(w), np.outer(n, n)


def _ring_pairs(mesh, valid_face):
    """Flattened (vertex, ring-face) pairs, restricted to usable faces."""
    counts = np.array([len(r) for r in mesh.vertex_faces])
    pair_v = np.repeat(np.arange(mesh.n_vertices), counts)
    pair_f = np.concatenate(mesh.vertex_faces) if counts.sum() else np.empty(0, np.int64)
    keep = valid_face[pair_f]
    return pair_v[keep], pair_f[keep]


def assemble_laplacian(mesh, face_normals, local_scale, params) -> SparseBlockOperator:
    """Assemble the anisotropic bilateral Laplacian L.

    Row i applied to the stacked vertex vector gives
    sum_{j in ring(i)} w_ij A_j (v_i - centroid_j). Weights are computed
    from the current geometry and frozen. Rows of vertices with no usable
    ring face are omitted (such vertices are held by the data term alone).
    """
    if face_normals.domain != "face" or len(face_normals) != mesh.n_faces:
        raise MeshError("face_normals does not match the mesh")
    pair_v, pair_f = _ring_pairs(mesh, ~face_normals.degenerate)
    n = mesh.n_vertices
    if len(pair_v) == 0:
        return SparseBlockOperator(sp.csr_matrix((3 * n, 3 * n)), n)

    scales = np.asarray(local_scale, dtype=np.float64)
    used = np.unique(pair_v)
    if not np.isfinite(scales[used]).all() or (scales[used] <= 0.0).any():
        raise MeshError("non-positive local scale on a vertex with ring faces")

    centroids = face_centroids(mesh)
    normals = face_normals.values
    delta = centroids[pair_f] - mesh.vertices[pair_v]
    offsets = (normals[pair_f] * delta).sum(axis=1)
    a, b = _bilateral_factors(
        offsets, (delta**2).sum(axis=1), scales[pair_v], params.sigma1, params.sigma2
    )
    bsum = np.zeros(n)
    np.add.at(bsum, pair_v, b)
    denom = (1.0 + a) * bsum[pair_v]
    w = np.where(denom > 0.0, a * b / np.maximum(denom, 1e-300), 0.0)

    proj = normals[:, :, None] * normals[:, None, :]
    diag_blocks = w[:, None, None] * proj[pair_f]
    corner_cols = mesh.faces[pair_f].ravel()
    corner_blocks = np.repeat(-w / 3.0, 3)[:, None, None] * np.repeat(
        proj[pair_f], 3, axis=0
    )
    rows = np.concatenate([pair_v, np.repeat(pair_v, 3)])
    cols = np.concatenate([pair_v, corner_cols])
    blocks = np.concatenate([diag_blocks, corner_blocks])
    return SparseBlockOperator.from_blocks(n, rows, cols, blocks)


def fairness_weight(mesh, v, face_normals, delta) -> float:
    """Per-vertex flatness weight r_i.

    Zero on boundary vertices; otherwise max(mean pairwise dot of ring
    face normals - delta, 0), the mean over unordered distinct pairs.
    Rings with fewer than two usable faces get zero.
    """
    if mesh.boundary_mask[v]:
        return 0.0
    ring = vertex_face_ring(mesh, v)
    ring = ring[~face_normals.degenerate[ring]]
    if len(ring) < 2:
        return 0.0
    normals = face_normals.values[ring]
    total = 0.0
    count = 0
    for p in range(len(ring)):
        for q in range(p + 1, len(ring)):
            total += float(normals[p] @ normals[q])
            count += 1
    return max(total / count - delta, 0.0)


def fairness_weights(mesh, face_normals, delta) -> np.ndarray:
    """Vectorized r_i for all vertices.

    Uses sum_{p<q} n_p . n_q = (||sum n||^2 - k) / 2 for k unit normals.
    """
    n = mesh.n_vertices
    valid = ~face_normals.degenerate
    pair_v, pair_f = _ring_pairs(mesh, valid)
    sums = np.zeros((n, 3))
    counts = np.zeros(n)
    np.add.at(sums, pair_v, face_normals.values[pair_f])
    np.add.at(counts, pair_v, 1.0)
    k = counts
    with np.errstate(invalid="ignore", divide="ignore"):
        pair_mean = ((sums**2).sum(axis=1) - k) / np.maximum(k * (k - 1.0), 1e-300)
    r = np.maximum(pair_mean - delta, 0.0)
    r[k < 2] = 0.0
    r[mesh.boundary_mask] = 0.0
    return r


def assemble_fairness(mesh, vertex_normals, face_normals, delta) -> SparseBlockOperator:
    """Assemble the face-fairness operator K.

    Row i applied to the stacked vertex vector gives
    r_i (I - n_i n_i^T)(v_{c,i} - v_i) with v_{c,i} the arithmetic mean of
    the centroids of the 1-ring faces of i. The projector and r_i are
    frozen; v_{c,i} stays linear in the unknown vertices. Boundary rows
    are exactly zero (omitted).
    """
    if vertex_normals.domain != "vertex" or len(vertex_normals) != mesh.n_vertices:
        raise MeshError("vertex_normals does not match the mesh")
    if face_normals.domain != "face" or len(face_normals) != mesh.n_faces:
        raise MeshError("face_normals does not match the mesh")
    n = mesh.n_vertices
    r = fairness_weights(mesh, face_normals, delta)
    r = np.where(vertex_normals.degenerate, 0.0, r)
    active = np.nonzero(r > 0.0)[0]
    if len(active) == 0:
        return SparseBlockOperator(sp.csr_matrix((3 * n, 3 * n)), n)

    eye = np.eye(3)
    nv = vertex_normals.values
    rows_list, cols_list, blocks_list = [], [], []
    for v in active:
        ring = vertex_face_ring(mesh, v)
        proj = r[v] * (eye - np.outer(nv[v], nv[v]))
        corners = mesh.faces[ring].ravel()
        rows_list.append(np.full(len(corners) + 1, v))
        cols_list.append(np.concatenate([corners, [v]]))
        blocks_list.append(
            np.concatenate(
                [np.repeat(proj[None] / (3.0 * len(ring)), len(corners), axis=0), -proj[None]]
            )
        )
    return SparseBlockOperator.from_blocks(
        n,
        np.concatenate(rows_list),
        np.concatenate(cols_list),
        np.concatenate(blocks_list),
    )


def cost_and_gradient(v_hat, v_obs, L, K, lambda_v, eta):
    """Quadratic cost and its analytic gradient.

    cost = ||v^ - v||^2 + lambda_v ||L v^||^2 + eta ||K v^||^2
    grad = 2 (v^ - v) + 2 lambda_v L^T L v^ + 2 eta K^T K v^
    """
    v_hat = np.asarray(v_hat, dtype=np.float64)
    v_obs = np.asarray(v_obs, dtype=np.float64)
    if v_hat.shape != v_obs.shape or v_hat.shape != (L.shape[0],):
        raise ValueError("vertex vectors do not match the operators")
    diff = v_hat - v_obs
    cost = float(diff @ diff)
    grad = 2.0 * diff
    if lambda_v > 0.0:
        lx = L.apply(v_hat)
        cost += lambda_v * float(lx @ lx)
        grad += 2.0 * lambda_v * L.rmatvec(lx)
    if eta > 0.0:
        kx = K.apply(v_hat)
        cost += eta * float(kx @ kx)
        grad += 2.0 * eta * K.rmatvec(kx)
    return cost, grad


def _system_matrix(L, K, lambda_v, eta):
    n = L.shape[0]
    m = sp.identity(n, format="csr")
    if lambda_v > 0.0:
        m = m + lambda_v * L.gram()
    if eta > 0.0:
        m = m + eta * K.gram()
    return m.tocsc()


def solve_vertices(mesh, v_obs, L, K, params):
    """Minimize the frozen quadratic cost; returns (v_hat, SolveInfo).

    "direct" solves the normal equations (I + lambda L^T L + eta K^T K)
    v^ = v with a sparse factorization; "gradient" runs steepest descent
    with a backtracking (or exact) line search until the infinity norm of
    the gradient drops below grad_tol x mean edge length.
    """
    v_obs = np.asarray(v_obs, dtype=np.float64).ravel()
    if v_obs.shape != (3 * mesh.n_vertices,):
        raise ValueError("observed vertex vector does not match the mesh")
    if not np.isfinite(v_obs).all():
        raise MeshError("observed vertices contain non-finite values")
    if not (L.is_finite() and K.is_finite()):
        raise MeshError("operators contain non-finite values")

    lam, eta = params.lambda_v, params.eta
    if lam == 0.0 and eta == 0.0:
        return v_obs.copy(), SolveInfo(params.method, 0, True, 0.0, 0.0)

    tol = params.grad_tol * mean_edge_length(mesh)

    if params.method == "direct":
        matrix = _system_matrix(L, K, lam, eta)
        v_hat = spla.spsolve(matrix, v_obs)
        cost, grad = cost_and_gradient(v_hat, v_obs, L, K, lam, eta)
        gnorm = float(np.abs(grad).max())
        return v_hat, SolveInfo("direct", 0, gnorm <= tol, cost, gnorm)

    x = v_obs.copy()
    cost, grad = cost_and_gradient(x, v_obs, L, K, lam, eta)
    gnorm = float(np.abs(grad).max())
    history = [cost]
    iters = 0
    converged = gnorm <= tol
    while not converged and iters < params.max_iters:
        if params.step_policy == "exact":
            # Quadratic cost: the exact minimizer along -g is
            # t = ||g||^2 / (2 g^T M g) with M the system matrix.
            _, hg = cost_and_gradient(grad, np.zeros_like(grad), L, K, lam, eta)
            curvature = float(grad @ hg)  # = 2 g^T M g
            step = float(grad @ grad) / curvature if curvature > 0 else 1.0
            x = x - step * grad
            cost, grad = cost_and_gradient(x, v_obs, L, K, lam, eta)
        else:
            step = 1.0
            gsq = float(grad @ grad)
            accepted = False
            for _ in range(60):
                trial = x - step * grad
                trial_cost, trial_grad = cost_and_gradient(trial, v_obs, L, K, lam, eta)
                if trial_cost <= cost - 1e-4 * step * gsq:
                    x, cost, grad = trial, trial_cost, trial_grad
                    accepted = True
                    break
                step *= 0.5
            if not accepted:
                break
        history.append(cost)
        gnorm = float(np.abs(grad).max())
        iters += 1
        converged = gnorm <= tol
    return x, SolveInfo("gradient", iters, converged, cost, gnorm, history)
