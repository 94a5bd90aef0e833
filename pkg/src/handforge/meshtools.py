"""Triangle-mesh topology utilities: edges, subdivision, Laplacian, normals.

Topology functions (edges, subdivision, Laplacian) are plain numpy/scipy and
operate on index arrays. Geometry functions that feed optimization
(vertex_normals, edge_lengths) run on torch tensors so gradients flow.
"""

import numpy as np
import scipy.sparse as sp
import torch

from .common import NP_DTYPE, as_tensor
from .errors import TopologyError


def unique_edges(faces) -> np.ndarray:
    """Unique undirected edges as a sorted (E, 2) int array.

    Edges are sorted within each pair and lexicographically across pairs, so
    edge ordering is a pure function of the face list.
    """
    f = np.asarray(faces, dtype=np.int64)
    e = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
    e = np.sort(e, axis=1)
    return np.unique(e, axis=0)


def edge_face_adjacency(faces):
    """Map each unique edge to its (at most two) incident faces.

    Returns:
        edges: (E, 2) sorted unique edges.
        efaces: (E, 2) face indices, -1 where an edge is on the boundary.

    Raises:
        TopologyError: if any edge has more than two incident faces.
    """
    f = np.asarray(faces, dtype=np.int64)
    nf = f.shape[0]
    e = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
    e = np.sort(e, axis=1)
    owner = np.tile(np.arange(nf, dtype=np.int64), 3)
    edges, inv, counts = np.unique(e, axis=0, return_inverse=True, return_counts=True)
    if np.any(counts > 2):
        bad = edges[counts > 2][0]
        raise TopologyError(f"non-manifold edge {tuple(bad)} with {counts.max()} incident faces")
    efaces = np.full((edges.shape[0], 2), -1, dtype=np.int64)
    order = np.argsort(inv, kind="stable")
    inv_sorted = inv[order]
    owner_sorted = owner[order]
    first = np.searchsorted(inv_sorted, np.arange(edges.shape[0]))
    efaces[:, 0] = owner_sorted[first]
    second = counts == 2
    efaces[second, 1] = owner_sorted[first[second] + 1]
    return edges, efaces


def boundary_loops(faces):
    """Return the boundary edge count and number of boundary loops."""
    edges, efaces = edge_face_adjacency(faces)
    bmask = efaces[:, 1] < 0
    bedges = edges[bmask]
    if bedges.shape[0] == 0:
        return 0, 0
    # Walk loops through the boundary adjacency.
    nxt = {}
    for a, b in bedges:
        nxt.setdefault(int(a), []).append(int(b))
        nxt.setdefault(int(b), []).append(int(a))
    seen = set()
    loops = 0
    for start in nxt:
        if start in seen:
            continue
        loops += 1
        stack = [start]
        while stack:
            v = stack.pop()
            if v in seen:
                continue
            seen.add(v)
            stack.extend(nxt[v])
    return bedges.shape[0], loops


def euler_characteristic(n_vertices: int, faces) -> int:
    e = unique_edges(faces)
    return n_vertices - e.shape[0] + np.asarray(faces).shape[0]


def subdivide_midpoint(vertices, faces, levels: int):
    """Midpoint (1-to-4) subdivision applied `levels` times.

    New vertices are inserted at edge midpoints; original vertices keep their
    indices and positions (flat subdivision, no smoothing).

    Args:
        vertices: (V, 3) float array.
        faces: (F, 3) int array, manifold (each edge in at most 2 faces).
        levels: number of rounds, >= 0.

    Returns:
        (vertices, faces, prolong) where prolong is a CSR matrix mapping
        input per-vertex attributes to the subdivided vertex set.

    Raises:
        TopologyError: on non-manifold input.
    """
    if levels < 0:
        raise ValueError("levels must be >= 0")
    v = np.asarray(vertices, dtype=NP_DTYPE)
    f = np.asarray(faces, dtype=np.int64)
    prolong = sp.identity(v.shape[0], dtype=NP_DTYPE, format="csr")
    for _ in range(levels):
        edge_face_adjacency(f)  # manifoldness check
        edges = unique_edges(f)
        nv, ne = v.shape[0], edges.shape[0]
        mid = 0.5 * (v[edges[:, 0]] + v[edges[:, 1]])
        v = np.vstack([v, mid])
        # Rank of each face edge within the sorted unique edge list.
        def edge_id(a, b):
            lo = np.minimum(a, b)
            hi = np.maximum(a, b)
            keys = lo * (edges.max() + 1) + hi
            edge_keys = edges[:, 0] * (edges.max() + 1) + edges[:, 1]
            return nv + np.searchsorted(edge_keys, keys)

        i, j, k = f[:, 0], f[:, 1], f[:, 2]
        mij, mjk, mki = edge_id(i, j), edge_id(j, k), edge_id(k, i)
        f = np.concatenate(
            [
                np.stack([i, mij, mki], axis=1),
                np.stack([mij, j, mjk], axis=1),
                np.stack([mki, mjk, k], axis=1),
                np.stack([mij, mjk, mki], axis=1),
            ]
        )
        step = sp.vstack(
            [
                sp.identity(nv, dtype=NP_DTYPE, format="csr"),
                sp.csr_matrix(
                    (
                        np.full(2 * ne, 0.5, dtype=NP_DTYPE),
                        (np.repeat(np.arange(ne), 2), edges.ravel()),
                    ),
                    shape=(ne, nv),
                ),
            ]
        ).tocsr()
        prolong = (step @ prolong).tocsr()
    return v, f, prolong


def laplacian_matrix(faces, n_vertices: int) -> sp.csr_matrix:
    """Uniform graph Laplacian L = I - D^-1 A on the mesh vertex graph.

    Rows sum to zero; L @ x measures each vertex against the mean of its
    neighbors. Constant through optimization since it only depends on
    connectivity.
    """
    edges = unique_edges(faces)
    r = np.concatenate([edges[:, 0], edges[:, 1]])
    c = np.concatenate([edges[:, 1], edges[:, 0]])
    A = sp.csr_matrix(
        (np.ones(r.shape[0], dtype=NP_DTYPE), (r, c)), shape=(n_vertices, n_vertices)
    )
    deg = np.asarray(A.sum(axis=1)).ravel()
    if np.any(deg == 0):
        bad = np.nonzero(deg == 0)[0]
        raise TopologyError(f"isolated vertices with no neighbors: {bad[:8].tolist()}")
    Dinv = sp.diags(1.0 / deg)
    return (sp.identity(n_vertices, dtype=NP_DTYPE) - Dinv @ A).tocsr()


def laplacian_tensor(L: sp.csr_matrix) -> torch.Tensor:
    """Convert a scipy Laplacian to a torch sparse tensor for loss terms."""
    coo = L.tocoo()
    idx = torch.from_numpy(np.stack([coo.row, coo.col]).astype(np.int64))
    val = torch.from_numpy(coo.data.astype(NP_DTYPE))
    return torch.sparse_coo_tensor(idx, val, size=coo.shape).coalesce()


def vertex_normals(vertices, faces, return_degenerate: bool = False):
    """Area-weighted vertex normals, differentiable w.r.t. vertices.

    Face normals are accumulated unnormalized (the cross product already
    carries twice the face area) and the result is normalized per vertex.
    Vertices whose accumulated normal has zero norm get +z and are reported
    in the degeneracy mask.
    """
    v = as_tensor(vertices)
    f = torch.as_tensor(np.asarray(faces, dtype=np.int64))
    p0, p1, p2 = v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]
    fn = torch.cross(p1 - p0, p2 - p0, dim=1)  # 2 * area * unit normal
    acc = torch.zeros_like(v)
    for corner in range(3):
        acc = acc.index_add(0, f[:, corner], fn)
    norm = torch.linalg.norm(acc, dim=1, keepdim=True)
    degenerate = norm[:, 0] < 1e-20
    fallback = torch.zeros_like(acc)
    fallback[:, 2] = 1.0
    safe = torch.where(degenerate[:, None], torch.ones_like(norm), norm)
    normals = torch.where(degenerate[:, None], fallback, acc / safe)
    if return_degenerate:
        return normals, degenerate
    return normals


def edge_lengths(vertices, edges) -> torch.Tensor:
    """Per unique edge Euclidean length, differentiable w.r.t. vertices."""
    v = as_tensor(vertices)
    e = torch.as_tensor(np.asarray(edges, dtype=np.int64))
    return torch.linalg.norm(v[e[:, 0]] - v[e[:, 1]], dim=1)
