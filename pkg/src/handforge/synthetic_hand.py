"""Procedural articulated five-finger hand with the standard template layout.

The mesh is a two-sheet "glove": a structured grid covers the palm and five
finger strips, the top and bottom sheets are mirrored in z and stitched along
the silhouette, and the wrist run stays open. The grid parameters are chosen
so the result has exactly 778 vertices, 1538 faces and a single 16-edge
boundary loop, matching the template topology the rest of the pipeline
assumes (it subdivides 3x to 49,281 / 98,432).

Counting, for the record: with a palm of 19 vertex columns x Rp rows and
finger strips of 3 columns x Lf rows, the stitched solid has
36*Rp + 4*sum(Lf) + 9 vertices and twice-minus-18 faces; Rp=14 and
sum(Lf)=66 give 777, and one boundary edge split lands 778/1538.
"""

import numpy as np

from .common import NP_DTYPE

PALM_COLS = 19  # vertex columns
PALM_ROWS = 14  # cell rows
FINGER_LENGTHS = (10, 14, 15, 14, 13)  # cell rows: thumb..little
WRIST_COL_LO, WRIST_COL_HI = 5, 13  # 9-vertex open run on the bottom row

# Physical dimensions (meters) for the rest pose.
PALM_WIDTH = 0.085
PALM_HEIGHT = 0.092
FINGER_LEN = (0.052, 0.068, 0.074, 0.068, 0.058)
FINGER_HALF_WIDTH = 0.0068
PALM_THICK = 0.0115
FINGER_THICK = 0.0062

N_PARTS = 16
N_SHAPE = 10


def _build_grid_sheet():
    """Vertex grid for one sheet: returns (verts_grid_idx, positions, labels).

    labels[v] = (kind, finger, u, s) where kind is 'palm' or 'finger',
    u in [0,1] across the strip, s in [0,1] along the finger.
    """
    index = {}
    labels = []
    order = []

    def add(key, label):
        if key in index:
            return index[key]
        index[key] = len(order)
        order.append(key)
        labels.append(label)
        return index[key]

    # Palm vertices, rows 0..PALM_ROWS.
    for r in range(PALM_ROWS + 1):
        for c in range(PALM_COLS):
            add(("p", r, c), ("palm", -1, c / (PALM_COLS - 1), r / PALM_ROWS))
    # Finger strips, rows PALM_ROWS+1 .. PALM_ROWS+Lf, columns 4f..4f+2.
    for f, L in enumerate(FINGER_LENGTHS):
        for r in range(1, L + 1):
            for j in range(3):
                add(("f", f, r, j), ("finger", f, j / 2.0, r / L))
    return index, order, labels


def _sheet_faces(index, boundary_ids):
    """Triangulate the grid quads.

    Diagonals between two silhouette vertices would be duplicated when the
    mirrored sheet shares those vertices, so each quad picks a diagonal with
    at least one interior endpoint.
    """
    faces = []

    def split_quad(a, b, d, e):
        # corners: a=(r,c) b=(r,c+1) d=(r+1,c) e=(r+1,c+1)
        if a in boundary_ids and e in boundary_ids and not (
            b in boundary_ids and d in boundary_ids
        ):
            faces.append((a, b, d))
            faces.append((b, e, d))
        else:
            faces.append((a, b, e))
            faces.append((a, e, d))

    # Palm quads.
    for r in range(PALM_ROWS):
        for c in range(PALM_COLS - 1):
            split_quad(
                index[("p", r, c)],
                index[("p", r, c + 1)],
                index[("p", r + 1, c)],
                index[("p", r + 1, c + 1)],
            )
    # Finger quads; row 0 of a finger is the palm top row.
    for f, L in enumerate(FINGER_LENGTHS):
        def vid(r, j):
            if r == 0:
                return index[("p", PALM_ROWS, 4 * f + j)]
            return index[("f", f, r, j)]

        for r in range(L):
            for j in range(2):
                split_quad(vid(r, j), vid(r, j + 1), vid(r + 1, j), vid(r + 1, j + 1))
    return np.array(faces, dtype=np.int64)


def _boundary_vertices(index):
    """Grid keys on the silhouette outline, plus the open wrist run keys."""
    boundary = set()
    # Palm rim: bottom row, side columns.
    for c in range(PALM_COLS):
        boundary.add(("p", 0, c))
    for r in range(PALM_ROWS + 1):
        boundary.add(("p", r, 0))
        boundary.add(("p", r, PALM_COLS - 1))
    # Palm top row: finger base corners and notch bottoms, not base centers.
    for c in range(PALM_COLS):
        if c % 4 != 1:
            boundary.add(("p", PALM_ROWS, c))
    # Finger sides and tips.
    for f, L in enumerate(FINGER_LENGTHS):
        for r in range(1, L + 1):
            boundary.add(("f", f, r, 0))
            boundary.add(("f", f, r, 2))
        boundary.add(("f", f, L, 1))
    wrist = [("p", 0, c) for c in range(WRIST_COL_LO, WRIST_COL_HI + 1)]
    return boundary, wrist


def _rest_positions(order, labels):
    """Map grid coordinates to a physically shaped rest pose (z = 0 sheet)."""
    pos = np.zeros((len(order), 3), dtype=NP_DTYPE)
    centers = np.linspace(1.0, PALM_COLS - 2.0, 5) / (PALM_COLS - 1)
    for v, (key, lab) in enumerate(zip(order, labels)):
        kind, f, u, s = lab
        if kind == "palm":
            x = (u - 0.5) * PALM_WIDTH
            y = s * PALM_HEIGHT
        else:
            cx = (centers[f] - 0.5) * PALM_WIDTH
            half = FINGER_HALF_WIDTH * (1.0 - 0.35 * s * s)  # taper to the tip
            x = cx + (u - 0.5) * 2.0 * half
            y = PALM_HEIGHT + s * FINGER_LEN[f]
            # slight splay so fingers do not touch when posed
            x += (f - 2) * 0.0035 * s
        pos[v] = (x, y, 0.0)
    # Thumb: pull down and rotate outward around its base.
    base = np.array([(centers[0] - 0.5) * PALM_WIDTH, PALM_HEIGHT, 0.0])
    ang = -0.65
    ca, sa = np.cos(ang), np.sin(ang)
    for v, lab in enumerate(labels):
        kind, f, u, s = lab
        w = 0.0
        if kind == "finger" and f == 0:
            w = 1.0
        elif kind == "palm" and u < 0.22:
            w = max(0.0, (s - 0.55) / 0.45) * (0.22 - u) / 0.22
        if w > 0:
            d = pos[v] - base
            rx = ca * d[0] - sa * d[1]
            ry = sa * d[0] + ca * d[1]
            pos[v, 0] = base[0] + (1 - w) * d[0] + w * rx
            pos[v, 1] = base[1] + (1 - w) * d[1] + w * ry
    return pos


def _thickness(order, labels, boundary, faces, n):
    """Per-vertex half-thickness, zero on the stitched silhouette."""
    # Hop distance to the stitched boundary (wrist-run interior stays thick).
    from collections import deque

    adj = [[] for _ in range(n)]
    for a, b, c in faces:
        for x, y in ((a, b), (b, c), (c, a)):
            adj[x].append(y)
            adj[y].append(x)
    wrist_interior = {("p", 0, c) for c in range(WRIST_COL_LO + 1, WRIST_COL_HI)}
    dist = np.full(n, 1 << 20, dtype=np.int64)
    q = deque()
    for v, key in enumerate(order):
        if key in boundary and key not in wrist_interior:
            dist[v] = 0
            q.append(v)
    while q:
        v = q.popleft()
        for w in adj[v]:
            if dist[w] > dist[v] + 1:
                dist[w] = dist[v] + 1
                q.append(w)
    h = np.zeros(n, dtype=NP_DTYPE)
    for v, lab in enumerate(labels):
        kind = lab[0]
        scale = PALM_THICK if kind == "palm" else FINGER_THICK
        d = min(float(dist[v]), 2.0) / 2.0
        h[v] = scale * np.sqrt(d)
    return h


def build_synthetic_template_arrays(seed: int = 0):
    """Build the full template field dict (see hand_model.HandTemplate).

    The topology is fixed; the seed drives a small smooth identity variation
    of the rest shape so different seeds give different synthetic subjects.
    """
    index, order, labels = _build_grid_sheet()
    boundary, wrist = _boundary_vertices(index)
    boundary_ids = {index[k] for k in boundary}
    faces_top = _sheet_faces(index, boundary_ids)
    n_sheet = len(order)
    pos = _rest_positions(order, labels)
    pos = _identity_variation(pos, seed)
    h = _thickness(order, labels, boundary, faces_top, n_sheet)

    # Stitch the mirrored bottom sheet: silhouette vertices are shared,
    # everything else (including the wrist-run interior) is duplicated.
    wrist_interior = set(wrist[1:-1])
    dup = {}  # top index -> bottom index
    verts = []
    for v, key in enumerate(order):
        verts.append(pos[v] + np.array([0.0, 0.0, h[v]]))
    for v, key in enumerate(order):
        if key in boundary and key not in wrist_interior:
            dup[v] = v  # shared on the outline
        else:
            dup[v] = len(verts)
            verts.append(pos[v] - np.array([0.0, 0.0, h[v]]))
    verts = np.asarray(verts, dtype=NP_DTYPE)
    dup_arr = np.array([dup[v] for v in range(n_sheet)], dtype=np.int64)
    # reversed winding so outward normals point down on the mirrored sheet
    faces_bot = np.stack(
        [dup_arr[faces_top[:, 0]], dup_arr[faces_top[:, 2]], dup_arr[faces_top[:, 1]]],
        axis=1,
    )
    faces = np.concatenate([faces_top, faces_bot])

    # One boundary edge split for vertex-count parity: split the stitched
    # bottom edge next to the wrist run.
    a = index[("p", 0, WRIST_COL_HI)]
    b = index[("p", 0, WRIST_COL_HI + 1)]
    new_v = len(verts)
    verts = np.vstack([verts, 0.5 * (verts[a] + verts[b])])
    out_faces = []
    for tri in faces:
        tri = list(tri)
        if a in tri and b in tri:
            ia, ib = tri.index(a), tri.index(b)
            t1, t2 = tri.copy(), tri.copy()
            t1[ib] = new_v
            t2[ia] = new_v
            out_faces.extend([t1, t2])
        else:
            out_faces.append(tri)
    faces = np.asarray(out_faces, dtype=np.int64)

    joints, parent = _joints(labels, order, index, pos)
    regressor = _joint_regressor(joints, verts)
    weights = _skinning_weights(order, labels, dup, len(verts))
    blends = _shape_blendshapes(verts, order, labels, dup)
    tips = _fingertips(index, dup)

    return {
        "rest_vertices": verts,
        "faces": faces,
        "joint_regressor": regressor,
        "skinning_weights": weights,
        "shape_blendshapes": blends,
        "parent": parent,
        "fingertip_vertex_ids": tips,
    }


def _identity_variation(pos, seed):
    """Low-frequency seeded warp, < 1.5 mm, applied to the midplane sheet."""
    if seed == 0:
        return pos
    rng = np.random.default_rng(seed)
    amp = rng.uniform(-1.0, 1.0, size=(3, 2, 3))  # 3 waves x (x,y) phase x xyz
    out = pos.copy()
    for k in range(3):
        freq = 18.0 + 9.0 * k
        phase = rng.uniform(0, 2 * np.pi, size=2)
        wave = np.sin(freq * pos[:, 0] + phase[0]) * np.cos(freq * pos[:, 1] + phase[1])
        out += 0.0005 * wave[:, None] * amp[k, 0][None, :]
    return out


def _joints(labels, order, index, pos):
    """16 joint rest positions: root + (MCP, PIP, DIP) per finger."""
    joints = np.zeros((N_PARTS, 3), dtype=NP_DTYPE)
    joints[0] = (0.0, 0.018, 0.0)  # wrist
    for f in range(5):
        base = pos[index[("p", PALM_ROWS, 4 * f + 1)]].copy()
        L = FINGER_LENGTHS[f]
        tip = pos[index[("f", f, L, 1)]].copy()
        for k, s in enumerate((0.0, 1.0 / 3.0, 2.0 / 3.0)):
            joints[1 + 3 * f + k] = base + s * (tip - base)
    parent = np.array(
        [-1] + sum(([0, 1 + 3 * f, 2 + 3 * f] for f in range(5)), []),
        dtype=np.int64,
    )
    return joints, parent


def _joint_regressor(joints, verts):
    """Each joint as a normalized Gaussian blend of its 8 nearest vertices."""
    reg = np.zeros((N_PARTS, verts.shape[0]), dtype=NP_DTYPE)
    for j in range(N_PARTS):
        d = np.linalg.norm(verts - joints[j], axis=1)
        nn = np.argsort(d, kind="stable")[:8]
        w = np.exp(-((d[nn] / 0.006) ** 2))
        w = np.maximum(w, 1e-9)
        reg[j, nn] = w / w.sum()
    return reg


def _finger_part_weights(s):
    """Blend (MCP, PIP, DIP) weights for arclength s in [0,1] along a finger."""
    knots = (1.0 / 3.0, 2.0 / 3.0)
    band = 0.12
    w = np.zeros(3)
    if s < knots[0] - band / 2:
        w[0] = 1.0
    elif s < knots[0] + band / 2:
        t = (s - (knots[0] - band / 2)) / band
        w[0], w[1] = 1 - t, t
    elif s < knots[1] - band / 2:
        w[1] = 1.0
    elif s < knots[1] + band / 2:
        t = (s - (knots[1] - band / 2)) / band
        w[1], w[2] = 1 - t, t
    else:
        w[2] = 1.0
    return w


def _skinning_weights(order, labels, dup, n_total):
    w = np.zeros((n_total, N_PARTS), dtype=NP_DTYPE)
    for v, lab in enumerate(labels):
        kind, f, u, s = lab
        row = np.zeros(N_PARTS)
        if kind == "palm":
            row[0] = 1.0
            # blend into finger MCPs just below the knuckle line
            if s > 0.9:
                c = u * (PALM_COLS - 1)
                fi = int(np.clip(round((c - 1) / 4), 0, 4))
                t = (s - 0.9) / 0.1 * 0.5
                row[0] = 1 - t
                row[1 + 3 * fi] = t
        else:
            mcp = 1 + 3 * f
            blend = _finger_part_weights(s)
            if s < 0.08:  # smooth root attachment at the very base
                t = s / 0.08
                row[0] = 0.5 * (1 - t)
                blend = blend * (1 - row[0])
            row[mcp : mcp + 3] += blend
        row = row / row.sum()
        w[v] = row
        w[dup[v]] = row  # mirrored sheet copies its twin's weights
    # the parity-split vertex averages its edge endpoints; both are root-only
    if np.all(w[-1] == 0):
        w[-1, 0] = 1.0
    return w


def _shape_blendshapes(verts, order, labels, dup):
    """10 smooth displacement fields, a few millimetres per unit coefficient."""
    n = verts.shape[0]
    blends = np.zeros((n, 3, N_SHAPE), dtype=NP_DTYPE)
    center = verts.mean(axis=0)
    finger_mask = np.zeros(n)
    s_along = np.zeros(n)
    finger_id = np.full(n, -1)
    for v, lab in enumerate(labels):
        kind, f, u, s = lab
        if kind == "finger":
            for t in (v, dup[v]):
                finger_mask[t] = 1.0
                s_along[t] = s
                finger_id[t] = f
    # 0: overall scale
    blends[:, :, 0] = 0.004 * (verts - center) / 0.05
    # 1: finger lengthening
    blends[:, 1, 1] = 0.004 * finger_mask * s_along
    # 2: fatness (inflate along z, widen x)
    blends[:, 2, 2] = 0.002 * np.sign(verts[:, 2]) * (np.abs(verts[:, 2]) > 1e-9)
    blends[:, 0, 2] = 0.001 * np.tanh((verts[:, 0] - center[0]) / 0.02)
    # 3: palm width
    blends[:, 0, 3] = 0.003 * (1 - finger_mask) * np.tanh((verts[:, 0] - center[0]) / 0.03)
    # 4-8: per-finger length
    for f in range(5):
        m = (finger_id == f).astype(NP_DTYPE)
        blends[:, 1, 4 + f] = 0.004 * m * s_along
    # 9: thumb splay
    m = (finger_id == 0).astype(NP_DTYPE)
    blends[:, 0, 9] = -0.003 * m * s_along
    return blends


def _fingertips(index, dup):
    tips = []
    for f, L in enumerate(FINGER_LENGTHS):
        tips.append(index[("f", f, L, 1)])
    return np.asarray(tips, dtype=np.int64)
