"""Parametric articulated hand: template, shape blendshapes, skinning.

The template follows the common 778-vertex / 1538-face layout with 16 pose
parts (wrist + 3 per finger) and 10 shape coefficients. Five fingertip
vertex ids extend the 16 kinematic joints to the 21-keypoint convention:
keypoints 0..15 are the posed joints, 16..20 the fingertip vertices in
thumb..little order.
"""

from dataclasses import dataclass, field

import numpy as np
import torch

from . import meshtools
from .common import DTYPE, NP_DTYPE, as_array, as_tensor, freeze
from .errors import ValidationError
from .synthetic_hand import build_synthetic_template_arrays

N_VERTS = 778
N_FACES = 1538
N_PARTS = 16
N_SHAPE = 10
N_KEYPOINTS = 21

TEMPLATE_FIELDS = (
    "rest_vertices",
    "faces",
    "joint_regressor",
    "skinning_weights",
    "shape_blendshapes",
    "parent",
    "fingertip_vertex_ids",
)


@dataclass(frozen=True)
class HandTemplate:
    rest_vertices: np.ndarray  # (778, 3) meters
    faces: np.ndarray  # (1538, 3)
    joint_regressor: np.ndarray  # (16, 778)
    skinning_weights: np.ndarray  # (778, 16), rows sum to 1
    shape_blendshapes: np.ndarray  # (778, 3, 10)
    parent: np.ndarray  # (16,), parent[0] == -1
    fingertip_vertex_ids: np.ndarray  # (5,)

    def __post_init__(self):
        for name in TEMPLATE_FIELDS:
            object.__setattr__(self, name, freeze(np.asarray(getattr(self, name))))
        _validate_template(self)

    @property
    def n_vertices(self):
        return self.rest_vertices.shape[0]


@dataclass(frozen=True)
class PoseParams:
    theta: np.ndarray  # (16, 3) axis-angle, part 0 is the global orientation
    translation: np.ndarray = field(default=None)  # (3,) meters

    def __post_init__(self):
        th = np.asarray(self.theta, dtype=NP_DTYPE)
        if th.shape != (N_PARTS, 3):
            raise ValidationError(f"theta must be ({N_PARTS}, 3), got {th.shape}")
        if not np.all(np.isfinite(th)):
            raise ValidationError("theta must be finite")
        tr = self.translation
        tr = np.zeros(3, dtype=NP_DTYPE) if tr is None else np.asarray(tr, dtype=NP_DTYPE).reshape(3)
        if not np.all(np.isfinite(tr)):
            raise ValidationError("translation must be finite")
        object.__setattr__(self, "theta", freeze(th))
        object.__setattr__(self, "translation", freeze(tr))

    @staticmethod
    def rest():
        return PoseParams(np.zeros((N_PARTS, 3)))


@dataclass(frozen=True)
class ShapeParams:
    beta: np.ndarray  # (10,)

    def __post_init__(self):
        b = np.asarray(self.beta, dtype=NP_DTYPE).reshape(-1)
        if b.shape != (N_SHAPE,):
            raise ValidationError(f"beta must have {N_SHAPE} entries, got {b.shape}")
        if not np.all(np.isfinite(b)):
            raise ValidationError("beta must be finite")
        object.__setattr__(self, "beta", freeze(b))

    @staticmethod
    def neutral():
        return ShapeParams(np.zeros(N_SHAPE))


@dataclass(frozen=True)
class HandMesh:
    vertices: np.ndarray  # (Nv, 3) meters
    faces: np.ndarray  # (Nf, 3)
    level: int = 0  # subdivision level, 0..3

    def __post_init__(self):
        object.__setattr__(self, "vertices", freeze(np.asarray(self.vertices, dtype=NP_DTYPE)))
        object.__setattr__(self, "faces", freeze(np.asarray(self.faces, dtype=np.int64)))


def _validate_template(t: HandTemplate):
    v, f = t.rest_vertices, t.faces
    if v.shape != (N_VERTS, 3):
        raise ValidationError(f"rest_vertices must be ({N_VERTS}, 3), got {v.shape}")
    if f.shape != (N_FACES, 3):
        raise ValidationError(f"faces must be ({N_FACES}, 3), got {f.shape}")
    if f.min() < 0 or f.max() >= v.shape[0]:
        raise ValidationError("faces reference out-of-range vertices")
    w = t.skinning_weights
    if w.shape != (N_VERTS, N_PARTS):
        raise ValidationError(f"skinning_weights must be ({N_VERTS}, {N_PARTS})")
    if np.any(w < -1e-9):
        raise ValidationError("skinning weights must be non-negative")
    sums = w.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > 1e-6):
        bad = np.argmax(np.abs(sums - 1.0))
        raise ValidationError(
            f"skinning weight row {bad} sums to {sums[bad]:.6f}, expected 1"
        )
    if t.joint_regressor.shape != (N_PARTS, N_VERTS):
        raise ValidationError("joint_regressor must be (16, 778)")
    if t.shape_blendshapes.shape != (N_VERTS, 3, N_SHAPE):
        raise ValidationError("shape_blendshapes must be (778, 3, 10)")
    p = t.parent
    if p.shape != (N_PARTS,) or p[0] != -1:
        raise ValidationError("parent must be a 16-vector with parent[0] == -1")
    # Acyclic with a single root: walking up from each part must reach -1.
    for j in range(1, N_PARTS):
        seen, cur = set(), j
        while cur != -1:
            if cur in seen:
                raise ValidationError(f"kinematic tree has a cycle through part {j}")
            seen.add(cur)
            cur = int(p[cur])
            if not (-1 <= cur < N_PARTS):
                raise ValidationError(f"parent[{j}] chain leaves valid range")
    if t.fingertip_vertex_ids.shape != (5,):
        raise ValidationError("fingertip_vertex_ids must have 5 entries")
    if t.fingertip_vertex_ids.min() < 0 or t.fingertip_vertex_ids.max() >= N_VERTS:
        raise ValidationError("fingertip vertex ids out of range")


def load_template(path=None, format: str = "synthetic", seed: int = 0) -> HandTemplate:
    """Load a hand template.

    Args:
        path: archive of named arrays (required for format="mano_asset").
        format: "mano_asset" reads a .npz with the HandTemplate fields;
            "synthetic" procedurally generates the bundled stand-in hand.
        seed: identity seed for the synthetic generator.

    Raises:
        ValidationError: missing fields, unnormalized weights, cyclic tree.
    """
    if format == "synthetic":
        return HandTemplate(**build_synthetic_template_arrays(seed))
    if format == "mano_asset":
        if path is None:
            raise ValidationError("mano_asset format requires a path")
        try:
            data = np.load(path)
        except (OSError, ValueError) as e:
            raise ValidationError(f"cannot read template archive {path}: {e}") from e
        missing = [k for k in TEMPLATE_FIELDS if k not in data]
        if missing:
            raise ValidationError(f"template archive missing fields: {missing}")
        return HandTemplate(**{k: data[k] for k in TEMPLATE_FIELDS})
    raise ValidationError(f"unknown template format '{format}'")


def save_template(template: HandTemplate, path):
    np.savez(path, **{k: getattr(template, k) for k in TEMPLATE_FIELDS})


def _rodrigues(theta: torch.Tensor) -> torch.Tensor:
    """Axis-angle (N, 3) to rotation matrices (N, 3, 3), autograd-safe at 0."""
    angle = torch.linalg.norm(theta, dim=1, keepdim=True)
    small = angle < 1e-8
    safe = torch.where(small, torch.ones_like(angle), angle)
    axis = theta / safe
    x, y, z = axis[:, 0], axis[:, 1], axis[:, 2]
    zero = torch.zeros_like(x)
    K = torch.stack(
        [zero, -z, y, z, zero, -x, -y, x, zero], dim=1
    ).reshape(-1, 3, 3)
    s = torch.sin(angle)[..., None]
    c = torch.cos(angle)[..., None]
    eye = torch.eye(3, dtype=theta.dtype).expand(theta.shape[0], 3, 3)
    R = eye + s * K + (1.0 - c) * (K @ K)
    return torch.where(small[..., None], eye, R)


class TemplateTensors:
    """Torch views of the template arrays, built once and reused."""

    def __init__(self, template: HandTemplate):
        self.template = template
        self.rest = as_tensor(template.rest_vertices)
        self.blend = as_tensor(template.shape_blendshapes)
        self.regressor = as_tensor(template.joint_regressor)
        self.weights = as_tensor(template.skinning_weights)
        self.parent = template.parent
        self.tips = torch.as_tensor(template.fingertip_vertex_ids.copy())


def lbs_forward(tt: TemplateTensors, theta: torch.Tensor, beta: torch.Tensor,
                translation: torch.Tensor = None):
    """Differentiable linear blend skinning.

    Args:
        tt: TemplateTensors for the template.
        theta: (16, 3) axis-angle pose.
        beta: (10,) shape coefficients.
        translation: optional (3,) global translation.

    Returns:
        (vertices (778, 3), keypoints (21, 3)) torch tensors.
    """
    shaped = tt.rest + torch.einsum("vdk,k->vd", tt.blend, beta)
    joints = tt.regressor @ shaped  # (16, 3) rest-pose joints
    R = _rodrigues(theta)  # (16, 3, 3)

    # Forward kinematics: world transform per part, rotating about each
    # rest joint. Stored as (R_world, t_world) with x -> R x + t.
    Rw = [None] * N_PARTS
    twd = [None] * N_PARTS
    Rw[0] = R[0]
    twd[0] = joints[0] - R[0] @ joints[0]
    for j in range(1, N_PARTS):
        p = int(tt.parent[j])
        Rw[j] = Rw[p] @ R[j]
        # local rotation about the rest joint j, then the parent transform
        twd[j] = Rw[p] @ (joints[j] - R[j] @ joints[j]) + twd[p]
    Rws = torch.stack(Rw)  # (16, 3, 3)
    tws = torch.stack(twd)  # (16, 3)

    # Blend per-vertex: x' = sum_j w_ij (Rw_j x + tw_j)
    vr = torch.einsum("jab,vb->vja", Rws, shaped) + tws[None, :, :]
    verts = torch.einsum("vj,vja->va", tt.weights, vr)
    posed_joints = torch.einsum("jab,jb->ja", Rws, joints) + tws
    keypoints = torch.cat([posed_joints, verts[tt.tips]], dim=0)
    if translation is not None:
        verts = verts + translation
        keypoints = keypoints + translation
    return verts, keypoints


def forward(template: HandTemplate, pose: PoseParams, shape: ShapeParams,
            tensors: TemplateTensors = None):
    """Pose and shape the template (numpy API).

    Returns:
        (HandMesh at level 0, keypoints (21, 3) array).
    """
    tt = tensors if tensors is not None else TemplateTensors(template)
    with torch.no_grad():
        verts, keypoints = lbs_forward(
            tt,
            as_tensor(pose.theta),
            as_tensor(shape.beta),
            as_tensor(pose.translation),
        )
    return HandMesh(as_array(verts), template.faces, level=0), as_array(keypoints)


def subdivide(mesh: HandMesh, levels: int):
    """Midpoint-subdivide a hand mesh.

    Returns:
        (HandMesh at mesh.level + levels, prolongation CSR matrix mapping
        input per-vertex attributes to the subdivided vertices).
    """
    v, f, prolong = meshtools.subdivide_midpoint(mesh.vertices, mesh.faces, levels)
    return HandMesh(v, f, level=mesh.level + levels), prolong


def laplacian_matrix(mesh: HandMesh):
    return meshtools.laplacian_matrix(mesh.faces, mesh.vertices.shape[0])


def vertex_normals(mesh: HandMesh, return_degenerate: bool = False):
    out = meshtools.vertex_normals(mesh.vertices, mesh.faces, return_degenerate)
    if return_degenerate:
        return as_array(out[0]), as_array(out[1]).astype(bool)
    return as_array(out)


def edge_lengths(mesh: HandMesh):
    edges = meshtools.unique_edges(mesh.faces)
    return as_array(meshtools.edge_lengths(mesh.vertices, edges))
