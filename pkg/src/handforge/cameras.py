"""Calibrated pinhole cameras, projection, and multi-view joint triangulation.

Conventions: extrinsics map world to camera (x_cam = R @ x + t), the camera
looks down +z, and image coordinates are pixels with the origin at the
top-left corner and y pointing down.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .common import NP_DTYPE, freeze
from .errors import (
    BehindCameraError,
    InsufficientViewsError,
    JointVisibilityError,
    ValidationError,
)

MIN_DEPTH = 1e-9


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValidationError(f"focal lengths must be positive, got {self.fx}, {self.fy}")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValidationError("principal point must lie inside the image")

    @property
    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]],
            dtype=NP_DTYPE,
        )


@dataclass(frozen=True)
class CameraExtrinsics:
    rotation: np.ndarray  # 3x3, world -> camera
    translation: np.ndarray  # 3-vector, world units (meters)

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=NP_DTYPE)
        t = np.asarray(self.translation, dtype=NP_DTYPE).reshape(3)
        if R.shape != (3, 3):
            raise ValidationError(f"rotation must be 3x3, got {R.shape}")
        if np.linalg.norm(R.T @ R - np.eye(3)) >= 1e-6:
            raise ValidationError("rotation is not orthonormal")
        if np.linalg.det(R) < 0:
            raise ValidationError("rotation must have determinant +1")
        object.__setattr__(self, "rotation", freeze(R))
        object.__setattr__(self, "translation", freeze(t))


@dataclass(frozen=True)
class Camera:
    intrinsics: CameraIntrinsics
    extrinsics: CameraExtrinsics
    name: str = ""

    @property
    def projection_matrix(self) -> np.ndarray:
        """3x4 matrix K [R | t]."""
        Rt = np.hstack(
            [self.extrinsics.rotation, self.extrinsics.translation[:, None]]
        )
        return self.intrinsics.matrix @ Rt

    @property
    def center(self) -> np.ndarray:
        """Camera center in world coordinates, -R^T t."""
        return -self.extrinsics.rotation.T @ self.extrinsics.translation


@dataclass(frozen=True)
class Joints3D:
    positions: np.ndarray  # (B, 3) world-space meters

    def __post_init__(self):
        p = np.asarray(self.positions, dtype=NP_DTYPE)
        if p.ndim != 2 or p.shape[1] != 3:
            raise ValidationError(f"joint positions must be (B, 3), got {p.shape}")
        if not np.all(np.isfinite(p)):
            raise ValidationError("joint positions must be finite")
        object.__setattr__(self, "positions", freeze(p))

    @property
    def count(self) -> int:
        return self.positions.shape[0]


@dataclass(frozen=True)
class Joints2D:
    positions: np.ndarray  # (B, 2) pixels
    confidence: np.ndarray = field(default=None)  # (B,) in [0, 1]

    def __post_init__(self):
        p = np.asarray(self.positions, dtype=NP_DTYPE)
        if p.ndim != 2 or p.shape[1] != 2:
            raise ValidationError(f"2D joint positions must be (B, 2), got {p.shape}")
        if not np.all(np.isfinite(p)):
            raise ValidationError("2D joint positions must be finite")
        c = self.confidence
        c = np.ones(p.shape[0], dtype=NP_DTYPE) if c is None else np.asarray(c, dtype=NP_DTYPE)
        if c.shape != (p.shape[0],):
            raise ValidationError("confidence must be a B-vector")
        if np.any(c < 0) or np.any(c > 1):
            raise ValidationError("confidences must lie in [0, 1]")
        object.__setattr__(self, "positions", freeze(p))
        object.__setattr__(self, "confidence", freeze(c))

    @property
    def count(self) -> int:
        return self.positions.shape[0]


def project(points, camera: Camera) -> np.ndarray:
    """Project world points to pixel coordinates.

    Args:
        points: (N, 3) or (3,) world points.
        camera: calibrated camera.

    Returns:
        (N, 2) or (2,) pixel coordinates.

    Raises:
        BehindCameraError: if any point has non-positive camera-frame depth.
    """
    p = np.asarray(points, dtype=NP_DTYPE)
    single = p.ndim == 1
    p = np.atleast_2d(p)
    cam = p @ camera.extrinsics.rotation.T + camera.extrinsics.translation
    z = cam[:, 2]
    bad = np.nonzero(z <= MIN_DEPTH)[0]
    if bad.size:
        raise BehindCameraError(bad)
    K = camera.intrinsics
    uv = np.stack([K.fx * cam[:, 0] / z + K.cx, K.fy * cam[:, 1] / z + K.cy], axis=1)
    return uv[0] if single else uv


def _project_safe(points, camera):
    """Projection that maps behind-camera points to +inf instead of raising."""
    p = np.atleast_2d(np.asarray(points, dtype=NP_DTYPE))
    cam = p @ camera.extrinsics.rotation.T + camera.extrinsics.translation
    z = cam[:, 2]
    ok = z > MIN_DEPTH
    zs = np.where(ok, z, 1.0)
    K = camera.intrinsics
    uv = np.stack([K.fx * cam[:, 0] / zs + K.cx, K.fy * cam[:, 1] / zs + K.cy], axis=1)
    uv[~ok] = np.inf
    return uv, cam, ok


def _check_observations(observations, cameras):
    if len(observations) != len(cameras):
        raise ValidationError("one Joints2D per camera is required")
    if len(cameras) < 2:
        raise InsufficientViewsError(f"need at least 2 views, got {len(cameras)}")
    counts = {o.count for o in observations}
    if len(counts) != 1:
        raise ValidationError(f"views disagree on joint count: {sorted(counts)}")
    B = counts.pop()
    vis = np.stack([o.confidence > 0 for o in observations])  # (n, B)
    starved = np.nonzero(vis.sum(axis=0) < 2)[0]
    if starved.size:
        raise JointVisibilityError(starved)
    return B


def reprojection_error(joints3d: Joints3D, observations, cameras) -> float:
    """Mean squared reprojection error in px^2.

    Averages the confidence-weighted squared residual norm over all views and
    joints. Confidences default to 1, which reduces to the plain objective.
    """
    B = _check_observations(observations, cameras)
    if joints3d.count != B:
        raise ValidationError(
            f"joint count mismatch: 3D has {joints3d.count}, observations have {B}"
        )
    total = 0.0
    for obs, cam in zip(observations, cameras):
        uv, _, ok = _project_safe(joints3d.positions, cam)
        r2 = np.sum((uv - obs.positions) ** 2, axis=1)
        r2 = np.where(ok, r2, np.inf)
        total += float(np.sum(obs.confidence * r2))
    return total / (len(cameras) * B)


def reprojection_error_gradient(joints3d: Joints3D, observations, cameras) -> np.ndarray:
    """Analytic gradient of reprojection_error w.r.t. the 3D joints, (B, 3)."""
    B = _check_observations(observations, cameras)
    grad = np.zeros((B, 3), dtype=NP_DTYPE)
    n = len(cameras)
    for obs, cam in zip(observations, cameras):
        uv, camp, ok = _project_safe(joints3d.positions, cam)
        K, R = cam.intrinsics, cam.extrinsics.rotation
        x, y, z = camp[:, 0], camp[:, 1], camp[:, 2]
        res = uv - obs.positions  # (B, 2)
        # d(uv)/d(cam point): rows of the 2x3 pinhole Jacobian
        du = np.stack([K.fx / z, np.zeros_like(z), -K.fx * x / z**2], axis=1)
        dv = np.stack([np.zeros_like(z), K.fy / z, -K.fy * y / z**2], axis=1)
        g_cam = 2.0 * (res[:, :1] * du + res[:, 1:2] * dv)  # (B, 3)
        g = g_cam @ R  # chain through x_cam = R x + t
        g[~ok] = 0.0
        grad += obs.confidence[:, None] * g
    return grad / (n * B)


def _dlt_point(obs_uv, weights, proj_mats):
    """Linear triangulation of a single point from weighted view equations."""
    rows = []
    for (u, v), w, P in zip(obs_uv, weights, proj_mats):
        if w <= 0:
            continue
        rows.append(w * (u * P[2] - P[0]))
        rows.append(w * (v * P[2] - P[1]))
    A = np.stack(rows)
    _, _, vt = np.linalg.svd(A)
    X = vt[-1]
    if abs(X[3]) < 1e-12:
        # Point at infinity: fall back to the unscaled direction.
        return X[:3]
    return X[:3] / X[3]


def _point_objective(X, obs_list, cams, conf):
    err = 0.0
    for (uv_obs, cam, w) in zip(obs_list, cams, conf):
        if w <= 0:
            continue
        uv, _, ok = _project_safe(X[None, :], cam)
        if not ok[0]:
            return np.inf
        err += w * float(np.sum((uv[0] - uv_obs) ** 2))
    return err


def _point_residuals_jacobian(X, obs_list, cams, conf):
    rs, Js = [], []
    for (uv_obs, cam, w) in zip(obs_list, cams, conf):
        if w <= 0:
            continue
        sw = np.sqrt(w)
        uv, camp, ok = _project_safe(X[None, :], cam)
        if not ok[0]:
            return None, None
        K, R = cam.intrinsics, cam.extrinsics.rotation
        x, y, z = camp[0]
        J2 = np.array([[K.fx / z, 0.0, -K.fx * x / z**2], [0.0, K.fy / z, -K.fy * y / z**2]])
        rs.append(sw * (uv[0] - uv_obs))
        Js.append(sw * (J2 @ R))
    return np.concatenate(rs), np.vstack(Js)


def triangulate_joints(observations, cameras, max_iters: int = 50, tol: float = 1e-12) -> Joints3D:
    """Recover 3D joints by minimizing mean squared reprojection error.

    Initialization is linear DLT per joint, followed by Gauss-Newton with
    backtracking line search so the objective never increases. When the
    normal matrix is ill-conditioned (cond > 1e8) the step falls back to
    plain gradient descent.

    Args:
        observations: list of Joints2D, one per camera.
        cameras: list of Camera.
        max_iters: refinement iteration cap per joint.
        tol: stop when the objective decreases by less than this.

    Returns:
        Joints3D with one position per observed joint.
    """
    B = _check_observations(observations, cameras)
    proj_mats = [c.projection_matrix for c in cameras]
    out = np.zeros((B, 3), dtype=NP_DTYPE)
    for b in range(B):
        obs_b = [o.positions[b] for o in observations]
        conf_b = [float(o.confidence[b]) for o in observations]
        X = _dlt_point(obs_b, conf_b, proj_mats)
        f = _point_objective(X, obs_b, cameras, conf_b)
        for _ in range(max_iters):
            r, J = _point_residuals_jacobian(X, obs_b, cameras, conf_b)
            if r is None:
                break
            JtJ = J.T @ J
            if np.linalg.cond(JtJ) > 1e8:
                step = -J.T @ r  # gradient direction (up to a factor of 2)
            else:
                step = -np.linalg.solve(JtJ, J.T @ r)
            # Backtracking guarantees monotone descent.
            alpha, accepted = 1.0, False
            for _ in range(30):
                f_new = _point_objective(X + alpha * step, obs_b, cameras, conf_b)
                if f_new < f:
                    X = X + alpha * step
                    improved = f - f_new
                    f = f_new
                    accepted = True
                    break
                alpha *= 0.5
            if not accepted or improved < tol:
                break
        out[b] = X
    return Joints3D(out)


def cameras_to_json(cameras) -> str:
    views = []
    for cam in cameras:
        K, E = cam.intrinsics, cam.extrinsics
        views.append(
            {
                "name": cam.name,
                "fx": K.fx,
                "fy": K.fy,
                "cx": K.cx,
                "cy": K.cy,
                "width": K.width,
                "height": K.height,
                "R": E.rotation.tolist(),
                "t": E.translation.tolist(),
            }
        )
    return json.dumps({"views": views}, indent=2)


def cameras_from_json(text: str):
    try:
        data = json.loads(text)
        views = data["views"]
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise ValidationError(f"malformed cameras JSON: {e}") from e
    cams = []
    for i, v in enumerate(views):
        try:
            cams.append(
                Camera(
                    intrinsics=CameraIntrinsics(
                        fx=float(v["fx"]), fy=float(v["fy"]),
                        cx=float(v["cx"]), cy=float(v["cy"]),
                        width=int(v["width"]), height=int(v["height"]),
                    ),
                    extrinsics=CameraExtrinsics(
                        rotation=np.array(v["R"], dtype=NP_DTYPE),
                        translation=np.array(v["t"], dtype=NP_DTYPE),
                    ),
                    name=str(v.get("name", f"view_{i:02d}")),
                )
            )
        except KeyError as e:
            raise ValidationError(f"camera entry {i} is missing field {e}") from e
    return cams
