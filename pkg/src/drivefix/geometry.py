"""Oriented-box geometry: corners, separating-axis overlap, clearance."""

from __future__ import annotations

import math

import numpy as np


def wrap_angle(a: float) -> float:
    """Normalize an angle to (-pi, pi]."""
    a = math.fmod(a, 2.0 * math.pi)
    if a <= -math.pi:
        a += 2.0 * math.pi
    elif a > math.pi:
        a -= 2.0 * math.pi
    return a


def box_corners(x: float, y: float, heading: float, length: float, width: float) -> np.ndarray:
    """4x2 corner array of a box centered at (x, y), long axis along heading."""
    hl, hw = 0.5 * length, 0.5 * width
    c, s = math.cos(heading), math.sin(heading)
    local = np.array([(hl, hw), (hl, -hw), (-hl, -hw), (-hl, hw)])
    rot = np.array([[c, -s], [s, c]])
    return local @ rot.T + np.array([x, y])


def _axes(corners: np.ndarray) -> np.ndarray:
    # edge normals of a rectangle: two unique directions
    edges = np.array([corners[1] - corners[0], corners[3] - corners[0]])
    normals = np.stack([-edges[:, 1], edges[:, 0]], axis=1)
    return normals / np.linalg.norm(normals, axis=1, keepdims=True)


def boxes_overlap(corners_a: np.ndarray, corners_b: np.ndarray) -> bool:
    """Separating-axis test over the 4 candidate axes of two rectangles."""
    for axis in np.vstack([_axes(corners_a), _axes(corners_b)]):
        pa = corners_a @ axis
        pb = corners_b @ axis
        if pa.max() < pb.min() or pb.max() < pa.min():
            return False
    return True


def penetration_depth(corners_a: np.ndarray, corners_b: np.ndarray) -> float:
    """Min translation along a face normal to separate overlapping boxes.

    Only meaningful when the boxes overlap; returns 0 otherwise.
    """
    depth = math.inf
    for axis in np.vstack([_axes(corners_a), _axes(corners_b)]):
        pa = corners_a @ axis
        pb = corners_b @ axis
        overlap = min(pa.max(), pb.max()) - max(pa.min(), pb.min())
        if overlap < 0:
            return 0.0
        depth = min(depth, overlap)
    return depth


def _point_segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    ab = b - a
    denom = float(ab @ ab)
    t = 0.0 if denom == 0.0 else float(np.clip((p - a) @ ab / denom, 0.0, 1.0))
    return float(np.linalg.norm(p - (a + t * ab)))


def boxes_distance(corners_a: np.ndarray, corners_b: np.ndarray) -> float:
    """Boundary-to-boundary distance between two rectangles (0 if overlapping).

    For disjoint convex polygons the minimum is attained at a vertex of one
    polygon against an edge of the other, so checking all vertex/edge pairs
    both ways is exact.
    """
    if boxes_overlap(corners_a, corners_b):
        return 0.0
    best = math.inf
    for pts, poly in ((corners_a, corners_b), (corners_b, corners_a)):
        for p in pts:
            for i in range(4):
                d = _point_segment_distance(p, poly[i], poly[(i + 1) % 4])
                if d < best:
                    best = d
    return best
