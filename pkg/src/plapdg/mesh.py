"""Conforming triangular meshes with oriented skeleton data.

A :class:`TriMesh` stores vertices and positively oriented triangles and
derives the full list of interfaces (edges) on construction.  Each interface
knows its ``plus`` element (the lower-numbered neighbour), its ``minus``
element (equal to ``plus`` on the boundary), the unit normal pointing out of
the plus element and its length.

Local face ``k`` of an element is the edge opposite local vertex ``k``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

__all__ = [
    "Interface",
    "MeshError",
    "TriMesh",
    "build_structured_mesh",
    "refine_uniform",
    "read_mesh",
    "write_mesh",
    "mesh_io",
]

# local face k is opposite local vertex k
LOCAL_FACES = np.array([[1, 2], [2, 0], [0, 1]])


class MeshError(ValueError):
    """Raised for invalid mesh input (schema, conformity, degenerate cells)."""


@dataclass(frozen=True)
class Interface:
    endpoints: tuple[int, int]
    plus_element: int
    minus_element: int
    unit_normal: tuple[float, float]
    length: float
    is_boundary: bool


def _signed_areas(vertices, elements):
    a = vertices[elements[:, 0]]
    b = vertices[elements[:, 1]]
    c = vertices[elements[:, 2]]
    return 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1])
                  - (c[:, 0] - a[:, 0]) * (b[:, 1] - a[:, 1]))


@dataclass(frozen=True, eq=False)
class TriMesh:
    """Immutable conforming simplicial mesh of a polygonal domain.

    Parameters
    ----------
    vertices : (nv, 2) array
    elements : (ne, 3) integer array of vertex indices. Clockwise triangles
        are reoriented; zero-area triangles are rejected.
    """

    vertices: np.ndarray
    elements: np.ndarray
    # skeleton, filled in __post_init__
    face_vertices: np.ndarray = field(init=False, repr=False)
    face_elements: np.ndarray = field(init=False, repr=False)
    face_local: np.ndarray = field(init=False, repr=False)
    face_normals: np.ndarray = field(init=False, repr=False)
    face_lengths: np.ndarray = field(init=False, repr=False)
    boundary_flags: np.ndarray = field(init=False, repr=False)
    element_faces: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        vertices = np.array(self.vertices, dtype=float)
        elements = np.array(self.elements, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 2:
            raise MeshError("vertices must be an (n, 2) array")
        if elements.ndim != 2 or elements.shape[1] != 3:
            raise MeshError("elements must be an (m, 3) array")
        if len(elements) == 0:
            raise MeshError("mesh has no elements")
        if elements.min() < 0 or elements.max() >= len(vertices):
            raise MeshError("element refers to a vertex index out of range")

        area = _signed_areas(vertices, elements)
        scale = np.max(np.ptp(vertices, axis=0)) ** 2
        bad = np.flatnonzero(np.abs(area) <= 1e-14 * scale)
        if bad.size:
            raise MeshError(f"zero-area element(s): {bad[:10].tolist()}")
        flip = area < 0
        elements[flip] = elements[flip][:, [0, 2, 1]]

        vertices.setflags(write=False)
        elements.setflags(write=False)
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "elements", elements)
        self._build_skeleton()

    def _build_skeleton(self):
        elements = self.elements
        ne = len(elements)
        # all (element, local face) half-edges
        half = elements[:, LOCAL_FACES]  # (ne, 3, 2)
        half = half.reshape(-1, 2)
        keys = np.sort(half, axis=1)
        uniq, inverse, counts = np.unique(keys, axis=0, return_inverse=True,
                                          return_counts=True)
        inverse = inverse.reshape(-1)
        if np.any(counts > 2):
            e = uniq[np.argmax(counts)]
            raise MeshError(
                f"non-conforming mesh: edge ({e[0]}, {e[1]}) shared by "
                f"{counts.max()} elements")

        nf = len(uniq)
        owner = np.repeat(np.arange(ne), 3)
        local = np.tile(np.arange(3), ne)
        # first occurrence (lowest element index) is the plus side
        order = np.lexsort((local, owner, inverse))
        inv_sorted = inverse[order]
        first = np.ones(len(order), dtype=bool)
        first[1:] = inv_sorted[1:] != inv_sorted[:-1]

        face_elements = np.empty((nf, 2), dtype=np.int64)
        face_local = np.empty((nf, 2), dtype=np.int64)
        plus_idx = order[first]
        face_elements[:, 0] = owner[plus_idx]
        face_local[:, 0] = local[plus_idx]
        face_elements[:, 1] = face_elements[:, 0]
        face_local[:, 1] = face_local[:, 0]
        second = order[~first]
        face_elements[inverse[second], 1] = owner[second]
        face_local[inverse[second], 1] = local[second]

        boundary = counts == 1
        face_vertices = half[plus_idx]  # oriented counter-clockwise in plus
        p0 = self.vertices[face_vertices[:, 0]]
        p1 = self.vertices[face_vertices[:, 1]]
        d = p1 - p0
        lengths = np.hypot(d[:, 0], d[:, 1])
        normals = np.column_stack([d[:, 1], -d[:, 0]]) / lengths[:, None]

        element_faces = inverse.reshape(ne, 3)

        for name, arr in [("face_vertices", face_vertices),
                          ("face_elements", face_elements),
                          ("face_local", face_local),
                          ("face_normals", normals),
                          ("face_lengths", lengths),
                          ("boundary_flags", boundary),
                          ("element_faces", element_faces)]:
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    # ------------------------------------------------------------------
    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def n_interfaces(self) -> int:
        return len(self.face_vertices)

    @cached_property
    def areas(self) -> np.ndarray:
        return _signed_areas(self.vertices, self.elements)

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        """(ne, 3) lengths of local faces."""
        return self.face_lengths[self.element_faces]

    @cached_property
    def diameters(self) -> np.ndarray:
        return self.edge_lengths.max(axis=1)

    @property
    def h_max(self) -> float:
        return float(self.diameters.max())

    @cached_property
    def faces_per_element(self) -> np.ndarray:
        """m_K, the number of interfaces on each element (3 when conforming)."""
        return np.full(self.n_elements, 3, dtype=np.int64)

    @cached_property
    def jacobians(self) -> np.ndarray:
        """(ne, 2, 2) affine-map Jacobians from the reference triangle."""
        a = self.vertices[self.elements[:, 0]]
        b = self.vertices[self.elements[:, 1]]
        c = self.vertices[self.elements[:, 2]]
        return np.stack([b - a, c - a], axis=2)

    @cached_property
    def inverse_jacobians(self) -> np.ndarray:
        return np.linalg.inv(self.jacobians)

    @property
    def interfaces(self) -> list[Interface]:
        return [
            Interface(
                endpoints=(int(v[0]), int(v[1])),
                plus_element=int(e[0]),
                minus_element=int(e[1]),
                unit_normal=(float(n[0]), float(n[1])),
                length=float(ln),
                is_boundary=bool(b),
            )
            for v, e, n, ln, b in zip(self.face_vertices, self.face_elements,
                                      self.face_normals, self.face_lengths,
                                      self.boundary_flags)
        ]

    def element_normals(self) -> np.ndarray:
        """(ne, 3, 2) outward unit normals on each local face."""
        verts = self.vertices[self.elements]
        p0 = verts[:, LOCAL_FACES[:, 0]]
        p1 = verts[:, LOCAL_FACES[:, 1]]
        d = p1 - p0
        n = np.stack([d[..., 1], -d[..., 0]], axis=-1)
        return n / np.linalg.norm(n, axis=-1, keepdims=True)

    def to_reference(self, element: int, points) -> np.ndarray:
        """Map physical points into the reference frame of ``element``."""
        points = np.asarray(points, dtype=float)
        a = self.vertices[self.elements[element, 0]]
        return (points - a) @ self.inverse_jacobians[element].T

    def to_physical(self, element: int, ref_points) -> np.ndarray:
        ref_points = np.asarray(ref_points, dtype=float)
        a = self.vertices[self.elements[element, 0]]
        return a + ref_points @ self.jacobians[element].T


def build_structured_mesh(domain, target_h: float) -> TriMesh:
    """Uniform n x n grid of squares, each split along the lower-left to
    upper-right diagonal, with the smallest n such that h_max <= target_h.

    ``domain`` is ``(x0, x1, y0, y1)``.
    """
    x0, x1, y0, y1 = map(float, domain)
    lx, ly = x1 - x0, y1 - y0
    if not (lx > 0 and ly > 0):
        raise ValueError(f"degenerate domain {domain!r}")
    if not target_h > 0:
        raise ValueError("target_h must be positive")
    diag = math.hypot(lx, ly)
    if target_h > diag * (1 + 1e-12):
        raise ValueError(
            f"target_h={target_h} exceeds the domain diameter {diag}")
    n = max(1, math.ceil(diag / target_h * (1 - 1e-12)))

    xs = np.linspace(x0, x1, n + 1)
    ys = np.linspace(y0, y1, n + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    j, i = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    v00 = (j * (n + 1) + i).ravel()
    v10 = v00 + 1
    v01 = v00 + n + 1
    v11 = v01 + 1
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    elements = np.empty((2 * n * n, 3), dtype=np.int64)
    elements[0::2] = lower
    elements[1::2] = upper
    return TriMesh(vertices, elements)


def refine_uniform(mesh: TriMesh) -> TriMesh:
    """Red refinement: split every triangle into four congruent children."""
    nv = len(mesh.vertices)
    fv = mesh.face_vertices
    midpoints = 0.5 * (mesh.vertices[fv[:, 0]] + mesh.vertices[fv[:, 1]])
    vertices = np.vstack([mesh.vertices, midpoints])
    # midpoint index of local face k (opposite vertex k)
    m = nv + mesh.element_faces
    a, b, c = mesh.elements.T
    m_bc, m_ca, m_ab = m[:, 0], m[:, 1], m[:, 2]
    children = np.stack([
        np.column_stack([a, m_ab, m_ca]),
        np.column_stack([m_ab, b, m_bc]),
        np.column_stack([m_ca, m_bc, c]),
        np.column_stack([m_ab, m_bc, m_ca]),
    ], axis=1).reshape(-1, 3)
    return TriMesh(vertices, children)


def write_mesh(mesh: TriMesh, path) -> None:
    data = {
        "vertices": mesh.vertices.tolist(),
        "elements": mesh.elements.tolist(),
    }
    Path(path).write_text(json.dumps(data))


def read_mesh(path) -> TriMesh:
    """Read the JSON schema ``{"vertices": [[x, y], ...], "elements":
    [[i, j, k], ...]}`` (0-based).  Interfaces are rebuilt, never stored."""
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise MeshError(f"invalid JSON in {path}: {exc}") from exc
    if not isinstance(data, dict) or not {"vertices", "elements"} <= set(data):
        raise MeshError("mesh file must contain 'vertices' and 'elements'")
    try:
        vertices = np.asarray(data["vertices"], dtype=float)
        elements = np.asarray(data["elements"])
    except (TypeError, ValueError) as exc:
        raise MeshError(f"schema violation: {exc}") from exc
    if elements.size and not np.issubdtype(elements.dtype, np.integer):
        raise MeshError("element indices must be integers")
    return TriMesh(vertices, elements)


def mesh_io(mesh, path, direction: str):
    if direction == "write":
        write_mesh(mesh, path)
        return Path(path)
    if direction == "read":
        return read_mesh(path)
    raise ValueError(f"direction must be 'read' or 'write', got {direction!r}")
