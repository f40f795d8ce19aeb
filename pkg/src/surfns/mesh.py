"""Curved quadratic triangle meshes of closed surfaces.

A mesh stores one global coordinate per Lagrange node.  Corner nodes come
first (indices ``0..corner_count-1``) so that a piecewise-linear field is
simply the restriction of the coefficient vector to that prefix.  Each
element row lists its three corners followed by the three midside nodes,
midside ``3+i`` opposite corner ``i``.

Midside nodes are shared between the two elements adjacent to an edge,
which makes the discrete surface globally continuous even though the
elements are curved.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DegenerateElementError, MeshStructureError
from .reference import p2_gradients, quadrature_rule

__all__ = [
    "SurfaceMesh",
    "NodeField",
    "PushforwardMap",
    "build_sphere",
    "build_torus",
    "build_capsule",
    "interpolate",
    "pushforward",
    "update_geometry",
    "mesh_size",
    "validate_mesh",
]

SPACES = ("P2_scalar", "P2_vector3", "P1_scalar")


@dataclass(frozen=True)
class SurfaceMesh:
    """Closed, oriented surface mesh of curved six-node triangles."""

    node_coords: np.ndarray  # (K, 3) float
    triangles: np.ndarray  # (J, 6) int, corners then midsides
    corner_count: int
    level: int = 0
    kind: str = "custom"

    @property
    def num_nodes(self) -> int:
        return self.node_coords.shape[0]

    @property
    def num_corners(self) -> int:
        return self.corner_count

    @property
    def num_elements(self) -> int:
        return self.triangles.shape[0]

    @property
    def num_edges(self) -> int:
        # one midside node per undirected edge
        return self.num_nodes - self.corner_count

    def euler_characteristic(self) -> int:
        return self.num_corners - self.num_edges + self.num_elements

    def coordinate_field(self) -> "NodeField":
        """Geometry as a vector field (the identity map's coefficients)."""
        return NodeField(mesh=self, space="P2_vector3", data=self.node_coords.copy())


@dataclass
class NodeField:
    """Coefficient vector of a finite element function on a mesh.

    ``data`` is (K,) for ``P2_scalar``, (K, 3) for ``P2_vector3`` and
    (V,) for ``P1_scalar`` where V is the corner count.  The vector
    flattening convention everywhere in the package is node-major:
    degree of freedom ``3 k + i`` holds component ``i`` at node ``k``.
    """

    mesh: SurfaceMesh
    space: str
    data: np.ndarray

    def __post_init__(self):
        if self.space not in SPACES:
            raise ValueError(f"unknown space {self.space!r}; expected one of {SPACES}")
        self.data = np.ascontiguousarray(self.data, dtype=float)
        expected = self._expected_shape()
        if self.data.shape != expected:
            raise ValueError(
                f"{self.space} field on this mesh needs shape {expected}, "
                f"got {self.data.shape}"
            )

    def _expected_shape(self):
        if self.space == "P2_scalar":
            return (self.mesh.num_nodes,)
        if self.space == "P2_vector3":
            return (self.mesh.num_nodes, 3)
        return (self.mesh.num_corners,)

    @property
    def flat(self) -> np.ndarray:
        """1-D view in the node-major ordering."""
        return self.data.reshape(-1)

    def copy(self) -> "NodeField":
        return NodeField(mesh=self.mesh, space=self.space, data=self.data.copy())

    @classmethod
    def zeros(cls, mesh: SurfaceMesh, space: str) -> "NodeField":
        shape = {
            "P2_scalar": (mesh.num_nodes,),
            "P2_vector3": (mesh.num_nodes, 3),
            "P1_scalar": (mesh.num_corners,),
        }[space]
        return cls(mesh=mesh, space=space, data=np.zeros(shape))

    @classmethod
    def from_flat(cls, mesh: SurfaceMesh, space: str, flat: np.ndarray) -> "NodeField":
        flat = np.asarray(flat, dtype=float)
        if space == "P2_vector3":
            data = flat.reshape(mesh.num_nodes, 3)
        else:
            data = flat
        return cls(mesh=mesh, space=space, data=data.copy())


@dataclass(frozen=True)
class PushforwardMap:
    """Identification of fields on two meshes with identical connectivity.

    The discrete evolution moves nodes but never changes connectivity, so a
    field is carried to the deformed surface by reusing its coefficients.
    """

    source: SurfaceMesh
    target: SurfaceMesh

    def __post_init__(self):
        if self.source.num_nodes != self.target.num_nodes:
            raise MeshStructureError("pushforward requires equal node counts")
        if self.source.corner_count != self.target.corner_count:
            raise MeshStructureError("pushforward requires equal corner counts")
        if not np.array_equal(self.source.triangles, self.target.triangles):
            raise MeshStructureError("pushforward requires identical connectivity")


def pushforward(pmap: PushforwardMap, fld: NodeField) -> NodeField:
    """Carry ``fld`` to the map's target mesh, keeping its coefficients."""
    if fld.mesh is not pmap.source and not np.array_equal(
        fld.mesh.triangles, pmap.source.triangles
    ):
        raise MeshStructureError("field does not live on the pushforward source")
    return NodeField(mesh=pmap.target, space=fld.space, data=fld.data.copy())


# ---------------------------------------------------------------------------
# mesh generation
# ---------------------------------------------------------------------------

_OCTA_VERTICES = np.array(
    [
        [1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, -1.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0],
    ]
)

# Outward-oriented faces (verified: each face normal points away from the
# origin).
_OCTA_FACES = np.array(
    [
        [0, 2, 4],
        [2, 1, 4],
        [1, 3, 4],
        [3, 0, 4],
        [2, 0, 5],
        [1, 2, 5],
        [3, 1, 5],
        [0, 3, 5],
    ],
    dtype=np.int64,
)


def _subdivide(verts: np.ndarray, tris: np.ndarray):
    """One uniform quadrisection of a corner triangulation.

    New midpoint vertices are appended, so the parent's vertices are a
    prefix of the child's (refinement nesting on the flat complex).
    """
    verts = [v for v in verts]
    edge_mid: dict[tuple[int, int], int] = {}

    def midpoint(a: int, b: int) -> int:
        key = (a, b) if a < b else (b, a)
        m = edge_mid.get(key)
        if m is None:
            m = len(verts)
            verts.append(0.5 * (verts[a] + verts[b]))
            edge_mid[key] = m
        return m

    new_tris = []
    for a, b, c in tris:
        mab = midpoint(a, b)
        mbc = midpoint(b, c)
        mca = midpoint(c, a)
        new_tris.append((a, mab, mca))
        new_tris.append((mab, b, mbc))
        new_tris.append((mca, mbc, c))
        new_tris.append((mab, mbc, mca))
    return np.array(verts), np.array(new_tris, dtype=np.int64)


def flat_sphere_complex(level: int):
    """Octahedron quadrisected ``level`` times, *before* projection.

    Exposed for the refinement-nesting property; the sphere and capsule
    builders start from this complex.
    """
    if level < 0:
        raise ValueError(f"refinement level must be >= 0, got {level}")
    verts, tris = _OCTA_VERTICES.copy(), _OCTA_FACES.copy()
    for _ in range(level):
        verts, tris = _subdivide(verts, tris)
    return verts, tris


def _attach_midnodes(corners: np.ndarray, tris: np.ndarray, project):
    """Create one projected midside node per undirected edge.

    Returns the full coordinate array (corners first) and the (J, 6)
    connectivity.
    """
    n_corner = len(corners)
    edge_mid: dict[tuple[int, int], int] = {}
    coords = [c for c in corners]

    def midnode(a: int, b: int) -> int:
        key = (a, b) if a < b else (b, a)
        m = edge_mid.get(key)
        if m is None:
            m = len(coords)
            coords.append(project(0.5 * (corners[a] + corners[b])))
            edge_mid[key] = m
        return m

    elems = np.empty((len(tris), 6), dtype=np.int64)
    for j, (a, b, c) in enumerate(tris):
        elems[j, :3] = (a, b, c)
        elems[j, 3] = midnode(b, c)  # opposite local corner 0
        elems[j, 4] = midnode(c, a)  # opposite local corner 1
        elems[j, 5] = midnode(a, b)  # opposite local corner 2
    return np.array(coords), elems, n_corner


def build_sphere(level: int, radius: float = 1.0) -> SurfaceMesh:
    """Curved mesh of the sphere of given ``radius`` centred at the origin.

    The base mesh is the regular octahedron (8 elements); each refinement
    level quadrisects uniformly on the flat complex before all nodes are
    projected radially onto the exact sphere.
    """
    if radius <= 0.0:
        raise ValueError(f"radius must be positive, got {radius}")
    verts, tris = flat_sphere_complex(level)

    def project(z):
        return radius * z / np.linalg.norm(z)

    corners = np.array([project(v) for v in verts])
    coords, elems, n_corner = _attach_midnodes(corners, tris, project)
    msh = SurfaceMesh(
        node_coords=coords,
        triangles=elems,
        corner_count=n_corner,
        level=level,
        kind="sphere",
    )
    validate_mesh(msh)
    return msh


def _capsule_project(half_length: float, radius: float):
    """Closest-point projection onto the capsule around the x-axis segment."""

    def project(z):
        ax = min(max(z[0], -half_length), half_length)
        axis_point = np.array([ax, 0.0, 0.0])
        d = z - axis_point
        n = np.linalg.norm(d)
        if n == 0.0:
            # on the axis: push out in a fixed transverse direction
            d = np.array([0.0, 0.0, 1.0])
            n = 1.0
        return axis_point + radius * d / n

    return project


def build_capsule(level: int, half_length: float, radius: float) -> SurfaceMesh:
    """Capsule (cylinder of half-length ``half_length`` with spherical caps).

    Generated from the sphere complex: corner nodes are stretched along the
    x-axis by ``1 + half_length/radius`` and every node is projected onto
    the exact capsule surface.  With ``half_length = 0`` this reproduces
    ``build_sphere(level, radius)`` exactly.
    """
    if radius <= 0.0:
        raise ValueError(f"radius must be positive, got {radius}")
    if half_length < 0.0:
        raise ValueError(f"half_length must be >= 0, got {half_length}")
    verts, tris = flat_sphere_complex(level)
    project = _capsule_project(half_length, radius)
    stretch = np.array([1.0 + half_length / radius, 1.0, 1.0])
    corners = np.array([project(radius * (v / np.linalg.norm(v)) * stretch) for v in verts])
    coords, elems, n_corner = _attach_midnodes(corners, tris, project)
    msh = SurfaceMesh(
        node_coords=coords,
        triangles=elems,
        corner_count=n_corner,
        level=level,
        kind="capsule",
    )
    validate_mesh(msh)
    return msh


def _torus_project(ring_radius: float, tube_radius: float):
    def project(z):
        rho = np.hypot(z[0], z[1])
        if rho == 0.0:
            raise DegenerateElementError("point on the torus axis cannot be projected")
        centre = np.array([z[0], z[1], 0.0]) * (ring_radius / rho)
        d = z - centre
        n = np.linalg.norm(d)
        if n == 0.0:
            d = np.array([0.0, 0.0, 1.0])
            n = 1.0
        return centre + tube_radius * d / n

    return project


def build_torus(level: int, ring_radius: float = 2.0, tube_radius: float = 1.0) -> SurfaceMesh:
    """Curved mesh of the torus with the standard angular parametrization.

    The corner grid has ``n_phi x n_theta`` points with the ratio chosen
    near ``ring_radius : tube_radius`` so that elements are roughly
    isotropic; each level doubles both counts (uniform quadrisection in
    parameter space).  All nodes lie exactly on the torus.
    """
    if level < 0:
        raise ValueError(f"refinement level must be >= 0, got {level}")
    if not (0.0 < tube_radius < ring_radius):
        raise ValueError(
            f"need 0 < tube_radius < ring_radius, got {tube_radius}, {ring_radius}"
        )
    n_theta = 4 * 2**level
    n_phi = 4 * max(1, round(ring_radius / tube_radius)) * 2**level

    def embed(phi, theta):
        ring = ring_radius + tube_radius * np.cos(theta)
        return np.array(
            [ring * np.cos(phi), ring * np.sin(phi), tube_radius * np.sin(theta)]
        )

    corners = np.empty((n_phi * n_theta, 3))
    for i in range(n_phi):
        for j in range(n_theta):
            corners[i * n_theta + j] = embed(
                2.0 * np.pi * i / n_phi, 2.0 * np.pi * j / n_theta
            )

    tris = []
    for i in range(n_phi):
        for j in range(n_theta):
            a = i * n_theta + j
            b = ((i + 1) % n_phi) * n_theta + j
            c = ((i + 1) % n_phi) * n_theta + (j + 1) % n_theta
            d = i * n_theta + (j + 1) % n_theta
            tris.append((a, b, c))
            tris.append((a, c, d))
    tris = np.array(tris, dtype=np.int64)

    coords, elems, n_corner = _attach_midnodes(
        corners, tris, _torus_project(ring_radius, tube_radius)
    )
    msh = SurfaceMesh(
        node_coords=coords,
        triangles=elems,
        corner_count=n_corner,
        level=level,
        kind="torus",
    )
    validate_mesh(msh)
    return msh


# ---------------------------------------------------------------------------
# queries and updates
# ---------------------------------------------------------------------------


def mesh_size(msh: SurfaceMesh) -> float:
    """Longest corner-to-corner edge chord over all elements."""
    corners = msh.node_coords[msh.triangles[:, :3]]  # (J, 3, 3)
    h = 0.0
    for a, b in ((0, 1), (1, 2), (2, 0)):
        h = max(h, float(np.max(np.linalg.norm(corners[:, a] - corners[:, b], axis=1))))
    return h


_AREA_CHECK_POINTS = None


def _area_scales(coords: np.ndarray, tris: np.ndarray) -> np.ndarray:
    """sqrt(det metric) sampled at a few interior points of every element."""
    global _AREA_CHECK_POINTS
    if _AREA_CHECK_POINTS is None:
        rule = quadrature_rule(4)
        _AREA_CHECK_POINTS = p2_gradients(rule.points)
    dn = _AREA_CHECK_POINTS  # (Q, 6, 2)
    elem = coords[tris]  # (J, 6, 3)
    jac = np.einsum("jkc,qkr->jqcr", elem, dn)  # (J, Q, 3, 2)
    g = np.einsum("jqcr,jqcs->jqrs", jac, jac)
    det = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] * g[..., 1, 0]
    return det


def update_geometry(msh: SurfaceMesh, new_coords: NodeField) -> SurfaceMesh:
    """New mesh with moved nodes and unchanged connectivity.

    Raises ``DegenerateElementError`` if any element of the moved surface
    has a vanishing or inverted metric.
    """
    if new_coords.space != "P2_vector3":
        raise ValueError("geometry update needs a P2_vector3 field")
    if new_coords.data.shape != msh.node_coords.shape:
        raise MeshStructureError("coordinate field does not match the mesh")
    det = _area_scales(new_coords.data, msh.triangles)
    if not np.all(np.isfinite(det)) or np.min(det) <= 1e-24:
        raise DegenerateElementError(
            f"geometry update produces a degenerate element (min det g = {np.min(det):.3e})"
        )
    return replace(msh, node_coords=new_coords.data.copy())


def interpolate(msh: SurfaceMesh, f, space: str) -> NodeField:
    """Nodal interpolation of a position function onto a field.

    ``f`` maps a point (3,) to a scalar or length-3 value; a vectorized
    callable accepting an (n, 3) array is used as such.
    """
    if space not in SPACES:
        raise ValueError(f"unknown space {space!r}; expected one of {SPACES}")
    pts = msh.node_coords if space.startswith("P2") else msh.node_coords[: msh.corner_count]
    want = (len(pts),) if space.endswith("scalar") else (len(pts), 3)
    try:
        vals = np.asarray(f(pts), dtype=float)
        if vals.shape != want:
            raise ValueError
    except (ValueError, TypeError, IndexError):
        vals = np.array([f(p) for p in pts], dtype=float).reshape(want)
    return NodeField(mesh=msh, space=space, data=vals)


def validate_mesh(msh: SurfaceMesh) -> None:
    """Check structural invariants; raises ``MeshStructureError``.

    Verified: index ranges and the corners-first node layout, consistent
    shared midside nodes, a coherent orientation (every undirected corner
    edge traversed once in each direction), the edge/midside count
    relation, and non-degenerate elements.
    """
    coords, tris, nc = msh.node_coords, msh.triangles, msh.corner_count
    if coords.ndim != 2 or coords.shape[1] != 3:
        raise MeshStructureError("node_coords must have shape (K, 3)")
    if tris.ndim != 2 or tris.shape[1] != 6:
        raise MeshStructureError("triangles must have shape (J, 6)")
    if not np.all(np.isfinite(coords)):
        raise MeshStructureError("node coordinates must be finite")
    if tris.min() < 0 or tris.max() >= len(coords):
        raise MeshStructureError("triangle node index out of range")
    if tris[:, :3].max() >= nc or tris[:, 3:].min() < nc:
        raise MeshStructureError("corner/midside node layout violated")

    used = np.zeros(len(coords), dtype=bool)
    used[tris.reshape(-1)] = True
    if not used.all():
        raise MeshStructureError("mesh contains unreferenced nodes")

    # orientation and shared-midnode consistency
    edge_info: dict[tuple[int, int], int] = {}
    directed: dict[tuple[int, int], int] = {}
    for row in tris:
        a, b, c = row[:3]
        for (u, v), m in (((b, c), row[3]), ((c, a), row[4]), ((a, b), row[5])):
            key = (u, v) if u < v else (v, u)
            if key in edge_info:
                if edge_info[key] != m:
                    raise MeshStructureError(
                        f"edge {key} is assigned two different midside nodes"
                    )
            else:
                edge_info[key] = m
            directed[(u, v)] = directed.get((u, v), 0) + 1
    for (u, v), count in directed.items():
        if count != 1 or directed.get((v, u), 0) != 1:
            raise MeshStructureError(
                "mesh is not a coherently oriented closed surface "
                f"(edge ({u}, {v}) traversed {count} times)"
            )
    if len(edge_info) != msh.num_edges:
        raise MeshStructureError(
            f"edge count {len(edge_info)} does not match midside count {msh.num_edges}"
        )

    det = _area_scales(coords, tris)
    if not np.all(np.isfinite(det)) or det.min() <= 1e-24:
        raise DegenerateElementError(
            f"mesh has a degenerate element (min det g = {det.min():.3e})"
        )
