"""Hilbert geometry on open convex polytopes.

A :class:`Polytope` keeps both representations (facet inequalities with unit
normals, and vertices) together with its face lattice, stored as vertex-index
sets closed under intersection.  For polytopes every face is exposed and the
star of a boundary point depends only on its minimal face, so the star
relation reduces to "the two minimal faces lie in a common facet".
"""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, HalfspaceIntersection

from .core import DomainError, HalfspaceSpec, PreconditionError, halfspace_contains

ACTIVE_TOL = 1e-9  # |a.x - b| below this: constraint active
AMBIGUOUS_TOL = 1e-7  # slack in (ACTIVE_TOL, AMBIGUOUS_TOL]: too close to call
INTERIOR_MARGIN = 1e-12
PARALLEL_TOL = 1e-14


@dataclass(frozen=True)
class Face:
    vertices: frozenset
    facets: frozenset
    dim: int


@dataclass(frozen=True)
class HilbertBoundaryPoint:
    coords: np.ndarray
    face: int  # index into Polytope.faces


class Polytope:
    """Bounded full-dimensional convex polytope; the open interior carries the Hilbert metric."""

    def __init__(self, vertices: np.ndarray | None = None, halfspaces: Sequence | None = None,
                 name: str = ""):
        if (vertices is None) == (halfspaces is None):
            raise ValueError("give exactly one of vertices or halfspaces")
        if halfspaces is not None:
            vertices = _vertex_enumeration(halfspaces)
        pts = np.asarray(vertices, dtype=float)
        if pts.ndim != 2 or pts.shape[1] < 2 or pts.shape[0] < pts.shape[1] + 1:
            raise ValueError("need at least dim+1 vertices in dimension >= 2")
        if pts.shape[1] > 4 or pts.shape[0] > 64:
            raise ValueError("desk-scale polytopes only: dimension <= 4, at most 64 vertices")
        if np.linalg.matrix_rank(pts[1:] - pts[0]) < pts.shape[1]:
            raise ValueError("polytope is not full-dimensional")
        hull = ConvexHull(pts)
        self.name = name
        self.vertices = pts[np.sort(hull.vertices)]
        self.dim = pts.shape[1]
        self.A, self.b = _merge_facets(hull.equations)
        self.interior_point = self.vertices.mean(axis=0)
        self._check_representations()
        self.facet_vertices = [
            frozenset(np.flatnonzero(np.abs(self.vertices @ a - bb) <= 1e-9 * max(1.0, abs(bb))).tolist())
            for a, bb in zip(self.A, self.b)
        ]
        self.faces = self._face_lattice()
        self._face_index = {f.vertices: i for i, f in enumerate(self.faces)}

    # -- construction helpers ---------------------------------------------

    @classmethod
    def from_json(cls, data) -> "Polytope":
        if isinstance(data, (str, Path)):
            data = json.loads(Path(data).read_text())
        unknown = set(data) - {"vertices", "halfspaces", "name"}
        if unknown:
            raise ValueError(f"unknown polytope keys: {sorted(unknown)}")
        if "vertices" in data:
            return cls(vertices=data["vertices"], name=data.get("name", ""))
        hs = [(h["a"], h["b"]) for h in data["halfspaces"]]
        return cls(halfspaces=hs, name=data.get("name", ""))

    def _check_representations(self) -> None:
        slack = self.b[None, :] - self.vertices @ self.A.T
        if np.min(slack) < -1e-9:
            raise ValueError("a vertex violates a facet inequality")
        if np.min(self.b - self.A @ self.interior_point) <= 0:
            raise ValueError("empty interior")

    def _face_lattice(self) -> list[Face]:
        sets = set(self.facet_vertices)
        frontier = set(sets)
        while frontier:
            new = set()
            for f in frontier:
                for g in self.facet_vertices:
                    h = f & g
                    if h and h not in sets:
                        new.add(h)
            sets |= new
            frontier = new
        faces = []
        for vs in sets:
            pts = self.vertices[sorted(vs)]
            dim = int(np.linalg.matrix_rank(pts[1:] - pts[0], tol=1e-9)) if len(vs) > 1 else 0
            facets = frozenset(i for i, fv in enumerate(self.facet_vertices) if vs <= fv)
            faces.append(Face(frozenset(vs), facets, dim))
        faces.sort(key=lambda f: (f.dim, sorted(f.vertices)))
        return faces

    # -- metric model ------------------------------------------------------

    def basepoint(self) -> np.ndarray:
        return self.interior_point

    def slacks(self, x) -> np.ndarray:
        return self.b - self.A @ np.asarray(x, dtype=float)

    def validate(self, x) -> None:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise DomainError(f"expected a point of R^{self.dim}")
        if not np.min(self.slacks(x)) > INTERIOR_MARGIN:
            raise DomainError("point is not strictly inside the polytope")

    def distance(self, x, y) -> float:
        return hilbert_distance(self, x, y)

    # -- faces -------------------------------------------------------------

    def face_representative(self, i: int) -> np.ndarray:
        """Relative-interior point (vertex average) of face ``i``."""
        return self.vertices[sorted(self.faces[i].vertices)].mean(axis=0)

    def representatives(self) -> list[HilbertBoundaryPoint]:
        return [HilbertBoundaryPoint(self.face_representative(i), i) for i in range(len(self.faces))]

    def boundary_point(self, coords) -> HilbertBoundaryPoint:
        x = np.asarray(coords, dtype=float)
        return HilbertBoundaryPoint(x, minimal_face(self, x))

    def face_adjacency(self) -> list[list[int]]:
        """Faces ``i ~ j`` when some facet contains both (the symmetric star relation)."""
        n = len(self.faces)
        return [[j for j in range(n) if j != i and self.faces[i].facets & self.faces[j].facets]
                for i in range(n)]

    def __repr__(self):
        return f"Polytope({self.name or 'unnamed'}, dim={self.dim}, vertices={len(self.vertices)}, facets={len(self.b)})"


def _merge_facets(equations: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unit-normal (A, b) from qhull equations ``n.x + c <= 0``, merging coplanar triangles."""
    A = equations[:, :-1]
    b = -equations[:, -1]
    norms = np.linalg.norm(A, axis=1)
    A, b = A / norms[:, None], b / norms
    keep_a, keep_b = [], []
    for a, bb in zip(A, b):
        if not any(np.allclose(a, ka, atol=1e-9) and abs(bb - kb) <= 1e-9 * max(1.0, abs(bb))
                   for ka, kb in zip(keep_a, keep_b)):
            keep_a.append(a)
            keep_b.append(bb)
    return np.array(keep_a), np.array(keep_b)


def _vertex_enumeration(halfspaces: Sequence) -> np.ndarray:
    A = np.array([np.asarray(a, dtype=float) for a, _ in halfspaces])
    b = np.array([float(bb) for _, bb in halfspaces])
    norms = np.linalg.norm(A, axis=1)
    if np.any(norms == 0):
        raise ValueError("zero normal vector")
    # Chebyshev centre: max r subject to a.x + r|a| <= b
    n = A.shape[1]
    res = linprog(np.r_[np.zeros(n), -1.0], A_ub=np.c_[A, norms], b_ub=b,
                  bounds=[(None, None)] * n + [(0, None)], method="highs")
    if res.status != 0:
        raise ValueError("halfspaces do not describe a bounded polytope")
    if res.x[-1] <= 1e-9:
        raise ValueError("polytope has empty interior")
    hs = HalfspaceIntersection(np.c_[A, -b], res.x[:n])
    pts = []
    for p in hs.intersections:
        if not any(np.linalg.norm(p - q) <= 1e-9 for q in pts):
            pts.append(p)
    return np.array(pts)


# ---------------------------------------------------------------------------
# metric


def chord_parameters(P: Polytope, x, y) -> tuple[float, float]:
    """``(t_back, t_fwd)``: the chord through x, y is ``x + t (y - x)`` for ``-t_back <= t <= t_fwd``."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    v = y - x
    av = P.A @ v
    sl = P.slacks(x)
    fwd = av > PARALLEL_TOL
    back = av < -PARALLEL_TOL
    return float(np.min(sl[back] / -av[back])), float(np.min(sl[fwd] / av[fwd]))


def hilbert_distance(P: Polytope, x, y) -> float:
    """Log cross-ratio of ``x, y`` and the chord endpoints; exactly symmetric."""
    P.validate(x)
    P.validate(y)
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if np.array_equal(x, y):
        return 0.0
    if tuple(y) < tuple(x):
        x, y = y, x
    t_back, t_fwd = chord_parameters(P, x, y)
    # |a-y||b-x| / (|a-x||b-y|) with |a-x| = t_back L, |b-y| = (t_fwd - 1) L
    return math.log1p(1.0 / t_back) + math.log1p(1.0 / (t_fwd - 1.0))


# ---------------------------------------------------------------------------
# boundary combinatorics


def minimal_face(P: Polytope, xi) -> int:
    """Index of the face whose active constraints are exactly those active at ``xi``."""
    xi = np.asarray(xi, dtype=float)
    sl = P.slacks(xi)
    if np.min(sl) < -ACTIVE_TOL:
        raise DomainError("point lies outside the polytope")
    active = np.abs(sl) <= ACTIVE_TOL
    if not active.any():
        raise DomainError("point lies in the interior")
    if np.any((sl > ACTIVE_TOL) & (sl <= AMBIGUOUS_TOL)):
        raise DomainError("point is within the tolerance band of a lower-dimensional face")
    vs = frozenset.intersection(*(P.facet_vertices[i] for i in np.flatnonzero(active)))
    idx = P._face_index.get(vs)
    if idx is None or P.faces[idx].facets != frozenset(np.flatnonzero(active).tolist()):
        raise DomainError("active constraints do not cut out a face")
    return idx


def _face_of(P: Polytope, xi) -> int:
    if isinstance(xi, HilbertBoundaryPoint):
        return xi.face
    return minimal_face(P, xi)


def star_of(P: Polytope, xi) -> list[int]:
    """Closed faces making up Star(xi): all faces containing the minimal face of ``xi``."""
    f = P.faces[_face_of(P, xi)]
    return [i for i, g in enumerate(P.faces) if f.vertices <= g.vertices]


def star_contains(P: Polytope, xi, eta) -> bool:
    """``eta in Star(xi)``: the minimal faces share a facet (symmetric for polytopes)."""
    return bool(P.faces[_face_of(P, xi)].facets & P.faces[_face_of(P, eta)].facets)


def _bfs(adj: list[list[int]], src: int) -> list[float]:
    dist = [math.inf] * len(adj)
    dist[src] = 0
    q = deque([src])
    while q:
        u = q.popleft()
        for v in adj[u]:
            if dist[v] == math.inf:
                dist[v] = dist[u] + 1
                q.append(v)
    return dist


def star_distance(P: Polytope, xi, eta) -> float:
    """Minimal chain length through mutual star membership (0 for equal stars, inf if none)."""
    return _bfs(P.face_adjacency(), _face_of(P, xi))[_face_of(P, eta)]


def star_distance_matrix(P: Polytope) -> np.ndarray:
    adj = P.face_adjacency()
    return np.array([_bfs(adj, i) for i in range(len(P.faces))])


def simplicial_diameter(P: Polytope) -> float:
    """Largest star distance between face representatives (every vertex is a face)."""
    return float(np.max(star_distance_matrix(P)))


# ---------------------------------------------------------------------------
# sampled stars


def sampled_star_membership(P: Polytope, xi, eta, C: float = 0.0, eps: float = 1e-4,
                            delta: float = 1e-6) -> bool:
    """Is ``eta`` in the closure of ``H(V, C)`` for a small neighbourhood ``V`` of ``xi``?

    Both the witnesses sampling ``V`` and the points approaching ``eta`` are
    ``p + eps (q - p)`` for ``p`` the boundary point and ``q`` in a fixed
    family of interior points: the basepoint, midpoints toward the vertices,
    and points at depth ``delta`` below each facet centroid.  The last kind
    puts witness and approach point deep against a common facet, where the
    Hilbert distance between them stays moderate while both run off to
    infinity; membership of any approach point counts.
    """
    x0 = P.basepoint()
    xi = np.asarray(xi.coords if isinstance(xi, HilbertBoundaryPoint) else xi, dtype=float)
    eta = np.asarray(eta.coords if isinstance(eta, HilbertBoundaryPoint) else eta, dtype=float)
    qs = [x0] + [0.5 * (x0 + v) for v in P.vertices]
    for fv in P.facet_vertices:
        c = P.vertices[sorted(fv)].mean(axis=0)
        qs.append(c + delta * (x0 - c))
    spec = HalfspaceSpec(tuple(xi + eps * (q - xi) for q in qs), C, x0)
    return any(halfspace_contains(P, spec, eta + eps * (q - eta)) for q in qs)


# ---------------------------------------------------------------------------
# projective maps


@dataclass(frozen=True, eq=False)
class ProjectiveMap:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("projective map needs a square matrix")
        if abs(np.linalg.det(m)) < 1e-12:
            raise ValueError("projective map must be invertible")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0] - 1

    def homogeneous_weight(self, x) -> float:
        return float(self.matrix[-1, :-1] @ np.asarray(x, dtype=float) + self.matrix[-1, -1])

    def __call__(self, x) -> np.ndarray:
        h = self.matrix @ np.r_[np.asarray(x, dtype=float), 1.0]
        return h[:-1] / h[-1]

    def __matmul__(self, other: "ProjectiveMap") -> "ProjectiveMap":
        return ProjectiveMap(self.matrix @ other.matrix)

    def inverse(self) -> "ProjectiveMap":
        return ProjectiveMap(np.linalg.inv(self.matrix))

    @classmethod
    def fixing_simplex(cls, vertices, weights) -> "ProjectiveMap":
        """Diagonal map in the barycentric frame of a simplex (fixes every vertex)."""
        v = np.c_[np.asarray(vertices, dtype=float), np.ones(len(vertices))].T
        return cls(v @ np.diag(np.asarray(weights, dtype=float)) @ np.linalg.inv(v))


def image_polytope(P: Polytope, g: ProjectiveMap) -> Polytope:
    """``g(P)``, provided ``g`` keeps ``P`` away from the hyperplane sent to infinity."""
    w = np.array([g.homogeneous_weight(v) for v in P.vertices])
    if not (np.all(w > 0) or np.all(w < 0)):
        raise PreconditionError("projective map sends part of the polytope to infinity")
    return Polytope(vertices=np.array([g(v) for v in P.vertices]))


def is_automorphism(P: Polytope, g: ProjectiveMap, tol: float = 1e-9) -> bool:
    if g.dim != P.dim:
        return False
    w = np.array([g.homogeneous_weight(v) for v in P.vertices])
    if not (np.all(w > 0) or np.all(w < 0)):
        return False
    images = np.array([g(v) for v in P.vertices])
    used = set()
    for p in images:
        hits = [j for j, v in enumerate(P.vertices) if np.max(np.abs(p - v)) <= tol and j not in used]
        if not hits:
            return False
        used.add(hits[0])
    return True


def automorphism_orbit_unbounded(P: Polytope, g: ProjectiveMap, x0=None, n: int = 100,
                                 threshold: float = 10.0) -> bool:
    """Whether ``max_{k <= n} d(x0, g^k x0) > threshold``; stops at the first exceedance."""
    if not is_automorphism(P, g):
        raise PreconditionError("map is not an automorphism of the polytope")
    x0 = P.basepoint() if x0 is None else np.asarray(x0, dtype=float)
    x = x0
    for _ in range(n):
        x = g(x)
        if hilbert_distance(P, x0, x) > threshold:
            return True
    return False


# ---------------------------------------------------------------------------
# a small corpus


def corpus() -> dict[str, Polytope]:
    s3 = math.sqrt(3.0)
    hexagon = [(math.cos(k * math.pi / 3), math.sin(k * math.pi / 3)) for k in range(6)]
    pentagon = [(math.cos(2 * k * math.pi / 5), math.sin(2 * k * math.pi / 5)) for k in range(5)]
    cube = [(x, y, z) for x in (-1, 1) for y in (-1, 1) for z in (-1, 1)]
    tri = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]
    data = {
        "triangle": tri,
        "square": [(-1, -1), (1, -1), (1, 1), (-1, 1)],
        "pentagon": pentagon,
        "hexagon": hexagon,
        "kite": [(0, -1), (1, 0), (0, 2), (-1, 0)],
        "tetrahedron": [(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1)],
        "cube": cube,
        "square_pyramid": [(-1, -1, 0), (1, -1, 0), (1, 1, 0), (-1, 1, 0), (0, 0, 1)],
        "triangular_prism": [(x, y, z) for z in (0, 1) for (x, y) in ((0, 0), (1, 0), (0.5, s3 / 2))],
        "simplex4": [(0, 0, 0, 0), (1, 0, 0, 0), (0, 1, 0, 0), (0, 0, 1, 0), (0, 0, 0, 1)],
    }
    return {k: Polytope(vertices=v, name=k) for k, v in data.items()}


def known_automorphisms(name: str, lam: float = 2.0) -> ProjectiveMap | None:
    """An automorphism with unbounded orbits, where one exists in the corpus."""
    if name == "triangle":
        return ProjectiveMap.fixing_simplex([(0, 0), (1, 0), (0, 1)], [1.0, lam, 1.0 / lam])
    if name == "tetrahedron":
        return ProjectiveMap.fixing_simplex([(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1)],
                                            [1.0, lam, 1.0 / lam, 1.0])
    if name == "simplex4":
        verts = [(0, 0, 0, 0), (1, 0, 0, 0), (0, 1, 0, 0), (0, 0, 1, 0), (0, 0, 0, 1)]
        return ProjectiveMap.fixing_simplex(verts, [lam, 1.0, 1.0, 1.0, 1.0 / lam])
    if name == "square_pyramid":
        # homology with centre the apex and axis the base plane
        return ProjectiveMap(np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, lam, 0], [0, 0, lam - 1, 1]], dtype=float))
    return None
