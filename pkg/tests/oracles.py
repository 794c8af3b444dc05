"""Independent reference implementations used only by the tests.

These deliberately avoid the facet lists and face lattice of ``Polytope``:
they see nothing but the vertex coordinates.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import Delaunay


def supporting_hyperplane_exists(vertices, xi, eta) -> bool:
    """Is there a hyperplane through xi and eta missing the open hull of ``vertices``?

    LP in the normal ``n``: ``n.(v - xi) <= 0`` for all vertices,
    ``n.(eta - xi) = 0`` and ``n.(c - xi) = -1`` for the vertex centroid ``c``.
    """
    v = np.asarray(vertices, dtype=float)
    xi, eta = np.asarray(xi, dtype=float), np.asarray(eta, dtype=float)
    c = v.mean(axis=0)
    res = linprog(np.zeros(v.shape[1]), A_ub=v - xi, b_ub=np.full(len(v), 1e-10),
                  A_eq=np.vstack([eta - xi, c - xi]), b_eq=[0.0, -1.0],
                  bounds=[(None, None)] * v.shape[1], method="highs")
    return res.status == 0


def star_relation_matrix(vertices, points) -> np.ndarray:
    n = len(points)
    rel = np.zeros((n, n), dtype=bool)
    for i in range(n):
        for j in range(n):
            rel[i, j] = supporting_hyperplane_exists(vertices, points[i], points[j])
    return rel


def chain_distances(rel: np.ndarray) -> np.ndarray:
    """Exhaustive chain search: 0 for equal stars, else fewest steps along ``rel`` (either direction)."""
    n = len(rel)
    sym = rel | rel.T
    same = np.array([[np.array_equal(rel[i], rel[j]) for j in range(n)] for i in range(n)])
    dist = np.full((n, n), math.inf)
    dist[same] = 0
    reach = same.copy()
    k = 0
    frontier = same.copy()
    while True:
        k += 1
        step = (frontier.astype(int) @ sym.astype(int)) > 0
        step = (step.astype(int) @ same.astype(int)) > 0
        new = step & ~reach
        if not new.any():
            break
        dist[new] = k
        reach |= new
        frontier = reach
    return dist


def hilbert_distance_bisection(vertices, x, y, iters: int = 200) -> float:
    """Cross-ratio with chord endpoints found by bisection on hull membership."""
    tri = Delaunay(np.asarray(vertices, dtype=float))
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    v = y - x

    def exit_param(direction):
        lo, hi = 0.0, 1.0
        while tri.find_simplex(x + hi * direction) >= 0:
            hi *= 2
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            if tri.find_simplex(x + mid * direction) >= 0:
                lo = mid
            else:
                hi = mid
        return lo

    tf = exit_param(v)
    tb = exit_param(-v)
    L = np.linalg.norm(v)
    a_x, a_y = tb * L, (tb + 1) * L
    b_x, b_y = tf * L, (tf - 1) * L
    return math.log((a_y * b_x) / (a_x * b_y))


def special_indices_reference(group, elements, C: int, K: int) -> list[int]:
    """Brute-force trajectory special indices straight from group multiplication."""
    lengths = [group.word_length(u) for u in elements]
    out = []
    for n, un in enumerate(elements):
        if all(group.word_length(group.multiply(group.invert(elements[k]), un)) < lengths[n] + C
               for k in range(K + 1, n)):
            out.append(n)
    return out


def free_reduce(word) -> tuple:
    """Free reduction of a list of nonzero integer letters, by a stack."""
    out: list[int] = []
    for a in word:
        if out and out[-1] == -a:
            out.pop()
        else:
            out.append(a)
    return tuple(out)
