"""Finitely generated groups with word metrics, ping-pong and random walks.

Elements are hashable normal forms: reduced letter tuples for free groups,
integer tuples for free abelian groups and flattened integer matrices for
matrix groups.  The distance is the left-invariant word metric
``d(x, y) = ||x^{-1} y||``.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Hashable, Protocol, Sequence

import numpy as np

from .core import PreconditionError


class GroupModel(Protocol):
    identity: Hashable
    generators: list

    def multiply(self, g, h): ...

    def invert(self, g): ...

    def word_length(self, g, R_max: int | None = None) -> int | None: ...


class FreeGroup:
    """Free group on ``rank`` letters; letter ``i+1`` is the i-th generator, ``-(i+1)`` its inverse."""

    def __init__(self, rank: int):
        if rank < 1:
            raise ValueError("rank must be >= 1")
        self.rank = rank
        self.identity: tuple = ()
        self.generators = [w for i in range(1, rank + 1) for w in ((i,), (-i,))]

    def __repr__(self):
        return f"FreeGroup({self.rank})"

    def element(self, letters: Sequence[int]) -> tuple:
        out: list[int] = []
        for a in letters:
            a = int(a)
            if a == 0 or abs(a) > self.rank:
                raise ValueError(f"letter {a} out of range for {self}")
            if out and out[-1] == -a:
                out.pop()
            else:
                out.append(a)
        return tuple(out)

    def multiply(self, g: tuple, h: tuple) -> tuple:
        i = 0
        n = min(len(g), len(h))
        while i < n and g[-1 - i] == -h[i]:
            i += 1
        return g[:len(g) - i] + h[i:]

    def invert(self, g: tuple) -> tuple:
        return tuple(-a for a in reversed(g))

    def word_length(self, g: tuple, R_max: int | None = None) -> int:
        return len(g)


class FreeAbelian:
    """``Z^n`` with the standard generators; word length is the L1 norm."""

    def __init__(self, dim: int):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = dim
        self.identity = (0,) * dim
        gens = []
        for i in range(dim):
            for s in (1, -1):
                e = [0] * dim
                e[i] = s
                gens.append(tuple(e))
        self.generators = gens

    def __repr__(self):
        return f"FreeAbelian({self.dim})"

    def element(self, coords: Sequence[int]) -> tuple:
        if len(coords) != self.dim:
            raise ValueError(f"expected {self.dim} coordinates")
        return tuple(int(c) for c in coords)

    def multiply(self, g, h):
        return tuple(a + b for a, b in zip(g, h))

    def invert(self, g):
        return tuple(-a for a in g)

    def word_length(self, g, R_max: int | None = None) -> int:
        return sum(abs(a) for a in g)


class MatrixGroup:
    """Group generated by integer matrices of determinant +-1; word length by breadth-first search.

    The ball cache grows on demand and is guarded by a lock, so concurrent
    queries see the same values as sequential ones.
    """

    def __init__(self, generators: Sequence, default_radius: int = 8):
        mats = [np.array(g, dtype=np.int64) for g in generators]
        if not mats:
            raise ValueError("need at least one generator")
        n = mats[0].shape[0]
        for m in mats:
            if m.shape != (n, n) or round(abs(np.linalg.det(m))) != 1:
                raise ValueError("generators must be square integer matrices of determinant +-1")
        self.n = n
        self.identity = tuple(np.eye(n, dtype=np.int64).ravel().tolist())
        gens = []
        for m in mats:
            for x in (m, _int_inverse(m)):
                t = tuple(x.ravel().tolist())
                if t not in gens:
                    gens.append(t)
        self.generators = gens
        self.default_radius = default_radius
        self._lengths = {self.identity: 0}
        self._frontier = [self.identity]
        self._radius = 0
        self._lock = threading.Lock()

    def __repr__(self):
        return f"MatrixGroup(n={self.n}, generators={len(self.generators) // 2})"

    def _mat(self, g) -> np.ndarray:
        return np.array(g, dtype=np.int64).reshape(self.n, self.n)

    def element(self, matrix) -> tuple:
        m = np.array(matrix, dtype=np.int64)
        if m.shape != (self.n, self.n):
            raise ValueError("wrong matrix size")
        return tuple(m.ravel().tolist())

    def multiply(self, g, h):
        return tuple((self._mat(g) @ self._mat(h)).ravel().tolist())

    def invert(self, g):
        return tuple(_int_inverse(self._mat(g)).ravel().tolist())

    def word_length(self, g, R_max: int | None = None) -> int | None:
        R_max = self.default_radius if R_max is None else R_max
        with self._lock:
            while g not in self._lengths and self._radius < R_max:
                nxt = []
                for x in self._frontier:
                    for s in self.generators:
                        y = self.multiply(x, s)
                        if y not in self._lengths:
                            self._lengths[y] = self._radius + 1
                            nxt.append(y)
                self._frontier = nxt
                self._radius += 1
            d = self._lengths.get(g)
        return d if d is not None and d <= R_max else None


def _int_inverse(m: np.ndarray) -> np.ndarray:
    inv = np.linalg.inv(m.astype(float))
    out = np.rint(inv).astype(np.int64)
    if not np.array_equal(out @ m, np.eye(len(m), dtype=np.int64)):
        raise ValueError("matrix has no integer inverse")
    return out


def group_from_spec(spec: dict):
    kind = spec.get("type")
    extra = set(spec) - {"type", "rank", "dim", "generators", "radius"}
    if extra:
        raise ValueError(f"unknown group keys: {sorted(extra)}")
    if kind == "free":
        return FreeGroup(int(spec.get("rank", 2)))
    if kind == "abelian":
        return FreeAbelian(int(spec.get("dim", 2)))
    if kind == "matrix":
        return MatrixGroup(spec["generators"], int(spec.get("radius", 8)))
    raise ValueError(f"unknown group type {kind!r}")


def group_distance(G, x, y, R_max: int | None = None) -> int | None:
    return G.word_length(G.multiply(G.invert(x), y), R_max)


def cayley_halfspace_contains(G, g, z, C: int = 0, R_max: int | None = None) -> bool | None:
    """``d(z, g) <= d(z, e) + C``; ``None`` when a length exceeds the search budget."""
    d_zg = group_distance(G, z, g, R_max)
    d_ze = G.word_length(z, R_max)
    if d_zg is None or d_ze is None:
        return None
    return d_zg <= d_ze + C


# ---------------------------------------------------------------------------
# ping-pong


class PingPongVerdict(str, Enum):
    CERTIFIED = "CertifiedOnBall"
    FAILS = "FailsWithWitness"


@dataclass(frozen=True)
class PingPongReport:
    verdict: PingPongVerdict
    radius: int
    pair: tuple
    witness: Hashable | None = None
    witness_lengths: tuple | None = None  # (||a||, ||ag||, ||ag^-1||, ||ah||, ||ah^-1||)
    checked: int = 0


def pingpong_lengths(G, a, g, h, R_max: int | None = None) -> tuple:
    """``(||a||, ||ag||, ||ag^-1||, ||ah||, ||ah^-1||)``."""
    out = [G.word_length(a, R_max)]
    for s in (g, G.invert(g), h, G.invert(h)):
        out.append(G.word_length(G.multiply(a, s), R_max))
    if any(v is None for v in out):
        raise PreconditionError("word length exceeded the search budget")
    return tuple(out)


def pingpong_criterion(lengths: tuple) -> bool:
    a, ag, agi, ah, ahi = lengths
    return min(ag, agi) > a or min(ah, ahi) > a


def pingpong_check(G, g, h, R: int, R_max: int | None = None) -> PingPongReport:
    """Check the halfspace ping-pong criterion on the radius-``R`` ball of ``<g, h>``.

    The ball is enumerated breadth first in the alphabet ``g, g^-1, h, h^-1``
    with normal-form deduplication; the first violating element is reported.
    """
    if R < 2:
        raise ValueError("ball radius must be >= 2")
    e = G.identity
    for s, name in ((g, "g"), (h, "h")):
        if s == e or G.multiply(s, s) == e:
            raise PreconditionError(f"generator {name} has order <= 2")
    alphabet = [g, G.invert(g), h, G.invert(h)]
    seen = {e}
    layer = [e]
    checked = 0
    for radius in range(R + 1):
        for a in layer:
            lengths = pingpong_lengths(G, a, g, h, R_max)
            checked += 1
            if not pingpong_criterion(lengths):
                return PingPongReport(PingPongVerdict.FAILS, R, (g, h), a, lengths, checked)
        if radius == R:
            break
        nxt = []
        for a in layer:
            for s in alphabet:
                b = G.multiply(a, s)
                if b not in seen:
                    seen.add(b)
                    nxt.append(b)
        layer = nxt
    return PingPongReport(PingPongVerdict.CERTIFIED, R, (g, h), checked=checked)


# ---------------------------------------------------------------------------
# random walks


@dataclass
class WalkRecord:
    group: object
    increments: np.ndarray  # generator indices w(1..n)
    elements: list  # u(0..n)
    lengths: np.ndarray  # a(0..n)
    seed: int | None = None
    special: dict = field(default_factory=dict)  # (C, K) -> indices

    @property
    def steps(self) -> int:
        return len(self.increments)


def walk_from_increments(G, increments: Sequence[int], seed: int | None = None) -> WalkRecord:
    inc = np.asarray(increments, dtype=np.int64)
    if inc.size and (inc.min() < 0 or inc.max() >= len(G.generators)):
        raise ValueError("increment index out of range")
    elems = [G.identity]
    for i in inc:
        elems.append(G.multiply(elems[-1], G.generators[i]))
    lengths = np.array([G.word_length(u) for u in elems], dtype=np.int64)
    return WalkRecord(G, inc, elems, lengths, seed)


def random_walk(G, n: int, seed: int) -> WalkRecord:
    """Uniform walk on the symmetric generating set, driven by ``numpy.random.default_rng(seed)``."""
    if n < 1:
        raise ValueError("need at least one step")
    rng = np.random.default_rng(seed)
    return walk_from_increments(G, rng.integers(0, len(G.generators), size=n), seed)


def distance_rows(rec: WalkRecord):
    """Yield ``(n, D)`` with ``D[k] = d(u(k), u(n))`` for every ``0 <= k < n``."""
    G = rec.group
    a = rec.lengths
    if isinstance(G, FreeGroup):
        yield from _free_rows(rec)
    elif isinstance(G, FreeAbelian):
        pos = np.array(rec.elements, dtype=np.int64)
        for n in range(1, len(pos)):
            yield n, np.abs(pos[:n] - pos[n]).sum(axis=1)
    else:
        for n in range(1, len(rec.elements)):
            un = rec.elements[n]
            yield n, np.array([group_distance(G, rec.elements[k], un) for k in range(n)], dtype=np.int64)


def _free_rows(rec: WalkRecord):
    G = rec.group
    parent, depth, last = [-1], [0], [0]
    children: dict = {}
    node_of = [0]
    cur = 0
    for i in rec.increments:
        letter = G.generators[i][0]
        if cur != 0 and last[cur] == -letter:
            cur = parent[cur]
        else:
            nxt = children.get((cur, letter))
            if nxt is None:
                nxt = len(parent)
                parent.append(cur)
                depth.append(depth[cur] + 1)
                last.append(letter)
                children[(cur, letter)] = nxt
            cur = nxt
        node_of.append(cur)
    tin, tout = _euler_intervals(parent)
    node_of = np.array(node_of)
    node_tin = tin[node_of]
    a = rec.lengths
    L = np.zeros(len(node_of), dtype=np.int64)
    for n in range(1, len(node_of)):
        c = node_of[n]
        if parent[c] == node_of[n - 1]:
            inside = (node_tin[:n] >= tin[c]) & (node_tin[:n] < tout[c])
            L[:n][inside] = depth[c]
            L[n - 1] = depth[c] - 1
        else:
            np.minimum(L[:n], depth[c], out=L[:n])
            L[n - 1] = depth[c]
        yield n, a[:n] + a[n] - 2 * L[:n]


def _euler_intervals(parent: list[int]) -> tuple[np.ndarray, np.ndarray]:
    """Entry/exit times of a DFS over the trie given by ``parent`` (node 0 is the root)."""
    kids: list[list[int]] = [[] for _ in parent]
    for v, p in enumerate(parent):
        if p >= 0:
            kids[p].append(v)
    tin = np.zeros(len(parent), dtype=np.int64)
    tout = np.zeros(len(parent), dtype=np.int64)
    t = 0
    stack = [(0, False)]
    while stack:
        v, done = stack.pop()
        if done:
            tout[v] = t
            continue
        tin[v] = t
        t += 1
        stack.append((v, True))
        stack.extend((w, False) for w in reversed(kids[v]))
    return tin, tout


def walk_special_indices(rec: WalkRecord, C: int = 2, K: int = 10) -> list[int]:
    """Indices ``n`` with ``d(u(k), u(n)) < a(n) + C`` for every ``K < k < n``.

    Indices ``n <= K + 1`` qualify vacuously (no constraint).
    """
    if C < 0 or K < 0:
        raise ValueError("C and K must be nonnegative")
    a = rec.lengths
    out = list(range(min(K + 2, len(a))))
    for n, D in distance_rows(rec):
        if n <= K + 1:
            continue
        if np.all(D[K + 1:n] < a[n] + C):
            out.append(n)
    rec.special[(C, K)] = out
    return out


@dataclass
class HalfspaceReport:
    special_indices: list
    nontrivial: list  # special indices with at least one constraint (n > K + 1)
    witness_ok: dict  # n_i -> u(n_i) lies in H(u(k), C) for all K < k < n_i
    extended: dict  # n_i -> largest m with u(n_i) in H(u(k), C) for all K < k <= m
    best_range: int  # largest verified range K < k < n_i, counted in indices
    common_witness: bool  # some u(n_i) lies in H(u(k), C) for every K < k <= n
    speed: float


def halfspace_intersection_experiment(rec: WalkRecord, C: int = 2, K: int = 10) -> HalfspaceReport:
    """Which trajectory points ``u(n_i)`` witness the halfspaces ``H(u(k), C) = {z : d(z, u(k)) <= |z| + C}``."""
    if rec.steps < K + 10:
        raise PreconditionError("walk too short for the given K")
    a = rec.lengths
    n_last = len(a) - 1
    special: list[int] = []
    witness_ok: dict[int, bool] = {}
    ext: dict[int, int] = {}
    alive: list[int] = []
    for n, D in distance_rows(rec):
        # earlier special points that are still in every halfspace so far
        if alive:
            idx = np.array(alive)
            ok = D[idx] <= a[idx] + C
            for i in idx[ok]:
                ext[int(i)] = n
            alive = idx[ok].tolist()
        if n > K + 1 and np.all(D[K + 1:n] < a[n] + C):
            special.append(n)
            witness_ok[n] = bool(np.all(D[K + 1:n] <= a[n] + C))
            ext[n] = n  # u(n) lies in its own halfspace
            alive.append(n)
    best = max((n - K - 1 for n in special if witness_ok[n]), default=0)
    common = any(ext[n] == n_last for n in special)
    vacuous = list(range(min(K + 2, len(a))))
    rec.special[(C, K)] = vacuous + special
    return HalfspaceReport(vacuous + special, special, witness_ok, ext, int(best), bool(common),
                           float(a[-1]) / rec.steps)
