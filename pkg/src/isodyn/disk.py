"""Holomorphic self-maps of the unit disk and their iteration.

The Poincare metric here has curvature -1, ``d(z, w) = 2 artanh |(z - w) / (1 - conj(w) z)|``.
Orbits of fixed-point-free maps run to a single boundary point; maps with an
interior fixed point (or elliptic automorphisms) have bounded orbits.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .core import DomainError, detect_special_indices

BOUNDARY_STOP = 1e-12  # iteration halts this close to the circle
GRID_RADIUS = 1 - 1e-6
GRID_POINTS = 1000


def _check(z: complex) -> None:
    if not abs(z) < 1:
        raise DomainError(f"point {z} is not in the open unit disk")


def poincare_distance(z: complex, w: complex) -> float:
    z, w = complex(z), complex(w)
    _check(z)
    _check(w)
    if z == w:
        return 0.0
    # same quantity as 2 artanh of the pseudo-hyperbolic distance, stable near the circle
    az, aw = abs(z), abs(w)
    den = math.sqrt((1 - az) * (1 + az) * (1 - aw) * (1 + aw))
    return 2.0 * math.asinh(abs(z - w) / den)


class PoincareDisk:
    """Metric model for the core machinery (basepoint 0)."""

    def basepoint(self) -> complex:
        return 0j

    def validate(self, z) -> None:
        _check(complex(z))

    def distance(self, z, w) -> float:
        return poincare_distance(z, w)


def angle_of(z: complex) -> float:
    return math.atan2(z.imag, z.real)


def angle_gap(a: float, b: float) -> float:
    return abs(math.remainder(a - b, 2 * math.pi))


class DiskMap:
    """A holomorphic self-map of the disk: ``moebius``, ``blaschke`` or ``poly``."""

    def __init__(self, kind: str, params: dict):
        self.kind = kind
        self.params = params
        if kind == "moebius":
            (a, b), (c, d) = params["matrix"]
            self._eval = lambda z: (a * z + b) / (c * z + d)
        elif kind == "blaschke":
            zeros, u = params["zeros"], params["factor"]

            def ev(z):
                out = u
                for c in zeros:
                    out = out * (z - c) / (1 - c.conjugate() * z)
                return out

            self._eval = ev
        elif kind == "poly":
            coeffs = params["coeffs"]
            self._eval = lambda z: np.polyval(coeffs[::-1], z)
        else:
            raise ValueError(f"unknown map kind {kind!r}")

    def __call__(self, z):
        return self._eval(z)

    def __repr__(self):
        return f"DiskMap({self.kind})"

    # constructors

    @classmethod
    def moebius(cls, matrix) -> "DiskMap":
        """Disk automorphism ``z -> (a z + b) / (c z + d)``; requires ``M J M* = mu J`` with ``mu > 0``."""
        m = np.asarray(matrix, dtype=complex)
        if m.shape != (2, 2):
            raise ValueError("need a 2x2 matrix")
        J = np.diag([1.0, -1.0])
        q = m @ J @ m.conj().T
        mu = q[0, 0].real
        if not (mu > 0 and np.allclose(q, mu * J, atol=1e-9 * mu)):
            raise ValueError("matrix is not a disk automorphism")
        m = m / cmath.sqrt(np.linalg.det(m))
        return cls("moebius", {"matrix": m})

    @classmethod
    def blaschke(cls, zeros: Sequence[complex], factor: complex = 1.0) -> "DiskMap":
        zs = [complex(c) for c in zeros]
        if any(abs(c) >= 1 for c in zs):
            raise DomainError("Blaschke zeros must lie in the open disk")
        u = complex(factor)
        if not math.isclose(abs(u), 1.0, abs_tol=1e-12):
            raise ValueError("Blaschke factor must be unimodular")
        if not zs:
            raise ValueError("need at least one zero")
        return cls("blaschke", {"zeros": zs, "factor": u})

    @classmethod
    def polynomial(cls, coeffs: Sequence[complex]) -> "DiskMap":
        """``sum c_k z^k``; accepted only if the sup norm on the circle is certified < 1."""
        c = np.asarray(coeffs, dtype=complex)
        bound = poly_sup_bound(c)
        if not bound < 1:
            raise DomainError(f"polynomial sup-norm bound {bound:.6g} is not < 1")
        return cls("poly", {"coeffs": c, "sup_bound": bound})

    @classmethod
    def from_spec(cls, spec: dict) -> "DiskMap":
        kind = spec.get("kind")
        allowed = {"moebius": {"matrix"}, "blaschke": {"zeros", "factor"}, "poly": {"coeffs"}}
        if kind not in allowed:
            raise ValueError(f"unknown map kind {kind!r}")
        extra = set(spec) - allowed[kind] - {"kind", "name"}
        if extra:
            raise ValueError(f"unknown map keys: {sorted(extra)}")
        if kind == "moebius":
            return cls.moebius([[parse_complex(v) for v in row] for row in spec["matrix"]])
        if kind == "blaschke":
            return cls.blaschke([parse_complex(v) for v in spec["zeros"]], parse_complex(spec.get("factor", 1)))
        return cls.polynomial([parse_complex(v) for v in spec["coeffs"]])

    @property
    def is_automorphism(self) -> bool:
        return self.kind == "moebius" or (self.kind == "blaschke" and len(self.params["zeros"]) == 1)


def parse_complex(v) -> complex:
    """JSON numbers, ``[re, im]`` pairs or strings like ``"0.5-1j"``."""
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise ValueError(f"bad complex pair {v!r}")
        return complex(float(v[0]), float(v[1]))
    if isinstance(v, str):
        return complex(v.replace(" ", ""))
    return complex(v)


def poly_sup_bound(coeffs: np.ndarray, n: int = 4096) -> float:
    """Upper bound for max |p| on the circle: grid maximum plus a Lipschitz allowance."""
    theta = np.linspace(0, 2 * np.pi, n, endpoint=False)
    vals = np.abs(np.polyval(coeffs[::-1], np.exp(1j * theta)))
    lip = float(np.sum(np.arange(len(coeffs)) * np.abs(coeffs)))
    return float(vals.max() + lip * np.pi / n)


def self_map_margin(f: DiskMap, radius: float = GRID_RADIUS, n: int = GRID_POINTS) -> float:
    """``1 - max |f(z)|`` over ``n`` points on ``|z| = radius``; positive means the grid maps inside."""
    z = radius * np.exp(2j * np.pi * np.arange(n) / n)
    return float(1 - np.max(np.abs(f(z))))


# --- iteration ----------------------------------------------------------------


class Outcome(str, Enum):
    BOUNDED = "BoundedOrbit"
    CONVERGES = "ConvergesTo"
    INDETERMINATE = "Indeterminate"


@dataclass
class IterationVerdict:
    outcome: Outcome
    theta: float | None
    final_point: complex
    tail_diameter: float  # angular spread of the last quartile (convergent) or 0
    max_length: float
    iterations: int
    boundary_trace: list = field(default_factory=list)  # (k, 1 - |z_k|) at powers of two
    starts: list = field(default_factory=list)  # per-start (z0, outcome, theta)
    consistent: bool = True

    def as_dict(self) -> dict:
        return {
            "outcome": self.outcome.value,
            "theta": self.theta,
            "final_point": [self.final_point.real, self.final_point.imag],
            "tail_diameter": self.tail_diameter,
            "max_length": self.max_length,
            "iterations": self.iterations,
            "boundary_trace": self.boundary_trace,
            "consistent": self.consistent,
            "starts": [{"z0": [z.real, z.imag], "outcome": o.value, "theta": t} for z, o, t in self.starts],
        }


def disk_orbit(f: DiskMap, z0: complex, n_max: int) -> list[complex]:
    """``z0, f(z0), ...`` up to ``n_max`` points, stopping once ``1 - |z| < BOUNDARY_STOP``."""
    z = complex(z0)
    _check(z)
    pts = [z]
    for _ in range(n_max - 1):
        if 1 - abs(z) < BOUNDARY_STOP:
            break
        w = complex(f(z))
        if not abs(w) < 1:
            break  # rounding pushed the iterate onto the circle
        z = w
        pts.append(z)
    return pts


def _classify_single(f, z0, n_max, bound_threshold, boundary_tol, angle_tol):
    pts = disk_orbit(f, z0, n_max)
    lengths = [poincare_distance(p, pts[0]) for p in pts]
    zf = pts[-1]
    trace, k = [], 1
    while k < len(pts):
        trace.append((k, 1 - abs(pts[k])))
        k *= 2
    trace.append((len(pts) - 1, 1 - abs(zf)))
    max_len = max(lengths)
    if 1 - abs(zf) < boundary_tol:
        theta = angle_of(zf)
        tail = pts[3 * len(pts) // 4:]
        spread = max(angle_gap(angle_of(p), theta) for p in tail)
        if spread < angle_tol:
            return Outcome.CONVERGES, theta, zf, spread, max_len, len(pts), trace
    if max_len < bound_threshold:
        return Outcome.BOUNDED, None, zf, 0.0, max_len, len(pts), trace
    return Outcome.INDETERMINATE, None, zf, 0.0, max_len, len(pts), trace


def random_disk_points(rng: np.random.Generator, n: int, r_max: float = 0.8) -> list[complex]:
    r = r_max * np.sqrt(rng.random(n))
    phi = rng.uniform(-np.pi, np.pi, n)
    return [complex(z) for z in r * np.exp(1j * phi)]


def iterate_classify(
    f: DiskMap,
    z0: complex = 0j,
    n_max: int = 10_000,
    bound_threshold: float = 10.0,
    boundary_tol: float = 1e-6,
    angle_tol: float = 1e-3,
    n_starts: int = 5,
    seed: int = 0,
) -> IterationVerdict:
    """Classify the orbit of ``z0``, then rerun from ``n_starts`` random points.

    A disagreement between starts (different outcomes, or limit angles more
    than ``angle_tol`` apart) downgrades the verdict to Indeterminate.
    """
    if n_max < 4:
        raise ValueError("n_max must be >= 4")
    main = _classify_single(f, z0, n_max, bound_threshold, boundary_tol, angle_tol)
    outcome, theta = main[0], main[1]
    starts = [(complex(z0), outcome, theta)]
    rng = np.random.default_rng(seed)
    for z in random_disk_points(rng, n_starts):
        o, t = _classify_single(f, z, n_max, bound_threshold, boundary_tol, angle_tol)[:2]
        starts.append((z, o, t))
    consistent = all(o == outcome for _, o, _ in starts)
    if consistent and outcome is Outcome.CONVERGES:
        consistent = all(angle_gap(t, theta) < angle_tol for _, _, t in starts)
    if not consistent:
        outcome, theta = Outcome.INDETERMINATE, None
    return IterationVerdict(outcome, theta, main[2], main[3], main[4], main[5], main[6], starts, consistent)


def _cluster_angles(angles: Sequence[float], tol: float) -> list[float]:
    if not angles:
        return []
    a = sorted(math.remainder(x, 2 * math.pi) for x in angles)
    groups = [[a[0]]]
    for x in a[1:]:
        if x - groups[-1][-1] < tol:
            groups[-1].append(x)
        else:
            groups.append([x])
    if len(groups) > 1 and a[0] + 2 * math.pi - a[-1] < tol:
        groups[0] = [x - 2 * math.pi for x in groups.pop()] + groups[0]
    return [math.remainder(cmath.phase(sum(cmath.exp(1j * x) for x in g)), 2 * math.pi) for g in groups]


def characteristic_set_disk(
    f: DiskMap,
    z0: complex = 0j,
    n_max: int = 10_000,
    C: float = 0.0,
    bound_threshold: float = 10.0,
    cluster_tol: float = 1e-3,
) -> list[float]:
    """Cluster angles of the orbit at its late special indices; empty for bounded orbits."""
    pts = disk_orbit(f, z0, n_max)
    lengths = [poincare_distance(p, pts[0]) for p in pts]
    if max(lengths) <= bound_threshold:
        return []
    start = 3 * len(pts) // 4
    idx = [i for i in detect_special_indices(lengths, C) if i >= start and lengths[i] > bound_threshold]
    return _cluster_angles([angle_of(pts[i]) for i in idx], cluster_tol)


# --- standard examples ---------------------------------------------------------

_CAYLEY = np.array([[1, -1j], [1, 1j]])  # upper half-plane -> disk, infinity -> 1


def hyperbolic_example(t: float = 0.5) -> DiskMap:
    """``(z + t) / (1 + t z)``: fixes +-1, attracting at +1 for ``0 < t < 1``."""
    return DiskMap.moebius([[1, t], [t, 1]])


def parabolic_example(shift: float = 1.0) -> DiskMap:
    """Half-plane translation ``w -> w + shift`` seen in the disk; fixes only ``z = 1``."""
    m = _CAYLEY @ np.array([[1, shift], [0, 1]]) @ np.linalg.inv(_CAYLEY)
    return DiskMap.moebius(m)


def elliptic_example(alpha: float = math.pi * (math.sqrt(5) - 1)) -> DiskMap:
    """Rotation by an irrational multiple of pi."""
    return DiskMap.moebius([[cmath.exp(0.5j * alpha), 0], [0, cmath.exp(-0.5j * alpha)]])


def contraction_example() -> DiskMap:
    """``z / 2``."""
    return DiskMap.polynomial([0, 0.5])


def random_automorphism(rng: np.random.Generator, r_max: float = 0.9) -> DiskMap:
    c = random_disk_points(rng, 1, r_max)[0]
    u = cmath.exp(1j * rng.uniform(-np.pi, np.pi))
    return DiskMap.blaschke([c], u)
