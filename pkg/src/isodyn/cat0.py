"""CAT(0) model spaces: R^m, the hyperbolic plane, and products R^m x H^2.

Hyperbolic coordinates are stored in geodesic polar form ``(radius, angle)``
about the disk origin rather than as a disk complex number: far-out ray
points (radius in the thousands) are needed to probe the boundary, and the
disk coordinate ``tanh(r/2)`` rounds to 1 long before that.  ``Cat0Point.z``
gives the disk view whenever it is representable.

Boundary points of a product use the spherical-join parametrisation: a unit
direction ``u`` in the Euclidean factor, an ideal angle ``phi`` on the circle
at infinity of H^2, and a mixing angle ``theta`` (0 = purely Euclidean,
pi/2 = purely hyperbolic).  The corresponding ray from the origin is
``t -> (t cos(theta) u, polar(t sin(theta), phi))``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .core import (
    DomainError,
    HalfspaceSpec,
    PreconditionError,
    halfspace_contains,
)

EPS_ANG = 1e-6  # slack on the pi/2 star boundary
EPS_IDEAL = 1e-12  # ideal points closer than this on the circle are equal
HALF_PI = 0.5 * math.pi

_LOG2 = math.log(2.0)


# ---------------------------------------------------------------------------
# hyperbolic plane helpers


def _log_sinh(x: float) -> float:
    if x <= 0.0:
        return -math.inf
    if x < 20.0:
        return math.log(math.sinh(x))
    return x - _LOG2 + math.log1p(-math.exp(-2.0 * x))


def h2_polar_distance(r1: float, a1: float, r2: float, a2: float) -> float:
    """Hyperbolic distance between polar points, stable at any radius.

    Uses ``sinh^2(d/2) = sinh^2((r1-r2)/2) + sinh(r1) sinh(r2) sin^2((a1-a2)/2)``.
    """
    s = math.sin(0.5 * (a1 - a2))
    if max(r1, r2) < 200.0:
        val = math.sinh(0.5 * (r1 - r2)) ** 2 + math.sinh(r1) * math.sinh(r2) * s * s
        return 2.0 * math.asinh(math.sqrt(val))
    half = 0.5 * abs(r1 - r2)
    l1 = 2.0 * _log_sinh(half) if half > 0 else -math.inf
    l2 = _log_sinh(r1) + _log_sinh(r2) + (2.0 * math.log(abs(s)) if s != 0 else -math.inf)
    log_val = np.logaddexp(l1, l2)
    if log_val == -math.inf:
        return 0.0
    half_log = 0.5 * log_val
    if half_log < 30.0:
        return 2.0 * math.asinh(math.exp(half_log))
    return 2.0 * (half_log + _LOG2)


def _wrap(angle: float) -> float:
    return math.atan2(math.sin(angle), math.cos(angle))


def circle_gap(a: float, b: float) -> float:
    """Unsigned angular gap on the circle, in [0, pi]."""
    return abs(_wrap(a - b))


# Cayley transform w -> (w - i)/(w + i) from the upper half plane to the disk
_K = np.array([[1.0, -1.0j], [1.0, 1.0j]])
_K_INV = np.linalg.inv(_K)


def sl2_to_disk(m: np.ndarray) -> np.ndarray:
    """Conjugate a real SL(2) matrix (upper half plane) to its SU(1,1) disk form."""
    return _K @ np.asarray(m, dtype=complex) @ _K_INV


def _polar_matrix(r: float, phi: float) -> tuple[np.ndarray, float]:
    """SU(1,1) matrix sending 0 to the polar point, as (scaled matrix, log scale)."""
    # rotation(phi) @ boost(r), divided by exp(r/2) to avoid overflow
    e = math.exp(-r)
    boost = 0.5 * np.array([[1.0 + e, 1.0 - e], [1.0 - e, 1.0 + e]])
    rot = np.diag([np.exp(0.5j * phi), np.exp(-0.5j * phi)])
    return rot @ boost, 0.5 * r


def _apply_su11_polar(d: np.ndarray, r: float, phi: float) -> tuple[float, float]:
    q, log_scale = _polar_matrix(r, phi)
    m = d @ q
    b, dd = m[0, 1], m[1, 1]
    if abs(b) == 0.0:
        return 0.0, 0.0
    log_b = math.log(abs(b)) + log_scale
    if log_b > 20.0:
        r_new = 2.0 * (log_b + _LOG2)
    else:
        r_new = 2.0 * math.asinh(math.exp(log_b))
    return r_new, float(np.angle(b / dd))


def moebius_circle(d: np.ndarray, phi: float) -> float:
    w = np.exp(1j * phi)
    return float(np.angle((d[0, 0] * w + d[0, 1]) / (d[1, 0] * w + d[1, 1])))


# ---------------------------------------------------------------------------
# points and boundary points


@dataclass(frozen=True, eq=False)
class Cat0Point:
    euclid: np.ndarray
    radius: float | None = None
    angle: float | None = None

    def __post_init__(self):
        e = np.array(self.euclid, dtype=float).reshape(-1)
        e.setflags(write=False)
        object.__setattr__(self, "euclid", e)

    @classmethod
    def from_disk(cls, euclid, z: complex) -> "Cat0Point":
        if not abs(z) < 1.0 - 1e-12:
            raise DomainError(f"disk coordinate {z!r} is not inside |z| < 1 - 1e-12")
        return cls(euclid, 2.0 * math.atanh(abs(z)), float(np.angle(z)) if z != 0 else 0.0)

    @property
    def z(self) -> complex | None:
        if self.radius is None:
            return None
        return math.tanh(0.5 * self.radius) * complex(math.cos(self.angle), math.sin(self.angle))

    def __repr__(self):
        if self.radius is None:
            return f"Cat0Point({self.euclid.tolist()})"
        return f"Cat0Point({self.euclid.tolist()}, r={self.radius:.6g}, phi={self.angle:.6g})"


@dataclass(frozen=True, eq=False)
class VisualBoundaryPoint:
    direction: np.ndarray | None
    ideal_angle: float | None
    theta: float

    def __post_init__(self):
        if self.direction is not None:
            u = np.array(self.direction, dtype=float).reshape(-1)
            n = np.linalg.norm(u)
            if n == 0:
                raise ValueError("direction must be nonzero")
            if abs(n - 1.0) > 1e-12:
                u = u / n
            u.setflags(write=False)
            object.__setattr__(self, "direction", u)
        if not -1e-12 <= self.theta <= HALF_PI + 1e-12:
            raise ValueError("mixing angle theta must lie in [0, pi/2]")
        object.__setattr__(self, "theta", min(max(float(self.theta), 0.0), HALF_PI))

    def __repr__(self):
        u = None if self.direction is None else np.round(self.direction, 6).tolist()
        return f"VisualBoundaryPoint(u={u}, phi={self.ideal_angle}, theta={self.theta:.6g})"


def _join_vector(xi: VisualBoundaryPoint) -> np.ndarray:
    """Embed ``cos(theta) u`` and ``sin(theta)`` as one unit vector (sphere model of the join)."""
    parts = []
    if xi.direction is not None:
        parts.append(math.cos(xi.theta) * xi.direction)
    if xi.ideal_angle is not None:
        parts.append(np.array([math.sin(xi.theta)]))
    return np.concatenate(parts)


# ---------------------------------------------------------------------------
# isometries


class IsometryKind(str, Enum):
    ELLIPTIC = "Elliptic"
    PARABOLIC = "Parabolic"
    HYPERBOLIC = "Hyperbolic"


@dataclass(frozen=True)
class IsometryType:
    kind: IsometryKind
    translation_length: float = 0.0


@dataclass(frozen=True, eq=False)
class Cat0Isometry:
    """``(x, z) -> (orth @ x + shift, M . z)`` with ``M`` in SL(2, R) acting on H^2."""

    orth: np.ndarray
    shift: np.ndarray
    sl2: np.ndarray | None = None
    disk: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        q = np.array(self.orth, dtype=float).reshape(len(self.shift), len(self.shift))
        b = np.array(self.shift, dtype=float).reshape(-1)
        if q.size and np.max(np.abs(q.T @ q - np.eye(len(b)))) >= 1e-9:
            raise ValueError("Euclidean part is not orthogonal")
        object.__setattr__(self, "orth", q)
        object.__setattr__(self, "shift", b)
        if self.sl2 is not None:
            m = np.array(self.sl2, dtype=float).reshape(2, 2)
            if abs(np.linalg.det(m) - 1.0) >= 1e-9:
                raise ValueError("hyperbolic part must have determinant 1")
            object.__setattr__(self, "sl2", m)
            if self.disk is None:
                object.__setattr__(self, "disk", sl2_to_disk(m))

    @classmethod
    def euclidean(cls, orth=None, shift=(0.0, 0.0)) -> "Cat0Isometry":
        shift = np.asarray(shift, dtype=float)
        return cls(np.eye(len(shift)) if orth is None else orth, shift)

    @classmethod
    def hyperbolic(cls, sl2, dim: int = 0, orth=None, shift=None) -> "Cat0Isometry":
        shift = np.zeros(dim) if shift is None else np.asarray(shift, dtype=float)
        return cls(np.eye(dim) if orth is None else orth, shift, sl2)

    def __call__(self, p: Cat0Point) -> Cat0Point:
        e = self.orth @ p.euclid + self.shift
        if self.sl2 is None:
            return Cat0Point(e)
        r, a = _apply_su11_polar(self.disk, p.radius, p.angle)
        return Cat0Point(e, r, a)

    def on_boundary(self, xi: VisualBoundaryPoint) -> VisualBoundaryPoint:
        u = None if xi.direction is None else self.orth @ xi.direction
        phi = xi.ideal_angle
        if phi is not None and self.sl2 is not None:
            phi = moebius_circle(self.disk, phi)
        return VisualBoundaryPoint(u, phi, xi.theta)

    def __matmul__(self, other: "Cat0Isometry") -> "Cat0Isometry":
        sl2 = None if self.sl2 is None else self.sl2 @ other.sl2
        return Cat0Isometry(self.orth @ other.orth, self.orth @ other.shift + self.shift, sl2)

    def inverse(self) -> "Cat0Isometry":
        qt = self.orth.T
        sl2 = None if self.sl2 is None else np.linalg.inv(self.sl2)
        return Cat0Isometry(qt, -qt @ self.shift, sl2)

    def power(self, n: int) -> "Cat0Isometry":
        base = self if n >= 0 else self.inverse()
        out = Cat0Isometry(np.eye(len(self.shift)), np.zeros(len(self.shift)),
                           None if self.sl2 is None else np.eye(2))
        for _ in range(abs(n)):
            out = base @ out
        return out


def classify_isometry_h2(g: Cat0Isometry) -> IsometryType:
    if g.sl2 is None:
        raise PreconditionError("isometry has no hyperbolic part")
    m = g.sl2
    if abs(np.linalg.det(m) - 1.0) >= 1e-9:
        raise ValueError("determinant is not 1")
    if min(np.max(np.abs(m - np.eye(2))), np.max(np.abs(m + np.eye(2)))) < 1e-9:
        return IsometryType(IsometryKind.ELLIPTIC)
    tr = abs(np.trace(m))
    if abs(tr - 2.0) <= 1e-9:
        return IsometryType(IsometryKind.PARABOLIC)
    if tr < 2.0:
        return IsometryType(IsometryKind.ELLIPTIC)
    return IsometryType(IsometryKind.HYPERBOLIC, 2.0 * math.acosh(tr / 2.0))


# ---------------------------------------------------------------------------
# the spaces


class Cat0Space:
    """``R^dim`` (``hyperbolic=False``), ``H^2`` (``dim=0``) or ``R^dim x H^2``."""

    NAMES = {"r1": (1, False), "r2": (2, False), "r3": (3, False),
             "h2": (0, True), "rxh2": (1, True), "r2xh2": (2, True)}

    def __init__(self, dim: int, hyperbolic: bool):
        if dim < 0 or (dim == 0 and not hyperbolic):
            raise ValueError("empty model")
        self.dim = dim
        self.hyperbolic = hyperbolic

    @classmethod
    def from_name(cls, name: str) -> "Cat0Space":
        try:
            return cls(*cls.NAMES[name])
        except KeyError:
            raise ValueError(f"unknown CAT(0) model {name!r}; known: {sorted(cls.NAMES)}") from None

    def __repr__(self):
        return f"Cat0Space(dim={self.dim}, hyperbolic={self.hyperbolic})"

    @property
    def signature(self) -> tuple[int, bool]:
        return self.dim, self.hyperbolic

    # -- metric model contract ----------------------------------------------

    def basepoint(self) -> Cat0Point:
        if self.hyperbolic:
            return Cat0Point(np.zeros(self.dim), 0.0, 0.0)
        return Cat0Point(np.zeros(self.dim))

    def validate(self, p) -> None:
        if not isinstance(p, Cat0Point) or p.euclid.shape != (self.dim,):
            raise DomainError(f"{p!r} is not a point of {self}")
        if (p.radius is not None) != self.hyperbolic:
            raise DomainError(f"{p!r} does not match the signature of {self}")
        if not np.all(np.isfinite(p.euclid)):
            raise DomainError("non-finite coordinates")
        if self.hyperbolic and not (math.isfinite(p.radius) and p.radius >= 0 and math.isfinite(p.angle)):
            raise DomainError("hyperbolic part must have finite radius >= 0")

    def distance(self, p: Cat0Point, q: Cat0Point) -> float:
        if p.euclid.shape != q.euclid.shape or (p.radius is None) != (q.radius is None):
            raise DomainError("model-signature mismatch")
        de2 = float(np.sum((p.euclid - q.euclid) ** 2))
        if p.radius is None:
            return math.sqrt(de2)
        dh = h2_polar_distance(p.radius, p.angle, q.radius, q.angle)
        return math.sqrt(de2 + dh * dh)

    # -- rays and boundary -------------------------------------------------

    def validate_boundary(self, xi: VisualBoundaryPoint) -> None:
        has_dir = xi.direction is not None
        if has_dir != (self.dim > 0) or (xi.ideal_angle is not None) != self.hyperbolic:
            raise DomainError(f"{xi!r} does not match the signature of {self}")
        if has_dir and xi.direction.shape != (self.dim,):
            raise DomainError("direction has the wrong dimension")
        if self.dim == 0 and xi.theta != HALF_PI:
            raise DomainError("boundary points of H^2 have theta = pi/2")
        if not self.hyperbolic and xi.theta != 0.0:
            raise DomainError("boundary points of R^n have theta = 0")

    def boundary_point(self, direction=None, ideal_angle=None, theta=None) -> VisualBoundaryPoint:
        if theta is None:
            theta = HALF_PI if self.dim == 0 else 0.0
        if self.dim > 0 and direction is None:
            direction = np.eye(self.dim)[0]
        if self.hyperbolic and ideal_angle is None:
            ideal_angle = 0.0
        xi = VisualBoundaryPoint(direction if self.dim > 0 else None,
                                 ideal_angle if self.hyperbolic else None, theta)
        self.validate_boundary(xi)
        return xi

    def ray_point(self, xi: VisualBoundaryPoint, t: float) -> Cat0Point:
        """Point at parameter ``t`` on the unit-speed ray from the origin toward ``xi``."""
        e = t * math.cos(xi.theta) * xi.direction if self.dim > 0 else np.zeros(0)
        if not self.hyperbolic:
            return Cat0Point(e)
        return Cat0Point(e, t * math.sin(xi.theta), xi.ideal_angle)

    def direction_of(self, p: Cat0Point) -> VisualBoundaryPoint:
        """Boundary point of the ray from the origin through ``p`` (``p`` != origin)."""
        ne = float(np.linalg.norm(p.euclid)) if self.dim > 0 else 0.0
        rh = p.radius if self.hyperbolic else 0.0
        if ne == 0.0 and rh == 0.0:
            raise DomainError("the basepoint has no direction")
        u = (p.euclid / ne if ne > 0 else np.eye(self.dim)[0]) if self.dim > 0 else None
        return VisualBoundaryPoint(u, p.angle if self.hyperbolic else None, math.atan2(rh, ne))

    def random_boundary(self, rng: np.random.Generator) -> VisualBoundaryPoint:
        u = None
        if self.dim > 0:
            u = rng.standard_normal(self.dim)
            u /= np.linalg.norm(u)
        phi = float(rng.uniform(-math.pi, math.pi)) if self.hyperbolic else None
        if self.dim == 0:
            theta = HALF_PI
        elif not self.hyperbolic:
            theta = 0.0
        else:
            theta = float(rng.uniform(0.0, HALF_PI))
        return VisualBoundaryPoint(u, phi, theta)

    def random_point(self, rng: np.random.Generator, scale: float = 3.0) -> Cat0Point:
        e = rng.normal(0.0, scale, self.dim)
        if not self.hyperbolic:
            return Cat0Point(e)
        return Cat0Point(e, float(rng.uniform(0.0, scale)), float(rng.uniform(-math.pi, math.pi)))

    def random_isometry(self, rng: np.random.Generator, scale: float = 2.0) -> Cat0Isometry:
        q = np.eye(self.dim)
        if self.dim > 0:
            a, r = np.linalg.qr(rng.standard_normal((self.dim, self.dim)))
            q = a * np.sign(np.diag(r))
        b = rng.normal(0.0, scale, self.dim)
        m = None
        if self.hyperbolic:
            m = rng.normal(0.0, 1.0, (2, 2))
            if np.linalg.det(m) < 0:
                m[:, 0] *= -1
            m /= math.sqrt(np.linalg.det(m))
        return Cat0Isometry(q, b, m)

    # -- angles ------------------------------------------------------------

    def visual_angle(self, xi: VisualBoundaryPoint, eta: VisualBoundaryPoint) -> float:
        """Riemannian angle at the origin between the rays to ``xi`` and ``eta`` (cone topology)."""
        c = 0.0
        if self.dim > 0:
            c += math.cos(xi.theta) * math.cos(eta.theta) * float(xi.direction @ eta.direction)
        if self.hyperbolic:
            c += math.sin(xi.theta) * math.sin(eta.theta) * math.cos(xi.ideal_angle - eta.ideal_angle)
        return math.acos(min(1.0, max(-1.0, c)))

    def angular_metric(self, xi: VisualBoundaryPoint, eta: VisualBoundaryPoint) -> float:
        """Angular (Tits) metric via the spherical-join formula."""
        self.validate_boundary(xi)
        self.validate_boundary(eta)
        c = 0.0
        if self.dim > 0:
            c += math.cos(xi.theta) * math.cos(eta.theta) * float(xi.direction @ eta.direction)
        if self.hyperbolic:
            same = circle_gap(xi.ideal_angle, eta.ideal_angle) <= EPS_IDEAL
            c += math.sin(xi.theta) * math.sin(eta.theta) * (1.0 if same else -1.0)
        return math.acos(min(1.0, max(-1.0, c)))

    def sampled_angle(self, xi, eta, params: Sequence[float] = (10.0, 100.0, 1000.0)) -> float:
        """Comparison angles at the origin along both rays; nondecreasing in t, tends to the angular metric."""
        best = 0.0
        for t in params:
            d = self.distance(self.ray_point(xi, t), self.ray_point(eta, t))
            best = max(best, 2.0 * math.asin(min(1.0, d / (2.0 * t))))
        return best

    # -- stars ------------------------------------------------------------

    def star_membership_analytic(self, xi, eta, eps_ang: float = EPS_ANG) -> bool:
        return self.angular_metric(xi, eta) <= HALF_PI + eps_ang

    def default_scale(self) -> float:
        return 1e5 if self.hyperbolic else 1e3

    def star_witnesses(self, xi, R: float, witness_fraction: float = 0.05, count: int = 6,
                       spread: float = 0.04) -> list:
        """Sample of a cone neighbourhood of ``xi``: its ray and the rays tilted by ``spread``.

        Tilts move the join direction (Euclidean direction and mixing angle)
        along an orthonormal tangent frame and keep the ideal angle fixed.
        """
        t0 = witness_fraction * R
        rays = [xi]
        if spread > 0 and self.dim > 0:
            v = _join_vector(xi)
            frame = np.linalg.svd(v[None, :])[2][1:]
            for t in frame:
                for sign in (1.0, -1.0):
                    w = math.cos(spread) * v + sign * math.sin(spread) * t
                    rays.append(self._from_join(w, xi.ideal_angle))
            rays = [r for r in rays if r is not None]
        return [self.ray_point(r, t0 * 2.0 ** k) for r in rays for k in range(count)]

    def _from_join(self, w: np.ndarray, ideal_angle) -> VisualBoundaryPoint | None:
        if not self.hyperbolic:
            return VisualBoundaryPoint(w, None, 0.0)
        if w[-1] < 0:
            return None
        ne = float(np.linalg.norm(w[:-1]))
        u = w[:-1] / ne if ne > 0 else np.eye(self.dim)[0]
        return VisualBoundaryPoint(u, ideal_angle, math.atan2(w[-1], ne))

    def star_membership_sampled(self, xi, eta, R: float | None = None, C: float = 0.0,
                                witness_fraction: float = 0.05) -> bool:
        """Is the point at parameter ``R`` toward ``eta`` in ``H(V, C)``?

        ``V`` is sampled by points on the ray toward ``xi`` at parameters
        ``witness_fraction * R * 2**k`` and on slightly tilted rays (see
        :meth:`star_witnesses`).  The neighbourhood scale has to sit
        well below ``R`` (a witness at parameter ``>= R`` misses directions
        between pi/3 and pi/2) and well above the hyperbolic defect
        ``-2 log sin(gap/2)`` of the ideal angles.
        """
        self.validate_boundary(xi)
        self.validate_boundary(eta)
        R = self.default_scale() if R is None else R
        if R <= 0:
            raise ValueError("R must be positive")
        spec = HalfspaceSpec(tuple(self.star_witnesses(xi, R, witness_fraction)), C, self.basepoint())
        return halfspace_contains(self, spec, self.ray_point(eta, R))

    def distance_to_star(self, center: VisualBoundaryPoint, eta: VisualBoundaryPoint) -> float:
        """Cone-topology distance (visual angle at the origin) from ``eta`` to the closed pi/2 ball around ``center``."""
        if self.star_membership_analytic(center, eta):
            return 0.0
        if self.dim == 0:
            return circle_gap(center.ideal_angle, eta.ideal_angle)
        best = -1.0
        cases = [(None, 1.0)]
        if self.hyperbolic:
            # either align the ideal angle with eta's (sign set by whether it equals center's)
            # or sit on center's ideal angle
            same = circle_gap(eta.ideal_angle, center.ideal_angle) <= EPS_IDEAL
            cases = [(1.0 if same else -1.0, 1.0),
                     (1.0, math.cos(eta.ideal_angle - center.ideal_angle))]
        for delta, kappa in cases:
            a = _join_vector(eta).copy()
            b = _join_vector(center).copy()
            constraints = [b]
            if self.hyperbolic:
                a[-1] *= kappa
                b[-1] *= delta
                constraints.append(np.eye(len(a))[-1])
            best = max(best, _max_linear_on_sphere(a, constraints))
        return math.acos(min(1.0, max(-1.0, best)))

    # -- the flat-sector dichotomy for projections ------------------------

    def projection_parameter(self, xi, eta, i: float) -> float:
        """Parameter of the nearest-point projection of the ``eta``-ray point at ``i`` onto the ``xi``-ray."""
        y = self.ray_point(eta, i)
        res = minimize_scalar(lambda t: self.distance(y, self.ray_point(xi, t)),
                              bounds=(0.0, 2.0 * i), method="bounded",
                              options={"xatol": 1e-10 * max(1.0, i)})
        return float(res.x)


def _max_linear_on_sphere(a: np.ndarray, constraints: list[np.ndarray]) -> float:
    """max <v, a> over unit v with <v, c> >= 0 for every constraint (active-set enumeration)."""
    n = len(a)
    best = -math.inf
    k = len(constraints)
    for mask in range(1 << k):
        active = [constraints[j] for j in range(k) if mask >> j & 1]
        v = a.copy()
        if active:
            basis, _ = np.linalg.qr(np.array(active).T)
            v = v - basis @ (basis.T @ v)
        nv = np.linalg.norm(v)
        if nv < 1e-14:
            if n > len(active):
                best = max(best, 0.0)
            continue
        v = v / nv
        if all(v @ c >= -1e-12 for c in constraints):
            best = max(best, float(v @ a))
    return best


# ---------------------------------------------------------------------------
# contraction dynamics


@dataclass
class DynamicsRecord:
    xi_plus: VisualBoundaryPoint | None
    xi_minus: VisualBoundaryPoint | None
    precondition_ok: bool
    rows: list = field(default_factory=list)  # (n, angle_to_star, dist_estimate)
    final_distance: float = math.inf
    success: bool = False
    estimates_converged: bool = False
    message: str = ""


def _orbit_direction(space: Cat0Space, g: Cat0Isometry, n: int) -> tuple[VisualBoundaryPoint | None, float]:
    """Direction and distance of ``g^n x0`` for large ``n`` (matrix powers, projectively rescaled)."""
    e = np.zeros(space.dim)
    if space.dim > 0:
        aff = np.eye(space.dim + 1)
        aff[:space.dim, :space.dim] = g.orth
        aff[:space.dim, space.dim] = g.shift
        e = np.linalg.matrix_power(aff, n)[:space.dim, space.dim]
    ne = float(np.linalg.norm(e))
    rh, phi = 0.0, 0.0
    if space.hyperbolic:
        m, log_scale = np.eye(2), 0.0
        base, base_log, k = g.sl2.copy(), 0.0, n
        while k:
            if k & 1:
                m = m @ base
                s = np.max(np.abs(m))
                m, log_scale = m / s, log_scale + base_log + math.log(s)
            k >>= 1
            if k:
                base = base @ base
                s = np.max(np.abs(base))
                base, base_log = base / s, 2.0 * base_log + math.log(s)
        d = sl2_to_disk(m)
        b, dd = d[0, 1], d[1, 1]
        if abs(b) > 0:
            log_b = math.log(abs(b)) + log_scale
            rh = 2.0 * (log_b + _LOG2) if log_b > 20 else 2.0 * math.asinh(math.exp(log_b))
            phi = float(np.angle(b / dd))
    dist = math.hypot(ne, rh)
    if dist == 0.0:
        return None, 0.0
    u = (e / ne if ne > 0 else np.eye(space.dim)[0]) if space.dim > 0 else None
    return VisualBoundaryPoint(u, phi if space.hyperbolic else None, math.atan2(rh, ne)), dist


def estimate_endpoints(space: Cat0Space, g: Cat0Isometry, n_est: int = 1 << 24,
                       min_distance: float = 10.0, tol: float = 1e-6):
    """Estimate ``xi^+`` and ``xi^-`` as the directions of ``g^{+-n} x0``.

    Returns ``(xi_plus, xi_minus, converged)``; the endpoints are ``None`` when
    the orbit does not leave the ball of radius ``min_distance`` (bounded g).
    Estimates closer than ``tol`` in the cone topology are merged.
    """
    out, converged = [], True
    for h in (g, g.inverse()):
        xi, dist = _orbit_direction(space, h, n_est)
        if xi is None or dist < min_distance:
            return None, None, False
        prev, _ = _orbit_direction(space, h, n_est // 2)
        if prev is None or space.visual_angle(xi, prev) >= tol:
            converged = False
        out.append(xi)
    if space.visual_angle(out[0], out[1]) < tol:
        # a single fixed point at infinity (parabolic case); the two estimates only differ by rounding
        out[1] = out[0]
    return out[0], out[1], converged


def dynamics_experiment(space: Cat0Space, g, eta: VisualBoundaryPoint, n: int = 200,
                        success_tol: float = 1e-3, n_est: int = 1 << 24) -> DynamicsRecord:
    """Track ``g_k eta`` for ``k = 1..n`` against the closed pi/2 ball around ``xi^+``.

    ``g`` is either a single isometry (``g_k = g^k``) or an explicit list
    ``[g_1, ..., g_n]``.  When ``eta`` lies within angle pi/2 of ``xi^-`` the
    record reports the precondition failure instead of iterating.
    """
    space.validate_boundary(eta)
    x0 = space.basepoint()
    if isinstance(g, Cat0Isometry):
        xi_p, xi_m, conv = estimate_endpoints(space, g, n_est)
        seq = None
    else:
        seq = list(g)
        n = min(n, len(seq))
        last = seq[-1]
        xi_p, _ = _orbit_direction(space, last, 1)
        xi_m, _ = _orbit_direction(space, last.inverse(), 1)
        conv = True
    if xi_p is None or xi_m is None:
        return DynamicsRecord(xi_p, xi_m, False, message="orbit of x0 stays bounded; no endpoints")
    if space.angular_metric(eta, xi_m) <= HALF_PI + 1e-9:
        return DynamicsRecord(xi_p, xi_m, False, estimates_converged=conv,
                              message="eta lies in the closed pi/2 ball around xi^- (no guarantee)")
    rec = DynamicsRecord(xi_p, xi_m, True, estimates_converged=conv)
    cur_eta, cur_x = eta, x0
    for k in range(1, n + 1):
        if seq is None:
            cur_eta = g.on_boundary(cur_eta)
            cur_x = g(cur_x)
        else:
            cur_eta = seq[k - 1].on_boundary(eta)
            cur_x = seq[k - 1](x0)
        rec.rows.append((k, space.distance_to_star(xi_p, cur_eta), space.distance(x0, cur_x)))
    rec.final_distance = rec.rows[-1][1]
    rec.success = rec.final_distance < success_tol
    return rec


def contraction_check(space: Cat0Space, g: Cat0Isometry, n_min: int, n_max: int,
                      samples: Sequence[Cat0Point]) -> tuple[int, int]:
    """Sampled contraction lemma for the powers ``g^n``, ``n_min <= n <= n_max``.

    The neighbourhoods of the endpoints are represented by the orbit points
    ``W^{+-} = {g^{+-n} x0}``.  For every sample ``z`` outside ``H(W^-)`` checks
    ``g^n z in H(W^+)``.  Returns ``(points checked, violations)``.
    """
    x0 = space.basepoint()
    fwd, bwd = [x0], [x0]
    ginv = g.inverse()
    for _ in range(n_max):
        fwd.append(g(fwd[-1]))
        bwd.append(ginv(bwd[-1]))
    w_plus = HalfspaceSpec(tuple(fwd[n_min:]), 0.0, x0)
    w_minus = HalfspaceSpec(tuple(bwd[n_min:]), 0.0, x0)
    checked = violations = 0
    for z in samples:
        if halfspace_contains(space, w_minus, z):
            continue
        checked += 1
        img = z
        for k in range(1, n_max + 1):
            img = g(img)
            if k >= n_min and not halfspace_contains(space, w_plus, img):
                violations += 1
                break
    return checked, violations
