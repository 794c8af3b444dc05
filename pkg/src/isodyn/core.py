"""Model-independent halfspace machinery.

Every concrete space in the package implements the small :class:`MetricModel`
protocol (``distance``, ``basepoint``, ``validate``).  The functions here only
talk to that protocol, so the same predicates run unchanged on Euclidean
space, the hyperbolic plane, Hilbert polytopes and the disk.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Protocol, Sequence, runtime_checkable

# relative tolerance for every metric comparison; ties count as membership
EPS_REL = 1e-9


class DomainError(ValueError):
    """A point does not belong to the model it was handed to."""


class PreconditionError(ValueError):
    """An operation was called outside the hypotheses it relies on."""


@runtime_checkable
class MetricModel(Protocol):
    def distance(self, p: Any, q: Any) -> float: ...

    def basepoint(self) -> Any: ...

    def validate(self, p: Any) -> None: ...


def _leq(lhs: float, rhs: float) -> bool:
    return lhs <= rhs + EPS_REL * max(1.0, abs(lhs), abs(rhs))


@dataclass(frozen=True)
class HalfspaceSpec:
    """Finite stand-in for ``H(W, C)``: witnesses ``W``, slack ``C``, basepoint."""

    witnesses: tuple
    slack: float
    basepoint: Any

    def __post_init__(self):
        if len(self.witnesses) == 0:
            raise ValueError("a halfspace needs at least one witness")
        object.__setattr__(self, "witnesses", tuple(self.witnesses))


def distance_to_set(model: MetricModel, z, witnesses: Sequence) -> tuple[float, int]:
    """Return ``(min_w d(z, w), argmin index)``."""
    best, arg = math.inf, -1
    for i, w in enumerate(witnesses):
        d = model.distance(z, w)
        if d < best:
            best, arg = d, i
    return best, arg


def halfspace_contains(model: MetricModel, spec: HalfspaceSpec, z) -> bool:
    model.validate(z)
    d_w, _ = distance_to_set(model, z, spec.witnesses)
    return _leq(d_w, model.distance(z, spec.basepoint) + spec.slack)


def halfspace_margin(model: MetricModel, spec: HalfspaceSpec, z) -> float:
    """``d(z, W) - d(z, x0) - C``; nonpositive exactly on the halfspace."""
    model.validate(z)
    d_w, _ = distance_to_set(model, z, spec.witnesses)
    return d_w - model.distance(z, spec.basepoint) - spec.slack


def in_dirichlet(model: MetricModel, z, target, base) -> bool:
    """Membership in the two-point halfspace ``{z : d(z, target) <= d(z, base)}``."""
    return _leq(model.distance(z, target), model.distance(z, base))


def gromov_product(model: MetricModel, x0, x, z) -> float:
    """``(x|z)_{x0}``; nonnegative up to rounding by the triangle inequality."""
    for p in (x0, x, z):
        model.validate(p)
    return 0.5 * (model.distance(x, x0) + model.distance(z, x0) - model.distance(x, z))


def detect_special_indices(lengths: Sequence[float], C: float) -> list[int]:
    """Indices ``n`` with ``lengths[n] > lengths[m] - C`` for every ``m < n``.

    Index 0 is always returned for a nonempty sequence (no earlier terms).
    Dominating every earlier term is the same as dominating the running
    maximum, so this is a single pass.
    """
    if C < 0:
        raise ValueError("slack C must be nonnegative")
    out: list[int] = []
    running = -math.inf
    for n, a in enumerate(lengths):
        if a > running - C:
            out.append(n)
        running = max(running, a)
    return out


class Classification(str, Enum):
    BOUNDED = "Bounded"
    UNBOUNDED = "Unbounded"


@dataclass(frozen=True)
class OrbitRecord:
    points: tuple
    lengths: tuple
    special_indices: tuple
    classification: Classification
    slack: float = 0.0
    bound_threshold: float = math.inf
    extra: dict = field(default_factory=dict, compare=False)


def semicontraction_check(model: MetricModel, f: Callable, samples: Sequence) -> tuple[bool, float]:
    """Check ``d(f x, f y) <= d(x, y)`` on sampled pairs; return ``(ok, worst ratio)``.

    Pairs at distance zero only contribute to ``ok`` (their ratio is undefined).
    """
    if len(samples) == 0:
        raise ValueError("need at least one sample pair")
    ok, worst = True, 0.0
    for x, y in samples:
        dxy = model.distance(x, y)
        dfxfy = model.distance(f(x), f(y))
        if dfxfy > dxy * (1 + EPS_REL) + 1e-12:
            ok = False
        if dxy > 0:
            worst = max(worst, dfxfy / dxy)
    return ok, worst


def generate_orbit(
    model: MetricModel,
    f: Callable,
    x0,
    n: int,
    C: float = 0.0,
    bound_threshold: float = math.inf,
    samples: Sequence | None = None,
) -> OrbitRecord:
    """Orbit ``x0, f(x0), ..., f^{n-1}(x0)`` with lengths and special indices.

    Special indices are those of :func:`detect_special_indices` whose length
    exceeds ``bound_threshold``; the orbit is classified unbounded iff some
    length exceeds the threshold.  If ``samples`` is given, ``f`` is first
    checked to be a semicontraction on them.
    """
    if n < 1:
        raise ValueError("orbit length n must be >= 1")
    if samples is not None:
        ok, ratio = semicontraction_check(model, f, samples)
        if not ok:
            raise PreconditionError(f"map is not a semicontraction (ratio {ratio:.6g})")
    model.validate(x0)
    points = [x0]
    for _ in range(n - 1):
        nxt = f(points[-1])
        model.validate(nxt)
        points.append(nxt)
    lengths = [model.distance(p, x0) for p in points]
    special = [i for i in detect_special_indices(lengths, C) if lengths[i] > bound_threshold]
    cls = Classification.UNBOUNDED if max(lengths) > bound_threshold else Classification.BOUNDED
    return OrbitRecord(tuple(points), tuple(lengths), tuple(special), cls, C, bound_threshold)
