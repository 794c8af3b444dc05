from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isodyn.cat0 import Cat0Isometry, Cat0Point, Cat0Space
from isodyn.core import (
    Classification,
    DomainError,
    HalfspaceSpec,
    PreconditionError,
    detect_special_indices,
    generate_orbit,
    gromov_product,
    halfspace_contains,
    halfspace_margin,
    in_dirichlet,
    semicontraction_check,
)

R2 = Cat0Space.from_name("r2")


def _p(*xs):
    return Cat0Point(np.array(xs, dtype=float))


def _brute_special(lengths, C):
    return [n for n in range(len(lengths)) if all(lengths[n] > lengths[m] - C for m in range(n))]


def test_halfspace_examples():
    spec = HalfspaceSpec((_p(2, 0),), 0.0, _p(0, 0))
    assert halfspace_contains(R2, spec, _p(3, 0))
    assert not halfspace_contains(R2, spec, _p(-1, 0))
    assert halfspace_margin(R2, spec, _p(-1, 0)) == pytest.approx(2.0)


def test_witness_is_member():
    w = _p(4.0, -7.0)
    spec = HalfspaceSpec((_p(1, 1), w), 0.0, _p(0, 0))
    assert halfspace_contains(R2, spec, w)


def test_tie_counts_as_member():
    spec = HalfspaceSpec((_p(2, 0),), 0.0, _p(0, 0))
    assert halfspace_contains(R2, spec, _p(1, 5))


def test_empty_witnesses_rejected():
    with pytest.raises(ValueError):
        HalfspaceSpec((), 0.0, _p(0, 0))


def test_invalid_point_is_domain_error():
    spec = HalfspaceSpec((_p(2, 0),), 0.0, _p(0, 0))
    with pytest.raises(DomainError):
        halfspace_contains(R2, spec, _p(1, 2, 3))


def test_gromov_examples():
    x0 = _p(0, 0)
    assert gromov_product(R2, x0, _p(1, 0), _p(1, 0)) == pytest.approx(1.0)
    assert gromov_product(R2, x0, _p(1, 0), _p(-1, 0)) == pytest.approx(0.0, abs=1e-15)
    # direct arithmetic: (1 + 1 - sqrt 2) / 2
    assert gromov_product(R2, x0, _p(1, 0), _p(0, 1)) == pytest.approx(0.2928932188134524, rel=1e-12)


def test_special_indices_examples():
    assert detect_special_indices([1, 2, 3, 4], 0) == [0, 1, 2, 3]
    assert detect_special_indices([1, 3, 2, 4, 3, 5], 1) == [0, 1, 3, 5]
    assert detect_special_indices([5, 4, 3, 2, 1], 0) == [0]
    assert detect_special_indices([], 0) == []
    with pytest.raises(ValueError):
        detect_special_indices([1, 2], -1)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(-20, 20), max_size=60), st.integers(0, 5))
def test_special_indices_match_brute_force(lengths, C):
    assert detect_special_indices(lengths, C) == _brute_special(lengths, C)


def test_special_indices_long_random():
    rng = np.random.default_rng(11)
    for _ in range(5):
        seq = np.cumsum(rng.normal(0.1, 1.0, 1000)).tolist()
        C = float(rng.uniform(0, 3))
        assert detect_special_indices(seq, C) == _brute_special(seq, C)


def test_orbit_translation_unbounded():
    f = Cat0Isometry.euclidean(shift=(1.0, 0.0))
    rec = generate_orbit(R2, f, R2.basepoint(), 10, C=0, bound_threshold=5)
    assert rec.classification is Classification.UNBOUNDED
    assert list(rec.special_indices) == [6, 7, 8, 9]
    assert rec.lengths == tuple(float(k) for k in range(10))


def test_orbit_rotation_bounded():
    rot = np.array([[0.0, -1.0], [1.0, 0.0]])
    f = Cat0Isometry.euclidean(rot, (0.0, 0.0))
    rec = generate_orbit(R2, f, _p(1, 0), 12, C=0, bound_threshold=5)
    assert rec.classification is Classification.BOUNDED
    assert rec.special_indices == ()


def test_orbit_lengths_match_distance():
    f = Cat0Isometry.euclidean(shift=(0.3, -0.2))
    x0 = _p(1, 1)
    rec = generate_orbit(R2, f, x0, 20)
    for p, a in zip(rec.points, rec.lengths):
        assert a == R2.distance(p, x0)


def test_orbit_rejects_non_semicontraction():
    def f(p):
        return Cat0Point(2 * p.euclid)

    samples = [(_p(0, 0), _p(1, 0)), (_p(1, 1), _p(2, 3))]
    with pytest.raises(PreconditionError):
        generate_orbit(R2, f, _p(1, 0), 5, samples=samples)


def test_orbit_domain_error():
    with pytest.raises(DomainError):
        generate_orbit(R2, lambda p: Cat0Point(np.zeros(3)), R2.basepoint(), 3)


def test_semicontraction_examples():
    rng = np.random.default_rng(5)
    pairs = [(R2.random_point(rng), R2.random_point(rng)) for _ in range(50)]
    g = R2.random_isometry(rng)
    ok, ratio = semicontraction_check(R2, g, pairs)
    assert ok and ratio == pytest.approx(1.0, abs=1e-9)
    ok, ratio = semicontraction_check(R2, lambda p: Cat0Point(2 * p.euclid), pairs)
    assert not ok and ratio == pytest.approx(2.0)
    with pytest.raises(ValueError):
        semicontraction_check(R2, g, [])


def test_in_dirichlet():
    assert in_dirichlet(R2, _p(3, 0), _p(2, 0), _p(0, 0))
    assert not in_dirichlet(R2, _p(-3, 0), _p(2, 0), _p(0, 0))


coords = st.floats(-50, 50, allow_nan=False)


@settings(max_examples=150, deadline=None)
@given(st.lists(st.tuples(coords, coords), min_size=1, max_size=5), st.tuples(coords, coords),
       st.floats(0, 5), st.floats(0, 5))
def test_monotone_in_slack_and_witnesses(ws, z, c1, dc):
    x0 = R2.basepoint()
    z = _p(*z)
    small = HalfspaceSpec(tuple(_p(*w) for w in ws[:1]), c1, x0)
    if halfspace_contains(R2, small, z):
        assert halfspace_contains(R2, HalfspaceSpec(small.witnesses, c1 + dc, x0), z)
        assert halfspace_contains(R2, HalfspaceSpec(tuple(_p(*w) for w in ws), c1, x0), z)


@settings(max_examples=150, deadline=None)
@given(st.tuples(coords, coords), st.tuples(coords, coords), st.tuples(coords, coords), st.floats(0, 10))
def test_basepoint_sandwich(w, x, z, C):
    w, x, z, x0 = _p(*w), _p(*x), _p(*z), R2.basepoint()
    dxx0 = R2.distance(x, x0)
    inner = halfspace_contains(R2, HalfspaceSpec((w,), C - dxx0, x0), z)
    mid = halfspace_contains(R2, HalfspaceSpec((w,), C, x), z)
    outer = halfspace_contains(R2, HalfspaceSpec((w,), C + dxx0, x0), z)
    assert (not inner) or mid
    assert (not mid) or outer


@settings(max_examples=150, deadline=None)
@given(st.tuples(coords, coords), st.tuples(coords, coords), st.floats(0, 10))
def test_gromov_bound(w, z, C):
    w, z, x0 = _p(*w), _p(*z), R2.basepoint()
    if halfspace_contains(R2, HalfspaceSpec((w,), C, x0), z):
        assert gromov_product(R2, x0, z, w) >= 0.5 * (R2.distance(w, x0) - C) - 1e-9 * (1 + R2.distance(w, x0))
    two_point = in_dirichlet(R2, z, w, x0)
    assert two_point == (gromov_product(R2, x0, w, z) >= 0.5 * R2.distance(w, x0) - 1e-9 * max(1.0, R2.distance(w, x0)))


def test_gromov_nonnegative_random():
    rng = np.random.default_rng(0)
    for _ in range(200):
        a, b, c = (R2.random_point(rng) for _ in range(3))
        assert gromov_product(R2, a, b, c) >= -1e-9
