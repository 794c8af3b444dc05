from __future__ import annotations

import itertools
import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isodyn.cayley import (
    FreeAbelian,
    FreeGroup,
    MatrixGroup,
    PingPongVerdict,
    cayley_halfspace_contains,
    group_distance,
    group_from_spec,
    halfspace_intersection_experiment,
    pingpong_check,
    pingpong_criterion,
    pingpong_lengths,
    random_walk,
    walk_from_increments,
    walk_special_indices,
)
from isodyn.core import PreconditionError
from oracles import free_reduce, special_indices_reference

F2 = FreeGroup(2)
Z2 = FreeAbelian(2)
x, X, y, Y = 1, -1, 2, -2
SANOV = [[[1, 2], [0, 1]], [[1, 0], [2, 1]]]

words = st.lists(st.sampled_from([x, X, y, Y]), max_size=30)


@given(words, words)
def test_free_multiply_matches_stack_reduction(u, v):
    assert F2.multiply(F2.element(u), F2.element(v)) == free_reduce(u + v)


@given(words, words, words)
def test_left_invariance(g, a, b):
    g, a, b = F2.element(g), F2.element(a), F2.element(b)
    assert group_distance(F2, F2.multiply(g, a), F2.multiply(g, b)) == group_distance(F2, a, b)


@given(st.lists(st.integers(-20, 20), min_size=2, max_size=2), st.lists(st.integers(-20, 20), min_size=2, max_size=2))
def test_abelian_metric(a, b):
    assert group_distance(Z2, tuple(a), tuple(b)) == abs(a[0] - b[0]) + abs(a[1] - b[1])


def test_word_length_examples():
    assert F2.word_length(F2.element([x, y, X])) == 3
    assert F2.word_length(F2.element([x, X])) == 0
    assert Z2.word_length((3, -4)) == 7


def test_matrix_group_bfs_matches_free_lengths():
    M = MatrixGroup(SANOV)
    gens = {x: M.generators[0], X: M.generators[1], y: M.generators[2], Y: M.generators[3]}
    seen = set()
    for n in range(7):
        for w in itertools.product([x, X, y, Y], repeat=n):
            r = free_reduce(w)
            if r in seen:
                continue
            seen.add(r)
            m = M.identity
            for a in r:
                m = M.multiply(m, gens[a])
            assert M.word_length(m, R_max=6) == len(r)
    assert M.word_length(M.element([[1, 100], [0, 1]]), R_max=6) is None


def test_matrix_group_concurrent_queries_match_sequential():
    targets = [MatrixGroup(SANOV).element(m) for m in ([[1, 4], [0, 1]], [[5, 2], [2, 1]], [[1, 0], [6, 1]])]
    seq = [MatrixGroup(SANOV).word_length(t, 6) for t in targets]
    M = MatrixGroup(SANOV)
    out = [None] * len(targets)

    def work(i):
        out[i] = M.word_length(targets[i], 6)

    threads = [threading.Thread(target=work, args=(i,)) for i in range(len(targets))]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert out == seq == [2, 2, 3]


def test_matrix_group_rejects_bad_generators():
    with pytest.raises(ValueError):
        MatrixGroup([[[2, 0], [0, 1]]])


def test_group_spec():
    assert isinstance(group_from_spec({"type": "free", "rank": 3}), FreeGroup)
    assert group_from_spec({"type": "abelian", "dim": 2}).dim == 2
    with pytest.raises(ValueError):
        group_from_spec({"type": "free", "rank": 2, "colour": 1})
    with pytest.raises(ValueError):
        group_from_spec({"type": "lattice"})


def test_halfspace_contains():
    assert cayley_halfspace_contains(F2, (x,), (x, x), C=0)
    assert not cayley_halfspace_contains(F2, (x,), (X,), C=0)
    assert cayley_halfspace_contains(F2, (x,), (X,), C=2)
    M = MatrixGroup(SANOV)
    assert cayley_halfspace_contains(M, M.generators[0], M.element([[1, 200], [0, 1]]), R_max=3) is None


def test_pingpong_free_generators_certified():
    rep = pingpong_check(F2, (x,), (y,), R=6)
    assert rep.verdict is PingPongVerdict.CERTIFIED and rep.witness is None


def test_pingpong_power_fails_at_x():
    rep = pingpong_check(F2, (x,), (x, x), R=6)
    assert rep.verdict is PingPongVerdict.FAILS and rep.witness == (x,)
    assert not pingpong_criterion(pingpong_lengths(F2, rep.witness, (x,), (x, x)))


def test_pingpong_abelian_fails_at_one_one():
    rep = pingpong_check(Z2, (1, 0), (0, 1), R=4)
    assert rep.verdict is PingPongVerdict.FAILS and rep.witness == (1, 1)
    assert rep.witness_lengths == pingpong_lengths(Z2, (1, 1), (1, 0), (0, 1))


def test_pingpong_matrix_group():
    M = MatrixGroup(SANOV)
    rep = pingpong_check(M, M.generators[0], M.generators[2], R=3, R_max=6)
    assert rep.verdict is PingPongVerdict.CERTIFIED


def test_pingpong_order_two_rejected():
    with pytest.raises(PreconditionError):
        pingpong_check(F2, (), (x,), R=3)
    with pytest.raises(PreconditionError):
        pingpong_check(Z2, (0, 0), (1, 0), R=3)


@settings(max_examples=30, deadline=None)
@given(words.filter(lambda w: len(free_reduce(w)) > 0), words.filter(lambda w: len(free_reduce(w)) > 0))
def test_pingpong_monotone_in_radius(g, h):
    g, h = F2.element(g), F2.element(h)
    verdicts = [pingpong_check(F2, g, h, R).verdict for R in (2, 3, 4)]
    for r, v in enumerate(verdicts):
        if v is PingPongVerdict.CERTIFIED:
            assert all(w is PingPongVerdict.CERTIFIED for w in verdicts[:r])


def test_geodesic_ray_walk():
    rec = walk_from_increments(F2, [0] * 50)
    assert rec.lengths.tolist() == list(range(51))
    assert walk_special_indices(rec, C=0, K=0) == list(range(51))
    rep = halfspace_intersection_experiment(rec, C=0, K=0)
    assert rep.common_witness and rep.extended[50] == 50


def test_walk_reproducible():
    a, b = random_walk(Z2, 500, 7), random_walk(Z2, 500, 7)
    assert np.array_equal(a.lengths, b.lengths) and a.elements == b.elements


def test_bounded_tail_walk_has_no_late_special_indices():
    Z1 = FreeAbelian(1)
    # climb to 5, return to 0, then oscillate between 0 and -1
    inc = [0] * 5 + [1] * 5 + [1, 0] * 20
    rec = walk_from_increments(Z1, inc)
    sp = walk_special_indices(rec, C=0, K=0)
    assert sp == special_indices_reference(Z1, rec.elements, 0, 0)
    assert sp == list(range(8))


@pytest.mark.parametrize("group", [FreeGroup(2), FreeGroup(3), FreeAbelian(2), FreeAbelian(3)], ids=repr)
@pytest.mark.parametrize("C,K", [(0, 0), (2, 10), (1, 3)])
def test_special_indices_match_reference(group, C, K):
    for seed in range(3):
        rec = random_walk(group, 300, seed)
        assert walk_special_indices(rec, C, K) == special_indices_reference(group, rec.elements, C, K)


def test_special_indices_match_reference_matrix_group():
    M = MatrixGroup(SANOV, default_radius=8)
    rec = random_walk(M, 8, 3)
    assert walk_special_indices(rec, 2, 3) == special_indices_reference(M, rec.elements, 2, 3)


def test_experiment_witnesses_verified_independently():
    rec = random_walk(F2, 400, 11)
    rep = halfspace_intersection_experiment(rec, C=2, K=10)
    assert rep.nontrivial
    for n in rep.nontrivial:
        assert rep.witness_ok[n]
        for k in range(11, rep.extended[n] + 1):
            assert cayley_halfspace_contains(F2, rec.elements[k], rec.elements[n], C=2)


def test_experiment_precondition():
    with pytest.raises(PreconditionError):
        halfspace_intersection_experiment(random_walk(F2, 15, 0), C=2, K=10)


@pytest.mark.slow
def test_free_group_speed():
    speeds = [random_walk(F2, 2000, s).lengths[-1] / 2000 for s in range(200)]
    assert 0.45 <= np.mean(speeds) <= 0.55
