import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from redform.bruteforce import (
    enumerate_sorf_polytope,
    membership_lp,
    reduced_forms_of_all_rules,
    sorf_membership_lp,
)
from redform.errors import SolverFault, ValidationError
from redform.feasibility import enumerate_allocations
from redform.geometry import (
    corner_oracle,
    decompose,
    inner_oracle,
    second_order_decompose,
    second_order_feasibility,
    separation_oracle,
)
from redform.model import ReducedForm, SecondOrderReducedForm
from redform.vvcg import reduced_form_of, run_vvcg, second_order_reduced_form

from conftest import random_hull_point, random_instance, random_rational

F = Fraction


# -- inner oracle ---------------------------------------------------------------


def test_inner_oracle_accepts(i2):
    assert inner_oracle((F(1), F(1)), F(1), i2) is None
    assert inner_oracle((F(0), F(0)), F(0), i2) is None


def test_inner_oracle_emits_tie_broken_hyperplane(i2):
    plane = inner_oracle((F(1), F(1)), F(1, 2), i2)
    assert plane is not None
    # lexicographic tie-break gives bidder 1 the item
    assert plane.normal == (F(1), F(0), F(-1))
    assert plane.offset == 0


# -- separation -----------------------------------------------------------------


def test_separation_infeasible_total_probability(i2):
    verdict = separation_oracle(ReducedForm((F(3, 4), F(3, 4))), i2)
    assert not verdict.feasible
    assert verdict.witness_w == (F(1), F(1))
    assert verdict.witness_t == 1
    dotted = F(3, 4) + F(3, 4)
    assert dotted > verdict.witness_t


def test_separation_feasible_uniform_lottery(i2):
    assert separation_oracle(ReducedForm((F(1, 2), F(1, 2))), i2).feasible


def test_separation_feasible_half_vector(i1):
    assert separation_oracle(ReducedForm(tuple([F(1, 2)] * 4)), i1).feasible


# -- corner oracle ---------------------------------------------------------------


def test_corner_oracle_empty_input(i2):
    rule, rf = corner_oracle([], i2)
    assert rf == (F(1), F(0))
    assert rule.perturbed


def test_corner_oracle_on_given_hyperplane(i2):
    rule, rf = corner_oracle([((F(1), F(1)), F(1))], i2)
    assert rf == (F(1), F(0))


def test_corner_oracle_on_witness(i2):
    verdict = separation_oracle(ReducedForm((F(3, 4), F(3, 4))), i2)
    _, rf = corner_oracle([(verdict.witness_w, verdict.witness_t)], i2)
    assert sum(a * b for a, b in zip(rf, verdict.witness_w)) == verdict.witness_t


def test_corner_oracle_bad_hyperplane_faults(i2):
    # x_1 <= 2 is valid but never tight, so no corner can lie on it
    with pytest.raises(SolverFault, match="corner oracle"):
        corner_oracle([((F(1), F(0)), F(2))], i2)


# -- decomposition ----------------------------------------------------------------


def test_decompose_uniform_lottery(i2):
    decomposition = decompose(ReducedForm((F(1, 2), F(1, 2))), i2)
    assert sorted(p for p, _ in decomposition.components) == [F(1, 2), F(1, 2)]
    allocs = {run_vvcg(rule, i2, (0, 0)) for _, rule in decomposition.components}
    assert allocs == {frozenset({(0, 0)}), frozenset({(1, 0)})}


def test_decompose_corner_is_single_component(i1):
    _, rf = corner_oracle([], i1)
    decomposition = decompose(ReducedForm(rf), i1)
    assert len(decomposition.components) == 1
    assert decomposition.components[0][0] == 1


def test_decompose_infeasible_input_rejected(i2):
    with pytest.raises(ValidationError, match="infeasible"):
        decompose(ReducedForm((F(3, 4), F(3, 4))), i2)


def _assert_valid_decomposition(inst, point, decomposition):
    assert len(decomposition.components) <= inst.dim + 1
    total = F(0)
    acc = [F(0)] * inst.dim
    members = enumerate_allocations(inst.feasibility, inst.m, inst.n)
    for prob, rule in decomposition.components:
        assert prob > 0
        total += prob
        rf = reduced_form_of(rule, inst)
        acc = [x + prob * y for x, y in zip(acc, rf.entries)]
        # simplicity: unique argmax on every profile
        for profile, _ in inst.profiles:
            scores = [
                sum((rule.virtual[inst.coord_index[(i, j, profile[i])]]
                     for i, j in alloc), F(0))
                for alloc in members
            ]
            assert scores.count(max(scores)) == 1
    assert total == 1
    assert tuple(acc) == point.entries


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_decompose_random_hull_points(seed):
    rng = random.Random(seed)
    inst = random_instance(rng, max_m=2, max_n=2)
    point = random_hull_point(rng, inst)
    decomposition = decompose(point, inst)
    _assert_valid_decomposition(inst, point, decomposition)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_separation_matches_membership(seed):
    rng = random.Random(seed)
    inst = random_instance(rng, max_m=2)
    for _ in range(3):
        roll = rng.random()
        if roll < 0.4:
            point = random_hull_point(rng, inst)
        elif roll < 0.8:
            point = ReducedForm(tuple(
                F(rng.randint(0, 8), 8) for _ in range(inst.dim)
            ))
        else:
            hull = random_hull_point(rng, inst)
            point = ReducedForm(tuple(
                min(F(1), x + F(1, 5)) for x in hull.entries
            ))
        assert separation_oracle(point, inst).feasible == \
            membership_lp(point, inst).feasible


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_witness_is_valid_for_all_rules(seed):
    rng = random.Random(seed)
    inst = random_instance(rng, max_m=2, max_n=1)
    point = ReducedForm(tuple(
        min(F(1), random_rational(rng) + F(1, 2)) for _ in range(inst.dim)
    ))
    verdict = separation_oracle(point, inst)
    if verdict.feasible:
        return
    assert point.dot(verdict.witness_w) > verdict.witness_t
    for _, rf in reduced_forms_of_all_rules(inst, cap=3000):
        assert rf.dot(verdict.witness_w) <= verdict.witness_t


# -- second-order ------------------------------------------------------------------


def test_second_order_lift_of_feasible_rule(i1):
    rng = random.Random(2)
    point = random_hull_point(rng, i1)
    lifted = SecondOrderReducedForm(tuple(
        point.entries[i1.coord_index[(i, j, a)]] for (i, j, a, b) in i1.so_coords
    ))
    assert second_order_feasibility(lifted, i1).feasible


def test_second_order_infeasible_double_award(i1_matching):
    entries = []
    for (i, j, a, b) in i1_matching.so_coords:
        entries.append(F(1) if (a, b) == (0, 0) else F(0))
    form = SecondOrderReducedForm(tuple(entries))
    verdict = second_order_feasibility(form, i1_matching)
    assert not verdict.feasible
    assert not sorf_membership_lp(form, i1_matching).feasible


def test_second_order_zero_feasible(i1_matching):
    zero = SecondOrderReducedForm(tuple([F(0)] * i1_matching.so_dim))
    assert second_order_feasibility(zero, i1_matching).feasible


def test_second_order_separation_matches_bruteforce(i1_matching):
    rng = random.Random(9)
    inst = i1_matching
    points = []
    for _ in range(4):
        points.append(SecondOrderReducedForm(tuple(
            F(rng.randint(0, 4), 4) for _ in range(inst.so_dim)
        )))
    corners = [form for _, form in enumerate_sorf_polytope(inst, cap=200)]
    mix = [F(0)] * inst.so_dim
    for form in corners[:3]:
        for k, x in enumerate(form.entries):
            mix[k] += x / 3
    points.append(SecondOrderReducedForm(tuple(mix)))
    for point in points:
        assert second_order_feasibility(point, inst).feasible == \
            sorf_membership_lp(point, inst).feasible


def test_second_order_decompose_recombines(i1_matching):
    corners = []
    for _, form in enumerate_sorf_polytope(i1_matching, cap=200):
        corners.append(form)
        if len(corners) == 4:
            break
    target = [F(0)] * i1_matching.so_dim
    for form in corners:
        for k, x in enumerate(form.entries):
            target[k] += x / 4
    form = SecondOrderReducedForm(tuple(target))
    decomposition = second_order_decompose(form, i1_matching)
    assert len(decomposition.components) <= i1_matching.so_dim + 1
    acc = [F(0)] * i1_matching.so_dim
    for prob, rule in decomposition.components:
        part = second_order_reduced_form(rule, i1_matching)
        acc = [x + prob * y for x, y in zip(acc, part.entries)]
    assert tuple(acc) == form.entries
