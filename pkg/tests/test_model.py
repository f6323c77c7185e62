import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from redform.errors import ValidationError
from redform.model import ReducedForm, conditional_others, load_instance, profile_space

from conftest import make_instance, random_instance

I3_DOC = {
    "bidders": 1,
    "items": 1,
    "types": [[{"values": ["1/2"], "prob": "1/2"}, {"values": ["1"], "prob": "1/2"}]],
    "feasibility": {"kind": "single_item"},
}


def test_load_single_bidder():
    inst = load_instance(I3_DOC)
    assert inst.m == 1 and inst.n == 1
    assert [t.values[0] for t in inst.type_spaces[0]] == [Fraction(1, 2), Fraction(1)]
    assert inst.scale == 1


def test_load_rejects_bad_prob_sum():
    doc = {
        "bidders": 1, "items": 1,
        "types": [[{"values": ["1"], "prob": "1/3"}, {"values": ["1/2"], "prob": "1/3"}]],
        "feasibility": {"kind": "single_item"},
    }
    with pytest.raises(ValidationError, match="sum to 2/3"):
        load_instance(doc)


def test_load_rejects_zero_prob():
    doc = {
        "bidders": 1, "items": 1,
        "types": [[{"values": ["1"], "prob": "0"}, {"values": ["1/2"], "prob": "1"}]],
        "feasibility": {"kind": "single_item"},
    }
    with pytest.raises(ValidationError, match="zero or negative"):
        load_instance(doc)


def test_load_rejects_ragged_values():
    doc = {
        "bidders": 1, "items": 2,
        "types": [[{"values": ["1"], "prob": "1"}]],
        "feasibility": {"kind": "per_item_supply"},
    }
    with pytest.raises(ValidationError, match="values"):
        load_instance(doc)


def test_load_rejects_unknown_feasibility():
    doc = dict(I3_DOC, feasibility={"kind": "matroid"})
    with pytest.raises(ValidationError, match="unknown feasibility kind"):
        load_instance(doc)


def test_normalization_records_scale():
    doc = {
        "bidders": 1, "items": 1,
        "types": [[{"values": ["1"], "prob": "1/2"}, {"values": ["2"], "prob": "1/2"}]],
        "feasibility": {"kind": "single_item"},
    }
    inst = load_instance(doc)
    assert inst.scale == 2
    assert [t.values[0] for t in inst.type_spaces[0]] == [Fraction(1, 2), Fraction(1)]


def test_decimal_literals_parse_exactly():
    doc = {
        "bidders": 1, "items": 1,
        "types": [[{"values": ["0.1"], "prob": "0.25"}, {"values": ["1"], "prob": "0.75"}]],
        "feasibility": {"kind": "single_item"},
    }
    inst = load_instance(doc)
    assert inst.distribution.probs[0] == (Fraction(1, 4), Fraction(3, 4))
    assert inst.type_spaces[0][0].values[0] == Fraction(1, 10)


def test_profile_space_product(i1):
    space = profile_space(i1)
    assert len(space) == 4
    assert all(q == Fraction(1, 4) for _, q in space)
    assert sum(q for _, q in space) == 1


def test_profile_space_point(i2):
    assert profile_space(i2) == (((0, 0), Fraction(1)),)


def test_profile_space_correlated(i1_matching):
    assert profile_space(i1_matching) == (
        ((0, 0), Fraction(1, 2)), ((1, 1), Fraction(1, 2))
    )


def test_conditionals_independent_of_type(i1):
    assert conditional_others(i1, 0, 0) == conditional_others(i1, 0, 1)


def test_conditionals_bayes_rule():
    inst = make_instance(
        m=2, n=1,
        values=[[["1/2"], ["1"]], [["1/2"], ["1"]]],
        joint=[((0, 0), "1/2"), ((0, 1), "1/4"), ((1, 1), "1/4")],
    )
    cond = dict(conditional_others(inst, 0, 0))
    assert cond == {(0,): Fraction(2, 3), (1,): Fraction(1, 3)}


def test_conditionals_zero_probability_condition():
    # a type with zero marginal is rejected at load, so conditioning on it
    # can only be expressed as an unknown type index
    with pytest.raises(ValidationError, match="zero marginal"):
        make_instance(
            m=2, n=1,
            values=[[["1/2"], ["1"]], [["1/2"]]],
            joint=[((0, 0), "1")],
        )
    inst = make_instance(m=2, n=1, values=[[["1/2"]], [["1"]]],
                         joint=[((0, 0), "1")])
    with pytest.raises(ValidationError, match="no type"):
        conditional_others(inst, 0, 1)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_profile_probabilities_sum_to_one(seed):
    inst = random_instance(random.Random(seed))
    assert sum(q for _, q in profile_space(inst)) == 1
    for _, q in profile_space(inst):
        assert q > 0


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_conditionals_sum_to_one(seed):
    inst = random_instance(random.Random(seed))
    for i in range(inst.m):
        for a in range(inst.num_types(i)):
            assert sum(q for _, q in conditional_others(inst, i, a)) == 1


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_round_trip_serialization(seed):
    # loading normalizes values by their maximum; on loaded instances the
    # serialize/load cycle is an exact identity
    inst = load_instance(random_instance(random.Random(seed)).to_json())
    again = load_instance(inst.to_json())
    assert again == inst


def test_round_trip_with_scale_and_budgets():
    doc = {
        "bidders": 2, "items": 1,
        "types": [
            [{"values": ["1"], "prob": "1/2"}, {"values": ["4"], "prob": "1/2"}],
            [{"values": ["2"], "prob": "1"}],
        ],
        "feasibility": {"kind": "single_item"},
        "budgets": ["1", "3"],
    }
    inst = load_instance(doc)
    assert inst.scale == 4
    assert inst.budgets == (Fraction(1, 4), Fraction(3, 4))
    assert load_instance(inst.to_json()) == inst


def test_reduced_form_validation(i2):
    with pytest.raises(ValidationError, match="entries"):
        ReducedForm((Fraction(1, 2),)).validate_for(i2)
    with pytest.raises(ValidationError, match="0,1"):
        ReducedForm((Fraction(2), Fraction(0))).validate_for(i2)
    rf = ReducedForm.from_json(i2, {"rf": ["1/2", "1/2"]})
    assert rf.entries == (Fraction(1, 2), Fraction(1, 2))


def test_insert_type(i1):
    assert i1.insert_type((1,), 0, 0) == (0, 1)
    assert i1.insert_type((1,), 1, 0) == (1, 0)
