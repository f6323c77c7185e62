import random
from fractions import Fraction

import pytest

from redform.feasibility import FeasibilitySpec, enumerate_allocations
from redform.model import BidderType, Correlated, Independent, Instance, ReducedForm


def make_instance(m, n, values, probs=None, joint=None, feasibility=None,
                  budgets=None, scale=Fraction(1)):
    """Direct construction helper; values[i][a] is a list of per-item values."""
    type_spaces = tuple(
        tuple(BidderType(values=tuple(Fraction(v) for v in vs), label=f"b{i}t{a}")
              for a, vs in enumerate(values[i]))
        for i in range(m)
    )
    if joint is not None:
        distribution = Correlated(joint=tuple(sorted(
            (tuple(p), Fraction(q)) for p, q in joint
        )))
    else:
        distribution = Independent(probs=tuple(
            tuple(Fraction(q) for q in probs[i]) for i in range(m)
        ))
    inst = Instance(
        m=m, n=n, type_spaces=type_spaces, distribution=distribution,
        feasibility=feasibility or FeasibilitySpec.single_item(),
        budgets=None if budgets is None else tuple(Fraction(b) for b in budgets),
        scale=Fraction(scale),
    )
    return inst.validate()


@pytest.fixture
def i1():
    """Two bidders, one item, two iid-uniform types each, single-item sale."""
    return make_instance(
        m=2, n=1,
        values=[[["1/2"], ["1"]], [["1/2"], ["1"]]],
        probs=[["1/2", "1/2"], ["1/2", "1/2"]],
    )


@pytest.fixture
def i2():
    """Two bidders with one type each, single-item sale: one profile."""
    return make_instance(
        m=2, n=1,
        values=[[["1"]], [["1"]]],
        probs=[["1"], ["1"]],
    )


@pytest.fixture
def i3():
    """One bidder, one item, values 1/2 and 1 uniformly."""
    return make_instance(
        m=1, n=1,
        values=[[["1/2"], ["1"]]],
        probs=[["1/2", "1/2"]],
    )


@pytest.fixture
def i1_matching():
    """Perfectly correlated variant of i1: types always match."""
    return make_instance(
        m=2, n=1,
        values=[[["1/2"], ["1"]], [["1/2"], ["1"]]],
        joint=[((0, 0), "1/2"), ((1, 1), "1/2")],
    )


def random_rational(rng: random.Random, max_den=8, lo=0, hi=1) -> Fraction:
    den = rng.randint(1, max_den)
    num = rng.randint(lo * den, hi * den)
    return Fraction(num, den)


def random_probs(rng: random.Random, count: int):
    weights = [rng.randint(1, 6) for _ in range(count)]
    total = sum(weights)
    return [Fraction(w, total) for w in weights]


def random_explicit_family(rng: random.Random, m, n, max_members=6):
    """A random explicit family, deliberately not necessarily downward-closed."""
    pairs = [(i, j) for i in range(m) for j in range(n)]
    members = set()
    if rng.random() < 0.7:
        members.add(frozenset())
    target = rng.randint(2, max_members)
    for _ in range(20 * max_members):
        if len(members) >= target:
            break
        size = rng.randint(1, min(len(pairs), 3))
        members.add(frozenset(rng.sample(pairs, size)))
    if not members:
        members.add(frozenset())
    return FeasibilitySpec.explicit(members)


def random_instance(rng: random.Random, max_m=3, max_n=2, max_types=2,
                    allow_builtin=True):
    m = rng.randint(1, max_m)
    n = rng.randint(1, max_n)
    values = [
        [[random_rational(rng) for _ in range(n)]
         for _ in range(rng.randint(1, max_types))]
        for _ in range(m)
    ]
    probs = [random_probs(rng, len(values[i])) for i in range(m)]
    if allow_builtin and n == 1 and rng.random() < 0.25:
        spec = FeasibilitySpec.single_item(allow_empty=rng.random() < 0.8)
    elif allow_builtin and rng.random() < 0.2:
        spec = rng.choice([
            FeasibilitySpec.per_item_supply(),
            FeasibilitySpec.unit_demand_matching(),
            FeasibilitySpec.public_project(),
        ])
    else:
        spec = random_explicit_family(rng, m, n)
    return make_instance(m=m, n=n, values=values, probs=probs, feasibility=spec)


def random_deterministic_rule_rf(rng: random.Random, inst) -> tuple:
    """Reduced form of a uniformly random feasible deterministic rule."""
    members = enumerate_allocations(inst.feasibility, inst.m, inst.n)
    acc = [Fraction(0)] * inst.dim
    for profile, q in inst.profiles:
        alloc = rng.choice(members)
        for i, j in alloc:
            k = inst.coord_index[(i, j, profile[i])]
            acc[k] += q / inst.type_prob(i, profile[i])
    return tuple(acc)


def random_hull_point(rng: random.Random, inst, max_rules=5) -> ReducedForm:
    """Random convex combination of a few deterministic-rule reduced forms."""
    count = rng.randint(1, max_rules)
    weights = random_probs(rng, count)
    acc = [Fraction(0)] * inst.dim
    for w in weights:
        rf = random_deterministic_rule_rf(rng, inst)
        acc = [x + w * y for x, y in zip(acc, rf)]
    return ReducedForm(entries=tuple(acc))
