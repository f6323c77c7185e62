"""Virtual VCG allocation rules and exact reduced-form computation.

A weight vector assigns a rational weight per (bidder, item, type). The
induced rule scales each weight by the type's probability to get a virtual
value, then awards the max-weight feasible allocation profile by profile.
The tie-break transform perturbs the virtual values so the maximizer is
unique on every profile (a "simple" rule) while never leaving the original
argmax set; this is the hinge that makes polytope corners implementable.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import lcm
from typing import Callable, NamedTuple, Sequence

from .errors import ValidationError
from .feasibility import max_weight_allocation
from .model import Instance, ReducedForm, SecondOrderReducedForm
from .ratlp import max_bit_length

_ZERO = Fraction(0)


@dataclass(frozen=True)
class VirtualVCGRule:
    """A (possibly tie-broken) virtual VCG rule.

    weights is the scaled representation in canonical coordinate order;
    virtual carries the per-type virtual values actually used to run the
    rule, so a rule stays executable even against a distribution other than
    the one it was derived from (proxy-built rules run on true profiles).
    """

    weights: tuple
    virtual: tuple
    perturbed: bool = False


class WValue(NamedTuple):
    rf: ReducedForm
    value: Fraction
    rule: VirtualVCGRule


def virtual_weights(w: Sequence, inst: Instance) -> tuple:
    """Per-type virtual values: weight divided by type probability."""
    return tuple(
        Fraction(w[k]) / inst.type_prob(i, a)
        for k, (i, j, a) in enumerate(inst.coords)
    )


def _perturb_numerators(values: Sequence, inst: Instance, positions) -> tuple:
    """Shared perturbation: put values over a common denominator and add a
    distinct power of two to each numerator, indexed by assignment position.

    positions yields the 1-indexed (bidder, item) pair for each entry. The
    total added mass is below the resolution of the original values, and the
    added bits are distinct per assignment, so argmax sets can only shrink
    to a unique member.
    """
    values = [Fraction(v) for v in values]
    common = 1
    for v in values:
        common = lcm(common, v.denominator)
    ell1 = max_bit_length(values)
    ell2 = max(
        max_bit_length([inst.type_prob(i, a)])
        for i in range(inst.m) for a in range(inst.num_types(i))
    )
    bits = inst.n * inst.total_types * (ell1 + ell2)
    out = []
    for v, (i1, j1) in zip(values, positions):
        numerator = v.numerator * (common // v.denominator)
        eps = Fraction(1, 2 ** (bits + inst.n * i1 + j1 + 1))
        out.append((numerator + eps) / common)
    return tuple(out)


def tie_break(w: Sequence, inst: Instance) -> tuple:
    """Perturbed weight vector whose rule is simple.

    Guarantees, checked by the test suite by explicit enumeration: (a) on
    every profile the argmax feasible allocation under the perturbed virtual
    values is unique; (b) that allocation has maximal weight under the
    original virtual values.
    """
    f = virtual_weights(w, inst)
    positions = [(i + 1, j + 1) for (i, j, a) in inst.coords]
    f_perturbed = _perturb_numerators(f, inst, positions)
    return tuple(
        fp * inst.type_prob(i, a)
        for fp, (i, j, a) in zip(f_perturbed, inst.coords)
    )


def rule_from_weights(w: Sequence, inst: Instance, perturb: bool = True) -> VirtualVCGRule:
    """Build a runnable rule; with perturb, apply tie_break first."""
    w = tuple(Fraction(x) for x in w)
    if perturb:
        w = tie_break(w, inst)
    return VirtualVCGRule(
        weights=w, virtual=virtual_weights(w, inst), perturbed=perturb
    )


def run_vvcg(rule: VirtualVCGRule, inst: Instance, profile):
    """Evaluate the rule on one profile: max-weight allocation of the
    virtual value matrix."""
    matrix = [
        [rule.virtual[inst.coord_index[(i, j, profile[i])]] for j in range(inst.n)]
        for i in range(inst.m)
    ]
    return max_weight_allocation(inst.feasibility, matrix, inst.m, inst.n)


def _as_profile_fn(rule, inst: Instance) -> Callable:
    if isinstance(rule, VirtualVCGRule):
        return lambda profile: run_vvcg(rule, inst, profile)
    if isinstance(rule, SecondOrderVCGRule):
        return lambda profile: run_sovcg(rule, inst, profile)
    if callable(rule):
        return rule
    raise ValidationError(f"cannot evaluate allocation rule of type {type(rule)!r}")


def reduced_form_of(rule, inst: Instance) -> ReducedForm:
    """Interim allocation probabilities of a rule under truthful play.

    Enumerates the support; conditional probability mass of each profile is
    credited to the (bidder, item, type) coordinates its allocation serves.
    A mixture (anything exposing .components as (prob, rule) pairs) is the
    probability-weighted sum of its parts.
    """
    components = getattr(rule, "components", None)
    if components is not None:
        acc = [_ZERO] * inst.dim
        for prob, part in components:
            rf = reduced_form_of(part, inst)
            acc = [x + prob * y for x, y in zip(acc, rf.entries)]
        return ReducedForm(entries=tuple(acc))
    fn = _as_profile_fn(rule, inst)
    acc = [_ZERO] * inst.dim
    for profile, q in inst.profiles:
        alloc = fn(profile)
        for i, j in alloc:
            k = inst.coord_index[(i, j, profile[i])]
            acc[k] += q / inst.type_prob(i, profile[i])
    return ReducedForm(entries=tuple(acc))


@lru_cache(maxsize=4096)
def _w_value_cached(inst: Instance, w: tuple) -> WValue:
    rule = rule_from_weights(w, inst, perturb=True)
    rf = reduced_form_of(rule, inst)
    return WValue(rf=rf, value=rf.dot(w), rule=rule)


def w_value(w: Sequence, inst: Instance) -> WValue:
    """Reduced form of the tie-broken rule for w, and its welfare value.

    The value is the dot product with the original w; by the tie-break
    consistency guarantee it does not depend on how ties were broken.
    """
    return _w_value_cached(inst, tuple(Fraction(x) for x in w))


# -- second-order rules -------------------------------------------------------


@dataclass(frozen=True)
class SecondOrderVCGRule:
    """Weights indexed by (bidder, item, reported type, true type).

    With simple=True the per-profile weight matrix is perturbed with the
    same assignment-indexed construction as tie_break, making the argmax
    unique on every profile.
    """

    weights: tuple
    simple: bool = True


def second_order_weights(w2: Sequence, inst: Instance, profile) -> list:
    """The m-by-n weight matrix the second-order rule uses on a profile:
    each entry aggregates the reported-type weights against the conditional
    probability of the others' types under each possible true type."""
    matrix = []
    for i in range(inst.m):
        partial = tuple(b for k, b in enumerate(profile) if k != i)
        row = []
        for j in range(inst.n):
            total = _ZERO
            for b in range(inst.num_types(i)):
                weight = w2[inst.so_coord_index[(i, j, profile[i], b)]]
                if weight:
                    total += Fraction(weight) * inst.conditional_partial_prob(i, b, partial)
            row.append(total)
        matrix.append(row)
    return matrix


def run_sovcg(rule: SecondOrderVCGRule, inst: Instance, profile):
    matrix = second_order_weights(rule.weights, inst, profile)
    if rule.simple:
        flat = [matrix[i][j] for i in range(inst.m) for j in range(inst.n)]
        positions = [(i + 1, j + 1) for i in range(inst.m) for j in range(inst.n)]
        flat = _perturb_numerators(flat, inst, positions)
        matrix = [
            [flat[i * inst.n + j] for j in range(inst.n)] for i in range(inst.m)
        ]
    return max_weight_allocation(inst.feasibility, matrix, inst.m, inst.n)


def second_order_reduced_form(rule, inst: Instance) -> SecondOrderReducedForm:
    """Allocation probabilities per (reported type, true type) pair.

    The rule must be total over the full product of type spaces: with
    correlated bidders the report can push evaluation outside the support.
    """
    fn = _as_profile_fn(rule, inst)
    memo: dict = {}

    def alloc_of(profile):
        if profile not in memo:
            memo[profile] = fn(profile)
        return memo[profile]

    acc = [_ZERO] * inst.so_dim
    for i in range(inst.m):
        for b in range(inst.num_types(i)):
            for partial, q in inst.conditional_others(i, b):
                for a in range(inst.num_types(i)):
                    alloc = alloc_of(inst.insert_type(partial, i, a))
                    for (ai, aj) in alloc:
                        if ai == i:
                            acc[inst.so_coord_index[(i, aj, a, b)]] += q
    return SecondOrderReducedForm(entries=tuple(acc))


def sovcg_collapse(w2: Sequence, inst: Instance) -> tuple:
    """Fold the true-type axis of a second-order rule for independent bidders.

    The collapsed first-order rule picks the same argmax set on every
    profile, because independence makes the conditional factor common to
    every assignment."""
    if not inst.independent:
        raise ValidationError("collapse is only defined for independent bidders")
    out = []
    for (i, j, a) in inst.coords:
        out.append(sum(
            (Fraction(w2[inst.so_coord_index[(i, j, a, b)]])
             for b in range(inst.num_types(i))), _ZERO,
        ))
    return tuple(out)
