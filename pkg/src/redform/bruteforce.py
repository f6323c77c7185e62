"""Independent ground-truth oracles: rule enumeration, hull membership,
per-profile optimal revenue.

Everything here is enumeration plus explicit LPs, deliberately sharing no
logic with the separation-oracle path it cross-validates. Budgets are
enumeration caps that fail loudly; this module never approximates.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import NamedTuple, Sequence

from .errors import CapExceeded, ValidationError
from .feasibility import enumerate_allocations
from .model import Instance, ReducedForm, SecondOrderReducedForm
from . import ratlp

_ZERO = Fraction(0)

DEFAULT_RULE_CAP = 10**6


@dataclass(frozen=True)
class DeterministicRule:
    """A total map from profiles to feasible allocations."""

    profiles: tuple
    choices: tuple  # one allocation per profile, same order

    @cached_property
    def _map(self) -> dict:
        return dict(zip(self.profiles, self.choices))

    def __call__(self, profile):
        return self._map[tuple(profile)]


def _domain_profiles(inst: Instance, domain: str):
    if domain == "support":
        return tuple(p for p, _ in inst.profiles)
    if domain == "full":
        return inst.full_profiles
    raise ValidationError(f"unknown rule domain {domain!r}")


def count_deterministic_rules(inst: Instance, domain: str = "support") -> int:
    members = enumerate_allocations(inst.feasibility, inst.m, inst.n)
    return len(members) ** len(_domain_profiles(inst, domain))


def enumerate_deterministic_rules(inst: Instance, domain: str = "support",
                                  cap: int = DEFAULT_RULE_CAP):
    """Yield every feasible deterministic rule, in a fixed order."""
    profiles = _domain_profiles(inst, domain)
    members = enumerate_allocations(inst.feasibility, inst.m, inst.n)
    total = len(members) ** len(profiles)
    if total > cap:
        raise CapExceeded(
            f"{len(members)}^{len(profiles)} = {total} deterministic rules exceed cap {cap}"
        )
    for combo in itertools.product(members, repeat=len(profiles)):
        yield DeterministicRule(profiles=profiles, choices=combo)


def _rf_contributions(inst: Instance):
    """contrib[profile_index][member_index] = [(coord, mass)] so the reduced
    form of any rule is the sum of its per-profile picks."""
    members = enumerate_allocations(inst.feasibility, inst.m, inst.n)
    table = []
    for profile, q in inst.profiles:
        row = []
        for member in members:
            entry = []
            for i, j in member:
                k = inst.coord_index[(i, j, profile[i])]
                entry.append((k, q / inst.type_prob(i, profile[i])))
            row.append(entry)
        table.append(row)
    return members, table


def reduced_forms_of_all_rules(inst: Instance, cap: int = DEFAULT_RULE_CAP):
    """(rule, ReducedForm) for every deterministic rule on the support."""
    members, table = _rf_contributions(inst)
    profiles = tuple(p for p, _ in inst.profiles)
    total = len(members) ** len(profiles)
    if total > cap:
        raise CapExceeded(
            f"{len(members)}^{len(profiles)} = {total} deterministic rules exceed cap {cap}"
        )
    member_index = {m: idx for idx, m in enumerate(members)}
    for combo in itertools.product(members, repeat=len(profiles)):
        acc = [_ZERO] * inst.dim
        for ell, member in enumerate(combo):
            for k, mass in table[ell][member_index[member]]:
                acc[k] += mass
        yield DeterministicRule(profiles=profiles, choices=combo), ReducedForm(tuple(acc))


class MembershipResult(NamedTuple):
    feasible: bool
    weights: dict | None  # LP point when feasible


def membership_lp(rf: ReducedForm, inst: Instance, over_rules: bool = False,
                  cap: int = DEFAULT_RULE_CAP) -> MembershipResult:
    """Exact hull membership for a reduced form.

    The default formulation keeps one simplex of allocation choices per
    support profile (extreme points are exactly the deterministic rules, so
    the polytope is identical to the hull of their reduced forms) and asks
    whether the target is a feasible combination. over_rules instead builds
    the literal convex-combination LP with one weight per enumerated rule;
    it is exponentially bigger and exists for cross-checks at tiny sizes.
    """
    rf.validate_for(inst)
    if over_rules:
        rules = list(reduced_forms_of_all_rules(inst, cap=cap))
        lp = ratlp.LinearProgram(maximize=False)
        for idx in range(len(rules)):
            lp.add_var(f"lam[{idx}]", lo=0)
        lp.add_eq({f"lam[{idx}]": 1 for idx in range(len(rules))}, 1)
        for k in range(inst.dim):
            coeffs = {}
            for idx, (_, r) in enumerate(rules):
                if r.entries[k]:
                    coeffs[f"lam[{idx}]"] = r.entries[k]
            lp.add_eq(coeffs, rf.entries[k])
        res = ratlp.solve(lp)
        if res.status != ratlp.OPTIMAL:
            return MembershipResult(False, None)
        return MembershipResult(True, {k: v for k, v in res.point.items() if v})

    members, table = _rf_contributions(inst)
    num_profiles = len(table)
    lp = ratlp.LinearProgram(maximize=False)
    for ell in range(num_profiles):
        for a in range(len(members)):
            lp.add_var(f"lam[{ell},{a}]", lo=0)
    for ell in range(num_profiles):
        lp.add_eq({f"lam[{ell},{a}]": 1 for a in range(len(members))}, 1)
    rows: list = [dict() for _ in range(inst.dim)]
    for ell in range(num_profiles):
        for a in range(len(members)):
            name = f"lam[{ell},{a}]"
            for k, mass in table[ell][a]:
                rows[k][name] = rows[k].get(name, _ZERO) + mass
    for k in range(inst.dim):
        lp.add_eq(rows[k], rf.entries[k])
    res = ratlp.solve(lp)
    if res.status != ratlp.OPTIMAL:
        return MembershipResult(False, None)
    return MembershipResult(True, {k: v for k, v in res.point.items() if v})


class RevenueResult(NamedTuple):
    revenue: Fraction
    reduced_form: ReducedForm
    prices: dict  # (bidder, type) -> Fraction
    point: dict


def optimal_per_profile_lp(inst: Instance, budgets: Sequence | None = None,
                           cap: int = DEFAULT_RULE_CAP) -> RevenueResult:
    """Exact optimal BIC + interim-IR revenue via the profile-explicit LP.

    One distribution over feasible allocations per support profile plus one
    interim price per (bidder, type); truthfulness and participation are
    explicit rows. Ground truth for the reduced-form revenue program.
    """
    if not inst.independent:
        raise ValidationError("per-profile revenue LP requires independent bidders")
    members, table = _rf_contributions(inst)
    profiles = [p for p, _ in inst.profiles]
    if len(members) * len(profiles) > cap:
        raise CapExceeded("per-profile LP exceeds enumeration cap")

    lp = ratlp.LinearProgram(maximize=True)
    for ell in range(len(profiles)):
        for a in range(len(members)):
            lp.add_var(f"x[{ell},{a}]", lo=0)
    objective = {}
    for i in range(inst.m):
        for v in range(inst.num_types(i)):
            lp.add_var(f"p[{i},{v}]")
            objective[f"p[{i},{v}]"] = inst.type_prob(i, v)
    lp.set_objective(objective)

    for ell in range(len(profiles)):
        lp.add_eq({f"x[{ell},{a}]": 1 for a in range(len(members))}, 1)

    # interim allocation probability of coordinate (i,j,A) as x-coefficients
    pi_expr: list = [dict() for _ in range(inst.dim)]
    for ell in range(len(profiles)):
        for a in range(len(members)):
            for k, mass in table[ell][a]:
                name = f"x[{ell},{a}]"
                pi_expr[k][name] = pi_expr[k].get(name, _ZERO) + mass

    def utility_expr(i: int, true_type: int, reported: int):
        """Expected utility of true_type reporting `reported`, as LP coeffs."""
        coeffs: dict = {}
        for j in range(inst.n):
            value = inst.value(i, true_type, j)
            if value:
                k = inst.coord_index[(i, j, reported)]
                for name, mass in pi_expr[k].items():
                    coeffs[name] = coeffs.get(name, _ZERO) + value * mass
        coeffs[f"p[{i},{reported}]"] = coeffs.get(f"p[{i},{reported}]", _ZERO) - 1
        return coeffs

    for i in range(inst.m):
        for v in range(inst.num_types(i)):
            truthful = utility_expr(i, v, v)
            lp.add_ge(truthful, 0)  # interim IR
            for w in range(inst.num_types(i)):
                if w == v:
                    continue
                mis = utility_expr(i, v, w)
                row = dict(truthful)
                for name, c in mis.items():
                    row[name] = row.get(name, _ZERO) - c
                lp.add_ge(row, 0)  # BIC at delta = 0
            if budgets is not None:
                lp.add_le({f"p[{i},{v}]": 1}, Fraction(budgets[i]))

    res = ratlp.solve(lp)
    if res.status != ratlp.OPTIMAL:
        raise ValidationError(f"per-profile revenue LP is {res.status}")
    rf_entries = []
    for k in range(inst.dim):
        rf_entries.append(sum(
            (mass * res.point[name] for name, mass in pi_expr[k].items()), _ZERO
        ))
    prices = {
        (i, v): res.point[f"p[{i},{v}]"]
        for i in range(inst.m) for v in range(inst.num_types(i))
    }
    return RevenueResult(
        revenue=res.value, reduced_form=ReducedForm(tuple(rf_entries)),
        prices=prices, point=res.point,
    )


# -- second-order ground truth ------------------------------------------------


def _sorf_contributions(inst: Instance):
    """Per (full-domain profile, member) contributions to second-order coords."""
    members = enumerate_allocations(inst.feasibility, inst.m, inst.n)
    profiles = inst.full_profiles
    table = []
    for profile in profiles:
        row = []
        for member in members:
            entry = []
            for i, j in member:
                partial = tuple(b for k, b in enumerate(profile) if k != i)
                for b in range(inst.num_types(i)):
                    mass = inst.conditional_partial_prob(i, b, partial)
                    if mass:
                        k = inst.so_coord_index[(i, j, profile[i], b)]
                        entry.append((k, mass))
            row.append(entry)
        table.append(row)
    return members, profiles, table


def enumerate_sorf_polytope(inst: Instance, cap: int = DEFAULT_RULE_CAP):
    """(rule, SecondOrderReducedForm) for every full-domain deterministic rule."""
    members, profiles, table = _sorf_contributions(inst)
    total = len(members) ** len(profiles)
    if total > cap:
        raise CapExceeded(
            f"{len(members)}^{len(profiles)} = {total} deterministic rules exceed cap {cap}"
        )
    member_index = {m: idx for idx, m in enumerate(members)}
    for combo in itertools.product(members, repeat=len(profiles)):
        acc = [_ZERO] * inst.so_dim
        for ell, member in enumerate(combo):
            for k, mass in table[ell][member_index[member]]:
                acc[k] += mass
        yield (DeterministicRule(profiles=profiles, choices=combo),
               SecondOrderReducedForm(tuple(acc)))


def sorf_membership_lp(form: SecondOrderReducedForm, inst: Instance,
                       cap: int = DEFAULT_RULE_CAP) -> MembershipResult:
    """Exact membership in the feasible second-order polytope, by the same
    per-profile simplex construction over the full profile domain."""
    form.validate_for(inst)
    members, profiles, table = _sorf_contributions(inst)
    if len(members) * len(profiles) > cap:
        raise CapExceeded("second-order membership LP exceeds enumeration cap")
    lp = ratlp.LinearProgram(maximize=False)
    for ell in range(len(profiles)):
        for a in range(len(members)):
            lp.add_var(f"lam[{ell},{a}]", lo=0)
    for ell in range(len(profiles)):
        lp.add_eq({f"lam[{ell},{a}]": 1 for a in range(len(members))}, 1)
    rows: list = [dict() for _ in range(inst.so_dim)]
    for ell in range(len(profiles)):
        for a in range(len(members)):
            for k, mass in table[ell][a]:
                name = f"lam[{ell},{a}]"
                rows[k][name] = rows[k].get(name, _ZERO) + mass
    for k in range(inst.so_dim):
        lp.add_eq(rows[k], form.entries[k])
    res = ratlp.solve(lp)
    if res.status != ratlp.OPTIMAL:
        return MembershipResult(False, None)
    return MembershipResult(True, {k: v for k, v in res.point.items() if v})
