"""Revenue optimization over the feasible reduced-form polytope, plus the
run-anywhere mechanism object it produces.

The revenue program keeps one interim allocation variable per (bidder, item,
type) and one interim price per (bidder, type); truthfulness (relaxed by
delta) and participation are explicit rows, and membership of the allocation
vector in the feasible polytope is enforced by the separation oracle as a
cut generator. In sampled mode the oracle runs over a seeded proxy instance
while revenue is still priced under the true distribution, and the final
prices are rebated by delta to absorb the proxy error.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .errors import ValidationError
from . import geometry
from .geometry import Decomposition
from .model import Instance, ReducedForm
from .rational import parse_rational, rat_str
from . import ratlp
from . import sampling
from . import vvcg

logger = logging.getLogger(__name__)

_ZERO = Fraction(0)

DEFAULT_EXACT_CAP = 10**6


@dataclass(frozen=True)
class PricingRule:
    """Expected payment per (bidder, type), in normalized value units."""

    prices: tuple  # prices[i][a]

    def get(self, i: int, a: int) -> Fraction:
        return self.prices[i][a]

    def shifted(self, delta: Fraction) -> "PricingRule":
        return PricingRule(prices=tuple(
            tuple(p - delta for p in row) for row in self.prices
        ))


@dataclass(frozen=True)
class Mechanism:
    """A distribution over simple rules plus an interim pricing rule."""

    decomposition: Decomposition
    prices: PricingRule
    delta: Fraction
    metadata: dict = field(default_factory=dict)


@dataclass
class RegretReport:
    """Per-(bidder, true type, misreport) gains from lying, and the worst
    normalized regret over all triples."""

    entries: list  # (i, true, misreport, gain, normalizer, normalized)
    epsilon_hat: Fraction
    raw_regret: Fraction


class RevenueSolution:
    def __init__(self, reduced_form: ReducedForm, prices: PricingRule,
                 revenue: Fraction, cuts: int):
        self.reduced_form = reduced_form
        self.prices = prices
        self.revenue = revenue
        self.cuts = cuts


def solve_revenue_lp(inst: Instance, delta, so_instance: Instance | None = None,
                     budgets: Sequence | None = None,
                     max_rounds: int | None = None) -> RevenueSolution:
    """Revenue-optimal delta-BIC interim-IR reduced form and prices.

    Feasibility of the allocation vector is enforced over so_instance (the
    instance itself in exact mode, a proxy in sampled mode); the objective
    always prices types by the true distribution.
    """
    if not inst.independent:
        raise ValidationError("revenue optimization requires independent bidders")
    delta = Fraction(delta)
    if delta < 0:
        raise ValidationError("delta must be non-negative")
    so_inst = inst if so_instance is None else so_instance
    if so_inst.coords != inst.coords:
        raise ValidationError("separation instance must share the type structure")

    lp = ratlp.LinearProgram(maximize=True)
    for k in range(inst.dim):
        lp.add_var(f"pi[{k}]", lo=0, hi=1)
    objective = {}
    for i in range(inst.m):
        for a in range(inst.num_types(i)):
            # prices are bounded by IR above; the explicit box only keeps the
            # cutting-plane region bounded and never binds at an optimum
            lp.add_var(f"p[{i},{a}]", lo=-(inst.n + 1), hi=inst.n + 1)
            objective[f"p[{i},{a}]"] = inst.type_prob(i, a)
    lp.set_objective(objective)

    def interim_value(i: int, true_type: int, reported: int) -> dict:
        coeffs = {}
        for j in range(inst.n):
            value = inst.value(i, true_type, j)
            if value:
                k = inst.coord_index[(i, j, reported)]
                coeffs[f"pi[{k}]"] = coeffs.get(f"pi[{k}]", _ZERO) + value
        return coeffs

    for i in range(inst.m):
        for v in range(inst.num_types(i)):
            truthful = interim_value(i, v, v)
            truthful[f"p[{i},{v}]"] = Fraction(-1)
            lp.add_ge(truthful, 0)  # interim IR
            for w in range(inst.num_types(i)):
                if w == v:
                    continue
                row = dict(truthful)
                mis = interim_value(i, v, w)
                for name, c in mis.items():
                    row[name] = row.get(name, _ZERO) - c
                row[f"p[{i},{w}]"] = row.get(f"p[{i},{w}]", _ZERO) + 1
                lp.add_ge(row, -delta)  # delta-relaxed truthfulness
            if budgets is not None:
                lp.add_le({f"p[{i},{v}]": 1}, Fraction(budgets[i]))

    backend = geometry._FirstOrderBackend(so_inst)

    def oracle(point):
        entries = tuple(point[f"pi[{k}]"] for k in range(inst.dim))
        verdict = geometry._separate(entries, backend)
        if verdict.feasible:
            return None
        coeffs = {
            f"pi[{k}]": w for k, w in enumerate(verdict.witness_w) if w
        }
        return coeffs, verdict.witness_t

    lp.oracle = oracle
    res = ratlp.solve_with_oracle(lp, max_rounds=max_rounds)
    if res.status != ratlp.OPTIMAL:
        raise ValidationError(f"revenue LP is {res.status}")
    rf = ReducedForm(entries=tuple(res.point[f"pi[{k}]"] for k in range(inst.dim)))
    prices = PricingRule(prices=tuple(
        tuple(res.point[f"p[{i},{a}]"] for a in range(inst.num_types(i)))
        for i in range(inst.m)
    ))
    logger.info("revenue LP optimal: %s after %d cuts", res.value, len(res.cuts))
    return RevenueSolution(
        reduced_form=rf, prices=prices, revenue=res.value, cuts=len(res.cuts)
    )


def run_pipeline(inst: Instance, epsilon, budgets: Sequence | None = None,
                 delta=None, seed: int = 0, exact: bool | None = None,
                 k: int | None = None, k_prime: int | None = None,
                 proxy_epsilon=None, exact_cap: int = DEFAULT_EXACT_CAP,
                 k_prime_cap: int = sampling.DEFAULT_K_PRIME_CAP) -> Mechanism:
    """End-to-end revenue maximization: choose exact or sampled feasibility,
    solve the revenue program, decompose the winning allocation vector into
    simple rules, and rebate delta from every price."""
    if not inst.independent:
        raise ValidationError("the pipeline requires independent bidders")
    epsilon = Fraction(epsilon)
    if delta is None:
        delta = epsilon / (2 * inst.m)
    delta = Fraction(delta)

    explicit_sampling = k is not None or k_prime is not None
    if exact is True and explicit_sampling:
        raise ValidationError("choose either exact mode or sampling parameters")
    if exact is None:
        exact = not explicit_sampling and len(inst.profiles) <= exact_cap

    if exact:
        so_inst = inst
        metadata = {"mode": "exact"}
    else:
        if proxy_epsilon is None:
            proxy_epsilon = delta / (2 * inst.n)
        proxy = sampling.build_proxy(
            inst, epsilon=proxy_epsilon, k=k, k_prime=k_prime, seed=seed,
            k_prime_cap=k_prime_cap,
        )
        so_inst = proxy.instance
        metadata = proxy.metadata()

    solution = solve_revenue_lp(inst, delta, so_instance=so_inst, budgets=budgets)
    decomposition = geometry.decompose(solution.reduced_form, so_inst)
    metadata.update({
        "epsilon": rat_str(epsilon),
        "delta": rat_str(delta),
        "lp_revenue": rat_str(solution.revenue),
        "seed": seed,
        "budgets": None if budgets is None else [rat_str(Fraction(b)) for b in budgets],
    })
    return Mechanism(
        decomposition=decomposition,
        prices=solution.prices.shifted(delta),
        delta=delta,
        metadata=metadata,
    )


def bic_regret(mech_or_pair, inst: Instance) -> RegretReport:
    """Exact misreporting gains against the true distribution.

    The reduced form is recomputed from the mechanism's own rules under the
    instance's distribution, so sampled-mode error shows up here honestly.
    Each gain is normalized by max(1, expected items won by the misreport).
    """
    rf, prices = _resolve_mechanism(mech_or_pair, inst)
    entries = []
    eps_hat = _ZERO
    raw = _ZERO
    for i in range(inst.m):
        for true_type in range(inst.num_types(i)):
            u_true = _interim_utility(inst, rf, prices, i, true_type, true_type)
            for mis in range(inst.num_types(i)):
                if mis == true_type:
                    continue
                u_mis = _interim_utility(inst, rf, prices, i, true_type, mis)
                gain = u_mis - u_true
                normalizer = max(
                    Fraction(1),
                    sum((rf.get(inst, i, j, mis) for j in range(inst.n)), _ZERO),
                )
                normalized = gain / normalizer
                entries.append((i, true_type, mis, gain, normalizer, normalized))
                if normalized > eps_hat:
                    eps_hat = normalized
                if gain > raw:
                    raw = gain
    return RegretReport(entries=entries, epsilon_hat=eps_hat, raw_regret=raw)


def ir_check(mech_or_pair, inst: Instance):
    """Interim participation: truthful utility must be non-negative for every
    type. Returns (ok, worst slack)."""
    rf, prices = _resolve_mechanism(mech_or_pair, inst)
    worst = None
    for i in range(inst.m):
        for a in range(inst.num_types(i)):
            slack = _interim_utility(inst, rf, prices, i, a, a)
            if worst is None or slack < worst:
                worst = slack
    return worst >= 0, worst


def _interim_utility(inst, rf: ReducedForm, prices: PricingRule,
                     i: int, true_type: int, reported: int) -> Fraction:
    total = _ZERO
    for j in range(inst.n):
        value = inst.value(i, true_type, j)
        if value:
            total += value * rf.get(inst, i, j, reported)
    return total - prices.get(i, reported)


def _resolve_mechanism(mech_or_pair, inst: Instance):
    if isinstance(mech_or_pair, Mechanism):
        rf = vvcg.reduced_form_of(mech_or_pair.decomposition, inst)
        return rf, mech_or_pair.prices
    rf, prices = mech_or_pair
    if not isinstance(prices, PricingRule):
        prices = PricingRule(prices=tuple(tuple(row) for row in prices))
    return rf, prices


def simulate(mech: Mechanism, inst: Instance, trials: int, seed: int = 0) -> dict:
    """Monte Carlo execution of a mechanism under truthful play.

    Per trial: draw a profile, draw one component rule, run it, charge the
    interim prices. Deterministic per seed; sums are exact rationals.
    """
    rng = random.Random(seed)
    report: dict = {"trials": trials}
    if trials == 0:
        return report
    profile_cdf = []
    acc = _ZERO
    for profile, q in inst.profiles:
        acc += q
        profile_cdf.append((acc, profile))
    component_cdf = []
    acc = _ZERO
    for prob, rule in mech.decomposition.components:
        acc += prob
        component_cdf.append((acc, rule))

    revenue_total = _ZERO
    payment_totals = [_ZERO] * inst.m
    award_counts = [[0] * inst.n for _ in range(inst.m)]
    for _ in range(trials):
        u = rng.random()
        profile = next(p for cdf, p in profile_cdf if u < cdf)
        u = rng.random()
        rule = next(r for cdf, r in component_cdf if u < cdf)
        alloc = vvcg.run_vvcg(rule, inst, profile)
        for i, j in alloc:
            award_counts[i][j] += 1
        for i in range(inst.m):
            payment = mech.prices.get(i, profile[i])
            payment_totals[i] += payment
            revenue_total += payment
    mean_revenue = revenue_total / trials
    report.update({
        "revenue_mean": mean_revenue,
        "revenue_mean_dec": float(mean_revenue),
        "per_bidder_mean_payment": [p / trials for p in payment_totals],
        "award_frequency": [
            [Fraction(c, trials) for c in row] for row in award_counts
        ],
        "seed": seed,
    })
    return report


# -- mechanism serialization ---------------------------------------------------


def mechanism_to_json(mech: Mechanism, inst: Instance) -> dict:
    return {
        "decomposition": [
            {
                "prob": rat_str(prob),
                "weights": [rat_str(x) for x in rule.weights],
                "virtual": [rat_str(x) for x in rule.virtual],
                "perturbed": rule.perturbed,
            }
            for prob, rule in mech.decomposition.components
        ],
        "prices": {
            "normalized": [[rat_str(p) for p in row] for row in mech.prices.prices],
            "raw": [
                [rat_str(p * inst.scale) for p in row] for row in mech.prices.prices
            ],
            "normalized_dec": [[float(p) for p in row] for row in mech.prices.prices],
        },
        "delta": rat_str(mech.delta),
        "metadata": mech.metadata,
    }


def mechanism_from_json(doc: dict, inst: Instance) -> Mechanism:
    try:
        components = []
        for comp in doc["decomposition"]:
            rule = vvcg.VirtualVCGRule(
                weights=tuple(parse_rational(x) for x in comp["weights"]),
                virtual=tuple(parse_rational(x) for x in comp["virtual"]),
                perturbed=bool(comp.get("perturbed", True)),
            )
            components.append((parse_rational(comp["prob"]), rule))
        prices = PricingRule(prices=tuple(
            tuple(parse_rational(p) for p in row)
            for row in doc["prices"]["normalized"]
        ))
        delta = parse_rational(doc["delta"])
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed mechanism document: {exc}") from exc
    for prob, rule in components:
        if len(rule.weights) != inst.dim:
            raise ValidationError("mechanism rule dimension does not match instance")
    if len(prices.prices) != inst.m:
        raise ValidationError("mechanism price table does not match instance")
    return Mechanism(
        decomposition=Decomposition(components=tuple(components)),
        prices=prices, delta=delta, metadata=dict(doc.get("metadata", {})),
    )
