"""Separation, corner extraction, and vertex decomposition for the polytope
of feasible (second-order) reduced forms.

The polytope is accessed purely through welfare maximization: for any weight
vector, the tie-broken max-weight rule's reduced form both dominates every
feasible point in that direction and is itself a vertex. Separation is a
cutting-plane minimization of (max welfare minus target welfare); a negative
optimum yields a violated valid hyperplane. Decomposition walks the polytope
by repeated ray-shooting from corners of the current tight face.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

from .errors import SolverFault, ValidationError
from .model import Instance, ReducedForm, SecondOrderReducedForm
from . import ratlp
from . import vvcg

logger = logging.getLogger(__name__)

_ZERO = Fraction(0)
_ONE = Fraction(1)


@dataclass(frozen=True)
class FeasibilityVerdict:
    """Either feasible, or a witness hyperplane x.w <= t valid for every
    feasible point but violated by the tested one."""

    feasible: bool
    witness_w: tuple | None = None
    witness_t: Fraction | None = None

    def to_json(self) -> dict:
        from .rational import rat_str
        doc: dict = {"feasible": self.feasible}
        if not self.feasible:
            doc["witness"] = {
                "w": [rat_str(x) for x in self.witness_w],
                "t": rat_str(self.witness_t),
            }
        return doc


@dataclass(frozen=True)
class Decomposition:
    """Convex combination of simple rules implementing a reduced form."""

    components: tuple  # (probability, rule) pairs

    def __len__(self):
        return len(self.components)


class _FirstOrderBackend:
    """F(feasibility, distribution): vectors are reduced forms."""

    def __init__(self, inst: Instance):
        self.inst = inst
        self.dim = inst.dim

    def vertex(self, w: tuple):
        wv = vvcg.w_value(w, self.inst)
        return wv.rule, wv.rf.entries, wv.value


@lru_cache(maxsize=2048)
def _so_vertex_cached(inst: Instance, w2: tuple):
    rule = vvcg.SecondOrderVCGRule(weights=w2, simple=True)
    form = vvcg.second_order_reduced_form(rule, inst)
    return rule, form.entries, form.dot(w2)


class _SecondOrderBackend:
    """SO(feasibility, distribution): vectors are second-order reduced forms."""

    def __init__(self, inst: Instance):
        self.inst = inst
        self.dim = inst.so_dim

    def vertex(self, w2: tuple):
        return _so_vertex_cached(self.inst, tuple(Fraction(x) for x in w2))


def inner_oracle(w: Sequence, t, inst: Instance):
    """Check max-welfare(w) <= t. Returns None when satisfied; otherwise the
    violated hyperplane z.R - y <= 0 over the separation variables (z, y),
    whose normal is the reduced form of the tie-broken rule for w."""
    w = tuple(Fraction(x) for x in w)
    wv = vvcg.w_value(w, inst)
    if wv.value <= Fraction(t):
        return None
    return ratlp.Hyperplane(
        normal=tuple(wv.rf.entries) + (Fraction(-1),), offset=_ZERO
    )


def _separate(x: Sequence, backend, max_rounds: int | None = None) -> FeasibilityVerdict:
    dim = backend.dim
    lp = ratlp.LinearProgram(maximize=False)
    for k in range(dim):
        lp.add_var(f"w[{k}]", lo=-1, hi=1)
    # welfare values lie in [-dim, dim]; the box keeps the relaxation bounded
    # without ever being binding at an accepted optimum
    lp.add_var("t", lo=-(dim + 1), hi=dim + 1)
    objective = {"t": _ONE}
    for k in range(dim):
        if x[k]:
            objective[f"w[{k}]"] = -Fraction(x[k])
    lp.set_objective(objective)

    def oracle(point):
        w = tuple(point[f"w[{k}]"] for k in range(dim))
        _, rf, value = backend.vertex(w)
        if value <= point["t"]:
            return None
        coeffs = {f"w[{k}]": r for k, r in enumerate(rf) if r}
        coeffs["t"] = Fraction(-1)
        return coeffs, _ZERO

    lp.oracle = oracle
    res = ratlp.solve_with_oracle(lp, max_rounds=max_rounds)
    if res.status != ratlp.OPTIMAL:
        raise SolverFault(f"separation relaxation came back {res.status}")
    if res.value >= 0:
        return FeasibilityVerdict(feasible=True)
    w_star = tuple(res.point[f"w[{k}]"] for k in range(dim))
    _, _, welfare = backend.vertex(w_star)
    if welfare != res.point["t"]:
        raise SolverFault("witness offset disagrees with recomputed max welfare")
    dotted = sum((Fraction(a) * b for a, b in zip(x, w_star)), _ZERO)
    if dotted <= welfare:
        raise SolverFault("negative separation optimum without a violated witness")
    return FeasibilityVerdict(feasible=False, witness_w=w_star, witness_t=welfare)


def separation_oracle(rf: ReducedForm, inst: Instance,
                      max_rounds: int | None = None) -> FeasibilityVerdict:
    """Exact membership of a reduced form in the feasible polytope."""
    rf.validate_for(inst)
    return _separate(rf.entries, _FirstOrderBackend(inst), max_rounds=max_rounds)


def second_order_feasibility(form: SecondOrderReducedForm, inst: Instance,
                             max_rounds: int | None = None) -> FeasibilityVerdict:
    """Exact membership of a second-order reduced form in its polytope."""
    form.validate_for(inst)
    return _separate(form.entries, _SecondOrderBackend(inst), max_rounds=max_rounds)


def corner_oracle(hyperplanes: Sequence, inst: Instance):
    """A polytope vertex lying on all the given valid tight hyperplanes.

    Averages the normals, tie-breaks, and takes the resulting simple rule's
    reduced form; lying on every input hyperplane is verified and a failure
    (meaning the precondition was violated) raises a fault. With no input
    hyperplanes any vertex qualifies, so the zero vector is used.
    """
    return _corner(hyperplanes, _FirstOrderBackend(inst))


def _corner(hyperplanes: Sequence, backend):
    dim = backend.dim
    if hyperplanes:
        count = Fraction(len(hyperplanes))
        avg = [_ZERO] * dim
        for normal, _offset in hyperplanes:
            for k in range(dim):
                if normal[k]:
                    avg[k] += Fraction(normal[k]) / count
        w = tuple(avg)
    else:
        w = tuple([_ZERO] * dim)
    rule, rf, _ = backend.vertex(w)
    for normal, offset in hyperplanes:
        dotted = sum((Fraction(a) * b for a, b in zip(normal, rf)), _ZERO)
        if dotted != Fraction(offset):
            raise SolverFault(
                "corner oracle output misses an input hyperplane; "
                "inputs must be valid tight hyperplanes with a common corner"
            )
    return rule, rf


def decompose(rf: ReducedForm, inst: Instance) -> Decomposition:
    """Write a feasible reduced form as a convex combination of at most
    dimension+1 simple rules, exactly."""
    rf.validate_for(inst)
    return _decompose(rf.entries, _FirstOrderBackend(inst))


def second_order_decompose(form: SecondOrderReducedForm, inst: Instance) -> Decomposition:
    form.validate_for(inst)
    return _decompose(form.entries, _SecondOrderBackend(inst))


def _decompose(target: Sequence, backend) -> Decomposition:
    """Ray-shooting recursion.

    Maintain a point x, a set H of valid hyperplanes tight at x, and the
    residual probability. Each round takes a corner c of the face cut out by
    H and pushes from c through x as far as the polytope allows; the binding
    constraint at the far point is a new tight hyperplane, the corner gets
    the leftover mass fraction, and the walk recurses from the far point.
    Every round excludes c from the face, so the face chain (hence the round
    count) is bounded by the dimension.
    """
    x = tuple(Fraction(v) for v in target)
    verdict = _separate(x, backend)
    if not verdict.feasible:
        raise ValidationError("cannot decompose an infeasible reduced form")

    dim = backend.dim
    tight: list = []
    known_witnesses: list = []
    components: list = []
    component_entries: list = []
    residual = _ONE

    for _round in range(dim + 1):
        rule, corner = _corner(tight, backend)
        if x == corner:
            components.append((residual, rule))
            component_entries.append(corner)
            break
        direction = [xv - cv for xv, cv in zip(x, corner)]

        lam_box = None
        box_coord = None
        for k in range(dim):
            if direction[k] > 0:
                cap = (_ONE - corner[k]) / direction[k]
            elif direction[k] < 0:
                cap = -corner[k] / direction[k]
            else:
                continue
            if lam_box is None or cap < lam_box:
                lam_box, box_coord = cap, k
        if lam_box is None or lam_box < 1:
            raise SolverFault("ray-shooting direction escaped the unit box")

        lam_cuts: list = []  # (witness_w, witness_t) per generated cut

        def lam_oracle(point):
            lam = point["lam"]
            z = tuple(cv + lam * dv for cv, dv in zip(corner, direction))
            for w_star, t_star in known_witnesses:
                lhs = sum((a * b for a, b in zip(z, w_star)), _ZERO)
                if lhs > t_star:
                    lam_cuts.append((w_star, t_star))
                    coeff = sum((d * w for d, w in zip(direction, w_star)), _ZERO)
                    c_dot = sum((c * w for c, w in zip(corner, w_star)), _ZERO)
                    return {"lam": coeff}, t_star - c_dot
            inner = _separate(z, backend)
            if inner.feasible:
                return None
            w_star, t_star = inner.witness_w, inner.witness_t
            known_witnesses.append((w_star, t_star))
            lam_cuts.append((w_star, t_star))
            coeff = sum((d * w for d, w in zip(direction, w_star)), _ZERO)
            c_dot = sum((c * w for c, w in zip(corner, w_star)), _ZERO)
            return {"lam": coeff}, t_star - c_dot

        lp = ratlp.LinearProgram(maximize=True)
        lp.add_var("lam", lo=1, hi=lam_box, obj=1)
        lp.oracle = lam_oracle
        res = ratlp.solve_with_oracle(lp)
        if res.status != ratlp.OPTIMAL:
            raise SolverFault(f"ray LP came back {res.status}")
        lam_star = res.point["lam"]
        z_star = tuple(cv + lam_star * dv for cv, dv in zip(corner, direction))

        binding = None
        for w_star, t_star in lam_cuts:
            lhs = sum((a * b for a, b in zip(z_star, w_star)), _ZERO)
            if lhs == t_star:
                binding = (w_star, t_star)
                break
        if binding is None:
            if lam_star != lam_box:
                raise SolverFault("no binding constraint at the ray optimum")
            if direction[box_coord] > 0:
                normal = tuple(
                    _ONE if k == box_coord else _ZERO for k in range(dim)
                )
                binding = (normal, _ONE)
            else:
                normal = tuple(
                    -_ONE if k == box_coord else _ZERO for k in range(dim)
                )
                binding = (normal, _ZERO)
            lhs = sum((a * b for a, b in zip(z_star, binding[0])), _ZERO)
            if lhs != binding[1]:
                raise SolverFault("box facet expected to be tight is not")

        if lam_star > 1:
            weight = residual * (1 - _ONE / lam_star)
            components.append((weight, rule))
            component_entries.append(corner)
            residual = residual / lam_star
        tight.append(binding)
        x = z_star
        logger.debug(
            "round %d: lam*=%s, components=%d, tight=%d",
            _round, lam_star, len(components), len(tight),
        )
    else:
        raise SolverFault("decomposition failed to terminate within dimension+1 rounds")

    total = sum((p for p, _ in components), _ZERO)
    if total != 1:
        raise SolverFault("decomposition probabilities do not sum to one")
    recombined = [_ZERO] * dim
    for (prob, _), entries in zip(components, component_entries):
        for k in range(dim):
            if entries[k]:
                recombined[k] += prob * entries[k]
    if tuple(recombined) != tuple(Fraction(v) for v in target):
        raise SolverFault("decomposition does not recombine to the input")
    return Decomposition(components=tuple(components))
