"""Exact rational linear programming with optional cut-generating oracles.

A two-phase primal simplex over Fraction arithmetic with Bland's rule, so
every solve is deterministic and every optimum is exact. Constraints can be
given explicitly or generated on demand by an oracle that inspects candidate
optima and returns violated hyperplanes (a cutting-plane loop). The oracle
loop assumes a bounded feasible region and an oracle that only emits valid
cuts drawn from a finite family; a repeated cut therefore signals an unsound
oracle and raises a fault.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

from .errors import SolverFault, ValidationError
from .rational import bit_length

logger = logging.getLogger(__name__)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

_ZERO = Fraction(0)
_ONE = Fraction(1)


@dataclass(frozen=True)
class Hyperplane:
    """A halfspace normal.x <= offset with rational coefficients."""

    normal: tuple
    offset: Fraction

    def violated_by(self, x: Sequence) -> bool:
        return sum((a * v for a, v in zip(self.normal, x)), _ZERO) > self.offset


@dataclass
class LPResult:
    status: str
    point: dict | None = None
    value: Fraction | None = None
    cuts: list = field(default_factory=list)
    pivots: int = 0


class LinearProgram:
    """Named-variable LP: bounds, explicit rows, and an optional cut oracle."""

    def __init__(self, maximize: bool = True):
        self.maximize = maximize
        self.var_names: list = []
        self.bounds: dict = {}
        self.objective: dict = {}
        self.rows: list = []  # (coeffs dict, sense in {"<=", ">=", "=="}, rhs)
        self.oracle: Callable | None = None

    def add_var(self, name: str, lo=None, hi=None, obj=_ZERO) -> str:
        if name in self.bounds:
            raise ValidationError(f"duplicate variable {name!r}")
        lo = None if lo is None else Fraction(lo)
        hi = None if hi is None else Fraction(hi)
        if lo is not None and hi is not None and lo > hi:
            raise ValidationError(f"variable {name!r} has empty bound interval")
        self.var_names.append(name)
        self.bounds[name] = (lo, hi)
        if obj:
            self.objective[name] = Fraction(obj)
        return name

    def _check_coeffs(self, coeffs: Mapping):
        for name in coeffs:
            if name not in self.bounds:
                raise ValidationError(f"unknown variable {name!r} in constraint")

    def add_le(self, coeffs: Mapping, rhs):
        self._check_coeffs(coeffs)
        self.rows.append((dict(coeffs), "<=", Fraction(rhs)))

    def add_ge(self, coeffs: Mapping, rhs):
        self._check_coeffs(coeffs)
        self.rows.append((dict(coeffs), ">=", Fraction(rhs)))

    def add_eq(self, coeffs: Mapping, rhs):
        self._check_coeffs(coeffs)
        self.rows.append((dict(coeffs), "==", Fraction(rhs)))

    def set_objective(self, coeffs: Mapping):
        self._check_coeffs(coeffs)
        self.objective = {k: Fraction(v) for k, v in coeffs.items()}


def solve(lp: LinearProgram, extra_rows: Sequence = ()) -> LPResult:
    """Solve using explicit rows only (plus extra_rows, same format)."""
    return _solve_explicit(lp, list(lp.rows) + list(extra_rows))


def solve_with_oracle(lp: LinearProgram, max_rounds: int | None = None) -> LPResult:
    """Cutting-plane loop: solve the relaxation, query the oracle, repeat.

    Terminates when the oracle accepts the relaxation optimum; the accepted
    point is optimal for the oracle-constrained program because every cut was
    valid. The result carries the generated cuts as a certificate.
    """
    if lp.oracle is None:
        return solve(lp)
    if max_rounds is None:
        max_rounds = 1000 * (len(lp.var_names) + 1)
    cuts: list = []
    seen = set()
    for round_no in range(max_rounds):
        extra = [(c, "<=", r) for c, r in cuts]
        res = _solve_explicit(lp, list(lp.rows) + extra)
        if res.status != OPTIMAL:
            # region is required to be bounded and cuts are valid, so this
            # only happens when the caller's explicit rows are themselves bad
            res.cuts = list(cuts)
            return res
        violation = lp.oracle(res.point)
        if violation is None:
            res.cuts = list(cuts)
            logger.debug("oracle accepted after %d cuts", len(cuts))
            return res
        coeffs, rhs = violation
        key = (tuple(sorted((k, Fraction(v)) for k, v in coeffs.items())), Fraction(rhs))
        if key in seen:
            raise SolverFault("oracle repeated a cut; unsound oracle or bad input")
        seen.add(key)
        cuts.append((dict(coeffs), Fraction(rhs)))
        logger.debug("round %d: added cut over %d vars", round_no, len(coeffs))
    raise SolverFault(f"oracle loop exceeded {max_rounds} rounds")


# -- simplex core -------------------------------------------------------------


def _solve_explicit(lp: LinearProgram, rows: list) -> LPResult:
    # map each original variable to a shift plus signed nonneg columns
    col_count = 0
    var_map = {}  # name -> (shift, [(sign, col)])
    bound_rows = []
    for name in lp.var_names:
        lo, hi = lp.bounds[name]
        if lo is None and hi is None:
            var_map[name] = (_ZERO, [(1, col_count), (-1, col_count + 1)])
            col_count += 2
        elif lo is not None and hi is None:
            var_map[name] = (lo, [(1, col_count)])
            col_count += 1
        elif lo is None and hi is not None:
            var_map[name] = (hi, [(-1, col_count)])
            col_count += 1
        else:
            var_map[name] = (lo, [(1, col_count)])
            bound_rows.append(({name: _ONE}, "<=", hi))
            col_count += 1
    all_rows = rows + bound_rows

    def expand(coeffs: Mapping):
        dense = [_ZERO] * col_count
        constant = _ZERO
        for name, c in coeffs.items():
            c = Fraction(c)
            if not c:
                continue
            shift, cols = var_map[name]
            constant += c * shift
            for sign, col in cols:
                dense[col] += sign * c
        return dense, constant

    A, b, senses = [], [], []
    for coeffs, sense, rhs in all_rows:
        dense, constant = expand(coeffs)
        rhs = Fraction(rhs) - constant
        if all(x == 0 for x in dense):
            ok = (rhs >= 0) if sense == "<=" else (rhs <= 0) if sense == ">=" else (rhs == 0)
            if not ok:
                return LPResult(status=INFEASIBLE)
            continue
        A.append(dense)
        b.append(rhs)
        senses.append(sense)

    c_min, c_const = expand(lp.objective)
    if lp.maximize:
        c_min = [-x for x in c_min]

    tab = _Tableau(A, b, senses, col_count)
    status, pivots = tab.run_phase1()
    if status == INFEASIBLE:
        return LPResult(status=INFEASIBLE, pivots=pivots)
    status, more = tab.run_phase2(c_min)
    pivots += more
    if status == UNBOUNDED:
        return LPResult(status=UNBOUNDED, pivots=pivots)

    solution = tab.primal_solution()
    point = {}
    for name in lp.var_names:
        shift, cols = var_map[name]
        val = shift
        for sign, col in cols:
            val += sign * solution[col]
        point[name] = val
    value = sum(
        (Fraction(c) * point[name] for name, c in lp.objective.items()), _ZERO
    )
    return LPResult(status=OPTIMAL, point=point, value=value, pivots=pivots)


class _Tableau:
    """Dense simplex tableau over Fractions; Bland's rule throughout."""

    def __init__(self, A, b, senses, n_struct):
        self.n_struct = n_struct
        # columns: structural | slack/surplus | artificial
        rows = []
        for r in range(len(A)):
            row = list(A[r])
            bb = b[r]
            sense = senses[r]
            if bb < 0:
                row = [-x for x in row]
                bb = -bb
                sense = {"<=": ">=", ">=": "<=", "==": "=="}[sense]
            rows.append((row, bb, sense))
        self.rows = []
        self.rhs = []
        self.basis = []
        total_extra = sum(1 for _, _, s in rows if s != "==")
        total_art = sum(1 for _, _, s in rows if s != "<=")
        n_total = n_struct + total_extra + total_art
        extra_at = n_struct
        art_at = n_struct + total_extra
        self.art_start = art_at
        for row, bb, sense in rows:
            dense = row + [_ZERO] * (n_total - n_struct)
            if sense == "<=":
                dense[extra_at] = _ONE
                self.basis.append(extra_at)
                extra_at += 1
            elif sense == ">=":
                dense[extra_at] = Fraction(-1)
                extra_at += 1
                dense[art_at] = _ONE
                self.basis.append(art_at)
                art_at += 1
            else:
                dense[art_at] = _ONE
                self.basis.append(art_at)
                art_at += 1
            self.rows.append(dense)
            self.rhs.append(bb)
        self.n_total = n_total

    def _pivot(self, r, e):
        piv = self.rows[r][e]
        inv = _ONE / piv
        self.rows[r] = [x * inv for x in self.rows[r]]
        self.rhs[r] *= inv
        for rr in range(len(self.rows)):
            if rr == r:
                continue
            factor = self.rows[rr][e]
            if factor:
                row_r = self.rows[r]
                self.rows[rr] = [x - factor * y for x, y in zip(self.rows[rr], row_r)]
                self.rhs[rr] -= factor * self.rhs[r]
        self.basis[r] = e

    def _reduced_costs(self, cost):
        # cost vector over all columns; returns (reduced costs, objective value)
        red = list(cost)
        val = _ZERO
        for r, bv in enumerate(self.basis):
            cb = cost[bv]
            if cb:
                row = self.rows[r]
                red = [x - cb * y for x, y in zip(red, row)]
                val += cb * self.rhs[r]
        return red, val

    def _iterate(self, cost, forbid=frozenset()):
        pivots = 0
        red, _ = self._reduced_costs(cost)
        while True:
            enter = None
            for j in range(self.n_total):
                if j in forbid:
                    continue
                if red[j] < 0:
                    enter = j
                    break
            if enter is None:
                _, val = self._reduced_costs(cost)
                return OPTIMAL, val, pivots
            leave, best = None, None
            for r in range(len(self.rows)):
                a = self.rows[r][enter]
                if a > 0:
                    ratio = self.rhs[r] / a
                    if best is None or ratio < best or (
                            ratio == best and self.basis[r] < self.basis[leave]):
                        leave, best = r, ratio
            if leave is None:
                return UNBOUNDED, None, pivots
            self._pivot(leave, enter)
            pivots += 1
            factor = red[enter]
            if factor:
                pivot_row = self.rows[leave]
                red = [x - factor * y for x, y in zip(red, pivot_row)]

    def run_phase1(self):
        if self.art_start == self.n_total:
            return OPTIMAL, 0
        cost = [_ZERO] * self.n_total
        for j in range(self.art_start, self.n_total):
            cost[j] = _ONE
        status, val, pivots = self._iterate(cost)
        if status != OPTIMAL or val > 0:
            return INFEASIBLE, pivots
        # drive remaining basic artificials out, or drop redundant rows
        r = 0
        while r < len(self.rows):
            if self.basis[r] >= self.art_start:
                pivot_col = None
                for j in range(self.art_start):
                    if self.rows[r][j] != 0:
                        pivot_col = j
                        break
                if pivot_col is None:
                    del self.rows[r]
                    del self.rhs[r]
                    del self.basis[r]
                    continue
                self._pivot(r, pivot_col)
                pivots += 1
            r += 1
        # freeze artificial columns at zero
        for row in self.rows:
            for j in range(self.art_start, self.n_total):
                row[j] = _ZERO
        self._frozen = frozenset(range(self.art_start, self.n_total))
        return OPTIMAL, pivots

    def run_phase2(self, c_struct):
        cost = list(c_struct) + [_ZERO] * (self.n_total - self.n_struct)
        forbid = getattr(self, "_frozen", frozenset())
        status, _, pivots = self._iterate(cost, forbid=forbid)
        return status, pivots

    def primal_solution(self):
        sol = [_ZERO] * self.n_total
        for r, bv in enumerate(self.basis):
            sol[bv] = self.rhs[r]
        return sol[: self.n_struct]


# -- objective perturbation ----------------------------------------------------


def perturb_objective(a: Sequence, corner_bits: int) -> tuple:
    """Tilt an objective vector so its argmax over any polytope with
    corner_bits-bit rational corners is unique, without leaving the original
    argmax set.

    Writes the coordinates over the common denominator Q and adds the
    geometrically decaying term 2^-(1 + L + (2dL+1) i) to the i-th numerator
    (1-indexed, L = corner_bits); the added amounts are too small to promote
    any strictly suboptimal corner but distinct enough to break every tie.
    """
    a = [Fraction(x) for x in a]
    d = len(a)
    if d == 0:
        return tuple()
    if corner_bits < 1:
        raise ValidationError("corner bit bound must be at least 1")
    big_q = 1
    for x in a:
        big_q *= x.denominator
    out = []
    for idx, x in enumerate(a, start=1):
        p_prime = x.numerator * (big_q // x.denominator)
        eps = Fraction(1, 2 ** (1 + corner_bits + (2 * d * corner_bits + 1) * idx))
        out.append((p_prime + eps) / big_q)
    return tuple(out)


def max_bit_length(values: Sequence) -> int:
    """Largest numerator or denominator bit length over a rational vector."""
    best = 1
    for v in values:
        best = max(best, bit_length(Fraction(v)))
    return best
