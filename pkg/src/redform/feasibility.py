"""Feasibility systems and the max-weight (VCG) allocation oracle.

An allocation is a set of (bidder, item) assignment pairs. A feasibility
system lists which assignment sets may be made simultaneously; it is an
arbitrary set system and need not be downward-closed. The solver contract
is argmax only: given a rational weight per assignment (possibly negative),
return a feasible allocation of maximal total weight.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

from .errors import CapExceeded, ValidationError

Allocation = frozenset  # of (bidder, item) pairs, 0-indexed
WeightMatrix = Sequence[Sequence[Fraction]]

KINDS = ("explicit", "single_item", "per_item_supply", "unit_demand_matching", "public_project")

DEFAULT_ENUM_CAP = 10**6


def _canonical_order_key(alloc: Allocation):
    return (len(alloc), sorted(alloc))


@dataclass(frozen=True)
class FeasibilitySpec:
    """One feasibility family.

    kind "explicit" carries the full member list (canonically sorted, the
    fixed enumeration order used for tie-breaking); the built-in kinds are
    structural. single_item takes allow_empty so non-downward-closed
    single-item markets can be expressed.
    """

    kind: str
    allocations: tuple = ()  # explicit members, canonical order
    allow_empty: bool = True

    @staticmethod
    def explicit(allocations) -> "FeasibilitySpec":
        members = []
        seen = set()
        for alloc in allocations:
            member = frozenset((int(i), int(j)) for i, j in alloc)
            if member not in seen:
                seen.add(member)
                members.append(member)
        if not members:
            raise ValidationError("explicit feasibility family is empty")
        members.sort(key=_canonical_order_key)
        return FeasibilitySpec(kind="explicit", allocations=tuple(members))

    @staticmethod
    def single_item(allow_empty: bool = True) -> "FeasibilitySpec":
        return FeasibilitySpec(kind="single_item", allow_empty=allow_empty)

    @staticmethod
    def per_item_supply() -> "FeasibilitySpec":
        return FeasibilitySpec(kind="per_item_supply")

    @staticmethod
    def unit_demand_matching() -> "FeasibilitySpec":
        return FeasibilitySpec(kind="unit_demand_matching")

    @staticmethod
    def public_project() -> "FeasibilitySpec":
        return FeasibilitySpec(kind="public_project")

    def validate_for(self, m: int, n: int) -> None:
        if self.kind not in KINDS:
            raise ValidationError(f"unknown feasibility kind {self.kind!r}")
        if self.kind == "explicit":
            if not self.allocations:
                raise ValidationError("explicit feasibility family is empty")
            for alloc in self.allocations:
                for i, j in alloc:
                    if not (0 <= i < m and 0 <= j < n):
                        raise ValidationError(
                            f"assignment ({i},{j}) out of range for {m} bidders, {n} items"
                        )
        if self.kind == "single_item" and n != 1:
            raise ValidationError("single_item feasibility requires exactly one item")

    def to_json(self) -> dict:
        doc: dict = {"kind": self.kind}
        if self.kind == "explicit":
            doc["allocations"] = [sorted([list(p) for p in a]) for a in self.allocations]
        if self.kind == "single_item" and not self.allow_empty:
            doc["allow_empty"] = False
        return doc

    @staticmethod
    def from_json(doc: dict) -> "FeasibilitySpec":
        if not isinstance(doc, dict) or "kind" not in doc:
            raise ValidationError("feasibility must be an object with a 'kind'")
        kind = doc["kind"]
        if kind == "explicit":
            if "allocations" not in doc:
                raise ValidationError("explicit feasibility needs 'allocations'")
            return FeasibilitySpec.explicit(doc["allocations"])
        if kind == "single_item":
            return FeasibilitySpec.single_item(allow_empty=bool(doc.get("allow_empty", True)))
        if kind in KINDS:
            return FeasibilitySpec(kind=kind)
        raise ValidationError(f"unknown feasibility kind {kind!r}")


def enumerate_allocations(spec: FeasibilitySpec, m: int, n: int,
                          cap: int = DEFAULT_ENUM_CAP) -> list:
    """All members of the family, in the fixed deterministic enumeration order.

    This explicit expansion is the ground truth the structural solvers are
    cross-checked against. Fails loudly when the family exceeds the cap.
    """
    spec.validate_for(m, n)
    if spec.kind == "explicit":
        return list(spec.allocations)
    if spec.kind == "single_item":
        members = [frozenset()] if spec.allow_empty else []
        members.extend(frozenset({(i, 0)}) for i in range(m))
        return members
    if spec.kind == "public_project":
        if 2**n > cap:
            raise CapExceeded(f"public_project family has 2^{n} members > cap {cap}")
        members = []
        for mask in range(2**n):
            items = [j for j in range(n) if mask >> j & 1]
            members.append(frozenset((i, j) for i in range(m) for j in items))
        return members
    if spec.kind == "per_item_supply":
        if (m + 1) ** n > cap:
            raise CapExceeded(f"per_item_supply family has ({m}+1)^{n} members > cap {cap}")
        members = []
        for choice in itertools.product(range(m + 1), repeat=n):
            members.append(frozenset((c - 1, j) for j, c in enumerate(choice) if c > 0))
        members.sort(key=_canonical_order_key)
        return members
    # unit_demand_matching: all partial matchings
    members = []
    def extend(j, used_bidders, current):
        if len(members) > cap:
            raise CapExceeded(f"unit_demand_matching family exceeds cap {cap}")
        if j == n:
            members.append(frozenset(current))
            return
        extend(j + 1, used_bidders, current)
        for i in range(m):
            if i not in used_bidders:
                extend(j + 1, used_bidders | {i}, current + [(i, j)])
    extend(0, frozenset(), [])
    members.sort(key=_canonical_order_key)
    return members


def validate_allocation(spec: FeasibilitySpec, alloc, m: int, n: int) -> bool:
    """True iff alloc is a member of the family."""
    alloc = frozenset(alloc)
    for i, j in alloc:
        if not (0 <= i < m and 0 <= j < n):
            return False
    if spec.kind == "explicit":
        return alloc in spec.allocations
    if spec.kind == "single_item":
        if not alloc:
            return spec.allow_empty
        return len(alloc) == 1
    if spec.kind == "per_item_supply":
        items = [j for _, j in alloc]
        return len(items) == len(set(items))
    if spec.kind == "unit_demand_matching":
        items = [j for _, j in alloc]
        bidders = [i for i, _ in alloc]
        return len(items) == len(set(items)) and len(bidders) == len(set(bidders))
    if spec.kind == "public_project":
        items = {j for _, j in alloc}
        return alloc == frozenset((i, j) for i in range(m) for j in items)
    raise ValidationError(f"unknown feasibility kind {spec.kind!r}")


def _weight_of(alloc, w: WeightMatrix) -> Fraction:
    total = Fraction(0)
    for i, j in alloc:
        total += w[i][j]
    return total


def max_weight_allocation(spec: FeasibilitySpec, w: WeightMatrix,
                          m: int | None = None, n: int | None = None):
    """A feasible allocation of maximal total weight under w.

    Weights may be negative. Among ties, the first allocation in the fixed
    enumeration order wins; callers needing principled tie-breaking perturb
    the weights instead (see the virtual VCG tie-break).
    """
    if m is None:
        m = len(w)
    if n is None:
        n = len(w[0]) if m else 0
    spec.validate_for(m, n)
    if spec.kind == "explicit":
        best = None
        best_weight = None
        for alloc in spec.allocations:
            total = _weight_of(alloc, w)
            if best_weight is None or total > best_weight:
                best, best_weight = alloc, total
        return best
    if spec.kind == "single_item":
        best = frozenset() if spec.allow_empty else frozenset({(0, 0)})
        best_weight = Fraction(0) if spec.allow_empty else w[0][0]
        for i in range(m):
            if w[i][0] > best_weight:
                best, best_weight = frozenset({(i, 0)}), w[i][0]
        return best
    if spec.kind == "per_item_supply":
        chosen = []
        for j in range(n):
            best_i, best_weight = None, Fraction(0)
            for i in range(m):
                if w[i][j] > best_weight:
                    best_i, best_weight = i, w[i][j]
            if best_i is not None:
                chosen.append((best_i, j))
        return frozenset(chosen)
    if spec.kind == "public_project":
        col_sums = [sum((w[i][j] for i in range(m)), Fraction(0)) for j in range(n)]
        best_mask, best_weight = 0, Fraction(0)
        for mask in range(2**n):
            total = sum((col_sums[j] for j in range(n) if mask >> j & 1), Fraction(0))
            if total > best_weight:
                best_mask, best_weight = mask, total
        return frozenset((i, j) for i in range(m) for j in range(n) if best_mask >> j & 1)
    if spec.kind == "unit_demand_matching":
        return _max_weight_matching(w, m, n)
    raise ValidationError(f"unknown feasibility kind {spec.kind!r}")


def _max_weight_matching(w: WeightMatrix, m: int, n: int):
    """Exact max-weight bipartite matching; negative edges are never used.

    Hungarian algorithm with rational potentials and successive shortest
    augmenting paths, on a padded problem: each bidder may take a real item
    (weight clamped at 0 from below) or a private zero-weight dummy, so a
    full assignment always exists. Dropping dummy and non-positive
    assignments afterwards yields the max-weight partial matching.
    """
    cols = n + m  # real items, then one dummy per bidder
    zero = Fraction(0)

    def cost(i, j):  # minimization form
        if j < n and w[i][j] > 0:
            return -w[i][j]
        return zero

    # columns are 1-indexed internally; column 0 is the virtual source
    u = [zero] * (m + 1)
    v = [zero] * (cols + 1)
    col_match = [0] * (cols + 1)  # column -> 1-indexed row, 0 = free
    way = [0] * (cols + 1)
    for i in range(1, m + 1):
        col_match[0] = i
        j0 = 0
        minv = [None] * (cols + 1)
        used = [False] * (cols + 1)
        while True:
            used[j0] = True
            i0 = col_match[j0]
            delta, j1 = None, None
            for j in range(1, cols + 1):
                if used[j]:
                    continue
                cur = cost(i0 - 1, j - 1) - u[i0] - v[j]
                if minv[j] is None or cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if delta is None or minv[j] < delta:
                    delta, j1 = minv[j], j
            for j in range(cols + 1):
                if used[j]:
                    u[col_match[j]] += delta
                    v[j] -= delta
                elif minv[j] is not None:
                    minv[j] -= delta
            j0 = j1
            if col_match[j0] == 0:
                break
        while j0 != 0:
            j1 = way[j0]
            col_match[j0] = col_match[j1]
            j0 = j1

    result = set()
    for j in range(1, n + 1):
        i = col_match[j]
        if i and w[i - 1][j - 1] > 0:
            result.add((i - 1, j - 1))
    return frozenset(result)


def negative_weight_adapter(nonneg_solver: Callable) -> Callable:
    """Wrap a non-negative-weights solver so it accepts arbitrary weights.

    Zero out negative entries, solve, then remove assignments whose original
    weight is negative. Correct only for downward-closed families, which the
    caller asserts by using this adapter.
    """
    def solve(spec: FeasibilitySpec, w: WeightMatrix, m=None, n=None):
        rows = len(w) if m is None else m
        cols = (len(w[0]) if rows else 0) if n is None else n
        clamped = [
            [w[i][j] if w[i][j] > 0 else Fraction(0) for j in range(cols)]
            for i in range(rows)
        ]
        alloc = nonneg_solver(spec, clamped, rows, cols)
        return frozenset((i, j) for i, j in alloc if w[i][j] >= 0)
    return solve
