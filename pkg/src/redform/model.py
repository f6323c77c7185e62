"""Auction instances: type spaces, distributions, reduced forms.

All probabilities and values are exact rationals. Raw values are normalized
at load time by the maximum value so everything lives in [0,1]; the scale is
kept so prices can be reported in original units. Instances are immutable
and hashable; derived tables (profile space, marginals, conditionals) are
cached on first use.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping, Sequence

from .errors import ValidationError
from .feasibility import FeasibilitySpec
from .rational import parse_rational, rat_str

Profile = tuple  # of per-bidder type indices


@dataclass(frozen=True)
class BidderType:
    """A bidder type: one normalized value per item plus an opaque label."""

    values: tuple
    label: str = ""


@dataclass(frozen=True)
class Independent:
    """Product distribution; probs[i][a] = Pr[bidder i has type a]."""

    probs: tuple


@dataclass(frozen=True)
class Correlated:
    """Explicit joint distribution over type profiles (sorted, positive probs)."""

    joint: tuple  # of (Profile, Fraction)


@dataclass(frozen=True)
class Instance:
    m: int
    n: int
    type_spaces: tuple  # per bidder, tuple of BidderType
    distribution: object  # Independent | Correlated
    feasibility: FeasibilitySpec
    budgets: tuple | None = None  # normalized units
    scale: Fraction = Fraction(1)

    # -- validation -------------------------------------------------------

    def validate(self) -> "Instance":
        if self.m < 1 or self.n < 1:
            raise ValidationError("need at least one bidder and one item")
        if len(self.type_spaces) != self.m:
            raise ValidationError("type_spaces length must equal bidder count")
        for i, space in enumerate(self.type_spaces):
            if not space:
                raise ValidationError(f"bidder {i} has an empty type space")
            for t in space:
                if len(t.values) != self.n:
                    raise ValidationError(
                        f"bidder {i} type {t.label!r} has {len(t.values)} values, expected {self.n}"
                    )
                for v in t.values:
                    if v < 0 or v > 1:
                        raise ValidationError(
                            f"normalized value {rat_str(v)} outside [0,1]"
                        )
        if isinstance(self.distribution, Independent):
            probs = self.distribution.probs
            if len(probs) != self.m:
                raise ValidationError("probability table length must equal bidder count")
            for i, row in enumerate(probs):
                if len(row) != len(self.type_spaces[i]):
                    raise ValidationError(f"bidder {i} probability row has wrong length")
                for q in row:
                    if q <= 0:
                        raise ValidationError(
                            f"bidder {i} has a zero or negative type probability"
                        )
                total = sum(row, Fraction(0))
                if total != 1:
                    raise ValidationError(
                        f"bidder {i} probabilities sum to {rat_str(total)}"
                    )
        elif isinstance(self.distribution, Correlated):
            joint = self.distribution.joint
            seen = set()
            total = Fraction(0)
            for profile, q in joint:
                if len(profile) != self.m:
                    raise ValidationError("joint profile has wrong arity")
                for i, a in enumerate(profile):
                    if not (0 <= a < len(self.type_spaces[i])):
                        raise ValidationError(
                            f"joint profile uses unknown type index {a} for bidder {i}"
                        )
                if profile in seen:
                    raise ValidationError(f"duplicate profile {profile} in joint")
                seen.add(profile)
                if q <= 0:
                    raise ValidationError("joint probabilities must be positive")
                total += q
            if total != 1:
                raise ValidationError(f"probabilities sum to {rat_str(total)}")
            for i in range(self.m):
                for a in range(len(self.type_spaces[i])):
                    if self.type_prob(i, a) == 0:
                        raise ValidationError(
                            f"bidder {i} type {a} has zero marginal probability"
                        )
        else:
            raise ValidationError("distribution must be Independent or Correlated")
        if self.budgets is not None:
            if len(self.budgets) != self.m:
                raise ValidationError("budgets length must equal bidder count")
            for b in self.budgets:
                if b < 0:
                    raise ValidationError("budgets must be non-negative")
        if self.scale <= 0:
            raise ValidationError("scale must be positive")
        self.feasibility.validate_for(self.m, self.n)
        return self

    # -- basic structure ---------------------------------------------------

    @property
    def independent(self) -> bool:
        return isinstance(self.distribution, Independent)

    def num_types(self, i: int) -> int:
        return len(self.type_spaces[i])

    @cached_property
    def total_types(self) -> int:
        return sum(len(s) for s in self.type_spaces)

    @cached_property
    def dim(self) -> int:
        """Reduced-form dimension: items times total type count."""
        return self.n * self.total_types

    @cached_property
    def coords(self) -> tuple:
        """Canonical (bidder, item, type) coordinate order for vector views."""
        out = []
        for i in range(self.m):
            for j in range(self.n):
                for a in range(self.num_types(i)):
                    out.append((i, j, a))
        return tuple(out)

    @cached_property
    def coord_index(self) -> dict:
        return {c: k for k, c in enumerate(self.coords)}

    @cached_property
    def so_dim(self) -> int:
        return self.n * sum(len(s) ** 2 for s in self.type_spaces)

    @cached_property
    def so_coords(self) -> tuple:
        """(bidder, item, reported type, true type) coordinate order."""
        out = []
        for i in range(self.m):
            for j in range(self.n):
                for a in range(self.num_types(i)):
                    for b in range(self.num_types(i)):
                        out.append((i, j, a, b))
        return tuple(out)

    @cached_property
    def so_coord_index(self) -> dict:
        return {c: k for k, c in enumerate(self.so_coords)}

    def value(self, i: int, a: int, j: int) -> Fraction:
        return self.type_spaces[i][a].values[j]

    # -- probabilities -----------------------------------------------------

    def type_prob(self, i: int, a: int) -> Fraction:
        if isinstance(self.distribution, Independent):
            return self.distribution.probs[i][a]
        total = Fraction(0)
        for profile, q in self.distribution.joint:
            if profile[i] == a:
                total += q
        return total

    @cached_property
    def profiles(self) -> tuple:
        """Support of the joint distribution as (profile, probability) pairs.

        Deterministic lexicographic order by per-bidder type index;
        probabilities are positive and sum to exactly 1.
        """
        if isinstance(self.distribution, Independent):
            ranges = [range(self.num_types(i)) for i in range(self.m)]
            out = []
            for profile in itertools.product(*ranges):
                q = Fraction(1)
                for i, a in enumerate(profile):
                    q *= self.distribution.probs[i][a]
                out.append((profile, q))
            return tuple(out)
        return tuple(sorted(self.distribution.joint))

    @cached_property
    def full_profiles(self) -> tuple:
        """Every profile in the product of the type spaces, support or not."""
        ranges = [range(self.num_types(i)) for i in range(self.m)]
        return tuple(itertools.product(*ranges))

    def profile_prob(self, profile: Profile) -> Fraction:
        if isinstance(self.distribution, Independent):
            q = Fraction(1)
            for i, a in enumerate(profile):
                q *= self.distribution.probs[i][a]
            return q
        return self._joint_map.get(tuple(profile), Fraction(0))

    @cached_property
    def _joint_map(self) -> dict:
        return {tuple(p): q for p, q in self.distribution.joint}

    def conditional_others(self, i: int, a: int) -> tuple:
        """Distribution of the other bidders' types given bidder i has type a.

        Returns (partial profile, probability) pairs, the partial profile
        listing the other bidders' type indices in ascending bidder order.
        """
        if not (0 <= i < self.m) or not (0 <= a < self.num_types(i)):
            raise ValidationError(f"no type {a} for bidder {i}")
        return self._conditionals[(i, a)]

    @cached_property
    def _conditionals(self) -> dict:
        table = {}
        for i in range(self.m):
            for a in range(self.num_types(i)):
                if isinstance(self.distribution, Independent):
                    ranges = [
                        range(self.num_types(k)) for k in range(self.m) if k != i
                    ]
                    entries = []
                    for partial in itertools.product(*ranges):
                        q = Fraction(1)
                        others = [k for k in range(self.m) if k != i]
                        for k, b in zip(others, partial):
                            q *= self.distribution.probs[k][b]
                        entries.append((partial, q))
                    table[(i, a)] = tuple(entries)
                else:
                    marginal = self.type_prob(i, a)
                    entries = []
                    for profile, q in self.profiles:
                        if profile[i] == a:
                            partial = tuple(
                                b for k, b in enumerate(profile) if k != i
                            )
                            entries.append((partial, q / marginal))
                    table[(i, a)] = tuple(entries)
        return table

    @cached_property
    def _conditional_maps(self) -> dict:
        return {key: dict(entries) for key, entries in self._conditionals.items()}

    def conditional_partial_prob(self, i: int, b: int, partial: Profile) -> Fraction:
        """Probability of a specific others-profile given bidder i has type b."""
        return self._conditional_maps[(i, b)].get(tuple(partial), Fraction(0))

    def insert_type(self, partial: Profile, i: int, a: int) -> Profile:
        """Recombine a partial profile over the others with a type for bidder i."""
        front = partial[:i]
        back = partial[i:]
        return front + (a,) + back

    # -- serialization -----------------------------------------------------

    def to_json(self) -> dict:
        doc = {
            "bidders": self.m,
            "items": self.n,
            "types": [
                [
                    {
                        "values": [rat_str(v * self.scale) for v in t.values],
                        **({"prob": rat_str(self.distribution.probs[i][a])}
                           if isinstance(self.distribution, Independent) else {}),
                        **({"label": t.label} if t.label else {}),
                    }
                    for a, t in enumerate(space)
                ]
                for i, space in enumerate(self.type_spaces)
            ],
            "feasibility": self.feasibility.to_json(),
        }
        if isinstance(self.distribution, Correlated):
            doc["joint"] = [
                {"profile": list(p), "prob": rat_str(q)}
                for p, q in self.distribution.joint
            ]
        if self.budgets is not None:
            doc["budgets"] = [rat_str(b * self.scale) for b in self.budgets]
        return doc


# -- public operations ------------------------------------------------------


def profile_space(inst: Instance):
    """Support of the joint as (profile, probability) pairs; probs sum to 1."""
    return inst.profiles


def conditional_others(inst: Instance, i: int, a: int):
    """Conditional distribution over the other bidders given t_i = a."""
    return inst.conditional_others(i, a)


def load_instance(document) -> Instance:
    """Parse and validate an instance document (JSON text or already-parsed dict).

    Values are normalized by the maximum raw value; the scale is recorded so
    prices can be de-normalized. Zero or negative probabilities, ragged value
    vectors, bad sums, and unknown feasibility kinds are all rejected.
    """
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document, parse_float=Fraction, parse_int=int)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"instance is not valid JSON: {exc}") from exc
    if not isinstance(document, Mapping):
        raise ValidationError("instance document must be a JSON object")
    try:
        m = int(document["bidders"])
        n = int(document["items"])
        types_doc = document["types"]
    except KeyError as exc:
        raise ValidationError(f"instance is missing field {exc}") from exc
    if not isinstance(types_doc, Sequence) or len(types_doc) != m:
        raise ValidationError("'types' must list one type array per bidder")

    raw_spaces = []
    raw_probs = []
    for i, space_doc in enumerate(types_doc):
        if not space_doc:
            raise ValidationError(f"bidder {i} has an empty type space")
        space = []
        probs = []
        for a, t_doc in enumerate(space_doc):
            values = tuple(parse_rational(v) for v in t_doc["values"])
            for v in values:
                if v < 0:
                    raise ValidationError("item values must be non-negative")
            label = str(t_doc.get("label", f"b{i}t{a}"))
            space.append((values, label))
            if "prob" in t_doc:
                probs.append(parse_rational(t_doc["prob"]))
        raw_spaces.append(space)
        raw_probs.append(probs)

    v_max = Fraction(0)
    for space in raw_spaces:
        for values, _ in space:
            for v in values:
                if v > v_max:
                    v_max = v
    scale = v_max if v_max > 0 else Fraction(1)
    type_spaces = tuple(
        tuple(BidderType(values=tuple(v / scale for v in values), label=label)
              for values, label in space)
        for space in raw_spaces
    )

    if "joint" in document and document["joint"] is not None:
        joint = []
        for entry in document["joint"]:
            profile = tuple(int(x) for x in entry["profile"])
            joint.append((profile, parse_rational(entry["prob"])))
        distribution = Correlated(joint=tuple(sorted(joint)))
    else:
        for i, probs in enumerate(raw_probs):
            if len(probs) != len(raw_spaces[i]):
                raise ValidationError(
                    f"bidder {i}: every type needs a 'prob' (or provide a 'joint')"
                )
        distribution = Independent(probs=tuple(tuple(p) for p in raw_probs))

    spec = FeasibilitySpec.from_json(document.get("feasibility", {"kind": "single_item"}))

    budgets = None
    if document.get("budgets") is not None:
        budgets = tuple(parse_rational(b) / scale for b in document["budgets"])

    inst = Instance(
        m=m, n=n, type_spaces=type_spaces, distribution=distribution,
        feasibility=spec, budgets=budgets, scale=scale,
    )
    return inst.validate()


# -- reduced forms ----------------------------------------------------------


@dataclass(frozen=True)
class ReducedForm:
    """Interim allocation probabilities as a vector in canonical coordinate order."""

    entries: tuple

    def get(self, inst: Instance, i: int, j: int, a: int) -> Fraction:
        return self.entries[inst.coord_index[(i, j, a)]]

    def dot(self, w: Sequence) -> Fraction:
        return sum((x * y for x, y in zip(self.entries, w)), Fraction(0))

    @staticmethod
    def from_map(inst: Instance, mapping: Mapping) -> "ReducedForm":
        return ReducedForm(entries=tuple(
            Fraction(mapping.get(c, 0)) for c in inst.coords
        ))

    def validate_for(self, inst: Instance) -> "ReducedForm":
        if len(self.entries) != inst.dim:
            raise ValidationError(
                f"reduced form has {len(self.entries)} entries, expected {inst.dim}"
            )
        for x in self.entries:
            if x < 0 or x > 1:
                raise ValidationError("reduced-form entries must lie in [0,1]")
        return self

    def to_json(self, inst: Instance) -> dict:
        return {
            "coords": [[i, j, a] for (i, j, a) in inst.coords],
            "rf": [rat_str(x) for x in self.entries],
            "rf_dec": [float(x) for x in self.entries],
        }

    @staticmethod
    def from_json(inst: Instance, doc) -> "ReducedForm":
        if isinstance(doc, Mapping):
            body = doc.get("rf")
        else:
            body = doc
        if not isinstance(body, Sequence):
            raise ValidationError("reduced form document needs an 'rf' array")
        rf = ReducedForm(entries=tuple(parse_rational(x) for x in body))
        return rf.validate_for(inst)


@dataclass(frozen=True)
class SecondOrderReducedForm:
    """Allocation probabilities indexed by reported and true type."""

    entries: tuple

    def get(self, inst: Instance, i: int, j: int, a: int, b: int) -> Fraction:
        return self.entries[inst.so_coord_index[(i, j, a, b)]]

    def dot(self, w: Sequence) -> Fraction:
        return sum((x * y for x, y in zip(self.entries, w)), Fraction(0))

    def validate_for(self, inst: Instance) -> "SecondOrderReducedForm":
        if len(self.entries) != inst.so_dim:
            raise ValidationError(
                f"second-order form has {len(self.entries)} entries, expected {inst.so_dim}"
            )
        for x in self.entries:
            if x < 0 or x > 1:
                raise ValidationError("second-order entries must lie in [0,1]")
        return self
