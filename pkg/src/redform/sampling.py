"""Seeded proxy distributions: a uniform empirical stand-in for the true
type distribution.

The proxy draws a batch of profiles directly plus, for every (bidder, type)
pair, a batch of others-profiles with that type pinned, so no type is ever
missing from the support. The induced instance is the uniform distribution
over the sampled list (a correlated instance with exact 1/k'' weights), and
the whole downstream pipeline stays rational-exact on top of it.
"""

from __future__ import annotations

import math
import random
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

from .errors import ValidationError
from .model import Correlated, Instance

SAMPLER_ALGORITHM = "mt19937-inverse-cdf-v1"

DIRECT = ("direct",)

DEFAULT_K_PRIME_CAP = 25


@dataclass(frozen=True)
class GenuineBiasedSplit:
    """Indices of proxy profiles with t_i = A, split by provenance.

    Genuine entries were sampled without conditioning on anyone else
    (directly, or conditioned on (i, A) itself); biased entries carry the
    type coincidentally while some other bidder was pinned.
    """

    bidder: int
    type_index: int
    genuine: tuple
    biased: tuple


@dataclass(frozen=True)
class ProxyDistribution:
    base: Instance
    profiles: tuple      # sampled profiles, with repetition, in draw order
    provenance: tuple    # per profile: ("direct",) or ("conditioned", i, a)
    seed: int
    k: int
    k_prime: int
    epsilon: Fraction | None = None
    t: Fraction | None = None
    capped: bool = False
    algorithm: str = SAMPLER_ALGORITHM

    @property
    def k_total(self) -> int:
        return len(self.profiles)

    @cached_property
    def instance(self) -> Instance:
        """The induced uniform instance over the sampled profiles."""
        counts = Counter(self.profiles)
        total = Fraction(len(self.profiles))
        joint = tuple(sorted(
            (profile, Fraction(c) / total) for profile, c in counts.items()
        ))
        inst = Instance(
            m=self.base.m, n=self.base.n, type_spaces=self.base.type_spaces,
            distribution=Correlated(joint=joint),
            feasibility=self.base.feasibility, budgets=self.base.budgets,
            scale=self.base.scale,
        )
        return inst.validate()

    def metadata(self) -> dict:
        from .rational import rat_str
        return {
            "mode": "sampled",
            "seed": self.seed,
            "k": self.k,
            "k_prime": self.k_prime,
            "k_total": self.k_total,
            "epsilon": None if self.epsilon is None else rat_str(self.epsilon),
            "t": None if self.t is None else rat_str(self.t),
            "k_prime_capped": self.capped,
            "algorithm": self.algorithm,
        }


def _draw_type(rng: random.Random, probs) -> int:
    """Inverse-CDF draw; float-vs-Fraction comparisons are exact."""
    u = rng.random()
    acc = Fraction(0)
    for idx, q in enumerate(probs):
        acc += q
        if u < acc:
            return idx
    return len(probs) - 1


def heuristic_parameters(inst: Instance, epsilon: Fraction,
                         k_prime_cap: int = DEFAULT_K_PRIME_CAP):
    """Default (t, k', k, capped) for a target accuracy.

    The theory only pins the shape of these counts up to an unspecified
    polynomial, and the literal counts are astronomically conservative, so
    k' is capped (recorded in the proxy metadata) and k follows the ratio
    rule from the capped value.
    """
    epsilon = Fraction(epsilon)
    if epsilon <= 0:
        raise ValidationError("proxy accuracy must be positive")
    big_t = inst.total_types
    t = epsilon / (6 * big_t)
    k_prime_raw = math.ceil(big_t**2 * inst.n**2 / t**3)
    capped = k_prime_raw > k_prime_cap
    k_prime = min(k_prime_raw, k_prime_cap)
    k = math.ceil(Fraction(4 * k_prime * big_t) / epsilon)
    return t, k_prime, k, capped


def build_proxy(inst: Instance, epsilon=None, k: int | None = None,
                k_prime: int | None = None, seed: int = 0,
                k_prime_cap: int = DEFAULT_K_PRIME_CAP,
                enforce_ratio: bool = True) -> ProxyDistribution:
    """Sample a proxy distribution, deterministically per seed.

    Either give explicit k and k_prime, or an accuracy epsilon from which
    heuristic defaults are derived. Explicit parameters must keep the direct
    batch dominant (k > k_prime * total types); enforce_ratio=False lifts
    that check for degenerate test configurations.
    """
    if not inst.independent:
        raise ValidationError("proxy sampling is defined for independent bidders")
    t = None
    capped = False
    eps = None
    if k is None or k_prime is None:
        if epsilon is None:
            raise ValidationError("need either epsilon or explicit k and k_prime")
        eps = Fraction(epsilon)
        t, k_prime, k, capped = heuristic_parameters(inst, eps, k_prime_cap)
    else:
        if epsilon is not None:
            eps = Fraction(epsilon)
        if k_prime < 1:
            raise ValidationError("k_prime must be at least 1")
        if enforce_ratio and k <= k_prime * inst.total_types:
            raise ValidationError(
                f"need k > k_prime * total types = {k_prime * inst.total_types}, got k={k}"
            )

    rng = random.Random(seed)
    probs = inst.distribution.probs
    profiles = []
    provenance = []
    for _ in range(k):
        profiles.append(tuple(_draw_type(rng, probs[i]) for i in range(inst.m)))
        provenance.append(DIRECT)
    for i in range(inst.m):
        for a in range(inst.num_types(i)):
            for _ in range(k_prime):
                profile = tuple(
                    a if bidder == i else _draw_type(rng, probs[bidder])
                    for bidder in range(inst.m)
                )
                profiles.append(profile)
                provenance.append(("conditioned", i, a))
    return ProxyDistribution(
        base=inst, profiles=tuple(profiles), provenance=tuple(provenance),
        seed=seed, k=k, k_prime=k_prime, epsilon=eps, t=t, capped=capped,
    )


def genuine_biased_split(proxy: ProxyDistribution, i: int, a: int) -> GenuineBiasedSplit:
    """Partition the proxy profiles carrying t_i = a by provenance."""
    genuine = []
    biased = []
    for idx, (profile, source) in enumerate(zip(proxy.profiles, proxy.provenance)):
        if profile[i] != a:
            continue
        if source == DIRECT or source == ("conditioned", i, a):
            genuine.append(idx)
        else:
            biased.append(idx)
    return GenuineBiasedSplit(
        bidder=i, type_index=a, genuine=tuple(genuine), biased=tuple(biased)
    )


def proxy_to_json(proxy: ProxyDistribution) -> dict:
    doc = proxy.metadata()
    doc["profiles"] = [
        {
            "profile": list(profile),
            "provenance": (
                "direct" if source == DIRECT
                else {"bidder": source[1], "type": source[2]}
            ),
        }
        for profile, source in zip(proxy.profiles, proxy.provenance)
    ]
    return doc
