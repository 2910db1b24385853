"""Symmetric n-particle laws on finite state spaces, in occupancy form.

A symmetric law on S^n is constant on permutation orbits of ordered states,
so it can be stored as one mass per occupancy vector (type class).  This
compresses k^n ordered states down to C(n+k-1, k-1) classes, which is what
makes exact computations feasible for n in the hundreds.  A dense ordered
representation is kept around purely as a small-n oracle.

Combinatorial quantities (multinomial class sizes, falling factorials) are
exact big integers throughout; probability masses are doubles.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np

from .errors import CapacityError, InvalidArgumentError

# Probability-mass bookkeeping tolerances.
MASS_TOL = 1e-12
NEG_CLAMP = -1e-15

# Dense ordered laws are permitted only while the flat index fits in 24 bits.
DENSE_INDEX_BITS = 24

Occupancy = tuple  # tuple[int, ...] of per-state counts, summing to n


@dataclass(frozen=True)
class StateSpace:
    """An ordered finite set of particle states."""

    labels: tuple

    def __post_init__(self):
        labels = tuple(str(x) for x in self.labels)
        object.__setattr__(self, "labels", labels)
        if len(labels) < 1:
            raise InvalidArgumentError("state space needs at least one state")
        if len(set(labels)) != len(labels):
            raise InvalidArgumentError("state labels must be distinct")

    @property
    def k(self) -> int:
        return len(self.labels)

    def index(self, label) -> int:
        return self.labels.index(str(label))

    @staticmethod
    def of_size(k: int) -> "StateSpace":
        return StateSpace(tuple(str(i) for i in range(k)))


@dataclass(frozen=True)
class Distribution:
    """A probability law on a StateSpace."""

    space: StateSpace
    p: tuple

    def __post_init__(self):
        p = tuple(float(x) for x in self.p)
        if len(p) != self.space.k:
            raise InvalidArgumentError("probability vector length != k")
        if any(x < NEG_CLAMP for x in p):
            raise InvalidArgumentError("negative probability entry")
        p = tuple(0.0 if x < 0.0 else x for x in p)
        if abs(math.fsum(p) - 1.0) > MASS_TOL:
            raise InvalidArgumentError("probabilities do not sum to 1")
        object.__setattr__(self, "p", p)

    def as_array(self) -> np.ndarray:
        return np.array(self.p, dtype=float)

    @staticmethod
    def uniform(space: StateSpace) -> "Distribution":
        return Distribution(space, (1.0 / space.k,) * space.k)

    @staticmethod
    def point_mass(space: StateSpace, i: int) -> "Distribution":
        p = [0.0] * space.k
        p[i] = 1.0
        return Distribution(space, tuple(p))


@dataclass(frozen=True)
class EmpiricalLaw:
    """A finitely supported law on P(S): atoms are (Distribution, mass)."""

    atoms: tuple

    def __post_init__(self):
        total = math.fsum(mass for _, mass in self.atoms)
        if abs(total - 1.0) > MASS_TOL:
            raise InvalidArgumentError("empirical-law masses do not sum to 1")


def _compositions(n: int, k: int) -> Iterator[Occupancy]:
    # Canonical enumeration order: first coordinate descending, recursively.
    if k == 1:
        yield (n,)
        return
    for first in range(n, -1, -1):
        for rest in _compositions(n - first, k - 1):
            yield (first,) + rest


def enumerate_occupancies(space: StateSpace, n: int) -> list:
    """All occupancy vectors of n particles over the space, in canonical order."""
    if n < 1:
        raise InvalidArgumentError(f"particle count must be >= 1, got {n}")
    return list(_compositions(n, space.k))


def occupancy_sort_key(m: Occupancy):
    """Sort key reproducing the enumeration order of enumerate_occupancies."""
    return tuple(-x for x in m)


def class_size(m: Occupancy) -> int:
    """Orbit size of the occupancy class under coordinate permutations.

    Exact multinomial coefficient n! / prod(m_i!), as a Python big integer.
    """
    n = sum(m)
    size = math.factorial(n)
    for mi in m:
        size //= math.factorial(mi)
    return size


def occupancy_of(space: StateSpace, s: Sequence) -> Occupancy:
    m = [0] * space.k
    for si in s:
        m[si] += 1
    return tuple(m)


def _check_dense_capacity(k: int, n: int) -> None:
    if n * math.log2(k if k > 1 else 2) > DENSE_INDEX_BITS:
        raise CapacityError(
            f"dense ordered law needs {n} * log2({k}) <= {DENSE_INDEX_BITS} index bits"
        )


class OrderedLaw:
    """Dense law on S^n indexed by ordered tuples; small-n oracle only.

    The flat index treats the first coordinate as most significant:
    index(s) = sum_i s_i * k^(n-1-i).
    """

    def __init__(self, space: StateSpace, n: int, probs):
        _check_dense_capacity(space.k, n)
        probs = np.asarray(probs, dtype=float)
        if probs.shape != (space.k**n,):
            raise InvalidArgumentError("dense vector has wrong length")
        if probs.min() < NEG_CLAMP:
            raise InvalidArgumentError("negative dense probability")
        probs = np.where(probs < 0.0, 0.0, probs)
        if abs(math.fsum(probs.tolist()) - 1.0) > MASS_TOL:
            raise InvalidArgumentError("dense probabilities do not sum to 1")
        self.space = space
        self.n = n
        self.probs = probs

    def index(self, s: Sequence) -> int:
        idx = 0
        for si in s:
            idx = idx * self.space.k + si
        return idx

    def tuples(self) -> Iterator[tuple]:
        return itertools.product(range(self.space.k), repeat=self.n)


class SymmetricLaw:
    """A symmetric law on S^n stored as mass per occupancy class."""

    def __init__(self, space: StateSpace, n: int, classes: dict):
        if n < 1:
            raise InvalidArgumentError("particle count must be >= 1")
        clean = {}
        for m, mass in classes.items():
            m = tuple(int(x) for x in m)
            if len(m) != space.k or any(x < 0 for x in m) or sum(m) != n:
                raise InvalidArgumentError(f"bad occupancy key {m} for n={n}, k={space.k}")
            mass = float(mass)
            if mass < NEG_CLAMP:
                raise InvalidArgumentError(f"negative class mass {mass} at {m}")
            if mass > 0.0:
                clean[m] = mass
        if abs(math.fsum(clean.values()) - 1.0) > MASS_TOL:
            raise InvalidArgumentError("class masses do not sum to 1")
        self.space = space
        self.n = n
        self.classes = dict(sorted(clean.items(), key=lambda kv: occupancy_sort_key(kv[0])))

    def mass(self, m: Occupancy) -> float:
        return self.classes.get(tuple(m), 0.0)

    def items(self):
        return self.classes.items()

    @staticmethod
    def point_class(space: StateSpace, m: Occupancy) -> "SymmetricLaw":
        return SymmetricLaw(space, sum(m), {tuple(m): 1.0})

    @staticmethod
    def mixture(components) -> "SymmetricLaw":
        """Convex combination of symmetric laws on the same space and n."""
        components = list(components)
        space = components[0][0].space
        n = components[0][0].n
        out: dict = {}
        for law, weight in components:
            if law.space != space or law.n != n:
                raise InvalidArgumentError("mixture components live on different spaces")
            for m, mass in law.items():
                out[m] = out.get(m, 0.0) + weight * mass
        return SymmetricLaw(space, n, out)


def _multinomial_times_powers(m: Occupancy, p: Sequence) -> float:
    for pi, mi in zip(p, m):
        if mi and pi == 0.0:
            return 0.0
    cs = class_size(m)
    try:
        mass = float(cs)
    except OverflowError:
        log_mass = math.lgamma(sum(m) + 1) - math.fsum(math.lgamma(mi + 1) for mi in m)
        log_mass += math.fsum(mi * math.log(pi) for pi, mi in zip(p, m) if mi)
        return math.exp(log_mass)
    for pi, mi in zip(p, m):
        mass *= pi**mi
    return mass


def product_law(p: Distribution, n: int) -> SymmetricLaw:
    """The i.i.d. law p^(x)n in occupancy form: multinomial(n, p)."""
    if n < 1:
        raise InvalidArgumentError("particle count must be >= 1")
    classes = {
        m: _multinomial_times_powers(m, p.p) for m in enumerate_occupancies(p.space, n)
    }
    return SymmetricLaw(p.space, n, classes)


def symmetrize(dense: OrderedLaw) -> SymmetricLaw:
    """Aggregate a dense ordered law over permutation orbits.

    Equals averaging over all n! permutations and then grouping by class.
    """
    buckets: dict = {}
    for idx, s in enumerate(dense.tuples()):
        pr = dense.probs[idx]
        if pr == 0.0:
            continue
        buckets.setdefault(occupancy_of(dense.space, s), []).append(pr)
    classes = {m: math.fsum(v) for m, v in buckets.items()}
    return SymmetricLaw(dense.space, dense.n, classes)


def to_dense(law: SymmetricLaw) -> OrderedLaw:
    """Expand a symmetric law to the dense ordered oracle representation."""
    _check_dense_capacity(law.space.k, law.n)
    per_point = {m: mass / class_size(m) for m, mass in law.items()}
    probs = np.zeros(law.space.k**law.n)
    for idx, s in enumerate(itertools.product(range(law.space.k), repeat=law.n)):
        pr = per_point.get(occupancy_of(law.space, s))
        if pr is not None:
            probs[idx] = pr
    return OrderedLaw(law.space, law.n, probs)


def marginal(law: SymmetricLaw, j: int) -> SymmetricLaw:
    """Law of the first j coordinates, again in occupancy form.

    An ordered j-tuple with counts c has probability
        sum_m mass(m) * prod_i (m_i)_(c_i) / (n)_j
    with falling factorials computed exactly.
    """
    n = law.n
    if not 1 <= j <= n:
        raise InvalidArgumentError(f"marginal order {j} out of range 1..{n}")
    if j == n:
        return law
    denom = math.perm(n, j)
    items = list(law.items())
    classes = {}
    for c in enumerate_occupancies(law.space, j):
        terms = []
        for m, mass in items:
            w = 1
            for mi, ci in zip(m, c):
                if ci > mi:
                    w = 0
                    break
                if ci:
                    w *= math.perm(mi, ci)
            if w:
                terms.append(mass * (w / denom))
        ordered_prob = math.fsum(terms)
        if ordered_prob > 0.0:
            classes[c] = ordered_prob * class_size(c)
    return SymmetricLaw(law.space, j, classes)


def tv_distance(a, b) -> float:
    """Total variation distance: half the L1 distance over ordered points.

    Accepts two Distributions or two SymmetricLaws on the same space (and n).
    For symmetric laws the class masses already aggregate orbits, so the
    ordered-point L1 equals the class-mass L1.
    """
    if isinstance(a, Distribution) and isinstance(b, Distribution):
        if a.space != b.space:
            raise InvalidArgumentError("distributions on different spaces")
        return 0.5 * math.fsum(abs(x - y) for x, y in zip(a.p, b.p))
    if isinstance(a, SymmetricLaw) and isinstance(b, SymmetricLaw):
        if a.space != b.space or a.n != b.n:
            raise InvalidArgumentError("laws on different spaces or particle counts")
        keys = set(a.classes) | set(b.classes)
        return 0.5 * math.fsum(abs(a.mass(m) - b.mass(m)) for m in keys)
    raise InvalidArgumentError("tv_distance needs two objects of the same kind")


def specific_loglik(law: SymmetricLaw) -> float:
    """(1/n) * sum over ordered points of rho log rho, with 0 log 0 = 0.

    In class form this is (1/n) * sum_m mass(m) log(mass(m) / class_size(m)).
    """
    terms = []
    for m, mass in law.items():
        if mass > 0.0:
            terms.append(mass * (math.log(mass) - _log_class_size(m)))
    return math.fsum(terms) / law.n


def _log_class_size(m: Occupancy) -> float:
    cs = class_size(m)
    if cs.bit_length() < 1000:
        return math.log(cs)
    return math.lgamma(sum(m) + 1) - math.fsum(math.lgamma(mi + 1) for mi in m)


def empirical_distribution(space: StateSpace, m: Occupancy) -> Distribution:
    n = sum(m)
    return Distribution(space, tuple(mi / n for mi in m))


def empirical_pushforward(law: SymmetricLaw) -> EmpiricalLaw:
    """Pushforward of the law under the empirical-measure map s -> eps_n(s)."""
    atoms = tuple(
        (empirical_distribution(law.space, m), mass) for m, mass in law.items()
    )
    return EmpiricalLaw(atoms)


def mean_empirical_tv(law: SymmetricLaw, p: Distribution) -> float:
    """Expected TV distance between the empirical measure and p under the law."""
    if law.space != p.space:
        raise InvalidArgumentError("law and target on different spaces")
    n = law.n
    terms = [
        mass * 0.5 * math.fsum(abs(mi / n - pi) for mi, pi in zip(m, p.p))
        for m, mass in law.items()
    ]
    return math.fsum(terms)


# JSON wire format for symmetric laws:
#   {"labels": [...], "n": N, "classes": [{"m": [...], "mass": x}, ...]}
# with classes in the canonical enumeration order and 17-significant-digit
# masses (so serialization round-trips doubles exactly).


def law_to_json(law: SymmetricLaw) -> str:
    labels = ",".join(f'"{x}"' for x in law.space.labels)
    rows = []
    for m, mass in law.items():
        rows.append('{"m":[%s],"mass":%.17g}' % (",".join(str(x) for x in m), mass))
    return '{"labels":[%s],"n":%d,"classes":[%s]}' % (labels, law.n, ",".join(rows))


def law_from_json(text: str) -> SymmetricLaw:
    import json

    doc = json.loads(text)
    space = StateSpace(tuple(doc["labels"]))
    classes = {tuple(row["m"]): float(row["mass"]) for row in doc["classes"]}
    return SymmetricLaw(space, int(doc["n"]), classes)
