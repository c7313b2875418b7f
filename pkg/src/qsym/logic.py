"""Propositions as probability profiles, and the poset they generate.

A proposition is an (experiment, event) pair; it is identified with its
profile ``phi -> P(event | theta(phi))``. Order is pointwise domination of
profiles and the orthocomplement is the complementary event.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .ensemble import EPS_P, Ensemble, Experiment, relabel
from .symmetry import (GroupAction, NotPermissibleError, ParametricFunction, check_permissible,
                       join_functions)

POSET_CAP = 4096


@dataclass(frozen=True, eq=False)
class Proposition:
    profile: tuple[float, ...]
    origin: str
    experiment: Experiment | None = None
    event: frozenset[int] | None = None
    theta: ParametricFunction | None = None

    @property
    def values(self) -> np.ndarray:
        return np.asarray(self.profile, dtype=float)

    def __len__(self) -> int:
        return len(self.profile)

    def __repr__(self) -> str:
        vals = ", ".join(f"{v:.6g}" for v in self.profile)
        return f"Proposition({self.origin}: [{vals}])"


def _event_origin(ex: Experiment, event) -> str:
    return f"{ex.name}:{{{','.join(str(x) for x in sorted(event))}}}"


def proposition_of(ex: Experiment, event: Iterable[int]) -> Proposition:
    """The proposition ``(experiment, event)``."""
    event = frozenset(int(x) for x in event)
    if any(not 0 <= x < ex.outcomes for x in event):
        raise ValueError(f"event {sorted(event)} is not a subset of the outcomes of {ex.name}")
    profile = ex.event_profile(event)
    return Proposition(tuple(profile), _event_origin(ex, event), ex, event,
                       ParametricFunction(ex.theta))


def constant_proposition(n: int, value: float) -> Proposition:
    return Proposition((float(value),) * n, "one" if value else "zero",
                       theta=ParametricFunction.constant(n))


def leq(p1: Proposition, p2: Proposition, eps: float = EPS_P) -> bool:
    if len(p1) != len(p2):
        raise ValueError("propositions live on different state spaces")
    return bool(np.all(p1.values <= p2.values + eps))


def equivalent(p1: Proposition, p2: Proposition, eps: float = EPS_P) -> bool:
    return leq(p1, p2, eps) and leq(p2, p1, eps)


def orthocomplement(p: Proposition) -> Proposition:
    profile = tuple(1.0 - v for v in p.profile)
    if p.experiment is not None and p.event is not None:
        rest = frozenset(range(p.experiment.outcomes)) - p.event
        return Proposition(profile, _event_origin(p.experiment, rest), p.experiment, rest,
                           p.theta)
    return Proposition(profile, f"not({p.origin})", theta=p.theta)


def is_orthogonal(props: Sequence[Proposition], eps: float = EPS_P) -> bool:
    """Profiles sum to at most one at every state."""
    if not props:
        return True
    total = np.zeros(len(props[0]))
    for p in props:
        total = total + p.values
    return bool(np.all(total <= 1.0 + eps))


class Assumption1Report(NamedTuple):
    violations: list[tuple[int, ...]]  # index tuples into the scanned list
    scanned: int

    @property
    def ok(self) -> bool:
        return not self.violations


def check_assumption1(props: Sequence[Proposition] | "PropositionPoset", max_k: int = 3,
                      eps: float = EPS_P) -> Assumption1Report:
    """Find pairwise orthogonal families of size 3..max_k that are not orthogonal."""
    if isinstance(props, PropositionPoset):
        props = props.propositions
    P = np.array([p.values for p in props])
    if len(P) == 0:
        return Assumption1Report([], 0)
    S = P[:, None, :] + P[None, :, :]
    pair_ok = np.all(S <= 1.0 + eps, axis=2)
    violations = []
    scanned = 0
    for k in range(3, max_k + 1):
        for combo in itertools.combinations(range(len(P)), k):
            if not all(pair_ok[i, j] for i, j in itertools.combinations(combo, 2)):
                continue
            scanned += 1
            if np.any(P[list(combo)].sum(axis=0) > 1.0 + eps):
                violations.append(combo)
    return Assumption1Report(violations, scanned)


def _theta_of(p: Proposition) -> ParametricFunction:
    if p.theta is not None:
        return p.theta
    # the coarsest labeling the profile factors through
    return ParametricFunction.from_labels(np.round(p.values, 12))


def _experiment_from_columns(name: str, theta: ParametricFunction, columns: np.ndarray,
                             eps: float = EPS_P) -> Experiment:
    """Experiment whose outcome law at each state is the given row of ``columns``.

    Labels whose rows coincide are identified so the result is identifiable.
    """
    reps = {t: phi for phi, t in reversed(list(enumerate(theta.values)))}
    raw = [columns[reps[t]] for t in range(theta.n_labels)]
    keep: list[np.ndarray] = []
    label_map = []
    for row in raw:
        for k, r in enumerate(keep):
            if np.max(np.abs(row - r)) <= eps:
                label_map.append(k)
                break
        else:
            label_map.append(len(keep))
            keep.append(row)
    new_theta = relabel(label_map[t] for t in theta.values)
    order = {}
    for t in theta.values:
        order.setdefault(label_map[t], len(order))
    rows = [None] * len(keep)
    for k, j in order.items():
        rows[j] = tuple(float(v) for v in keep[k])
    return Experiment(name, columns.shape[1], new_theta, tuple(rows))


def synthesize_joint(props: Sequence[Proposition], name: str = "joint",
                     eps: float = EPS_P) -> tuple[Experiment, list[frozenset[int]]]:
    """A synthetic experiment holding disjoint events that reproduce each profile.

    Outcome ``i`` carries the probability of ``props[i]``; the last outcome
    takes the remaining mass.
    """
    if not props:
        raise ValueError("need at least one proposition")
    if not is_orthogonal(props, eps):
        raise ValueError("propositions are not orthogonal; no joint experiment exists")
    theta = join_functions([_theta_of(p) for p in props])
    k = len(props)
    cols = np.empty((len(props[0]), k + 1))
    for i, p in enumerate(props):
        cols[:, i] = p.values
    rest = 1.0 - cols[:, :k].sum(axis=1)
    cols[:, k] = np.where(np.abs(rest) <= eps, 0.0, np.clip(rest, 0.0, 1.0))
    ex = _experiment_from_columns(name, theta, cols, eps)
    return ex, [frozenset({i}) for i in range(k)]


def sup_orthogonal(p1: Proposition, p2: Proposition, eps: float = EPS_P) -> Proposition:
    """Supremum of two orthogonal propositions: the profiles add."""
    if not is_orthogonal([p1, p2], eps):
        raise ValueError("propositions are not orthogonal")
    ex, events = synthesize_joint([p1, p2], name=f"join({p1.origin},{p2.origin})", eps=eps)
    event = events[0] | events[1]
    profile = tuple(float(v) for v in p1.values + p2.values)
    return Proposition(profile, f"{p1.origin} v {p2.origin}", ex, event,
                       ParametricFunction(ex.theta))


def sup_general(props: Sequence[Proposition], group: GroupAction | None = None,
                eps: float = EPS_P) -> Proposition:
    """Least proposition measurable in the joint parameter that dominates all inputs.

    The value at each joint label is the largest input probability there;
    it is realized as a two-outcome experiment in the joint parameter.
    """
    if not props:
        raise ValueError("need at least one proposition")
    if len(props) == 1:
        return props[0]
    thetas = [_theta_of(p) for p in props]
    theta = join_functions(thetas)
    if group is not None:
        res = check_permissible(theta, group)
        if not res:
            raise NotPermissibleError("joint parameter is not permissible", res.witness)
    top = np.max(np.array([p.values for p in props]), axis=0)
    cols = np.column_stack([top, 1.0 - top])
    name = "sup(" + ",".join(p.origin for p in props) + ")"
    ex = _experiment_from_columns(name, theta, cols, eps)
    sup = Proposition(tuple(float(v) for v in top), name, ex, frozenset({0}),
                      ParametricFunction(ex.theta))
    for p in props:
        if not leq(p, sup, eps):
            raise AssertionError("supremum fails to dominate an input")
    return sup


class _ProfileIndex:
    """Lookup of profiles up to a tolerance, using two offset rounding grids."""

    def __init__(self, eps: float):
        self.eps = eps
        self.step = max(eps * 100, 1e-7)
        self.maps: tuple[dict, dict] = ({}, {})
        self.profiles: list[np.ndarray] = []

    def _keys(self, p: np.ndarray):
        return (tuple(np.round(p / self.step).astype(np.int64)),
                tuple(np.round(p / self.step + 0.5).astype(np.int64)))

    def find(self, p: np.ndarray) -> int | None:
        for m, key in zip(self.maps, self._keys(p)):
            i = m.get(key)
            if i is not None and np.max(np.abs(self.profiles[i] - p), initial=0.0) <= self.eps:
                return i
        return None

    def add(self, p: np.ndarray) -> int:
        i = len(self.profiles)
        self.profiles.append(p)
        for m, key in zip(self.maps, self._keys(p)):
            m.setdefault(key, i)
        return i


@dataclass
class PropositionPoset:
    """Propositions identified by profile, ordered by pointwise domination.

    ``sups`` maps an orthogonal pair of indices to the index of its supremum
    (the element whose profile is the sum of the two).
    """

    n: int
    eps: float = EPS_P
    cap: int = POSET_CAP
    propositions: list[Proposition] = field(default_factory=list)
    sups: dict[tuple[int, int], int] = field(default_factory=dict)
    collisions: int = 0
    rounds: int = 0

    def __post_init__(self):
        self._index = _ProfileIndex(self.eps)
        self._leq = None
        self.zero = self.add(constant_proposition(self.n, 0.0))
        self.one = self.add(constant_proposition(self.n, 1.0))

    def __len__(self) -> int:
        return len(self.propositions)

    def __getitem__(self, i: int) -> Proposition:
        return self.propositions[i]

    @property
    def profiles(self) -> np.ndarray:
        return np.array([p.values for p in self.propositions]).reshape(len(self), self.n)

    def find(self, p: Proposition | np.ndarray) -> int | None:
        vals = p.values if isinstance(p, Proposition) else np.asarray(p, dtype=float)
        return self._index.find(vals)

    def add(self, p: Proposition) -> int:
        """Insert ``p`` unless an equivalent profile is present; return its index."""
        if len(p) != self.n:
            raise ValueError("proposition lives on a different state space")
        i = self.find(p)
        if i is not None:
            if self.propositions[i].origin != p.origin:
                self.collisions += 1
            return i
        if len(self.propositions) >= self.cap:
            raise OverflowError(f"proposition poset exceeds cap of {self.cap} elements")
        self.propositions.append(p)
        self._index.add(p.values)
        self._leq = None
        return len(self.propositions) - 1

    def index(self, p: Proposition) -> int:
        i = self.find(p)
        if i is None:
            raise KeyError(f"{p!r} is not in the poset")
        return i

    @property
    def leq_matrix(self) -> np.ndarray:
        if self._leq is None or self._leq.shape[0] != len(self):
            P = self.profiles
            self._leq = np.all(P[:, None, :] <= P[None, :, :] + self.eps, axis=2)
        return self._leq

    def leq(self, i: int, j: int) -> bool:
        return bool(self.leq_matrix[i, j])

    def complement(self, i: int) -> int | None:
        return self.find(1.0 - self.propositions[i].values)

    def orthogonal(self, i: int, j: int) -> bool:
        s = self.propositions[i].values + self.propositions[j].values
        return bool(np.all(s <= 1.0 + self.eps))

    def orthogonal_sup(self, i: int, j: int) -> int | None:
        """Index of the supremum of an orthogonal pair, if materialized."""
        key = (min(i, j), max(i, j))
        k = self.sups.get(key)
        if k is None and self.orthogonal(i, j):
            k = self.find(self.propositions[i].values + self.propositions[j].values)
            if k is not None:
                self.sups[key] = k
        return k

    def add_orthogonal_sup(self, i: int, j: int) -> int:
        key = (min(i, j), max(i, j))
        if key in self.sups:
            return self.sups[key]
        k = self.find(self.propositions[i].values + self.propositions[j].values)
        if k is None:
            k = self.add(sup_orthogonal(self.propositions[i], self.propositions[j], self.eps))
        self.sups[key] = k
        return k

    def add_complement(self, i: int) -> int:
        k = self.complement(i)
        return k if k is not None else self.add(orthocomplement(self.propositions[i]))

    def upper_bounds(self, i: int, j: int) -> np.ndarray:
        L = self.leq_matrix
        return np.nonzero(L[i] & L[j])[0]

    def lower_bounds(self, i: int, j: int) -> np.ndarray:
        L = self.leq_matrix
        return np.nonzero(L[:, i] & L[:, j])[0]

    def join(self, i: int, j: int) -> tuple[int, bool]:
        """Least upper bound of two elements.

        Returns ``(index, exact)``; when no least upper bound exists the first
        minimal upper bound is returned with ``exact=False``.
        """
        L = self.leq_matrix
        up = self.upper_bounds(i, j)
        sub = L[np.ix_(up, up)]
        least = np.nonzero(sub.all(axis=1))[0]
        if len(least):
            return int(up[least[0]]), True
        minimal = [u for a, u in enumerate(up) if not any(sub[b, a] and not sub[a, b]
                                                          for b in range(len(up)))]
        return int(minimal[0]), False

    def meet(self, i: int, j: int) -> tuple[int, bool]:
        """Greatest lower bound, computed as the complement of the join of complements."""
        ci, cj = self.complement(i), self.complement(j)
        if ci is not None and cj is not None:
            k, exact = self.join(ci, cj)
            ck = self.complement(k)
            if ck is not None:
                return ck, exact
        L = self.leq_matrix
        low = self.lower_bounds(i, j)
        sub = L[np.ix_(low, low)]
        greatest = np.nonzero(sub.all(axis=0))[0]
        if len(greatest):
            return int(low[greatest[0]]), True
        maximal = [u for a, u in enumerate(low) if not any(sub[a, b] and not sub[b, a]
                                                           for b in range(len(low)))]
        return int(maximal[0]), False

    def copy(self) -> "PropositionPoset":
        new = PropositionPoset(self.n, self.eps, self.cap)
        new.propositions = list(self.propositions)
        new._index = _ProfileIndex(self.eps)
        for p in new.propositions:
            new._index.add(p.values)
        new.sups = dict(self.sups)
        new.collisions = self.collisions
        new.rounds = self.rounds
        return new


def event_propositions(ex: Experiment) -> list[Proposition]:
    return [proposition_of(ex, [x for x in range(ex.outcomes) if mask >> x & 1])
            for mask in range(2 ** ex.outcomes)]


def build_poset(e: Ensemble, closure: str | None = None, rounds: int = 1,
                cap: int = POSET_CAP, eps: float = EPS_P) -> PropositionPoset:
    """All event propositions of the ensemble, optionally closed.

    ``closure`` is ``None`` (events only), ``"orthomodular"`` (complements and
    the orthogonal suprema ``q' v p`` for comparable ``p <= q``) or ``"full"``
    (complements and every orthogonal supremum). Closure runs for at most
    ``rounds`` passes, stopping early at a fixpoint.
    """
    if closure not in (None, "none", "orthomodular", "full"):
        raise ValueError(f"unknown closure mode {closure!r}")
    poset = PropositionPoset(e.n, eps, cap)
    for ex in e.experiments:
        for p in event_propositions(ex):
            poset.add(p)
    if closure in (None, "none"):
        return poset
    for _ in range(rounds):
        size = len(poset)
        if closure == "full":
            P = poset.profiles
            ortho = np.all(P[:, None, :] + P[None, :, :] <= 1.0 + eps, axis=2)
            for i, j in zip(*np.nonzero(np.triu(ortho))):
                poset.add_orthogonal_sup(int(i), int(j))
        else:
            L = poset.leq_matrix.copy()
            for i, j in zip(*np.nonzero(L)):
                cj = poset.add_complement(int(j))
                s = poset.add_orthogonal_sup(cj, int(i))
                poset.add_complement(s)
        for i in range(len(poset)):
            poset.add_complement(i)
        poset.rounds += 1
        if len(poset) == size:
            break
    return poset


class OrthomodularReport(NamedTuple):
    witnesses: list[tuple[int, int, float]]  # (p1, p2, deviation)
    checked: int
    unchecked: int

    @property
    def ok(self) -> bool:
        return not self.witnesses


def check_orthomodular(poset: PropositionPoset, tol: float | None = None) -> OrthomodularReport:
    """Check ``q = p v (q' v p)'`` for every comparable pair ``p <= q``.

    Suprema come from the poset's table of orthogonal suprema; pairs whose
    needed suprema are not materialized are counted as unchecked.
    """
    tol = poset.eps if tol is None else tol
    L = poset.leq_matrix
    P = poset.profiles
    witnesses = []
    checked = unchecked = 0
    for i, j in zip(*np.nonzero(L)):
        i, j = int(i), int(j)
        cj = poset.complement(j)
        s = None if cj is None else poset.orthogonal_sup(cj, i)
        cs = None if s is None else poset.complement(s)
        r = None if cs is None else poset.orthogonal_sup(i, cs)
        if r is None:
            unchecked += 1
            continue
        checked += 1
        dev = float(np.max(np.abs(P[r] - P[j]), initial=0.0))
        if r != j and dev > tol:
            witnesses.append((i, j, dev))
    return OrthomodularReport(witnesses, checked, unchecked)


class DistributivityReport(NamedTuple):
    witnesses: list[dict]
    checked: int
    partial: int

    @property
    def ok(self) -> bool:
        return not self.witnesses


def check_distributive(poset: PropositionPoset,
                       triples: Iterable[tuple[int, int, int]] | None = None,
                       ) -> DistributivityReport:
    """Evaluate both distributive laws on the given (or all) triples.

    Triples where a needed join or meet is not exact are skipped and counted.
    """
    if triples is None:
        triples = itertools.product(range(len(poset)), repeat=3)
    witnesses = []
    checked = partial = 0
    for p, q, r in triples:
        j_qr, e1 = poset.join(q, r)
        m_qr, e2 = poset.meet(q, r)
        m_pq, e3 = poset.meet(p, q)
        m_pr, e4 = poset.meet(p, r)
        j_pq, e5 = poset.join(p, q)
        j_pr, e6 = poset.join(p, r)
        lhs_m, e7 = poset.meet(p, j_qr)
        rhs_m, e8 = poset.join(m_pq, m_pr)
        lhs_j, e9 = poset.join(p, m_qr)
        rhs_j, e10 = poset.meet(j_pq, j_pr)
        if not all((e1, e2, e3, e4, e5, e6, e7, e8, e9, e10)):
            partial += 1
            continue
        checked += 1
        if lhs_m != rhs_m:
            witnesses.append({"triple": (p, q, r), "law": "meet over join",
                              "lhs": lhs_m, "rhs": rhs_m})
        if lhs_j != rhs_j:
            witnesses.append({"triple": (p, q, r), "law": "join over meet",
                              "lhs": lhs_j, "rhs": rhs_j})
    return DistributivityReport(witnesses, checked, partial)


class AtomReport(NamedTuple):
    atoms: list[int]
    atomic: bool
    unsupported: list[int]  # nonzero elements above no atom
    covering_failures: list[tuple[int, int, int]]  # (element, atom, intermediate)
    covering_partial: int
    separable: bool = True  # finite posets are trivially separable


def check_atomic_covering_separable(poset: PropositionPoset) -> AtomReport:
    L = poset.leq_matrix
    N = len(poset)
    z = poset.zero
    strict = L & ~L.T
    nonzero = [i for i in range(N) if i != z]
    atoms = [i for i in nonzero if not any(strict[k, i] and k != z for k in nonzero)]
    unsupported = [i for i in nonzero if not any(L[a, i] for a in atoms)]
    failures = []
    partial = 0
    for p in range(N):
        for a in atoms:
            m, exact = poset.meet(p, a)
            if not exact:
                partial += 1
                continue
            if m != z:
                continue
            top, exact = poset.join(p, a)
            if not exact:
                partial += 1
                continue
            for k in range(N):
                if k not in (p, top) and L[p, k] and L[k, top]:
                    failures.append((p, a, k))
    return AtomReport(atoms, not unsupported, unsupported, failures, partial)
