"""Finite statistical-model ensembles: state space, group action, experiments."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

EPS_P = 1e-9
GROUP_CAP = 10_080

Perm = tuple[int, ...]


class GroupCapError(ValueError):
    """Raised when a group closure grows past the configured cap."""


def compose(g: Perm, h: Perm) -> Perm:
    """Return ``g * h`` (apply ``h`` first, then ``g``)."""
    return tuple(g[i] for i in h)


def inverse(g: Perm) -> Perm:
    inv = [0] * len(g)
    for i, j in enumerate(g):
        inv[j] = i
    return tuple(inv)


def is_bijection(images: Sequence[int], n: int | None = None) -> bool:
    n = len(images) if n is None else n
    return len(images) == n and sorted(images) == list(range(n))


@dataclass(frozen=True)
class StateSpace:
    size: int
    nu: tuple[float, ...] = ()
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.size < 1:
            raise ValueError("state space needs at least one point")
        if not self.nu:
            object.__setattr__(self, "nu", (1.0,) * self.size)
        else:
            object.__setattr__(self, "nu", tuple(float(w) for w in self.nu))
        if len(self.nu) != self.size:
            raise ValueError(f"expected {self.size} weights, got {len(self.nu)}")
        if any(w <= 0 for w in self.nu):
            raise ValueError("all weights of nu must be strictly positive")
        if self.labels is not None and len(self.labels) != self.size:
            raise ValueError("labels must name every point")

    @property
    def weights(self) -> np.ndarray:
        return np.asarray(self.nu, dtype=float)


@dataclass(frozen=True)
class GroupAction:
    """A finite permutation group on ``0..n-1`` together with its generators.

    ``elements[identity]`` is the identity. Elements are image tuples:
    ``g[i]`` is the image of point ``i``.
    """

    n: int
    generators: tuple[Perm, ...]
    elements: tuple[Perm, ...]
    identity: int = 0

    def __len__(self) -> int:
        return len(self.elements)

    def index(self, g: Sequence[int]) -> int:
        return self._lookup[tuple(g)]

    @property
    def _lookup(self) -> dict[Perm, int]:
        cache = self.__dict__.get("_lookup_cache")
        if cache is None:
            cache = {g: i for i, g in enumerate(self.elements)}
            object.__setattr__(self, "_lookup_cache", cache)
        return cache

    def multiply(self, i: int, j: int) -> int:
        return self._lookup[compose(self.elements[i], self.elements[j])]

    def invert(self, i: int) -> int:
        return self._lookup[inverse(self.elements[i])]

    def __eq__(self, other):
        if not isinstance(other, GroupAction):
            return NotImplemented
        return (self.n, self.generators, self.elements) == (
            other.n, other.generators, other.elements)

    def __hash__(self):
        return hash((self.n, self.generators, self.elements))


def close_group(generators: Sequence[Sequence[int]], n: int | None = None,
                cap: int = GROUP_CAP) -> GroupAction:
    """Close a set of permutations under composition.

    Elements are discovered breadth-first by word length in the generators;
    each new layer is sorted lexicographically. The identity comes first.
    """
    gens = tuple(tuple(int(i) for i in g) for g in generators)
    if n is None:
        if not gens:
            raise ValueError("need n when no generators are given")
        n = len(gens[0])
    for g in gens:
        if not is_bijection(g, n):
            raise ValueError(f"generator {g} is not a bijection of 0..{n - 1}")
    ident = tuple(range(n))
    elements = [ident]
    seen = {ident}
    layer = [ident]
    while layer:
        fresh = set()
        for x in layer:
            for g in gens:
                y = compose(g, x)
                if y not in seen:
                    fresh.add(y)
        layer = sorted(fresh)
        seen.update(layer)
        elements.extend(layer)
        if len(elements) > cap:
            raise GroupCapError(f"group closure exceeds cap of {cap} elements")
    return GroupAction(n=n, generators=gens, elements=tuple(elements), identity=0)


def trivial_group(n: int) -> GroupAction:
    return close_group([], n=n)


@dataclass(frozen=True)
class Experiment:
    """A discrete experiment whose parameter is a labeling of the state space.

    ``rows[t][x]`` is the probability of outcome ``x`` when the parameter
    label is ``t``; ``theta[phi]`` is the label at state ``phi``.
    """

    name: str
    outcomes: int
    theta: tuple[int, ...]
    rows: tuple[tuple[float, ...], ...]
    sample_group: GroupAction | None = None

    def __post_init__(self):
        object.__setattr__(self, "theta", tuple(int(t) for t in self.theta))
        object.__setattr__(
            self, "rows", tuple(tuple(float(p) for p in r) for r in self.rows))

    @property
    def table(self) -> np.ndarray:
        return np.asarray(self.rows, dtype=float).reshape(len(self.rows), self.outcomes)

    @property
    def n_labels(self) -> int:
        return len(self.rows)

    def probabilities(self) -> np.ndarray:
        """Matrix of shape ``(n, outcomes)``: the outcome law at each state."""
        return self.table[list(self.theta)]

    def event_profile(self, event) -> np.ndarray:
        idx = sorted(event)
        return self.probabilities()[:, idx].sum(axis=1)


@dataclass(frozen=True)
class Ensemble:
    space: StateSpace
    group: GroupAction
    experiments: tuple[Experiment, ...]

    def __post_init__(self):
        object.__setattr__(self, "experiments", tuple(self.experiments))

    @property
    def n(self) -> int:
        return self.space.size

    def experiment(self, name: str) -> Experiment:
        for ex in self.experiments:
            if ex.name == name:
                return ex
        raise KeyError(f"no experiment named {name!r}")


class Violation(NamedTuple):
    kind: str
    message: str
    experiment: str | None = None
    row: int | None = None
    entry: int | None = None


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    def __bool__(self) -> bool:
        # truthy when the ensemble is valid
        return not self.violations

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, kind, message, experiment=None, row=None, entry=None):
        self.violations.append(Violation(kind, message, experiment, row, entry))


def validate_experiment(ex: Experiment, n: int, report: ValidationReport | None = None,
                        eps: float = EPS_P) -> ValidationReport:
    report = ValidationReport() if report is None else report
    name = ex.name
    if ex.outcomes < 1:
        report.add("outcomes", "outcome count must be at least 1", name)
    if len(ex.theta) != n:
        report.add("theta", f"theta has {len(ex.theta)} values, expected {n}", name)
    labels = set(ex.theta)
    if labels != set(range(len(labels))):
        report.add("theta", "theta labels are not a contiguous range from 0", name)
    if len(ex.rows) != len(labels):
        report.add("rows", f"{len(ex.rows)} rows for {len(labels)} theta labels", name)
    for t, row in enumerate(ex.rows):
        if len(row) != ex.outcomes:
            report.add("row_length", f"row {t} has {len(row)} entries, expected {ex.outcomes}",
                       name, t)
            continue
        for x, p in enumerate(row):
            if not (-eps <= p <= 1 + eps) or p != p:
                report.add("range", f"P(x={x}|theta={t}) = {p} outside [0, 1]", name, t, x)
        total = sum(row)
        if abs(total - 1.0) > eps:
            report.add("normalization", f"row {t} sums to {total!r}", name, t)
    for t in range(len(ex.rows)):
        for u in range(t):
            r, s = ex.rows[t], ex.rows[u]
            if len(r) == len(s) and all(abs(p - q) <= eps for p, q in zip(r, s)):
                report.add("identifiability",
                           f"theta labels {u} and {t} share the same outcome law", name, t)
    if ex.sample_group is not None and ex.sample_group.n != ex.outcomes:
        report.add("sample_group", "sample group does not act on the outcomes", name)
    return report


def validate_ensemble(e: Ensemble, eps: float = EPS_P) -> ValidationReport:
    """Collect every violated invariant; an empty report means ``e`` is valid."""
    report = ValidationReport()
    n = e.space.size
    if e.group.n != n:
        report.add("group", f"group acts on {e.group.n} points, space has {n}")
    for g in e.group.elements:
        if not is_bijection(g, n):
            report.add("group", f"group element {g} is not a bijection")
    names = [ex.name for ex in e.experiments]
    if len(set(names)) != len(names):
        report.add("names", "experiment names are not unique")
    for ex in e.experiments:
        validate_experiment(ex, n, report, eps)
    return report


def orbits(e: Ensemble | GroupAction) -> list[list[int]]:
    """Partition the points into group orbits, ordered by smallest member."""
    group = e.group if isinstance(e, Ensemble) else e
    n = group.n
    seen = [False] * n
    result = []
    for start in range(n):
        if seen[start]:
            continue
        orbit = {start}
        queue = deque([start])
        seen[start] = True
        while queue:
            p = queue.popleft()
            for g in group.generators:
                q = g[p]
                if not seen[q]:
                    seen[q] = True
                    orbit.add(q)
                    queue.append(q)
        result.append(sorted(orbit))
    return result


def relabel(values: Sequence) -> tuple[int, ...]:
    """Relabel values by order of first appearance (restricted growth form)."""
    seen: dict = {}
    return tuple(seen.setdefault(v, len(seen)) for v in values)


def restrict_to_orbit(e: Ensemble, orbit: Sequence[int]) -> Ensemble:
    """Induced ensemble on one orbit, with points and labels renumbered."""
    points = sorted(orbit)
    if not points:
        raise ValueError("cannot restrict to an empty orbit")
    if points not in orbits(e):
        raise ValueError(f"{points} is not an orbit of the group")
    pos = {p: i for i, p in enumerate(points)}
    gens = [tuple(pos[g[p]] for p in points) for g in e.group.generators]
    group = close_group(gens, n=len(points))
    labels = None
    if e.space.labels is not None:
        labels = tuple(e.space.labels[p] for p in points)
    space = StateSpace(len(points), tuple(e.space.nu[p] for p in points), labels)
    experiments = []
    for ex in e.experiments:
        old = [ex.theta[p] for p in points]
        new = relabel(old)
        order = sorted(set(zip(new, old)))
        experiments.append(Experiment(ex.name, ex.outcomes, new,
                                      tuple(ex.rows[t] for _, t in order), ex.sample_group))
    return Ensemble(space, group, tuple(experiments))


def product_experiment(e1: Experiment, e2: Experiment, name: str | None = None) -> Experiment:
    """Compound experiment of two compatible experiments.

    Outcome ``(x1, x2)`` is numbered ``x1 * m2 + x2``.
    """
    if len(e1.theta) != len(e2.theta):
        raise ValueError("experiments live on different state spaces")
    pairs = list(zip(e1.theta, e2.theta))
    theta = relabel(pairs)
    first = {}
    for lab, pair in zip(theta, pairs):
        first.setdefault(lab, pair)
    t1, t2 = e1.table, e2.table
    rows = tuple(tuple(np.outer(t1[a], t2[b]).ravel()) for a, b in
                 (first[lab] for lab in range(len(first))))
    return Experiment(name or f"{e1.name}*{e2.name}", e1.outcomes * e2.outcomes, theta, rows)


class Coarsening(NamedTuple):
    experiment: Experiment
    label_map: tuple[int, ...]  # old theta label -> new theta label
    merged: tuple[tuple[int, ...], ...]  # groups of old labels that collapsed


def coarsen_experiment(ex: Experiment, outcome_merge: Sequence[int],
                       name: str | None = None, eps: float = EPS_P) -> Coarsening:
    """Merge outcomes; labels whose coarsened rows coincide are identified."""
    merge = [int(y) for y in outcome_merge]
    if len(merge) != ex.outcomes:
        raise ValueError("outcome_merge must map every outcome")
    m = max(merge) + 1
    if sorted(set(merge)) != list(range(m)):
        raise ValueError("outcome_merge must be onto a contiguous range")
    table = ex.table
    coarse = np.zeros((table.shape[0], m))
    for x, y in enumerate(merge):
        coarse[:, y] += table[:, x]
    reps: list[int] = []
    label_map = []
    for t in range(coarse.shape[0]):
        for k, r in enumerate(reps):
            if np.max(np.abs(coarse[t] - coarse[r])) <= eps:
                label_map.append(k)
                break
        else:
            label_map.append(len(reps))
            reps.append(t)
    merged = tuple(tuple(t for t, k in enumerate(label_map) if k == j)
                   for j in range(len(reps)))
    merged = tuple(grp for grp in merged if len(grp) > 1)
    theta = tuple(label_map[t] for t in ex.theta)
    rows = tuple(tuple(coarse[r]) for r in reps)
    return Coarsening(Experiment(name or ex.name, m, theta, rows), tuple(label_map), merged)
