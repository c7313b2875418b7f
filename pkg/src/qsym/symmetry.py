"""Permissible parametric functions under a finite group action."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .ensemble import (EPS_P, Ensemble, Experiment, GroupAction, StateSpace, close_group,
                       relabel)


@dataclass(frozen=True)
class ParametricFunction:
    """A labeling ``phi -> theta(phi)`` of the state space.

    Two functions that differ by a relabeling describe the same partition;
    ``key`` is the shared canonical form.
    """

    values: tuple[int, ...]

    def __post_init__(self):
        vals = tuple(int(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        if set(vals) != set(range(len(set(vals)))):
            raise ValueError("labels must be contiguous from 0")

    @classmethod
    def from_labels(cls, labels: Sequence) -> "ParametricFunction":
        """Build from arbitrary hashable labels (relabeled by first appearance)."""
        return cls(relabel(labels))

    @classmethod
    def constant(cls, n: int) -> "ParametricFunction":
        return cls((0,) * n)

    @classmethod
    def identity(cls, n: int) -> "ParametricFunction":
        return cls(tuple(range(n)))

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, phi: int) -> int:
        return self.values[phi]

    @property
    def n_labels(self) -> int:
        return len(set(self.values))

    @property
    def key(self) -> tuple[int, ...]:
        return relabel(self.values)

    @property
    def level_sets(self) -> list[list[int]]:
        sets: list[list[int]] = [[] for _ in range(self.n_labels)]
        for phi, t in enumerate(self.values):
            sets[t].append(phi)
        return sets

    def same_partition(self, other: "ParametricFunction") -> bool:
        return self.key == other.key


class InducedMap(NamedTuple):
    element: int
    label_map: tuple[int, ...]


class PermissibilityResult(NamedTuple):
    permissible: bool
    induced: tuple[InducedMap, ...] | None
    witness: tuple[int, int, int] | None  # (group element, phi', phi)

    def __bool__(self) -> bool:
        return self.permissible


class NotPermissibleError(ValueError):
    def __init__(self, message: str, witness=None):
        super().__init__(message)
        self.witness = witness


def _as_function(theta) -> ParametricFunction:
    if isinstance(theta, ParametricFunction):
        return theta
    return ParametricFunction.from_labels(theta)


def _label_map(theta: ParametricFunction, g: Sequence[int]):
    """Map of labels induced by ``g``, or the conflicting pair of points."""
    mapping: dict[int, int] = {}
    source: dict[int, int] = {}
    for phi, t in enumerate(theta.values):
        image = theta.values[g[phi]]
        if t in mapping and mapping[t] != image:
            return None, (source[t], phi)
        mapping.setdefault(t, image)
        source.setdefault(t, phi)
    return tuple(mapping[t] for t in range(theta.n_labels)), None


def check_permissible(theta, g: GroupAction) -> PermissibilityResult:
    """Decide whether every group element induces a well-defined label map.

    On failure the witness ``(element, phi1, phi2)`` has equal labels at
    ``phi1`` and ``phi2`` but different labels at their images.
    """
    theta = _as_function(theta)
    if len(theta) != g.n:
        raise ValueError("parametric function and group live on different point sets")
    induced = []
    for i, elem in enumerate(g.elements):
        lmap, clash = _label_map(theta, elem)
        if lmap is None:
            return PermissibilityResult(False, None, (i, *clash))
        induced.append(InducedMap(i, lmap))
    return PermissibilityResult(True, tuple(induced), None)


def _generators_permissible(theta: ParametricFunction, gens) -> bool:
    # compatibility with generators implies compatibility with the closure
    return all(_label_map(theta, g)[0] is not None for g in gens)


def induce_group(theta, g: GroupAction) -> list[InducedMap]:
    """The label permutations induced by each group element.

    Raises NotPermissibleError when ``theta`` does not admit them. The
    returned family is checked to be a homomorphic image of ``g``.
    """
    theta = _as_function(theta)
    res = check_permissible(theta, g)
    if not res:
        elem, p1, p2 = res.witness
        raise NotPermissibleError(
            f"theta is not permissible: element {elem} separates points {p1} and {p2}",
            res.witness)
    maps = [m.label_map for m in res.induced]
    for i in range(len(g)):
        inv = maps[g.invert(i)]
        if any(inv[maps[i][t]] != t for t in range(theta.n_labels)):
            raise AssertionError("induced maps do not respect inverses")
        for j in range(len(g)):
            prod = maps[g.multiply(i, j)]
            if any(prod[t] != maps[i][maps[j][t]] for t in range(theta.n_labels)):
                raise AssertionError("induced maps are not a homomorphic image")
    return list(res.induced)


def induced_group_action(theta, g: GroupAction) -> GroupAction:
    """The induced parameter group as a permutation group on the labels."""
    theta = _as_function(theta)
    maps = {m.label_map for m in induce_group(theta, g)}
    return close_group(sorted(maps), n=theta.n_labels)


def compose_permissible(eta, theta, g: GroupAction) -> ParametricFunction:
    """``zeta(phi) = eta(theta(phi))`` for ``eta`` permissible under the induced group."""
    theta = _as_function(theta)
    eta = _as_function(eta)
    if len(eta) != theta.n_labels:
        raise ValueError("eta must be defined on the labels of theta")
    induced = induced_group_action(theta, g)
    res = check_permissible(eta, induced)
    if not res:
        raise NotPermissibleError("eta is not permissible under the induced group",
                                  res.witness)
    zeta = ParametricFunction.from_labels([eta[t] for t in theta.values])
    if not check_permissible(zeta, g):
        raise AssertionError("composition of permissible functions lost permissibility")
    return zeta


def join_functions(functions: Sequence, g: GroupAction | None = None) -> ParametricFunction:
    """Common refinement of several labelings of the same points."""
    funcs = [_as_function(f) for f in functions]
    if not funcs:
        raise ValueError("need at least one function")
    n = len(funcs[0])
    if any(len(f) != n for f in funcs):
        raise ValueError("functions live on different point sets")
    joined = ParametricFunction.from_labels(list(zip(*(f.values for f in funcs))))
    if g is not None and all(check_permissible(f, g) for f in funcs):
        if not check_permissible(joined, g):
            raise AssertionError("join of permissible functions is not permissible")
    return joined


def preceq(theta1, theta2) -> bool:
    """True when ``theta1`` is a function of ``theta2``."""
    theta1, theta2 = _as_function(theta1), _as_function(theta2)
    if len(theta1) != len(theta2):
        raise ValueError("functions live on different point sets")
    seen: dict[int, int] = {}
    for a, b in zip(theta1.values, theta2.values):
        if seen.setdefault(b, a) != a:
            return False
    return True


def equivalence_classes(functions: Sequence) -> list[list[ParametricFunction]]:
    """Group functions that are one-to-one relabelings of each other."""
    classes: dict[tuple, list[ParametricFunction]] = {}
    for f in functions:
        f = _as_function(f)
        classes.setdefault(f.key, []).append(f)
    return list(classes.values())


def set_partitions(n: int) -> Iterator[tuple[int, ...]]:
    """All restricted growth strings of length ``n`` in lexicographic order."""
    if n == 0:
        yield ()
        return
    word = [0] * n

    def rec(i: int, top: int):
        if i == n:
            yield tuple(word)
            return
        for v in range(top + 2):
            word[i] = v
            yield from rec(i + 1, max(top, v))

    word[0] = 0
    yield from rec(1, 0)


def enumerate_permissible(g: GroupAction, max_n: int = 10) -> list[ParametricFunction]:
    """One representative per permissible partition, in restricted-growth order."""
    if g.n > max_n:
        raise ValueError(f"{g.n} points exceeds enumeration limit max_n={max_n}")
    gens = g.generators
    out = []
    for word in set_partitions(g.n):
        f = ParametricFunction(word)
        if _generators_permissible(f, gens):
            out.append(f)
    return out


def profile_matrix(e: Ensemble) -> np.ndarray:
    """Concatenated outcome laws of every experiment, one row per state."""
    if not e.experiments:
        return np.zeros((e.n, 0))
    return np.hstack([ex.probabilities() for ex in e.experiments])


def minimize_state_space(e: Ensemble, eps: float = EPS_P):
    """Quotient the states by equality of their full probability profile.

    Returns ``(ensemble, quotient)`` where ``quotient[phi]`` is the class of
    ``phi``. Raises NotPermissibleError if the group does not descend.
    """
    prof = profile_matrix(e)
    reps: list[int] = []
    quotient = []
    for phi in range(e.n):
        for k, r in enumerate(reps):
            if np.max(np.abs(prof[phi] - prof[r]), initial=0.0) <= eps:
                quotient.append(k)
                break
        else:
            quotient.append(len(reps))
            reps.append(phi)
    q = ParametricFunction(tuple(quotient))
    res = check_permissible(q, e.group)
    if not res:
        raise NotPermissibleError(
            "the group action does not descend to the minimal state space", res.witness)
    gens = sorted({_label_map(q, g)[0] for g in e.group.generators})
    group = close_group(gens, n=len(reps))
    nu = [0.0] * len(reps)
    for phi, k in enumerate(quotient):
        nu[k] += e.space.nu[phi]
    labels = None
    if e.space.labels is not None:
        labels = tuple(e.space.labels[r] for r in reps)
    experiments = []
    for ex in e.experiments:
        theta = tuple(ex.theta[r] for r in reps)
        experiments.append(Experiment(ex.name, ex.outcomes, theta, ex.rows, ex.sample_group))
    return Ensemble(StateSpace(len(reps), tuple(nu), labels), group, tuple(experiments)), q
