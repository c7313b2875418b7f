"""Permutation representation on weighted functions over the state space.

Functions on the points are vectors; the inner product is weighted by
``nu``. A parametric function spans the subspace of functions constant on
its level sets, and projecting onto that subspace is a weighted
conditional mean.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .ensemble import GroupAction
from .symmetry import (ParametricFunction, _as_function, check_permissible, equivalence_classes,
                       preceq, set_partitions)

EPS_M = 1e-10


class NonInvariantMeasureError(ValueError):
    def __init__(self, message, element=None, point=None):
        super().__init__(message)
        self.element = element
        self.point = point


def _weights(nu, n: int) -> np.ndarray:
    if nu is None:
        return np.ones(n)
    w = np.asarray(nu, dtype=float)
    if w.shape != (n,) or np.any(w <= 0):
        raise ValueError("nu must hold one positive weight per point")
    return w


def permutation_unitary(g: Sequence[int]) -> np.ndarray:
    """Matrix of ``f -> f(g^-1 .)``: column ``phi`` has its one in row ``g[phi]``."""
    n = len(g)
    U = np.zeros((n, n), dtype=complex)
    U[list(g), np.arange(n)] = 1.0
    return U


def regular_rep(g: GroupAction, nu=None, check_homomorphism: bool = True) -> list[np.ndarray]:
    """Unitary operator of every group element, indexed like ``g.elements``."""
    w = _weights(nu, g.n)
    for i, elem in enumerate(g.elements):
        for phi in range(g.n):
            if abs(w[elem[phi]] - w[phi]) > EPS_M * max(1.0, abs(w[phi])):
                raise NonInvariantMeasureError(
                    f"nu is not invariant: element {i} moves point {phi} "
                    f"to a point of different weight", i, phi)
    mats = [permutation_unitary(elem) for elem in g.elements]
    if check_homomorphism and len(g) <= 60:
        for i in range(len(g)):
            for j in range(len(g)):
                if not np.allclose(mats[g.multiply(i, j)], mats[i] @ mats[j], atol=EPS_M):
                    raise AssertionError("representation is not a homomorphism")
    return mats


@dataclass(frozen=True, eq=False)
class Subspace:
    """Columns of ``basis`` are orthonormal in the ``nu``-weighted inner product."""

    basis: np.ndarray
    nu: np.ndarray
    generator: ParametricFunction | None = None

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def gram(self) -> np.ndarray:
        B = self.basis
        return B.conj().T @ (self.nu[:, None] * B)

    def projector(self) -> np.ndarray:
        """Weighted orthogonal projector ``B B^* W`` onto the subspace."""
        B = self.basis
        return B @ (B.conj().T * self.nu[None, :])

    def residual(self, vectors: np.ndarray) -> float:
        """Largest distance from the subspace among the given columns."""
        V = np.asarray(vectors, dtype=complex).reshape(self.basis.shape[0], -1)
        R = V - self.projector() @ V
        return float(np.max(np.abs(R), initial=0.0))


def subspace_of_function(theta, nu=None) -> Subspace:
    """Span of the weighted-normalized indicators of the level sets of ``theta``."""
    theta = _as_function(theta)
    n = len(theta)
    w = _weights(nu, n)
    B = np.zeros((n, theta.n_labels), dtype=complex)
    for t, level in enumerate(theta.level_sets):
        B[level, t] = 1.0 / np.sqrt(w[level].sum())
    return Subspace(B, w, theta)


def check_invariant(V: Subspace, rep: Sequence[np.ndarray], tol: float = EPS_M) -> bool:
    return all(V.residual(U @ V.basis) < tol for U in rep)


def subspace_contains(V1: Subspace, V2: Subspace, tol: float = EPS_M) -> bool:
    """True when ``V1`` is a subspace of ``V2``."""
    if V1.basis.shape[0] != V2.basis.shape[0]:
        raise ValueError("subspaces live in different ambient spaces")
    return V2.residual(V1.basis) < tol


@dataclass
class CorrespondenceReport:
    n_permissible: int
    n_invariant: int
    bijective: bool
    order_mismatches: list[tuple[tuple[int, ...], tuple[int, ...]]]
    unmatched: list[tuple[int, ...]]

    @property
    def ok(self) -> bool:
        return self.bijective and not self.order_mismatches and not self.unmatched


def correspondence_report(g: GroupAction, nu=None, max_n: int = 8,
                          tol: float = EPS_M) -> CorrespondenceReport:
    """Compare permissible partitions with invariant level-set subspaces.

    Both sides are enumerated independently: permissibility by the label-map
    criterion, invariance by applying every representation operator.
    """
    if g.n > max_n:
        raise ValueError(f"{g.n} points exceeds max_n={max_n}")
    rep = regular_rep(g, nu, check_homomorphism=False)
    permissible = []
    invariant = []
    spaces = {}
    for word in set_partitions(g.n):
        f = ParametricFunction(word)
        V = subspace_of_function(f, nu)
        spaces[word] = V
        if check_permissible(f, g):
            permissible.append(f)
        if check_invariant(V, rep, tol):
            invariant.append(word)
    classes = [c[0] for c in equivalence_classes(permissible)]
    perm_keys = {f.key for f in classes}
    unmatched = sorted(perm_keys.symmetric_difference(invariant))
    # distinct classes must give distinct subspaces
    injective = True
    for a in range(len(classes)):
        for b in range(a):
            Va, Vb = spaces[classes[a].key], spaces[classes[b].key]
            if subspace_contains(Va, Vb, tol) and subspace_contains(Vb, Va, tol):
                injective = False
    mismatches = []
    for f1 in classes:
        for f2 in classes:
            if preceq(f1, f2) != subspace_contains(spaces[f1.key], spaces[f2.key], tol):
                mismatches.append((f1.key, f2.key))
    return CorrespondenceReport(len(classes), len(invariant), injective and not unmatched,
                                mismatches, unmatched)


class Projection(NamedTuple):
    reduced: np.ndarray  # value per label
    lifted: np.ndarray  # value per point


def label_masses(theta, nu=None) -> np.ndarray:
    """Pushforward of ``nu`` onto the labels of ``theta``."""
    theta = _as_function(theta)
    w = _weights(nu, len(theta))
    return np.bincount(np.asarray(theta.values), weights=w, minlength=theta.n_labels)


def project_onto_function(f, theta, nu=None) -> Projection:
    """Weighted conditional mean of ``f`` given the level sets of ``theta``."""
    theta = _as_function(theta)
    f = np.asarray(f)
    w = _weights(nu, len(theta))
    labels = np.asarray(theta.values)
    mass = label_masses(theta, w)
    num = np.zeros(theta.n_labels, dtype=np.result_type(f, float))
    np.add.at(num, labels, f * w)
    reduced = num / mass
    return Projection(reduced, reduced[labels])


def integral_identity_residual(f, theta, nu=None) -> float:
    """Largest defect of the change-of-measure identity over indicator test functions."""
    theta = _as_function(theta)
    f = np.asarray(f)
    w = _weights(nu, len(theta))
    proj = project_onto_function(f, theta, w)
    mass = label_masses(theta, w)
    labels = np.asarray(theta.values)
    worst = 0.0
    for t in range(theta.n_labels):
        lhs = np.sum((labels == t) * f * w)
        rhs = proj.reduced[t] * mass[t]
        worst = max(worst, abs(lhs - rhs))
    return worst


def weighted_sq_distance(f, g, nu) -> float:
    d = np.asarray(f) - np.asarray(g)
    return float(np.sum(np.asarray(nu) * np.abs(d) ** 2))


@dataclass
class LeastSquaresReport:
    trials: int
    violations: int
    max_excess_error: float  # |excess - sum_t mass_t |g_t - f_t|^2|

    @property
    def ok(self) -> bool:
        return self.violations == 0


def check_least_squares(f, theta, nu=None, trials: int = 1000, seed: int = 0,
                        scale: float = 1.0) -> LeastSquaresReport:
    """Random label-measurable competitors never beat the conditional mean."""
    theta = _as_function(theta)
    f = np.asarray(f, dtype=complex)
    w = _weights(nu, len(theta))
    proj = project_onto_function(f, theta, w)
    best = weighted_sq_distance(f, proj.lifted, w)
    mass = label_masses(theta, w)
    labels = np.asarray(theta.values)
    rng = np.random.default_rng(seed)
    violations = 0
    worst = 0.0
    for _ in range(trials):
        delta = scale * (rng.standard_normal(theta.n_labels)
                         + 1j * rng.standard_normal(theta.n_labels))
        g = proj.reduced + delta
        dist = weighted_sq_distance(f, g[labels], w)
        excess = dist - best
        expected = float(np.sum(mass * np.abs(delta) ** 2))
        worst = max(worst, abs(excess - expected))
        if not dist > best:
            violations += 1
    return LeastSquaresReport(trials, violations, worst)


class ConditionalMeanProjector(TransformerMixin, BaseEstimator):
    """Project functions on the state space onto a parametric function's subspace.

    Each row of ``X`` is a function on the points. ``transform`` returns the
    lifted projection (constant on level sets); ``reduce`` returns one value
    per label.

    Parameters
    ----------
    theta : sequence of int
        Label of every point.
    nu : sequence of float, optional
        Positive point weights; uniform when omitted.
    """

    def __init__(self, theta=None, nu=None):
        self.theta = theta
        self.nu = nu

    def fit(self, X=None, y=None):
        if self.theta is None:
            raise ValueError("theta must be given")
        self.theta_ = ParametricFunction.from_labels(self.theta)
        self.weights_ = _weights(self.nu, len(self.theta_))
        self.masses_ = label_masses(self.theta_, self.weights_)
        self.n_features_in_ = len(self.theta_)
        if X is not None:
            self._check(X)
        return self

    def _check(self, X):
        X = check_array(X, dtype=None, ensure_2d=True)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} columns, expected {self.n_features_in_}")
        return X

    def reduce(self, X):
        check_is_fitted(self, "masses_")
        X = self._check(X)
        labels = np.asarray(self.theta_.values)
        out = np.zeros((X.shape[0], self.theta_.n_labels), dtype=np.result_type(X, float))
        for t in range(self.theta_.n_labels):
            cols = labels == t
            out[:, t] = (X[:, cols] * self.weights_[cols]).sum(axis=1) / self.masses_[t]
        return out

    def transform(self, X):
        return self.reduce(X)[:, np.asarray(self.theta_.values)]
