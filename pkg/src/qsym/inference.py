"""Bayes estimation under the invariant prior on the state space.

The prior is the weight vector ``nu`` of the state space, which is uniform
on each orbit when invariant. With quadratic loss the Bayes estimator is
the posterior mean of a caller-supplied embedding of the states.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .ensemble import EPS_P, Ensemble, Experiment
from .repspace import EPS_M, label_masses
from .symmetry import ParametricFunction, _as_function, check_permissible


class ZeroLikelihoodError(ValueError):
    """The observed outcome has zero probability at every state."""


@dataclass(frozen=True, eq=False)
class Posterior:
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", w)
        if np.any(w < 0) or abs(w.sum() - 1.0) > EPS_P:
            raise ValueError("posterior weights must be a probability vector")

    def mean(self, coords) -> np.ndarray:
        return self.weights @ _coords(coords, len(self.weights))


def _coords(emb, n: int) -> np.ndarray:
    """Embedding as an ``(n, k)`` float array; ``None`` means the point index."""
    if emb is None:
        return np.arange(n, dtype=float)[:, None]
    C = np.asarray(emb, dtype=float)
    if C.ndim == 1:
        C = C[:, None]
    if C.ndim != 2 or C.shape[0] != n:
        raise ValueError(f"embedding needs one coordinate list per point ({n})")
    return C


def _experiment(e: Ensemble, a) -> Experiment:
    if isinstance(a, Experiment):
        return a
    return e.experiment(a) if isinstance(a, str) else e.experiments[a]


def posterior_weights(likelihood, prior) -> np.ndarray:
    w = np.asarray(likelihood, dtype=float) * np.asarray(prior, dtype=float)
    total = w.sum()
    if total <= 0:
        raise ZeroLikelihoodError("observed outcome has zero likelihood at every state")
    return w / total


def posterior(e: Ensemble, a, x: int) -> Posterior:
    """Posterior over the states after observing outcome ``x`` of experiment ``a``."""
    ex = _experiment(e, a)
    if not 0 <= x < ex.outcomes:
        raise ValueError(f"outcome {x} out of range for {ex.name}")
    return Posterior(posterior_weights(ex.probabilities()[:, x], e.space.weights))


def estimate(e: Ensemble, a, x: int, emb=None, target=None, target_emb=None) -> np.ndarray:
    """Posterior mean of ``emb(phi)``, or of ``target_emb[target(phi)]`` when given."""
    post = posterior(e, a, x)
    if target is None:
        return post.mean(_coords(emb, e.n))
    eta = _as_function(target)
    T = _coords(target_emb, eta.n_labels)
    return post.weights @ T[list(eta.values)]


def grid_estimate(weights, coords, step: float = 1e-3) -> float:
    """Minimizer of expected squared loss over a grid (one coordinate only)."""
    c = np.asarray(coords, dtype=float).ravel()
    w = np.asarray(weights, dtype=float)
    grid = np.arange(c.min(), c.max() + step / 2, step)
    loss = (w[None, :] * (grid[:, None] - c[None, :]) ** 2).sum(axis=1)
    return float(grid[np.argmin(loss)])


class TwoFormulaeReport(NamedTuple):
    via_states: np.ndarray
    via_labels: np.ndarray
    difference: float
    equal: bool
    permissible: bool
    plug_in: np.ndarray | None  # theta evaluated at the state estimate
    plug_in_differs: bool | None


def check_two_formulae(e: Ensemble, a, x: int, theta_emb=None, phi_emb=None,
                       theta_map: Callable | None = None, tol: float = EPS_M) -> TwoFormulaeReport:
    """Estimate the parameter of ``a`` through the states and through its own labels.

    The first route averages ``theta_emb[theta(phi)]`` under the posterior on
    the states. The second uses the pushforward prior on the labels and the
    label likelihood directly. When ``theta_map`` (a map from state
    coordinates to label coordinates) is given, the plug-in value at the
    state estimate is compared as well; it generally differs.
    """
    ex = _experiment(e, a)
    theta = ParametricFunction(ex.theta)
    T = _coords(theta_emb, theta.n_labels)
    post = posterior(e, ex, x)
    route1 = post.weights @ T[list(theta.values)]
    mass = label_masses(theta, e.space.weights)
    route2 = posterior_weights(ex.table[:, x], mass) @ T
    diff = float(np.max(np.abs(route1 - route2)))
    plug, differs = None, None
    if theta_map is not None:
        phi_hat = post.mean(_coords(phi_emb, e.n))
        plug = np.atleast_1d(np.asarray(theta_map(phi_hat), dtype=float))
        differs = bool(np.max(np.abs(plug - route1)) > tol)
    return TwoFormulaeReport(route1, route2, diff, diff < tol,
                             bool(check_permissible(theta, e.group)), plug, differs)


class SampleSymmetry(NamedTuple):
    element: int  # index into the sample group
    label_map: tuple[int, ...] | None  # induced parameter map, None if incompatible
    witness: tuple[int, int] | None  # (label, outcome) where compatibility fails


def induced_parameter_maps(ex: Experiment, eps: float = EPS_P) -> list[SampleSymmetry]:
    """For each outcome permutation ``g`` find ``t -> g~t`` with ``P_{g~t}(g x) = P_t(x)``."""
    if ex.sample_group is None:
        raise ValueError(f"experiment {ex.name} has no sample group")
    table = ex.table
    out = []
    for i, g in enumerate(ex.sample_group.elements):
        moved = np.empty_like(table)
        moved[:, list(g)] = table  # moved[t][g x] = P_t(x)
        lmap, witness = [], None
        for t in range(table.shape[0]):
            hits = np.nonzero(np.max(np.abs(table - moved[t]), axis=1) <= eps)[0]
            if len(hits) == 0:
                bad = np.max(np.abs(table - moved[t]), axis=0)
                witness = (t, int(np.argmax(bad)))
                break
            lmap.append(int(hits[0]))
        out.append(SampleSymmetry(i, tuple(lmap) if witness is None else None, witness))
    return out


@dataclass
class EquivarianceReport:
    compatible: bool
    symmetries: list[SampleSymmetry]
    max_deviation: float
    violations: list[tuple[int, int]] = field(default_factory=list)  # (element, outcome)

    @property
    def ok(self) -> bool:
        return self.compatible and not self.violations


def check_equivariance(e: Ensemble, a, emb=None, emb_action=None,
                       tol: float = EPS_M) -> EquivarianceReport:
    """Check ``estimate(g x) = g~ . estimate(x)`` for every sample-group element.

    ``emb_action`` gives the action on embedding coordinates: a sequence of
    ``k x k`` matrices (one per sample-group element), or a callable
    ``(element, coords) -> coords``. The identity is assumed if omitted.
    """
    ex = _experiment(e, a)
    syms = induced_parameter_maps(ex)
    compatible = all(s.label_map is not None for s in syms)
    C = _coords(emb, e.n)

    def act(i, v):
        if emb_action is None:
            return v
        if callable(emb_action):
            return np.asarray(emb_action(i, v), dtype=float)
        return np.asarray(emb_action[i], dtype=float) @ v

    worst = 0.0
    violations = []
    for i, g in enumerate(ex.sample_group.elements):
        for x in range(ex.outcomes):
            try:
                lhs = posterior(e, ex, g[x]).mean(C)
                rhs = act(i, posterior(e, ex, x).mean(C))
            except ZeroLikelihoodError:
                continue
            dev = float(np.max(np.abs(lhs - rhs)))
            worst = max(worst, dev)
            if dev > tol:
                violations.append((i, x))
    return EquivarianceReport(compatible, syms, worst, violations)


def is_coarsening(fine: Experiment, coarse: Experiment, eps: float = EPS_P,
                  max_maps: int = 200_000) -> tuple[int, ...] | None:
    """An outcome merge turning ``fine`` into ``coarse`` at every state, if one exists."""
    if len(fine.theta) != len(coarse.theta):
        raise ValueError("experiments live on different state spaces")
    P, Q = fine.probabilities(), coarse.probabilities()
    m, k = fine.outcomes, coarse.outcomes
    if k > m or k ** m > max_maps:
        return None
    for merge in itertools.product(range(k), repeat=m):
        if len(set(merge)) != k:
            continue
        merged = np.zeros_like(Q)
        for x, y in enumerate(merge):
            merged[:, y] += P[:, x]
        if np.max(np.abs(merged - Q), initial=0.0) <= eps:
            return merge
    return None


@dataclass
class ExtremeReport:
    """EXPLORATORY: probes a conjecture; flags are candidates, not failures."""

    extreme: list[str]
    injective: dict[str, bool]
    counter_candidates: list[str]
    below: dict[str, list[str]]  # experiment -> experiments it is a coarsening of
    label: str = "EXPLORATORY"


def check_extreme_identifiability(e: Ensemble, declared: Sequence[str] | None = None
                                  ) -> ExtremeReport:
    """Find the maximal experiments in the coarsening order and test injectivity.

    ``declared`` overrides the computed extreme set.
    """
    exps = list(e.experiments)
    below = {ex.name: [] for ex in exps}
    for a, b in itertools.permutations(exps, 2):
        if is_coarsening(b, a) is not None:
            below[a.name].append(b.name)
    if declared is None:
        extreme = [ex.name for ex in exps
                   if all(ex.name in below[c] for c in below[ex.name])]
    else:
        extreme = list(declared)
    injective = {name: len(set(e.experiment(name).theta)) == e.n for name in extreme}
    return ExtremeReport(extreme, injective, [n for n in extreme if not injective[n]], below)


class HaarBayesEstimator(BaseEstimator):
    """Posterior-mean estimator for a finite family of outcome laws.

    ``fit`` takes the likelihood table, one row per state and one column per
    outcome. ``predict`` maps observed outcomes to posterior means of the
    embedding; ``predict_proba`` returns the posterior weights.

    Parameters
    ----------
    embedding : array of shape (n_states, k), optional
        Coordinates of each state; the state index when omitted.
    prior : array of shape (n_states,), optional
        Positive invariant weights; uniform when omitted.
    """

    def __init__(self, embedding=None, prior=None):
        self.embedding = embedding
        self.prior = prior

    def fit(self, X, y=None):
        L = check_array(X, dtype=float)
        if np.any(L < -EPS_P) or np.max(np.abs(L.sum(axis=1) - 1.0)) > EPS_P:
            raise ValueError("each row of X must be an outcome distribution")
        n = L.shape[0]
        prior = np.ones(n) if self.prior is None else np.asarray(self.prior, dtype=float)
        if prior.shape != (n,) or np.any(prior <= 0):
            raise ValueError("prior must hold one positive weight per state")
        self.likelihood_ = L
        self.prior_ = prior
        self.coords_ = _coords(self.embedding, n)
        self.n_outcomes_ = L.shape[1]
        return self

    def _outcomes(self, x):
        x = np.asarray(x).ravel()
        if x.size and (x.min() < 0 or x.max() >= self.n_outcomes_):
            raise ValueError("outcome out of range")
        return x.astype(int)

    def predict_proba(self, x):
        check_is_fitted(self, "likelihood_")
        return np.array([posterior_weights(self.likelihood_[:, xi], self.prior_)
                         for xi in self._outcomes(x)])

    def predict(self, x):
        return self.predict_proba(x) @ self.coords_
