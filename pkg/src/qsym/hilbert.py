"""Event-basis Hilbert space: projector families, density operators, dynamics.

Every outcome ``x`` of experiment ``a`` is a unit vector ``e[a][:, x]``;
vectors of one experiment are orthonormal. A density operator ``rho``
reproduces a probability table when ``e^* rho e`` matches it for every
outcome.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy.linalg import null_space, schur
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .ensemble import Ensemble
from .repspace import EPS_M, permutation_unitary

EPS_PSD = 1e-8
EPS_MATCH = 1e-6
MAX_ITER = 10_000


class ZeroProbabilityError(ValueError):
    """The measured outcome has zero probability in the given state."""


def hadamard(d: int = 2) -> np.ndarray:
    """Unitary discrete Fourier matrix; for ``d = 2`` the Hadamard matrix."""
    if d == 2:
        return np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
    k = np.arange(d)
    return np.exp(2j * np.pi * np.outer(k, k) / d) / np.sqrt(d)


def is_orthonormal(frame: np.ndarray, tol: float = EPS_M) -> bool:
    G = frame.conj().T @ frame
    return bool(np.max(np.abs(G - np.eye(G.shape[0])), initial=0.0) < tol)


@dataclass(frozen=True, eq=False)
class ProjectorFamily:
    """Orthonormal outcome vectors per experiment, all in dimension ``dim``."""

    dim: int
    frames: tuple[np.ndarray, ...]
    names: tuple[str, ...] = ()

    def __post_init__(self):
        frames = tuple(np.asarray(f, dtype=complex) for f in self.frames)
        object.__setattr__(self, "frames", frames)
        if not self.names:
            object.__setattr__(self, "names", tuple(f"e{i}" for i in range(len(frames))))
        for name, f in zip(self.names, frames):
            if f.ndim != 2 or f.shape[0] != self.dim:
                raise ValueError(f"frame {name} must have {self.dim} rows")
            if f.shape[1] > self.dim:
                raise ValueError(f"frame {name} has more outcomes than the dimension")
            if not is_orthonormal(f):
                raise ValueError(f"frame {name} is not orthonormal")

    @classmethod
    def standard(cls, outcome_counts: Sequence[int], dim: int | None = None,
                 names: Sequence[str] = ()) -> "ProjectorFamily":
        dim = max(outcome_counts) if dim is None else dim
        eye = np.eye(dim, dtype=complex)
        return cls(dim, tuple(eye[:, :m] for m in outcome_counts), tuple(names))

    @classmethod
    def for_ensemble(cls, e: Ensemble, frames: Sequence[np.ndarray] | None = None,
                     dim: int | None = None) -> "ProjectorFamily":
        counts = [ex.outcomes for ex in e.experiments]
        names = tuple(ex.name for ex in e.experiments)
        if frames is None:
            return cls.standard(counts, dim, names)
        frames = [np.asarray(f, dtype=complex) for f in frames]
        dim = frames[0].shape[0] if dim is None else dim
        return cls(dim, tuple(frames), names)

    def frame(self, a: int | str) -> np.ndarray:
        return self.frames[self.names.index(a) if isinstance(a, str) else a]

    def projector(self, a: int | str, x: int) -> np.ndarray:
        v = self.frame(a)[:, x]
        return np.outer(v, v.conj())

    def event_projector(self, a: int | str, event) -> np.ndarray:
        P = np.zeros((self.dim, self.dim), dtype=complex)
        for x in event:
            P += self.projector(a, x)
        return P

    def probabilities(self, rho: np.ndarray) -> list[np.ndarray]:
        """``trace(rho Pi_{a,x})`` for every experiment and outcome."""
        return [np.real(np.einsum("ix,ij,jx->x", f.conj(), rho, f)) for f in self.frames]


@dataclass(frozen=True, eq=False)
class DensityState:
    rho: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=complex)
        object.__setattr__(self, "rho", rho)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise ValueError("rho must be square")
        if np.max(np.abs(rho - rho.conj().T), initial=0.0) > EPS_M:
            raise ValueError("rho is not Hermitian")
        if np.min(np.linalg.eigvalsh(rho)) < -EPS_PSD:
            raise ValueError("rho is not positive semidefinite")
        if abs(np.trace(rho) - 1.0) > EPS_M:
            raise ValueError("rho does not have unit trace")

    @property
    def dim(self) -> int:
        return self.rho.shape[0]

    @classmethod
    def pure(cls, vec) -> "DensityState":
        v = np.asarray(vec, dtype=complex)
        v = v / np.linalg.norm(v)
        return cls(np.outer(v, v.conj()))


def project_to_density(H: np.ndarray) -> np.ndarray:
    """Closest unit-trace positive semidefinite matrix in Frobenius norm."""
    H = (H + H.conj().T) / 2
    w, V = np.linalg.eigh(H)
    # Euclidean projection of the spectrum onto the probability simplex
    u = np.sort(w)[::-1]
    css = np.cumsum(u)
    k = np.nonzero(u * np.arange(1, len(u) + 1) > css - 1.0)[0][-1]
    shift = (css[k] - 1.0) / (k + 1)
    lam = np.maximum(w - shift, 0.0)
    return (V * lam) @ V.conj().T


def _hermitian_basis(d: int) -> list[np.ndarray]:
    """Frobenius-orthonormal basis of the d x d Hermitian matrices."""
    basis = []
    for j in range(d):
        E = np.zeros((d, d), dtype=complex)
        E[j, j] = 1.0
        basis.append(E)
    s = 1 / np.sqrt(2)
    for j in range(d):
        for k in range(j + 1, d):
            E = np.zeros((d, d), dtype=complex)
            E[j, k] = E[k, j] = s
            basis.append(E)
            F = np.zeros((d, d), dtype=complex)
            F[j, k], F[k, j] = -1j * s, 1j * s
            basis.append(F)
    return basis


def _design(family: ProjectorFamily) -> tuple[np.ndarray, list[np.ndarray]]:
    basis = _hermitian_basis(family.dim)
    rows = []
    for f in family.frames:
        for x in range(f.shape[1]):
            v = f[:, x]
            rows.append([np.real(v.conj() @ H @ v) for H in basis])
    return np.array(rows), basis


def _residual(family: ProjectorFamily, rho: np.ndarray, targets: np.ndarray) -> float:
    pred = np.concatenate(family.probabilities(rho))
    return float(np.sum((pred - targets) ** 2))


def fit_density(family: ProjectorFamily, targets, max_iter: int = MAX_ITER,
                tol: float = EPS_PSD) -> tuple[np.ndarray, float, bool]:
    """Least-squares density operator for a fixed projector family.

    Solves the unconstrained problem on the unit-trace slice first; when
    that solution is not positive semidefinite, runs accelerated projected
    gradient on the set of density operators. Returns ``(rho, residual,
    converged)``.
    """
    t = np.asarray(targets, dtype=float)
    M, basis = _design(family)
    d = family.dim
    c = np.array([np.real(np.trace(H)) for H in basis])
    r0 = c / (c @ c)
    N = null_space(c[None, :])
    z, *_ = np.linalg.lstsq(M @ N, t - M @ r0, rcond=None)
    r = r0 + N @ z
    rho = sum(ri * H for ri, H in zip(r, basis))
    rho = (rho + rho.conj().T) / 2
    if np.min(np.linalg.eigvalsh(rho)) >= -EPS_PSD:
        rho = project_to_density(rho)
        return rho, _residual(family, rho, t), True

    lip = 2.0 * np.linalg.norm(M, 2) ** 2
    step = 1.0 / lip if lip > 0 else 1.0
    projs = [np.outer(f[:, x], f[:, x].conj()) for f in family.frames for x in range(f.shape[1])]
    P = np.array(projs)

    def grad(X):
        pred = np.real(np.einsum("kij,ji->k", P, X))
        return 2.0 * np.einsum("k,kij->ij", pred - t, P)

    X = project_to_density(rho)
    Y, s = X.copy(), 1.0
    converged = False
    for _ in range(max_iter):
        X_new = project_to_density(Y - step * grad(Y))
        s_new = (1 + np.sqrt(1 + 4 * s * s)) / 2
        Y = X_new + ((s - 1) / s_new) * (X_new - X)
        move = np.linalg.norm(X_new - X)
        X, s = X_new, s_new
        if move < tol * step:
            converged = True
            break
    return X, _residual(family, X, t), converged


def _targets(e: Ensemble, phi) -> np.ndarray:
    """Outcome probabilities of every experiment at a state or under prior weights."""
    if np.ndim(phi) == 0:
        w = np.zeros(e.n)
        w[int(phi)] = 1.0
    else:
        w = np.asarray(phi, dtype=float)
        if w.shape != (e.n,) or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("prior weights must be a probability vector over the states")
    return np.concatenate([w @ ex.probabilities() for ex in e.experiments])


def _polar(V: np.ndarray) -> np.ndarray:
    W, _, Zh = np.linalg.svd(V, full_matrices=False)
    return W @ Zh


def _random_unitary(d: int, rng: np.random.Generator, scale: float) -> np.ndarray:
    A = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    H = (A + A.conj().T) / 2
    w, V = np.linalg.eigh(H)
    return (V * np.exp(1j * scale * w)) @ V.conj().T


def fit_joint(counts: Sequence[int], targets: np.ndarray, dim: int, names=(),
              frames=None, max_iter: int = MAX_ITER, tol: float = 1e-12, seed: int = 0):
    """Alternate density fits with projected-gradient updates of the frames.

    ``targets`` has one row per state. Returns ``(family, rhos, residuals,
    converged)``.
    """
    rng = np.random.default_rng(seed)
    T = np.atleast_2d(np.asarray(targets, dtype=float))
    if frames is None:
        eye = np.eye(dim, dtype=complex)
        frames = [_random_unitary(dim, rng, 0.1) @ eye[:, :m] for m in counts]
    frames = [_polar(np.asarray(f, dtype=complex)) for f in frames]
    offsets = np.cumsum([0, *counts])

    def solve(frs):
        fam = ProjectorFamily(dim, tuple(frs), tuple(names))
        out = [fit_density(fam, row, max_iter=2000) for row in T]
        return fam, [o[0] for o in out], np.array([o[1] for o in out])

    family, rhos, res = solve(frames)
    loss = res.sum()
    step = 0.5
    converged = False
    for _ in range(max_iter):
        if loss < tol:
            converged = True
            break
        grads = []
        for a, f in enumerate(frames):
            G = np.zeros_like(f)
            for rho, row in zip(rhos, T):
                t = row[offsets[a]:offsets[a + 1]]
                RV = rho @ f
                err = np.real(np.sum(f.conj() * RV, axis=0)) - t
                G += 4.0 * RV * err[None, :]
            grads.append(G)
        improved = False
        while step > 1e-12:
            trial = [_polar(f - step * G) for f, G in zip(frames, grads)]
            fam_t, rhos_t, res_t = solve(trial)
            if res_t.sum() < loss:
                improved = True
                break
            step /= 2
        if not improved:
            converged = True
            break
        gain = loss - res_t.sum()
        frames, family, rhos, res, loss = trial, fam_t, rhos_t, res_t, res_t.sum()
        step = min(step * 2, 4.0)
        if gain < tol * max(1.0, loss):
            converged = True
            break
    return family, rhos, res, converged


class GleasonFit(NamedTuple):
    family: ProjectorFamily
    state: DensityState
    residual: float
    converged: bool
    notes: tuple[str, ...]


def gleason_fit(e: Ensemble, phi=0, dim: int | None = None, mode: str = "fixed",
                family: ProjectorFamily | Sequence[np.ndarray] | None = None,
                max_iter: int = MAX_ITER, seed: int = 0) -> GleasonFit:
    """Fit one density operator reproducing every experiment's outcome law.

    ``phi`` is a state index or a probability vector of prior weights over
    the states. In ``fixed`` mode the projector family is the one supplied
    (standard basis by default); in ``joint`` mode it is optimized as well.
    """
    counts = [ex.outcomes for ex in e.experiments]
    names = tuple(ex.name for ex in e.experiments)
    if isinstance(family, ProjectorFamily):
        dim = family.dim if dim is None else dim
    elif family is not None:
        family = ProjectorFamily.for_ensemble(e, family, dim)
        dim = family.dim
    dim = max(counts) if dim is None else dim
    if dim < max(counts):
        raise ValueError(f"dimension {dim} is smaller than the largest outcome count")
    if family is not None and family.dim != dim:
        raise ValueError("family dimension disagrees with dim")
    notes = []
    if dim < 3:
        notes.append(f"dimension {dim} < 3: the representation theorem's hypothesis does "
                     "not hold; fit reported without that guarantee")
    t = _targets(e, phi)
    if mode == "fixed":
        fam = family if family is not None else ProjectorFamily.standard(counts, dim, names)
        rho, res, conv = fit_density(fam, t, max_iter=max_iter)
    elif mode == "joint":
        frames = None if family is None else family.frames
        fam, rhos, res_arr, conv = fit_joint(counts, t, dim, names, frames, max_iter, seed=seed)
        rho, res = rhos[0], float(res_arr[0])
        if not conv:
            notes.append("joint fit hit the iteration cap; best result so far returned")
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return GleasonFit(fam, DensityState(project_to_density(rho)), res, conv, tuple(notes))


class DensityOperatorFit(BaseEstimator):
    """Fit density operators to rows of outcome probabilities.

    ``X`` has one row per state; its columns are the outcome probabilities
    of each experiment in turn, grouped by ``outcome_counts``.

    Parameters
    ----------
    outcome_counts : sequence of int
        Number of outcomes of each experiment.
    dim : int, optional
        Hilbert space dimension; defaults to the largest outcome count.
    mode : {"fixed", "joint"}
        Keep the projector family fixed, or optimize it jointly with the states.
    family : sequence of arrays, optional
        Initial (``joint``) or final (``fixed``) frames; standard basis if omitted.
    max_iter : int
    random_state : int
        Seed of the joint-mode initialization.
    """

    def __init__(self, outcome_counts=None, dim=None, mode="fixed", family=None,
                 max_iter=MAX_ITER, random_state=0):
        self.outcome_counts = outcome_counts
        self.dim = dim
        self.mode = mode
        self.family = family
        self.max_iter = max_iter
        self.random_state = random_state

    def _validate(self, X):
        X = check_array(X, dtype=float)
        counts = list(self.outcome_counts or [X.shape[1]])
        if sum(counts) != X.shape[1]:
            raise ValueError(f"X has {X.shape[1]} columns but outcome_counts sum to "
                             f"{sum(counts)}")
        if np.any(X < -1e-9) or np.any(X > 1 + 1e-9):
            raise ValueError("probabilities must lie in [0, 1]")
        return X, counts

    def fit(self, X, y=None):
        X, counts = self._validate(X)
        dim = max(counts) if self.dim is None else self.dim
        if self.mode == "fixed":
            if self.family is None:
                fam = ProjectorFamily.standard(counts, dim)
            else:
                fam = ProjectorFamily(dim, tuple(self.family))
            fits = [fit_density(fam, row, self.max_iter) for row in X]
            rhos = [f[0] for f in fits]
            res = np.array([f[1] for f in fits])
            conv = all(f[2] for f in fits)
        elif self.mode == "joint":
            fam, rhos, res, conv = fit_joint(counts, X, dim, frames=self.family,
                                             max_iter=self.max_iter, seed=self.random_state)
        else:
            raise ValueError(f"unknown mode {self.mode!r}")
        self.family_ = fam
        self.rhos_ = np.array(rhos)
        self.residuals_ = np.asarray(res)
        self.converged_ = bool(conv)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        """Density operators (shape ``(n, dim, dim)``) for new rows, frames held fixed."""
        check_is_fitted(self, "family_")
        X, _ = self._validate(X)
        return np.array([fit_density(self.family_, row, self.max_iter)[0] for row in X])

    def inverse_transform(self, rhos):
        """Outcome probabilities predicted by density operators."""
        check_is_fitted(self, "family_")
        return np.array([np.concatenate(self.family_.probabilities(r)) for r in rhos])

    def score(self, X, y=None):
        X, _ = self._validate(X)
        pred = self.inverse_transform(self.transform(X))
        return -float(np.mean(np.sum((pred - X) ** 2, axis=1)))


def observable(family: ProjectorFamily, a: int | str, values: Sequence[float]) -> np.ndarray:
    """Operator assigning ``values[x]`` to outcome ``x`` of experiment ``a``."""
    f = family.frame(a)
    if len(values) != f.shape[1]:
        raise ValueError("need one value per outcome")
    return (f * np.asarray(values, dtype=float)[None, :]) @ f.conj().T


def expectation(rho, obs) -> float:
    rho = rho.rho if isinstance(rho, DensityState) else np.asarray(rho)
    obs = np.asarray(obs)
    if rho.shape != obs.shape:
        raise ValueError(f"dimension mismatch: {rho.shape} vs {obs.shape}")
    val = np.trace(obs @ rho)
    if abs(val.imag) > EPS_M:
        raise ValueError("expectation has a non-negligible imaginary part; is obs Hermitian?")
    return float(val.real)


class VarianceReport(NamedTuple):
    mean: float
    variance: float
    eigen_residual: float
    zero_variance: bool
    eigenvector: bool

    @property
    def consistent(self) -> bool:
        return self.zero_variance == self.eigenvector


def variance_eigen_check(vec, obs, eps: float = EPS_M) -> VarianceReport:
    """Variance of ``obs`` in the pure state ``vec`` versus eigenvector residual."""
    v = np.asarray(vec, dtype=complex)
    if abs(np.linalg.norm(v) - 1.0) > 1e-9:
        raise ValueError("state vector must have unit norm")
    O = np.asarray(obs, dtype=complex)
    Ov = O @ v
    mean = float(np.real(v.conj() @ Ov))
    second = float(np.real(Ov.conj() @ Ov))
    var = max(second - mean * mean, 0.0)
    resid = float(np.linalg.norm(Ov - mean * v))
    return VarianceReport(mean, var, resid, var < eps, resid < np.sqrt(eps))


def state_update(rho, pi) -> DensityState:
    """Condition ``rho`` on the range of the projector ``pi``."""
    rho = rho.rho if isinstance(rho, DensityState) else np.asarray(rho, dtype=complex)
    pi = np.asarray(pi, dtype=complex)
    new = pi @ rho @ pi
    p = float(np.real(np.trace(new)))
    if p <= EPS_PSD:
        raise ZeroProbabilityError(f"measured outcome has probability {p:.3g}")
    new = new / p
    return DensityState((new + new.conj().T) / 2)


class PureStateMatch(NamedTuple):
    phi: int
    deviation: float
    matched: bool
    ties: tuple[int, ...]

    @property
    def unique(self) -> bool:
        return len(self.ties) <= 1


def pure_state_to_phi(vec, family: ProjectorFamily, e: Ensemble,
                      eps_match: float = EPS_MATCH) -> PureStateMatch:
    """The state whose outcome laws best match those of the pure state ``vec``."""
    v = np.asarray(vec, dtype=complex)
    if abs(np.linalg.norm(v) - 1.0) > 1e-9:
        raise ValueError("state vector must have unit norm")
    rho = np.outer(v, v.conj())
    pred = np.concatenate(family.probabilities(rho))
    table = np.hstack([ex.probabilities() for ex in e.experiments])
    dev = np.max(np.abs(table - pred[None, :]), axis=1)
    best = int(np.argmin(dev))
    ties = tuple(int(i) for i in np.nonzero(dev <= dev[best] + eps_match)[0]) \
        if dev[best] < eps_match else ()
    return PureStateMatch(best, float(dev[best]), bool(dev[best] < eps_match), ties)


def principal_log_unitary(U: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Hermitian ``A`` with ``exp(iA) = U``, eigenphases in ``(-pi, pi]``.

    Returns ``(A, phases, Z)`` with ``A = Z diag(phases) Z^*``.
    """
    T, Z = schur(np.asarray(U, dtype=complex), output="complex")
    lam = np.diag(T)
    phases = np.angle(lam)
    phases[phases <= -np.pi + 1e-12] = np.pi
    A = (Z * phases) @ Z.conj().T
    return (A + A.conj().T) / 2, phases, Z


@dataclass(frozen=True, eq=False)
class Dynamics:
    step: tuple[int, ...]
    U_step: np.ndarray
    generator: np.ndarray
    hbar: float = 1.0
    phases: np.ndarray = field(default=None, repr=False)
    eigvecs: np.ndarray = field(default=None, repr=False)

    @property
    def hamiltonian(self) -> np.ndarray:
        return -self.hbar * self.generator

    def U(self, t: float) -> np.ndarray:
        Z = self.eigvecs
        return (Z * np.exp(1j * self.phases * t)) @ Z.conj().T

    def evolve(self, vec, t: float) -> np.ndarray:
        return self.U(t) @ np.asarray(vec, dtype=complex)


def build_dynamics(k: Sequence[int], hbar: float = 1.0,
                   intertwiner: np.ndarray | None = None) -> Dynamics:
    """One-parameter unitary group whose unit-time step permutes the states by ``k``.

    With an isometry ``intertwiner`` the step is carried to another space as
    ``W U W^*``.
    """
    k = tuple(int(i) for i in k)
    if sorted(k) != list(range(len(k))):
        raise ValueError("step map must be a bijection")
    if hbar <= 0:
        raise ValueError("hbar must be positive")
    U = permutation_unitary(k)
    if intertwiner is not None:
        W = np.asarray(intertwiner, dtype=complex)
        U = W @ U @ W.conj().T
    A, phases, Z = principal_log_unitary(U)
    return Dynamics(k, U, A, float(hbar), phases, Z)
