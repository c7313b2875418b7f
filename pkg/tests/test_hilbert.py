import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import expm
from scipy.optimize import minimize

from qsym.builtin import make_envelope, make_qubit
from qsym.ensemble import Ensemble, Experiment, StateSpace, trivial_group
from qsym.hilbert import (DensityState, ProjectorFamily, ZeroProbabilityError, build_dynamics,
                          expectation, fit_density, gleason_fit, hadamard, observable,
                          principal_log_unitary, project_to_density, pure_state_to_phi,
                          state_update, variance_eigen_check)

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Z = np.diag([1.0, -1.0]).astype(complex)


def _cholesky_oracle(family, targets, d, seed=0):
    """Minimize the residual over rho = L L^* / tr(L L^*) with a generic optimizer."""
    t = np.asarray(targets)

    def rho_of(v):
        L = (v[:d * d] + 1j * v[d * d:]).reshape(d, d)
        R = L @ L.conj().T
        return R / np.real(np.trace(R))

    def loss(v):
        return float(np.sum((np.concatenate(family.probabilities(rho_of(v))) - t) ** 2))

    rng = np.random.default_rng(seed)
    best = min((minimize(loss, rng.standard_normal(2 * d * d), method="BFGS",
                         options={"gtol": 1e-12}) for _ in range(5)), key=lambda r: r.fun)
    return best.fun


def test_diagonal_fit_exact():
    fam = ProjectorFamily.standard([3])
    rho, res, conv = fit_density(fam, [0.2, 0.3, 0.5])
    assert conv and res < 1e-12
    assert np.allclose(np.diag(rho).real, [0.2, 0.3, 0.5])


def test_contradictory_targets_floor():
    # both experiments read the same basis, so the best rho splits the difference
    p, q = 0.9, 0.3
    fam = ProjectorFamily.standard([2, 2])
    rho, res, conv = fit_density(fam, [p, 1 - p, q, 1 - q])
    assert abs(res - (p - q) ** 2) < 1e-9
    assert abs(rho[0, 0].real - (p + q) / 2) < 1e-9


def test_fit_constrained_matches_generic_optimizer():
    # z and x statistics of length > 1 on the Bloch ball force the PSD branch
    fam = ProjectorFamily(2, (np.eye(2), hadamard(2)))
    t = [1.0, 0.0, 1.0, 0.0]
    rho, res, conv = fit_density(fam, t)
    assert conv
    assert np.min(np.linalg.eigvalsh(rho)) > -1e-8
    assert abs(res - _cholesky_oracle(fam, t, 2)) < 1e-7
    # the optimum is the Bloch vector on the unit circle between +z and +x
    assert abs(res - 2 * (1 - np.cos(np.pi / 4)) ** 2 / 2) < 1e-7


def test_project_to_density():
    H = np.diag([1.2, -0.4, 0.1])
    rho = project_to_density(H)
    assert np.allclose(np.diag(rho).real, [1.0, 0.0, 0.0])
    DensityState(rho)


def test_density_state_validation():
    with pytest.raises(ValueError):
        DensityState(np.diag([1.2, -0.2]))
    with pytest.raises(ValueError):
        DensityState(np.diag([0.5, 0.6]))
    assert np.allclose(DensityState.pure([1, 1j]).rho, [[0.5, -0.5j], [0.5j, 0.5]])


def test_gleason_fit_example_state():
    ex = Experiment("a", 3, (0, 1), ((0.2, 0.3, 0.5), (1.0, 0.0, 0.0)))
    e = Ensemble(StateSpace(2), trivial_group(2), (ex,))
    fit = gleason_fit(e, phi=0)
    assert fit.residual < 1e-12 and fit.converged and not fit.notes
    low = gleason_fit(Ensemble(StateSpace(2), trivial_group(2),
                               (Experiment("b", 2, (0, 1), ((0.5, 0.5), (1.0, 0.0))),)), phi=1)
    assert low.notes and "dimension 2 < 3" in low.notes[0]


@pytest.mark.parametrize("gamma", [-1.0, -0.3, 0.0, 0.5, 1.0])
def test_envelope_fit(gamma):
    model = make_envelope(gamma)
    fit = gleason_fit(model.ensemble, phi=model.prior, family=model.family)
    assert fit.residual < 1e-12
    assert np.allclose(fit.state.rho, np.eye(2) / 2)


def test_joint_mode_envelope():
    model = make_envelope(0.4)
    fit = gleason_fit(model.ensemble, phi=model.prior, dim=2, mode="joint")
    assert fit.residual < 1e-10


def test_qubit_round_trip():
    e, fam, states = make_qubit()
    for phi, v in enumerate(states):
        fit = gleason_fit(e, phi=phi, family=fam)
        assert fit.residual < 1e-12
        w = np.linalg.eigvalsh(fit.state.rho)
        assert abs(w[-1] - 1.0) < 1e-8  # pure
        match = pure_state_to_phi(v, fam, e)
        assert match.matched and match.unique and match.phi == phi


def test_pure_state_ties_flagged():
    fam = ProjectorFamily.standard([2])
    ex = Experiment("z", 2, (0, 0, 1), ((1.0, 0.0), (0.0, 1.0)))
    e = Ensemble(StateSpace(3), trivial_group(3), (ex,))
    m = pure_state_to_phi([1, 0], fam, e)
    assert m.matched and not m.unique and m.ties == (0, 1)


def test_expectation_examples():
    assert abs(expectation(np.eye(2) / 2, SIGMA_Z)) < 1e-15
    assert abs(expectation(DensityState.pure([1, 0]), SIGMA_Z) - 1.0) < 1e-15
    fam = ProjectorFamily.standard([3])
    O = observable(fam, 0, [1.0, 2.0, 5.0])
    assert abs(expectation(np.diag([0.2, 0.3, 0.5]), O) - (0.2 + 0.6 + 2.5)) < 1e-12
    with pytest.raises(ValueError):
        expectation(np.eye(2) / 2, np.eye(3))


def test_variance_examples():
    r = variance_eigen_check(np.array([1, 0]), SIGMA_Z)
    assert r.zero_variance and r.eigenvector and r.consistent and r.mean == 1.0
    r = variance_eigen_check(np.array([1, 1]) / np.sqrt(2), SIGMA_Z)
    assert abs(r.variance - 1.0) < 1e-12 and not r.eigenvector and r.consistent
    with pytest.raises(ValueError):
        variance_eigen_check(np.array([1, 1]), SIGMA_Z)


def test_state_update():
    pi = np.diag([1.0, 0.0])
    new = state_update(np.eye(2) / 2, pi)
    assert np.allclose(new.rho, pi)
    assert np.allclose(state_update(new, pi).rho, new.rho)
    with pytest.raises(ZeroProbabilityError):
        state_update(np.diag([0.0, 1.0]), pi)


def test_dynamics_cycle4():
    dyn = build_dynamics((1, 2, 3, 0))
    assert np.allclose(dyn.U(1.0), dyn.U_step)
    assert np.allclose(expm(1j * dyn.generator), dyn.U_step)
    assert np.allclose(sorted(dyn.phases), [-np.pi / 2, 0, np.pi / 2, np.pi])
    assert np.allclose(dyn.U(0.3) @ dyn.U(0.7), dyn.U(1.0))
    assert np.allclose(dyn.hamiltonian, dyn.hamiltonian.conj().T)
    assert np.allclose(dyn.evolve([1, 0, 0, 0], 1.0), [0, 1, 0, 0])


def test_dynamics_hbar_scaling():
    a, b = build_dynamics((1, 0), hbar=1.0), build_dynamics((1, 0), hbar=2.5)
    assert np.allclose(b.hamiltonian, 2.5 * a.hamiltonian)
    assert np.allclose(a.U(0.4), b.U(0.4))
    with pytest.raises(ValueError):
        build_dynamics((1, 0), hbar=0.0)
    with pytest.raises(ValueError):
        build_dynamics((0, 0))


def test_principal_log_phase_convention():
    # eigenvalue -1 gets phase +pi, not -pi
    A, phases, _ = principal_log_unitary(-np.eye(2))
    assert np.allclose(phases, np.pi)
    assert np.allclose(expm(1j * A), -np.eye(2))


@given(st.integers(0, 100_000))
def test_fit_reproduces_feasible_targets(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(2, 4))
    G = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    rho0 = G @ G.conj().T
    rho0 /= np.trace(rho0)
    fam = ProjectorFamily(d, (np.eye(d), hadamard(d)))
    t = np.concatenate(fam.probabilities(rho0))
    rho, res, _ = fit_density(fam, t)
    assert res < 1e-10
    assert np.allclose(np.concatenate(fam.probabilities(rho)), t, atol=1e-6)


@given(st.integers(0, 100_000))
def test_random_permutation_dynamics(seed):
    rng = np.random.default_rng(seed)
    k = tuple(int(i) for i in rng.permutation(int(rng.integers(1, 7))))
    dyn = build_dynamics(k)
    assert np.max(np.abs(expm(1j * dyn.generator) - dyn.U_step)) < 1e-10
    assert np.all(dyn.phases > -np.pi) and np.all(dyn.phases <= np.pi + 1e-12)
