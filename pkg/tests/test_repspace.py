import numpy as np
import pytest
from hypothesis import given, strategies as st
from sklearn.base import clone

from qsym.builtin import cyclic_group, group_corpus
from qsym.repspace import (ConditionalMeanProjector, NonInvariantMeasureError,
                           check_invariant, check_least_squares, correspondence_report,
                           integral_identity_residual, label_masses, permutation_unitary,
                           project_onto_function, regular_rep, subspace_contains,
                           subspace_of_function)


def _lstsq_oracle(f, theta, nu):
    """Weighted least squares over label-measurable functions, solved directly."""
    theta = np.asarray(theta)
    k = theta.max() + 1
    D = np.zeros((len(theta), k))
    D[np.arange(len(theta)), theta] = 1.0
    s = np.sqrt(np.asarray(nu, dtype=float))
    coef, *_ = np.linalg.lstsq(s[:, None] * D, s * np.asarray(f, dtype=float), rcond=None)
    return coef


def test_projection_example():
    p = project_onto_function([1.0, 2.0, 3.0, 4.0], [0, 0, 1, 1])
    assert np.allclose(p.reduced, [1.5, 3.5])
    assert np.allclose(p.lifted, [1.5, 1.5, 3.5, 3.5])
    p = project_onto_function([1.0, 2.0, 3.0, 4.0], [0, 1, 1, 0])
    assert np.allclose(p.reduced, [2.5, 2.5])


def test_projection_weighted_matches_oracle():
    f = [1.0, 2.0, 3.0, 4.0]
    nu = [1.0, 3.0, 2.0, 2.0]
    p = project_onto_function(f, [0, 0, 1, 1], nu)
    assert np.allclose(p.reduced, [(1 + 6) / 4, (6 + 8) / 4])
    assert np.allclose(p.reduced, _lstsq_oracle(f, [0, 0, 1, 1], nu))


def test_projection_constant_and_identity():
    f = np.array([0.3, -1.0, 2.5])
    assert np.allclose(project_onto_function(f, [0, 0, 0]).lifted, f.mean())
    assert np.allclose(project_onto_function(f, [0, 1, 2]).lifted, f)


def test_label_masses():
    assert np.allclose(label_masses([0, 1, 1, 2], [1, 2, 3, 4]), [1, 5, 4])


def test_permutation_unitary_convention():
    U = permutation_unitary((1, 2, 3, 0))
    # column phi has its one in row g[phi]
    assert U[1, 0] == 1 and U[0, 3] == 1
    f = np.array([10, 20, 30, 40])
    # (U f)(psi) = f(g^-1 psi)
    assert np.allclose(U @ f, [40, 10, 20, 30])


def test_regular_rep_cycle4():
    g = cyclic_group(4)
    mats = regular_rep(g)
    assert len(mats) == 4
    for U in mats:
        assert np.allclose(U.conj().T @ U, np.eye(4))
    gen = g.elements.index((1, 2, 3, 0))
    expected = np.array([[0, 0, 0, 1], [1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0]])
    assert np.allclose(mats[gen], expected)


def test_regular_rep_rejects_non_invariant_nu():
    with pytest.raises(NonInvariantMeasureError) as err:
        regular_rep(cyclic_group(3), nu=[1.0, 2.0, 1.0])
    assert err.value.element is not None


def test_subspace_orthonormal():
    V = subspace_of_function([0, 0, 1, 2], nu=[1.0, 3.0, 2.0, 2.0])
    assert V.dim == 3
    assert np.allclose(V.gram(), np.eye(3))
    P = V.projector()
    assert np.allclose(P @ P, P)


def test_invariance_cycle4():
    mats = regular_rep(cyclic_group(4))
    assert check_invariant(subspace_of_function([0, 1, 0, 1]), mats)
    assert not check_invariant(subspace_of_function([0, 0, 1, 1]), mats)


def test_subspace_order():
    coarse = subspace_of_function([0, 0, 1, 1])
    fine = subspace_of_function([0, 1, 2, 2])
    assert subspace_contains(coarse, fine)
    assert not subspace_contains(fine, coarse)


@pytest.mark.parametrize("name", sorted(group_corpus(max_n=6)))
def test_correspondence_corpus(name):
    rep = correspondence_report(group_corpus(max_n=6)[name])
    assert rep.ok
    assert rep.n_permissible == rep.n_invariant


def test_correspondence_cycle4_counts():
    rep = correspondence_report(cyclic_group(4))
    assert (rep.n_permissible, rep.n_invariant) == (3, 3)


def test_least_squares_and_identity():
    f = np.array([1.0, 2.0 + 1j, -3.0, 0.5, 4.0])
    theta = [0, 1, 0, 2, 1]
    nu = [1.0, 2.0, 0.5, 1.0, 3.0]
    assert integral_identity_residual(f, theta, nu) < 1e-12
    rep = check_least_squares(f, theta, nu, trials=500)
    assert rep.ok and rep.max_excess_error < 1e-10


def test_projector_estimator():
    est = ConditionalMeanProjector(theta=[0, 0, 1, 1]).fit()
    X = np.array([[1.0, 2.0, 3.0, 4.0], [0.0, 2.0, 0.0, 2.0]])
    assert np.allclose(est.reduce(X), [[1.5, 3.5], [1.0, 1.0]])
    assert np.allclose(est.transform(X), [[1.5, 1.5, 3.5, 3.5], [1.0, 1.0, 1.0, 1.0]])
    assert clone(est).get_params() == {"theta": [0, 0, 1, 1], "nu": None}
    with pytest.raises(ValueError):
        est.transform(np.ones((1, 3)))


@given(st.integers(0, 100_000))
def test_projection_properties(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 8))
    theta = rng.integers(0, n, size=n)
    _, theta = np.unique(theta, return_inverse=True)
    nu = rng.uniform(0.1, 2.0, size=n)
    f = rng.standard_normal(n)
    p = project_onto_function(f, theta, nu)
    # idempotent, and equal to the direct least-squares solution
    assert np.allclose(project_onto_function(p.lifted, theta, nu).lifted, p.lifted)
    # labels are canonicalized to first-appearance order, so compare lifted values
    assert np.allclose(p.lifted, _lstsq_oracle(f, theta, nu)[theta])
    # tower property through a coarser function
    coarse = theta % 2
    direct = project_onto_function(f, coarse, nu).lifted
    via = project_onto_function(p.lifted, coarse, nu).lifted
    assert np.allclose(direct, via)
    assert integral_identity_residual(f, theta, nu) < 1e-10
