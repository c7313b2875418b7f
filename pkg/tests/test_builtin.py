import numpy as np
import pytest

from qsym.builtin import (BUILTIN_NAMES, EXAMPLE1_EVENTS, bell_chsh, builtin, commutant_dimension,
                          envelope_group, envelope_law, example1_report, make_envelope,
                          make_example1, make_s3_structure, normal_subgroups, quotients,
                          symmetric_group)
from qsym.ensemble import validate_ensemble
from qsym.symmetry import check_permissible


def _bell_oracle(gamma):
    """Enumerate the four hidden (color, number) assignments directly."""
    law = {("red", 1): (1 + gamma) / 4, ("red", 2): (1 - gamma) / 4,
           ("black", 1): (1 - gamma) / 4, ("black", 2): (1 + gamma) / 4}
    E = {}
    for (c, n), w in law.items():
        a = {"I": 1 if c == "red" else -1, "II": 1 if n == 1 else -1}
        b = {k: -v for k, v in a.items()}  # B holds the other card of each envelope
        for x in ("I", "II"):
            for y in ("I", "II"):
                E[x, y] = E.get((x, y), 0.0) + w * a[x] * b[y]
    return E["I", "I"] + E["I", "II"] + E["II", "I"] - E["II", "II"]


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_builtins_valid(name):
    assert validate_ensemble(builtin(name)).ok


def test_envelope_law():
    assert np.allclose(envelope_law(0.5), [0.375, 0.125, 0.125, 0.375])
    with pytest.raises(ValueError):
        envelope_law(1.5)


@pytest.mark.parametrize("gamma", [-1.0, 0.0, 0.6])
def test_envelope_marginals(gamma):
    m = make_envelope(gamma)
    assert np.isclose(m.prior.sum(), 1.0)
    assert np.allclose(m.joint.sum(axis=1), [0.5, 0.5])
    for name in ("AI", "AII", "BI", "BII"):
        assert np.allclose(m.marginal(name), [0.5, 0.5])


def test_envelope_group_is_order_8():
    G = envelope_group()
    assert len(G) == 8
    e = make_envelope().ensemble
    # the envelope swap exchanges color and number, so neither label survives alone
    assert not check_permissible(e.experiment("AI").theta, G)


@pytest.mark.parametrize("gamma", np.linspace(-1, 1, 21))
def test_bell_grid(gamma):
    rep = bell_chsh(gamma)
    assert abs(rep.S - _bell_oracle(gamma)) < 1e-12
    assert abs(rep.S + 2 * gamma) < 1e-12
    assert rep.satisfied


def test_bell_extremes():
    assert bell_chsh(1.0).S == pytest.approx(-2.0)
    assert bell_chsh(-1.0).S == pytest.approx(2.0)
    assert bell_chsh(0.0).correlators["AI.BI"] == pytest.approx(-1.0)


def test_s4_normal_subgroups_and_quotients():
    orders = [len(N) for N in normal_subgroups(symmetric_group(4))]
    assert orders == [1, 4, 12, 24]
    q = {(x.kernel_order, x.order, x.abelian) for x in quotients(symmetric_group(4))}
    assert q == {(1, 24, False), (4, 6, False), (12, 2, True), (24, 1, True)}


def test_s3_structure():
    rep = make_s3_structure()
    assert rep.generated_order == 8 and rep.divides_24
    assert rep.smallest_nonabelian_quotient == 6 and rep.is_s3
    assert rep.generator_images["color"] == rep.generator_images["number"] == 0
    assert rep.generator_images["envelope"] != 0
    assert rep.pairing_block_dim == 2 and rep.pairing_block_commutant == 1
    assert rep.generated_block_dims == [1, 1, 2] and rep.generated_2d_commutant == 1


def test_commutant_dimension():
    assert commutant_dimension([np.eye(3)]) == 9
    assert commutant_dimension([np.diag([1.0, 2.0, 3.0])]) == 3


def test_example1_report():
    rep = example1_report()
    for key in ("complements_join_to_one", "meets_then_join_is_zero", "join_then_meet_is_C",
                "exact"):
        assert rep[key] is True
    assert np.allclose(rep["profiles"]["A"], (0.5, 0.8))
    assert np.allclose(rep["profiles"]["B"], (0.8, 0.4))
    assert np.allclose(rep["profiles"]["C"], (0.0, 0.9))
    assert rep["distributive_witness"]["law"] == "meet over join"


def test_example1_event_profiles():
    e = make_example1()
    a = e.experiment("a").probabilities()
    b = e.experiment("b").probabilities()
    # hand-computed from the tables
    assert np.allclose(a[:, [0, 1]].sum(axis=1), (0.5, 0.8))
    assert np.allclose(a[:, [1, 2]].sum(axis=1), (0.8, 0.4))
    assert np.allclose(b[:, 0], (0.0, 0.9))
    assert set(EXAMPLE1_EVENTS) == {"A", "B", "C"}
