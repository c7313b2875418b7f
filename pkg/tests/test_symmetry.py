import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qsym.builtin import cyclic_group, group_corpus, symmetric_group
from qsym.ensemble import (Ensemble, Experiment, StateSpace, close_group, trivial_group,
                           validate_ensemble)
from qsym.symmetry import (NotPermissibleError, ParametricFunction, check_permissible,
                           compose_permissible, enumerate_permissible, equivalence_classes,
                           induce_group, induced_group_action, join_functions,
                           minimize_state_space, preceq, set_partitions)

# Bell numbers B(0..7), from the recurrence B(n+1) = sum_k C(n,k) B(k)
BELL = [1, 1, 2, 5, 15, 52, 203, 877]

# permissible partition counts, computed by an independent block-image filter
PERMISSIBLE_COUNTS = {
    "identity3": 5, "identity4": 15, "identity5": 52, "identity6": 203,
    "cyclic3": 2, "cyclic4": 3, "cyclic5": 2, "cyclic6": 4,
    "dihedral3": 2, "dihedral4": 3, "dihedral5": 2, "dihedral6": 4,
    "S3": 2, "S4": 2, "S4_pairs": 3,
}

MOD2 = ParametricFunction((0, 1, 0, 1))


def _direct_filter(theta, g):
    """Eq.-nec style filter over all element/point pairs."""
    for elem in g.elements:
        for p, q in itertools.combinations(range(len(theta)), 2):
            if theta[p] == theta[q] and theta[elem[p]] != theta[elem[q]]:
                return False
    return True


def test_bell_numbers():
    for n, b in enumerate(BELL):
        assert sum(1 for _ in set_partitions(n)) == b


def test_set_partitions_lexicographic():
    words = list(set_partitions(4))
    assert words == sorted(words)
    assert words[0] == (0, 0, 0, 0) and words[-1] == (0, 1, 2, 3)


def test_parametric_function_labels():
    f = ParametricFunction.from_labels(["x", "y", "x"])
    assert f.values == (0, 1, 0) and f.level_sets == [[0, 2], [1]]
    with pytest.raises(ValueError):
        ParametricFunction((0, 2))
    assert ParametricFunction((1, 0, 1)).same_partition(ParametricFunction((0, 1, 0)))


def test_identity_group_everything_permissible():
    g = trivial_group(4)
    assert all(check_permissible(w, g) for w in set_partitions(4))


def test_constant_always_permissible():
    for g in group_corpus(5).values():
        assert check_permissible(ParametricFunction.constant(g.n), g)


def test_indicator_not_permissible_on_cycle():
    g = cyclic_group(4)
    res = check_permissible((1, 0, 0, 0), g)
    assert not res
    elem, p, q = res.witness
    theta = (1, 0, 0, 0)
    image = g.elements[elem]
    assert theta[p] == theta[q] and theta[image[p]] != theta[image[q]]
    # the rotation itself exposes the pair (1, 3)
    assert not check_permissible((1, 0, 0, 0), close_group([(1, 2, 3, 0)]))
    assert theta[1] == theta[3] and theta[2] != theta[0]


def test_induce_group_mod2():
    maps = {m.label_map for m in induce_group(MOD2, cyclic_group(4))}
    assert maps == {(0, 1), (1, 0)}
    assert len(induced_group_action(MOD2, cyclic_group(4))) == 2


def test_induce_group_constant_and_identity():
    g = cyclic_group(4)
    assert {m.label_map for m in induce_group(ParametricFunction.constant(4), g)} == {(0,)}
    ident = ParametricFunction.identity(4)
    assert [m.label_map for m in induce_group(ident, g)] == list(g.elements)


def test_induce_group_raises():
    with pytest.raises(NotPermissibleError) as info:
        induce_group((1, 0, 0, 0), cyclic_group(4))
    assert info.value.witness is not None


def test_compose_permissible():
    g = cyclic_group(4)
    assert compose_permissible((0, 1), MOD2, g).key == MOD2.key
    assert compose_permissible((0, 0), MOD2, g).key == (0, 0, 0, 0)
    with pytest.raises(ValueError):
        compose_permissible((0, 1, 2), MOD2, g)


def test_join_functions():
    assert join_functions([MOD2]).key == MOD2.key
    assert join_functions([(0, 0, 0, 0), MOD2]).key == MOD2.key
    assert join_functions([MOD2, (0, 0, 1, 1)]).key == (0, 1, 2, 3)


def test_preceq():
    ident = ParametricFunction.identity(4)
    assert preceq((0, 0, 0, 0), MOD2)
    assert preceq(MOD2, MOD2)
    assert preceq(MOD2, ident) and not preceq(ident, MOD2)


def test_equivalence_classes():
    classes = equivalence_classes([(0, 1, 0), (1, 0, 1), (0, 0, 1), (0, 1, 0)])
    assert [len(c) for c in classes] == [3, 1]


def test_enumerate_identity3():
    assert len(enumerate_permissible(trivial_group(3))) == 5


def test_enumerate_cycle4_exact():
    keys = [f.key for f in enumerate_permissible(cyclic_group(4))]
    assert keys == [(0, 0, 0, 0), (0, 1, 0, 1), (0, 1, 2, 3)]


def test_enumerate_s4():
    keys = [f.key for f in enumerate_permissible(symmetric_group(4))]
    assert keys == [(0, 0, 0, 0), (0, 1, 2, 3)]


@pytest.mark.parametrize("name", sorted(PERMISSIBLE_COUNTS))
def test_enumerate_counts_match_oracle(name):
    g = group_corpus()[name]
    found = enumerate_permissible(g)
    assert len(found) == PERMISSIBLE_COUNTS[name]
    direct = [w for w in set_partitions(g.n) if _direct_filter(w, g)]
    assert [f.key for f in found] == direct


def test_enumerate_limit():
    with pytest.raises(ValueError):
        enumerate_permissible(trivial_group(11))


def _ens(n, exps, group=None):
    return Ensemble(StateSpace(n), group or trivial_group(n), tuple(exps))


def test_minimize_identity_quotient():
    e = _ens(2, [Experiment("a", 2, (0, 1), ((0.9, 0.1), (0.2, 0.8)))])
    m, q = minimize_state_space(e)
    assert q.values == (0, 1) and m.n == 2


def test_minimize_merges_duplicates():
    e = _ens(3, [Experiment("a", 2, (0, 1, 0), ((0.9, 0.1), (0.2, 0.8)))])
    m, q = minimize_state_space(e)
    assert q.values == (0, 1, 0) and m.n == 2
    assert m.space.nu == (2.0, 1.0)


def test_minimize_mod3():
    theta = tuple(i % 3 for i in range(6))
    rows = ((0.5, 0.5), (0.1, 0.9), (0.7, 0.3))
    e = _ens(6, [Experiment("a", 2, theta, rows)], cyclic_group(6))
    m, q = minimize_state_space(e)
    assert m.n == 3 and q.values == theta
    assert len(m.group) == 3 and validate_ensemble(m).ok


def test_minimize_group_must_descend():
    e = _ens(4, [Experiment("a", 2, (0, 1, 0, 0), ((0.9, 0.1), (0.2, 0.8)))], cyclic_group(4))
    with pytest.raises(NotPermissibleError):
        minimize_state_space(e)


@given(st.integers(1, 6), st.data())
def test_filters_agree(n, data):
    perms = data.draw(st.lists(st.permutations(range(n)), max_size=2))
    g = close_group([tuple(p) for p in perms], n=n)
    for w in set_partitions(n):
        assert bool(check_permissible(w, g)) == _direct_filter(w, g)


@given(st.integers(2, 6), st.data())
def test_induced_maps_are_homomorphic(n, data):
    perms = data.draw(st.lists(st.permutations(range(n)), min_size=1, max_size=2))
    g = close_group([tuple(p) for p in perms], n=n)
    for f in enumerate_permissible(g):
        maps = [m.label_map for m in induce_group(f, g)]
        for i, j in itertools.product(range(len(g)), repeat=2):
            prod = maps[g.multiply(i, j)]
            assert prod == tuple(maps[i][maps[j][t]] for t in range(f.n_labels))


@given(st.integers(1, 5), st.data())
def test_preceq_partial_order_on_permissible(n, data):
    perms = data.draw(st.lists(st.permutations(range(n)), max_size=2))
    g = close_group([tuple(p) for p in perms], n=n)
    fs = enumerate_permissible(g)
    ident = ParametricFunction.identity(n)
    assert any(f.key == ident.key for f in fs)
    for a in fs:
        assert preceq(a, a) and preceq(a, ident)
        for b in fs:
            if preceq(a, b) and preceq(b, a):
                assert a.key == b.key
            for c in fs:
                if preceq(a, b) and preceq(b, c):
                    assert preceq(a, c)


@given(st.integers(1, 6), st.data())
def test_join_is_least_upper_bound(n, data):
    words = list(set_partitions(n))
    f1 = data.draw(st.sampled_from(words))
    f2 = data.draw(st.sampled_from(words))
    j = join_functions([f1, f2])
    assert preceq(f1, j) and preceq(f2, j)
    for u in words:
        if preceq(f1, u) and preceq(f2, u):
            assert preceq(j, u)


@given(st.integers(1, 6), st.data())
def test_join_of_permissible_is_permissible(n, data):
    perms = data.draw(st.lists(st.permutations(range(n)), max_size=2))
    g = close_group([tuple(p) for p in perms], n=n)
    fs = enumerate_permissible(g)
    a, b = data.draw(st.sampled_from(fs)), data.draw(st.sampled_from(fs))
    assert check_permissible(join_functions([a, b], g), g)
