"""Built-in models: the non-distributive pair, the envelope game, group corpus.

The envelope game has four hidden assignments of the organizer, indexed
``0=(red,1), 1=(red,2), 2=(black,1), 3=(black,2)`` by what person A
receives in envelopes I and II. Person B receives the complementary cards.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.linalg import null_space

from .ensemble import (Ensemble, Experiment, GroupAction, StateSpace, close_group, compose,
                       inverse, relabel, trivial_group)
from .hilbert import ProjectorFamily, hadamard
from .symmetry import set_partitions

# -- group corpus ---------------------------------------------------------


def identity_group(n: int) -> GroupAction:
    return trivial_group(n)


def cyclic_group(n: int) -> GroupAction:
    return close_group([tuple((i + 1) % n for i in range(n))], n=n)


def dihedral_group(n: int) -> GroupAction:
    rot = tuple((i + 1) % n for i in range(n))
    ref = tuple((-i) % n for i in range(n))
    return close_group([rot, ref], n=n)


def symmetric_group(n: int) -> GroupAction:
    if n < 2:
        return trivial_group(n)
    swap = (1, 0, *range(2, n))
    cycle = tuple((i + 1) % n for i in range(n))
    return close_group([swap, cycle], n=n)


def s4_on_pairs() -> GroupAction:
    """S4 acting on the six 2-element subsets of {0, 1, 2, 3}."""
    pairs = list(itertools.combinations(range(4), 2))
    idx = {p: i for i, p in enumerate(pairs)}

    def lift(g):
        return tuple(idx[tuple(sorted((g[a], g[b])))] for a, b in pairs)

    return close_group([lift((1, 0, 2, 3)), lift((1, 2, 3, 0))], n=6)


def group_corpus(max_n: int = 6) -> dict[str, GroupAction]:
    """Named group actions on at most ``max_n`` points."""
    out = {}
    for n in range(1, max_n + 1):
        out[f"identity{n}"] = identity_group(n)
        if n >= 2:
            out[f"cyclic{n}"] = cyclic_group(n)
        if n >= 3:
            out[f"dihedral{n}"] = dihedral_group(n)
    out["S3"] = symmetric_group(3)
    out["S4"] = symmetric_group(4)
    if max_n >= 6:
        out["S4_pairs"] = s4_on_pairs()
    return out


# -- non-distributive example ------------------------------------------------

EXAMPLE1_EVENTS = {"A": ("a", frozenset({0, 1})), "B": ("a", frozenset({1, 2})),
                   "C": ("b", frozenset({0}))}


def make_example1() -> Ensemble:
    """Two unrelated experiments on two states whose events violate distributivity.

    Experiment ``a`` has outcomes {0, 1, 2} with events A = {0, 1} and
    B = {1, 2}; experiment ``b`` has outcomes {0, 1} with event C = {0}.
    At state 1 the event C is almost sure; at state 0 it is impossible.
    Neither of A, B is sure at any state, so the only upper bound of the
    complements of A and C in the event poset is the unit.
    """
    a = Experiment("a", 3, (1, 0), ((0.6, 0.2, 0.2), (0.2, 0.3, 0.5)))
    b = Experiment("b", 2, (0, 1), ((0.0, 1.0), (0.9, 0.1)))
    return Ensemble(StateSpace(2), trivial_group(2), (a, b))


# -- envelope game -----------------------------------------------------------

COLOR_SWAP = (2, 3, 0, 1)
NUMBER_SWAP = (1, 0, 3, 2)
ENVELOPE_SWAP = (0, 2, 1, 3)
ENVELOPE_LABELS = ("red,1", "red,2", "black,1", "black,2")


def envelope_law(gamma: float) -> np.ndarray:
    """Joint law of A's two cards: ``P(red,1) = P(black,2) = (1 + gamma) / 4``."""
    if not -1.0 <= gamma <= 1.0:
        raise ValueError(f"gamma={gamma} outside [-1, 1]")
    hi, lo = (1 + gamma) / 4, (1 - gamma) / 4
    return np.array([hi, lo, lo, hi])


def envelope_group() -> GroupAction:
    return close_group([COLOR_SWAP, NUMBER_SWAP, ENVELOPE_SWAP], n=4)


def envelope_ensemble() -> Ensemble:
    """Deterministic experiments: A or B opens envelope I (color) or II (number).

    Outcome 0 is red in envelope I and the card 1 in envelope II.
    """
    color, number = (0, 0, 1, 1), (0, 1, 0, 1)
    see, miss = ((1.0, 0.0), (0.0, 1.0)), ((0.0, 1.0), (1.0, 0.0))
    exps = (Experiment("AI", 2, color, see), Experiment("AII", 2, number, see),
            Experiment("BI", 2, color, miss), Experiment("BII", 2, number, miss))
    return Ensemble(StateSpace(4, labels=ENVELOPE_LABELS), envelope_group(), exps)


@dataclass(frozen=True, eq=False)
class EnvelopeModel:
    gamma: float
    ensemble: Ensemble
    prior: np.ndarray  # organizer's law over the hidden assignments
    family: ProjectorFamily  # envelope I in the standard basis, II in the Hadamard basis

    @property
    def joint(self) -> np.ndarray:
        """A's (color, number) law as a 2 x 2 table."""
        return self.prior.reshape(2, 2)

    def marginal(self, name: str) -> np.ndarray:
        return self.prior @ self.ensemble.experiment(name).probabilities()


def make_envelope(gamma: float = 0.0) -> EnvelopeModel:
    prior = envelope_law(gamma)
    e = envelope_ensemble()
    eye, h = np.eye(2, dtype=complex), hadamard(2)
    family = ProjectorFamily(2, (eye, h, eye, h), tuple(ex.name for ex in e.experiments))
    return EnvelopeModel(float(gamma), e, prior, family)


class BellReport(NamedTuple):
    gamma: float
    correlators: dict[str, float]
    S: float
    satisfied: bool


def bell_chsh(gamma: float) -> BellReport:
    """CHSH value of the envelope game by enumeration of the hidden assignment.

    Each side codes outcome 0 (red, or the card 1) as +1 and outcome 1 as -1.
    """
    model = make_envelope(gamma)
    e = model.ensemble
    sign = {name: 1.0 - 2.0 * e.experiment(name).probabilities()[:, 0].round()
            for name in ("AI", "AII", "BI", "BII")}
    w = model.prior
    corr = {f"{a}.{b}": float(np.sum(w * sign[a] * sign[b]))
            for a in ("AI", "AII") for b in ("BI", "BII")}
    S = corr["AI.BI"] + corr["AI.BII"] + corr["AII.BI"] - corr["AII.BII"]
    return BellReport(float(gamma), corr, S, abs(S) <= 2.0 + 1e-12)


# -- representation structure of the envelope transformations ----------------

def conjugacy_classes(g: GroupAction) -> list[frozenset]:
    seen, classes = set(), []
    for x in g.elements:
        if x in seen:
            continue
        cls = frozenset(compose(compose(h, x), inverse(h)) for h in g.elements)
        seen |= cls
        classes.append(cls)
    return classes


def normal_subgroups(g: GroupAction) -> list[frozenset]:
    """Normal subgroups as unions of conjugacy classes closed under products."""
    ident = g.elements[0]
    classes = [c for c in conjugacy_classes(g) if ident not in c]
    out = []
    for r in range(len(classes) + 1):
        for combo in itertools.combinations(classes, r):
            N = frozenset({ident}.union(*combo))
            if all(compose(x, y) in N for x in N for y in N):
                out.append(N)
    return sorted(out, key=len)


class Quotient(NamedTuple):
    kernel_order: int
    order: int
    abelian: bool


def quotients(g: GroupAction) -> list[Quotient]:
    out = []
    for N in normal_subgroups(g):
        # G/N is abelian iff every commutator lies in N
        abelian = all(compose(compose(x, y), inverse(compose(y, x))) in N
                      for x in g.elements for y in g.elements)
        out.append(Quotient(len(N), len(g) // len(N), abelian))
    return out


def coset_images(g: GroupAction, N: frozenset, elems) -> list[int]:
    """Coset index of each element in ``G/N`` (cosets numbered by first appearance)."""
    cosets: list[frozenset] = []
    for x in g.elements:
        if not any(x in c for c in cosets):
            cosets.append(frozenset(compose(x, k) for k in N))
    return [next(i for i, c in enumerate(cosets) if tuple(y) in c) for y in elems]


def commutant_dimension(mats) -> int:
    """Dimension of the space of matrices commuting with every given matrix."""
    d = mats[0].shape[0]
    eye = np.eye(d)
    rows = [np.kron(eye, R) - np.kron(R.T, eye) for R in mats]
    return null_space(np.vstack(rows)).shape[1]


def invariant_blocks(mats, seed: int = 0, tol: float = 1e-8) -> list[np.ndarray]:
    """Orthonormal bases of a decomposition into commutant eigenspaces.

    Eigenspaces of a generic Hermitian element of the commutant are
    invariant; for a multiplicity-free representation they are irreducible.
    """
    d = mats[0].shape[0]
    eye = np.eye(d)
    K = null_space(np.vstack([np.kron(eye, R) - np.kron(R.T, eye) for R in mats]))
    rng = np.random.default_rng(seed)
    X = (K @ rng.standard_normal(K.shape[1])).reshape(d, d, order="F")
    X = (X + X.conj().T) / 2
    w, V = np.linalg.eigh(X)
    blocks, start = [], 0
    for i in range(1, d + 1):
        if i == d or abs(w[i] - w[start]) > tol:
            blocks.append(V[:, start:i])
            start = i
    return blocks


def restrict(mats, basis) -> list[np.ndarray]:
    return [basis.conj().T @ R @ basis for R in mats]


def _perm_matrices(g: GroupAction) -> list[np.ndarray]:
    mats = []
    for elem in g.elements:
        P = np.zeros((g.n, g.n))
        P[list(elem), np.arange(g.n)] = 1.0
        mats.append(P)
    return mats


def pairing_action() -> GroupAction:
    """S4 acting on the three ways of splitting {0, 1, 2, 3} into two pairs."""
    pairings = [frozenset({frozenset(p), frozenset(set(range(4)) - set(p))})
                for p in ((0, 1), (0, 2), (0, 3))]

    def lift(g):
        return tuple(pairings.index(frozenset(frozenset(g[i] for i in half) for half in pm))
                     for pm in pairings)

    return close_group([lift((1, 0, 2, 3)), lift((1, 2, 3, 0))], n=3)


@dataclass
class S3Report:
    generators: dict[str, tuple[int, ...]]
    generated_order: int
    divides_24: bool
    s4_quotients: list[Quotient]
    smallest_nonabelian_quotient: int
    is_s3: bool
    generator_images: dict[str, int]  # coset index in that quotient
    pairing_block_dim: int
    pairing_block_commutant: int
    generated_block_dims: list[int]
    generated_2d_commutant: int | None


def make_s3_structure(seed: int = 0) -> S3Report:
    """Group-theoretic structure behind the three envelope transformations.

    The transformations generate a subgroup of S4 on the four assignments.
    The smallest non-commutative quotient of S4 has order 6 (kernel the
    Klein four-group), so it is S3; S4 acting on the three pairings
    realizes it, with a 2-dimensional irreducible block. The generated
    subgroup's own permutation representation also has a 2-dimensional
    irreducible block.
    """
    gens = {"color": COLOR_SWAP, "number": NUMBER_SWAP, "envelope": ENVELOPE_SWAP}
    G = envelope_group()
    S4 = symmetric_group(4)
    qs = quotients(S4)
    nonab = [q for q in qs if not q.abelian]
    smallest = min(nonab, key=lambda q: q.order)
    kernel = next(N for N in normal_subgroups(S4) if len(N) == smallest.kernel_order)
    # the only non-commutative group of order 6 is S3
    is_s3 = smallest.order == 6
    images = dict(zip(gens, coset_images(S4, kernel, gens.values())))

    pair_mats = _perm_matrices(pairing_action())
    blocks = invariant_blocks(pair_mats, seed)
    block2 = next(b for b in blocks if b.shape[1] == 2)
    pair_comm = commutant_dimension(restrict(pair_mats, block2))

    gmats = _perm_matrices(G)
    gblocks = invariant_blocks(gmats, seed)
    g2 = [b for b in gblocks if b.shape[1] == 2]
    gcomm = commutant_dimension(restrict(gmats, g2[0])) if g2 else None
    return S3Report(gens, len(G), 24 % len(G) == 0, qs, smallest.order, is_s3, images,
                    block2.shape[1], pair_comm, sorted(b.shape[1] for b in gblocks), gcomm)


# -- further small ensembles -------------------------------------------------

def make_cycle4() -> Ensemble:
    """Four states on a cycle with a parity experiment and a full-resolution one."""
    parity = Experiment("parity", 3, (0, 1, 0, 1), ((0.5, 0.3, 0.2), (0.1, 0.3, 0.6)))
    full = Experiment("full", 4, (0, 1, 2, 3),
                      ((0.4, 0.3, 0.2, 0.1), (0.1, 0.4, 0.3, 0.2),
                       (0.2, 0.1, 0.4, 0.3), (0.3, 0.2, 0.1, 0.4)))
    return Ensemble(StateSpace(4), cyclic_group(4), (parity, full))


def make_bsc(p: float = 0.8) -> Ensemble:
    """Binary symmetric channel; flipping the output mirrors swapping the input."""
    flip = close_group([(1, 0)], n=2)
    ch = Experiment("channel", 2, (0, 1), ((p, 1 - p), (1 - p, p)), sample_group=flip)
    return Ensemble(StateSpace(2), close_group([(1, 0)], n=2), (ch,))


QUBIT_FRAMES = {
    "z": np.eye(2, dtype=complex),
    "x": hadamard(2),
    "y": np.array([[1, 1], [1j, -1j]], dtype=complex) / np.sqrt(2),
}


def tetrahedron_states() -> np.ndarray:
    """Four qubit states whose Bloch vectors form a regular tetrahedron."""
    bloch = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]]) / np.sqrt(3)
    out = []
    for x, y, z in bloch:
        theta, phi = np.arccos(z), np.arctan2(y, x)
        out.append([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)])
    return np.array(out)


def make_qubit() -> tuple[Ensemble, ProjectorFamily, np.ndarray]:
    """Three complementary two-outcome measurements on four pure qubit states."""
    states = tetrahedron_states()
    exps = []
    for name, F in QUBIT_FRAMES.items():
        probs = np.abs(states @ F.conj()) ** 2  # row phi: |<f_x|psi_phi>|^2
        # states sharing an outcome law share a label
        theta = relabel([tuple(np.round(r, 12)) for r in probs])
        rows = [probs[theta.index(t)] for t in range(max(theta) + 1)]
        exps.append(Experiment(name, 2, theta, tuple(map(tuple, rows))))
    e = Ensemble(StateSpace(4), trivial_group(4), tuple(exps))
    fam = ProjectorFamily(2, tuple(QUBIT_FRAMES.values()), tuple(QUBIT_FRAMES))
    return e, fam, states


def random_ensemble(rng: np.random.Generator, max_n: int = 6, max_experiments: int = 4,
                    max_outcomes: int = 4, group: GroupAction | None = None) -> Ensemble:
    """A valid ensemble with random labelings and Dirichlet outcome laws."""
    n = group.n if group is not None else int(rng.integers(1, max_n + 1))
    words = list(set_partitions(n)) if n <= 6 else None
    exps = []
    for k in range(int(rng.integers(1, max_experiments + 1))):
        m = int(rng.integers(2, max_outcomes + 1))
        theta = words[int(rng.integers(len(words)))]
        labels = max(theta) + 1
        rows = rng.dirichlet(np.ones(m), size=labels)
        exps.append(Experiment(f"e{k}", m, theta, tuple(map(tuple, rows))))
    return Ensemble(StateSpace(n), group or trivial_group(n), tuple(exps))


BUILTIN_NAMES = ("example1", "envelope", "cycle4", "bsc", "qubit")


def builtin(name: str, gamma: float = 0.0) -> Ensemble:
    """A built-in ensemble by name."""
    if name == "example1":
        return make_example1()
    if name == "envelope":
        return make_envelope(gamma).ensemble
    if name == "cycle4":
        return make_cycle4()
    if name == "bsc":
        return make_bsc()
    if name == "qubit":
        return make_qubit()[0]
    raise KeyError(f"unknown built-in model {name!r}")


def example1_report() -> dict:
    """The three lattice identities of the non-distributive pair and a witness triple."""
    from .logic import build_poset, check_distributive, proposition_of

    e = make_example1()
    poset = build_poset(e)
    idx = {k: poset.index(proposition_of(e.experiment(a), ev))
           for k, (a, ev) in EXAMPLE1_EVENTS.items()}
    A, B, C = idx["A"], idx["B"], idx["C"]
    Ac, Cc = poset.complement(A), poset.complement(C)
    join_c, ex1 = poset.join(Ac, Cc)
    mAC, ex2 = poset.meet(A, C)
    mBC, ex3 = poset.meet(B, C)
    lhs, ex4 = poset.join(mAC, mBC)
    jAB, ex5 = poset.join(A, B)
    rhs, ex6 = poset.meet(jAB, C)
    exact = all((ex1, ex2, ex3, ex4, ex5, ex6))
    dist = check_distributive(poset, [(C, A, B)])
    witness = None
    if dist.witnesses:
        w = dist.witnesses[0]
        witness = {"triple": [poset[i].origin for i in w["triple"]], "law": w["law"],
                   "lhs": poset[w["lhs"]].origin, "rhs": poset[w["rhs"]].origin}
    return {
        "complements_join_to_one": join_c == poset.one,
        "meets_then_join_is_zero": lhs == poset.zero,
        "join_then_meet_is_C": rhs == C,
        "exact": exact,
        "profiles": {k: poset[i].values for k, i in idx.items()},
        "distributive_witness": witness,
    }
