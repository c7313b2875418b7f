"""Reader and writer for ``.qsm`` model files.

A model file is line oriented; ``#`` starts a comment and tokens are
separated by whitespace::

    space 4
    weight 1 1 1 1            # optional, default all 1
    label r1 r2 b1 b2         # optional point names
    group rot: 1 2 3 0        # a generator as an image list, repeatable
    experiment parity
      outcomes 2
      theta 0 1 0 1
      row 0: 0.7 0.3
      row 1: 0.2 0.8
      sample flip: 1 0        # optional generator of the outcome group
    end

Syntax errors raise ParseError; well-formed files describing an invalid
ensemble raise ModelValidationError. Both carry line and column numbers.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple

from .ensemble import (Ensemble, Experiment, GroupCapError, StateSpace, close_group,
                       is_bijection, trivial_group, validate_ensemble)

_TOKEN = re.compile(r"\S+")


class Diagnostic(NamedTuple):
    line: int
    column: int
    message: str

    def __str__(self) -> str:
        return f"{self.line}:{self.column}: {self.message}"


class ModelError(Exception):
    exit_code = 1

    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(str(d) for d in self.diagnostics))

    @property
    def line(self) -> int:
        return self.diagnostics[0].line

    @property
    def column(self) -> int:
        return self.diagnostics[0].column


class ParseError(ModelError):
    exit_code = 3

    def __init__(self, line: int, column: int, message: str):
        super().__init__([Diagnostic(line, column, message)])


class ModelValidationError(ModelError):
    exit_code = 1


class Token(NamedTuple):
    text: str
    line: int
    column: int


def _tokens(text: str) -> list[list[Token]]:
    lines = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0]
        toks = [Token(m.group(), lineno, m.start() + 1) for m in _TOKEN.finditer(body)]
        if toks:
            lines.append(toks)
    return lines


def _int(tok: Token, what: str) -> int:
    try:
        return int(tok.text)
    except ValueError:
        raise ParseError(tok.line, tok.column, f"expected integer {what}, got {tok.text!r}")


def _number(tok: Token, what: str) -> float:
    try:
        return float(tok.text)
    except ValueError:
        pass
    try:
        return float(Fraction(tok.text))
    except (ValueError, ZeroDivisionError):
        raise ParseError(tok.line, tok.column, f"expected number {what}, got {tok.text!r}")


def _labelled(toks: list[Token], keyword: str) -> tuple[Token, list[Token]]:
    """Split ``keyword NAME: v0 v1 ...`` (colon attached or separate)."""
    rest = toks[1:]
    if not rest:
        raise ParseError(toks[0].line, toks[0].column + len(keyword), f"{keyword} needs a name")
    head = rest[0]
    if head.text.endswith(":") and len(head.text) > 1:
        return Token(head.text[:-1], head.line, head.column), rest[1:]
    if len(rest) > 1 and rest[1].text == ":":
        return head, rest[2:]
    if ":" in head.text:
        name, _, value = head.text.partition(":")
        return (Token(name, head.line, head.column),
                [Token(value, head.line, head.column + len(name) + 1)] + rest[1:])
    raise ParseError(head.line, head.column + len(head.text), f"expected ':' after {keyword} name")


@dataclass
class _ExperimentDraft:
    name: str
    loc: Token
    outcomes: int | None = None
    theta: list[int] | None = None
    rows: dict[int, list[float]] = field(default_factory=dict)
    sample: list[tuple[str, list[int], Token]] = field(default_factory=list)


@dataclass
class ModelDocument:
    """A parsed ensemble with the source position of every declaration.

    ``locations`` keys: ``("space",)``, ``("weight",)``, ``("label",)``,
    ``("group", name)``, ``("experiment", name)``, ``("outcomes", name)``,
    ``("theta", name)``, ``("row", name, t)``, ``("sample", name, gen)``.
    """

    ensemble: Ensemble
    locations: dict[tuple, tuple[int, int]]
    group_names: tuple[str, ...] = ()
    sample_names: dict[str, tuple[str, ...]] = field(default_factory=dict)


def parse_model(text: str) -> ModelDocument:
    lines = _tokens(text)
    locs: dict[tuple, tuple[int, int]] = {}
    n = None
    weights = labels = None
    groups: list[tuple[str, list[int], Token]] = []
    drafts: list[_ExperimentDraft] = []
    current: _ExperimentDraft | None = None

    def at(key, tok):
        locs[key] = (tok.line, tok.column)

    for toks in lines:
        kw = toks[0]
        word = kw.text
        if current is not None:
            if word == "end":
                if len(toks) > 1:
                    raise ParseError(toks[1].line, toks[1].column, "unexpected token after end")
                if current.outcomes is None:
                    raise ParseError(kw.line, kw.column,
                                     f"experiment {current.name} has no outcomes line")
                if current.theta is None:
                    raise ParseError(kw.line, kw.column,
                                     f"experiment {current.name} has no theta line")
                drafts.append(current)
                current = None
            elif word == "outcomes":
                if current.outcomes is not None:
                    raise ParseError(kw.line, kw.column, "duplicate outcomes line")
                if len(toks) != 2:
                    raise ParseError(kw.line, kw.column, "outcomes takes one integer")
                current.outcomes = _int(toks[1], "outcome count")
                at(("outcomes", current.name), kw)
            elif word == "theta":
                if current.theta is not None:
                    raise ParseError(kw.line, kw.column, "duplicate theta line")
                current.theta = [_int(t, "theta label") for t in toks[1:]]
                at(("theta", current.name), kw)
            elif word == "row":
                label, values = _labelled(toks, "row")
                t = _int(label, "row label")
                if t in current.rows:
                    raise ParseError(label.line, label.column, f"duplicate row {t}")
                current.rows[t] = [_number(v, "probability") for v in values]
                at(("row", current.name, t), kw)
            elif word == "sample":
                name, values = _labelled(toks, "sample")
                current.sample.append((name.text, [_int(v, "image") for v in values], kw))
                at(("sample", current.name, name.text), kw)
            elif word == "experiment":
                raise ParseError(kw.line, kw.column,
                                 f"experiment {current.name} is not closed with end")
            else:
                raise ParseError(kw.line, kw.column, f"unknown directive {word!r} in experiment")
            continue

        if word == "space":
            if n is not None:
                raise ParseError(kw.line, kw.column, "duplicate space line")
            if len(toks) != 2:
                raise ParseError(kw.line, kw.column, "space takes one integer")
            n = _int(toks[1], "point count")
            if n < 1:
                raise ParseError(toks[1].line, toks[1].column, "space must have at least one point")
            at(("space",), kw)
            continue
        if n is None:
            raise ParseError(kw.line, kw.column, "the first declaration must be 'space N'")
        if word == "weight":
            if weights is not None:
                raise ParseError(kw.line, kw.column, "duplicate weight line")
            weights = ([_number(t, "weight") for t in toks[1:]], kw)
            at(("weight",), kw)
        elif word == "label":
            if labels is not None:
                raise ParseError(kw.line, kw.column, "duplicate label line")
            labels = ([t.text for t in toks[1:]], kw)
            at(("label",), kw)
        elif word == "group":
            name, values = _labelled(toks, "group")
            if any(g[0] == name.text for g in groups):
                raise ParseError(name.line, name.column, f"duplicate group generator {name.text}")
            groups.append((name.text, [_int(v, "image") for v in values], kw))
            at(("group", name.text), kw)
        elif word == "experiment":
            if len(toks) != 2:
                raise ParseError(kw.line, kw.column, "experiment takes one name")
            current = _ExperimentDraft(toks[1].text, kw)
            at(("experiment", current.name), kw)
        elif word == "end":
            raise ParseError(kw.line, kw.column, "end without experiment")
        else:
            raise ParseError(kw.line, kw.column, f"unknown directive {word!r}")

    if current is not None:
        last = lines[-1][-1]
        raise ParseError(last.line, last.column + len(last.text),
                         f"end of file inside experiment {current.name}")
    if n is None:
        raise ParseError(1, 1, "empty model: expected 'space N'")
    return _assemble(n, weights, labels, groups, drafts, locs)


def _assemble(n, weights, labels, groups, drafts, locs) -> ModelDocument:
    errors: list[Diagnostic] = []

    def fail(tok, msg):
        errors.append(Diagnostic(tok.line, tok.column, msg))

    nu: tuple[float, ...] = ()
    if weights is not None:
        vals, tok = weights
        if len(vals) != n:
            fail(tok, f"weight lists {len(vals)} values for {n} points")
        elif any(not w > 0 for w in vals):
            fail(tok, "weights must be strictly positive")
        else:
            nu = tuple(vals)
    names = None
    if labels is not None:
        vals, tok = labels
        if len(vals) != n:
            fail(tok, f"label lists {len(vals)} names for {n} points")
        else:
            names = tuple(vals)
    gens = []
    for name, images, tok in groups:
        if not is_bijection(images, n):
            fail(tok, f"group generator {name} is not a permutation of 0..{n - 1}")
        else:
            gens.append(tuple(images))
    group = trivial_group(n)
    if gens and len(gens) == len(groups):
        try:
            group = close_group(gens, n=n)
        except GroupCapError as exc:
            fail(groups[0][2], str(exc))
    experiments = []
    sample_names = {}
    seen = set()
    for d in drafts:
        if d.name in seen:
            fail(d.loc, f"duplicate experiment name {d.name}")
        seen.add(d.name)
        if d.outcomes < 1:
            fail(d.loc, f"experiment {d.name} needs at least one outcome")
            continue
        labels_used = sorted(set(d.theta))
        missing = [t for t in range(len(labels_used)) if t not in d.rows]
        if labels_used != list(range(len(labels_used))):
            fail(Token("", *locs[("theta", d.name)]),
                 f"theta labels of {d.name} are not contiguous from 0")
        elif missing:
            fail(d.loc, f"experiment {d.name} has no row for theta label {missing[0]}")
        extra = [t for t in d.rows if t >= len(labels_used)]
        for t in extra:
            fail(Token("", *locs[("row", d.name, t)]), f"row {t} has no matching theta label")
        sample = None
        if d.sample:
            bad = [s for s in d.sample if not is_bijection(s[1], d.outcomes)]
            for s in bad:
                fail(s[2], f"sample generator {s[0]} is not a permutation of the outcomes")
            if not bad:
                sample = close_group([tuple(s[1]) for s in d.sample], n=d.outcomes)
            sample_names[d.name] = tuple(s[0] for s in d.sample)
        rows = tuple(tuple(d.rows[t]) for t in sorted(d.rows))
        experiments.append(Experiment(d.name, d.outcomes, tuple(d.theta), rows, sample))
    if errors:
        raise ModelValidationError(errors)
    e = Ensemble(StateSpace(n, nu, names), group, tuple(experiments))
    report = validate_ensemble(e)
    if not report.ok:
        diags = []
        for v in report.violations:
            if v.row is not None and ("row", v.experiment, v.row) in locs:
                pos = locs[("row", v.experiment, v.row)]
            elif v.kind == "theta" and ("theta", v.experiment) in locs:
                pos = locs[("theta", v.experiment)]
            elif v.experiment is not None:
                pos = locs[("experiment", v.experiment)]
            else:
                pos = locs[("space",)]
            diags.append(Diagnostic(pos[0], pos[1], v.message))
        raise ModelValidationError(diags)
    return ModelDocument(e, locs, tuple(g[0] for g in groups), sample_names)


def load_model(path) -> ModelDocument:
    with open(path, encoding="utf-8") as fh:
        return parse_model(fh.read())


def _fmt(x: float) -> str:
    return repr(float(x))


def serialize_model(e: Ensemble, group_names=None, sample_names=None) -> str:
    """Text of a model file that parses back to ``e``."""
    out = [f"space {e.n}"]
    if any(w != 1.0 for w in e.space.nu):
        out.append("weight " + " ".join(_fmt(w) for w in e.space.nu))
    if e.space.labels is not None:
        out.append("label " + " ".join(e.space.labels))
    names = list(group_names or [f"g{i}" for i in range(len(e.group.generators))])
    for name, g in zip(names, e.group.generators):
        out.append(f"group {name}: " + " ".join(map(str, g)))
    for ex in e.experiments:
        out.append(f"experiment {ex.name}")
        out.append(f"  outcomes {ex.outcomes}")
        out.append("  theta " + " ".join(map(str, ex.theta)))
        for t, row in enumerate(ex.rows):
            out.append(f"  row {t}: " + " ".join(_fmt(p) for p in row))
        if ex.sample_group is not None:
            snames = (sample_names or {}).get(ex.name) or [
                f"s{i}" for i in range(len(ex.sample_group.generators))]
            for name, g in zip(snames, ex.sample_group.generators):
                out.append(f"  sample {name}: " + " ".join(map(str, g)))
        out.append("end")
    return "\n".join(out) + "\n"


def serialize_document(doc: ModelDocument) -> str:
    return serialize_model(doc.ensemble, doc.group_names, doc.sample_names)
