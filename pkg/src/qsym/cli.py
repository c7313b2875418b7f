"""Command-line driver: ``qsym COMMAND FILE [options]``.

FILE is a ``.qsm`` model file or the name of a built-in model
(example1, envelope, cycle4, bsc, qubit). Exit codes: 0 success,
1 validation failure, 2 property violated, 3 parse error.
"""
from __future__ import annotations

import argparse
import json
import sys
from typing import Any

import numpy as np
from scipy.linalg import expm

from . import builtin as bi
from .ensemble import Ensemble, orbits
from .hilbert import ProjectorFamily, build_dynamics, gleason_fit
from .inference import ZeroLikelihoodError, estimate, posterior
from .logic import (build_poset, check_assumption1, check_atomic_covering_separable,
                    check_distributive, check_orthomodular)
from .modelfile import ModelError, load_model, serialize_model
from .repspace import (NonInvariantMeasureError, check_invariant, correspondence_report,
                       regular_rep, subspace_of_function)
from .symmetry import check_permissible, enumerate_permissible

EXIT_OK, EXIT_INVALID, EXIT_VIOLATED, EXIT_PARSE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # bad invocations count as invalid input, keeping 2 for violated properties
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _load(args) -> tuple[Ensemble, dict]:
    """Ensemble plus extras (prior, default family) for built-in models."""
    name = args.file
    if name in bi.BUILTIN_NAMES:
        if name == "envelope":
            m = bi.make_envelope(args.gamma)
            return m.ensemble, {"prior": m.prior, "family": m.family}
        if name == "qubit":
            e, fam, _ = bi.make_qubit()
            return e, {"family": fam}
        return bi.builtin(name), {}
    return load_model(name).ensemble, {}


def cmd_validate(args):
    e, _ = _load(args)
    report = {"model": args.file, "valid": True, "points": e.n, "group_order": len(e.group),
              "orbits": orbits(e),
              "experiments": [{"name": ex.name, "outcomes": ex.outcomes,
                               "labels": ex.n_labels} for ex in e.experiments]}
    return EXIT_OK, report


def cmd_permissible(args):
    e, _ = _load(args)
    rows = []
    for ex in e.experiments:
        res = check_permissible(ex.theta, e.group)
        rows.append({"experiment": ex.name, "permissible": res.permissible,
                     "witness": res.witness})
    report = {"model": args.file, "group_order": len(e.group), "experiments": rows}
    if args.enumerate:
        funcs = enumerate_permissible(e.group)
        report["permissible_partitions"] = [list(f.key) for f in funcs]
    code = EXIT_OK if all(r["permissible"] for r in rows) else EXIT_VIOLATED
    return code, report


def _origin(poset, i):
    return poset[i].origin


def cmd_lattice(args):
    e, _ = _load(args)
    check = args.check
    if check == "orthomodular":
        poset = build_poset(e, closure="orthomodular", rounds=args.rounds)
        rep = check_orthomodular(poset)
        report = {"size": len(poset), "checked": rep.checked, "unchecked": rep.unchecked,
                  "witnesses": [{"p": _origin(poset, i), "q": _origin(poset, j), "deviation": d}
                                for i, j, d in rep.witnesses]}
        ok = rep.ok
    elif check == "distributive":
        poset = build_poset(e)
        rep = check_distributive(poset)
        report = {"size": len(poset), "checked": rep.checked, "partial": rep.partial,
                  "violations": len(rep.witnesses)}
        if rep.witnesses:
            w = rep.witnesses[0]
            report["witness"] = {"triple": [_origin(poset, i) for i in w["triple"]],
                                 "law": w["law"], "lhs": _origin(poset, w["lhs"]),
                                 "rhs": _origin(poset, w["rhs"])}
        ok = rep.ok
    elif check == "atoms":
        poset = build_poset(e)
        rep = check_atomic_covering_separable(poset)
        report = {"size": len(poset), "atoms": [_origin(poset, a) for a in rep.atoms],
                  "atomic": rep.atomic, "covering_failures": len(rep.covering_failures),
                  "covering_partial": rep.covering_partial, "separable": rep.separable}
        ok = rep.atomic and not rep.covering_failures
    else:
        poset = build_poset(e)
        rep = check_assumption1(poset)
        report = {"size": len(poset), "scanned": rep.scanned,
                  "violations": [[_origin(poset, i) for i in v] for v in rep.violations]}
        ok = rep.ok
    report = {"model": args.file, "check": check, "holds": bool(ok), **report}
    return (EXIT_OK if ok else EXIT_VIOLATED), report


def cmd_rep(args):
    e, _ = _load(args)
    try:
        mats = regular_rep(e.group, e.space.nu)
    except NonInvariantMeasureError as exc:
        return EXIT_INVALID, {"model": args.file, "error": str(exc)}
    rows = []
    for ex in e.experiments:
        V = subspace_of_function(ex.theta, e.space.nu)
        rows.append({"experiment": ex.name, "dim": V.dim,
                     "invariant": check_invariant(V, mats)})
    report = {"model": args.file, "group_order": len(mats), "orbits": orbits(e),
              "subspaces": rows}
    code = EXIT_OK
    if args.correspondence:
        cr = correspondence_report(e.group, e.space.nu)
        report["correspondence"] = {"permissible": cr.n_permissible,
                                    "invariant": cr.n_invariant, "bijective": cr.bijective,
                                    "order_mismatches": len(cr.order_mismatches)}
        if not cr.ok:
            code = EXIT_VIOLATED
    return code, report


def _read_family(path, e: Ensemble) -> ProjectorFamily:
    """Frames from JSON: a list (one per experiment) of d x m matrices.

    Entries are numbers, ``[re, im]`` pairs or strings such as ``"0.5-0.5j"``.
    """
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    frames = data["frames"] if isinstance(data, dict) else data

    def entry(v):
        if isinstance(v, list):
            return complex(v[0], v[1])
        return complex(v)

    return ProjectorFamily.for_ensemble(
        e, [np.array([[entry(v) for v in row] for row in f]) for f in frames])


def cmd_fit(args):
    e, extra = _load(args)
    if args.phi is not None:
        phi = args.phi
        if not 0 <= phi < e.n:
            raise UsageError(f"--phi {phi} out of range 0..{e.n - 1}")
    else:
        phi = extra.get("prior")
        if phi is None:
            phi = e.space.weights / e.space.weights.sum()
    family = _read_family(args.family, e) if args.family else extra.get("family")
    if family is not None and args.dim is not None and family.dim != args.dim:
        raise UsageError(f"--dim {args.dim} disagrees with the family dimension {family.dim}")
    fit = gleason_fit(e, phi, dim=args.dim, mode=args.mode, family=family, seed=args.seed)
    report = {"model": args.file, "mode": args.mode, "dim": fit.family.dim,
              "residual": fit.residual, "converged": fit.converged,
              "rho": fit.state.rho, "notes": list(fit.notes)}
    return EXIT_OK, report


def _read_embedding(path) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path, dtype=float, ndmin=2))


def cmd_estimate(args):
    e, _ = _load(args)
    try:
        ex = e.experiment(args.experiment)
    except KeyError as exc:
        raise UsageError(str(exc))
    if not 0 <= args.outcome < ex.outcomes:
        raise UsageError(f"--outcome {args.outcome} out of range 0..{ex.outcomes - 1}")
    emb = _read_embedding(args.embed) if args.embed else None
    try:
        post = posterior(e, ex, args.outcome)
    except ZeroLikelihoodError as exc:
        return EXIT_VIOLATED, {"model": args.file, "error": str(exc)}
    est = estimate(e, ex, args.outcome, emb)
    return EXIT_OK, {"model": args.file, "experiment": ex.name, "outcome": args.outcome,
                     "posterior": post.weights, "estimate": est}


def _perm(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in text.replace(",", " ").split())


def cmd_evolve(args):
    e, _ = _load(args)
    try:
        k = _perm(args.step)
    except ValueError:
        raise UsageError(f"--step {args.step!r} is not a list of integers")
    if len(k) != e.n or sorted(k) != list(range(e.n)):
        raise UsageError(f"--step must be a permutation of 0..{e.n - 1}")
    dyn = build_dynamics(k, hbar=args.hbar)
    log_err = float(np.max(np.abs(expm(1j * dyn.generator) - dyn.U_step)))
    return EXIT_OK, {"model": args.file, "step": list(k), "t": args.t, "hbar": args.hbar,
                     "eigenphases": np.sort(dyn.phases), "log_residual": log_err,
                     "U": dyn.U(args.t), "H": dyn.hamiltonian}


def cmd_example(args):
    name = args.name
    if args.qsm:
        if name == "s3":
            raise UsageError("the s3 structure is not an ensemble")
        sys.stdout.write(serialize_model(bi.builtin(name, args.gamma)))
        return EXIT_OK, None
    if name == "example1":
        rep = bi.example1_report()
        code = EXIT_VIOLATED if rep["distributive_witness"] else EXIT_OK
        return code, rep
    if name == "envelope":
        m = bi.make_envelope(args.gamma)
        bell = bi.bell_chsh(args.gamma)
        report = {"gamma": m.gamma, "weights": m.prior,
                  "marginals": {ex.name: m.marginal(ex.name) for ex in m.ensemble.experiments},
                  "correlators": bell.correlators, "S": bell.S, "bell_satisfied": bell.satisfied}
        return (EXIT_OK if bell.satisfied else EXIT_VIOLATED), report
    rep = bi.make_s3_structure(args.seed)
    report = {"generators": rep.generators, "generated_order": rep.generated_order,
              "divides_24": rep.divides_24,
              "s4_quotients": [q._asdict() for q in rep.s4_quotients],
              "smallest_noncommutative_quotient": rep.smallest_nonabelian_quotient,
              "is_s3": rep.is_s3, "generator_images": rep.generator_images,
              "pairing_block_dim": rep.pairing_block_dim,
              "pairing_block_commutant": rep.pairing_block_commutant,
              "generated_block_dims": rep.generated_block_dims,
              "generated_2d_commutant": rep.generated_2d_commutant}
    return EXIT_OK, report


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--format", choices=("text", "json"), default=argparse.SUPPRESS)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    model = _Parser(add_help=False)
    model.add_argument("file", help="model file or built-in name")
    model.add_argument("--gamma", type=float, default=0.0,
                       help="correlation of the envelope model (default 0)")

    p = _Parser(prog="qsym", description="Quantum structure from symmetric statistical models.")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--seed", type=int, default=0, help="seed of randomized routines")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("validate", parents=[common, model], help="parse and check a model")
    s.set_defaults(func=cmd_validate)
    s = sub.add_parser("permissible", parents=[common, model],
                       help="check permissibility of each experiment's parameter")
    s.add_argument("--enumerate", action="store_true", help="list all permissible partitions")
    s.set_defaults(func=cmd_permissible)
    s = sub.add_parser("lattice", parents=[common, model], help="check the proposition poset")
    s.add_argument("--check", required=True,
                   choices=("orthomodular", "distributive", "atoms", "assumption1"))
    s.add_argument("--rounds", type=int, default=1, help="closure rounds (orthomodular)")
    s.set_defaults(func=cmd_lattice)
    s = sub.add_parser("rep", parents=[common, model], help="permutation representation")
    s.add_argument("--correspondence", action="store_true",
                   help="compare permissible partitions with invariant subspaces")
    s.set_defaults(func=cmd_rep)
    s = sub.add_parser("fit", parents=[common, model], help="fit a density operator")
    s.add_argument("--phi", type=int, default=None,
                   help="state index (default: model prior or normalized weights)")
    s.add_argument("--dim", type=int, default=None)
    s.add_argument("--mode", choices=("fixed", "joint"), default="fixed")
    s.add_argument("--family", default=None, help="JSON file with one frame per experiment")
    s.set_defaults(func=cmd_fit)
    s = sub.add_parser("estimate", parents=[common, model], help="posterior-mean estimate")
    s.add_argument("--experiment", required=True)
    s.add_argument("--outcome", type=int, required=True)
    s.add_argument("--embed", default=None, help="text file, one coordinate row per state")
    s.set_defaults(func=cmd_estimate)
    s = sub.add_parser("evolve", parents=[common, model], help="unitary time evolution")
    s.add_argument("--step", required=True, help="permutation, e.g. 1,2,3,0")
    s.add_argument("--t", type=float, required=True)
    s.add_argument("--hbar", type=float, default=1.0)
    s.set_defaults(func=cmd_evolve)
    s = sub.add_parser("example", parents=[common], help="built-in demonstrations")
    s.add_argument("name", choices=("example1", "envelope", "s3"))
    s.add_argument("--gamma", type=float, default=0.0)
    s.add_argument("--qsm", action="store_true", help="print the model file instead")
    s.set_defaults(func=cmd_example)
    return p


def _jsonable(obj: Any):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            if np.max(np.abs(obj.imag), initial=0.0) == 0.0:
                return obj.real.tolist()
            return {"re": obj.real.tolist(), "im": obj.imag.tolist()}
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, (frozenset, set)):
        return sorted(obj)
    return obj


def _text(report: dict, indent: int = 0) -> list[str]:
    pad = "  " * indent
    out = []
    for k, v in report.items():
        if isinstance(v, dict):
            out.append(f"{pad}{k}:")
            out.extend(_text(v, indent + 1))
        elif isinstance(v, np.ndarray):
            body = np.array2string(v, precision=6, suppress_small=True)
            lines = body.splitlines()
            if len(lines) == 1:
                out.append(f"{pad}{k}: {body}")
            else:
                out.append(f"{pad}{k}:")
                out.extend(f"{pad}  {ln}" for ln in lines)
        elif isinstance(v, list) and v and isinstance(v[0], dict):
            out.append(f"{pad}{k}:")
            for item in v:
                out.append(f"{pad}  - " + ", ".join(f"{a}={b}" for a, b in item.items()))
        else:
            out.append(f"{pad}{k}: {v}")
    return out


def run_command(argv=None) -> tuple[int, dict | None]:
    """Parse ``argv`` and run the command; returns ``(exit code, report)``."""
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ModelError as exc:
        diags = [{"line": d.line, "column": d.column, "message": d.message}
                 for d in exc.diagnostics]
        return exc.exit_code, {"error": type(exc).__name__, "diagnostics": diags}
    except OSError as exc:
        return EXIT_PARSE, {"error": "OSError", "message": str(exc)}
    except (UsageError, ValueError) as exc:
        return EXIT_INVALID, {"error": type(exc).__name__, "message": str(exc)}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    code, report = run_command(argv)
    if report is not None:
        if args.format == "json":
            print(json.dumps(_jsonable(report), indent=2))
        else:
            stream = sys.stdout if code in (EXIT_OK, EXIT_VIOLATED) else sys.stderr
            print("\n".join(_text(report)), file=stream)
    return code


if __name__ == "__main__":
    raise SystemExit(main())
