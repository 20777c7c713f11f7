"""Command-line front door.

Subcommands: run, wp, wlp, check, prove, dj, assert.  Program files use
the surface grammar, matrices the JSON exchange format, and outlines a
JSON document referencing a program file and named matrices.  Exit codes:
0 success/valid, 1 invalid (with witness), 2 malformed input,
3 inconclusive (a loop fixpoint or truncation did not converge).
The environment variable QHL_TOL overrides the default tolerance.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import deutsch, hoare, lang, linalg, semantics

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_MALFORMED = 2
EXIT_INCONCLUSIVE = 3


class _CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_MALFORMED):
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------------------
# Formatting


def format_matrix(m, zero_tol: float = 1e-12) -> str:
    """Aligned fixed-point real/imag columns; entries below zero_tol print
    as a bare 0."""
    m = np.asarray(m)
    cells = []
    for row in m:
        cells.append(
            [
                "0" if abs(x) < zero_tol else f"{x.real:+.6f}{x.imag:+.6f}i"
                for x in row
            ]
        )
    width = max(len(c) for row in cells for c in row)
    return "\n".join("  ".join(c.rjust(width) for c in row) for row in cells)


def _emit(doc: dict, human_lines: list, args) -> None:
    if args.format == "machine":
        doc = {"schema_version": SCHEMA_VERSION, **doc}
        text = json.dumps(doc, sort_keys=True)
    else:
        text = "\n".join(human_lines)
    if args.output:
        Path(args.output).write_text(text + "\n")
    else:
        print(text)


# ---------------------------------------------------------------------------
# Input loading


def _default_tol() -> float:
    env = os.environ.get("QHL_TOL")
    if env:
        try:
            tol = float(env)
        except ValueError:
            raise _CliError(f"QHL_TOL is not a number: {env!r}")
        if tol <= 0:
            raise _CliError("QHL_TOL must be positive")
        return tol
    return linalg.DEFAULT_TOL


def _load_tables(args) -> lang.Tables:
    tables = lang.Tables.builtin()
    for path in args.sidecar or []:
        try:
            doc = json.loads(Path(path).read_text())
            tables = tables.merged_with_sidecar(doc)
        except (OSError, ValueError, KeyError) as exc:
            raise _CliError(f"cannot load sidecar {path}: {exc}")
    return tables


def _load_program(path: str, dialect: str, tables: lang.Tables):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise _CliError(f"cannot read program {path}: {exc}")
    try:
        ctx, prog = lang.parse(text)
    except lang.ParseError as exc:
        raise _CliError(f"{path}:{exc}")
    report = lang.typecheck(ctx, prog, dialect, tables)
    if not report.ok:
        issues = "; ".join(str(i) for i in report.issues)
        raise _CliError(f"{path}: program does not typecheck: {issues}")
    return ctx, prog


def _load_matrix(path: str):
    try:
        return linalg.load_matrix(path)
    except (OSError, ValueError) as exc:
        raise _CliError(f"cannot load matrix {path}: {exc}")


def _load_state(args, ctx) -> linalg.DensityMatrix:
    tol = args.tol
    if args.rho:
        try:
            return linalg.DensityMatrix(_load_matrix(args.rho), tol=tol)
        except ValueError as exc:
            raise _CliError(f"{args.rho}: {exc}")
    return linalg.DensityMatrix(linalg.projector(0, ctx.dim), tol=tol)


def _load_predicate(path: str, tol: float) -> linalg.QuantumPredicate:
    try:
        return linalg.QuantumPredicate(_load_matrix(path), tol=tol)
    except ValueError as exc:
        raise _CliError(f"{path}: {exc}")


def _eval_opts(args) -> semantics.EvalOptions:
    try:
        return semantics.EvalOptions(
            loop_max_iters=args.loop_max_iters,
            loop_mass_eps=args.loop_mass_eps,
            mode=args.loop_mode,
        )
    except ValueError as exc:
        raise _CliError(str(exc))


def _hoare_opts(args) -> hoare.HoareOptions:
    return hoare.HoareOptions(
        fix_eps=args.fix_eps, tol=args.tol, eval_opts=_eval_opts(args)
    )


# ---------------------------------------------------------------------------
# Subcommands


def _cmd_run(args) -> int:
    tables = _load_tables(args)
    ctx, prog = _load_program(args.program, args.dialect, tables)
    rho = _load_state(args, ctx)
    if rho.dim != ctx.dim:
        raise _CliError(f"state dimension {rho.dim} does not match program dimension {ctx.dim}")
    try:
        report = semantics.run_report(ctx, prog, rho, _eval_opts(args), tables)
    except semantics.TruncationError as exc:
        print(f"inconclusive: {exc}", file=sys.stderr)
        return EXIT_INCONCLUSIVE
    human = [
        "final state:",
        format_matrix(linalg.matrix_from_doc(report["final_state"])),
        f"trace: {report['trace']:.12g}",
        f"termination probability: {report['termination_probability']:.12g}",
        f"truncation error: {report['truncation_error']:.3e}",
        f"path count: {report['path_count']}",
    ]
    _emit(report, human, args)
    return EXIT_OK


def _cmd_wp(args, liberal: bool) -> int:
    tables = _load_tables(args)
    ctx, prog = _load_program(args.program, args.dialect, tables)
    post = _load_predicate(args.post, args.tol)
    fn = hoare.wlp if liberal else hoare.wp
    try:
        pred = fn(ctx, prog, post, _hoare_opts(args), tables)
    except hoare.FixpointError as exc:
        print(f"inconclusive: {exc}", file=sys.stderr)
        return EXIT_INCONCLUSIVE
    name = "wlp" if liberal else "wp"
    _emit(
        {"predicate": linalg.matrix_to_doc(pred.mat)},
        [f"{name}:", format_matrix(pred.mat)],
        args,
    )
    return EXIT_OK


def _cmd_check(args) -> int:
    tables = _load_tables(args)
    ctx, prog = _load_program(args.program, args.dialect, tables)
    pre = _load_predicate(args.pre, args.tol)
    post = _load_predicate(args.post, args.tol)
    try:
        triple = hoare.HoareTriple(ctx, pre, prog, post, mode=args.mode)
    except ValueError as exc:
        raise _CliError(str(exc))
    verdict = hoare.check_triple(triple, _hoare_opts(args), tables)
    doc = {
        "verdict": verdict.status,
        "mode": triple.mode,
        "violation": verdict.violation,
        "residual": verdict.residual,
        "witness": linalg.matrix_to_doc(verdict.witness.mat) if verdict.witness else None,
    }
    human = [f"verdict: {verdict.status} ({triple.mode} correctness)"]
    if verdict.status == "invalid":
        human.append(f"violation: {verdict.violation:.6g}")
        human.append("witness state:")
        human.append(format_matrix(verdict.witness.mat))
    if verdict.status == "inconclusive":
        human.append(f"fixpoint residual: {verdict.residual:.3e}")
    _emit(doc, human, args)
    if verdict.status == "valid":
        return EXIT_OK
    if verdict.status == "invalid":
        return EXIT_INVALID
    return EXIT_INCONCLUSIVE


def _resolve_matrix(ref, named: dict, what: str):
    if isinstance(ref, str):
        if ref not in named:
            raise _CliError(f"{what}: unknown matrix name {ref!r}")
        return named[ref]
    if isinstance(ref, dict):
        try:
            return linalg.matrix_from_doc(ref)
        except ValueError as exc:
            raise _CliError(f"{what}: {exc}")
    raise _CliError(f"{what}: expected a matrix name or document")


def _cmd_prove(args) -> int:
    try:
        doc = json.loads(Path(args.outline).read_text())
    except (OSError, ValueError) as exc:
        raise _CliError(f"cannot load outline {args.outline}: {exc}")
    base = Path(args.outline).parent
    tables = lang.Tables.builtin()
    if doc.get("sidecar"):
        try:
            tables = tables.merged_with_sidecar(json.loads((base / doc["sidecar"]).read_text()))
        except (OSError, ValueError, KeyError) as exc:
            raise _CliError(f"cannot load sidecar {doc['sidecar']}: {exc}")
    named = {}
    if doc.get("matrices"):
        try:
            mats = json.loads((base / doc["matrices"]).read_text())
            named = {name: linalg.matrix_from_doc(d) for name, d in mats.items()}
        except (OSError, ValueError) as exc:
            raise _CliError(f"cannot load matrices {doc['matrices']}: {exc}")
    if "program" not in doc:
        raise _CliError("outline is missing the 'program' field")
    ctx, prog = _load_program(str(base / doc["program"]), args.dialect, tables)
    try:
        steps = tuple(
            hoare.OutlineStep(
                rule=s.get("rule", ""),
                pre=_resolve_matrix(s.get("pre"), named, f"step {i} pre"),
                post=_resolve_matrix(s.get("post"), named, f"step {i} post"),
                premises=tuple(
                    _resolve_matrix(p, named, f"step {i} premise")
                    for p in s.get("premises", [])
                ),
            )
            for i, s in enumerate(doc.get("steps", []))
        )
        outline = hoare.ProofOutline(
            ctx=ctx,
            prog=prog,
            pre=_resolve_matrix(doc.get("pre"), named, "outline pre"),
            post=_resolve_matrix(doc.get("post"), named, "outline post"),
            steps=steps,
        )
    except ValueError as exc:
        raise _CliError(f"bad outline: {exc}")
    report = hoare.check_outline(outline, _hoare_opts(args), tables)
    out_doc = {
        "valid": report.ok,
        "detail": report.detail,
        "steps": [
            {"index": v.index, "rule": v.rule, "ok": v.ok, "detail": v.detail}
            for v in report.steps
        ],
    }
    human = [
        f"step {v.index} [{v.rule}]: {'valid' if v.ok else 'INVALID ' + v.detail}"
        for v in report.steps
    ]
    human.append(f"outline: {'valid' if report.ok else 'INVALID ' + report.detail}")
    _emit(out_doc, human, args)
    return EXIT_OK if report.ok else EXIT_INVALID


def _cmd_dj(args) -> int:
    try:
        oracle = deutsch.oracle_from_spec(args.f, args.k)
        if oracle.k != args.k:
            raise _CliError(f"oracle is on {oracle.k} bits but --k {args.k} was given")
        report = deutsch.dj_verify(oracle)
    except ValueError as exc:
        raise _CliError(str(exc))
    doc = {
        "k": report.k,
        "oracle": args.f,
        "p00": report.p_all_zero,
        "classification": report.classification,
    }
    human = [
        f"oracle {args.f} on {report.k} bits",
        f"Pr(all input qubits measure 0) = {report.p_all_zero:.12g}",
        f"classification: {report.classification}",
    ]
    _emit(doc, human, args)
    return EXIT_OK


def _cmd_assert(args) -> int:
    tables = _load_tables(args)
    ctx, prog = _load_program(args.program, args.dialect, tables)
    rho = _load_state(args, ctx)
    try:
        assertion = hoare.parse_assertion(args.expr)
    except ValueError as exc:
        raise _CliError(str(exc))
    try:
        final = semantics.evaluate(ctx, prog, rho, _eval_opts(args), tables)
        out_ctx = semantics.output_context(ctx, prog, tables)
        result = hoare.eval_assertion(assertion, out_ctx, final, tol=args.tol)
    except semantics.TruncationError as exc:
        print(f"inconclusive: {exc}", file=sys.stderr)
        return EXIT_INCONCLUSIVE
    except ValueError as exc:
        raise _CliError(str(exc))
    doc = {
        "holds": result.holds,
        "probability": result.probability,
        "trace": result.state_trace,
    }
    human = [
        f"probability: {result.probability:.12g} (state trace {result.state_trace:.12g})",
        f"assertion {'holds' if result.holds else 'FAILS'}",
    ]
    _emit(doc, human, args)
    return EXIT_OK if result.holds else EXIT_INVALID


# ---------------------------------------------------------------------------
# Argument parsing


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=["human", "machine"], default="human")
    p.add_argument("--output", "-o", help="write the report here instead of stdout")
    p.add_argument("--tol", type=float, default=None, help="numeric tolerance")
    p.add_argument("--fix-eps", type=float, default=1e-9, help="loop fixpoint tolerance")
    p.add_argument("--loop-max-iters", type=int, default=1000)
    p.add_argument("--loop-mass-eps", type=float, default=1e-9)
    p.add_argument("--loop-mode", choices=["exact-kraus", "truncated"], default="exact-kraus")
    p.add_argument("--dialect", choices=["core", "ying-core", "qpl"], default="qpl")
    p.add_argument(
        "--sidecar", action="append", help="gate/measurement sidecar file (repeatable)"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qhoare",
        description="Run, transform and verify quantum while-language programs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a program on a density matrix")
    p.add_argument("program")
    p.add_argument("--rho", help="input state (.mat); default all-zeros pure state")
    _add_common(p)

    for name, help_text in (("wp", "weakest precondition"), ("wlp", "weakest liberal precondition")):
        p = sub.add_parser(name, help=f"compute the {help_text} of a postcondition")
        p.add_argument("program")
        p.add_argument("--post", required=True, help="postcondition matrix (.mat)")
        _add_common(p)

    p = sub.add_parser("check", help="decide a Hoare triple")
    p.add_argument("program")
    p.add_argument("--pre", required=True)
    p.add_argument("--post", required=True)
    p.add_argument("--mode", choices=["tot", "par", "total", "partial"], default="tot")
    _add_common(p)

    p = sub.add_parser("prove", help="check a proof outline")
    p.add_argument("outline")
    _add_common(p)

    p = sub.add_parser("dj", help="classify a Deutsch-Jozsa oracle")
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--f", required=True, help="constant0 | constant1 | balanced:<bits>")
    _add_common(p)

    p = sub.add_parser("assert", help="evaluate a probability assertion after a run")
    p.add_argument("program")
    p.add_argument("--rho", help="input state (.mat); default all-zeros pure state")
    p.add_argument("--expr", required=True, help="e.g. 'Pr(q1 = 0 & q2 = 0) = 1'")
    _add_common(p)

    return parser


_HANDLERS = {
    "run": _cmd_run,
    "wp": lambda a: _cmd_wp(a, liberal=False),
    "wlp": lambda a: _cmd_wp(a, liberal=True),
    "check": _cmd_check,
    "prove": _cmd_prove,
    "dj": _cmd_dj,
    "assert": _cmd_assert,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_MALFORMED if exc.code not in (0, None) else 0
    try:
        if args.tol is None:
            args.tol = _default_tol()
        return _HANDLERS[args.command](args)
    except _CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except hoare.FixpointError as exc:
        print(f"inconclusive: {exc}", file=sys.stderr)
        return EXIT_INCONCLUSIVE


if __name__ == "__main__":
    sys.exit(main())
