import numpy as np
import pytest

from qhoare import lang, linalg
from qhoare.lang import (
    ApplyU, AssignBit, Discard, IfBit, InitZero, MeasureCase, MeasureIf,
    NewBit, NewQbit, ParseError, Seq, Skip, Tables, VarContext, VarDecl,
    While, normalize, parse, print_program, seq_items, typecheck,
)

from gen import random_qpl_program, rng_for


class TestParse:
    def test_smallest_program(self):
        ctx, prog = parse("var q: qbit; q := 0")
        assert ctx == VarContext.of(("q", "qbit"))
        assert prog == InitZero("q")

    def test_dj_listing_is_seven_statement_spine(self):
        src = """
        var q1: qbit, q2: qbit, qe: qbit;
        q1 := 0;
        q2 := 0;
        qe := 0;
        qe *= X;
        q1, q2, qe *= H3;
        q1, q2, qe *= Uf;
        q1, q2 *= H2
        """
        ctx, prog = parse(src)
        stmts = seq_items(prog)
        assert len(stmts) == 7
        assert [type(s).__name__ for s in stmts] == [
            "InitZero", "InitZero", "InitZero", "ApplyU", "ApplyU", "ApplyU", "ApplyU",
        ]

    def test_undeclared_variable_positions(self):
        with pytest.raises(ParseError) as exc:
            parse("var p: qbit; while std(q) = 1 do skip od")
        assert "q" in str(exc.value)
        assert exc.value.line == 1 and exc.value.col > 0

    def test_duplicate_declaration(self):
        with pytest.raises(ParseError) as exc:
            parse("var q: qbit, q: bit; skip")
        assert "duplicate" in exc.value.message

    def test_new_duplicate(self):
        with pytest.raises(ParseError):
            parse("var q: qbit; new qbit q")

    def test_comments_and_layout(self):
        ctx, prog = parse("var q: qbit;  # declaration\n q := 0  # init\n")
        assert prog == InitZero("q")

    def test_lexical_error_position(self):
        with pytest.raises(ParseError) as exc:
            parse("var q: qbit; q := 0 @")
        assert exc.value.line == 1

    def test_bit_assignment_both_values(self):
        _, prog = parse("var b: bit; b := 1")
        assert prog == AssignBit("b", 1)
        _, prog = parse("var b: bit; b := 0")
        assert prog == AssignBit("b", 0)

    def test_qbit_cannot_init_to_one(self):
        with pytest.raises(ParseError):
            parse("var q: qbit; q := 1")

    def test_qunit_default_dimension(self):
        ctx, _ = parse("var n: qunit; skip")
        assert ctx.lookup("n").dim == lang.DEFAULT_QUNIT_DIM
        ctx, _ = parse("var n: qunit[4]; skip")
        assert ctx.lookup("n").dim == 4

    def test_measure_case_gap_rejected(self):
        with pytest.raises(ParseError):
            parse("var q: qbit; measure std(q) { case 0: skip case 2: skip }")

    def test_measure_if(self):
        _, prog = parse("var q: qbit, b: bit; measure q then b := 1 else b := 0 fi")
        assert prog == MeasureIf("q", AssignBit("b", 1), AssignBit("b", 0))

    def test_while_guard_must_compare_to_one(self):
        with pytest.raises(ParseError):
            parse("var q: qbit; while std(q) = 0 do skip od")


class TestPrint:
    def test_skip(self):
        assert lang._print_stmt(Skip(), "; ") == "skip"

    def test_round_trip_simple(self):
        src = "var q: qbit; q := 0"
        ctx, prog = parse(src)
        assert parse(print_program(ctx, prog)) == (ctx, prog)

    def test_seq_canonicalization(self):
        # a left-nested spine prints flat and reparses right-leaning
        left = Seq(Seq(InitZero("q"), Skip()), InitZero("q"))
        ctx = VarContext.of(("q", "qbit"))
        ctx2, reparsed = parse(print_program(ctx, left))
        assert ctx2 == ctx
        assert reparsed == normalize(left)
        assert reparsed == Seq(InitZero("q"), Seq(Skip(), InitZero("q")))

    def test_round_trip_random_programs(self):
        rng = rng_for(2024)
        for _ in range(120):
            ctx, prog = random_qpl_program(rng, depth=6, loops=True)
            text = print_program(ctx, prog)
            ctx2, prog2 = parse(text)
            assert ctx2 == ctx
            assert prog2 == normalize(prog)

    def test_round_trip_all_constructs(self):
        src = (
            "var q: qbit, n: qunit[3], b: bit;\n"
            "skip;\n"
            "q := 0;\n"
            "n := 0;\n"
            "b := 1;\n"
            "q *= H;\n"
            "new qbit t;\n"
            "t, q *= CNOT;\n"
            "discard t;\n"
            "if b then skip else q *= X fi;\n"
            "measure q then b := 1 else b := 0 fi;\n"
            "measure std(n) { case 0: skip case 1: skip case 2: n := 0 };\n"
            "while std(q) = 1 do q := 0 od"
        )
        ctx, prog = parse(src)
        assert parse(print_program(ctx, prog)) == (ctx, normalize(prog))


class TestTypecheck:
    def test_if_over_qbit_guard(self):
        ctx, prog = parse("var q: qbit; if q then skip else skip fi")
        report = typecheck(ctx, prog, "qpl")
        assert not report.ok
        assert any("must be a bit" in str(i) for i in report.issues)

    def test_use_after_discard(self):
        ctx, prog = parse("var p: qbit; new qbit q; discard q; q *= H")
        report = typecheck(ctx, prog, "qpl")
        assert not report.ok
        assert any("after discard" in str(i) for i in report.issues)

    def test_gate_arity_mismatch(self):
        ctx, prog = parse("var q1: qbit, q2: qbit; q1, q2 *= H")
        report = typecheck(ctx, prog, "qpl")
        assert not report.ok
        assert any("dimension" in str(i) for i in report.issues)

    def test_core_forbids_qpl_constructs(self):
        for src in (
            "var q: qbit; new bit b",
            "var q: qbit; new qbit p",
            "var q: qbit; discard q",
            "var b: bit; b := 1",
            "var b: bit; if b then skip else skip fi",
            "var q: qbit; measure q then skip else skip fi",
        ):
            ctx, prog = parse(src)
            assert not typecheck(ctx, prog, "core").ok, src
            # the ones not using bit declarations are fine in qpl
        ctx, prog = parse("var q: qbit; measure q then skip else skip fi")
        assert typecheck(ctx, prog, "qpl").ok

    def test_core_alias_accepted(self):
        ctx, prog = parse("var q: qbit; q := 0")
        assert typecheck(ctx, prog, "ying-core").ok

    def test_init_zero_on_bit_allowed_in_qpl(self):
        # the surface form `b := 0` parses to AssignBit; a programmatic
        # InitZero on a bit is accepted as its alias
        ctx = VarContext.of(("b", "bit"))
        assert typecheck(ctx, InitZero("b"), "qpl").ok

    def test_core_forbids_bit_variables(self):
        ctx, prog = parse("var b: bit; skip")
        assert not typecheck(ctx, prog, "core").ok

    def test_measure_guard_must_be_qbit(self):
        ctx, prog = parse("var b: bit; measure b then skip else skip fi")
        report = typecheck(ctx, prog, "qpl")
        assert any("must be a qbit" in str(i) for i in report.issues)

    def test_branch_context_mismatch(self):
        ctx, prog = parse(
            "var b: bit, q: qbit; if b then discard q else skip fi"
        )
        report = typecheck(ctx, prog, "qpl")
        assert any("different context" in str(i) for i in report.issues)

    def test_loop_body_must_restore_context(self):
        ctx, prog = parse("var q: qbit, p: qbit; while std(q) = 1 do discard p od")
        report = typecheck(ctx, prog, "qpl")
        assert any("restore" in str(i) for i in report.issues)

    def test_while_guard_needs_two_outcomes(self):
        ctx, prog = parse("var n: qunit[3]; while std(n) = 1 do skip od")
        report = typecheck(ctx, prog, "core")
        assert any("2 outcomes" in str(i) for i in report.issues)

    def test_measure_case_count_must_match(self):
        ctx, prog = parse("var n: qunit[3]; measure std(n) { case 0: skip case 1: skip }")
        report = typecheck(ctx, prog, "core")
        assert any("outcomes" in str(i) for i in report.issues)

    def test_output_context_tracks_allocation(self):
        ctx, prog = parse("var q: qbit; new bit b; discard q")
        report = typecheck(ctx, prog, "qpl")
        assert report.ok
        assert report.output_context.names == ("b",)

    def test_random_well_typed_programs_pass(self):
        rng = rng_for(99)
        for _ in range(60):
            ctx, prog = random_qpl_program(rng, depth=5)
            report = typecheck(ctx, prog, "qpl")
            assert report.ok, (print_program(ctx, prog), [str(i) for i in report.issues])


class TestTables:
    def test_builtin_gates_unitary(self):
        tables = Tables.builtin()
        for name in tables.gates.names():
            assert linalg.is_unitary(tables.gates.get(name), 1e-12), name

    def test_std_measurement_complete(self):
        tables = Tables.builtin()
        for dim in (2, 3, 4, 8):
            ops = tables.meas.get("std", dim)
            total = sum(np.asarray(m).conj().T @ np.asarray(m) for m in ops)
            assert np.max(np.abs(total - np.eye(dim))) <= 1e-12

    def test_rejects_non_unitary_gate(self):
        tables = Tables.builtin()
        with pytest.raises(ValueError):
            tables.gates.add("bad", np.eye(2) * 0.5)

    def test_rejects_incomplete_measurement(self):
        tables = Tables.builtin()
        with pytest.raises(ValueError):
            tables.meas.add("half", [linalg.projector(0)])

    def test_sidecar_round_trip(self):
        doc = {
            "gates": {"HH": linalg.matrix_to_doc(linalg.kron(linalg.hadamard(), linalg.hadamard()))},
            "measurements": {
                "parity": [
                    linalg.matrix_to_doc(np.diag([1.0, 0.0, 0.0, 1.0])),
                    linalg.matrix_to_doc(np.diag([0.0, 1.0, 1.0, 0.0])),
                ]
            },
        }
        tables = Tables.builtin().merged_with_sidecar(doc)
        assert "HH" in tables.gates
        assert len(tables.meas.get("parity", 4)) == 2
