import numpy as np
import pytest

from qhoare import deutsch, hoare, lang, linalg, semantics
from qhoare.deutsch import (
    BooleanOracle, build_hadamard, build_uf, dj_outline, dj_program,
    dj_tables, dj_target_predicate, dj_verify, enumerate_oracles,
    oracle_from_spec,
)


class TestOracles:
    def test_classification(self):
        assert BooleanOracle(2, (0, 0, 0, 0)).classification == "constant"
        assert BooleanOracle(2, (1, 1, 1, 1)).classification == "constant"
        assert BooleanOracle(2, (1, 0, 1, 0)).classification == "balanced"
        assert BooleanOracle(2, (1, 0, 0, 0)).classification == "other"

    def test_spec_strings(self):
        assert oracle_from_spec("constant0").table == (0, 0, 0, 0)
        assert oracle_from_spec("constant1").table == (1, 1, 1, 1)
        assert oracle_from_spec("balanced:0110").table == (0, 1, 1, 0)
        with pytest.raises(ValueError):
            oracle_from_spec("balanced:0111")
        with pytest.raises(ValueError):
            oracle_from_spec("mystery")

    def test_enumeration_count(self):
        oracles = enumerate_oracles(2)
        assert len(oracles) == 8  # 2 constant + C(4, 2) balanced
        assert sum(o.classification == "balanced" for o in oracles) == 6


class TestHadamard:
    def test_k1_is_the_gate(self):
        assert np.array_equal(build_hadamard(1), linalg.hadamard())

    def test_uniform_on_zeros(self):
        v = np.asarray(build_hadamard(2)) @ np.asarray(linalg.ket(0, 4)).ravel()
        assert np.max(np.abs(v - 0.5)) <= 1e-12

    def test_involution(self):
        for k in (1, 2, 3):
            hk = np.asarray(build_hadamard(k))
            assert np.max(np.abs(hk @ hk - np.eye(2**k))) <= 1e-12

    def test_rejects_zero(self):
        with pytest.raises(ValueError):
            build_hadamard(0)


class TestUf:
    def test_constant_zero_is_identity(self):
        f = oracle_from_spec("constant0")
        assert np.array_equal(build_uf(f), np.eye(8))

    def test_constant_one_is_i4_tensor_flip(self):
        f = oracle_from_spec("constant1")
        want = np.kron(np.eye(4), np.asarray(linalg.pauli_x()))
        assert np.array_equal(np.asarray(build_uf(f)).real, want.real)

    def test_balanced_column_permutation_brute_force(self):
        for f in enumerate_oracles(2):
            if f.classification != "balanced":
                continue
            u = np.asarray(build_uf(f))
            assert linalg.is_unitary(u, 1e-12)
            for x in range(4):
                for b in range(2):
                    src = 2 * x + b
                    dst = 2 * x + (b ^ f.table[x])
                    col = u[:, src]
                    assert col[dst] == 1.0 and np.sum(np.abs(col)) == 1.0


class TestPrograms:
    def test_core_form_has_seven_statements(self):
        f = oracle_from_spec("constant1")
        ctx, prog = dj_program(f)
        assert len(lang.seq_items(prog)) == 7
        assert lang.typecheck(ctx, prog, "core", dj_tables(f)).ok

    def test_qpl_form_dialect_gate(self):
        f = oracle_from_spec("constant1")
        ctx, prog = dj_program(f, "qpl")
        tables = dj_tables(f)
        assert lang.typecheck(ctx, prog, "qpl", tables).ok
        assert not lang.typecheck(ctx, prog, "core", tables).ok

    def test_deterministic(self):
        f = oracle_from_spec("balanced:0101")
        assert dj_program(f) == dj_program(f)
        assert dj_program(f, "qpl") == dj_program(f, "qpl")

    def test_rejects_unbalanced(self):
        with pytest.raises(ValueError):
            dj_program(BooleanOracle(2, (1, 0, 0, 0)))

    def test_both_forms_agree_on_input_measurement(self):
        # The then-branch pairs with the outcome-0 projector, so the qpl
        # form's `then b := 1 else b := 0` stores the complement of each
        # measured qubit: Pr(all q = 0) in the core form equals
        # Pr(all b = 1) in the qpl form.
        for spec in ("constant1", "balanced:0011", "balanced:0110"):
            f = oracle_from_spec(spec)
            tables = dj_tables(f)
            ctx_c, prog_c = dj_program(f, "core")
            rho_c = linalg.DensityMatrix(linalg.projector(0, ctx_c.dim))
            final_c = semantics.evaluate(ctx_c, prog_c, rho_c, tables=tables)
            p_c = hoare.eval_assertion(
                hoare.parse_assertion("Pr(q1 = 0 & q2 = 0) = 0"), ctx_c, final_c
            ).probability
            ctx_q, prog_q = dj_program(f, "qpl")
            rho_q = linalg.DensityMatrix(linalg.projector(0, ctx_q.dim))
            final_q = semantics.evaluate(ctx_q, prog_q, rho_q, tables=tables)
            out_ctx = semantics.output_context(ctx_q, prog_q, tables)
            p_q = hoare.eval_assertion(
                hoare.parse_assertion("Pr(b1 = 1 & b2 = 1) = 0"), out_ctx, final_q
            ).probability
            assert p_c == pytest.approx(p_q, abs=1e-9), spec


class TestVerify:
    def test_all_eight_oracles_classified(self):
        for f in enumerate_oracles(2):
            report = dj_verify(f)
            assert report.classification == f.classification
            want = 1.0 if f.classification == "constant" else 0.0
            assert report.p_all_zero == pytest.approx(want, abs=1e-9)

    def test_balanced_oracles_pair_up_by_outcome(self):
        # the amplitude of |a> is the character sum (1/4) sum_x (-1)^(f(x)+a.x),
        # so each balanced f lands on one basis state and complements pair up:
        # f(b1 b2) = b1 on |10>, f = b2 on |01>, f = b1 xor b2 on |11>
        groups = {
            (0, 0, 1, 1): "Pr(q1 = 1 & q2 = 0) = 1",
            (1, 1, 0, 0): "Pr(q1 = 1 & q2 = 0) = 1",
            (0, 1, 0, 1): "Pr(q1 = 0 & q2 = 1) = 1",
            (1, 0, 1, 0): "Pr(q1 = 0 & q2 = 1) = 1",
            (0, 1, 1, 0): "Pr(q1 = 1 & q2 = 1) = 1",
            (1, 0, 0, 1): "Pr(q1 = 1 & q2 = 1) = 1",
        }
        rho0 = linalg.DensityMatrix(linalg.projector(0, 8))
        for table, assertion in groups.items():
            f = BooleanOracle(2, table)
            ctx, prog = dj_program(f)
            final = semantics.evaluate(ctx, prog, rho0, tables=dj_tables(f))
            assert hoare.eval_assertion(
                hoare.parse_assertion(assertion), ctx, final
            ).holds, table

    def test_constant_oracles_up_to_k3(self):
        for k in (1, 2, 3):
            for spec in ("constant0", "constant1"):
                f = oracle_from_spec(spec, k)
                report = dj_verify(f)
                assert report.p_all_zero == pytest.approx(1.0, abs=1e-9)


class TestProof:
    def test_wp_of_target_is_identity(self):
        f = oracle_from_spec("constant1")
        ctx, prog = dj_program(f)
        pre = hoare.wp(ctx, prog, dj_target_predicate(2), tables=dj_tables(f))
        assert np.max(np.abs(pre.mat - np.eye(8))) <= 1e-9

    def test_outline_validates(self):
        f = oracle_from_spec("constant1")
        outline = dj_outline(f)
        report = hoare.check_outline(outline, tables=dj_tables(f))
        assert report.ok
        rules = [s.rule for s in outline.steps]
        assert rules == ["Cons"] + ["AsgnB"] * 3 + ["Unit"] * 4

    def test_outline_fails_for_balanced_oracle(self):
        # {I} prog {T} only holds when the oracle is constant
        f = oracle_from_spec("balanced:0101")
        outline = dj_outline(f)
        report = hoare.check_outline(outline, tables=dj_tables(f))
        assert not report.ok

    def test_intermediate_predicate_quarter_pattern(self):
        # conjugating the target by H2 (x) I gives 1/4 exactly where the
        # row and column indices have equal parity, and 0 elsewhere
        t = np.asarray(dj_target_predicate(2).mat)
        h2i = np.kron(np.asarray(build_hadamard(2)), np.eye(2))
        mid = h2i.conj().T @ t @ h2i
        for a in range(8):
            for b in range(8):
                want = 0.25 if (a + b) % 2 == 0 else 0.0
                assert mid[a, b] == pytest.approx(want, abs=1e-12), (a, b)

    def test_tensor_hadamard_equals_per_qubit_path(self):
        f = oracle_from_spec("constant1")
        tables = dj_tables(f)
        src_one = "var q1: qbit, q2: qbit, qe: qbit; q1, q2, qe *= H3"
        src_three = "var q1: qbit, q2: qbit, qe: qbit; q1 *= H; q2 *= H; qe *= H"
        ctx, one = lang.parse(src_one)
        _, three = lang.parse(src_three)
        rho = linalg.random_density(8, 12)
        a = semantics.evaluate(ctx, one, rho, tables=tables)
        b = semantics.evaluate(ctx, three, rho, tables=tables)
        assert np.max(np.abs(a.mat - b.mat)) <= 1e-12
