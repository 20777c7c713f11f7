import numpy as np
import pytest

from qhoare import lang, linalg, semantics
from qhoare.lang import Seq, Skip, Tables, parse
from qhoare.linalg import DensityMatrix, as_cmatrix
from qhoare.semantics import (
    Config, EvalOptions, TruncationError, denote, evaluate, run_operational,
    step, termination_probability,
)

from gen import random_core_loop_free, random_qubit_context, rng_for


def dm(mat) -> DensityMatrix:
    return DensityMatrix(as_cmatrix(mat))


KET0 = dm(np.diag([1.0, 0.0]))
KET1 = dm(np.diag([0.0, 1.0]))
PLUS = dm(np.full((2, 2), 0.5))


class TestDenote:
    def test_skip_is_identity(self):
        ctx, prog = parse("var q: qbit; skip")
        for seed in range(5):
            rho = linalg.random_density(2, seed)
            out = linalg.apply_kraus(denote(ctx, prog), rho)
            assert np.max(np.abs(out.mat - rho.mat)) <= 1e-12

    def test_init_zero_resets_one(self):
        ctx, prog = parse("var q: qbit; q := 0")
        out = linalg.apply_kraus(denote(ctx, prog), KET1)
        assert np.max(np.abs(out.mat - KET0.mat)) <= 1e-12

    def test_allocation_prepends_top_left(self):
        ctx, prog = parse("var q: qbit; new qbit p")
        for seed in range(10):
            rho = linalg.random_density(2, seed)
            out = linalg.apply_kraus(denote(ctx, prog), rho)
            want = np.zeros((4, 4), dtype=complex)
            want[:2, :2] = rho.mat
            assert np.max(np.abs(out.mat - want)) <= 1e-12

    def test_denotation_trace_nonincreasing_and_psd(self):
        # 500 random (program, state) pairs; the DensityMatrix constructor
        # enforces PSD on every result
        rng = rng_for(314)
        pairs = 0
        while pairs < 500:
            ctx = random_qubit_context(rng)
            prog = random_core_loop_free(rng, ctx, depth=4)
            k = denote(ctx, prog)
            for _ in range(5):
                rho = linalg.random_density(ctx.dim, pairs)
                out = linalg.apply_kraus(k, rho)
                assert out.trace <= rho.trace + 1e-10
                pairs += 1


class TestEvaluate:
    def test_assign_bit_one(self):
        ctx, prog = parse("var b: bit; b := 1")
        for p in (0.0, 0.3, 1.0):
            out = evaluate(ctx, prog, dm(np.diag([p, 1 - p])))
            assert np.max(np.abs(out.mat - np.diag([0.0, 1.0]))) <= 1e-12

    def test_hadamard_makes_plus(self):
        ctx, prog = parse("var q: qbit; q *= H")
        out = evaluate(ctx, prog, KET0)
        assert np.max(np.abs(out.mat - PLUS.mat)) <= 1e-12

    def test_measure_and_forget(self):
        ctx, prog = parse("var q: qbit; measure std(q) { case 0: skip case 1: skip }")
        out = evaluate(ctx, prog, PLUS)
        assert np.max(np.abs(out.mat - np.diag([0.5, 0.5]))) <= 1e-12

    def test_matches_denote(self):
        ctx, prog = parse("var q1: qbit, q2: qbit; q1 *= H; q1, q2 *= CNOT")
        rho = linalg.random_density(4, 8)
        via_denote = linalg.apply_kraus(denote(ctx, prog), rho)
        assert np.max(np.abs(evaluate(ctx, prog, rho).mat - via_denote.mat)) <= 1e-9

    def test_linear_in_the_state(self):
        rng = rng_for(55)
        for i in range(30):
            ctx = random_qubit_context(rng)
            prog = random_core_loop_free(rng, ctx, depth=4)
            r1 = linalg.random_density(ctx.dim, 2 * i)
            r2 = linalg.random_density(ctx.dim, 2 * i + 1)
            a, b = 0.4, 0.5
            mix = dm(a * np.asarray(r1.mat) + b * np.asarray(r2.mat))
            lhs = evaluate(ctx, prog, mix).mat
            rhs = a * np.asarray(evaluate(ctx, prog, r1).mat) + b * np.asarray(
                evaluate(ctx, prog, r2).mat
            )
            assert np.max(np.abs(lhs - rhs)) <= 1e-9

    def test_new_then_discard_is_identity(self):
        ctx, prog = parse("var q: qbit; new qbit p; discard p")
        for seed in range(10):
            rho = linalg.random_density(2, seed)
            out = evaluate(ctx, prog, rho)
            assert np.max(np.abs(out.mat - rho.mat)) <= 1e-12

    def test_discard_any_position(self):
        # discarding the trailing variable traces it out
        ctx, prog = parse("var q1: qbit, q2: qbit; discard q2")
        rho = linalg.random_density(4, 3)
        out = evaluate(ctx, prog, rho)
        r = np.asarray(rho.mat).reshape(2, 2, 2, 2)
        want = np.einsum("abcb->ac", r)
        assert np.max(np.abs(out.mat - want)) <= 1e-12

    def test_init_zero_on_bit_equals_assignment(self):
        ctx = lang.VarContext.of(("b", "bit"))
        k_init = denote(ctx, lang.InitZero("b"))
        k_assign = denote(ctx, lang.AssignBit("b", 0))
        for seed in range(5):
            rho = linalg.random_density(2, seed)
            a = linalg.apply_kraus(k_init, rho).mat
            b = linalg.apply_kraus(k_assign, rho).mat
            assert np.max(np.abs(np.asarray(a) - b)) <= 1e-12

    def test_assign_bit_idempotent(self):
        ctx, once = parse("var b: bit; b := 0")
        _, twice = parse("var b: bit; b := 0; b := 0")
        for seed in range(10):
            rho = linalg.random_density(2, seed)
            a = evaluate(ctx, once, rho).mat
            b = evaluate(ctx, twice, rho).mat
            assert np.max(np.abs(np.asarray(a) - b)) <= 1e-12

    def test_dimension_mismatch(self):
        ctx, prog = parse("var q: qbit; skip")
        with pytest.raises(ValueError):
            evaluate(ctx, prog, linalg.random_density(4, 0))


class TestStep:
    def test_unitary_rule(self):
        ctx, prog = parse("var q: qbit; q *= H")
        succs = step(Config(prog, KET0, ctx))
        assert len(succs) == 1
        assert succs[0].done
        assert np.max(np.abs(succs[0].state.mat - PLUS.mat)) <= 1e-12

    def test_measure_branches_carry_probability(self):
        ctx, prog = parse("var q: qbit; measure std(q) { case 0: skip case 1: skip }")
        succs = step(Config(prog, PLUS, ctx))
        assert len(succs) == 2
        for s in succs:
            assert s.state.trace == pytest.approx(0.5, abs=1e-12)

    def test_skip_seq_rule(self):
        ctx, _ = parse("var q: qbit; skip")
        inner = lang.InitZero("q")
        succs = step(Config(Seq(Skip(), inner), KET1, ctx))
        assert len(succs) == 1
        assert succs[0].residual == inner
        assert np.array_equal(succs[0].state.mat, KET1.mat)

    def test_done_has_no_successors(self):
        ctx, _ = parse("var q: qbit; skip")
        assert step(Config(Skip(), KET0, ctx)) == []

    def test_loop_rules_give_two_successors(self):
        ctx, prog = parse("var q: qbit; while std(q) = 1 do skip od")
        succs = step(Config(prog, PLUS, ctx))
        assert len(succs) == 2
        assert succs[0].done  # exit branch
        assert not succs[1].done

    def test_rejects_qpl_constructs(self):
        ctx, prog = parse("var q: qbit; new qbit p")
        with pytest.raises(ValueError):
            step(Config(prog, KET0, ctx))


class TestRunOperational:
    def test_loop_free_matches_evaluate(self):
        rng = rng_for(777)
        for i in range(40):
            ctx = random_qubit_context(rng, max_qubits=2)
            prog = random_core_loop_free(rng, ctx, depth=4)
            rho = linalg.random_density(ctx.dim, i)
            res = run_operational(ctx, prog, rho, depth_cap=64)
            assert res.unexplored_mass == 0.0
            total = res.total_mat if res.terminals else np.zeros((ctx.dim, ctx.dim))
            want = evaluate(ctx, prog, rho).mat
            assert np.max(np.abs(np.asarray(total) - want)) <= 1e-9

    def test_self_assignment_loop_terminates_by_depth_three(self):
        ctx, prog = parse("var q: qbit; while std(q) = 1 do q := 0 od")
        res = run_operational(ctx, prog, KET1, depth_cap=3)
        mass = sum(t.trace for t in res.terminals)
        assert mass == pytest.approx(1.0, abs=1e-12)
        assert res.unexplored_mass == pytest.approx(0.0, abs=1e-12)

    def test_divergent_chain_is_unexplored_mass(self):
        ctx, prog = parse("var q: qbit; while std(q) = 1 do skip od")
        last = 1.0
        for cap in (2, 4, 8):
            res = run_operational(ctx, prog, PLUS, depth_cap=cap)
            assert res.unexplored_mass <= last
            last = res.unexplored_mass
        # from |+>, half the mass exits immediately; the rest loops forever
        res = run_operational(ctx, prog, PLUS, depth_cap=16)
        assert sum(t.trace for t in res.terminals) == pytest.approx(0.5, abs=1e-12)
        assert res.unexplored_mass == pytest.approx(0.5, abs=1e-12)


class TestTermination:
    def test_skip_terminates(self):
        ctx, prog = parse("var q: qbit; skip")
        assert termination_probability(ctx, prog, KET0) == 1.0

    def test_pure_divergence(self):
        ctx, prog = parse("var q: qbit; while std(q) = 1 do skip od")
        assert termination_probability(ctx, prog, KET1) == 0.0

    def test_half_divergence(self):
        ctx, prog = parse("var q: qbit; while std(q) = 1 do skip od")
        assert termination_probability(ctx, prog, PLUS) == pytest.approx(0.5, abs=1e-12)

    def test_almost_sure_loop(self):
        # body re-randomizes the guard, so exit mass is geometric
        ctx, prog = parse("var q: qbit; while std(q) = 1 do q *= H od")
        p = termination_probability(ctx, prog, KET1)
        assert p == pytest.approx(1.0, abs=1e-8)

    def test_zero_trace_rejected(self):
        ctx, prog = parse("var q: qbit; skip")
        with pytest.raises(ValueError):
            termination_probability(ctx, prog, dm(np.zeros((2, 2))))


class TestLoopTruncation:
    def test_nonconverged_loop_raises_in_exact_mode(self):
        # the flip loop cycles mass between states; with a tiny iteration
        # budget it can neither converge nor detect stationarity
        ctx, prog = parse("var q: qbit; while std(q) = 1 do q *= H od")
        opts = EvalOptions(loop_max_iters=3, loop_mass_eps=1e-12)
        with pytest.raises(TruncationError):
            denote(ctx, prog, opts)

    def test_truncated_mode_reports_residual(self):
        ctx, prog = parse("var q: qbit; while std(q) = 1 do q *= H od")
        opts = EvalOptions(loop_max_iters=3, loop_mass_eps=1e-12, mode="truncated")
        k = denote(ctx, prog, opts)
        assert k.truncation_error > 0

    def test_converged_loop_reports_tiny_error(self):
        ctx, prog = parse("var q: qbit; while std(q) = 1 do q *= H od")
        k = denote(ctx, prog)
        assert k.truncation_error <= 1e-9

    def test_report_fields(self):
        ctx, prog = parse("var q: qbit; while std(q) = 1 do q *= H od")
        report = semantics.run_report(ctx, prog, KET1)
        assert set(report) == {
            "final_state", "trace", "termination_probability",
            "truncation_error", "path_count",
        }
        assert report["termination_probability"] == pytest.approx(1.0, abs=1e-8)


class TestHadamardFactorization:
    def test_tensor_gate_equals_per_qubit_gates(self):
        tables = Tables.builtin()
        tables.gates.add("H2", linalg.kron(linalg.hadamard(), linalg.hadamard()))
        ctx, combined = parse("var q1: qbit, q2: qbit; q1, q2 *= H2")
        _, separate = parse("var q1: qbit, q2: qbit; q1 *= H; q2 *= H")
        rho = linalg.random_density(4, 21)
        a = evaluate(ctx, combined, rho, tables=tables)
        b = evaluate(ctx, separate, rho, tables=tables)
        assert np.max(np.abs(a.mat - b.mat)) <= 1e-12
