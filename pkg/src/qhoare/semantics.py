"""Denotational and operational semantics for the quantum while-language.

``denote`` builds the Kraus-map denotation of a program compositionally;
``evaluate`` applies it to a density matrix.  ``step``/``run_operational``
implement the nondeterministic small-step semantics of the core dialect,
where measurement branches carry their probability in the trace of the
state.  Loop denotations are computed as a truncated series of
exit-after-n-iterations paths; the remaining in-loop mass of an identity
probe bounds the truncation error for every subdistribution input.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import lang, linalg
from .lang import (
    ApplyU, AssignBit, Command, Discard, IfBit, InitZero, MeasureCase,
    MeasureIf, NewBit, NewQbit, Seq, Skip, Tables, VarContext, VarDecl, While,
)
from .linalg import CMatrix, DensityMatrix, KrausMap

_PRUNE_EPS = 1e-14
_SUPEROP_DIM_CAP = 16  # stationarity detection uses d^2 x d^2 matrices


class TruncationError(Exception):
    """A loop denotation did not converge below loop_mass_eps at the
    iteration cap."""

    def __init__(self, residual_mass: float, iterations: int):
        super().__init__(
            f"loop truncation did not converge: in-loop mass {residual_mass:.3e} "
            f"after {iterations} iterations"
        )
        self.residual_mass = residual_mass
        self.iterations = iterations


@dataclass(frozen=True)
class EvalOptions:
    loop_max_iters: int = 1000
    loop_mass_eps: float = 1e-9
    mode: str = "exact-kraus"  # or "truncated"

    def __post_init__(self):
        if self.loop_mass_eps <= 0:
            raise ValueError("loop_mass_eps must be positive")
        if self.mode not in ("exact-kraus", "truncated"):
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass(frozen=True)
class Config:
    """An operational configuration <residual, state>."""

    residual: Command
    state: DensityMatrix
    ctx: VarContext

    @property
    def done(self) -> bool:
        return isinstance(self.residual, Skip)


# ---------------------------------------------------------------------------
# Kraus-list plumbing


def _compose(second: list, first: list) -> list:
    """Operators of (second after first), pruning negligible products."""
    out = []
    for s in second:
        s = np.asarray(s)
        for f in first:
            e = s @ np.asarray(f)
            if np.max(np.abs(e)) >= _PRUNE_EPS:
                out.append(e)
    return out


def _superop(ops: list, dout: int, din: int) -> np.ndarray:
    """Matrix acting on row-major vec(rho): sum_i E_i (x) conj(E_i)."""
    s = np.zeros((dout * dout, din * din), dtype=np.complex128)
    for e in ops:
        e = np.asarray(e)
        s += np.kron(e, e.conj())
    return s


def _compress(ops: list, dout: int, din: int) -> list:
    """Replace a long operator list by a minimal one for the same map,
    via the eigendecomposition of its Choi matrix."""
    if len(ops) <= max(64, dout * din):
        return ops
    choi = np.zeros((dout * din, dout * din), dtype=np.complex128)
    for e in ops:
        v = np.asarray(e).reshape(-1)
        choi += np.outer(v, v.conj())
    evals, evecs = np.linalg.eigh((choi + choi.conj().T) / 2)
    out = []
    for lam, vec in zip(evals, evecs.T):
        if lam > _PRUNE_EPS:
            out.append(np.sqrt(lam) * vec.reshape(dout, din))
    return out


def _apply_ops(ops: list, mat: np.ndarray, dout: int) -> np.ndarray:
    out = np.zeros((dout, dout), dtype=np.complex128)
    for e in ops:
        e = np.asarray(e)
        out += e @ mat @ e.conj().T
    return out


def _finish(ops: list, dout: int, din: int, err: float) -> tuple:
    if not ops:
        ops = [np.zeros((dout, din))]  # the zero map
    return ops, err


# ---------------------------------------------------------------------------
# Denotational semantics


def _embed_gate(ctx: VarContext, vars_: tuple, op: CMatrix) -> CMatrix:
    positions = [ctx.index(v) for v in vars_]
    return linalg.embed_at(op, positions, ctx.dims)


def _measurement_ops(ctx: VarContext, meas: str, vars_: tuple, tables: Tables) -> list:
    dims = [ctx.lookup(v).dim for v in vars_]
    raw = tables.meas.get(meas, int(np.prod(dims)))
    return [_embed_gate(ctx, vars_, m) for m in raw]


def _front_permutation(ctx: VarContext, name: str) -> np.ndarray:
    """Permutation matrix moving the named variable to the leading factor."""
    perm = linalg._mixed_radix_perm([ctx.index(name)], ctx.dims)
    total = ctx.dim
    p = np.zeros((total, total))
    p[perm, np.arange(total)] = 1.0
    return p


class _Denoter:
    def __init__(self, opts: EvalOptions, tables: Tables):
        self.opts = opts
        self.tables = tables

    def denote(self, ctx: VarContext, c: Command) -> tuple:
        """Returns (ops, output context, truncation error bound)."""
        dim = ctx.dim
        if isinstance(c, Skip):
            return [np.eye(dim)], ctx, 0.0
        if isinstance(c, Seq):
            ops1, mid, err1 = self.denote(ctx, c.first)
            ops2, out, err2 = self.denote(mid, c.second)
            ops = _compress(_compose(ops2, ops1), out.dim, dim)
            return ops, out, err1 + err2
        if isinstance(c, InitZero):
            d = ctx.lookup(c.var).dim
            i = ctx.index(c.var)
            ops = [
                linalg.embed_at(linalg.basis_op(0, n, d), [i], ctx.dims)
                for n in range(d)
            ]
            return ops, ctx, 0.0
        if isinstance(c, AssignBit):
            i = ctx.index(c.var)
            ops = [
                linalg.embed_at(linalg.basis_op(c.value, n, 2), [i], ctx.dims)
                for n in range(2)
            ]
            return ops, ctx, 0.0
        if isinstance(c, ApplyU):
            u = _embed_gate(ctx, c.vars, self.tables.gates.get(c.gate))
            return [np.asarray(u)], ctx, 0.0
        if isinstance(c, MeasureCase):
            ms = _measurement_ops(ctx, c.meas, c.vars, self.tables)
            all_ops = []
            out_ctx = None
            err = 0.0
            for m_op, branch in zip(ms, c.branches):
                b_ops, b_ctx, b_err = self.denote(ctx, branch)
                out_ctx = b_ctx
                err += b_err
                all_ops.extend(_compose(b_ops, [np.asarray(m_op)]))
            all_ops = _compress(all_ops, out_ctx.dim, dim)
            ops, err = _finish(all_ops, out_ctx.dim, dim, err)
            return ops, out_ctx, err
        if isinstance(c, IfBit) or isinstance(c, MeasureIf):
            i = ctx.index(c.var)
            p0 = np.asarray(linalg.embed_at(linalg.projector(0), [i], ctx.dims))
            p1 = np.asarray(linalg.embed_at(linalg.projector(1), [i], ctx.dims))
            t_ops, out_ctx, t_err = self.denote(ctx, c.then)
            e_ops, _, e_err = self.denote(ctx, c.otherwise)
            ops = _compose(t_ops, [p0]) + _compose(e_ops, [p1])
            ops, err = _finish(_compress(ops, out_ctx.dim, dim), out_ctx.dim, dim, t_err + e_err)
            return ops, out_ctx, err
        if isinstance(c, NewBit) or isinstance(c, NewQbit):
            e = np.kron(np.asarray(linalg.ket(0, 2)), np.eye(dim))
            kind = "bit" if isinstance(c, NewBit) else "qbit"
            return [e], ctx.prepend(VarDecl(c.var, kind)), 0.0
        if isinstance(c, Discard):
            d = ctx.lookup(c.var).dim
            p = _front_permutation(ctx, c.var)
            rest = dim // d
            ops = [
                np.kron(np.asarray(linalg.ket(n, d)).conj().T, np.eye(rest)) @ p
                for n in range(d)
            ]
            return ops, ctx.remove(c.var), 0.0
        if isinstance(c, While):
            return self._denote_while(ctx, c)
        raise TypeError(f"cannot denote {type(c).__name__}")

    def _denote_while(self, ctx: VarContext, c: While) -> tuple:
        dim = ctx.dim
        m0, m1 = (np.asarray(m) for m in _measurement_ops(ctx, c.meas, c.vars, self.tables))
        body_ops, body_ctx, body_err = self.denote(ctx, c.body)
        if body_ctx.entries != ctx.entries:
            raise ValueError("loop body must preserve the context (run typecheck first)")
        body_enter = _compress(_compose(body_ops, [m1]), dim, dim)

        probe = np.eye(dim)
        cur = [np.eye(dim)]
        result: list = []
        iters = 0
        err = 0.0
        prev_super = None
        while True:
            exit_terms = _compose([m0], cur)
            cur_super = _superop(cur, dim, dim) if dim <= _SUPEROP_DIM_CAP else None
            if (
                not exit_terms
                and cur_super is not None
                and prev_super is not None
                and np.array_equal(cur_super, prev_super)
            ):
                # In-loop dynamics exactly stationary and no exit path left:
                # the remaining mass diverges and never contributes.
                break
            result.extend(exit_terms)
            prev_super = cur_super
            cur = _compress(_compose(body_enter, cur), dim, dim)
            iters += 1
            mass = float(np.trace(_apply_ops(cur, probe, dim)).real) if cur else 0.0
            if mass < self.opts.loop_mass_eps:
                err = mass
                break
            if iters >= self.opts.loop_max_iters:
                if self.opts.mode == "truncated":
                    err = mass
                    break
                raise TruncationError(mass, iters)
        total_err = err + iters * body_err
        ops, total_err = _finish(_compress(result, dim, dim), dim, dim, total_err)
        return ops, ctx, total_err


def denote(
    ctx: VarContext,
    c: Command,
    opts: EvalOptions | None = None,
    tables: Tables | None = None,
) -> KrausMap:
    """Kraus-map denotation of a (typechecked) program."""
    den = _Denoter(opts or EvalOptions(), tables or Tables.builtin())
    ops, _, err = den.denote(ctx, c)
    return KrausMap(tuple(linalg.as_cmatrix(e) for e in ops), truncation_error=err)


def output_context(
    ctx: VarContext, c: Command, tables: Tables | None = None
) -> VarContext:
    """The context a program ends with (contexts change via new/discard)."""
    report = lang.typecheck(ctx, c, lang.QPL, tables)
    if not report.ok:
        raise ValueError("program does not typecheck: " + "; ".join(map(str, report.issues)))
    return report.output_context


def evaluate(
    ctx: VarContext,
    c: Command,
    rho: DensityMatrix,
    opts: EvalOptions | None = None,
    tables: Tables | None = None,
) -> DensityMatrix:
    """Run a program on a density matrix: apply its Kraus denotation."""
    if rho.dim != ctx.dim:
        raise ValueError(f"state dimension {rho.dim} does not match context dimension {ctx.dim}")
    return linalg.apply_kraus(denote(ctx, c, opts, tables), rho)


# ---------------------------------------------------------------------------
# Operational semantics (core dialect)


def _shed_skips(c: Command) -> Command:
    while isinstance(c, Seq) and isinstance(c.first, Skip):
        c = c.second
    return c


def step(cfg: Config, tables: Tables | None = None) -> list:
    """Successor configurations of one small step.  Measurements branch,
    with outcome probabilities carried in the state traces; a done
    configuration has no successors."""
    tables = tables or Tables.builtin()
    c = cfg.residual
    ctx = cfg.ctx
    rho = np.asarray(cfg.state.mat)
    tol = cfg.state.tol

    def mk(residual: Command, mat) -> Config:
        return Config(residual, DensityMatrix(linalg.as_cmatrix(mat), tol=tol), ctx)

    if isinstance(c, Skip):
        return []
    if isinstance(c, Seq):
        if isinstance(c.first, Skip):
            return [mk(c.second, rho)]
        return [
            replace(succ, residual=Seq(succ.residual, c.second))
            for succ in step(Config(c.first, cfg.state, ctx), tables)
        ]
    if isinstance(c, InitZero):
        d = ctx.lookup(c.var).dim
        i = ctx.index(c.var)
        ops = [
            np.asarray(linalg.embed_at(linalg.basis_op(0, n, d), [i], ctx.dims))
            for n in range(d)
        ]
        return [mk(Skip(), _apply_ops(ops, rho, ctx.dim))]
    if isinstance(c, ApplyU):
        u = np.asarray(_embed_gate(ctx, c.vars, tables.gates.get(c.gate)))
        return [mk(Skip(), u @ rho @ u.conj().T)]
    if isinstance(c, MeasureCase):
        ms = _measurement_ops(ctx, c.meas, c.vars, tables)
        return [
            mk(branch, np.asarray(m) @ rho @ np.asarray(m).conj().T)
            for m, branch in zip(ms, c.branches)
        ]
    if isinstance(c, While):
        m0, m1 = (np.asarray(m) for m in _measurement_ops(ctx, c.meas, c.vars, tables))
        return [
            mk(Skip(), m0 @ rho @ m0.conj().T),
            mk(Seq(c.body, c), m1 @ rho @ m1.conj().T),
        ]
    raise ValueError(f"{type(c).__name__} has no small-step rule (core dialect only)")


@dataclass
class OperationalResult:
    terminals: list = field(default_factory=list)  # multiset of terminal states
    unexplored_mass: float = 0.0
    path_count: int = 0

    @property
    def total_mat(self) -> CMatrix:
        if not self.terminals:
            return None
        out = sum(np.asarray(t.mat) for t in self.terminals)
        return linalg.as_cmatrix(out)


def run_operational(
    ctx: VarContext,
    c: Command,
    rho: DensityMatrix,
    depth_cap: int,
    tables: Tables | None = None,
    prune_mass: float = 1e-12,
) -> OperationalResult:
    """Breadth-first exhaustive expansion of the step relation to depth_cap.

    Administrative skip elimination (skip; c  ->  c) is folded into the
    preceding step, so depth counts semantic transitions.  Paths whose
    state trace falls below prune_mass are dropped; configurations still
    unfinished at the cap contribute their traces to unexplored_mass.
    """
    tables = tables or Tables.builtin()
    result = OperationalResult()
    frontier = [Config(_shed_skips(c), rho, ctx)]
    for _ in range(depth_cap):
        active = []
        for cfg in frontier:
            if cfg.done:
                result.terminals.append(cfg.state)
                result.path_count += 1
            else:
                active.append(cfg)
        if not active:
            frontier = []
            break
        frontier = []
        for cfg in active:
            for succ in step(cfg, tables):
                if succ.state.trace < prune_mass:
                    continue
                frontier.append(replace(succ, residual=_shed_skips(succ.residual)))
    for cfg in frontier:
        if cfg.done:
            result.terminals.append(cfg.state)
            result.path_count += 1
        else:
            result.unexplored_mass += cfg.state.trace
    return result


def termination_probability(
    ctx: VarContext,
    c: Command,
    rho: DensityMatrix,
    opts: EvalOptions | None = None,
    tables: Tables | None = None,
) -> float:
    """tr(program applied to rho) / tr(rho), clamped to [0, 1]."""
    if rho.trace <= 0:
        raise ValueError("termination probability needs an input with positive trace")
    out = evaluate(ctx, c, rho, opts, tables)
    return min(1.0, max(0.0, out.trace / rho.trace))


def run_report(
    ctx: VarContext,
    c: Command,
    rho: DensityMatrix,
    opts: EvalOptions | None = None,
    tables: Tables | None = None,
) -> dict:
    """The run-report document: final state, trace, termination probability,
    truncation error bound and materialized path count."""
    k = denote(ctx, c, opts, tables)
    out = linalg.apply_kraus(k, rho)
    tp = out.trace / rho.trace if rho.trace > 0 else 0.0
    return {
        "final_state": linalg.matrix_to_doc(out.mat),
        "trace": out.trace,
        "termination_probability": min(1.0, max(0.0, tp)),
        "truncation_error": k.truncation_error,
        "path_count": len(k.ops),
    }
