"""Concrete syntax, AST and typechecker for the quantum while-language.

Two dialects share one AST:

  core  -- skip, sequencing, zero-initialization, unitary application,
           measurement-case and measurement-guarded while; all variables
           quantum (qbit or qunit).
  qpl   -- additionally bits, bit assignment, if-over-bits, measure-if,
           allocation (new bit/qbit, prepended to the context) and discard.

Grammar (line comments with '#', ';' separates statements):

  program := 'var' decl (',' decl)* ';' stmt
  decl    := ident ':' ('bit' | 'qbit' | 'qunit' ('[' int ']')?)
  stmt    := 'skip' | ident ':=' ('0'|'1') | identlist '*=' gatename
           | stmt ';' stmt | 'new' ('bit'|'qbit') ident | 'discard' ident
           | 'if' ident 'then' stmt 'else' stmt 'fi'
           | 'measure' ident 'then' stmt 'else' stmt 'fi'
           | 'measure' measname '(' identlist ')' '{' ('case' int ':' stmt)+ '}'
           | 'while' measname '(' identlist ')' '=' '1' 'do' stmt 'od'

The parser resolves names against the declarations (plus 'new' statements),
so use of an undeclared variable is a parse error with a position.  Kind,
arity, dialect and context-discipline checks live in ``typecheck``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from . import linalg
from .linalg import CMatrix, DEFAULT_TOL

DEFAULT_QUNIT_DIM = 8

CORE = "core"
QPL = "qpl"
_DIALECT_ALIASES = {"core": CORE, "ying-core": CORE, "qpl": QPL}


def normalize_dialect(name: str) -> str:
    try:
        return _DIALECT_ALIASES[name]
    except KeyError:
        raise ValueError(f"unknown dialect {name!r} (expected 'core' or 'qpl')")


# ---------------------------------------------------------------------------
# Variable contexts


@dataclass(frozen=True)
class VarDecl:
    name: str
    kind: str  # 'bit' | 'qbit' | 'qunit'
    dim: int = 2  # 2 for bit/qbit; declared dimension for qunit

    def __post_init__(self):
        if self.kind not in ("bit", "qbit", "qunit"):
            raise ValueError(f"unknown variable kind {self.kind!r}")
        if self.kind in ("bit", "qbit") and self.dim != 2:
            raise ValueError(f"{self.kind} variables are 2-dimensional")
        if self.kind == "qunit" and self.dim < 2:
            raise ValueError("qunit dimension must be at least 2")


@dataclass(frozen=True)
class VarContext:
    """Ordered variable declarations; first variable = leftmost tensor factor."""

    entries: tuple

    def __post_init__(self):
        entries = tuple(self.entries)
        names = [e.name for e in entries]
        if len(set(names)) != len(names):
            raise ValueError("duplicate variable names in context")
        object.__setattr__(self, "entries", entries)

    @staticmethod
    def of(*pairs) -> "VarContext":
        """Convenience builder: VarContext.of(('q', 'qbit'), ('n', 'qunit', 4))."""
        decls = []
        for p in pairs:
            if len(p) == 2:
                decls.append(VarDecl(p[0], p[1]))
            else:
                decls.append(VarDecl(p[0], p[1], p[2]))
        return VarContext(tuple(decls))

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[VarDecl]:
        return iter(self.entries)

    @property
    def names(self) -> tuple:
        return tuple(e.name for e in self.entries)

    @property
    def dims(self) -> tuple:
        return tuple(e.dim for e in self.entries)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims)) if self.entries else 1

    def __contains__(self, name: str) -> bool:
        return name in self.names

    def lookup(self, name: str) -> VarDecl:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def index(self, name: str) -> int:
        for i, e in enumerate(self.entries):
            if e.name == name:
                return i
        raise KeyError(name)

    def prepend(self, decl: VarDecl) -> "VarContext":
        return VarContext((decl,) + self.entries)

    def remove(self, name: str) -> "VarContext":
        return VarContext(tuple(e for e in self.entries if e.name != name))


# ---------------------------------------------------------------------------
# Abstract syntax


class Command:
    """Base class of program AST nodes."""

    __slots__ = ()


@dataclass(frozen=True)
class Skip(Command):
    pass


@dataclass(frozen=True)
class Seq(Command):
    first: Command
    second: Command


@dataclass(frozen=True)
class InitZero(Command):
    var: str


@dataclass(frozen=True)
class ApplyU(Command):
    vars: tuple
    gate: str


@dataclass(frozen=True)
class MeasureCase(Command):
    meas: str
    vars: tuple
    branches: tuple


@dataclass(frozen=True)
class While(Command):
    meas: str
    vars: tuple
    body: Command


@dataclass(frozen=True)
class NewBit(Command):
    var: str


@dataclass(frozen=True)
class NewQbit(Command):
    var: str


@dataclass(frozen=True)
class Discard(Command):
    var: str


@dataclass(frozen=True)
class AssignBit(Command):
    var: str
    value: int  # 0 or 1


@dataclass(frozen=True)
class IfBit(Command):
    var: str
    then: Command
    otherwise: Command


@dataclass(frozen=True)
class MeasureIf(Command):
    var: str
    then: Command
    otherwise: Command


def seq_of(*commands: Command) -> Command:
    """Right-leaning sequence of the given commands (Skip when empty)."""
    cmds = list(commands)
    if not cmds:
        return Skip()
    out = cmds[-1]
    for c in reversed(cmds[:-1]):
        out = Seq(c, out)
    return out


def seq_items(c: Command) -> list:
    """Flatten nested Seq nodes into a statement list."""
    if isinstance(c, Seq):
        return seq_items(c.first) + seq_items(c.second)
    return [c]


def normalize(c: Command) -> Command:
    """Reassociate every Seq spine to right-leaning form."""
    if isinstance(c, Seq):
        return seq_of(*[normalize(s) for s in seq_items(c)])
    if isinstance(c, MeasureCase):
        return MeasureCase(c.meas, c.vars, tuple(normalize(b) for b in c.branches))
    if isinstance(c, While):
        return While(c.meas, c.vars, normalize(c.body))
    if isinstance(c, IfBit):
        return IfBit(c.var, normalize(c.then), normalize(c.otherwise))
    if isinstance(c, MeasureIf):
        return MeasureIf(c.var, normalize(c.then), normalize(c.otherwise))
    return c


# ---------------------------------------------------------------------------
# Gate and measurement tables


class GateTable:
    """Named unitary gates; every entry is checked at insertion."""

    def __init__(self, gates: dict | None = None, tol: float = 1e-12):
        self.tol = tol
        self._gates: dict[str, CMatrix] = {}
        for name, m in (gates or {}).items():
            self.add(name, m)

    def add(self, name: str, m: CMatrix) -> None:
        m = linalg.as_cmatrix(m)
        if not linalg.is_unitary(m, self.tol):
            raise ValueError(f"gate {name!r} is not unitary within {self.tol}")
        self._gates[name] = m

    def __contains__(self, name: str) -> bool:
        return name in self._gates

    def get(self, name: str) -> CMatrix:
        if name not in self._gates:
            raise KeyError(f"unknown gate {name!r}")
        return self._gates[name]

    def names(self) -> list:
        return sorted(self._gates)


class MeasTable:
    """Named measurements {M_m}; 'std' is the computational-basis measurement
    generated on demand for any dimension."""

    def __init__(self, measurements: dict | None = None, tol: float = 1e-12):
        self.tol = tol
        self._meas: dict[str, tuple] = {}
        for name, ops in (measurements or {}).items():
            self.add(name, ops)

    def add(self, name: str, ops) -> None:
        if name == "std":
            raise ValueError("'std' is reserved for the computational-basis measurement")
        mats = tuple(linalg.as_cmatrix(m) for m in ops)
        if not mats:
            raise ValueError(f"measurement {name!r} has no outcomes")
        d = mats[0].shape[1]
        s = sum(np.asarray(m).conj().T @ np.asarray(m) for m in mats)
        if linalg._max_abs(s - np.eye(d)) > self.tol:
            raise ValueError(f"measurement {name!r} does not satisfy sum M^dag M = I")
        self._meas[name] = mats

    def __contains__(self, name: str) -> bool:
        return name == "std" or name in self._meas

    def get(self, name: str, dim: int) -> tuple:
        if name == "std":
            return tuple(linalg.projector(m, dim) for m in range(dim))
        if name not in self._meas:
            raise KeyError(f"unknown measurement {name!r}")
        ops = self._meas[name]
        if ops[0].shape[1] != dim:
            raise ValueError(
                f"measurement {name!r} acts on dimension {ops[0].shape[1]}, not {dim}"
            )
        return ops

    def outcome_count(self, name: str, dim: int) -> int:
        return len(self.get(name, dim))

    def names(self) -> list:
        return sorted(self._meas) + ["std"]


@dataclass
class Tables:
    gates: GateTable
    meas: MeasTable

    @staticmethod
    def builtin() -> "Tables":
        gates = GateTable(
            {
                "I": linalg.identity(2),
                "H": linalg.hadamard(),
                "X": linalg.pauli_x(),
                "Y": linalg.pauli_y(),
                "Z": linalg.pauli_z(),
                "S": linalg.phase_gate(),
                "CNOT": linalg.cnot(),
            }
        )
        return Tables(gates=gates, meas=MeasTable())

    def merged_with_sidecar(self, doc: dict) -> "Tables":
        """Extend with gates/measurements from a sidecar document
        ({'gates': {name: matrixdoc}, 'measurements': {name: [matrixdoc]}})."""
        out = Tables(
            gates=GateTable({n: self.gates.get(n) for n in self.gates.names()}),
            meas=MeasTable({n: self.meas._meas[n] for n in self.meas._meas}),
        )
        for name, mdoc in (doc.get("gates") or {}).items():
            out.gates.add(name, linalg.matrix_from_doc(mdoc))
        for name, mdocs in (doc.get("measurements") or {}).items():
            out.meas.add(name, [linalg.matrix_from_doc(d) for d in mdocs])
        return out


# ---------------------------------------------------------------------------
# Lexer


class ParseError(Exception):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


_KEYWORDS = {
    "var", "skip", "new", "bit", "qbit", "qunit", "discard",
    "if", "then", "else", "fi", "measure", "while", "do", "od", "case",
}
_SYMBOLS = [":=", "*=", ";", ",", ":", "=", "(", ")", "{", "}", "[", "]"]


@dataclass(frozen=True)
class Token:
    kind: str  # 'ident' | 'int' | 'kw' | 'sym' | 'eof'
    text: str
    line: int
    col: int


def tokenize(text: str) -> list:
    toks = []
    line, col = 1, 1
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        start_col = col
        matched = None
        for sym in _SYMBOLS:
            if text.startswith(sym, i):
                matched = sym
                break
        if matched:
            toks.append(Token("sym", matched, line, start_col))
            i += len(matched)
            col += len(matched)
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            toks.append(Token("int", text[i:j], line, start_col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            toks.append(Token("kw" if word in _KEYWORDS else "ident", word, line, start_col))
            col += j - i
            i = j
            continue
        raise ParseError(f"unexpected character {ch!r}", line, start_col)
    toks.append(Token("eof", "", line, col))
    return toks


# ---------------------------------------------------------------------------
# Parser


class _Parser:
    def __init__(self, tokens: list):
        self.toks = tokens
        self.pos = 0
        self.known: dict[str, str] = {}  # name -> kind, from decls and 'new'

    def peek(self, ahead: int = 0) -> Token:
        return self.toks[min(self.pos + ahead, len(self.toks) - 1)]

    def next(self) -> Token:
        t = self.toks[self.pos]
        if t.kind != "eof":
            self.pos += 1
        return t

    def error(self, message: str, tok: Token | None = None):
        t = tok or self.peek()
        raise ParseError(message, t.line, t.col)

    def expect(self, kind: str, text: str | None = None) -> Token:
        t = self.peek()
        if t.kind != kind or (text is not None and t.text != text):
            want = text or kind
            got = t.text or t.kind
            self.error(f"expected {want!r}, found {got!r}")
        return self.next()

    def at(self, kind: str, text: str | None = None) -> bool:
        t = self.peek()
        return t.kind == kind and (text is None or t.text == text)

    # program := 'var' decl (',' decl)* ';' stmt
    def parse_program(self) -> tuple:
        self.expect("kw", "var")
        decls = [self.parse_decl()]
        while self.at("sym", ","):
            self.next()
            decls.append(self.parse_decl())
        self.expect("sym", ";")
        body = self.parse_seq()
        self.expect("eof")
        return VarContext(tuple(decls)), body

    def parse_decl(self) -> VarDecl:
        name_tok = self.expect("ident")
        name = name_tok.text
        if name in self.known:
            self.error(f"duplicate declaration of {name!r}", name_tok)
        self.expect("sym", ":")
        t = self.peek()
        if t.kind != "kw" or t.text not in ("bit", "qbit", "qunit"):
            self.error("expected a type (bit, qbit or qunit)")
        self.next()
        dim = 2
        if t.text == "qunit":
            dim = DEFAULT_QUNIT_DIM
            if self.at("sym", "["):
                self.next()
                d_tok = self.expect("int")
                dim = int(d_tok.text)
                if dim < 2:
                    self.error("qunit dimension must be at least 2", d_tok)
                self.expect("sym", "]")
        self.known[name] = t.text
        return VarDecl(name, t.text, dim)

    def parse_seq(self) -> Command:
        stmts = [self.parse_stmt()]
        while self.at("sym", ";"):
            self.next()
            stmts.append(self.parse_stmt())
        return seq_of(*stmts)

    def lookup(self, tok: Token) -> str:
        if tok.text not in self.known:
            self.error(f"undeclared variable {tok.text!r}", tok)
        return self.known[tok.text]

    def parse_stmt(self) -> Command:
        t = self.peek()
        if t.kind == "kw":
            if t.text == "skip":
                self.next()
                return Skip()
            if t.text == "new":
                self.next()
                kind_tok = self.peek()
                if not (self.at("kw", "bit") or self.at("kw", "qbit")):
                    self.error("expected 'bit' or 'qbit' after 'new'")
                self.next()
                name_tok = self.expect("ident")
                if name_tok.text in self.known:
                    self.error(f"duplicate declaration of {name_tok.text!r}", name_tok)
                self.known[name_tok.text] = kind_tok.text
                return NewBit(name_tok.text) if kind_tok.text == "bit" else NewQbit(name_tok.text)
            if t.text == "discard":
                self.next()
                name_tok = self.expect("ident")
                self.lookup(name_tok)
                return Discard(name_tok.text)
            if t.text == "if":
                self.next()
                guard = self.expect("ident")
                self.lookup(guard)
                self.expect("kw", "then")
                then = self.parse_seq()
                self.expect("kw", "else")
                other = self.parse_seq()
                self.expect("kw", "fi")
                return IfBit(guard.text, then, other)
            if t.text == "measure":
                return self.parse_measure()
            if t.text == "while":
                self.next()
                meas_tok = self.expect("ident")
                self.expect("sym", "(")
                vars_ = self.parse_identlist()
                self.expect("sym", ")")
                self.expect("sym", "=")
                one = self.expect("int")
                if one.text != "1":
                    self.error("while guard must compare to 1", one)
                self.expect("kw", "do")
                body = self.parse_seq()
                self.expect("kw", "od")
                return While(meas_tok.text, vars_, body)
            self.error(f"unexpected keyword {t.text!r}")
        if t.kind == "ident":
            # ident ':=' value  |  identlist '*=' gate
            if self.peek(1).kind == "sym" and self.peek(1).text == ":=":
                name_tok = self.next()
                kind = self.lookup(name_tok)
                self.next()  # :=
                v_tok = self.expect("int")
                if v_tok.text not in ("0", "1"):
                    self.error("assignment value must be 0 or 1", v_tok)
                value = int(v_tok.text)
                if kind == "bit":
                    return AssignBit(name_tok.text, value)
                if value != 0:
                    self.error(
                        f"quantum variable {name_tok.text!r} can only be initialized to 0",
                        v_tok,
                    )
                return InitZero(name_tok.text)
            vars_ = self.parse_identlist()
            self.expect("sym", "*=")
            gate_tok = self.expect("ident")
            return ApplyU(vars_, gate_tok.text)
        self.error(f"unexpected token {t.text or t.kind!r}")

    def parse_measure(self) -> Command:
        self.expect("kw", "measure")
        name_tok = self.expect("ident")
        if self.at("kw", "then"):
            self.lookup(name_tok)
            self.next()
            then = self.parse_seq()
            self.expect("kw", "else")
            other = self.parse_seq()
            self.expect("kw", "fi")
            return MeasureIf(name_tok.text, then, other)
        self.expect("sym", "(")
        vars_ = self.parse_identlist()
        self.expect("sym", ")")
        self.expect("sym", "{")
        cases: dict[int, Command] = {}
        while self.at("kw", "case"):
            case_tok = self.next()
            idx_tok = self.expect("int")
            idx = int(idx_tok.text)
            if idx in cases:
                self.error(f"duplicate case {idx}", idx_tok)
            self.expect("sym", ":")
            cases[idx] = self.parse_seq()
            del case_tok
        if not cases:
            self.error("measurement needs at least one case")
        close = self.peek()
        self.expect("sym", "}")
        if sorted(cases) != list(range(len(cases))):
            raise ParseError(
                f"cases must be 0..{len(cases) - 1} with no gaps", close.line, close.col
            )
        branches = tuple(cases[i] for i in range(len(cases)))
        return MeasureCase(name_tok.text, vars_, branches)

    def parse_identlist(self) -> tuple:
        first = self.expect("ident")
        self.lookup(first)
        names = [first.text]
        while self.at("sym", ","):
            self.next()
            tok = self.expect("ident")
            self.lookup(tok)
            if tok.text in names:
                self.error(f"repeated variable {tok.text!r}", tok)
            names.append(tok.text)
        return tuple(names)


def parse(text: str) -> tuple:
    """Parse a program, returning (VarContext, Command)."""
    return _Parser(tokenize(text)).parse_program()


# ---------------------------------------------------------------------------
# Printer


def _print_decl(d: VarDecl) -> str:
    if d.kind == "qunit":
        return f"{d.name}: qunit[{d.dim}]"
    return f"{d.name}: {d.kind}"


def _print_stmt(c: Command, sep: str) -> str:
    if isinstance(c, Seq):
        return sep.join(_print_stmt(s, "; ") for s in seq_items(c))
    if isinstance(c, Skip):
        return "skip"
    if isinstance(c, InitZero):
        return f"{c.var} := 0"
    if isinstance(c, AssignBit):
        return f"{c.var} := {c.value}"
    if isinstance(c, ApplyU):
        return f"{', '.join(c.vars)} *= {c.gate}"
    if isinstance(c, NewBit):
        return f"new bit {c.var}"
    if isinstance(c, NewQbit):
        return f"new qbit {c.var}"
    if isinstance(c, Discard):
        return f"discard {c.var}"
    if isinstance(c, IfBit):
        return (
            f"if {c.var} then {_print_stmt(c.then, '; ')} "
            f"else {_print_stmt(c.otherwise, '; ')} fi"
        )
    if isinstance(c, MeasureIf):
        return (
            f"measure {c.var} then {_print_stmt(c.then, '; ')} "
            f"else {_print_stmt(c.otherwise, '; ')} fi"
        )
    if isinstance(c, MeasureCase):
        cases = " ".join(
            f"case {i}: {_print_stmt(b, '; ')}" for i, b in enumerate(c.branches)
        )
        return f"measure {c.meas}({', '.join(c.vars)}) {{ {cases} }}"
    if isinstance(c, While):
        return f"while {c.meas}({', '.join(c.vars)}) = 1 do {_print_stmt(c.body, '; ')} od"
    raise TypeError(f"cannot print {type(c).__name__}")


def print_program(ctx: VarContext, c: Command) -> str:
    """Render source text; parse(print_program(ctx, c)) gives back
    (ctx, normalize(c))."""
    decls = ", ".join(_print_decl(d) for d in ctx)
    return f"var {decls};\n" + _print_stmt(c, ";\n")


# ---------------------------------------------------------------------------
# Typechecker


@dataclass(frozen=True)
class TypeIssue:
    message: str

    def __str__(self):
        return self.message


@dataclass
class TypeReport:
    issues: list
    output_context: VarContext | None = None

    @property
    def ok(self) -> bool:
        return not self.issues


class _Checker:
    def __init__(self, dialect: str, tables: Tables):
        self.dialect = dialect
        self.tables = tables
        self.issues: list[TypeIssue] = []

    def fail(self, message: str):
        self.issues.append(TypeIssue(message))

    def check(self, ctx: VarContext, c: Command) -> VarContext:
        if isinstance(c, Skip):
            return ctx
        if isinstance(c, Seq):
            mid = self.check(ctx, c.first)
            return self.check(mid, c.second)
        if isinstance(c, InitZero):
            # On a bit this aliases assignment to 0 (same operator sum).
            self._use(ctx, c.var)
            return ctx
        if isinstance(c, AssignBit):
            if self.dialect == CORE:
                self.fail("bit assignment is not part of the core dialect")
            decl = self._use(ctx, c.var)
            if decl and decl.kind != "bit":
                self.fail(f"assignment target {c.var} must be a bit, is {decl.kind}")
            return ctx
        if isinstance(c, ApplyU):
            dims = []
            for v in c.vars:
                decl = self._use(ctx, v)
                if decl:
                    if decl.kind == "bit":
                        self.fail(f"unitary target {v} must be quantum, is a bit")
                    dims.append(decl.dim)
            if c.gate not in self.tables.gates:
                self.fail(f"unknown gate {c.gate!r}")
            elif len(dims) == len(c.vars):
                gate_dim = self.tables.gates.get(c.gate).shape[0]
                want = int(np.prod(dims))
                if gate_dim != want:
                    self.fail(
                        f"gate {c.gate!r} has dimension {gate_dim} but targets "
                        f"({', '.join(c.vars)}) span dimension {want}"
                    )
            return ctx
        if isinstance(c, MeasureCase):
            dims = []
            for v in c.vars:
                decl = self._use(ctx, v)
                if decl:
                    if decl.kind == "bit":
                        self.fail(f"measured variable {v} must be quantum, is a bit")
                    dims.append(decl.dim)
            outs = None
            if c.meas not in self.tables.meas:
                self.fail(f"unknown measurement {c.meas!r}")
            elif len(dims) == len(c.vars):
                try:
                    outs = self.tables.meas.outcome_count(c.meas, int(np.prod(dims)))
                except ValueError as exc:
                    self.fail(str(exc))
            if outs is not None and outs != len(c.branches):
                self.fail(
                    f"measurement {c.meas!r} has {outs} outcomes but "
                    f"{len(c.branches)} cases are given"
                )
            branch_ctxs = [self.check(ctx, b) for b in c.branches]
            for i, bc in enumerate(branch_ctxs[1:], start=1):
                if bc.entries != branch_ctxs[0].entries:
                    self.fail(f"case {i} ends in a different context than case 0")
            return branch_ctxs[0]
        if isinstance(c, While):
            dims = []
            for v in c.vars:
                decl = self._use(ctx, v)
                if decl:
                    dims.append(decl.dim)
            if c.meas not in self.tables.meas:
                self.fail(f"unknown measurement {c.meas!r}")
            elif len(dims) == len(c.vars):
                try:
                    outs = self.tables.meas.outcome_count(c.meas, int(np.prod(dims)))
                    if outs != 2:
                        self.fail(
                            f"while guard measurement {c.meas!r} must have 2 outcomes, has {outs}"
                        )
                except ValueError as exc:
                    self.fail(str(exc))
            body_ctx = self.check(ctx, c.body)
            if body_ctx.entries != ctx.entries:
                self.fail("loop body must restore the context it started with")
            return ctx
        if isinstance(c, NewBit) or isinstance(c, NewQbit):
            kind = "bit" if isinstance(c, NewBit) else "qbit"
            if self.dialect == CORE:
                self.fail(f"allocation (new {kind}) is not part of the core dialect")
            if c.var in ctx:
                self.fail(f"variable {c.var} already exists")
                return ctx
            return ctx.prepend(VarDecl(c.var, kind))
        if isinstance(c, Discard):
            if self.dialect == CORE:
                self.fail("discard is not part of the core dialect")
            if c.var not in ctx:
                self.fail(f"use of {c.var} after discard (or before allocation)")
                return ctx
            return ctx.remove(c.var)
        if isinstance(c, IfBit):
            if self.dialect == CORE:
                self.fail("if-over-bits is not part of the core dialect")
            decl = self._use(ctx, c.var)
            if decl and decl.kind != "bit":
                self.fail(f"if guard {c.var} must be a bit, is {decl.kind}")
            t_ctx = self.check(ctx, c.then)
            e_ctx = self.check(ctx, c.otherwise)
            if t_ctx.entries != e_ctx.entries:
                self.fail(f"branches of if {c.var} end in different contexts")
            return t_ctx
        if isinstance(c, MeasureIf):
            if self.dialect == CORE:
                self.fail("measure-if is not part of the core dialect")
            decl = self._use(ctx, c.var)
            if decl and decl.kind != "qbit":
                self.fail(f"measure guard {c.var} must be a qbit, is {decl.kind}")
            t_ctx = self.check(ctx, c.then)
            e_ctx = self.check(ctx, c.otherwise)
            if t_ctx.entries != e_ctx.entries:
                self.fail(f"branches of measure {c.var} end in different contexts")
            return t_ctx
        raise TypeError(f"unknown command {type(c).__name__}")

    def _use(self, ctx: VarContext, name: str) -> VarDecl | None:
        if name not in ctx:
            self.fail(f"use of {name} after discard (or before allocation)")
            return None
        return ctx.lookup(name)


def typecheck(
    ctx: VarContext,
    c: Command,
    dialect: str = CORE,
    tables: Tables | None = None,
) -> TypeReport:
    """Check kinds, arities and context discipline; returns the issues found
    and, when clean, the output context the program ends with."""
    dialect = normalize_dialect(dialect)
    tables = tables or Tables.builtin()
    checker = _Checker(dialect, tables)
    if dialect == CORE:
        for d in ctx:
            if d.kind == "bit":
                checker.fail(f"bit variable {d.name} is not allowed in the core dialect")
    out = checker.check(ctx, c)
    return TypeReport(issues=checker.issues, output_context=out if not checker.issues else None)
