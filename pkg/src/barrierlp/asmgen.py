"""Lowering of resolved source programs to bit-level Asm.

Every integer operation becomes a sequence of boolean gate lines, one gate per
time step.  Alongside the flat line sequence the lowering records the block
skeleton (:class:`Region`) that the SB-tree is built from: straight-line runs
become ``seq`` leaves, each element of a runtime-indexed array access gets a
leaf of its own, loops get ``init``/``body``/``step`` sub-blocks and
conditionals get an ``eval`` leaf plus two branches that each end in a
one-line ``flow`` leaf holding an IDLE.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .frontend import (
    ArrayType,
    Assign,
    Binary,
    BoolType,
    Const,
    Expr,
    For,
    Halt,
    If,
    Index,
    SourceProgram,
    Stmt,
    Type,
    UIntType,
    Unary,
    Var,
    counter_width,
    expr_type,
)

GATE_OPS = ("BCONST", "BCOPY", "BAND", "BOR", "BXOR", "BNOT")
OPS = GATE_OPS + ("GOTO", "BRIF", "IDLE", "HALT")

# Operands below zero are compile-time constants.
ZERO = -1
ONE = -2


def is_const(x: int) -> bool:
    return x < 0


def const_of(x: int) -> int:
    return 1 if x == ONE else 0


@dataclass(frozen=True)
class BitVar:
    name: str
    role: str  # input, output, local, temp, loop-counter
    var: str | None = None
    element: tuple[int, ...] = ()
    bit: int | None = None


@dataclass(frozen=True)
class AsmLine:
    label: int
    op: str
    dst: int | None = None
    a: int | None = None
    b: int | None = None
    value: int | None = None
    target: int | None = None
    target_false: int | None = None
    block: str = ""

    @property
    def reads(self) -> tuple[int, ...]:
        if self.op in ("BAND", "BOR", "BXOR"):
            return (self.a, self.b) if self.a != self.b else (self.a,)
        if self.op in ("BCOPY", "BNOT", "BRIF"):
            return (self.a,)
        return ()

    @property
    def writes(self) -> tuple[int, ...]:
        return (self.dst,) if self.op in GATE_OPS else ()

    @property
    def accessed(self) -> tuple[int, ...]:
        return tuple(dict.fromkeys(self.reads + self.writes))


def successors(line: AsmLine) -> set[int]:
    if line.op == "GOTO":
        return {line.target}
    if line.op == "BRIF":
        return {line.target, line.target_false}
    if line.op == "HALT":
        return {line.label}
    if line.op == "IDLE":
        return {line.label, line.target}
    return {line.label + 1}


@dataclass
class Region:
    """Block skeleton node produced by the lowering.

    Leaves own a contiguous label range; composite nodes own children.
    """

    id: str
    kind: str
    children: list["Region"] = field(default_factory=list)
    first: int | None = None
    last: int | None = None
    count: int | None = None

    @property
    def is_leaf(self) -> bool:
        return self.first is not None

    def leaves(self):
        if self.is_leaf:
            yield self
        for c in self.children:
            yield from c.leaves()


@dataclass
class AsmProgram:
    lines: tuple[AsmLine, ...]
    bits: tuple[BitVar, ...]
    inputs: tuple[int, ...]
    outputs: tuple[int, ...]
    region: Region
    source: SourceProgram
    var_bits: dict[str, tuple[int, ...]]

    def line(self, label: int) -> AsmLine:
        return self.lines[label - 1]

    @property
    def halt(self) -> int:
        return len(self.lines)

    def writers(self) -> list[list[int]]:
        """Labels of lines writing each bit."""
        out: list[list[int]] = [[] for _ in self.bits]
        for ln in self.lines:
            for b in ln.writes:
                out[b].append(ln.label)
        return out

    def listing(self) -> str:
        return "\n".join(format_line(self, ln) for ln in self.lines) + "\n"


def _operand_name(prog: AsmProgram, x: int) -> str:
    return prog.bits[x].name


def format_line(prog: AsmProgram, ln: AsmLine) -> str:
    n = lambda x: _operand_name(prog, x)  # noqa: E731
    if ln.op == "BCONST":
        args = f"{n(ln.dst)}, {ln.value}"
    elif ln.op in ("BCOPY", "BNOT"):
        args = f"{n(ln.dst)}, {n(ln.a)}"
    elif ln.op in ("BAND", "BOR", "BXOR"):
        args = f"{n(ln.dst)}, {n(ln.a)}, {n(ln.b)}"
    elif ln.op == "BRIF":
        args = f"{n(ln.a)}, l{ln.target}, l{ln.target_false}"
    elif ln.op in ("GOTO", "IDLE"):
        args = f"l{ln.target}"
    else:
        args = ""
    body = f"{ln.op} {args}".rstrip()
    return f"l{ln.label}: {body} ; block={ln.block}"


# ---------------------------------------------------------------------------
# Lowering
# ---------------------------------------------------------------------------

def _elements(ty: Type) -> list[tuple[tuple[int, ...], Type]]:
    """All scalar element paths of a type, element-major."""
    if isinstance(ty, ArrayType):
        return [((k,) + path, t) for k in range(ty.length) for path, t in _elements(ty.elem)]
    return [((), ty)]


def _scalar_width(ty: Type) -> int:
    return 1 if isinstance(ty, BoolType) else ty.width


class _Lowerer:
    def __init__(self, prog: SourceProgram):
        self.prog = prog
        self.bits: list[BitVar] = []
        self.lines: list[dict] = []
        # name -> {element path -> bit list}
        self.regs: dict[str, dict[tuple[int, ...], list[int]]] = {}
        self.types: dict[str, Type] = {}
        self.counters: dict[str, int] = {}  # source name -> loop count
        self.counter_regs: dict[str, list[int]] = {}
        self.hoisted: dict[int, list[int]] = {}
        self.ntemp = itertools.count()
        self.nloop = itertools.count(1)
        self.ncond = itertools.count(1)
        self.nseq = itertools.count(1)
        self.root = Region("R", "root")
        self.stack: list[Region] = [self.root]
        self.leaf: Region | None = None

    # bits

    def new_bit(self, bv: BitVar) -> int:
        self.bits.append(bv)
        return len(self.bits) - 1

    def temp(self) -> int:
        return self.new_bit(BitVar(f"tmp_{next(self.ntemp)}", "temp"))

    def declare(self) -> None:
        for d in self.prog.decls:
            self.types[d.name] = d.type
            elems: dict[tuple[int, ...], list[int]] = {}
            for path, sty in _elements(d.type):
                suffix = "".join(f"_e{k}" for k in path)
                if isinstance(sty, BoolType):
                    elems[path] = [self.new_bit(BitVar(d.name + suffix, d.kind, d.name, path))]
                else:
                    elems[path] = [
                        self.new_bit(BitVar(f"{d.name}{suffix}_b{i}", d.kind, d.name, path, i))
                        for i in range(sty.width)
                    ]
            self.regs[d.name] = elems

    # line emission and block structure

    @property
    def next_label(self) -> int:
        return len(self.lines) + 1

    def open_leaf(self, kind: str = "seq", id: str | None = None) -> Region:
        self.close_leaf()
        if id is None:
            id = f"S{next(self.nseq)}"
        leaf = Region(id, kind)
        self.stack[-1].children.append(leaf)
        self.leaf = leaf
        return leaf

    def close_leaf(self) -> None:
        if self.leaf is not None and self.leaf.first is None:
            # nothing was emitted; drop the empty leaf
            self.stack[-1].children.remove(self.leaf)
        self.leaf = None

    def emit(self, op: str, **kw) -> dict:
        if self.leaf is None:
            self.open_leaf()
        label = self.next_label
        line = dict(label=label, op=op, block=self.leaf.id, **kw)
        self.lines.append(line)
        if self.leaf.first is None:
            self.leaf.first = label
        self.leaf.last = label
        return line

    def push(self, region: Region) -> None:
        self.close_leaf()
        self.stack[-1].children.append(region)
        self.stack.append(region)

    def pop(self) -> None:
        self.close_leaf()
        self.stack.pop()

    # gates with constant folding; ``dst`` forces the result into a given bit

    def put(self, dst: int, v: int) -> int:
        if is_const(v):
            self.emit("BCONST", dst=dst, value=const_of(v))
        elif v != dst:
            self.emit("BCOPY", dst=dst, a=v)
        return dst

    def _gate(self, op: str, a: int, b: int | None, dst: int | None) -> int:
        out = self.temp() if dst is None else dst
        self.emit(op, dst=out, a=a, b=b)
        return out

    def _fold(self, v: int, dst: int | None) -> int:
        return v if dst is None else self.put(dst, v)

    def g_not(self, a: int, dst: int | None = None) -> int:
        if is_const(a):
            return self._fold(ONE if a == ZERO else ZERO, dst)
        return self._gate("BNOT", a, None, dst)

    def g_and(self, a: int, b: int, dst: int | None = None) -> int:
        if a == ZERO or b == ZERO:
            return self._fold(ZERO, dst)
        if a == ONE:
            return self._fold(b, dst)
        if b == ONE or a == b:
            return self._fold(a, dst)
        return self._gate("BAND", a, b, dst)

    def g_or(self, a: int, b: int, dst: int | None = None) -> int:
        if a == ONE or b == ONE:
            return self._fold(ONE, dst)
        if a == ZERO:
            return self._fold(b, dst)
        if b == ZERO or a == b:
            return self._fold(a, dst)
        return self._gate("BOR", a, b, dst)

    def g_xor(self, a: int, b: int, dst: int | None = None) -> int:
        if is_const(a) and is_const(b):
            return self._fold(ONE if a != b else ZERO, dst)
        if a == ZERO:
            return self._fold(b, dst)
        if b == ZERO:
            return self._fold(a, dst)
        if a == ONE:
            return self.g_not(b, dst)
        if b == ONE:
            return self.g_not(a, dst)
        if a == b:
            return self._fold(ZERO, dst)
        return self._gate("BXOR", a, b, dst)

    def protect(self, v: int, clobbered: set[int]) -> int:
        """Copy ``v`` aside if it is about to be overwritten."""
        if v in clobbered:
            return self.put(self.temp(), v)
        return v

    # arithmetic circuits

    def adder(self, x: list[int], y: list[int], width: int, dst: list[int] | None) -> list[int]:
        """Ripple-carry adder modulo 2**width; sums land in ``dst`` when given."""
        clobbered = set(dst or ())
        out: list[int] = []
        carry = ZERO
        for i in range(width):
            xi = x[i] if i < len(x) else ZERO
            yi = y[i] if i < len(y) else ZERO
            di = dst[i] if dst is not None else None
            if i == 0:
                carry = self.protect(self.g_and(xi, yi), clobbered)
                out.append(self.g_xor(xi, yi, di))
            else:
                half = self.g_xor(xi, yi)
                both = self.g_and(xi, yi)
                prop = self.g_and(half, carry)
                new_carry = self.protect(self.g_or(both, prop), clobbered)
                out.append(self.g_xor(half, carry, di))
                carry = new_carry
        return out

    def less_than(self, a: list[int], b: list[int], dst: int | None) -> int:
        """Most-significant-bit-first comparator for ``a < b``."""
        width = max(len(a), len(b))
        lt, eq = ZERO, ONE
        for i in reversed(range(width)):
            ai = a[i] if i < len(a) else ZERO
            bi = b[i] if i < len(b) else ZERO
            d = self.g_xor(ai, bi)
            t = self.g_and(d, bi)
            if i == 0:
                t = self.g_and(t, eq, dst if lt == ZERO else None)
                return self.g_or(lt, t, dst)
            t = self.g_and(t, eq)
            lt = self.g_or(lt, t)
            eq = self.g_and(eq, self.g_not(d))
        raise AssertionError("empty comparison")

    def equal(self, a: list[int], b: list[int], dst: int | None, negate: bool = False) -> int:
        width = max(len(a), len(b))
        diffs = [
            self.g_xor(a[i] if i < len(a) else ZERO, b[i] if i < len(b) else ZERO)
            for i in range(width)
        ]
        any_diff = diffs[0]
        for k, d in enumerate(diffs[1:], start=1):
            last = k == len(diffs) - 1
            any_diff = self.g_or(any_diff, d, dst if (negate and last) else None)
        if negate:
            return self._fold(any_diff, dst) if dst is not None and any_diff != dst else any_diff
        return self.g_not(any_diff, dst)

    def guard(self, index_regs: list[list[int]], ks: tuple[int, ...]) -> int:
        """Bit that is one exactly when every index register equals its constant."""
        g = ONE
        for reg, k in zip(index_regs, ks):
            for i, bit in enumerate(reg):
                lit = bit if (k >> i) & 1 else self.g_not(bit)
                g = self.g_and(g, lit)
        return g

    # expressions

    def etype(self, e: Expr):
        return expr_type(self.prog, e, self.counters)

    def value(self, e: Expr, width: int | None = None, dst: list[int] | None = None) -> list[int]:
        """Bits of ``e`` (LSB first); bool expressions give a single bit."""
        if isinstance(e, Const):
            if isinstance(e.value, bool):
                v = [ONE if e.value else ZERO]
            else:
                n = width or max(1, e.value.bit_length())
                v = [ONE if (e.value >> i) & 1 else ZERO for i in range(n)]
            return self._into(v, dst)
        if isinstance(e, Var):
            if e.name in self.counter_regs:
                return self._into(list(self.counter_regs[e.name]), dst)
            return self._into(list(self.regs[e.name][()]), dst)
        if isinstance(e, Index):
            if id(e) in self.hoisted:
                return self._into(list(self.hoisted[id(e)]), dst)
            name, path = self.static_path(e)
            return self._into(list(self.regs[name][path]), dst)
        if isinstance(e, Unary):
            (a,) = self.value(e.operand)
            return [self.g_not(a, dst[0] if dst else None)]
        assert isinstance(e, Binary)
        d0 = dst[0] if dst else None
        if e.op in ("&", "|", "^"):
            (a,) = self.value(e.left)
            (b,) = self.value(e.right)
            gate = {"&": self.g_and, "|": self.g_or, "^": self.g_xor}[e.op]
            return [gate(a, b, d0)]
        if e.op == "+":
            ty = self.etype(e)
            w = ty.width if isinstance(ty, UIntType) else max(1, ty.value.bit_length())
            if dst:
                w = len(dst)  # sum modulo the target width; a wider target keeps the carry
            x = self.value(e.left, w)
            y = self.value(e.right, w)
            return self.adder(x, y, w, dst)
        lt, rt = self.etype(e.left), self.etype(e.right)
        if isinstance(lt, BoolType):
            (a,) = self.value(e.left)
            (b,) = self.value(e.right)
            if e.op == "==":
                return [self.g_not(self.g_xor(a, b), d0)]
            return [self.g_xor(a, b, d0)]
        w = max(_width(lt), _width(rt))
        a = self.value(e.left, w)
        b = self.value(e.right, w)
        if e.op == "<":
            return [self.less_than(a, b, d0)]
        if e.op == ">":
            return [self.less_than(b, a, d0)]
        if e.op == "<=":
            return [self.g_not(self.less_than(b, a, None), d0)]
        if e.op == ">=":
            return [self.g_not(self.less_than(a, b, None), d0)]
        if e.op == "==":
            return [self.equal(a, b, d0)]
        return [self.equal(a, b, d0, negate=True)]

    def _into(self, v: list[int], dst: list[int] | None) -> list[int]:
        if dst is None:
            return v
        for i, d in enumerate(dst):
            self.put(d, v[i] if i < len(v) else ZERO)
        return list(dst)

    def static_path(self, e: Index) -> tuple[str, tuple[int, ...]]:
        chain: list[Expr] = []
        base: Expr = e
        while isinstance(base, Index):
            chain.append(base.index)
            base = base.base
        path = tuple(ix.value for ix in reversed(chain))
        return base.name, path

    # runtime-indexed accesses

    def access_parts(self, e: Index):
        """Split an access chain into (array name, index list, array type)."""
        chain: list[Expr] = []
        base: Expr = e
        while isinstance(base, Index):
            chain.append(base.index)
            base = base.base
        return base.name, list(reversed(chain)), self.types[base.name]

    def is_runtime(self, e: Index) -> bool:
        _, idxs, _ = self.access_parts(e)
        return any(not isinstance(ix, Const) for ix in idxs)

    def index_register(self, ix: Expr) -> list[int]:
        """Bits holding a runtime index; complex expressions get a temp register."""
        if isinstance(ix, Var):
            return self.value(ix)
        if isinstance(ix, Index) and id(ix) in self.hoisted:
            return self.hoisted[id(ix)]
        # copy anything that is not already a private temp, so a store cannot
        # change its own index midway
        v = self.value(ix)
        return [b if not is_const(b) and self.bits[b].role == "temp" else self.put(self.temp(), b)
                for b in v]

    def candidates(self, e: Index):
        """(element path, guard-index constants) pairs reachable by ``e``."""
        name, idxs, ty = self.access_parts(e)
        regs: list[list[int]] = []
        dims: list[list[int]] = []
        runtime_pos: list[int] = []
        for pos, ix in enumerate(idxs):
            assert isinstance(ty, ArrayType)
            if isinstance(ix, Const):
                dims.append([ix.value])
            else:
                reg = self.index_register(ix)
                regs.append(reg)
                runtime_pos.append(pos)
                dims.append([k for k in range(ty.length) if k < (1 << len(reg))])
            ty = ty.elem
        out = []
        for path in itertools.product(*dims):
            ks = tuple(path[p] for p in runtime_pos)
            out.append((path, ks))
        return name, regs, out, ty

    def hoist(self, e: Expr) -> None:
        """Evaluate every runtime-indexed read inside ``e`` into a temp register."""
        if isinstance(e, Index):
            _, idxs, _ = self.access_parts(e)
            for ix in idxs:
                self.hoist(ix)
            if self.is_runtime(e):
                self.select(e)
        elif isinstance(e, Unary):
            self.hoist(e.operand)
        elif isinstance(e, Binary):
            self.hoist(e.left)
            self.hoist(e.right)

    def select(self, e: Index) -> None:
        name, regs, cands, elem_ty = self.candidates(e)
        width = _scalar_width(elem_ty)
        result = [self.temp() for _ in range(width)]
        first = True
        for path, ks in cands:
            self.open_leaf()
            g = self.guard(regs, ks)
            src = self.regs[name][path]
            for i in range(width):
                if first:
                    self.g_and(g, src[i], result[i])
                else:
                    t = self.g_and(g, src[i])
                    self.g_or(result[i], t, result[i])
            first = False
            self.close_leaf()
        if first:
            for r in result:
                self.put(r, ZERO)
        self.hoisted[id(e)] = result

    # statements

    def stmts(self, stmts: tuple[Stmt, ...]) -> None:
        for s in stmts:
            self.stmt(s)

    def stmt(self, s: Stmt) -> None:
        if isinstance(s, Assign):
            self.assign(s)
        elif isinstance(s, If):
            self.cond(s)
        elif isinstance(s, For):
            self.loop(s)
        else:
            self.emit("HALT")
            self.close_leaf()

    def assign(self, s: Assign) -> None:
        target = s.target
        self.hoist(s.expr)
        if isinstance(target, Index):
            _, idxs, _ = self.access_parts(target)
            for ix in idxs:
                self.hoist(ix)
        if isinstance(target, Index) and self.is_runtime(target):
            self.indexed_store(target, s.expr)
            return
        if isinstance(target, Index):
            name, path = self.static_path(target)
        else:
            name, path = target.name, ()
        dst = self.regs[name][path]
        self.value(s.expr, len(dst), dst)

    def indexed_store(self, target: Index, expr: Expr) -> None:
        name, regs, cands, elem_ty = self.candidates(target)
        width = _scalar_width(elem_ty)
        v = self.value(expr, width)
        v = v + [ZERO] * (width - len(v))
        # the stored value must not change while elements are updated
        touched = {b for path, _ in cands for b in self.regs[name][path]}
        v = [self.protect(b, touched) for b in v]
        for path, ks in cands:
            self.open_leaf()
            g = self.guard(regs, ks)
            cell = self.regs[name][path]
            for i in range(width):
                diff = self.g_xor(cell[i], v[i])
                masked = self.g_and(diff, g)
                self.g_xor(cell[i], masked, cell[i])
            self.close_leaf()

    def cond(self, s: If) -> None:
        self.hoist(s.cond)
        n = next(self.ncond)
        node = Region(f"I{n}", "cond")
        self.push(node)
        self.open_leaf("cond-eval", f"I{n}.eval")
        (c,) = self.value(s.cond)
        if is_const(c):
            c = self.put(self.temp(), c)
        brif = self.emit("BRIF", a=c)
        self.close_leaf()

        idles = []
        for side, body in (("then", s.then), ("else", s.orelse or ())):
            branch = Region(f"I{n}.{side}", f"{side}-branch")
            self.push(branch)
            entry = self.next_label
            self.stmts(body)
            self.open_leaf("flow", f"I{n}.{side}.flow")
            idles.append(self.emit("IDLE"))
            self.pop()
            brif["target" if side == "then" else "target_false"] = entry
        self.pop()
        exit_label = self.next_label
        for idle in idles:
            idle["target"] = exit_label

    def loop(self, s: For) -> None:
        n = next(self.nloop)
        count = s.count
        width = counter_width(count)
        reg = [
            self.new_bit(BitVar(f"{s.var}_L{n}_b{i}", "loop-counter", s.var, (), i))
            for i in range(width)
        ]
        node = Region(f"F{n}", "loop", count=count)
        self.push(node)
        self.open_leaf("loop-init", f"F{n}.init")
        for b in reg:
            self.emit("BCONST", dst=b, value=0)
        self.close_leaf()

        self.counters[s.var] = count
        self.counter_regs[s.var] = reg
        body = Region(f"F{n}.body", "loop-body")
        self.push(body)
        body_entry = self.next_label
        self.stmts(s.body)
        self.pop()
        if not body.children:
            node.children.remove(body)
        del self.counters[s.var]
        del self.counter_regs[s.var]

        self.open_leaf("loop-step", f"F{n}.step")
        self.adder(reg, [ONE], width, reg)
        limit = [ONE if (count >> i) & 1 else ZERO for i in range(width)]
        done = self.equal(reg, limit, None)
        if is_const(done):
            done = self.put(self.temp(), done)
        brif = self.emit("BRIF", a=done, target_false=body_entry)
        self.close_leaf()
        self.pop()
        brif["target"] = self.next_label

    def run(self) -> AsmProgram:
        self.declare()
        self.stmts(self.prog.stmts)
        self.close_leaf()
        lines = tuple(AsmLine(**ln) for ln in self.lines)
        inputs: list[int] = []
        outputs: list[int] = []
        var_bits: dict[str, tuple[int, ...]] = {}
        for d in self.prog.decls:
            flat = tuple(b for path, _ in _elements(d.type) for b in self.regs[d.name][path])
            var_bits[d.name] = flat
            if d.kind == "input":
                inputs.extend(flat)
            elif d.kind == "output":
                outputs.extend(flat)
        return AsmProgram(
            lines=lines,
            bits=tuple(self.bits),
            inputs=tuple(inputs),
            outputs=tuple(outputs),
            region=self.root,
            source=self.prog,
            var_bits=var_bits,
        )


def _width(ty) -> int:
    if isinstance(ty, UIntType):
        return ty.width
    return max(1, ty.value.bit_length())


def lower(program: SourceProgram) -> AsmProgram:
    if not program.resolved:
        raise ValueError("lower() needs a resolved program")
    return _Lowerer(program).run()


def io_layout(program: AsmProgram) -> tuple[list[str], list[str]]:
    """Names of the input and output bits in their canonical order."""
    return (
        [program.bits[b].name for b in program.inputs],
        [program.bits[b].name for b in program.outputs],
    )
