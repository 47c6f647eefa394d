"""Reference interpreter, witness construction and exact feasibility checking.

The interpreter is written independently of the LP generator: it only knows
Asm semantics and, for barrier execution, the local time bound of each flow
block.  That keeps it a useful oracle for both the schedule and the rows.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .asmgen import AsmProgram
from .errors import ExecutionError, WitnessError
from .intervals import eti, iter_tuples
from .lpgen import EQ, GE, LE, REL_TEXT, LpModel
from .sbtree import SBNode


@dataclass
class Trace:
    semantics: str
    lines: np.ndarray  # label active at step t is lines[t-1]
    snapshots: np.ndarray  # (tb+1, nbits) uint8; row t-1 holds values at the start of step t
    halt_step: int  # first step at which HALT is active
    program: AsmProgram = field(repr=False)

    @property
    def tb(self) -> int:
        return len(self.lines)

    @property
    def final(self) -> np.ndarray:
        return self.snapshots[-1]

    @property
    def outputs(self) -> tuple[int, ...]:
        return tuple(int(self.final[b]) for b in self.program.outputs)

    def value(self, name: str):
        """Integer (or nested list) value of a declared variable after the run."""
        return decode_var(self.program, name, self.final)

    def steps_at(self, op: str) -> int:
        ops = np.array([ln.op == op for ln in self.program.lines])
        return int(ops[self.lines - 1].sum())


def run(
    program: AsmProgram,
    tree: SBNode | None,
    inputs: Sequence[int],
    semantics: str = "plain",
    tb: int | None = None,
) -> Trace:
    """Execute ``program`` for exactly ``tb`` steps.

    ``plain``: every line takes one step and IDLE jumps straight to its exit.
    ``barrier``: an IDLE line holds control until its flow block's local time
    bound has elapsed, then exits.  ``tb`` defaults to the tree's bound.
    """
    if semantics not in ("plain", "barrier"):
        raise ValueError(f"unknown semantics {semantics!r}")
    if len(inputs) != len(program.inputs):
        raise ValueError(f"expected {len(program.inputs)} input bits, got {len(inputs)}")
    if tb is None:
        if tree is None:
            raise ValueError("need a tree or an explicit step count")
        tb = tree.tb
    if semantics == "barrier" and tree is None:
        raise ValueError("barrier semantics needs the SB-tree")
    hold: dict[int, int] = {}
    if tree is not None:
        for leaf in tree.leaves():
            if leaf.kind == "flow":
                hold[leaf.first] = leaf.tb

    state = bytearray(len(program.bits))
    for b, v in zip(program.inputs, inputs):
        if v not in (0, 1):
            raise ValueError("input bits must be 0 or 1")
        state[b] = v
    snaps = bytearray()
    lines = np.zeros(tb, dtype=np.int64)
    code = [(ln.op, ln.dst, ln.a, ln.b, ln.value, ln.target, ln.target_false) for ln in program.lines]
    halt_step = 0
    pc = 1
    entered = 1  # step at which the current line was entered
    for t in range(1, tb + 1):
        snaps += state
        lines[t - 1] = pc
        op, dst, a, b, value, target, target_false = code[pc - 1]
        nxt = pc + 1
        if op == "BAND":
            state[dst] = state[a] & state[b]
        elif op == "BXOR":
            state[dst] = state[a] ^ state[b]
        elif op == "BOR":
            state[dst] = state[a] | state[b]
        elif op == "BNOT":
            state[dst] = 1 - state[a]
        elif op == "BCOPY":
            state[dst] = state[a]
        elif op == "BCONST":
            state[dst] = value
        elif op == "BRIF":
            nxt = target if state[a] else target_false
        elif op == "GOTO":
            nxt = target
        elif op == "IDLE":
            if semantics == "barrier" and t - entered + 1 < hold[pc]:
                nxt = pc
            else:
                nxt = target
        elif op == "HALT":
            if not halt_step:
                halt_step = t
            nxt = pc
        if nxt != pc:
            entered = t + 1
        pc = nxt
    snaps += state
    if not halt_step:
        raise ExecutionError(f"program did not halt within {tb} steps")
    snap = np.frombuffer(bytes(snaps), dtype=np.uint8).reshape(tb + 1, len(program.bits))
    return Trace(semantics, lines, snap, halt_step, program)


# ---------------------------------------------------------------------------
# Input/output encoding
# ---------------------------------------------------------------------------

def _flatten(value) -> list[int]:
    if isinstance(value, (list, tuple)):
        return [x for v in value for x in _flatten(v)]
    return [int(value)]


def encode_inputs(program: AsmProgram, values: Mapping[str, object]) -> list[int]:
    """Input bit vector from per-variable integers (nested lists for arrays)."""
    bits: list[int] = []
    for d in program.source.decls:
        if d.kind != "input":
            continue
        flat = _flatten(values[d.name])
        vbits = program.var_bits[d.name]
        per = len(vbits) // len(flat)
        if per * len(flat) != len(vbits):
            raise ValueError(f"wrong number of elements for {d.name}")
        for x in flat:
            if not 0 <= x < (1 << per):
                raise ValueError(f"value {x} does not fit {per} bits of {d.name}")
            bits.extend((x >> i) & 1 for i in range(per))
    return bits


def decode_var(program: AsmProgram, name: str, state: np.ndarray):
    from .frontend import ArrayType, BoolType

    decl = program.source.decl(name)
    bits = [int(state[b]) for b in program.var_bits[name]]

    def scalar(ty, chunk):
        if isinstance(ty, BoolType):
            return chunk[0]
        return sum(v << i for i, v in enumerate(chunk))

    def size(ty) -> int:
        if isinstance(ty, ArrayType):
            return ty.length * size(ty.elem)
        return 1 if isinstance(ty, BoolType) else ty.width

    def build(ty, chunk):
        if isinstance(ty, ArrayType):
            n = size(ty.elem)
            return [build(ty.elem, chunk[k * n : (k + 1) * n]) for k in range(ty.length)]
        return scalar(ty, chunk)

    return build(decl.type, bits)


def parse_bits(text: str) -> list[int]:
    text = text.strip()
    if not text or set(text) - {"0", "1"}:
        raise ValueError(f"not a bit string: {text!r}")
    return [int(c) for c in text]


# ---------------------------------------------------------------------------
# Witness and exact checking
# ---------------------------------------------------------------------------

@dataclass
class Witness:
    values: np.ndarray  # int8 per model column

    def mutate(self, index: int) -> "Witness":
        """Copy with one entry flipped; used to confirm the checker notices."""
        v = self.values.copy()
        v[index] = 1 - v[index]
        return Witness(v)


def make_witness(trace: Trace, model: LpModel) -> Witness:
    lay = model.layout
    expected = "plain" if model.mode == "uo" else "barrier"
    if trace.semantics != expected:
        raise WitnessError(f"{model.mode} model needs a {expected} trace, got {trace.semantics}")
    if trace.tb != model.tb:
        raise WitnessError(f"trace has {trace.tb} steps but the model has {model.tb}")
    x = np.zeros(model.ncols, dtype=np.int8)
    steps = np.arange(1, trace.tb + 1)
    for label in np.unique(trace.lines):
        at = steps[trace.lines == label]
        pos = np.searchsorted(lay.ctrl_times[label - 1], at)
        ok = pos < len(lay.ctrl_times[label - 1])
        ok[ok] = lay.ctrl_times[label - 1][pos[ok]] == at[ok]
        if not ok.all():
            t = int(at[~ok][0])
            raise WitnessError(f"trace visits line {label} at step {t}, which has no controller")
        x[lay.ctrl_base[label - 1] + pos] = 1
    for b, times in enumerate(lay.ver_times):
        # a version at step t holds the value at the start of step t
        x[lay.ver_base[b] : lay.ver_base[b + 1]] = trace.snapshots[times - 1, b]
    return Witness(x)


@dataclass
class Report:
    feasible: bool
    violations: list[dict]
    nviolations: int
    objective: int
    checked_rows: int

    def to_json(self) -> str:
        return json.dumps(
            {"feasible": self.feasible, "violations": self.violations, "objective": self.objective}
        )

    def text(self) -> str:
        head = "feasible" if self.feasible else f"infeasible: {self.nviolations} violated rows/bounds"
        out = [f"{head} (rows={self.checked_rows}, objective={self.objective})"]
        for v in self.violations:
            out.append(f"  {v['row']}: lhs={v['lhs']} {v['rel']} {v['rhs']}")
        return "\n".join(out) + "\n"


def check_feasible(model: LpModel, witness: Witness, limit: int = 10) -> Report:
    """Evaluate every row and bound in exact integer arithmetic."""
    x = witness.values.astype(np.int64)
    if x.shape != (model.ncols,):
        raise ValueError("witness does not match the model's columns")
    rows = model.rows
    lhs = np.zeros(model.nrows, dtype=np.int64)
    # evaluate in slices of rows to bound the temporary memory
    step = 1 << 21
    for r0 in range(0, model.nrows, step):
        r1 = min(model.nrows, r0 + step)
        a, b = model.indptr[r0], model.indptr[r1]
        prod = rows.coefs[a:b].astype(np.int64) * x[rows.indices[a:b]]
        lengths = rows.lengths[r0:r1]
        nonempty = lengths > 0
        if prod.size:
            lhs[r0:r1][nonempty] = np.add.reduceat(prod, (model.indptr[r0:r1] - a)[nonempty])
    rhs = rows.rhs.astype(np.int64)
    rel = rows.rel
    bad = ((rel == LE) & (lhs > rhs)) | ((rel == GE) & (lhs < rhs)) | ((rel == EQ) & (lhs != rhs))
    bad_rows = np.flatnonzero(bad)
    violations = [
        {"row": f"R{k + 1}", "lhs": int(lhs[k]), "rel": REL_TEXT[int(rel[k])], "rhs": int(rhs[k])}
        for k in bad_rows[:limit].tolist()
    ]
    bad_bounds = np.flatnonzero((x < model.lo) | (x > model.hi))
    for i in bad_bounds[: max(0, limit - len(violations))].tolist():
        violations.append(
            {"row": f"bound:{model.var_name(i)}", "lhs": int(x[i]), "rel": "in", "rhs": [int(model.lo[i]), int(model.hi[i])]}
        )
    n = len(bad_rows) + len(bad_bounds)
    objective = int((model.obj_coef * x[model.obj_idx]).sum()) if model.obj_idx.size else 0
    return Report(n == 0, violations, n, objective, model.nrows)


def witness_for(model: LpModel, tree: SBNode, inputs: Sequence[int]) -> tuple[Trace, Witness]:
    semantics = "plain" if model.mode == "uo" else "barrier"
    trace = run(model.program, tree, inputs, semantics, tb=model.tb)
    return trace, make_witness(trace, model)


# ---------------------------------------------------------------------------
# Brute-force oracles
# ---------------------------------------------------------------------------

def brute_mst(weights: Sequence[Sequence[int]]) -> int:
    """Minimum spanning tree weight by enumerating all (n-1)-edge subsets."""
    n = len(weights)
    if n > 6:
        raise ValueError("brute_mst enumerates edge subsets; keep n <= 6")
    if n <= 1:
        return 0
    edges = [(weights[i][j], i, j) for i in range(n) for j in range(i + 1, n)]
    best = None
    for subset in itertools.combinations(edges, n - 1):
        parent = list(range(n))

        def root(v):
            while parent[v] != v:
                parent[v] = parent[parent[v]]
                v = parent[v]
            return v

        ok = True
        for _, i, j in subset:
            ri, rj = root(i), root(j)
            if ri == rj:
                ok = False
                break
            parent[ri] = rj
        if ok:
            total = sum(w for w, _, _ in subset)
            best = total if best is None else min(best, total)
    if best is None:
        raise ValueError("graph is disconnected")
    return best


def greedy_makespan(weights: Sequence[int], machines: int = 3) -> int:
    """Least-loaded list scheduling, ties to the lowest machine index."""
    load = [0] * machines
    for w in weights:
        k = min(range(machines), key=lambda i: (load[i], i))
        load[k] += w
    return max(load)


def brute_union(blocks: Iterable[SBNode], horizon: int) -> list[tuple[int, int]]:
    """Maximal runs of steps covered by some block's interval, by direct scan."""
    member = np.zeros(horizon + 2, dtype=bool)
    for b in blocks:
        limits = tuple(a.max_iter for a in b.loop_ancestors())
        for J in iter_tuples(limits):
            iv = eti(b, J)
            member[iv.start + 1 : iv.end + 1] = True
    runs = []
    t = 1
    while t <= horizon:
        if member[t]:
            s = t
            while t <= horizon and member[t]:
                t += 1
            runs.append((s - 1, t - 1))
        else:
            t += 1
    return runs


def gate_value(op: str, a: int = 0, b: int = 0, value: int = 0) -> int:
    return {
        "BAND": lambda: a & b,
        "BOR": lambda: a | b,
        "BXOR": lambda: a ^ b,
        "BNOT": lambda: 1 - a,
        "BCOPY": lambda: a,
        "BCONST": lambda: value,
    }[op]()


MutationHook = Callable[[Witness], Witness]
