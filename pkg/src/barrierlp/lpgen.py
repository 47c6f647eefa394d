"""LP generation for the time-unrolled (UO) and barrier-scheduled (HSB) encodings.

Variables are controllers ``S(l, t)`` (line ``l`` active at step ``t``) and
bit versions ``v(b, t)`` (value of bit ``b`` at the beginning of step ``t``).
A line active at step ``t`` reads versions at ``t`` and writes version
``t + 1``.

Rows are produced family by family as numpy blocks, vectorised over time, and
stored in CSR form.  Coefficients and right-hand sides are small integers.
"""

from __future__ import annotations

import io
import json
from array import array
from dataclasses import dataclass, field, replace
from typing import BinaryIO, Sequence, TextIO

import numpy as np

from .asmgen import AsmLine, AsmProgram
from .errors import ConstructionError
from .intervals import etig, uetig
from .sbtree import SBNode, custom_tb_override, leaf_of_line

LE, EQ, GE = -1, 0, 1
IDX = np.int32  # column indices; models stay far below 2**31 columns
REL_TEXT = {LE: "<=", EQ: "=", GE: ">="}
FAMILIES = ("init", "sum", "flow", "flow-upper", "update", "carry", "bridge")


# ---------------------------------------------------------------------------
# Row blocks
# ---------------------------------------------------------------------------

@dataclass
class RowBlock:
    """A batch of rows in CSR-like form."""

    lengths: np.ndarray  # int32 per row
    indices: np.ndarray  # int32 per nonzero
    coefs: np.ndarray  # int8 per nonzero
    rel: np.ndarray  # int8 per row
    rhs: np.ndarray  # int8 per row

    @property
    def nrows(self) -> int:
        return len(self.lengths)

    @property
    def nnz(self) -> int:
        return len(self.indices)

    @staticmethod
    def empty() -> "RowBlock":
        z = np.zeros(0, dtype=IDX)
        b = np.zeros(0, dtype=np.int8)
        return RowBlock(z, z, b, b, b)

    @staticmethod
    def dense(idx: np.ndarray, coef: np.ndarray, rel, rhs) -> "RowBlock":
        """Rows from ``(n, k)`` index/coefficient arrays; zero coefficients are dropped.

        Entries with the same variable inside one row must already be merged.
        """
        idx = np.asarray(idx)
        coef = np.broadcast_to(np.asarray(coef, dtype=np.int8), idx.shape)
        n = idx.shape[0]
        keep = coef != 0
        return RowBlock(
            keep.sum(axis=1).astype(IDX),
            idx[keep].astype(IDX),
            coef[keep],
            np.broadcast_to(np.asarray(rel, dtype=np.int8), (n,)).copy(),
            np.broadcast_to(np.asarray(rhs, dtype=np.int8), (n,)).copy(),
        )

    @staticmethod
    def concat(blocks: Sequence["RowBlock"]) -> "RowBlock":
        blocks = [b for b in blocks if b.nrows]
        if not blocks:
            return RowBlock.empty()
        return RowBlock(
            np.concatenate([b.lengths for b in blocks]),
            np.concatenate([b.indices for b in blocks]),
            np.concatenate([b.coefs for b in blocks]),
            np.concatenate([b.rel for b in blocks]),
            np.concatenate([b.rhs for b in blocks]),
        )

    @staticmethod
    def interleave(blocks: Sequence["RowBlock"]) -> "RowBlock":
        """Merge equally long blocks so that row i of every block stays together."""
        n = blocks[0].nrows
        if any(b.nrows != n for b in blocks):
            raise ValueError("interleaved blocks differ in length")
        if len(blocks) == 1:
            return blocks[0]
        lengths = np.stack([b.lengths for b in blocks], axis=1).ravel()
        # position of each block's row inside the merged order
        starts = [np.concatenate([[0], np.cumsum(b.lengths, dtype=np.int64)[:-1]]) for b in blocks]
        total = lengths.sum()
        indices = np.empty(total, dtype=IDX)
        coefs = np.empty(total, dtype=np.int8)
        out_start = np.concatenate([[0], np.cumsum(lengths, dtype=np.int64)[:-1]]).reshape(n, len(blocks))
        for k, b in enumerate(blocks):
            if b.nnz == 0:
                continue
            row_of = np.repeat(np.arange(n), b.lengths)
            within = np.arange(b.nnz) - starts[k][row_of]
            dest = out_start[row_of, k] + within
            indices[dest] = b.indices
            coefs[dest] = b.coefs
        return RowBlock(
            lengths,
            indices,
            coefs,
            np.stack([b.rel for b in blocks], axis=1).ravel(),
            np.stack([b.rhs for b in blocks], axis=1).ravel(),
        )


# ---------------------------------------------------------------------------
# Variable layout
# ---------------------------------------------------------------------------

def _find(times: np.ndarray, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Positions of ``t`` in the sorted array ``times`` and an existence mask."""
    pos = np.searchsorted(times, t)
    ok = pos < len(times)
    ok[ok] = times[pos[ok]] == t[ok]
    return pos, ok


@dataclass
class Layout:
    """Which controllers and versions exist, and their variable indices."""

    mode: str
    tb: int
    ctrl_times: list[np.ndarray]  # per line, sorted steps
    ver_times: list[np.ndarray]  # per bit, sorted version steps
    single: np.ndarray  # bool per bit: one version serves every step
    idle_end: dict[int, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.ctrl_base = np.concatenate([[0], np.cumsum([len(t) for t in self.ctrl_times])]).astype(np.int64)
        self.nctrl = int(self.ctrl_base[-1])
        self.ver_base = self.nctrl + np.concatenate(
            [[0], np.cumsum([len(t) for t in self.ver_times])]
        ).astype(np.int64)
        self.ncols = int(self.ver_base[-1])

    def ctrl(self, label: int, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        pos, ok = _find(self.ctrl_times[label - 1], t)
        return self.ctrl_base[label - 1] + pos, ok

    def version(self, bit: int, t: np.ndarray, what: str = "") -> np.ndarray:
        t = np.asarray(t, dtype=np.int64)
        if self.single[bit]:
            return np.full(t.shape, self.ver_base[bit], dtype=np.int64)
        pos, ok = _find(self.ver_times[bit], t)
        if not ok.all():
            bad = int(t[~ok][0])
            raise ConstructionError(f"bit {bit} has no version at step {bad} {what}".rstrip())
        return self.ver_base[bit] + pos

    def first_version(self, bit: int) -> int:
        return int(self.ver_base[bit])

    def last_version(self, bit: int) -> int:
        return int(self.ver_base[bit + 1] - 1)


def _accessing_leaves(program: AsmProgram, tree: SBNode) -> list[list[SBNode]]:
    owner = leaf_of_line(tree)
    out: list[dict[str, SBNode]] = [dict() for _ in program.bits]
    for ln in program.lines:
        leaf = owner[ln.label]
        for b in ln.accessed:
            out[b][leaf.id] = leaf
    return [list(d.values()) for d in out]


def uo_layout(program: AsmProgram, tb: int) -> Layout:
    steps = np.arange(1, tb + 1, dtype=np.int64)
    versions = np.arange(1, tb + 2, dtype=np.int64)
    return Layout(
        "uo",
        tb,
        [steps] * len(program.lines),
        [versions] * len(program.bits),
        np.zeros(len(program.bits), dtype=bool),
    )


def hsb_layout(program: AsmProgram, tree: SBNode) -> Layout:
    tb = tree.tb
    ctrl_times: list[np.ndarray] = [None] * len(program.lines)
    idle_end: dict[int, np.ndarray] = {}
    for leaf in tree.leaves():
        ivs = list(etig(leaf))
        starts = np.array([iv.start for iv in ivs], dtype=np.int64)
        if leaf.kind == "flow":
            # the idle line may hold control through the whole interval
            times = np.concatenate([np.arange(iv.start + 1, iv.end + 1) for iv in ivs])
            ctrl_times[leaf.first - 1] = times.astype(np.int64)
            idle_end[leaf.first] = np.repeat([iv.end for iv in ivs], leaf.tb).astype(np.int64)
        else:
            # sequential collapsing: each line runs at a fixed offset
            for off, label in enumerate(leaf.lines):
                ctrl_times[label - 1] = starts + off + 1
    writers = program.writers()
    leaves = _accessing_leaves(program, tree)
    ver_times = []
    single = np.zeros(len(program.bits), dtype=bool)
    for b in range(len(program.bits)):
        if not writers[b]:
            single[b] = True
            ver_times.append(np.array([1], dtype=np.int64))
            continue
        ivs = list(uetig(leaves[b], tb))
        parts = [np.arange(iv.start + 1, iv.end + 2, dtype=np.int64) for iv in ivs]
        ver_times.append(np.unique(np.concatenate(parts)))
    return Layout("hsb", tb, ctrl_times, ver_times, single, idle_end)


# ---------------------------------------------------------------------------
# Model
# ---------------------------------------------------------------------------

@dataclass
class LpModel:
    mode: str
    tb: int
    program: AsmProgram
    layout: Layout
    rows: RowBlock
    family: np.ndarray  # uint8 index into FAMILIES per row
    lo: np.ndarray  # int8 per column
    hi: np.ndarray  # int8 per column
    obj_idx: np.ndarray
    obj_coef: np.ndarray
    sense: str = "max"

    def __post_init__(self):
        self.indptr = np.zeros(self.rows.nrows + 1, dtype=np.int64)
        np.cumsum(self.rows.lengths, out=self.indptr[1:])

    @property
    def nrows(self) -> int:
        return self.rows.nrows

    @property
    def ncols(self) -> int:
        return self.layout.ncols

    @property
    def nnz(self) -> int:
        return self.rows.nnz

    def var_name(self, i: int) -> str:
        lay = self.layout
        if i < lay.nctrl:
            line = int(np.searchsorted(lay.ctrl_base, i, side="right"))
            t = lay.ctrl_times[line - 1][i - lay.ctrl_base[line - 1]]
            return f"s_l{line}_t{t}"
        bit = int(np.searchsorted(lay.ver_base, i, side="right")) - 1
        t = lay.ver_times[bit][i - lay.ver_base[bit]]
        return f"v_{self.program.bits[bit].name}_t{t}"

    def var_names(self) -> list[str]:
        lay = self.layout
        names = []
        for label, times in enumerate(lay.ctrl_times, start=1):
            names.extend(f"s_l{label}_t{t}" for t in times.tolist())
        for bit, times in enumerate(lay.ver_times):
            n = self.program.bits[bit].name
            names.extend(f"v_{n}_t{t}" for t in times.tolist())
        return names

    def row(self, k: int) -> tuple[list[int], list[int], int, int]:
        a, b = self.indptr[k], self.indptr[k + 1]
        return (
            self.rows.indices[a:b].tolist(),
            self.rows.coefs[a:b].tolist(),
            int(self.rows.rel[k]),
            int(self.rows.rhs[k]),
        )

    def output_vars(self) -> list[int]:
        return [self.layout.last_version(b) for b in self.program.outputs]

    def input_vars(self) -> list[int]:
        return [self.layout.first_version(b) for b in self.program.inputs]

    def stats(self) -> dict:
        return {"rows": self.nrows, "cols": self.ncols, "nonzeros": self.nnz, "tb": self.tb, "mode": self.mode}


def stats(model: LpModel) -> dict:
    return model.stats()


def stats_json(s: dict) -> str:
    return json.dumps(s, sort_keys=False)


# ---------------------------------------------------------------------------
# Constraint families
# ---------------------------------------------------------------------------

# Gated gate rows over symbols y (dst at t+1), a, b (operands at t), S.
# Each entry: (coefficients, relation, right-hand side) with g = 1 - S folded in.
GATE_ROWS = {
    "BAND": [
        ({"y": 1, "a": -1, "S": 1}, LE, 1),
        ({"y": 1, "b": -1, "S": 1}, LE, 1),
        ({"y": 1, "a": -1, "b": -1, "S": -1}, GE, -2),
    ],
    "BOR": [
        ({"y": 1, "a": -1, "S": -1}, GE, -1),
        ({"y": 1, "b": -1, "S": -1}, GE, -1),
        ({"y": 1, "a": -1, "b": -1, "S": 1}, LE, 1),
    ],
    "BNOT": [
        ({"y": 1, "a": 1, "S": -1}, GE, 0),
        ({"y": 1, "a": 1, "S": 1}, LE, 2),
    ],
    "BXOR": [
        ({"y": 1, "a": -1, "b": 1, "S": -1}, GE, -1),
        ({"y": 1, "a": 1, "b": -1, "S": -1}, GE, -1),
        ({"y": 1, "a": -1, "b": -1, "S": 1}, LE, 1),
        ({"y": 1, "a": 1, "b": 1, "S": 1}, LE, 3),
    ],
    "BCOPY": [
        ({"y": 1, "a": -1, "S": -1}, GE, -1),
        ({"y": 1, "a": -1, "S": 1}, LE, 1),
    ],
}


def gate_rows(line: AsmLine) -> list[tuple[dict[str, int], int, int]]:
    """Row templates for one gate line, with duplicate operands merged."""
    if line.op == "BCONST":
        c = line.value
        return [({"y": 1, "S": -1}, GE, c - 1), ({"y": 1, "S": 1}, LE, c + 1)]
    rows = GATE_ROWS.get(line.op)
    if rows is None:
        return []
    if line.op in ("BAND", "BOR", "BXOR") and line.a == line.b:
        merged = []
        for coefs, rel, rhs in rows:
            c = dict(coefs)
            c["a"] = c.get("a", 0) + c.pop("b", 0)
            merged.append(({k: v for k, v in c.items() if v}, rel, rhs))
        return merged
    return rows


@dataclass
class _Ctx:
    program: AsmProgram
    tree: SBNode
    layout: Layout

    @property
    def tb(self) -> int:
        return self.layout.tb


def _flow_successors(ctx: _Ctx, line: AsmLine, times: np.ndarray):
    """(target label per step, mask) pairs for the deterministic successor of ``line``."""
    if line.op == "GOTO":
        return np.full(times.shape, line.target)
    if line.op == "HALT":
        return np.full(times.shape, line.label)
    if line.op == "IDLE":
        if ctx.layout.mode == "uo":
            return np.full(times.shape, line.target)
        end = ctx.layout.idle_end[line.label]
        return np.where(times < end, line.label, line.target)
    return np.full(times.shape, line.label + 1)


def gen_state_constraints(ctx: _Ctx) -> tuple[RowBlock, RowBlock]:
    """Initial controller row and the one-line-per-step rows."""
    lay = ctx.layout
    s11, ok = lay.ctrl(1, np.array([1]))
    if not ok[0]:
        raise ConstructionError("no controller for line 1 at step 1")
    init = RowBlock.dense(s11.reshape(1, 1), 1, EQ, 1)
    times = np.concatenate(lay.ctrl_times) if lay.ctrl_times else np.zeros(0, dtype=np.int64)
    var = np.arange(lay.nctrl, dtype=np.int64)
    order = np.argsort(times, kind="stable")
    counts = np.bincount(times, minlength=ctx.tb + 2)[1 : ctx.tb + 1]
    if (counts == 0).any():
        t = int(np.argmax(counts == 0)) + 1
        raise ConstructionError(f"no controller exists at step {t}")
    if times.size and times.max() > ctx.tb:
        raise ConstructionError("controller beyond the time bound")
    sums = RowBlock(
        counts.astype(IDX),
        var[order].astype(IDX),
        np.ones(lay.nctrl, dtype=np.int8),
        np.full(ctx.tb, EQ, dtype=np.int8),
        np.ones(ctx.tb, dtype=np.int8),
    )
    return init, sums


def gen_flow_constraints(ctx: _Ctx) -> tuple[RowBlock, RowBlock]:
    """Lower-bound transition rows and the upper-bound (no teleport) rows."""
    lay = ctx.layout
    lower: list[RowBlock] = []
    edge_src: list[np.ndarray] = []
    edge_dst: list[np.ndarray] = []
    for line in ctx.program.lines:
        times = lay.ctrl_times[line.label - 1]
        times = times[times < ctx.tb]
        if times.size == 0:
            continue
        s = lay.ctrl(line.label, times)[0]
        if line.op == "BRIF":
            c = lay.version(line.a, times, f"(condition of line {line.label})")
            tv, tok = lay.ctrl(line.target, times + 1)
            fv, fok = lay.ctrl(line.target_false, times + 1)
            if not (tok | fok).all():
                t = int(times[~(tok | fok)][0])
                raise ConstructionError(f"branch at line {line.label}, step {t} has no successor")
            n = times.size
            # true edge: S(T,t+1) - S - c >= -1, or S + c <= 1 when T cannot run
            r1_idx = np.stack([tv, s, c], axis=1)
            r1_coef = np.stack(
                [np.where(tok, 1, 0), np.where(tok, -1, 1), np.where(tok, -1, 1)], axis=1
            )
            r1 = RowBlock.dense(r1_idx, r1_coef, np.where(tok, GE, LE), np.where(tok, -1, 1))
            r2_idx = np.stack([fv, s, c], axis=1)
            r2_coef = np.stack(
                [np.where(fok, 1, 0), np.where(fok, -1, 1), np.where(fok, 1, -1)], axis=1
            )
            r2 = RowBlock.dense(r2_idx, r2_coef, np.where(fok, GE, LE), np.zeros(n, dtype=np.int64))
            lower.append(RowBlock.interleave([r1, r2]))
            edge_src += [s[tok], s[fok]]
            edge_dst += [tv[tok], fv[fok]]
            continue
        targets = _flow_successors(ctx, line, times)
        dst = np.empty(times.shape, dtype=np.int64)
        for tgt in np.unique(targets):
            m = targets == tgt
            v, ok = lay.ctrl(int(tgt), times[m] + 1)
            if not ok.all():
                t = int(times[m][~ok][0])
                raise ConstructionError(
                    f"line {line.label} at step {t} must continue at line {tgt}, which cannot run at step {t + 1}"
                )
            dst[m] = v
        lower.append(RowBlock.dense(np.stack([dst, s], axis=1), np.array([1, -1]), GE, 0))
        edge_src.append(s)
        edge_dst.append(dst)

    # upper bounds: S(l', t+1) <= sum of controllers that can move there
    src = np.concatenate(edge_src) if edge_src else np.zeros(0, dtype=np.int64)
    dst = np.concatenate(edge_dst) if edge_dst else np.zeros(0, dtype=np.int64)
    nctrl = lay.nctrl
    key = np.unique(dst * nctrl + src)
    dst, src = key // nctrl, key % nctrl
    counts = np.bincount(dst, minlength=nctrl)
    all_times = np.concatenate(lay.ctrl_times) if lay.ctrl_times else np.zeros(0, dtype=np.int64)
    rows_of = np.flatnonzero(all_times >= 2)
    lengths = 1 + counts[rows_of]
    total = int(lengths.sum())
    indices = np.empty(total, dtype=IDX)
    coefs = np.full(total, -1, dtype=np.int8)
    heads = np.cumsum(lengths) - lengths
    indices[heads] = rows_of
    coefs[heads] = 1
    # sources follow their head, in ascending order (pairs are sorted by dst, src)
    pos_in_rows = np.full(nctrl, -1, dtype=np.int64)
    pos_in_rows[rows_of] = heads
    if dst.size:
        if (pos_in_rows[dst] < 0).any():
            raise ConstructionError("transition into step 1")
        first_of_dst = np.concatenate([[0], np.cumsum(counts)[:-1]])
        rank = np.arange(dst.size) - first_of_dst[dst]
        indices[pos_in_rows[dst] + 1 + rank] = src
    upper = RowBlock(
        lengths.astype(IDX),
        indices,
        coefs,
        np.full(rows_of.size, LE, dtype=np.int8),
        np.zeros(rows_of.size, dtype=np.int8),
    )
    return RowBlock.concat(lower), upper


def gen_update_constraints(ctx: _Ctx) -> RowBlock:
    """Gated gate semantics for every existing controller of a gate line."""
    lay = ctx.layout
    out = []
    for line in ctx.program.lines:
        templates = gate_rows(line)
        if not templates:
            continue
        times = lay.ctrl_times[line.label - 1]
        if times.size and times.max() > ctx.tb:
            raise ConstructionError(f"line {line.label} runs past the time bound")
        sym = {
            "S": lay.ctrl(line.label, times)[0],
            "y": lay.version(line.dst, times + 1, f"(written by line {line.label})"),
        }
        if line.a is not None:
            sym["a"] = lay.version(line.a, times, f"(read by line {line.label})")
        if line.b is not None and line.b != line.a:
            sym["b"] = lay.version(line.b, times, f"(read by line {line.label})")
        keys = ["y", "a", "b", "S"]
        keys = [k for k in keys if k in sym]
        idx = np.stack([sym[k] for k in keys], axis=1)
        blocks = []
        for coefs, rel, rhs in templates:
            coef = np.array([coefs.get(k, 0) for k in keys])
            blocks.append(RowBlock.dense(idx, coef, rel, rhs))
        out.append(RowBlock.interleave(blocks))
    return RowBlock.concat(out)


def gen_carry_constraints(ctx: _Ctx) -> tuple[RowBlock, RowBlock]:
    """Carry-forward rows between consecutive versions, and bridges across gaps."""
    lay = ctx.layout
    writers = ctx.program.writers()
    carry, bridge = [], []
    for b in range(len(ctx.program.bits)):
        vt = lay.ver_times[b]
        if lay.single[b] or vt.size < 2:
            continue
        vars_ = lay.ver_base[b] + np.arange(vt.size)
        step = np.diff(vt) == 1
        gap = ~step
        if gap.any():
            bridge.append(RowBlock.dense(np.stack([vars_[1:][gap], vars_[:-1][gap]], axis=1), np.array([1, -1]), EQ, 0))
        t = vt[:-1][step]
        cur, nxt = vars_[:-1][step], vars_[1:][step]
        n = t.size
        if n == 0:
            continue
        w_idx = []
        w_ok = []
        for label in writers[b]:
            v, ok = lay.ctrl(label, t)
            w_idx.append(np.where(ok, v, 0))
            w_ok.append(ok)
        if w_idx:
            W = np.stack(w_idx, axis=1)
            Wok = np.stack(w_ok, axis=1)
            any_w = Wok.any(axis=1)
        else:
            W = np.zeros((n, 0), dtype=np.int64)
            Wok = np.zeros((n, 0), dtype=bool)
            any_w = np.zeros(n, dtype=bool)
        idx = np.concatenate([np.stack([nxt, cur], axis=1), W], axis=1)
        wcoef = np.where(Wok, -1, 0)
        up = np.concatenate([np.tile([1, -1], (n, 1)), wcoef], axis=1)
        down = np.concatenate([np.tile([-1, 1], (n, 1)), wcoef], axis=1)
        r_up = RowBlock.dense(idx, up, np.where(any_w, LE, EQ), 0)
        r_down = RowBlock.dense(idx, down, LE, 0)
        both = RowBlock.interleave([r_up, r_down])
        # without an active writer a single equality suffices
        keep = np.stack([np.ones(n, dtype=bool), any_w], axis=1).ravel()
        carry.append(_select_rows(both, keep))
    return RowBlock.concat(carry), RowBlock.concat(bridge)


def _select_rows(block: RowBlock, keep: np.ndarray) -> RowBlock:
    if keep.all():
        return block
    row_of = np.repeat(np.arange(block.nrows), block.lengths)
    m = keep[row_of]
    return RowBlock(block.lengths[keep], block.indices[m], block.coefs[m], block.rel[keep], block.rhs[keep])


def gen_objective(program: AsmProgram, layout: Layout, values: Sequence[int] | None, fixed: bool):
    """Objective and input bounds.

    Free mode rewards each input bit toward its value; fixed mode pins the
    inputs through bounds and keeps the same objective for reporting.
    """
    inputs = [layout.first_version(b) for b in program.inputs]
    if values is None:
        if fixed:
            raise ValueError("fixed-input mode needs input values")
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64), {}
    values = list(values)
    if len(values) != len(inputs):
        raise ValueError(f"expected {len(inputs)} input values, got {len(values)}")
    if any(v not in (0, 1) for v in values):
        raise ValueError("input values must be 0 or 1")
    idx = np.array(inputs, dtype=np.int64)
    coef = np.array([1 if v else -1 for v in values], dtype=np.int64)
    pins = {i: v for i, v in zip(inputs, values)} if fixed else {}
    return idx, coef, pins


def resolve_tb(tree: SBNode, mode: str, tb_override: int | None) -> int:
    if tb_override is None:
        return tree.tb
    if mode != "uo":
        raise ValueError("a custom time bound applies to the unrolled encoding only")
    return custom_tb_override(tree, tb_override)


def build(
    program: AsmProgram,
    tree: SBNode,
    mode: str = "hsb",
    tb_override: int | None = None,
    inputs: Sequence[int] | None = None,
    fixed: bool = False,
) -> LpModel:
    """Generate the full LP for ``program`` in the requested mode."""
    if mode not in ("uo", "hsb"):
        raise ValueError(f"unknown mode {mode!r}")
    tb = resolve_tb(tree, mode, tb_override)
    layout = uo_layout(program, tb) if mode == "uo" else hsb_layout(program, tree)
    ctx = _Ctx(program, tree, layout)
    parts = [*gen_state_constraints(ctx), *gen_flow_constraints(ctx), gen_update_constraints(ctx)]
    parts += gen_carry_constraints(ctx)
    family = np.repeat(np.arange(len(parts), dtype=np.uint8), [p.nrows for p in parts])
    rows = RowBlock.concat(parts)
    del parts

    lo = np.zeros(layout.ncols, dtype=np.int8)
    hi = np.ones(layout.ncols, dtype=np.int8)
    is_input = set(program.inputs)
    for b in range(len(program.bits)):
        if b not in is_input:
            hi[layout.first_version(b)] = 0  # locals, outputs and temps start at zero
    obj_idx, obj_coef, pins = gen_objective(program, layout, inputs, fixed)
    for i, v in pins.items():
        lo[i] = hi[i] = v
    return LpModel(mode, tb, program, layout, rows, family, lo, hi, obj_idx, obj_coef)


def with_inputs(model: LpModel, inputs: Sequence[int] | None, fixed: bool = False) -> LpModel:
    """The same rows with a new objective and input bounds.

    Rows never depend on input values, so one build serves every input.
    """
    obj_idx, obj_coef, pins = gen_objective(model.program, model.layout, inputs, fixed)
    lo, hi = model.lo.copy(), model.hi.copy()
    first = model.input_vars()
    lo[first], hi[first] = 0, 1
    for i, v in pins.items():
        lo[i] = hi[i] = v
    return replace(model, lo=lo, hi=hi, obj_idx=obj_idx, obj_coef=obj_coef)


# ---------------------------------------------------------------------------
# Exact size of the unrolled encoding without building it
# ---------------------------------------------------------------------------

def uo_stats(program: AsmProgram, tree: SBNode, tb_override: int | None = None) -> dict:
    """Row, column and nonzero counts of the unrolled model, by formula.

    Every line and bit has the same rows at every step, so counts are per-line
    templates times the number of steps.
    """
    tb = resolve_tb(tree, "uo", tb_override)
    L, B = len(program.lines), len(program.bits)
    writers = program.writers()
    rows = 1 + tb
    nnz = 1 + L * tb
    # transitions happen at steps 1..tb-1
    trans = tb - 1
    preds: dict[int, set[int]] = {}
    for ln in program.lines:
        if ln.op == "BRIF":
            rows += 2 * trans
            nnz += 6 * trans
            succ = {ln.target, ln.target_false}
        else:
            rows += trans
            nnz += 2 * trans
            succ = {ln.target} if ln.op in ("GOTO", "IDLE") else {ln.label} if ln.op == "HALT" else {ln.label + 1}
        for s in succ:
            preds.setdefault(s, set()).add(ln.label)
    for label in range(1, L + 1):
        rows += trans
        nnz += (1 + len(preds.get(label, ()))) * trans
    for ln in program.lines:
        for coefs, _, _ in gate_rows(ln):
            rows += tb
            nnz += len(coefs) * tb
    for b in range(B):
        if writers[b]:
            rows += 2 * tb
            nnz += 2 * (2 + len(writers[b])) * tb
        else:
            rows += tb
            nnz += 2 * tb
    return {"rows": rows, "cols": L * tb + B * (tb + 1), "nonzeros": nnz, "tb": tb, "mode": "uo"}


# ---------------------------------------------------------------------------
# Writers
# ---------------------------------------------------------------------------

TERMS_PER_LINE = 8


def _term(coef: int, name: str, first: bool) -> str:
    mag = abs(coef)
    body = name if mag == 1 else f"{mag} {name}"
    if first:
        return body if coef > 0 else f"- {body}"
    return f" + {body}" if coef > 0 else f" - {body}"


def _expr_lines(coefs, names, head: str) -> list[str]:
    out = []
    cur = head
    for k, (c, n) in enumerate(zip(coefs, names)):
        if k and k % TERMS_PER_LINE == 0:
            out.append(cur)
            cur = "  "
        cur += _term(c, n, k == 0)
    out.append(cur)
    return out


def write_lp(model: LpModel, sink: BinaryIO) -> int:
    """Write the model in LP text format; returns the number of bytes written."""
    names = model.var_names()
    written = 0
    buf = io.StringIO()

    def flush():
        nonlocal written, buf
        data = buf.getvalue().encode("ascii")
        sink.write(data)
        written += len(data)
        buf = io.StringIO()

    buf.write("\\ generated by barrierlp\n")
    buf.write(f"\\ mode={model.mode} tb={model.tb}\n")
    buf.write("Maximize\n" if model.sense == "max" else "Minimize\n")
    if model.obj_idx.size:
        lines = _expr_lines(model.obj_coef.tolist(), [names[i] for i in model.obj_idx.tolist()], " obj: ")
    else:
        lines = [f" obj: 0 {names[0]}"]
    buf.write("\n".join(lines) + "\n")
    buf.write("Subject To\n")
    indptr = model.indptr.tolist()
    idx = model.rows.indices.tolist()
    coef = model.rows.coefs.tolist()
    rel = model.rows.rel.tolist()
    rhs = model.rows.rhs.tolist()
    for k in range(model.nrows):
        a, b = indptr[k], indptr[k + 1]
        lines = _expr_lines(coef[a:b], [names[i] for i in idx[a:b]], f" R{k + 1}: ")
        lines[-1] += f" {REL_TEXT[rel[k]]} {rhs[k]}"
        buf.write("\n".join(lines) + "\n")
        if k % 20000 == 0:
            flush()
    buf.write("Bounds\n")
    lo, hi = model.lo.tolist(), model.hi.tolist()
    for i, n in enumerate(names):
        if lo[i] == hi[i]:
            buf.write(f" {n} = {lo[i]}\n")
        else:
            buf.write(f" {n} <= {hi[i]}\n")
        if i % 50000 == 0:
            flush()
    buf.write("End\n")
    flush()
    return written


def write_mps(model: LpModel, sink: BinaryIO) -> int:
    """Write the model in free-form MPS with the same names as the LP output."""
    names = model.var_names()
    out = io.StringIO()
    out.write(f"NAME barrierlp_{model.mode}\n")
    out.write("OBJSENSE\n    MAX\n" if model.sense == "max" else "OBJSENSE\n    MIN\n")
    out.write("ROWS\n N obj\n")
    kind = {LE: "L", EQ: "E", GE: "G"}
    rel = model.rows.rel.tolist()
    for k in range(model.nrows):
        out.write(f" {kind[rel[k]]} R{k + 1}\n")
    out.write("COLUMNS\n")
    # column-major view of the row matrix
    row_of = np.repeat(np.arange(model.nrows), model.rows.lengths)
    order = np.lexsort((row_of, model.rows.indices))
    cols = model.rows.indices[order].tolist()
    rws = row_of[order].tolist()
    vals = model.rows.coefs[order].tolist()
    obj = dict(zip(model.obj_idx.tolist(), model.obj_coef.tolist()))
    ptr = 0
    for j, n in enumerate(names):
        if j in obj:
            out.write(f"    {n} obj {obj[j]}\n")
        while ptr < len(cols) and cols[ptr] == j:
            out.write(f"    {n} R{rws[ptr] + 1} {vals[ptr]}\n")
            ptr += 1
    out.write("RHS\n")
    for k, r in enumerate(model.rows.rhs.tolist()):
        if r:
            out.write(f"    rhs R{k + 1} {r}\n")
    out.write("BOUNDS\n")
    lo, hi = model.lo.tolist(), model.hi.tolist()
    for i, n in enumerate(names):
        if lo[i] == hi[i]:
            out.write(f" FX bnd {n} {lo[i]}\n")
        else:
            out.write(f" UP bnd {n} {hi[i]}\n")
    out.write("ENDATA\n")
    data = out.getvalue().encode("ascii")
    sink.write(data)
    return len(data)


# ---------------------------------------------------------------------------
# Reader for the LP text written above
# ---------------------------------------------------------------------------

@dataclass
class ParsedLp:
    """An LP file as coordinate arrays; rows keep file order."""

    sense: str
    names: list[str]
    objective: dict[int, float]
    row_names: list[str]
    row: array  # row index per term
    col: array  # column index per term
    val: array  # coefficient per term
    rel: array  # LE / EQ / GE per row
    rhs: array
    lo: list[float]
    hi: list[float]

    @property
    def nrows(self) -> int:
        return len(self.rel)

    def terms(self, k: int) -> dict[int, float]:
        """Terms of row ``k``; a linear scan, meant for small models and tests."""
        return {c: v for r, c, v in zip(self.row, self.col, self.val) if r == k}


_SECTIONS = {"maximize": "obj", "maximum": "obj", "max": "obj", "minimize": "obj", "minimum": "obj",
             "min": "obj", "subject to": "rows", "such that": "rows", "st": "rows", "s.t.": "rows",
             "bounds": "bounds", "end": "end"}
_REL = {"<=": LE, "=<": LE, "<": LE, ">=": GE, "=>": GE, ">": GE, "=": EQ}


def read_lp(source: str | TextIO) -> ParsedLp:
    """Parse LP text in the subset this module writes: linear rows and simple bounds.

    Lines are streamed, so large files never need to fit in memory as text.
    """
    lines = io.StringIO(source) if isinstance(source, str) else source
    index: dict[str, int] = {}
    names: list[str] = []

    def var(n: str) -> int:
        k = index.get(n)
        if k is None:
            k = index[n] = len(names)
            names.append(n)
        return k

    sense = "max"
    section = None
    objective: dict[int, float] = {}
    row_names: list[str] = []
    r_idx, c_idx, vals = array("i"), array("i"), array("d")
    rels, rhss = array("b"), array("d")
    bounds: list[tuple[int, str, float]] = []
    sign, coef, pending_rel = 1.0, None, None
    open_row = False

    def term(tok: str, target) -> None:
        nonlocal sign, coef
        if tok == "+" or tok == "-":
            sign = -1.0 if tok == "-" else 1.0
            return
        try:
            coef = float(tok)
            return
        except ValueError:
            pass
        target(var(tok), sign * (1.0 if coef is None else coef))
        sign, coef = 1.0, None

    def add_obj(k: int, v: float) -> None:
        objective[k] = objective.get(k, 0.0) + v

    def add_row(k: int, v: float) -> None:
        r_idx.append(len(row_names) - 1)
        c_idx.append(k)
        vals.append(v)

    for raw in lines:
        line = raw.split("\\", 1)[0].strip()
        if not line:
            continue
        key = line.lower()
        if key in _SECTIONS:
            section = _SECTIONS[key]
            if section == "obj":
                sense = "max" if key.startswith("max") else "min"
            if section == "end":
                break
            continue
        if section is None:
            raise ValueError(f"text before the objective section: {line!r}")
        toks = line.split()
        if section == "obj":
            if toks[0].endswith(":"):
                toks = toks[1:]
            for tok in toks:
                term(tok, add_obj)
        elif section == "rows":
            for tok in toks:
                if pending_rel is not None:
                    rels.append(pending_rel)
                    rhss.append(float(tok))
                    pending_rel, open_row = None, False
                    continue
                if not open_row:
                    open_row = True
                    if tok.endswith(":"):
                        row_names.append(tok[:-1])
                        continue
                    row_names.append(f"R{len(row_names) + 1}")
                if tok in _REL:
                    pending_rel = _REL[tok]
                else:
                    term(tok, add_row)
        else:
            parts = line.split()
            if len(parts) != 3 or parts[1] not in ("=", "<=", ">="):
                raise ValueError(f"unsupported bound line {line!r}")
            bounds.append((var(parts[0]), parts[1], float(parts[2])))
    if open_row:
        raise ValueError("last row has no relation or right-hand side")
    lo = [0.0] * len(names)
    hi = [float("inf")] * len(names)
    for k, op, v in bounds:
        if op in ("=", ">="):
            lo[k] = v
        if op in ("=", "<="):
            hi[k] = v
    return ParsedLp(sense, names, objective, row_names, r_idx, c_idx, vals, rels, rhss, lo, hi)
