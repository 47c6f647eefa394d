import hashlib
import io
import itertools
import re
from fractions import Fraction

import numpy as np
import pytest

from barrierlp.asmgen import AsmLine
from barrierlp.errors import ConstructionError
from barrierlp.intervals import etig, uetig
from barrierlp.lpgen import (
    EQ,
    FAMILIES,
    GE,
    LE,
    GATE_ROWS,
    Layout,
    _Ctx,
    _accessing_leaves,
    build,
    gate_rows,
    gen_state_constraints,
    read_lp,
    stats_json,
    uo_layout,
    uo_stats,
    write_lp,
    with_inputs,
    write_mps,
)
from barrierlp.oracle import gate_value
from barrierlp.sbtree import leaf_of_line
from conftest import bench, pipeline

GATES = [AsmLine(1, op, dst=0, a=1, b=2) for op in GATE_ROWS] + [
    AsmLine(1, "BCONST", dst=0, value=v) for v in (0, 1)
] + [AsmLine(1, op, dst=0, a=1, b=1) for op in ("BAND", "BOR", "BXOR")]


def y_range(line, a, b, s):
    """Interval of y in [0, 1] allowed by the gate rows for fixed a, b, S."""
    lo, hi = Fraction(0), Fraction(1)
    env = {"a": a, "b": b if line.b != line.a else a, "S": s}
    for coefs, rel, rhs in gate_rows(line):
        rest = sum(Fraction(c) * env[k] for k, c in coefs.items() if k != "y")
        bound = (rhs - rest) / coefs["y"]
        le = (rel == LE) == (coefs["y"] > 0)
        if rel == EQ:
            lo, hi = max(lo, bound), min(hi, bound)
        elif le:
            hi = min(hi, bound)
        else:
            lo = max(lo, bound)
    return lo, hi


@pytest.mark.parametrize("line", GATES, ids=lambda ln: f"{ln.op}{'-same' if ln.a == ln.b else ''}{ln.value or ''}")
def test_gate_forced_iff_selected(line):
    for a, b in itertools.product((0, 1), repeat=2):
        expect = gate_value(line.op, a, b if line.b != line.a else a, line.value or 0)
        assert y_range(line, a, b, 1) == (expect, expect)
        assert y_range(line, a, b, 0) == (0, 1)


def test_gate_rows_and_truth_table_example():
    band = AsmLine(1, "BAND", dst=0, a=1, b=2)
    assert y_range(band, 1, 0, 1) == (0, 0)
    assert len(gate_rows(band)) == 3
    assert gate_rows(AsmLine(1, "GOTO", target=1)) == []


def family_counts(model):
    return {f: int((model.family == k).sum()) for k, f in enumerate(FAMILIES)}


def test_halt_only_program():
    asm, tree = pipeline("output y: bool; halt(y);")
    model = build(asm, tree, "uo")
    assert model.tb == 1
    assert model.layout.nctrl == 1
    counts = family_counts(model)
    assert counts["init"] == 1 and counts["sum"] == 1


def test_three_line_program_uo():
    asm, tree = pipeline("input a: bool; output y: bool; local t: bool; t := !a; y := t & a; halt(y);")
    assert tree.tb == 3
    model = build(asm, tree, "uo")
    counts = family_counts(model)
    assert counts["init"] == 1 and counts["sum"] == 3


@pytest.mark.parametrize("text", [
    "input a: bool; output y: bool; y := !a; halt(y);",
    "input x: uint(2); input y: uint(2); output c: uint(3); c := x + y; halt(c);",
])
def test_uo_stats_formula_matches_build_toys(text):
    asm, tree = pipeline(text)
    assert build(asm, tree, "uo").stats() == uo_stats(asm, tree)


def test_uo_stats_formula_matches_build_nested(nested_program):
    asm, tree = nested_program
    assert build(asm, tree, "uo").stats() == uo_stats(asm, tree)
    assert build(asm, tree, "uo", tb_override=111).stats() == uo_stats(asm, tree, 111)


def test_uo_stats_formula_matches_build_makespan():
    asm, tree = bench("makespan", 3)
    assert build(asm, tree, "uo").stats() == uo_stats(asm, tree)


def test_stats_are_recomputed_counts(nested_program):
    asm, tree = nested_program
    model = build(asm, tree, "hsb")
    s = model.stats()
    assert s["nonzeros"] == int(model.rows.lengths.sum())
    assert s["rows"] == len(model.rows.rel) and s["cols"] == len(model.var_names())
    assert list(__import__("json").loads(stats_json(s))) == ["rows", "cols", "nonzeros", "tb", "mode"]


@pytest.mark.parametrize("name, size", [("makespan", 3), ("mst", 3)])
def test_hsb_controllers_lie_in_owner_etis(name, size):
    asm, tree = bench(name, size)
    model = build(asm, tree, "hsb")
    owner = leaf_of_line(tree)
    for ln in asm.lines:
        allowed = np.zeros(tree.tb + 1, dtype=bool)
        for iv in etig(owner[ln.label]):
            allowed[iv.start + 1 : iv.end + 1] = True
        times = model.layout.ctrl_times[ln.label - 1]
        assert times.size and times.min() >= 1 and times.max() <= tree.tb
        assert allowed[times].all()


@pytest.mark.parametrize("name, size", [("makespan", 3), ("mst", 3)])
def test_hsb_versions_follow_access_intervals(name, size):
    asm, tree = bench(name, size)
    model = build(asm, tree, "hsb")
    lay = model.layout
    writers = asm.writers()
    leaves = _accessing_leaves(asm, tree)
    gaps = 0
    for b in range(len(asm.bits)):
        vt = lay.ver_times[b].tolist()
        if not writers[b]:
            assert vt == [1]
            continue
        expect = set()
        for iv in uetig(leaves[b], tree.tb):
            expect.update(range(iv.start + 1, iv.end + 2))
        assert vt == sorted(expect)
        gaps += sum(1 for s, t in zip(vt, vt[1:]) if t - s > 1)
    assert family_counts(model)["bridge"] == gaps


def test_mst_key_bit_versions():
    asm, tree = bench("mst", 3)
    model = build(asm, tree, "hsb")
    b = next(i for i, v in enumerate(asm.bits) if v.name == "key_e1_b0")
    ivs = list(uetig(_accessing_leaves(asm, tree)[b], tree.tb))
    vt = model.layout.ver_times[b]
    assert len(vt) == sum(iv.end - iv.start for iv in ivs) + sum(
        1 for k, iv in enumerate(ivs) if k == 0 or ivs[k - 1].end < iv.start
    )
    assert len(vt) < tree.tb + 1


def test_gap_in_controllers_is_reported():
    asm, tree = pipeline("input a: bool; output y: bool; y := !a; halt(y);")
    lay = uo_layout(asm, 3)
    broken = Layout("uo", 3, [np.array([1]), np.array([3])], lay.ver_times, lay.single)
    with pytest.raises(ConstructionError, match="step 2"):
        gen_state_constraints(_Ctx(asm, tree, broken))


def test_tb_override_is_unrolled_only(nested_program):
    asm, tree = nested_program
    with pytest.raises(ValueError):
        build(asm, tree, "hsb", tb_override=tree.tb)


def test_objective_values():
    asm, tree = pipeline("input a: array(bool, 3); output y: bool; y := a[0] ^ a[2]; halt(y);")
    model = build(asm, tree, "hsb", inputs=[1, 0, 1])
    buf = io.BytesIO()
    write_lp(model, buf)
    text = buf.getvalue().decode()
    assert re.search(r"^ obj: v_a_e0_t1 - v_a_e1_t1 \+ v_a_e2_t1$", text, re.M)
    fixed = build(asm, tree, "hsb", inputs=[1, 0, 1], fixed=True)
    buf = io.BytesIO()
    write_lp(fixed, buf)
    text = buf.getvalue().decode()
    for name, v in [("v_a_e0_t1", 1), ("v_a_e1_t1", 0), ("v_a_e2_t1", 1)]:
        assert f" {name} = {v}\n" in text
    with pytest.raises(ValueError):
        build(asm, tree, "hsb", inputs=[1, 0])
    with pytest.raises(ValueError):
        build(asm, tree, "hsb", inputs=[1, 2, 0])


def lp_bytes(model):
    buf = io.BytesIO()
    n = write_lp(model, buf)
    assert n == len(buf.getvalue())
    return buf.getvalue()


def test_lp_text_layout(not_program):
    asm, tree = not_program
    text = lp_bytes(build(asm, tree, "uo", inputs=[1])).decode()
    lines = text.splitlines()
    body = [ln for ln in lines if not ln.startswith("\\")]
    assert body[0] == "Maximize"
    assert body[1] == " obj: v_b_t1"
    assert "Subject To" in body and "Bounds" in body and body[-1] == "End"
    assert re.search(r"^ R1: s_l1_t1 = 1$", text, re.M)
    names = set(re.findall(r"[sv]_[A-Za-z0-9_]+", text))
    assert all(len(n) <= 255 and re.fullmatch(r"[A-Za-z0-9_]+", n) for n in names)


def test_lp_names_unique():
    asm, tree = bench("mst", 3)
    names = build(asm, tree, "hsb").var_names()
    assert len(names) == len(set(names))


@pytest.mark.parametrize("mode", ["uo", "hsb"])
def test_write_is_deterministic(mode):
    asm, tree = bench("makespan", 3)
    a = hashlib.sha256(lp_bytes(build(asm, tree, mode, inputs=[1, 0] * 3))).hexdigest()
    asm2, tree2 = bench("makespan", 3)
    b = hashlib.sha256(lp_bytes(build(asm2, tree2, mode, inputs=[1, 0] * 3))).hexdigest()
    assert a == b


@pytest.mark.parametrize("mode", ["uo", "hsb"])
def test_lp_reader_round_trip(nested_program, mode):
    asm, tree = nested_program
    model = build(asm, tree, mode, inputs=[1, 0, 1, 1, 0], fixed=True)
    lp = read_lp(lp_bytes(model).decode())
    names = model.var_names()
    pos = {n: k for k, n in enumerate(lp.names)}
    assert lp.nrows == model.nrows
    assert lp.row_names == [f"R{k + 1}" for k in range(model.nrows)]
    got = sorted(zip(lp.row, (names.index(lp.names[c]) for c in lp.col), lp.val))
    want = sorted((k, i, float(c)) for k in range(model.nrows) for i, c in zip(*model.row(k)[:2]))
    assert got == want
    assert list(lp.rel) == model.rows.rel.tolist()
    assert list(lp.rhs) == model.rows.rhs.tolist()
    for i, n in enumerate(names):
        if n in pos:
            assert (lp.lo[pos[n]], lp.hi[pos[n]]) == (model.lo[i], model.hi[i])
    assert lp.objective == {pos[names[i]]: float(c) for i, c in zip(model.obj_idx, model.obj_coef)}


def test_lp_reader_general_layout():
    lp = read_lp("\\ note\nMinimize\n obj: 2 x + y\nSubject To\n c1: x + y >= 1\n x - y\n <= 3\nBounds\n y <= 4\n x = 1\nEnd\n")
    assert lp.sense == "min" and lp.names == ["x", "y"]
    assert lp.objective == {0: 2.0, 1: 1.0}
    assert lp.row_names == ["c1", "R2"]
    assert lp.terms(1) == {0: 1.0, 1: -1.0}
    assert list(lp.rel) == [GE, LE] and list(lp.rhs) == [1.0, 3.0]
    assert (lp.lo, lp.hi) == ([1.0, 0.0], [1.0, 4.0])
    with pytest.raises(ValueError):
        read_lp("Maximize\n obj: x\nSubject To\n c1: x + y\nEnd\n")


def test_mps_sections(not_program):
    asm, tree = not_program
    buf = io.BytesIO()
    write_mps(build(asm, tree, "hsb", inputs=[0]), buf)
    text = buf.getvalue().decode()
    for head in ("NAME", "ROWS", "COLUMNS", "RHS", "BOUNDS", "ENDATA"):
        assert re.search(rf"^{head}", text, re.M)


def test_hsb_smaller_than_uo_makespan_10():
    asm, tree = bench("makespan", 10)
    assert build(asm, tree, "hsb").stats()["nonzeros"] < uo_stats(asm, tree)["nonzeros"]


def test_with_inputs_matches_fresh_build(nested_program):
    asm, tree = nested_program
    base = build(asm, tree, "hsb")
    bits = [1, 0, 0, 1, 1]
    for fixed in (False, True):
        a, b = with_inputs(base, bits, fixed), build(asm, tree, "hsb", inputs=bits, fixed=fixed)
        assert lp_bytes(a) == lp_bytes(b)
    assert lp_bytes(with_inputs(with_inputs(base, bits, True), None)) == lp_bytes(base)
