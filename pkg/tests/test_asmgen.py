import itertools

import pytest

from barrierlp.asmgen import GATE_OPS, AsmLine, io_layout, lower, successors
from barrierlp.bench import benchmark_params, benchmark_source
from barrierlp.frontend import compile_source
from barrierlp.oracle import decode_var, encode_inputs, run
from conftest import bench, pipeline


def evaluate(asm, tree, values, name):
    trace = run(asm, tree, encode_inputs(asm, values), "plain")
    return decode_var(asm, name, trace.final)


def gate_lines(asm):
    return [ln for ln in asm.lines if ln.op in GATE_OPS]


def test_single_and():
    asm, _ = pipeline("input a:bool; input b:bool; output y:bool; y := a & b; halt(y);")
    assert [ln.op for ln in asm.lines] == ["BAND", "HALT"]


def test_two_bit_adder_is_seven_gates():
    asm, tree = pipeline("input x: uint(2); input y: uint(2); output c: uint(2); c := x + y; halt(c);")
    assert len(gate_lines(asm)) == 7
    for x, y in itertools.product(range(4), repeat=2):
        assert evaluate(asm, tree, {"x": x, "y": y}, "c") == (x + y) % 4


@pytest.mark.parametrize("w", [1, 2, 3])
@pytest.mark.parametrize("op, fn", [
    ("<", lambda a, b: a < b), ("<=", lambda a, b: a <= b), (">", lambda a, b: a > b),
    (">=", lambda a, b: a >= b), ("==", lambda a, b: a == b), ("!=", lambda a, b: a != b),
])
def test_comparators_exhaustive(w, op, fn):
    asm, tree = pipeline(f"input x: uint({w}); input y: uint({w}); output r: bool; r := x {op} y; halt(r);")
    for x, y in itertools.product(range(1 << w), repeat=2):
        assert evaluate(asm, tree, {"x": x, "y": y}, "r") == int(fn(x, y)), (x, y)


@pytest.mark.parametrize("w", [1, 2, 3])
def test_adder_widths_exhaustive(w):
    asm, tree = pipeline(f"input x: uint({w}); input y: uint({w}); output c: uint({w + 1}); c := x + y; halt(c);")
    for x, y in itertools.product(range(1 << w), repeat=2):
        assert evaluate(asm, tree, {"x": x, "y": y}, "c") == x + y


@pytest.mark.parametrize("n", [2, 3, 4])
def test_runtime_select_exhaustive(n):
    asm, tree = pipeline(
        f"input a: array(uint(2), {n}); input i: uint(2); output y: uint(2); y := a[i]; halt(y);"
    )
    for arr in itertools.product(range(4), repeat=n):
        for i in range(n):
            assert evaluate(asm, tree, {"a": list(arr), "i": i}, "y") == arr[i]


@pytest.mark.parametrize("n", [2, 4])
def test_runtime_store_exhaustive(n):
    asm, tree = pipeline(
        f"input v: uint(2); input i: uint(2); output a: array(uint(2), {n}); a[i] := v; halt(a);"
    )
    for v in range(4):
        for i in range(n):
            expect = [0] * n
            expect[i] = v
            assert evaluate(asm, tree, {"v": v, "i": i}, "a") == expect


def test_loop_counter_indexing():
    asm, tree = pipeline(
        "input a: array(uint(2), 3); output s: uint(4); for k in 3 { s := s + a[k] } halt(s);"
    )
    for arr in itertools.product(range(4), repeat=3):
        assert evaluate(asm, tree, {"a": list(arr)}, "s") == sum(arr)


def test_successors():
    brif = AsmLine(4, "BRIF", a=0, target=7, target_false=9)
    assert successors(brif) == {7, 9}
    assert successors(AsmLine(20, "HALT")) == {20}
    assert successors(AsmLine(3, "BAND", dst=0, a=1, b=2)) == {4}
    assert successors(AsmLine(5, "GOTO", target=2)) == {2}
    assert successors(AsmLine(12, "IDLE", target=15)) == {12, 15}


def test_io_layout_order():
    asm, _ = pipeline("input x: uint(2); output y: bool; y := x == 1; halt(y);")
    assert io_layout(asm) == (["x_b0", "x_b1"], ["y"])
    asm, _ = pipeline("input a: array(bool, 3); output y: bool; y := a[0]; halt(y);")
    assert io_layout(asm)[0] == ["a_e0", "a_e1", "a_e2"]


def test_makespan_input_count():
    asm, _ = bench("makespan", 5, 3)
    assert len(asm.inputs) == 15


@pytest.mark.parametrize("name, size", [("makespan", 3), ("mst", 3), ("mst", 4)])
def test_structural_invariants(name, size):
    asm, _ = bench(name, size)
    labels = [ln.label for ln in asm.lines]
    assert labels == list(range(1, len(labels) + 1))
    assert [ln.op for ln in asm.lines].count("HALT") == 1 and asm.lines[-1].op == "HALT"
    inputs = set(asm.inputs)
    for ln in asm.lines:
        assert not set(ln.writes) & inputs
        assert all(1 <= s <= len(labels) for s in successors(ln))
    # HALT is reachable from line 1 and from every line
    reach = {asm.halt}
    changed = True
    while changed:
        changed = False
        for ln in asm.lines:
            if ln.label not in reach and successors(ln) & reach:
                reach.add(ln.label)
                changed = True
    assert reach == set(labels)


def test_lowering_is_deterministic():
    params = benchmark_params("mst", 3)
    a = lower(compile_source(benchmark_source("mst"), params))
    b = lower(compile_source(benchmark_source("mst"), params))
    assert a.listing() == b.listing()
    assert [v.name for v in a.bits] == [v.name for v in b.bits]


def test_bit_names_unique_and_lp_safe():
    asm, _ = bench("mst", 4)
    names = [v.name for v in asm.bits]
    assert len(set(names)) == len(names)
    assert all(n.replace("_", "").isalnum() for n in names)
