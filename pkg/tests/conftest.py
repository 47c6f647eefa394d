import functools

import pytest

from barrierlp.asmgen import lower
from barrierlp.bench import compile_benchmark
from barrierlp.frontend import compile_source
from barrierlp.sbtree import build_sbtree


def pipeline(text, params=None):
    asm = lower(compile_source(text, params or {}))
    return asm, build_sbtree(asm)


@functools.lru_cache(maxsize=None)
def bench(name, size, width=2):
    return compile_benchmark(name, size, width)


@pytest.fixture
def not_program():
    return pipeline("input b:bool; output y:bool; y := !b; halt(y);")


NESTED = """
input a: array(bool, 3);
input x: uint(2);
output y: bool;
for k in 2 {
    for j in 2 { y := y ^ a[j] }
}
if x < 2 { y := !y }
halt(y);
"""


@pytest.fixture
def nested_program():
    return pipeline(NESTED)


# PASS/FAIL lines of the acceptance criteria, printed after the run
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
