"""Built-in benchmarks and the size-comparison harness."""

from __future__ import annotations

import csv
import io
import random
import re
import shlex
import subprocess
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .asmgen import AsmProgram, lower
from .frontend import compile_source
from .lpgen import build, uo_stats, write_lp
from .oracle import encode_inputs, witness_for
from .sbtree import SBNode, build_sbtree

BENCHMARKS = ("makespan", "mst")
CSV_COLUMNS = ["bench", "size", "mode", "tb", "rows", "cols", "nonzeros", "bytes", "ms"]
# Unrolled models above this many nonzeros are counted, not built.
BUILD_LIMIT = 20_000_000


def benchmark_source(name: str) -> str:
    if name not in BENCHMARKS:
        raise ValueError(f"unknown benchmark {name!r}; choose from {', '.join(BENCHMARKS)}")
    return resources.files("barrierlp.benchmarks").joinpath(f"{name}.spk").read_text()


def benchmark_params(name: str, size: int, width: int = 2) -> dict[str, int]:
    """Parameters for a benchmark instance; derived widths never overflow."""
    top = (1 << width) - 1
    if name == "makespan":
        if size < 1:
            raise ValueError("makespan needs at least one job")
        return {"m": size, "W": width, "L": (size * top).bit_length()}
    if name == "mst":
        if size < 2:
            raise ValueError("mst needs at least two vertices")
        return {"n": size, "W": width, "U": size.bit_length(), "T": max(1, ((size - 1) * top).bit_length())}
    raise ValueError(f"unknown benchmark {name!r}")


def format_params(params: dict[str, int]) -> str:
    return "".join(f"{k} = {v}\n" for k, v in params.items())


def compile_benchmark(name: str, size: int, width: int = 2) -> tuple[AsmProgram, SBNode]:
    prog = compile_source(benchmark_source(name), benchmark_params(name, size, width))
    asm = lower(prog)
    return asm, build_sbtree(asm)


def random_instance(name: str, size: int, rng: random.Random, width: int = 2) -> dict:
    """Random input values: job weights, or a symmetric positive weight matrix."""
    top = (1 << width) - 1
    if name == "makespan":
        return {"w": [rng.randint(0, top) for _ in range(size)]}
    w = [[0] * size for _ in range(size)]
    for i in range(size):
        for j in range(i + 1, size):
            w[i][j] = w[j][i] = rng.randint(1, top)
    return {"w": w}


@dataclass
class BenchRecord:
    bench: str
    size: int
    mode: str
    tb: int
    rows: int
    cols: int
    nonzeros: int
    bytes: int | None
    ms: float | None
    status: str = ""
    objective: float | None = None
    expected: int | None = None

    def csv_row(self) -> list:
        return [
            self.bench,
            self.size,
            self.mode,
            self.tb,
            self.rows,
            self.cols,
            self.nonzeros,
            "" if self.bytes is None else self.bytes,
            "" if self.ms is None else f"{self.ms:.1f}",
        ]


class _Counter:
    def __init__(self):
        self.n = 0

    def write(self, data: bytes) -> None:
        self.n += len(data)


def run_one(job: tuple) -> BenchRecord:
    """Measure one (benchmark, size, mode) configuration."""
    name, size, mode, width, seed, solve_with, timing = job
    t0 = time.perf_counter()
    asm, tree = compile_benchmark(name, size, width)
    rng = random.Random(f"{seed}:{name}:{size}")
    values = encode_inputs(asm, random_instance(name, size, rng, width))
    counted = mode == "uo" and uo_stats(asm, tree)["nonzeros"] > BUILD_LIMIT
    status, objective, expected = "", None, None
    if counted:
        s = uo_stats(asm, tree)
        nbytes = None
    else:
        model = build(asm, tree, mode, inputs=values, fixed=True)
        s = model.stats()
        if solve_with:
            _, witness = witness_for(model, tree, values)
            expected = int((model.obj_coef * witness.values[model.obj_idx].astype(np.int64)).sum())
            with tempfile.TemporaryDirectory() as d:
                path = Path(d) / f"{name}_{size}_{mode}.lp"
                with open(path, "wb") as fh:
                    nbytes = write_lp(model, fh)
                status, objective = solve_external(solve_with, path)
        else:
            counter = _Counter()
            nbytes = write_lp(model, counter)
    ms = (time.perf_counter() - t0) * 1000 if timing else None
    return BenchRecord(name, size, mode, s["tb"], s["rows"], s["cols"], s["nonzeros"], nbytes, ms,
                       status, objective, expected)


_OBJ = re.compile(r"objective[^0-9+\-]*([+\-]?\d+(?:\.\d*)?(?:[eE][+\-]?\d+)?)", re.I)


def solve_external(template: str, lp_path: Path, timeout: float = 3600) -> tuple[str, float | None]:
    """Run a user-supplied solver command; ``{lp}`` is replaced by the LP path."""
    cmd = template.replace("{lp}", shlex.quote(str(lp_path)))
    if "{lp}" not in template:
        cmd = f"{cmd} {shlex.quote(str(lp_path))}"
    try:
        proc = subprocess.run(cmd, shell=True, capture_output=True, text=True, timeout=timeout)
    except subprocess.TimeoutExpired:
        return "timeout", None
    out = proc.stdout + proc.stderr
    if proc.returncode == 127:
        return "solver not found", None
    m = _OBJ.search(out)
    status = "optimal" if re.search(r"optimal", out, re.I) and not re.search(r"not optimal|infeasible", out, re.I) else "unknown"
    return status, (float(m.group(1)) if m else None)


def run_bench(
    suites: list[str],
    sizes: dict[str, list[int]],
    modes: list[str],
    seed: int = 0,
    width: int = 2,
    jobs: int = 1,
    solve_with: str | None = None,
    timing: bool = True,
) -> list[BenchRecord]:
    work = [(b, n, m, width, seed, solve_with, timing) for b in suites for n in sizes[b] for m in modes]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(run_one, work))
    else:
        records = [run_one(w) for w in work]
    order = {m: k for k, m in enumerate(("uo", "hsb"))}
    return sorted(records, key=lambda r: (r.bench, r.size, order.get(r.mode, 9)))


def leading_coefficients(records: list[BenchRecord]) -> dict[tuple[str, str], float]:
    """Quadratic least-squares fit of nonzeros against size, per (bench, mode)."""
    out = {}
    groups: dict[tuple[str, str], list[BenchRecord]] = {}
    for r in records:
        groups.setdefault((r.bench, r.mode), []).append(r)
    for key, rs in groups.items():
        if len({r.size for r in rs}) >= 3:
            x = np.array([r.size for r in rs], dtype=float)
            y = np.array([r.nonzeros for r in rs], dtype=float)
            out[key] = float(np.polyfit(x, y, 2)[0])
    return out


def fit_ratio(coefs: dict[tuple[str, str], float], bench: str, num: str = "uo", den: str = "hsb") -> float | None:
    if (bench, num) not in coefs:
        return None
    if (bench, den) not in coefs:
        den = num  # a mode compared with itself
    return coefs[(bench, num)] / coefs[(bench, den)]


def to_csv(records: list[BenchRecord], seed: int) -> str:
    buf = io.StringIO()
    buf.write(f"# seed={seed}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        w.writerow(r.csv_row())
    return buf.getvalue()


def to_markdown(records: list[BenchRecord], seed: int) -> str:
    out = [f"Seed: {seed}", ""]
    coefs = leading_coefficients(records)
    for bench in sorted({r.bench for r in records}):
        rs = [r for r in records if r.bench == bench]
        label = "m" if bench == "makespan" else "n"
        out.append(f"### {bench}")
        out.append("")
        out.append(f"| {label} | mode | TB | rows | cols | nonzeros | bytes | nonzeros vs uo |")
        out.append("|---:|:---|---:|---:|---:|---:|---:|---:|")
        uo = {r.size: r.nonzeros for r in rs if r.mode == "uo"}
        for r in rs:
            ratio = f"{r.nonzeros / uo[r.size]:.4f}" if r.size in uo else ""
            nbytes = "" if r.bytes is None else str(r.bytes)
            out.append(f"| {r.size} | {r.mode} | {r.tb} | {r.rows} | {r.cols} | {r.nonzeros} | {nbytes} | {ratio} |")
        ratio = fit_ratio(coefs, bench)
        if ratio is None and any(k[0] == bench for k in coefs):
            mode = next(k[1] for k in coefs if k[0] == bench)
            ratio = fit_ratio(coefs, bench, mode, mode)
        if ratio is not None:
            out.append("")
            out.append(f"Quadratic fit leading-coefficient ratio (uo/hsb): {ratio:.2f}")
        solved = [r for r in rs if r.status]
        if solved:
            out.append("")
            out.append("| size | mode | status | objective | witness objective |")
            out.append("|---:|:---|:---|---:|---:|")
            for r in solved:
                out.append(f"| {r.size} | {r.mode} | {r.status} | {r.objective} | {r.expected} |")
        out.append("")
    return "\n".join(out)


def record_dicts(records: list[BenchRecord]) -> list[dict]:
    return [asdict(r) for r in records]
