"""Execution-time intervals of SB-tree blocks.

Intervals are half-open: ``(start, end]`` means the block may be active at
steps ``start + 1`` through ``end``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

from .errors import IntervalError
from .sbtree import SBNode, exclusive


@dataclass(frozen=True)
class TimeInterval:
    start: int
    end: int
    block: str
    J: tuple[int, ...] = ()
    also: tuple[str, ...] = ()  # other blocks merged into this interval

    def __post_init__(self):
        if not self.start < self.end:
            raise IntervalError(f"empty interval ({self.start}, {self.end}]")

    def __contains__(self, t: int) -> bool:
        return self.start < t <= self.end

    @property
    def steps(self) -> range:
        return range(self.start + 1, self.end + 1)


def bounds(block: SBNode) -> tuple[int, ...]:
    return tuple(a.max_iter for a in block.loop_ancestors())


def eti(block: SBNode, J: tuple[int, ...] = ()) -> TimeInterval:
    loops = block.loop_ancestors()
    if len(J) != len(loops):
        raise IntervalError(f"{block.id} needs {len(loops)} loop indices, got {len(J)}")
    start = block.dist_cumul
    for a, j in zip(loops, J):
        if not 1 <= j <= a.max_iter:
            raise IntervalError(f"index {j} outside 1..{a.max_iter} for loop {a.id}")
        start += a.dist_penul(j)
    return TimeInterval(start, start + block.tb, block.id, tuple(J))


def iter_tuples(limits: tuple[int, ...], first: tuple[int, ...] | None = None) -> Iterator[tuple[int, ...]]:
    """Mixed-base counting over ``1..limits[i]``, most significant digit first."""
    J = list(first) if first is not None else [1] * len(limits)
    while True:
        yield tuple(J)
        i = len(J) - 1
        while i >= 0 and J[i] == limits[i]:
            J[i] = 1
            i -= 1
        if i < 0:
            return
        J[i] += 1


class ETIG:
    """On-demand generator of one block's intervals, in time order."""

    def __init__(self, block: SBNode):
        self.block = block
        self.loops = block.loop_ancestors()
        self.limits = tuple(a.max_iter for a in self.loops)

    def __iter__(self) -> Iterator[TimeInterval]:
        for J in iter_tuples(self.limits):
            yield eti(self.block, J)

    def seek(self, t: int) -> tuple[int, ...] | None:
        """First iteration tuple whose interval ends at or after step ``t``.

        Digits are fixed outermost first.  For each digit we take the smallest
        value for which the latest interval sharing that prefix still reaches
        ``t``; this is a division, not a scan.
        """
        coeffs = [a.penul for a in self.loops]
        latest = self.block.dist_cumul + self.block.tb
        for (b1, period), m in zip(coeffs, self.limits):
            latest += b1 + (m - 1) * period
        if latest < t:
            return None
        J = []
        for (b1, period), m in zip(coeffs, self.limits):
            # ``latest`` currently assumes this digit at its maximum m
            short = t - (latest - (m - 1) * period)
            j = 1 if short <= 0 or period == 0 else -(-short // period) + 1
            j = max(1, min(j, m))
            latest -= (m - j) * period
            J.append(j)
        return tuple(J)

    def from_step(self, t: int) -> Iterator[TimeInterval]:
        J = self.seek(t)
        if J is None:
            return
        for K in iter_tuples(self.limits, J):
            yield eti(self.block, K)


def etig(block: SBNode) -> Iterator[TimeInterval]:
    return iter(ETIG(block))


def uetig(blocks: Iterable[SBNode], horizon: int | None = None) -> Iterator[TimeInterval]:
    """Sorted union of the intervals of several blocks.

    A time cursor sweeps forward.  Each member keeps the first of its
    intervals that ends after the cursor, found by :meth:`ETIG.seek` so that
    members are skipped forward directly rather than iteration by iteration.
    Intervals of different blocks may only overlap when the blocks are in
    opposite branches of a conditional; such overlaps are merged into one
    interval covering both.  Any other overlap is an error.  Adjacent
    intervals are yielded separately.
    """
    blocks = sorted(set(blocks), key=lambda b: b.id)
    gens = [ETIG(b) for b in blocks]

    def current(g: ETIG, t: int) -> TimeInterval | None:
        J = g.seek(t + 1)
        return None if J is None else eti(g.block, J)

    cur = [current(g, 0) for g in gens]
    t = 0
    while True:
        live = [k for k, iv in enumerate(cur) if iv is not None]
        if not live:
            return
        first = min(live, key=lambda k: (cur[k].start, blocks[k].id))
        hull = cur[first]
        absorbed = [(first, hull)]
        seen = {(first, hull.start)}
        end = hull.end
        grown = True
        while grown:
            grown = False
            for k, g in enumerate(gens):
                iv = cur[k]
                while iv is not None and iv.start < end:
                    if (k, iv.start) in seen:
                        iv = current(g, iv.end)
                        continue
                    for k2, other in absorbed:
                        if k2 != k and other.end > iv.start and iv.end > other.start \
                                and not exclusive(blocks[k2], blocks[k]):
                            raise IntervalError(
                                f"blocks {blocks[k2].id} and {blocks[k].id} overlap at step "
                                f"{max(iv.start, other.start) + 1} but are not mutually exclusive"
                            )
                    absorbed.append((k, iv))
                    seen.add((k, iv.start))
                    if iv.end > end:
                        end = iv.end
                        grown = True
                    iv = current(g, iv.end)
        if horizon is not None and end > horizon:
            raise IntervalError(f"interval ({hull.start}, {end}] exceeds horizon {horizon}")
        also = tuple(sorted({blocks[k].id for k, _ in absorbed} - {hull.block}))
        yield TimeInterval(hull.start, end, hull.block, hull.J, also)
        t = end
        cur = [iv if iv is not None and iv.end > t else current(g, t) for g, iv in zip(gens, cur)]


def coalesce(intervals: Iterable[TimeInterval]) -> list[tuple[int, int]]:
    """Merge touching intervals into maximal ``(start, end)`` runs."""
    out: list[list[int]] = []
    for iv in intervals:
        if out and iv.start <= out[-1][1]:
            out[-1][1] = max(out[-1][1], iv.end)
        else:
            out.append([iv.start, iv.end])
    return [tuple(r) for r in out]


def format_etis(block: SBNode) -> str:
    return "".join(f"J=({','.join(map(str, iv.J))}): ({iv.start}, {iv.end}]\n" for iv in etig(block))
