"""SB-tree construction, local time bounds and time-distance annotations."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .asmgen import AsmProgram, Region
from .errors import SBTreeError, TimeBoundError

# Time bounds above this are rejected: the LP would be unusable long before.
MAX_TB = 10**9

FLAT_KINDS = {"seq", "loop-init", "loop-step", "cond-eval", "flow"}


@dataclass(eq=False)
class SBNode:
    id: str
    kind: str
    children: list["SBNode"] = field(default_factory=list)
    first: int | None = None
    last: int | None = None
    max_iter: int | None = None
    tb: int = 0
    pad: int = 0  # idle capacity of a flow block beyond its IDLE line
    dist_parent: int = 0
    dist_cumul: int = 0
    parent: "SBNode | None" = field(default=None, repr=False)

    @property
    def is_flat(self) -> bool:
        return self.kind in FLAT_KINDS

    @property
    def nlines(self) -> int:
        return 0 if self.first is None else self.last - self.first + 1

    @property
    def lines(self) -> range:
        return range(self.first, self.last + 1) if self.first is not None else range(0)

    def child(self, kind: str) -> "SBNode | None":
        for c in self.children:
            if c.kind == kind:
                return c
        return None

    @property
    def penul(self) -> tuple[int, int] | None:
        """Coefficients (TB(b1), TB(b2)+TB(b3)) of a loop's penultimate distance."""
        if self.kind != "loop":
            return None
        b2 = self.child("loop-body")
        return self.child("loop-init").tb, (b2.tb if b2 else 0) + self.child("loop-step").tb

    def dist_penul(self, i: int) -> int:
        b1, period = self.penul
        return b1 + (i - 1) * period

    def walk(self):
        yield self
        for c in self.children:
            yield from c.walk()

    def leaves(self):
        return [n for n in self.walk() if n.is_flat]

    def find(self, id: str) -> "SBNode":
        for n in self.walk():
            if n.id == id:
                return n
        raise KeyError(id)

    def ancestors(self):
        n = self.parent
        while n is not None:
            yield n
            n = n.parent

    def loop_ancestors(self) -> list["SBNode"]:
        """Loops iterating this block, outermost first.

        A loop iterates everything under its body and step blocks; its init
        block runs once.
        """
        out = []
        prev = self
        for a in self.ancestors():
            if a.kind == "loop" and prev.kind != "loop-init":
                out.append(a)
            prev = a
        return out[::-1]

    def branch_path(self) -> dict[str, str]:
        """Conditional id -> side ('then' or 'else') for every enclosing branch."""
        out = {}
        prev = self
        for a in self.ancestors():
            if a.kind == "cond" and prev.kind in ("then-branch", "else-branch"):
                out[a.id] = prev.kind.split("-")[0]
            prev = a
        return out


def exclusive(a: SBNode, b: SBNode) -> bool:
    """True when ``a`` and ``b`` sit in opposite branches of one conditional."""
    pa, pb = a.branch_path(), b.branch_path()
    return any(pb.get(c, side) != side for c, side in pa.items())


def _from_region(r: Region, parent: SBNode | None) -> SBNode:
    node = SBNode(r.id, r.kind, first=r.first, last=r.last, max_iter=r.count, parent=parent)
    node.children = [_from_region(c, node) for c in r.children]
    return node


def _check_shape(node: SBNode, program: AsmProgram) -> None:
    kinds = [c.kind for c in node.children]
    if node.is_flat:
        if node.children or node.first is None:
            raise SBTreeError(f"flat block {node.id} malformed")
    elif node.kind == "loop":
        if kinds not in (["loop-init", "loop-body", "loop-step"], ["loop-init", "loop-step"]):
            raise SBTreeError(f"loop {node.id} has children {kinds}")
        if not node.max_iter or node.max_iter < 1:
            raise SBTreeError(f"loop {node.id} has no iteration bound")
    elif node.kind == "cond":
        if kinds != ["cond-eval", "then-branch", "else-branch"]:
            raise SBTreeError(f"conditional {node.id} has children {kinds}")
    elif node.kind in ("then-branch", "else-branch"):
        if not kinds or kinds[-1] != "flow" or "flow" in kinds[:-1]:
            raise SBTreeError(f"branch {node.id} must end in exactly one flow block")
    elif node.kind in ("root", "loop-body"):
        if not kinds:
            raise SBTreeError(f"{node.id} is empty")
    else:
        raise SBTreeError(f"unknown block kind {node.kind!r}")
    if node.kind == "flow":
        if node.nlines != 1 or program.line(node.first).op != "IDLE":
            raise SBTreeError(f"flow block {node.id} must be a single IDLE line")
    for c in node.children:
        _check_shape(c, program)


def build_sbtree(program: AsmProgram) -> SBNode:
    """Build, time and annotate the SB-tree of a lowered program."""
    root = _from_region(program.region, None)
    _check_shape(root, program)
    covered = [label for leaf in root.leaves() for label in leaf.lines]
    if covered != list(range(1, len(program.lines) + 1)):
        raise SBTreeError("leaf line ranges do not partition the program")
    for leaf in root.leaves():
        for label in leaf.lines:
            if program.line(label).block != leaf.id:
                raise SBTreeError(f"line {label} is not owned by {leaf.id}")
    compute_tb(root)
    annotate_distances(root)
    return root


def _natural(branch: SBNode) -> int:
    """Length of a branch when its IDLE line is not stretched."""
    return sum(c.tb for c in branch.children[:-1]) + 1


def compute_tb(node: SBNode) -> int:
    """Fill in TB for ``node`` and its subtree, bottom-up."""
    for c in node.children:
        compute_tb(c)
    if node.kind == "flow":
        node.tb = 1 + node.pad
    elif node.is_flat:
        node.tb = node.nlines
    elif node.kind == "loop":
        b1, period = node.penul
        node.tb = b1 + node.max_iter * period
    elif node.kind == "cond":
        ev, then, orelse = node.children
        nt, ne = _natural(then), _natural(orelse)
        longest = max(nt, ne)
        for branch, nat in ((then, nt), (orelse, ne)):
            flow = branch.children[-1]
            flow.pad = longest - nat
            flow.tb = 1 + flow.pad
            branch.tb = longest
        node.tb = ev.tb + longest
    else:
        node.tb = sum(c.tb for c in node.children)
    if node.tb > MAX_TB:
        raise TimeBoundError(f"time bound of {node.id} is {node.tb}, above the limit {MAX_TB}")
    if node.tb < 1:
        raise SBTreeError(f"block {node.id} has empty time bound")
    return node.tb


def annotate_distances(root: SBNode) -> SBNode:
    """Set distParent and distCumul on every node."""
    for node in root.walk():
        offset = 0
        for c in node.children:
            if node.kind == "loop":
                # offsets inside a loop are relative to the current iteration
                c.dist_parent = node.child("loop-body").tb if c.kind == "loop-step" and node.child("loop-body") else 0
            elif node.kind == "cond":
                c.dist_parent = 0 if c.kind == "cond-eval" else node.children[0].tb
            else:
                c.dist_parent = offset
                offset += c.tb
    root.dist_parent = 0
    for node in root.walk():
        node.dist_cumul = 0 if node.parent is None else node.dist_parent + node.parent.dist_cumul
    return root


def min_plain_time(node: SBNode) -> int:
    """Fewest steps any input can take through ``node`` without barriers."""
    if node.kind == "flow":
        return 1
    if node.is_flat:
        return node.nlines
    if node.kind == "loop":
        b2 = node.child("loop-body")
        per = (min_plain_time(b2) if b2 else 0) + min_plain_time(node.child("loop-step"))
        return min_plain_time(node.child("loop-init")) + node.max_iter * per
    if node.kind == "cond":
        ev, then, orelse = node.children
        return min_plain_time(ev) + min(min_plain_time(then), min_plain_time(orelse))
    return sum(min_plain_time(c) for c in node.children)


def custom_tb_override(root: SBNode, tb: int) -> int:
    """Validate a user-supplied global time bound for the unrolled encoding.

    The bound may undercut the tree-derived TB when the user knows paths are
    correlated, but it can never be below the fastest possible execution.
    """
    if not isinstance(tb, int) or tb < 1:
        raise TimeBoundError(f"time bound must be a positive integer, got {tb!r}")
    if tb > MAX_TB:
        raise TimeBoundError(f"time bound {tb} is above the limit {MAX_TB}")
    floor = min_plain_time(root)
    if tb < floor:
        raise TimeBoundError(
            f"time bound {tb} is below the minimum execution time {floor} (computed TB {root.tb})"
        )
    return tb


def leaf_of_line(root: SBNode) -> dict[int, SBNode]:
    return {label: leaf for leaf in root.leaves() for label in leaf.lines}


def to_dict(node: SBNode) -> dict:
    d = {
        "id": node.id,
        "kind": node.kind,
        "tb": node.tb,
        "distParent": node.dist_parent,
        "distCumul": node.dist_cumul,
    }
    if node.first is not None:
        d["lines"] = [node.first, node.last]
    if node.kind == "loop":
        d["maxIter"] = node.max_iter
        d["distPenul"] = list(node.penul)
    if node.children:
        d["children"] = [to_dict(c) for c in node.children]
    return d


def format_tree(root: SBNode) -> str:
    out = []
    for node in root.walk():
        depth = sum(1 for _ in node.ancestors())
        extra = ""
        if node.first is not None:
            extra += f" lines={node.first}..{node.last}"
        if node.kind == "loop":
            b1, period = node.penul
            extra += f" M={node.max_iter} distPenul=({b1},{period})"
        out.append(
            f"{'  ' * depth}{node.id} [{node.kind}] TB={node.tb} "
            f"distParent={node.dist_parent} distCumul={node.dist_cumul}{extra}"
        )
    return "\n".join(out) + "\n"


def to_json(root: SBNode) -> str:
    return json.dumps(to_dict(root), indent=2)
