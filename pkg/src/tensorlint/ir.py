"""Three-address SSA intermediate representation.

Values are function-scoped integers; ``v0`` is always the callee slot (the
function object being invoked), declared parameters follow. Control flow
is a list of basic blocks ending in ``Branch``/``Goto``/``Return``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Tuple, Union

import networkx as nx

from .spans import SourceSpan

SUMMARY_FIELD = "*"


@dataclass(frozen=True)
class Value:
    id: int
    name: Optional[str]
    span: Optional[SourceSpan]


# -- instructions -------------------------------------------------------------

@dataclass(frozen=True)
class Const:
    dest: int
    literal: object


@dataclass(frozen=True)
class Assign:
    dest: int
    src: int


@dataclass(frozen=True)
class Phi:
    dest: int
    incoming: Tuple[Tuple[str, int], ...]   # (predecessor block, value)


@dataclass(frozen=True)
class BinOp:
    dest: int
    op: str
    lhs: int
    rhs: int


@dataclass(frozen=True)
class New:
    """Allocation. ``token`` names what is allocated: ``function:Q``,
    ``class:Q``, ``bound:Q`` (method trampoline), or a class/type name."""
    dest: int
    token: str
    site: int


@dataclass(frozen=True)
class GetField:
    dest: int
    obj: int
    field: str


@dataclass(frozen=True)
class PutField:
    obj: int
    field: str
    value: int


@dataclass(frozen=True)
class Invoke:
    dest: int
    callee: Optional[int]
    static: Optional[str]
    args: Tuple[int, ...]
    kwargs: Tuple[Tuple[str, int], ...]
    site: int


@dataclass(frozen=True)
class LexicalRead:
    """Read of a module-level name from inside a function."""
    dest: int
    name: str


@dataclass(frozen=True)
class LexicalWrite:
    name: str
    value: int


@dataclass(frozen=True)
class Return:
    value: int


@dataclass(frozen=True)
class Branch:
    cond: int
    then: str
    orelse: str


@dataclass(frozen=True)
class Goto:
    target: str


Instruction = Union[Const, Assign, Phi, BinOp, New, GetField, PutField, Invoke,
                    LexicalRead, LexicalWrite, Return, Branch, Goto]
TERMINATORS = (Return, Branch, Goto)


def defs(ins) -> Optional[int]:
    return getattr(ins, "dest", None)


def uses(ins) -> Tuple[int, ...]:
    if isinstance(ins, Assign):
        return (ins.src,)
    if isinstance(ins, Phi):
        return tuple(v for _, v in ins.incoming)
    if isinstance(ins, BinOp):
        return (ins.lhs, ins.rhs)
    if isinstance(ins, GetField):
        return (ins.obj,)
    if isinstance(ins, PutField):
        return (ins.obj, ins.value)
    if isinstance(ins, Invoke):
        head = () if ins.callee is None else (ins.callee,)
        return head + tuple(ins.args) + tuple(v for _, v in ins.kwargs)
    if isinstance(ins, LexicalWrite):
        return (ins.value,)
    if isinstance(ins, Return):
        return (ins.value,)
    if isinstance(ins, Branch):
        return (ins.cond,)
    return ()


@dataclass
class Block:
    label: str
    instructions: List = field(default_factory=list)

    @property
    def terminated(self) -> bool:
        return bool(self.instructions) and isinstance(self.instructions[-1], TERMINATORS)

    def successors(self) -> Tuple[str, ...]:
        if not self.instructions:
            return ()
        last = self.instructions[-1]
        if isinstance(last, Branch):
            return (last.then, last.orelse)
        if isinstance(last, Goto):
            return (last.target,)
        return ()


@dataclass
class IRFunction:
    name: str
    params: Tuple[int, ...]                 # params[0] is the callee slot
    param_names: Tuple[Optional[str], ...]
    blocks: List[Block]
    values: Dict[int, Value]
    declared_class: Optional[str] = None
    span: Optional[SourceSpan] = None
    varargs: bool = False                   # surplus arguments are accepted silently
    module: Optional[str] = None            # owning source module; None for model code

    def instructions(self) -> Iterator:
        for b in self.blocks:
            yield from b.instructions

    def located(self) -> Iterator[Tuple[str, int, object]]:
        for b in self.blocks:
            for i, ins in enumerate(b.instructions):
                yield b.label, i, ins

    def block(self, label: str) -> Block:
        for b in self.blocks:
            if b.label == label:
                return b
        raise KeyError(label)

    def span_of(self, vid: int) -> Optional[SourceSpan]:
        v = self.values.get(vid)
        return v.span if v is not None else None


# -- validation ---------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    function: str
    message: str
    span: Optional[SourceSpan] = None
    value: Optional[int] = None


def validate(f: IRFunction) -> List[Violation]:
    """Every SSA, def-use and site-id violation in ``f`` (empty means ok)."""
    out: List[Violation] = []
    labels = [b.label for b in f.blocks]
    if len(set(labels)) != len(labels):
        out.append(Violation(f.name, "duplicate block labels"))
    if not f.blocks:
        return out + [Violation(f.name, "function has no blocks")]
    if not f.params:
        out.append(Violation(f.name, "missing callee parameter"))
    if f.declared_class is not None and len(f.params) < 2:
        out.append(Violation(f.name, "method without a self parameter", f.span))

    def_site: Dict[int, Tuple[str, int]] = {}
    for p in f.params:
        def_site[p] = (f.blocks[0].label, -1)
    sites = set()
    for label, i, ins in f.located():
        d = defs(ins)
        if d is not None:
            if d in def_site:
                out.append(Violation(f.name, f"v{d} defined more than once", f.span_of(d), d))
            def_site[d] = (label, i)
        site = getattr(ins, "site", None)
        if site is not None:
            if site in sites:
                out.append(Violation(f.name, f"site id {site} used more than once", value=d))
            sites.add(site)
        if isinstance(ins, TERMINATORS) and i != len(f.block(label).instructions) - 1:
            out.append(Violation(f.name, f"terminator in the middle of block {label}"))
    for b in f.blocks:
        for succ in b.successors():
            if succ not in labels:
                out.append(Violation(f.name, f"branch to unknown block {succ}"))
        if not b.terminated:
            out.append(Violation(f.name, f"block {b.label} does not end in a terminator"))

    graph = nx.DiGraph()
    graph.add_nodes_from(labels)
    for b in f.blocks:
        for succ in b.successors():
            if succ in labels:
                graph.add_edge(b.label, succ)
    idom = nx.immediate_dominators(graph, labels[0])

    def dominates(a: str, b: str) -> bool:
        while True:
            if a == b:
                return True
            parent = idom.get(b)
            if parent is None or parent == b:
                return False
            b = parent

    for label, i, ins in f.located():
        if label not in idom:
            continue  # unreachable code
        if isinstance(ins, Phi):
            preds = set(graph.predecessors(label))
            for pred, v in ins.incoming:
                if v not in def_site:
                    out.append(Violation(f.name, f"phi uses undefined v{v}", f.span_of(ins.dest), v))
                elif pred not in preds:
                    out.append(Violation(f.name, f"phi names {pred}, not a predecessor of {label}"))
                elif pred in idom and not dominates(def_site[v][0], pred):
                    out.append(Violation(f.name, f"phi operand v{v} not available from {pred}",
                                         f.span_of(ins.dest), v))
            continue
        for v in uses(ins):
            if v not in def_site:
                out.append(Violation(f.name, f"use of undefined v{v}", f.span_of(defs(ins) or v), v))
                continue
            dl, di = def_site[v]
            ok = di < i if dl == label else dominates(dl, label)
            if not ok:
                out.append(Violation(f.name, f"use of v{v} is not dominated by its definition",
                                     f.span_of(v), v))
    return out


# -- printing -----------------------------------------------------------------

def _v(x: int) -> str:
    return f"v{x}"


def format_instruction(ins) -> str:
    if isinstance(ins, Const):
        lit = ins.literal
        text = repr(lit) if isinstance(lit, str) else ("None" if lit is None else str(lit))
        return f"{_v(ins.dest)} = const {text}"
    if isinstance(ins, Assign):
        return f"{_v(ins.dest)} = {_v(ins.src)}"
    if isinstance(ins, Phi):
        inc = ", ".join(f"{b}: {_v(v)}" for b, v in ins.incoming)
        return f"{_v(ins.dest)} = phi [{inc}]"
    if isinstance(ins, BinOp):
        return f"{_v(ins.dest)} = {_v(ins.lhs)} {ins.op} {_v(ins.rhs)}"
    if isinstance(ins, New):
        return f"{_v(ins.dest)} = new {ins.token} @{ins.site}"
    if isinstance(ins, GetField):
        return f"{_v(ins.dest)} = getfield {_v(ins.obj)} .{ins.field}"
    if isinstance(ins, PutField):
        return f"putfield {_v(ins.obj)} .{ins.field} = {_v(ins.value)}"
    if isinstance(ins, Invoke):
        args = [_v(a) for a in ins.args] + [f"{k}={_v(v)}" for k, v in ins.kwargs]
        if ins.static is not None:
            return f"{_v(ins.dest)} = invoke-static {ins.static}({', '.join(args)}) @{ins.site}"
        return f"{_v(ins.dest)} = invoke {_v(ins.callee)}({', '.join(args)}) @{ins.site}"
    if isinstance(ins, LexicalRead):
        return f"{_v(ins.dest)} = lexical-read {ins.name}"
    if isinstance(ins, LexicalWrite):
        return f"lexical-write {ins.name} = {_v(ins.value)}"
    if isinstance(ins, Return):
        return f"return {_v(ins.value)}"
    if isinstance(ins, Branch):
        return f"branch {_v(ins.cond)} ? {ins.then} : {ins.orelse}"
    if isinstance(ins, Goto):
        return f"goto {ins.target}"
    raise TypeError(f"not an instruction: {ins!r}")


def pretty_print(f: IRFunction) -> str:
    params = ", ".join(_v(p) + (f" {n}" if n else "") for p, n in zip(f.params, f.param_names))
    head = f"function {f.name}({params})"
    if f.declared_class:
        head += f" in {f.declared_class}"
    lines = [head + ":"]
    for b in f.blocks:
        lines.append(f"  {b.label}:")
        for ins in b.instructions:
            lines.append("    " + format_instruction(ins))
    return "\n".join(lines) + "\n"
