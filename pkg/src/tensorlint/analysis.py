"""Call graph construction and inclusion-based pointer analysis.

The solver is Andersen-style: every variable node holds a set of abstract
objects, copy edges propagate set growth, and field loads/stores and calls
add edges on the fly as the receiver's points-to set grows. Analysis is
allocation-site sensitive and context-insensitive; SSA value ids give each
source-level assignment its own node.

Nodes are tuples:

* ``("v", function, value_id)``: an SSA value
* ``("f", object, field)``: a heap field
* ``("g", module, name)``: a module-level name
* ``("ret", function)``: the return value of a function
"""

from __future__ import annotations

import logging
import random
from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple, Union

from .frontend.lowering import ClassInfo, MODULE_INIT
from .ir import (
    Assign, Block, Const, GetField, Invoke, IRFunction, LexicalRead, LexicalWrite, New, Phi,
    PutField, Return, SUMMARY_FIELD, Value,
)
from .models import ModelSpec, UnknownModule, import_function
from .spans import SourceSpan

log = logging.getLogger(__name__)

SELF_FIELD = "$self"
INIT = "<init>"


# -- abstract objects ---------------------------------------------------------

@dataclass(frozen=True, order=True)
class AllocSite:
    function: str
    site: int
    token: str

    def __str__(self):
        return f"{self.token}@{self.function}#{self.site}"


@dataclass(frozen=True, order=True)
class FunctionObj:
    function: str

    def __str__(self):
        return f"function {self.function}"


@dataclass(frozen=True, order=True)
class ClassObj:
    cls: str

    def __str__(self):
        return f"class {self.cls}"


@dataclass(frozen=True, order=True)
class BoundMethod:
    """Trampoline: calling it forwards to ``target`` with the receiver
    (held in its ``$self`` field) prepended."""
    target: str
    function: str
    site: int

    def __str__(self):
        return f"bound {self.target}@{self.function}#{self.site}"


@dataclass(frozen=True, order=True)
class ModuleObj:
    """Opaque stand-in for a module without a model."""
    name: str

    def __str__(self):
        return f"module {self.name}"


@dataclass(frozen=True, order=True)
class ShapeList:
    elements: Tuple[Optional[int], ...]

    def __str__(self):
        return "[" + ", ".join("None" if e is None else str(e) for e in self.elements) + "]"


@dataclass(frozen=True, order=True)
class IntValue:
    n: int

    def __str__(self):
        return str(self.n)


@dataclass(frozen=True, order=True)
class NoneValue:
    def __str__(self):
        return "None"


AbstractObject = Union[AllocSite, FunctionObj, ClassObj, BoundMethod, ModuleObj, ShapeList,
                       IntValue, NoneValue]
_SCALARS = (IntValue, NoneValue, ShapeList)


def object_key(o) -> Tuple[str, str]:
    """Total order across object kinds, for deterministic output."""
    return (type(o).__name__, str(o))


def parse_shape_token(token: str) -> Tuple[Optional[int], ...]:
    body = token[len("shape:"):]
    return tuple(None if e == "None" else int(e) for e in body.split(",")) if body else ()


# -- results ------------------------------------------------------------------

class UnknownVariable(KeyError):
    pass


@dataclass(frozen=True)
class AnalysisWarning:
    code: str
    message: str
    span: Optional[SourceSpan]
    function: str = ""


@dataclass
class CallGraph:
    functions: Dict[str, IRFunction]
    nodes: Set[str] = field(default_factory=set)
    edges: Dict[Tuple[str, int], Set[str]] = field(default_factory=lambda: defaultdict(set))
    # (caller, site, target) -> {param index: caller value id}
    bindings: Dict[Tuple[str, int, str], Dict[int, int]] = field(default_factory=dict)
    unresolved: Set[Tuple[str, int]] = field(default_factory=set)
    warnings: List[AnalysisWarning] = field(default_factory=list)

    def targets(self, caller: str, site: int) -> Set[str]:
        return set(self.edges.get((caller, site), ()))

    def sites(self, caller: str) -> List[int]:
        return sorted(s for c, s in self.edges if c == caller)

    def callers_of(self, target: str) -> Set[Tuple[str, int]]:
        return {k for k, ts in self.edges.items() if target in ts}

    def has_edge(self, caller: str, target: str) -> bool:
        return any(c == caller and target in ts for (c, _), ts in self.edges.items())


@dataclass
class DataflowGraph:
    S: Dict[tuple, Set]
    edges: Set[Tuple[tuple, tuple]]         # (x, y): data flows from y to x
    functions: Dict[str, IRFunction]
    reached: Set[str] = field(default_factory=set)

    @property
    def V(self) -> Set[tuple]:
        out = set(self.S)
        for x, y in self.edges:
            out.add(x)
            out.add(y)
        return out

    def succ(self) -> Dict[tuple, Set[tuple]]:
        out: Dict[tuple, Set[tuple]] = defaultdict(set)
        for x, y in self.edges:
            out[y].add(x)
        return out


def value_node(function: str, vid: int) -> tuple:
    return ("v", function, vid)


def field_node(obj, name: str) -> tuple:
    return ("f", obj, name)


def points_to(g: DataflowGraph, v) -> Set:
    """S(v). ``v`` is a node tuple or a ``(function, value id)`` pair."""
    node = v if v and v[0] in ("v", "f", "g", "ret") else value_node(*v)
    if node not in g.S and node not in g.V:
        if node[0] == "v" and node[1] in g.functions and node[2] in g.functions[node[1]].values:
            return set()
        raise UnknownVariable(v)
    return set(g.S.get(node, ()))


# -- class models -------------------------------------------------------------

def synthesize_class_model(cls: ClassInfo, functions: Dict[str, IRFunction]) -> IRFunction:
    """Constructor for ``cls``: allocate the instance, give it one bound
    method per method, run ``__init__`` when present, return the instance."""
    init = functions.get(cls.methods.get("__init__", ""))
    names = list(init.param_names[2:]) if init is not None else []
    values: Dict[int, Value] = {}

    def new_value(name=None):
        vid = len(values)
        values[vid] = Value(vid, name, cls.span)
        return vid

    params = tuple(new_value(n) for n in [None] + names)
    block = Block("b0")
    site = 0
    inst = new_value("self")
    block.instructions.append(New(inst, f"instance:{cls.name}", site))
    for m in sorted(cls.methods):
        site += 1
        b = new_value(m)
        block.instructions.append(New(b, f"bound:{cls.methods[m]}", site))
        block.instructions.append(PutField(b, SELF_FIELD, inst))
        block.instructions.append(PutField(inst, m, b))
    if init is not None:
        f = new_value()
        block.instructions.append(GetField(f, inst, "__init__"))
        r = new_value()
        site += 1
        block.instructions.append(Invoke(r, f, None, params[1:], (), site))
    block.instructions.append(Return(inst))
    return IRFunction(f"{cls.name}.{INIT}", params, (None,) + tuple(names), [block], values,
                      span=cls.span, module=functions[cls.methods["__init__"]].module
                      if init is not None else None)


def _derive_classes(functions: Dict[str, IRFunction]) -> Dict[str, ClassInfo]:
    out: Dict[str, ClassInfo] = {}
    for f in functions.values():
        if f.declared_class:
            info = out.setdefault(f.declared_class, ClassInfo(f.declared_class, {}, f.span))
            info.methods[f.name.rsplit(".", 1)[1]] = f.name
    return out


# -- solver -------------------------------------------------------------------

class _Solver:
    def __init__(self, functions: Dict[str, IRFunction], classes: Dict[str, ClassInfo],
                 models: ModelSpec, seed: Optional[int]):
        self.functions = dict(functions)
        self.classes = classes
        self.models = models
        self.rng = random.Random(seed) if seed is not None else None
        self.S: Dict[tuple, Set] = defaultdict(set)
        self.succ: Dict[tuple, Set[tuple]] = defaultdict(set)
        self.edges: Set[Tuple[tuple, tuple]] = set()
        self.loads: Dict[tuple, List[Tuple[str, tuple]]] = defaultdict(list)
        self.stores: Dict[tuple, List[Tuple[str, tuple]]] = defaultdict(list)
        self.calls: Dict[tuple, List[Tuple[IRFunction, Invoke]]] = defaultdict(list)
        self.fields_of: Dict[object, Set[str]] = defaultdict(set)
        self.star_readers: Dict[object, Set[tuple]] = defaultdict(set)
        self.pending: Dict[tuple, Set] = {}
        self.queue: deque = deque()
        self.reached: Set[str] = set()
        self.linked: Set[Tuple[str, int, object]] = set()
        self.cg = CallGraph(self.functions)
        self.warned: Set[Tuple[str, int, str]] = set()
        # arity problems per call site and callee object; reported only when
        # every callee at the site has one
        self.arity: Dict[Tuple[str, int], Dict[object, List[str]]] = defaultdict(dict)
        self.sites: Dict[Tuple[str, int], Tuple[IRFunction, Invoke]] = {}

    # core set operations

    def add_objs(self, node: tuple, objs: Iterable) -> None:
        new = set(objs) - self.S[node]
        if not new:
            return
        self.S[node] |= new
        if node in self.pending:
            self.pending[node] |= new
        else:
            self.pending[node] = set(new)
            self.queue.append(node)

    def add_edge(self, src: tuple, dst: tuple) -> None:
        """``dst ≺ src``: everything ``src`` holds flows into ``dst``."""
        if dst in self.succ[src]:
            return
        self.succ[src].add(dst)
        self.edges.add((dst, src))
        if self.S.get(src):
            self.add_objs(dst, self.S[src])

    def field(self, obj, name: str) -> tuple:
        node = field_node(obj, name)
        if name not in self.fields_of[obj]:
            self.fields_of[obj].add(name)
            for reader in list(self.star_readers[obj]):
                self.add_edge(node, reader)
        return node

    def solve(self) -> None:
        while self.queue:
            if self.rng is not None and len(self.queue) > 1:
                k = self.rng.randrange(len(self.queue))
                self.queue.rotate(-k)
                node = self.queue.popleft()
                self.queue.rotate(k)
            else:
                node = self.queue.popleft()
            delta = self.pending.pop(node)
            for dst in list(self.succ[node]):
                self.add_objs(dst, delta)
            ordered = sorted(delta, key=object_key)
            for fname, dest in list(self.loads.get(node, ())):
                for o in ordered:
                    self.load(o, fname, dest)
            for fname, src in list(self.stores.get(node, ())):
                for o in ordered:
                    self.store(o, fname, src)
            for caller, ins in list(self.calls.get(node, ())):
                for o in ordered:
                    self.invoke(caller, ins, o)

    def load(self, o, name: str, dest: tuple) -> None:
        if isinstance(o, _SCALARS):
            return
        if name == SUMMARY_FIELD:
            self.star_readers[o].add(dest)
            self.field(o, SUMMARY_FIELD)
            for g in sorted(self.fields_of[o]):
                self.add_edge(field_node(o, g), dest)
            return
        self.add_edge(self.field(o, name), dest)
        self.add_edge(self.field(o, SUMMARY_FIELD), dest)

    def store(self, o, name: str, src: tuple) -> None:
        if isinstance(o, _SCALARS):
            return
        self.add_edge(src, self.field(o, name))

    # functions

    def reach(self, fname: str) -> None:
        if fname in self.reached:
            return
        self.reached.add(fname)
        self.cg.nodes.add(fname)
        f = self.functions[fname]
        v = lambda vid: value_node(fname, vid)
        for ins in f.instructions():
            if isinstance(ins, Const):
                lit = ins.literal
                if lit is None:
                    self.add_objs(v(ins.dest), [NoneValue()])
                elif type(lit) is int:
                    self.add_objs(v(ins.dest), [IntValue(lit)])
            elif isinstance(ins, Assign):
                self.add_edge(v(ins.src), v(ins.dest))
            elif isinstance(ins, Phi):
                for _, src in ins.incoming:
                    self.add_edge(v(src), v(ins.dest))
            elif isinstance(ins, New):
                self.add_objs(v(ins.dest), [self.allocate(f, ins)])
            elif isinstance(ins, GetField):
                self.register(self.loads, v(ins.obj), (ins.field, v(ins.dest)),
                              lambda o, x=ins: self.load(o, x.field, v(x.dest)))
            elif isinstance(ins, PutField):
                self.register(self.stores, v(ins.obj), (ins.field, v(ins.value)),
                              lambda o, x=ins: self.store(o, x.field, v(x.value)))
            elif isinstance(ins, LexicalRead):
                self.add_edge(("g", f.module, ins.name), v(ins.dest))
            elif isinstance(ins, LexicalWrite):
                self.add_edge(v(ins.value), ("g", f.module, ins.name))
            elif isinstance(ins, Return):
                self.add_edge(v(ins.value), ("ret", fname))
            elif isinstance(ins, Invoke):
                if ins.callee is None:
                    self.invoke_static(f, ins)
                else:
                    self.register(self.calls, v(ins.callee), (f, ins),
                                  lambda o, x=ins: self.invoke(f, x, o))

    def register(self, table, node, entry, apply) -> None:
        table[node].append(entry)
        for o in sorted(self.S.get(node, ()), key=object_key):
            apply(o)

    def allocate(self, f: IRFunction, ins: New):
        token = ins.token
        if token.startswith("function:"):
            return FunctionObj(token[len("function:"):])
        if token.startswith("class:"):
            cname = token[len("class:"):]
            obj = ClassObj(cname)
            info = self.classes.get(cname)
            if info is not None:
                for m, target in info.methods.items():
                    self.add_objs(self.field(obj, m), [FunctionObj(target)])
            return obj
        if token.startswith("bound:"):
            return BoundMethod(token[len("bound:"):], f.name, ins.site)
        if token.startswith("shape:"):
            return ShapeList(parse_shape_token(token))
        return AllocSite(f.name, ins.site, token)

    # calls

    def warn(self, caller: IRFunction, ins: Invoke, message: str, code: str = "ARI008") -> None:
        key = (caller.name, ins.site, message)
        if key in self.warned:
            return
        self.warned.add(key)
        self.cg.warnings.append(AnalysisWarning(code, message, caller.span_of(ins.dest), caller.name))

    def invoke_static(self, caller: IRFunction, ins: Invoke) -> None:
        target = ins.static
        module = target[len("model:"):].rsplit(".", 1)[0] if target.startswith("model:") else target
        try:
            fn = import_function(self.models, module)
        except UnknownModule:
            name = module.replace("/", ".")
            self.warn(caller, ins, f"no model for module '{name}'; treating it as opaque")
            self.add_objs(value_node(caller.name, ins.dest), [ModuleObj(name)])
            self.cg.unresolved.add((caller.name, ins.site))
            return
        self.functions.setdefault(fn.name, fn)
        for problem in self.link(caller, ins, fn, {}, receiver=None):
            self.warn(caller, ins, problem)

    def constructor(self, cname: str) -> Optional[IRFunction]:
        name = f"{cname}.{INIT}"
        if name not in self.functions:
            info = self.classes.get(cname)
            if info is None:
                return None
            self.functions[name] = synthesize_class_model(info, self.functions)
        return self.functions[name]

    def invoke(self, caller: IRFunction, ins: Invoke, o) -> None:
        key = (caller.name, ins.site, o)
        if key in self.linked:
            return
        self.linked.add(key)
        problems = self.dispatch(caller, ins, o)
        if problems is not None:
            self.sites[(caller.name, ins.site)] = (caller, ins)
            self.arity[(caller.name, ins.site)][o] = problems

    def dispatch(self, caller: IRFunction, ins: Invoke, o) -> Optional[List[str]]:
        if isinstance(o, FunctionObj):
            fn = self.functions.get(o.function)
            if fn is None:
                self.warn(caller, ins, f"call to unknown function {o.function}")
                return
            return self.link(caller, ins, fn, {0: [o]})
        elif isinstance(o, BoundMethod):
            fn = self.functions.get(o.target)
            if fn is None:
                return
            return self.link(caller, ins, fn, {0: [FunctionObj(o.target)]},
                             receiver=self.field(o, SELF_FIELD))
        elif isinstance(o, ClassObj):
            fn = self.constructor(o.cls)
            if fn is None:
                self.warn(caller, ins, f"call to class {o.cls} without a model")
                return
            return self.link(caller, ins, fn, {0: [o]})
        elif isinstance(o, AllocSite) and self.models.callable_function(o.token):
            fn = self.models.functions[self.models.callable_function(o.token)]
            return self.link(caller, ins, fn, {0: [o]})
        elif isinstance(o, (IntValue, NoneValue, ShapeList)):
            self.warn(caller, ins, f"call of a non-callable value {o}")
        else:
            label = o.token if isinstance(o, AllocSite) else str(o)
            self.warn(caller, ins, f"call of an object without a model ({label})")
        return None

    def report_arity(self) -> None:
        for key in sorted(self.arity):
            per_callee = self.arity[key]
            if per_callee and all(per_callee.values()):
                caller, ins = self.sites[key]
                first = sorted(per_callee, key=object_key)[0]
                for problem in per_callee[first]:
                    self.warn(caller, ins, problem)

    def link(self, caller: IRFunction, ins: Invoke, fn: IRFunction, direct: Dict[int, list],
             receiver: Optional[tuple] = None) -> List[str]:
        """Connect a call site to ``fn``; returns arity/keyword problems."""
        self.reach(fn.name)
        problems: List[str] = []
        cg = self.cg
        cg.edges[(caller.name, ins.site)].add(fn.name)
        v = lambda vid: value_node(caller.name, vid)
        p = lambda i: value_node(fn.name, fn.params[i])
        for i, objs in direct.items():
            self.add_objs(p(i), objs)
        binding: Dict[int, int] = {}
        first = 1
        if receiver is not None:
            if len(fn.params) > 1:
                self.add_edge(receiver, p(1))
            first = 2
        is_model = fn.module is None and fn.span is None
        n_declared = len(fn.params) - first
        for k, a in enumerate(ins.args):
            i = first + k
            if i < len(fn.params):
                self.add_edge(v(a), p(i))
                binding[i] = a
            elif not fn.varargs:
                problems.append(f"{_short(fn.name)} takes {n_declared} positional "
                                f"argument{'s' if n_declared != 1 else ''} but {len(ins.args)} were given")
                break
        for name, a in ins.kwargs:
            if name in fn.param_names[first:]:
                i = fn.param_names.index(name, first)
                if i in binding:
                    problems.append(f"{_short(fn.name)} got multiple values for '{name}'")
                    continue
                self.add_edge(v(a), p(i))
                binding[i] = a
            elif not fn.varargs:
                problems.append(f"{_short(fn.name)} has no parameter named '{name}'")
        if not is_model:
            missing = [fn.param_names[i] or f"v{fn.params[i]}" for i in range(first, len(fn.params)) if i not in binding]
            if missing:
                problems.append(f"{_short(fn.name)} is missing argument(s) {', '.join(missing)}")
        cg.bindings[(caller.name, ins.site, fn.name)] = binding
        self.add_edge(("ret", fn.name), v(ins.dest))
        return problems


def _short(name: str) -> str:
    return name.rsplit("/", 1)[-1]


def build(functions: Sequence[IRFunction], models: ModelSpec,
          classes: Optional[Dict[str, ClassInfo]] = None, seed: Optional[int] = None,
          entries: Optional[Sequence[str]] = None) -> Tuple[CallGraph, DataflowGraph]:
    """Solve the pointer analysis from the module initializers of ``functions``.

    ``functions`` may be one or more lowered modules (their class metadata is
    picked up automatically) or a plain list of IR functions.
    """
    table: Dict[str, IRFunction] = {}
    merged_classes: Dict[str, ClassInfo] = dict(classes or {})
    flat: List[IRFunction] = []
    for item in functions:
        if isinstance(item, IRFunction):
            flat.append(item)
        else:
            flat.extend(item)
            merged_classes.update(getattr(item, "classes", {}))
    for f in flat:
        table[f.name] = f
    for name, info in _derive_classes(table).items():
        merged_classes.setdefault(name, info)
    solver = _Solver({**models.functions, **table}, merged_classes, models, seed)
    if entries is None:
        entries = [f.name for f in flat if f.name.endswith("." + MODULE_INIT)] or [f.name for f in flat]
    for name in entries:
        solver.reach(name)
        # an entry behaves as if invoked, so its callee slot holds itself
        f = solver.functions[name]
        solver.add_objs(value_node(name, f.params[0]), [FunctionObj(name)])
    solver.solve()
    solver.report_arity()

    cg = solver.cg
    for fname in sorted(solver.reached):
        f = solver.functions[fname]
        for ins in f.instructions():
            if isinstance(ins, Invoke) and ins.callee is not None and not cg.edges.get((fname, ins.site)):
                cg.unresolved.add((fname, ins.site))
                if not solver.S.get(value_node(fname, ins.callee)):
                    solver.warn(f, ins, "call target could not be resolved")
    cg.functions = solver.functions
    cg.edges = {k: set(v) for k, v in cg.edges.items()}
    S = {k: set(v) for k, v in solver.S.items() if v}
    g = DataflowGraph(S, set(solver.edges), solver.functions, set(solver.reached))
    return cg, g


def callgraph_json(cg: CallGraph, g: Optional[DataflowGraph] = None) -> dict:
    edges = []
    for (caller, site), targets in sorted(cg.edges.items()):
        f = cg.functions.get(caller)
        span = None
        if f is not None:
            for ins in f.instructions():
                if isinstance(ins, Invoke) and ins.site == site:
                    span = f.span_of(ins.dest)
        entry = {"caller": caller, "site": site, "targets": sorted(targets)}
        if span is not None:
            entry["line"] = span.line_start
        edges.append(entry)
    out = {"nodes": sorted(cg.nodes), "edges": edges,
           "unresolved": [{"caller": c, "site": s} for c, s in sorted(cg.unresolved)]}
    if g is not None:
        pts = []
        for node in sorted((n for n in g.S if n[0] == "v"), key=lambda n: (n[1], n[2])):
            f = g.functions.get(node[1])
            value = f.values.get(node[2]) if f else None
            if value is None or not value.name or f.module is None:
                continue
            pts.append({"function": node[1], "value": node[2], "name": value.name,
                        "objects": sorted(str(o) for o in g.S[node])})
        out["points_to"] = pts
    return out
