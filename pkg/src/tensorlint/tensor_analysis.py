"""Tensor estimates: seed declared inputs, push types along the dataflow
graph, apply shape rules at tagged library calls, and report violations.

Estimates are sets of types per dataflow node. Copy edges move types
unchanged, except on return edges from user functions, where symbolic
dimensions named after a parameter are replaced by the constant the call
site passed for it. A call whose check fails contributes ``top`` to its
result, so one mistake is reported once. A node whose set grows past the
cap is pinned to ``top``; pinning happens between rounds so the result
does not depend on worklist order.
"""

from __future__ import annotations

import json
import logging
import random
from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

from .analysis import (
    AllocSite, CallGraph, DataflowGraph, IntValue, ShapeList, field_node, object_key,
    value_node,
)
from .ir import BinOp, GetField, Invoke, IRFunction, SUMMARY_FIELD
from .models import ModelMethod, ModelSpec, dotted_name
from .shapes import (
    DEFAULT_CONFIG, ShapeConfig, ShapeError, conv2d_check, conv3d_check, dense_apply,
    flatten_apply, fresh_labels, identity_apply, placeholder_type, pool2d_apply, reshape_apply,
)
from .spans import SourceSpan
from .tensor_types import (
    Function, Num, Product, PyType, Record, Sym, Tensor, TOP, Top, format_type,
    make_product, normalize, parse_type,
)

log = logging.getLogger(__name__)

DEFAULT_CAP = 16
_HARD_CAP_FACTOR = 64
SEVERITIES = ("error", "warning", "info")

CODE_NAMES = {
    "ARI000": "unanalyzed-tensor-arg",
    "ARI001": "reshape-size-mismatch",
    "ARI002": "reshape-invalid-factorization",
    "ARI003": "conv-rank-error",
    "ARI004": "conv-label-mismatch",
    "ARI005": "element-not-numeric",
    "ARI006": "reshape-wildcard-error",
    "ARI007": "widening-applied",
    "ARI008": "unresolved-call",
    "ARI009": "unresolved-declaration-selector",
}


# -- declarations -------------------------------------------------------------

class DeclarationError(ValueError):
    pass


@dataclass(frozen=True)
class CallResult:
    callee: str         # dotted library name, or a user function's qualified name


@dataclass(frozen=True)
class Parameter:
    function: str
    parameter: str


@dataclass(frozen=True)
class InputDeclaration:
    selector: object
    type: PyType


def parse_declarations(data: dict) -> List[InputDeclaration]:
    out = []
    for i, d in enumerate(data.get("declarations", [])):
        sel = d.get("selector", {})
        kind = sel.get("kind")
        if kind == "call-result":
            selector = CallResult(sel["callee"])
        elif kind == "parameter":
            selector = Parameter(sel["function"], sel["parameter"])
        else:
            raise DeclarationError(f"declaration {i}: unknown selector kind {kind!r}")
        try:
            t = parse_type(d["type"])
        except (KeyError, ValueError) as exc:
            raise DeclarationError(f"declaration {i}: {exc}") from None
        out.append(InputDeclaration(selector, t))
    return out


def load_declarations(path: str) -> List[InputDeclaration]:
    with open(path, encoding="utf-8") as fh:
        return parse_declarations(json.load(fh))


def _name_matches(qualified: str, wanted: str) -> bool:
    return qualified == wanted or qualified.endswith("." + wanted)


def resolve_declaration(decl: InputDeclaration, g: DataflowGraph, cg: CallGraph,
                        models: ModelSpec) -> List[tuple]:
    sel = decl.selector
    points = []
    if isinstance(sel, CallResult):
        for (caller, site), targets in sorted(cg.edges.items()):
            for t in targets:
                cls = models.class_of_function(t)
                hit = (dotted_name(cls) == sel.callee) if cls else _name_matches(t, sel.callee)
                if hit:
                    dest = _invoke(cg.functions[caller], site).dest
                    points.append(value_node(caller, dest))
    else:
        for fname in sorted(g.reached):
            f = g.functions[fname]
            if f.module is not None and _name_matches(fname, sel.function) \
                    and sel.parameter in f.param_names[1:]:
                points.append(value_node(fname, f.params[f.param_names.index(sel.parameter)]))
    return sorted(set(points))


def _invoke(f: IRFunction, site: int) -> Invoke:
    for ins in f.instructions():
        if isinstance(ins, Invoke) and ins.site == site:
            return ins
    raise KeyError(site)


# -- diagnostics --------------------------------------------------------------

@dataclass(frozen=True)
class Diagnostic:
    code: str
    severity: str
    message: str
    span: SourceSpan
    related: Tuple[SourceSpan, ...] = ()

    def sort_key(self):
        return (self.span.file, self.span.line_start, self.span.col_start, self.code, self.message)

    def to_json(self) -> dict:
        return {"code": self.code, "severity": self.severity, "message": self.message,
                "file": self.span.file, "line": self.span.line_start, "col": self.span.col_start}

    def format(self) -> str:
        s = self.span
        return f"{s.file}:{s.line_start}:{s.col_start}: {self.severity} {self.code}: {self.message}"


# -- call sites with shape rules ---------------------------------------------

@dataclass
class _Site:
    caller: IRFunction
    ins: Invoke
    target: IRFunction
    method: ModelMethod
    binding: Dict[int, int]

    @property
    def tag(self) -> str:
        return self.method.semantics

    @property
    def span(self) -> Optional[SourceSpan]:
        return self.caller.span_of(self.ins.dest)

    @property
    def dest(self) -> tuple:
        return value_node(self.caller.name, self.ins.dest)

    def arg(self, position: int) -> Optional[tuple]:
        vid = self.binding.get(position)
        return None if vid is None else value_node(self.caller.name, vid)

    def arg_nodes(self) -> List[tuple]:
        return [value_node(self.caller.name, v) for _, v in sorted(self.binding.items())]


def _tagged_sites(g: DataflowGraph, cg: CallGraph, models: ModelSpec) -> List[_Site]:
    out = []
    for (caller, site, target), binding in sorted(cg.bindings.items()):
        method = models.methods.get(target)
        if method is None or method.semantics is None or caller not in g.reached:
            continue
        f = cg.functions[caller]
        out.append(_Site(f, _invoke(f, site), cg.functions[target], method, binding))
    return out


def _single_int(g: DataflowGraph, node: Optional[tuple]) -> Optional[int]:
    if node is None:
        return None
    objs = g.S.get(node, ())
    if len(objs) == 1:
        (o,) = objs
        if isinstance(o, IntValue):
            return o.n
    return None


def _shapes(g: DataflowGraph, node: Optional[tuple]) -> List[Tuple[Optional[int], ...]]:
    if node is None:
        return []
    return sorted({o.elements for o in g.S.get(node, ()) if isinstance(o, ShapeList)},
                  key=lambda e: tuple(-2 if x is None else x for x in e))


def _units(g: DataflowGraph, site: _Site, node: Optional[tuple]):
    """Dense width: a parameter passes its name through, a constant its value."""
    if node is None:
        return None
    _, fname, vid = node
    f = g.functions[fname]
    if f.module is not None and vid in f.params[1:]:
        return f.param_names[f.params.index(vid)]
    n = _single_int(g, node)
    if n is not None:
        return n
    value = f.values.get(vid)
    return value.name if value is not None and value.name else None


class _Rules:
    """Shape rule evaluation for one tagged call site."""

    def __init__(self, g: DataflowGraph, config: ShapeConfig):
        self.g = g
        self.config = config

    def inputs(self, site: _Site) -> Optional[tuple]:
        return site.arg(1)

    def combos(self, site: _Site, types: Iterable[PyType]) -> List[Tuple[PyType, Optional[tuple]]]:
        """(input type, shape) pairs to evaluate; the shape is None for
        rules without a shape argument."""
        types = sorted(types, key=format_type)
        if site.tag == "reshape":
            shapes = _shapes(self.g, site.arg(2))
            return [(t, z) for t in types for z in shapes]
        return [(t, None) for t in types]

    def apply(self, site: _Site, t: PyType, shape) -> PyType:
        tag = site.tag
        if isinstance(t, Top):
            return TOP
        if not isinstance(t, Tensor):
            raise _NotATensor(format_type(t))
        g, cfg = self.g, self.config
        if tag == "reshape":
            return reshape_apply(t, shape)
        if tag in ("conv2d", "conv3d"):
            check = conv2d_check if tag == "conv2d" else conv3d_check
            filters = _single_int(g, site.arg(2))
            return check(t, filters, cfg, site.method.output or "same-as-input")
        if tag == "max_pooling2d":
            pool = _single_int(g, site.arg(2))
            stride = _single_int(g, site.arg(3))
            return pool2d_apply(t, pool, stride if stride is not None else pool, cfg)
        if tag == "flatten":
            return flatten_apply(t)
        if tag == "dense":
            return dense_apply(t, _units(g, site, site.arg(2)))
        if tag in ("dropout", "identity"):
            return identity_apply(t)
        raise ValueError(f"no rule for {tag}")


class _NotATensor(ShapeError):
    code = "ARI003"

    def __init__(self, got: str):
        super().__init__(f"expected a tensor, got {got}")


TRANSFERS: Dict[str, str] = {
    "reshape": "reshape_apply", "conv2d": "conv2d_check", "conv3d": "conv3d_check",
    "placeholder": "placeholder_type", "max_pooling2d": "pool2d_apply",
    "flatten": "flatten_apply", "dense": "dense_apply", "dropout": "identity_apply",
    "identity": "identity_apply", "opaque": "top",
}


# -- substitution on return edges ---------------------------------------------

def substitute(t: PyType, subst: Dict[str, int]) -> PyType:
    if not subst:
        return t

    def dim(d):
        if isinstance(d, Sym) and d.label in subst:
            return Num(subst[d.label])
        if isinstance(d, Product):
            return make_product([dim(f) for f in d.factors])
        return d

    if isinstance(t, Tensor):
        return normalize(Tensor(tuple(dim(d) for d in t.dims), substitute(t.element, subst)))
    if isinstance(t, Record):
        return Record(tuple((k, substitute(v, subst)) for k, v in t.fields))
    if isinstance(t, Function):
        return Function(tuple((k, substitute(v, subst)) for k, v in t.params),
                        substitute(t.result, subst))
    return t


# -- estimates ----------------------------------------------------------------

@dataclass
class TensorEstimate:
    T: Dict[tuple, FrozenSet[PyType]]
    widened: Set[tuple] = field(default_factory=set)
    declared: Dict[tuple, PyType] = field(default_factory=dict)
    placeholder_errors: Dict[Tuple[str, int], List[ShapeError]] = field(default_factory=dict)
    unresolved: List[InputDeclaration] = field(default_factory=list)
    cap: int = DEFAULT_CAP
    config: ShapeConfig = DEFAULT_CONFIG

    def get(self, node: tuple) -> FrozenSet[PyType]:
        return self.T.get(node, frozenset())

    def of_value(self, function: str, vid: int) -> FrozenSet[PyType]:
        return self.get(value_node(function, vid))


def _placeholders(g: DataflowGraph, sites: List[_Site]):
    """Placeholder results, with fresh labels handed out in source order."""
    labels = fresh_labels()
    results: Dict[tuple, Set[PyType]] = defaultdict(set)
    errors: Dict[Tuple[str, int], List[ShapeError]] = {}
    ordered = [s for s in sites if s.tag == "placeholder"]
    ordered.sort(key=lambda s: ((s.span.file, s.span.line_start, s.span.col_start)
                                if s.span else ("", 0, 0), s.caller.name, s.ins.site))
    for s in ordered:
        element = s.method.element or "num"
        for shape in _shapes(g, s.arg(2)):
            try:
                results[s.dest].add(placeholder_type(shape, labels, element))
            except ShapeError as exc:
                errors.setdefault((s.caller.name, s.ins.site), []).append(exc)
    return results, errors


def propagate(g: DataflowGraph, cg: CallGraph, decls: Sequence[InputDeclaration], models: ModelSpec,
              config: ShapeConfig = DEFAULT_CONFIG, cap: int = DEFAULT_CAP,
              seed: Optional[int] = None) -> TensorEstimate:
    """Least fixpoint of the estimate rules (with cap-and-pin widening)."""
    sites = _tagged_sites(g, cg, models)
    rules = _Rules(g, config)

    declared: Dict[tuple, Set[PyType]] = defaultdict(set)
    unresolved = []
    for d in decls:
        points = resolve_declaration(d, g, cg, models)
        if not points:
            unresolved.append(d)
        for p in points:
            declared[p].add(d.type)
    placeholder_out, placeholder_errors = _placeholders(g, sites)

    succ = g.succ()
    # symbolic-dimension substitution on return edges of user functions
    transforms: Dict[Tuple[tuple, tuple], Dict[str, int]] = {}
    for (caller, site, target), binding in cg.bindings.items():
        fn = cg.functions[target]
        if fn.module is None or caller not in g.reached:
            continue
        subst = {}
        for i, vid in binding.items():
            n = _single_int(g, value_node(caller, vid))
            name = fn.param_names[i]
            if n is not None and name:
                subst[name] = n
        dest = value_node(caller, _invoke(cg.functions[caller], site).dest)
        transforms[(("ret", target), dest)] = subst

    projections: Dict[tuple, List[Tuple[str, tuple]]] = defaultdict(list)
    arith: Dict[tuple, List[tuple]] = defaultdict(list)
    for fname in sorted(g.reached):
        f = g.functions[fname]
        for ins in f.instructions():
            if isinstance(ins, GetField):
                projections[value_node(fname, ins.obj)].append((ins.field, value_node(fname, ins.dest)))
            elif isinstance(ins, BinOp):
                for operand in (ins.lhs, ins.rhs):
                    arith[value_node(fname, operand)].append(value_node(fname, ins.dest))

    site_deps: Dict[tuple, List[_Site]] = defaultdict(list)
    for s in sites:
        if s.tag == "placeholder":
            continue
        nodes = s.arg_nodes() if s.tag == "opaque" else [rules.inputs(s)]
        for n in nodes:
            if n is not None:
                site_deps[n].append(s)

    pinned: Set[tuple] = set()
    hard_cap = cap * _HARD_CAP_FACTOR
    while True:
        T, over = _solve(succ, transforms, projections, arith, site_deps, rules, declared,
                         placeholder_out, pinned, cap, hard_cap, seed)
        if not over:
            break
        pinned |= over
    return TensorEstimate({k: frozenset(v) for k, v in T.items() if v}, pinned,
                          {k: next(iter(v)) for k, v in declared.items() if len(v) == 1},
                          placeholder_errors, unresolved, cap, config)


def _solve(succ, transforms, projections, arith, site_deps, rules, declared, placeholder_out,
           pinned, cap, hard_cap, seed):
    rng = random.Random(seed) if seed is not None else None
    T: Dict[tuple, Set[PyType]] = defaultdict(set)
    fixed = set(declared) | pinned
    queue: deque = deque()
    queued: Set[tuple] = set()
    over: Set[tuple] = set()

    def add(node, types):
        if node in fixed and node not in seeding:
            return
        new = set(types) - T[node]
        if not new:
            return
        T[node] |= new
        if len(T[node]) > cap:
            over.add(node)
            if len(T[node]) > hard_cap:
                # pathological growth: pin now rather than loop forever
                T[node] = {TOP}
                fixed.add(node)
        if node not in queued:
            queued.add(node)
            queue.append(node)

    seeding = set()
    for node in sorted(pinned):
        seeding.add(node)
        add(node, [TOP])
    for node, types in sorted(declared.items()):
        if node not in pinned:
            seeding.add(node)
            add(node, types)
    for node, types in sorted(placeholder_out.items()):
        add(node, types)
    seeding.clear()

    while queue:
        if rng is not None and len(queue) > 1:
            k = rng.randrange(len(queue))
            queue.rotate(-k)
            node = queue.popleft()
            queue.rotate(k)
        else:
            node = queue.popleft()
        queued.discard(node)
        current = set(T[node])
        for dst in succ.get(node, ()):
            subst = transforms.get((node, dst))
            add(dst, [substitute(t, subst) for t in current] if subst else current)
        if node in arith and any(isinstance(t, (Tensor, Top)) for t in current):
            # broadcasting is not modeled: arithmetic on a tensor is unknown
            for dst in arith[node]:
                add(dst, [TOP])
        for fname, dest in projections.get(node, ()):
            out = []
            for t in current:
                if isinstance(t, Record):
                    if fname == SUMMARY_FIELD:
                        out.extend(v for _, v in t.fields)
                    elif t.get(fname) is not None:
                        out.append(t.get(fname))
            if out:
                add(dest, out)
        for s in site_deps.get(node, ()):
            if s.tag == "opaque":
                add(s.dest, [TOP])
                continue
            out = []
            for t, shape in rules.combos(s, T[rules.inputs(s)]):
                try:
                    out.append(rules.apply(s, t, shape))
                except ShapeError:
                    # error recovery: a failed check yields top, which keeps
                    # later calls from reporting the same problem again
                    out.append(TOP)
            if out:
                add(s.dest, out)
    over = {n for n in over if n not in pinned}
    return T, over


# -- checking -----------------------------------------------------------------

@dataclass
class SiteVerdict:
    tag: str
    function: str
    site: int
    span: Optional[SourceSpan]
    passed: int
    failed: int


def check(g: DataflowGraph, cg: CallGraph, est: TensorEstimate, models: ModelSpec,
          verdicts: Optional[List[SiteVerdict]] = None) -> List[Diagnostic]:
    """Diagnostics for every tagged call site, plus widening and resolution
    warnings. Verdicts per site are appended to ``verdicts`` if given."""
    rules = _Rules(g, est.config)
    out: List[Diagnostic] = []
    for s in _tagged_sites(g, cg, models):
        span = s.span
        if span is None or s.tag == "opaque":
            continue
        if s.tag == "placeholder":
            errs = est.placeholder_errors.get((s.caller.name, s.ins.site), [])
            produced = len(est.get(s.dest))
            for code, exc in _distinct(errs):
                out.append(Diagnostic(code, "error" if not produced else "warning", str(exc), span))
            if verdicts is not None:
                verdicts.append(SiteVerdict(s.tag, s.caller.name, s.ins.site, span,
                                            produced, len(errs)))
            continue
        types = est.get(rules.inputs(s)) if rules.inputs(s) else frozenset()
        if not types:
            out.append(Diagnostic("ARI000", "info",
                                  f"no tensor type reaches the input of {s.tag}; call not checked", span))
            continue
        concrete = [t for t in types if not isinstance(t, Top)]
        if not concrete:
            continue
        combos = rules.combos(s, concrete)
        if not combos:
            out.append(Diagnostic("ARI000", "info",
                                  f"shape argument of {s.tag} is not a constant list; call not checked",
                                  span))
            continue
        errors: List[ShapeError] = []
        passed = 0
        for t, shape in combos:
            try:
                rules.apply(s, t, shape)
                passed += 1
            except ShapeError as exc:
                errors.append(exc)
        if verdicts is not None:
            verdicts.append(SiteVerdict(s.tag, s.caller.name, s.ins.site, span, passed, len(errors)))
        severity = "error" if passed == 0 else "warning"
        for code, exc in _distinct(errors):
            msg = str(exc)
            if passed:
                msg += f" (for {len(errors)} of {len(combos)} possible input types)"
            out.append(Diagnostic(code, severity, msg, span))

    for node in sorted(est.widened, key=repr):
        span = _node_span(g, node)
        if span is not None:
            out.append(Diagnostic("ARI007", "warning",
                                  f"more than {est.cap} possible types; widened to top", span))
    for w in cg.warnings:
        if w.span is not None:
            out.append(Diagnostic(w.code, "warning", w.message, w.span))
    for d in est.unresolved:
        span = _first_span(g)
        if span is not None:
            out.append(Diagnostic("ARI009", "warning",
                                  f"declaration {_describe_selector(d.selector)} matches no program point",
                                  span))
    return sorted(set(out), key=Diagnostic.sort_key)


def _distinct(errors: Sequence[ShapeError]):
    seen = {}
    for e in errors:
        seen.setdefault(e.code, e)
    return sorted(seen.items())


def _node_span(g: DataflowGraph, node: tuple) -> Optional[SourceSpan]:
    if node[0] == "v":
        f = g.functions.get(node[1])
        return f.span_of(node[2]) if f is not None else None
    return None


def _first_span(g: DataflowGraph) -> Optional[SourceSpan]:
    for fname in sorted(g.reached):
        f = g.functions[fname]
        if f.module is not None and f.span is not None:
            s = f.span
            return SourceSpan(s.file, 1, 1, 1, 1)
    return None


def _describe_selector(sel) -> str:
    if isinstance(sel, CallResult):
        return f"for the result of {sel.callee}"
    return f"for parameter {sel.parameter} of {sel.function}"


def verified_apis(verdicts: Iterable[SiteVerdict]) -> Set[str]:
    """Tags with at least one call site that checked successfully."""
    return {v.tag for v in verdicts if v.passed}


# -- type listing -------------------------------------------------------------

def record_view(g: DataflowGraph, est: TensorEstimate, node: tuple, depth: int = 3) -> List[PyType]:
    """Types for a node that holds heap objects rather than tensors: one
    record per object, built from its typed fields."""
    if depth == 0:
        return []
    out = []
    for o in sorted(g.S.get(node, ()), key=object_key):
        if not isinstance(o, AllocSite):
            continue
        fields = {}
        names = sorted({n[2] for n in g.S if n[0] == "f" and n[1] == o}
                       | {n[2] for n in est.T if n[0] == "f" and n[1] == o})
        for name in names:
            if name == SUMMARY_FIELD or name.startswith("$"):
                continue
            fnode = field_node(o, name)
            types = est.get(fnode) or frozenset(record_view(g, est, fnode, depth - 1))
            if len(types) == 1:
                fields[name] = next(iter(types))
        if fields:
            out.append(Record.of(fields))
    return sorted(set(out), key=format_type)


def describe(types: Iterable[PyType]) -> str:
    texts = sorted({format_type(t) for t in types})
    if len(texts) == 1:
        return texts[0]
    return "{" + ", ".join(texts) + "}"


@dataclass(frozen=True)
class TypeLine:
    file: str
    line: int
    text: str

    def format(self) -> str:
        return f"{self.file}:{self.line}: {self.text}"

    def to_json(self) -> dict:
        return {"file": self.file, "line": self.line, "type": self.text}


def _width(span: SourceSpan) -> Tuple[int, int]:
    return (span.line_end - span.line_start, span.col_end - span.col_start
            if span.line_end == span.line_start else span.col_end)


def signature(g: DataflowGraph, est: TensorEstimate, f: IRFunction) -> Optional[str]:
    params = []
    for vid, name in zip(f.params[1:], f.param_names[1:]):
        node = value_node(f.name, vid)
        types = est.get(node) or frozenset(record_view(g, est, node))
        if types:
            params.append(f"{name}: {describe(types)}")
    result = est.get(("ret", f.name))
    if not params and not result:
        return None
    return f"({', '.join(params)}) -> {describe(result) if result else 'top'}"


def type_listing(g: DataflowGraph, est: TensorEstimate) -> List[TypeLine]:
    """One entry per source line: the estimate of the widest typed def on
    it, or a signature on a function's first line."""
    best: Dict[Tuple[str, int], Tuple[Tuple[int, int], str]] = {}
    signatures: Dict[Tuple[str, int], str] = {}
    for fname in sorted(g.reached):
        f = g.functions[fname]
        if f.module is None:
            continue
        if not fname.endswith(".<module>") and f.span is not None:
            sig = signature(g, est, f)
            if sig:
                signatures[(f.span.file, f.span.line_start)] = sig
        params = set(f.params)
        for vid, value in f.values.items():
            if vid in params or value.span is None:
                continue
            types = est.of_value(fname, vid)
            if not types:
                continue
            key = (value.span.file, value.span.line_start)
            cand = (_width(value.span), describe(types))
            if key not in best or cand[0] > best[key][0]:
                best[key] = cand
    lines = {k: v[1] for k, v in best.items()}
    lines.update(signatures)
    return [TypeLine(file, line, text) for (file, line), text in sorted(lines.items())]
