"""Lowering from the subset AST to SSA IR.

Module-level statements go into a synthetic ``<module>`` function. Names
bound at module level are also written to a lexical slot so functions can
read them; function locals live purely in SSA values.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Set, Tuple

from ..ir import (
    Assign, BinOp, Block, Branch, Const, GetField, Goto, Invoke, IRFunction, LexicalRead,
    LexicalWrite, New, Phi, PutField, Return, SUMMARY_FIELD, Value,
)
from .ast_nodes import LoweringError, Node, SourceSpan, UnsupportedConstruct

MODULE_INIT = "<module>"


@dataclass
class ClassInfo:
    name: str                       # qualified
    methods: Dict[str, str]         # method name -> qualified function name
    span: SourceSpan
    base: Optional[str] = None


class LoweredModule(list):
    """The lowered functions (a list of IRFunction) plus class metadata."""

    def __init__(self, functions, module: str, classes: Dict[str, ClassInfo]):
        super().__init__(functions)
        self.module = module
        self.classes = classes

    @property
    def init(self) -> IRFunction:
        return self[0]


def import_target(module_name: str) -> str:
    return f"model:{module_name.replace('.', '/')}.import"


def shape_token(elements) -> str:
    return "shape:" + ",".join("None" if e is None else str(e) for e in elements)


def module_name_for(path: str) -> str:
    stem = os.path.splitext(os.path.basename(path))[0]
    return re.sub(r"\W", "_", stem) or "module"


def _assigned_names(body: List[Node]) -> Set[str]:
    names: Set[str] = set()
    for s in body:
        for n in _stmt_nodes(s):
            if n.kind == "Assign":
                names.update(t["id"] for t in n["targets"] if t.kind == "Name")
            elif n.kind == "AugAssign" and n["target"].kind == "Name":
                names.add(n["target"]["id"])
            elif n.kind == "With":
                names.update(t for _, t in n["items"] if t)
            elif n.kind in ("Import", "ImportFrom"):
                for name, alias in n["names"]:
                    names.add(alias or (name.split(".")[0] if n.kind == "Import" else name))
            elif n.kind in ("FunctionDef", "ClassDef"):
                names.add(n["name"])
    return names


def _stmt_nodes(s: Node):
    """``s`` and the statements nested in its blocks (not inside defs)."""
    yield s
    if s.kind in ("If", "While", "With"):
        for key in ("body", "orelse"):
            for child in s.fields.get(key, []):
                yield from _stmt_nodes(child)


def _fold(n: Node):
    """Constant value of an integer expression, or ``None``."""
    if n.kind == "Constant" and type(n["value"]) is int:
        return n["value"]
    if n.kind == "BinOp" and n["op"] in ("+", "-", "*", "//"):
        a, b = _fold(n["left"]), _fold(n["right"])
        if a is None or b is None:
            return None
        if n["op"] == "+":
            return a + b
        if n["op"] == "-":
            return a - b
        if n["op"] == "*":
            return a * b
        return a // b if b else None
    return None


class _FunctionLowering:
    def __init__(self, owner: "_ModuleLowering", name: str, params: List[str], span: SourceSpan,
                 declared_class: Optional[str] = None, is_module: bool = False,
                 local_names: Optional[Set[str]] = None):
        self.owner = owner
        self.name = name
        self.span = span
        self.declared_class = declared_class
        self.is_module = is_module
        self.values: Dict[int, Value] = {}
        self.blocks: List[Block] = []
        self.next_site = 0
        head = SourceSpan(span.file, span.line_start, span.col_start, span.line_start, span.col_start)
        self.params = [self.new_value(None, head)] + [self.new_value(p, head) for p in params]
        self.param_names = (None,) + tuple(params)
        self.cur = self.new_block()
        self.env: Dict[str, int] = {p: v for p, v in zip(params, self.params[1:])}
        self.locals = local_names or set()

    # plumbing

    def new_value(self, name: Optional[str], span: Optional[SourceSpan]) -> int:
        vid = len(self.values)
        self.values[vid] = Value(vid, name, span)
        return vid

    def new_block(self) -> Block:
        b = Block(f"b{len(self.blocks)}")
        self.blocks.append(b)
        return b

    def site(self) -> int:
        s = self.next_site
        self.next_site += 1
        return s

    def emit(self, ins) -> None:
        self.cur.instructions.append(ins)

    def temp(self, span: SourceSpan, name: Optional[str] = None) -> int:
        return self.new_value(name, span)

    def finish(self) -> IRFunction:
        if not self.cur.terminated:
            none = self.temp(self.span)
            self.emit(Const(none, None))
            self.emit(Return(none))
        for b in self.blocks:
            if not b.terminated:
                raise LoweringError(self.span, f"block {b.label} of {self.name} is unterminated")
        return IRFunction(self.name, tuple(self.params), self.param_names, self.blocks, self.values,
                          self.declared_class, self.span, module=self.owner.module)

    # binding

    def bind(self, name: str, vid: int, node: Node, stmt: Node) -> None:
        value = self.values[vid]
        if value.name is None:
            self.values[vid] = replace(value, name=name)
            self.env[name] = vid
        else:
            dest = self.new_value(name, stmt.span)
            self.emit(Assign(dest, vid))
            self.env[name] = dest
        if self.is_module:
            self.emit(LexicalWrite(name, self.env[name]))

    def read_name(self, node: Node) -> int:
        name = node["id"]
        if name in self.env and (self.is_module or name in self.locals):
            return self.env[name]
        dest = self.temp(node.span)
        self.emit(LexicalRead(dest, name))
        return dest

    # expressions

    def expr(self, n: Node) -> int:
        k = n.kind
        if k == "Name":
            return self.read_name(n)
        if k == "Constant":
            dest = self.temp(n.span)
            self.emit(Const(dest, n["value"]))
            return dest
        if k == "Attribute":
            obj = self.expr(n["value"])
            dest = self.temp(n.span)
            self.emit(GetField(dest, obj, n["attr"]))
            return dest
        if k == "Subscript":
            obj = self.expr(n["value"])
            key = self.field_key(n["index"])
            dest = self.temp(n.span)
            self.emit(GetField(dest, obj, key))
            return dest
        if k == "Call":
            callee = self.expr(n["func"])
            args = tuple(self.expr(a) for a in n["args"])
            kwargs = tuple((name, self.expr(v)) for name, v in n["keywords"])
            dest = self.temp(n.span)
            self.emit(Invoke(dest, callee, None, args, kwargs, self.site()))
            return dest
        if k in ("ListLit", "TupleLit"):
            elements = [None if e.kind == "Constant" and e["value"] is None else _fold(e)
                        for e in n["elts"]]
            is_shape = n["elts"] and all(
                (e.kind == "Constant" and e["value"] is None) or v is not None
                for e, v in zip(n["elts"], elements))
            dest = self.temp(n.span)
            if is_shape:
                self.emit(New(dest, shape_token(elements), self.site()))
                return dest
            values = [self.expr(e) for e in n["elts"]]
            self.emit(New(dest, "list" if k == "ListLit" else "tuple", self.site()))
            for v in values:
                self.emit(PutField(dest, SUMMARY_FIELD, v))
            return dest
        if k == "DictLit":
            entries = [(self.field_key(key), self.expr(v)) for key, v in zip(n["keys"], n["values"])]
            dest = self.temp(n.span)
            self.emit(New(dest, "dict", self.site()))
            for key, v in entries:
                self.emit(PutField(dest, key, v))
            return dest
        if k in ("BinOp", "Compare"):
            folded = _fold(n) if k == "BinOp" else None
            if folded is not None:
                dest = self.temp(n.span)
                self.emit(Const(dest, folded))
                return dest
            lhs = self.expr(n["left"])
            rhs = self.expr(n["right"])
            dest = self.temp(n.span)
            self.emit(BinOp(dest, n["op"], lhs, rhs))
            return dest
        raise LoweringError(n.span, f"cannot lower expression {k}")

    def field_key(self, index: Node) -> str:
        if index.kind == "Constant" and isinstance(index["value"], str):
            return index["value"]
        self.expr(index)
        return SUMMARY_FIELD

    # statements

    def block(self, body: List[Node]) -> None:
        for s in body:
            if self.cur.terminated:
                # code after a return: keep lowering into an unreachable block
                self.cur = self.new_block()
            self.stmt(s)

    def store(self, target: Node, vid: int, stmt: Node) -> None:
        if target.kind == "Name":
            self.bind(target["id"], vid, target, stmt)
        elif target.kind == "Attribute":
            obj = self.expr(target["value"])
            self.emit(PutField(obj, target["attr"], vid))
        elif target.kind == "Subscript":
            obj = self.expr(target["value"])
            key = self.field_key(target["index"])
            self.emit(PutField(obj, key, vid))
        else:
            raise LoweringError(target.span, f"cannot assign to {target.kind}")

    def stmt(self, s: Node) -> None:
        k = s.kind
        if k == "Assign":
            vid = self.expr(s["value"])
            targets = s["targets"]
            if len(targets) > 1 and self.values[vid].name is None:
                # chained assignment: keep the temp anonymous so each name gets its own def
                self.values[vid] = replace(self.values[vid], name="")
            for t in targets:
                self.store(t, vid, s)
        elif k == "AugAssign":
            cur = self.expr(s["target"])
            rhs = self.expr(s["value"])
            dest = self.temp(s.span)
            self.emit(BinOp(dest, s["op"], cur, rhs))
            self.store(s["target"], dest, s)
        elif k == "ExprStmt":
            self.expr(s["value"])
        elif k == "Return":
            if self.is_module:
                raise LoweringError(s.span, "return outside function")
            if s["value"] is None:
                vid = self.temp(s.span)
                self.emit(Const(vid, None))
            else:
                vid = self.expr(s["value"])
            self.emit(Return(vid))
        elif k == "If":
            self.lower_if(s)
        elif k == "While":
            self.lower_while(s)
        elif k == "With":
            for ctx, target in s["items"]:
                vid = self.expr(ctx)
                if target:
                    self.bind(target, vid, ctx, s)
            self.block(s["body"])
        elif k == "Import":
            for name, alias in s["names"]:
                if alias:
                    self.bind(alias, self.import_call(name, s), s, s)
                else:
                    top = name.split(".")[0]
                    self.bind(top, self.import_call(top, s), s, s)
        elif k == "ImportFrom":
            module = self.import_call(s["module"], s)
            for name, alias in s["names"]:
                dest = self.temp(s.span)
                self.emit(GetField(dest, module, name))
                self.bind(alias or name, dest, s, s)
        elif k == "FunctionDef":
            if not self.is_module:
                raise UnsupportedConstruct(s.span, "nested function")
            qname = self.owner.lower_function(s)
            dest = self.temp(s.span)
            self.emit(New(dest, f"function:{qname}", self.site()))
            self.bind(s["name"], dest, s, s)
        elif k == "ClassDef":
            if not self.is_module:
                raise UnsupportedConstruct(s.span, "nested class")
            qname = self.owner.lower_class(s)
            dest = self.temp(s.span)
            self.emit(New(dest, f"class:{qname}", self.site()))
            self.bind(s["name"], dest, s, s)
        else:
            raise LoweringError(s.span, f"cannot lower statement {k}")

    def import_call(self, module: str, s: Node) -> int:
        dest = self.temp(s.span)
        self.emit(Invoke(dest, None, import_target(module), (), (), self.site()))
        return dest

    def merge(self, exits: List[Tuple[str, Dict[str, int]]], span: SourceSpan) -> None:
        if not exits:
            self.env = {}
            return
        env: Dict[str, int] = {}
        phis = []
        names = sorted(set().union(*(e.keys() for _, e in exits)))
        for name in names:
            incoming = tuple((label, e[name]) for label, e in exits if name in e)
            distinct = {v for _, v in incoming}
            if len(distinct) == 1 and len(incoming) == len(exits):
                env[name] = incoming[0][1]
                continue
            dest = self.new_value(name, span)
            phis.append(Phi(dest, incoming))
            env[name] = dest
        self.cur.instructions[0:0] = phis
        self.env = env

    def lower_if(self, s: Node) -> None:
        cond = self.expr(s["test"])
        then_b, else_b = self.new_block(), self.new_block()
        join = Block("")  # labelled once allocated, so block order follows source
        self.emit(Branch(cond, then_b.label, else_b.label))
        env0 = dict(self.env)
        exits = []
        pending = []
        for blk, body in ((then_b, s["body"]), (else_b, s["orelse"])):
            self.cur = blk
            self.env = dict(env0)
            self.block(body)
            if not self.cur.terminated:
                pending.append(self.cur)
                exits.append((self.cur.label, self.env))
        join = self.new_block()
        for blk in pending:
            blk.instructions.append(Goto(join.label))
        self.cur = join
        self.merge(exits, s.span)

    def lower_while(self, s: Node) -> None:
        pre = self.cur
        header = self.new_block()
        self.emit(Goto(header.label))
        assigned = sorted(n for n in _assigned_names(s["body"]) if self.is_module or n in self.locals)
        phi_dests = {}
        entry = dict(self.env)
        for name in assigned:
            phi_dests[name] = self.new_value(name, s.span)
        self.env = dict(entry)
        self.env.update(phi_dests)
        header_env = dict(self.env)
        self.cur = header
        cond = self.expr(s["test"])
        body_b = self.new_block()
        exit_b = Block("")
        self.emit(Branch(cond, body_b.label, "?"))
        self.cur = body_b
        self.block(s["body"])
        back = None
        if not self.cur.terminated:
            self.emit(Goto(header.label))
            back = (self.cur.label, self.env)
        exit_b = self.new_block()
        header.instructions[-1] = Branch(cond, body_b.label, exit_b.label)
        phis = []
        for name in assigned:
            incoming = []
            if name in entry:
                incoming.append((pre.label, entry[name]))
            if back is not None and name in back[1]:
                incoming.append((back[0], back[1][name]))
            phis.append(Phi(phi_dests[name], tuple(incoming)))
        header.instructions[0:0] = phis
        self.cur = exit_b
        self.env = header_env


class _ModuleLowering:
    def __init__(self, module: str):
        self.module = module
        self.functions: List[IRFunction] = []
        self.classes: Dict[str, ClassInfo] = {}
        self.class_names: Dict[str, str] = {}

    def lower_function(self, s: Node, owner_class: Optional[str] = None) -> str:
        prefix = owner_class or self.module
        qname = f"{prefix}.{s['name']}"
        if owner_class and not s["params"]:
            raise UnsupportedConstruct(s.span, "method without self parameter")
        fl = _FunctionLowering(self, qname, s["params"], s.span, owner_class,
                               local_names=_assigned_names(s["body"]) | set(s["params"]))
        fl.block(s["body"])
        self.functions.append(fl.finish())
        return qname

    def lower_class(self, s: Node) -> str:
        qname = f"{self.module}.{s['name']}"
        methods: Dict[str, str] = {}
        base = None
        for b in s["bases"]:
            if b.kind == "Name" and b["id"] == "object":
                continue
            if b.kind == "Name" and b["id"] in self.class_names:
                base = self.class_names[b["id"]]
                methods.update(self.classes[base].methods)
                continue
            raise UnsupportedConstruct(b.span, "base class outside the analyzed module")
        for item in s["body"]:
            if item.kind != "FunctionDef":
                raise UnsupportedConstruct(item.span, "class body statement other than a method")
            methods[item["name"]] = self.lower_function(item, owner_class=qname)
        self.classes[qname] = ClassInfo(qname, methods, s.span, base)
        self.class_names[s["name"]] = qname
        return qname


def lower_module(module: Node, name: Optional[str] = None) -> LoweredModule:
    """Lower a parsed Module; the first function is the module initializer."""
    if module.kind != "Module":
        raise LoweringError(module.span, "expected a Module node")
    name = name or module_name_for(module.span.file)
    ml = _ModuleLowering(name)
    init = _FunctionLowering(ml, f"{name}.{MODULE_INIT}", [], module.span, is_module=True)
    init.block(module["body"])
    functions = [init.finish()] + ml.functions
    return LoweredModule(functions, name, ml.classes)
