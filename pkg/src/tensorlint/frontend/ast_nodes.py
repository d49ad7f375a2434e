"""A small AST for the analyzed Python subset, built from the stdlib parser."""

from __future__ import annotations

import ast
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from ..spans import SourceSpan

__all__ = [
    "SourceSpan", "Node", "FrontendError", "SourceSyntaxError", "UnsupportedConstruct",
    "LoweringError", "parse_module", "unparse", "structure", "KINDS",
]

KINDS = frozenset({
    "Module", "FunctionDef", "ClassDef", "If", "While", "With", "Return", "Assign",
    "AugAssign", "Call", "Attribute", "Subscript", "Name", "Constant", "ListLit",
    "DictLit", "TupleLit", "BinOp", "Compare", "Import", "ImportFrom",
    # expression statements (calls evaluated for effect)
    "ExprStmt",
})


@dataclass(eq=False)
class Node:
    kind: str
    span: SourceSpan
    fields: Dict[str, Any] = field(default_factory=dict)

    def __getitem__(self, key: str) -> Any:
        return self.fields[key]

    def children(self) -> List["Node"]:
        out = []
        for value in self.fields.values():
            _collect(value, out)
        return out

    def walk(self):
        yield self
        for child in self.children():
            yield from child.walk()


def _collect(value, out):
    if isinstance(value, Node):
        out.append(value)
    elif isinstance(value, (list, tuple)):
        for v in value:
            _collect(v, out)


class FrontendError(Exception):
    def __init__(self, span: Optional[SourceSpan], message: str):
        super().__init__(f"{span}: {message}" if span else message)
        self.span = span
        self.message = message


class SourceSyntaxError(FrontendError):
    pass


class UnsupportedConstruct(FrontendError):
    def __init__(self, span: SourceSpan, construct: str):
        super().__init__(span, f"unsupported construct: {construct}")
        self.construct = construct


class LoweringError(FrontendError):
    pass


_BINOPS = {
    ast.Add: "+", ast.Sub: "-", ast.Mult: "*", ast.Div: "/", ast.FloorDiv: "//",
    ast.Mod: "%", ast.Pow: "**", ast.MatMult: "@",
}
_CMPOPS = {
    ast.Eq: "==", ast.NotEq: "!=", ast.Lt: "<", ast.LtE: "<=", ast.Gt: ">", ast.GtE: ">=",
    ast.Is: "is", ast.IsNot: "is not", ast.In: "in", ast.NotIn: "not in",
}


class _Converter:
    def __init__(self, path: str):
        self.path = path

    def span(self, node) -> SourceSpan:
        return SourceSpan(self.path, node.lineno, node.col_offset + 1,
                          node.end_lineno, node.end_col_offset + 1)

    def unsupported(self, node, what: str):
        raise UnsupportedConstruct(self.span(node), what)

    # statements

    def body(self, stmts, allow_docstring=True) -> List[Node]:
        out = []
        for i, s in enumerate(stmts):
            if (allow_docstring and i == 0 and isinstance(s, ast.Expr)
                    and isinstance(s.value, ast.Constant) and isinstance(s.value.value, str)):
                continue
            if isinstance(s, ast.Pass):
                continue
            out.append(self.stmt(s))
        return out

    def stmt(self, s) -> Node:
        sp = self.span(s)
        if isinstance(s, ast.FunctionDef):
            if s.decorator_list:
                self.unsupported(s, "decorator")
            a = s.args
            if a.vararg or a.kwarg or a.kwonlyargs or a.posonlyargs:
                self.unsupported(s, "starred parameters")
            if a.defaults:
                self.unsupported(s, "default parameter values")
            params = [p.arg for p in a.args]
            return Node("FunctionDef", sp, {"name": s.name, "params": params, "body": self.body(s.body)})
        if isinstance(s, ast.AsyncFunctionDef):
            self.unsupported(s, "async function")
        if isinstance(s, ast.ClassDef):
            if s.decorator_list:
                self.unsupported(s, "decorator")
            if s.keywords:
                self.unsupported(s, "class keywords")
            if len(s.bases) > 1:
                self.unsupported(s, "multiple inheritance")
            bases = [self.expr(b) for b in s.bases]
            return Node("ClassDef", sp, {"name": s.name, "bases": bases, "body": self.body(s.body)})
        if isinstance(s, ast.If):
            return Node("If", sp, {"test": self.expr(s.test), "body": self.body(s.body, False),
                                   "orelse": self.body(s.orelse, False)})
        if isinstance(s, ast.While):
            if s.orelse:
                self.unsupported(s, "while-else")
            return Node("While", sp, {"test": self.expr(s.test), "body": self.body(s.body, False)})
        if isinstance(s, ast.With):
            items = []
            for item in s.items:
                target = None
                if item.optional_vars is not None:
                    if not isinstance(item.optional_vars, ast.Name):
                        self.unsupported(item.optional_vars, "with-target pattern")
                    target = item.optional_vars.id
                items.append((self.expr(item.context_expr), target))
            return Node("With", sp, {"items": items, "body": self.body(s.body, False)})
        if isinstance(s, ast.Return):
            return Node("Return", sp, {"value": self.expr(s.value) if s.value is not None else None})
        if isinstance(s, ast.Assign):
            targets = [self.target(t) for t in s.targets]
            return Node("Assign", sp, {"targets": targets, "value": self.expr(s.value)})
        if isinstance(s, ast.AugAssign):
            op = _BINOPS.get(type(s.op))
            if op is None:
                self.unsupported(s, f"operator {type(s.op).__name__}")
            return Node("AugAssign", sp, {"target": self.target(s.target), "op": op,
                                          "value": self.expr(s.value)})
        if isinstance(s, ast.Expr):
            return Node("ExprStmt", sp, {"value": self.expr(s.value)})
        if isinstance(s, ast.Import):
            return Node("Import", sp, {"names": [(a.name, a.asname) for a in s.names]})
        if isinstance(s, ast.ImportFrom):
            if s.level:
                self.unsupported(s, "relative import")
            if any(a.name == "*" for a in s.names):
                self.unsupported(s, "star import")
            return Node("ImportFrom", sp, {"module": s.module,
                                           "names": [(a.name, a.asname) for a in s.names]})
        names = {ast.Try: "try/except", ast.For: "for loop", ast.Raise: "raise",
                 ast.Global: "global", ast.Nonlocal: "nonlocal", ast.Delete: "del",
                 ast.Assert: "assert", ast.Break: "break", ast.Continue: "continue",
                 ast.AnnAssign: "annotated assignment"}
        self.unsupported(s, names.get(type(s), type(s).__name__))

    def target(self, t) -> Node:
        if isinstance(t, (ast.Name, ast.Attribute, ast.Subscript)):
            return self.expr(t)
        self.unsupported(t, "destructuring assignment")

    # expressions

    def expr(self, e) -> Node:
        sp = self.span(e)
        if isinstance(e, ast.Name):
            return Node("Name", sp, {"id": e.id})
        if isinstance(e, ast.Constant):
            if isinstance(e.value, (bytes, complex)) or e.value is Ellipsis:
                self.unsupported(e, f"{type(e.value).__name__} literal")
            return Node("Constant", sp, {"value": e.value})
        if (isinstance(e, ast.UnaryOp) and isinstance(e.op, (ast.USub, ast.UAdd))
                and isinstance(e.operand, ast.Constant)
                and type(e.operand.value) in (int, float)):
            value = -e.operand.value if isinstance(e.op, ast.USub) else e.operand.value
            return Node("Constant", sp, {"value": value})
        if isinstance(e, ast.Attribute):
            return Node("Attribute", sp, {"value": self.expr(e.value), "attr": e.attr})
        if isinstance(e, ast.Subscript):
            if isinstance(e.slice, ast.Slice):
                self.unsupported(e, "slice")
            return Node("Subscript", sp, {"value": self.expr(e.value), "index": self.expr(e.slice)})
        if isinstance(e, ast.Call):
            args = []
            for a in e.args:
                if isinstance(a, ast.Starred):
                    self.unsupported(a, "starred argument")
                args.append(self.expr(a))
            kwargs = []
            for k in e.keywords:
                if k.arg is None:
                    self.unsupported(k, "keyword unpacking")
                kwargs.append((k.arg, self.expr(k.value)))
            return Node("Call", sp, {"func": self.expr(e.func), "args": args, "keywords": kwargs})
        if isinstance(e, ast.List):
            return Node("ListLit", sp, {"elts": [self.expr(x) for x in e.elts]})
        if isinstance(e, ast.Tuple):
            return Node("TupleLit", sp, {"elts": [self.expr(x) for x in e.elts]})
        if isinstance(e, ast.Dict):
            if any(k is None for k in e.keys):
                self.unsupported(e, "dict unpacking")
            return Node("DictLit", sp, {"keys": [self.expr(k) for k in e.keys],
                                        "values": [self.expr(v) for v in e.values]})
        if isinstance(e, ast.BinOp):
            op = _BINOPS.get(type(e.op))
            if op is None:
                self.unsupported(e, f"operator {type(e.op).__name__}")
            return Node("BinOp", sp, {"op": op, "left": self.expr(e.left), "right": self.expr(e.right)})
        if isinstance(e, ast.Compare):
            if len(e.ops) != 1:
                self.unsupported(e, "chained comparison")
            return Node("Compare", sp, {"op": _CMPOPS[type(e.ops[0])], "left": self.expr(e.left),
                                        "right": self.expr(e.comparators[0])})
        names = {ast.Lambda: "lambda", ast.GeneratorExp: "generator", ast.ListComp: "comprehension",
                 ast.SetComp: "comprehension", ast.DictComp: "comprehension", ast.Yield: "generator",
                 ast.YieldFrom: "generator", ast.Await: "await", ast.Starred: "starred expression",
                 ast.BoolOp: "boolean operator", ast.UnaryOp: "unary operator",
                 ast.IfExp: "conditional expression", ast.JoinedStr: "f-string",
                 ast.NamedExpr: "assignment expression", ast.Set: "set literal"}
        self.unsupported(e, names.get(type(e), type(e).__name__))


def parse_module(text: str, path: str) -> Node:
    """Parse ``text`` into a Module node, rejecting anything outside the subset."""
    try:
        tree = ast.parse(text, filename=path)
    except SyntaxError as exc:
        line = exc.lineno or 1
        col = exc.offset or 1
        raise SourceSyntaxError(SourceSpan(path, line, col, line, col), exc.msg) from None
    conv = _Converter(path)
    lines = text.splitlines() or [""]
    span = SourceSpan(path, 1, 1, len(lines), len(lines[-1]) + 1)
    return Node("Module", span, {"body": conv.body(tree.body)})


# -- structural view & pretty printing ---------------------------------------

def structure(value) -> Any:
    """Span-free nested tuples, for structural comparison of trees."""
    if isinstance(value, Node):
        return (value.kind,) + tuple((k, structure(v)) for k, v in sorted(value.fields.items()))
    if isinstance(value, (list, tuple)):
        return tuple(structure(v) for v in value)
    if isinstance(value, bool) or value is None:
        return (type(value).__name__, value)
    return value


def _expr(n: Node) -> str:
    k = n.kind
    if k == "Name":
        return n["id"]
    if k == "Constant":
        v = n["value"]
        return f"({v!r})" if isinstance(v, (int, float)) and not isinstance(v, bool) and v < 0 else repr(v)
    if k == "Attribute":
        base = _expr(n["value"])
        if n["value"].kind == "Constant" and not base.startswith("("):
            base = f"({base})"      # 0.images would lex as a float
        return f"{base}.{n['attr']}"
    if k == "Subscript":
        return f"{_expr(n['value'])}[{_expr(n['index'])}]"
    if k == "Call":
        parts = [_expr(a) for a in n["args"]] + [f"{name}={_expr(v)}" for name, v in n["keywords"]]
        return f"{_expr(n['func'])}({', '.join(parts)})"
    if k == "ListLit":
        return "[" + ", ".join(_expr(x) for x in n["elts"]) + "]"
    if k == "TupleLit":
        elts = [_expr(x) for x in n["elts"]]
        return "(" + ", ".join(elts) + ("," if len(elts) == 1 else "") + ")"
    if k == "DictLit":
        return "{" + ", ".join(f"{_expr(a)}: {_expr(b)}" for a, b in zip(n["keys"], n["values"])) + "}"
    if k in ("BinOp", "Compare"):
        return f"({_expr(n['left'])} {n['op']} {_expr(n['right'])})"
    raise ValueError(f"not an expression: {k}")


def _stmts(body: List[Node], indent: int, out: List[str]) -> None:
    pad = "    " * indent
    if not body:
        out.append(pad + "pass")
    for s in body:
        k = s.kind
        if k == "FunctionDef":
            out.append(f"{pad}def {s['name']}({', '.join(s['params'])}):")
            _stmts(s["body"], indent + 1, out)
        elif k == "ClassDef":
            bases = ", ".join(_expr(b) for b in s["bases"])
            out.append(f"{pad}class {s['name']}({bases}):" if bases else f"{pad}class {s['name']}:")
            _stmts(s["body"], indent + 1, out)
        elif k == "If":
            out.append(f"{pad}if {_expr(s['test'])}:")
            _stmts(s["body"], indent + 1, out)
            if s["orelse"]:
                out.append(f"{pad}else:")
                _stmts(s["orelse"], indent + 1, out)
        elif k == "While":
            out.append(f"{pad}while {_expr(s['test'])}:")
            _stmts(s["body"], indent + 1, out)
        elif k == "With":
            items = ", ".join(_expr(e) + (f" as {t}" if t else "") for e, t in s["items"])
            out.append(f"{pad}with {items}:")
            _stmts(s["body"], indent + 1, out)
        elif k == "Return":
            out.append(pad + ("return" if s["value"] is None else f"return {_expr(s['value'])}"))
        elif k == "Assign":
            out.append(pad + " = ".join(_expr(t) for t in s["targets"]) + f" = {_expr(s['value'])}")
        elif k == "AugAssign":
            out.append(f"{pad}{_expr(s['target'])} {s['op']}= {_expr(s['value'])}")
        elif k == "ExprStmt":
            out.append(pad + _expr(s["value"]))
        elif k == "Import":
            out.append(pad + "import " + ", ".join(n + (f" as {a}" if a else "") for n, a in s["names"]))
        elif k == "ImportFrom":
            names = ", ".join(n + (f" as {a}" if a else "") for n, a in s["names"])
            out.append(f"{pad}from {s['module']} import {names}")
        else:
            raise ValueError(f"not a statement: {k}")


def unparse(module: Node) -> str:
    """Source text for a Module; parsing it back gives the same structure."""
    out: List[str] = []
    for s in module["body"]:
        _stmts([s], 0, out)
    return "\n".join(out) + "\n"
