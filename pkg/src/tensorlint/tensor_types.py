"""Labeled-dimension tensor types: representation, annotation syntax, normalization.

Dimensions are symbolic labels (``batch``), plain sizes (``10``), labeled
sizes (``y(28)``) or ordered products of those (``y(28)*x(28)``). A tensor
type is a non-empty list of dimensions plus an element type.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Dict, Iterable, Optional, Tuple, Union

__all__ = [
    "Sym", "Num", "Labeled", "Product", "Dim",
    "Record", "Function", "Tensor", "Label", "Top", "TOP", "PyType",
    "TypeSyntaxError", "parse_type", "format_type", "format_dim",
    "normalize", "normalize_dim", "dim_size", "tensor_size", "type_equal",
    "factors_of", "make_product", "is_fresh_label",
]


# -- dimensions ---------------------------------------------------------------

@dataclass(frozen=True)
class Sym:
    """A dimension known only by its label (size unknown)."""
    label: str


@dataclass(frozen=True)
class Num:
    n: int

    def __post_init__(self):
        if self.n < 0:
            raise ValueError(f"dimension size must be non-negative, got {self.n}")


@dataclass(frozen=True)
class Labeled:
    label: str
    n: int

    def __post_init__(self):
        if self.n < 0:
            raise ValueError(f"dimension size must be non-negative, got {self.n}")


@dataclass(frozen=True)
class Product:
    """Ordered combination of factors; the order records memory layout."""
    factors: Tuple[Union[Sym, Num, Labeled], ...]

    def __post_init__(self):
        if len(self.factors) < 2:
            raise ValueError("a product needs at least two factors")
        if any(isinstance(f, Product) for f in self.factors):
            raise ValueError("products must be flat")


Dim = Union[Sym, Num, Labeled, Product]


# -- python types -------------------------------------------------------------

@dataclass(frozen=True)
class Label:
    name: str


@dataclass(frozen=True)
class Top:
    pass


TOP = Top()


@dataclass(frozen=True)
class Tensor:
    dims: Tuple[Dim, ...]
    element: "PyType" = Label("num")

    def __post_init__(self):
        if not self.dims:
            raise ValueError("tensor types need at least one dimension")

    @property
    def rank(self) -> int:
        return len(self.dims)


@dataclass(frozen=True)
class Record:
    # kept sorted by name so that equality ignores field order
    fields: Tuple[Tuple[str, "PyType"], ...]

    def __post_init__(self):
        names = [name for name, _ in self.fields]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate record fields in {names}")
        object.__setattr__(self, "fields", tuple(sorted(self.fields, key=lambda kv: kv[0])))

    @classmethod
    def of(cls, fields: Dict[str, "PyType"]) -> "Record":
        return cls(tuple(fields.items()))

    def get(self, name: str) -> Optional["PyType"]:
        for key, value in self.fields:
            if key == name:
                return value
        return None


@dataclass(frozen=True)
class Function:
    params: Tuple[Tuple[str, "PyType"], ...]
    result: "PyType"


PyType = Union[Record, Function, Tensor, Label, Top]


def is_fresh_label(label: Optional[str]) -> bool:
    return bool(label) and label.startswith("?")


# -- sizes --------------------------------------------------------------------

def dim_size(d: Dim) -> Optional[int]:
    """Number of elements spanned by ``d``; ``None`` when unknown."""
    if isinstance(d, Num):
        return d.n
    if isinstance(d, Labeled):
        return d.n
    if isinstance(d, Sym):
        return None
    total = 1
    for f in d.factors:
        size = dim_size(f)
        if size is None:
            return None
        total *= size
    return total


def tensor_size(t: Tensor) -> Optional[int]:
    total = 1
    for d in normalize(t).dims:
        size = dim_size(d)
        if size is None:
            return None
        total *= size
    return total


# -- normalization ------------------------------------------------------------

def factors_of(d: Dim) -> Tuple[Union[Sym, Num, Labeled], ...]:
    if isinstance(d, Product):
        out = []
        for f in d.factors:
            out.extend(factors_of(f))
        return tuple(out)
    return (d,)


def make_product(factors: Iterable[Dim]) -> Dim:
    """Build a normalized dimension from a factor sequence.

    Nested products are flattened, unlabeled unit factors dropped and runs
    of adjacent unlabeled sizes multiplied out, since plain sizes carry no
    structure worth keeping.
    """
    flat = []
    for f in factors:
        flat.extend(factors_of(f))
    merged = []
    for f in flat:
        if isinstance(f, Num):
            if f.n == 1:
                continue
            if merged and isinstance(merged[-1], Num):
                merged[-1] = Num(merged[-1].n * f.n)
                continue
        merged.append(f)
    if not merged:
        return Num(1)
    if len(merged) == 1:
        return merged[0]
    return Product(tuple(merged))


def normalize_dim(d: Dim) -> Dim:
    if isinstance(d, Product):
        return make_product(d.factors)
    return d


def normalize(t: PyType) -> PyType:
    """Canonical form: nested tensors flattened into one dimension list,
    products flattened. Idempotent."""
    if isinstance(t, Tensor):
        dims = [normalize_dim(d) for d in t.dims]
        element = normalize(t.element)
        if isinstance(element, Tensor):
            dims.extend(element.dims)
            element = element.element
        return Tensor(tuple(dims), element)
    if isinstance(t, Record):
        return Record(tuple((k, normalize(v)) for k, v in t.fields))
    if isinstance(t, Function):
        return Function(tuple((k, normalize(v)) for k, v in t.params), normalize(t.result))
    return t


def type_equal(a: PyType, b: PyType) -> bool:
    return normalize(a) == normalize(b)


# -- printing -----------------------------------------------------------------

def format_dim(d: Dim) -> str:
    if isinstance(d, Sym):
        return d.label
    if isinstance(d, Num):
        return str(d.n)
    if isinstance(d, Labeled):
        return f"{d.label}({d.n})"
    return "*".join(format_dim(f) for f in d.factors)


def format_type(t: PyType) -> str:
    """Render ``t`` in annotation syntax (canonical, so usable as a sort key)."""
    if isinstance(t, Top):
        return "top"
    if isinstance(t, Label):
        return t.name
    if isinstance(t, Tensor):
        dims = ", ".join(format_dim(d) for d in t.dims)
        return f"tensor[{dims}] of {format_type(t.element)}"
    if isinstance(t, Record):
        return "{" + ", ".join(f"{k}: {format_type(v)}" for k, v in t.fields) + "}"
    if isinstance(t, Function):
        params = ", ".join(f"{k}: {format_type(v)}" for k, v in t.params)
        return f"({params}) -> {format_type(t.result)}"
    raise TypeError(f"not a type: {t!r}")


# -- parsing ------------------------------------------------------------------

class TypeSyntaxError(ValueError):
    def __init__(self, offset: int, message: str):
        super().__init__(f"at offset {offset}: {message}")
        self.offset = offset
        self.message = message


_TOKEN = re.compile(r"\s*(?:(?P<arrow>->)|(?P<int>\d+)|(?P<ident>\?\d+|[A-Za-z_][A-Za-z0-9_]*)|(?P<punct>[\[\]{}(),:*]))")


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = []
        pos = 0
        while True:
            m = _TOKEN.match(text, pos)
            if not m:
                rest = text[pos:].lstrip()
                if rest:
                    raise TypeSyntaxError(len(text) - len(rest), f"unexpected character {rest[0]!r}")
                break
            kind = m.lastgroup
            self.tokens.append((kind, m.group(kind), m.start(kind)))
            pos = m.end()
        self.tokens.append(("eof", "", len(text)))
        self.i = 0

    def peek(self, k: int = 0):
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, text, offset = self.next()
        if text != value:
            raise TypeSyntaxError(offset, f"expected {value!r}, got {text or 'end of input'!r}")

    def ident(self) -> str:
        kind, text, offset = self.next()
        if kind != "ident":
            raise TypeSyntaxError(offset, f"expected identifier, got {text or 'end of input'!r}")
        return text

    def parse(self) -> PyType:
        t = self.type()
        kind, text, offset = self.peek()
        if kind != "eof":
            raise TypeSyntaxError(offset, f"trailing input {text!r}")
        return t

    def type(self) -> PyType:
        kind, text, offset = self.peek()
        if text == "tensor" and self.peek(1)[1] == "[":
            return self.tensor()
        if text == "{":
            return self.record()
        if text == "(":
            return self.func()
        if kind == "ident":
            self.next()
            return TOP if text == "top" else Label(text)
        raise TypeSyntaxError(offset, f"expected a type, got {text or 'end of input'!r}")

    def tensor(self) -> Tensor:
        self.next()
        self.expect("[")
        dims = [self.dim()]
        while self.peek()[1] == ",":
            self.next()
            dims.append(self.dim())
        self.expect("]")
        element: PyType = Label("num")
        if self.peek()[1] == "of":
            self.next()
            name = self.ident()
            element = TOP if name == "top" else Label(name)
        return Tensor(tuple(dims), element)

    def dim(self) -> Dim:
        factors = [self.factor()]
        while self.peek()[1] == "*":
            self.next()
            factors.append(self.factor())
        if len(factors) == 1:
            return factors[0]
        return Product(tuple(f for d in factors for f in factors_of(d)))

    def factor(self) -> Dim:
        kind, text, offset = self.next()
        if kind == "int":
            return Num(int(text))
        if kind != "ident":
            raise TypeSyntaxError(offset, f"expected a dimension, got {text or 'end of input'!r}")
        if self.peek()[1] == "(":
            self.next()
            k2, size, off2 = self.next()
            if k2 != "int":
                raise TypeSyntaxError(off2, "expected a dimension size")
            self.expect(")")
            return Labeled(text, int(size))
        return Sym(text)

    def fields(self, close: str):
        out = []
        if self.peek()[1] == close:
            return out
        while True:
            name = self.ident()
            self.expect(":")
            out.append((name, self.type()))
            if self.peek()[1] != ",":
                return out
            self.next()

    def record(self) -> Record:
        self.next()
        offset = self.peek()[2]
        fields = self.fields("}")
        self.expect("}")
        try:
            return Record(tuple(fields))
        except ValueError as exc:
            raise TypeSyntaxError(offset, str(exc)) from None

    def func(self) -> Function:
        self.next()
        params = self.fields(")")
        self.expect(")")
        self.expect("->")
        return Function(tuple(params), self.type())


def parse_type(text: str) -> PyType:
    """Parse annotation syntax, e.g. ``tensor[batch, y(28)*x(28)] of channel``."""
    return normalize(_Parser(text).parse())
