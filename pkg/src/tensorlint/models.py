"""Declarative library models.

A model file lists packages, their classes and methods; each method body
is a short list of heap operations that is compiled to a synthetic
:class:`~tensorlint.ir.IRFunction`. Methods may carry a semantics tag naming
the shape rule applied at their call sites.

Naming: method ``m`` of class ``C`` in package ``P`` becomes the function
``P/C.m``. A class with an ``import`` method makes ``P`` importable; the
module object is whatever that method returns. Calling an allocated
instance of ``P/C`` runs ``P/C.do`` with ``arg0`` bound to the instance.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import jsonschema

from .ir import Block, Const, GetField, Invoke, IRFunction, New, PutField, Return, Value, validate
from .shapes import TRANSFER_TAGS

BUNDLED_DIR = os.path.join(os.path.dirname(__file__), "models")
DEFAULT_MODEL = "tensorflow.json"
CALL_METHOD = "do"
IMPORT_METHOD = "import"
CALLBACK_FIELD = "$callback"

_operand = {
    "oneOf": [
        {"type": "string", "minLength": 1},
        {"type": "object", "properties": {"int": {"type": "integer"}},
         "required": ["int"], "additionalProperties": False},
    ]
}

_op = {
    "type": "object",
    "required": ["op"],
    "oneOf": [
        {"properties": {"op": {"const": "new"}, "def": {"type": "string"}, "class": {"type": "string"}},
         "required": ["def", "class"], "additionalProperties": False},
        {"properties": {"op": {"const": "putfield"}, "ref": _operand, "field": {"type": "string"},
                        "value": _operand},
         "required": ["ref", "field", "value"], "additionalProperties": False},
        {"properties": {"op": {"const": "getfield"}, "ref": _operand, "field": {"type": "string"},
                        "def": {"type": "string"}},
         "required": ["ref", "field", "def"], "additionalProperties": False},
        {"properties": {"op": {"const": "call"}, "receiver": _operand,
                        "args": {"type": "array", "items": _operand}, "def": {"type": "string"}},
         "required": ["receiver", "args", "def"], "additionalProperties": False},
        {"properties": {"op": {"const": "return"}, "value": _operand},
         "required": ["value"], "additionalProperties": False},
    ],
}

SCHEMA = {
    "type": "object",
    "required": ["packages"],
    "additionalProperties": False,
    "properties": {
        "packages": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "classes"],
                "additionalProperties": False,
                "properties": {
                    "name": {"type": "string", "minLength": 1},
                    "classes": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "required": ["name", "allocatable", "methods"],
                            "additionalProperties": False,
                            "properties": {
                                "name": {"type": "string", "minLength": 1},
                                "allocatable": {"type": "boolean"},
                                "methods": {
                                    "type": "array",
                                    "items": {
                                        "type": "object",
                                        "required": ["name", "numArgs", "semantics", "body"],
                                        "additionalProperties": False,
                                        "properties": {
                                            "name": {"type": "string", "minLength": 1},
                                            "numArgs": {"type": "integer", "minimum": 0},
                                            "semantics": {"type": ["string", "null"]},
                                            "body": {"type": "array", "items": _op},
                                            "params": {"type": "array", "items": {"type": "string"}},
                                            "varargs": {"type": "boolean"},
                                            "output": {"enum": ["same-as-input", "filters-last"]},
                                            "element": {"type": "string"},
                                        },
                                    },
                                },
                            },
                        },
                    },
                },
            },
        }
    },
}


class ModelError(Exception):
    pass


class SchemaError(ModelError):
    def __init__(self, path: str, pointer: str, message: str):
        super().__init__(f"{path}: {pointer or '/'}: {message}")
        self.path = path
        self.pointer = pointer
        self.message = message


class DanglingReference(ModelError):
    def __init__(self, name: str, where: str = ""):
        super().__init__(f"{where}: reference to undefined {name!r}" if where else f"undefined {name!r}")
        self.name = name


class UnknownSemanticsTag(ModelError):
    def __init__(self, tag: str, where: str = ""):
        super().__init__(f"{where}: unknown semantics tag {tag!r}")
        self.tag = tag


class UnknownModule(ModelError):
    def __init__(self, name: str):
        super().__init__(f"no model for module {name!r}")
        self.name = name


@dataclass(frozen=True)
class ModelMethod:
    name: str
    num_args: int
    semantics: Optional[str]
    body: Tuple[dict, ...]
    params: Optional[Tuple[str, ...]] = None
    varargs: bool = False
    output: Optional[str] = None
    element: Optional[str] = None

    def to_json(self) -> dict:
        out = {"name": self.name, "numArgs": self.num_args, "semantics": self.semantics,
               "body": [dict(op) for op in self.body]}
        if self.params is not None:
            out["params"] = list(self.params)
        if self.varargs:
            out["varargs"] = True
        if self.output is not None:
            out["output"] = self.output
        if self.element is not None:
            out["element"] = self.element
        return out


@dataclass(frozen=True)
class ModelClass:
    name: str           # qualified, "package/Class"
    allocatable: bool
    methods: Tuple[ModelMethod, ...]

    @property
    def package(self) -> str:
        return self.name.rsplit("/", 1)[0] if "/" in self.name else ""

    @property
    def short_name(self) -> str:
        return self.name.rsplit("/", 1)[-1]

    def method(self, name: str) -> Optional[ModelMethod]:
        for m in self.methods:
            if m.name == name:
                return m
        return None


def dotted_name(class_name: str) -> str:
    """``tensorflow/estimator/Estimator`` -> ``tensorflow.estimator.Estimator``."""
    return class_name.replace("/", ".")


def function_name(class_name: str, method: str) -> str:
    return f"{class_name}.{method}"


@dataclass
class ModelSpec:
    packages: List[str] = field(default_factory=list)
    classes: Dict[str, ModelClass] = field(default_factory=dict)
    functions: Dict[str, IRFunction] = field(default_factory=dict)
    methods: Dict[str, ModelMethod] = field(default_factory=dict)     # function name -> method
    modules: Dict[str, str] = field(default_factory=dict)             # package -> import function
    sources: List[str] = field(default_factory=list)

    def semantics(self, fname: str) -> Optional[str]:
        m = self.methods.get(fname)
        return m.semantics if m else None

    def callable_function(self, token: str) -> Optional[str]:
        """The ``do`` function run when an instance of model class ``token`` is called."""
        cls = self.classes.get(token)
        if cls is None or cls.method(CALL_METHOD) is None:
            return None
        return function_name(token, CALL_METHOD)

    def class_of_function(self, fname: str) -> Optional[str]:
        owner, _, _ = fname.rpartition(".")
        return owner if owner in self.classes else None

    def merge(self, other: "ModelSpec") -> "ModelSpec":
        out = ModelSpec(self.packages + [p for p in other.packages if p not in self.packages],
                        {**self.classes, **other.classes}, {**self.functions, **other.functions},
                        {**self.methods, **other.methods}, {**self.modules, **other.modules},
                        self.sources + other.sources)
        return out

    def to_json(self) -> dict:
        by_package: Dict[str, List[ModelClass]] = {p: [] for p in self.packages}
        for cls in self.classes.values():
            by_package.setdefault(cls.package, []).append(cls)
        return {"packages": [
            {"name": p, "classes": [
                {"name": c.short_name, "allocatable": c.allocatable,
                 "methods": [m.to_json() for m in c.methods]} for c in classes]}
            for p, classes in by_package.items()]}


def _pointer(parts: Iterable) -> str:
    return "".join("/" + str(p).replace("~", "~0").replace("/", "~1") for p in parts)


def _compile(cls_name: str, m: ModelMethod, where: str) -> IRFunction:
    fname = function_name(cls_name, m.name)
    values: Dict[int, Value] = {}

    def new_value(name):
        vid = len(values)
        values[vid] = Value(vid, name, None)
        return vid

    n_params = max(m.num_args, 1)  # slot 0 always exists
    params = tuple(new_value(f"arg{i}") for i in range(n_params))
    names = (None,) + tuple(m.params or ())
    names = names + (None,) * (n_params - len(names))
    env: Dict[str, int] = {}
    block = Block("b0")
    site = 0

    def operand(x, k) -> int:
        if isinstance(x, dict):
            vid = new_value(None)
            block.instructions.append(Const(vid, x["int"]))
            return vid
        if x.startswith("arg") and x[3:].isdigit():
            i = int(x[3:])
            if i >= m.num_args and not (i == 0 and m.num_args == 0):
                raise DanglingReference(x, f"{where}/body/{k}")
            return params[i]
        if x not in env:
            raise DanglingReference(x, f"{where}/body/{k}")
        return env[x]

    for k, op in enumerate(m.body):
        if block.terminated:
            raise SchemaError(where, f"/body/{k}", "instruction after return")
        kind = op["op"]
        if kind == "new":
            dest = new_value(op["def"])
            block.instructions.append(New(dest, op["class"], site))
            site += 1
            env[op["def"]] = dest
        elif kind == "putfield":
            ref, value = operand(op["ref"], k), operand(op["value"], k)
            block.instructions.append(PutField(ref, op["field"], value))
        elif kind == "getfield":
            ref = operand(op["ref"], k)
            dest = new_value(op["def"])
            block.instructions.append(GetField(dest, ref, op["field"]))
            env[op["def"]] = dest
        elif kind == "call":
            receiver = operand(op["receiver"], k)
            args = tuple(operand(a, k) for a in op["args"])
            dest = new_value(op["def"])
            block.instructions.append(Invoke(dest, receiver, None, args, (), site))
            site += 1
            env[op["def"]] = dest
        else:
            block.instructions.append(Return(operand(op["value"], k)))
    if not block.terminated:
        none = new_value(None)
        block.instructions.append(Const(none, None))
        block.instructions.append(Return(none))
    return IRFunction(fname, params, names, [block], values, varargs=m.varargs)


def load_model_data(data: dict, path: str = "<memory>") -> ModelSpec:
    validator = jsonschema.Draft7Validator(SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        raise SchemaError(path, _pointer(err.absolute_path), err.message)
    spec = ModelSpec(sources=[path])
    for pi, pkg in enumerate(data["packages"]):
        pname = pkg["name"]
        if pname not in spec.packages:
            spec.packages.append(pname)
        for ci, c in enumerate(pkg["classes"]):
            qname = f"{pname}/{c['name']}"
            methods = []
            for mi, raw in enumerate(c["methods"]):
                where = f"{path}#/packages/{pi}/classes/{ci}/methods/{mi}"
                tag = raw["semantics"]
                if tag is not None and tag not in TRANSFER_TAGS:
                    raise UnknownSemanticsTag(tag, where)
                m = ModelMethod(raw["name"], raw["numArgs"], tag, tuple(raw["body"]),
                                tuple(raw["params"]) if "params" in raw else None,
                                raw.get("varargs", False), raw.get("output"), raw.get("element"))
                methods.append(m)
                f = _compile(qname, m, where)
                problems = validate(f)
                if problems:
                    raise SchemaError(path, where.split("#", 1)[1], problems[0].message)
                spec.functions[f.name] = f
                spec.methods[f.name] = m
                if m.name == IMPORT_METHOD:
                    spec.modules[pname] = f.name
            spec.classes[qname] = ModelClass(qname, c["allocatable"], tuple(methods))
    return spec


def load_model(path: str) -> ModelSpec:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(path, "", f"invalid JSON: {exc}") from None
    return load_model_data(data, path)


def load_models(paths: Sequence[str]) -> ModelSpec:
    spec = ModelSpec()
    for p in paths:
        spec = spec.merge(load_model(p))
    return spec


def search_path() -> List[str]:
    dirs = []
    env = os.environ.get("TENSORLINT_MODEL_DIR")
    if env:
        dirs.extend(d for d in env.split(os.pathsep) if d)
    dirs.append(BUNDLED_DIR)
    return dirs


def resolve_model(name: str) -> str:
    """Find a model file by path or by name along the search path."""
    if os.path.isfile(name):
        return name
    for d in search_path():
        candidate = os.path.join(d, name)
        if os.path.isfile(candidate):
            return candidate
    raise FileNotFoundError(name)


def import_function(spec: ModelSpec, module_name: str) -> IRFunction:
    key = module_name.replace(".", "/")
    fname = spec.modules.get(key)
    if fname is None:
        raise UnknownModule(module_name)
    return spec.functions[fname]
