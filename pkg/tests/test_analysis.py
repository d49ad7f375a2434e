import pytest
from hypothesis import given, settings, strategies as st

from conftest import CONV_NET, FOO
from ir_interp import observe
from tensorlint.analysis import (
    AllocSite, BoundMethod, FunctionObj, ModuleObj, ShapeList, UnknownVariable,
    build, callgraph_json, field_node, points_to, synthesize_class_model, value_node,
)
from tensorlint.frontend import lower_module, parse_module
from tensorlint.ir import (
    Assign, Block, Const, GetField, Invoke, IRFunction, LexicalRead, LexicalWrite, New, PutField,
    Return, Value, validate,
)
from tensorlint.models import ModelSpec


def analyze(src, models, name="t", **kw):
    mod = lower_module(parse_module(src, f"{name}.py"), name)
    cg, g = build([mod], models, **kw)
    return mod, cg, g


def read(path):
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def site_at_line(cg, fname, line):
    f = cg.functions[fname]
    return [i.site for i in f.instructions()
            if isinstance(i, Invoke) and f.span_of(i.dest) and f.span_of(i.dest).line_start == line]


def node_named(mod, fname, name):
    f = next(f for f in mod if f.name == fname)
    ids = [vid for vid, v in f.values.items() if v.name == name]
    return value_node(fname, max(ids))


# -- examples -----------------------------------------------------------------

def test_transitive_copy(tf_models):
    mod, cg, g = analyze("class Obj:\n    def m(self):\n        return 1\nx = Obj()\ny = x\nz = y\n",
                         tf_models)
    sx = points_to(g, node_named(mod, "t.<module>", "x"))
    assert sx == points_to(g, node_named(mod, "t.<module>", "z"))
    (o,) = sx
    assert isinstance(o, AllocSite) and o.token == "instance:t.Obj"


def test_shape_list(tf_models):
    mod, cg, g = analyze("s = [-1, 28, 28, 1]\nt = [None, 784]\n", tf_models)
    assert points_to(g, node_named(mod, "t.<module>", "s")) == {ShapeList((-1, 28, 28, 1))}
    assert points_to(g, node_named(mod, "t.<module>", "t")) == {ShapeList((None, 784))}


def test_non_constant_list_is_not_a_shape(tf_models):
    mod, cg, g = analyze("n = 3\ns = [n, 2]\n", tf_models)
    assert not any(isinstance(o, ShapeList) for o in points_to(g, node_named(mod, "t.<module>", "s")))


def test_foo_snippet_sites_are_equivalent(tf_models):
    mod, cg, g = analyze(read(FOO), tf_models, "foo_snippet")
    init = "foo_snippet.<module>"
    for line in (8, 9, 10, 13):
        (site,) = site_at_line(cg, init, line)
        assert cg.targets(init, site) == {"foo_snippet.Foo.foo"}, line
    foo = cg.functions["foo_snippet.Foo.foo"]
    # fields are flow-insensitive, so y = x.foo also sees the later plain function
    # and y(3) binds 3 as self; the allocated receiver is still unique
    receivers = [o for o in points_to(g, value_node(foo.name, foo.params[1])) if isinstance(o, AllocSite)]
    assert [o.token for o in receivers] == ["instance:foo_snippet.Foo"]
    assert cg.warnings == []


def test_conv_network_callback_edge(tf_models):
    mod, cg, g = analyze(read(CONV_NET), tf_models, "conv_network")
    assert cg.has_edge("tensorflow/estimator/train/train.do", "conv_network.model_fn")
    assert cg.has_edge("conv_network.model_fn", "conv_network.conv_net")


def test_conv_network_images_alias(tf_models):
    mod, cg, g = analyze(read(CONV_NET), tf_models, "conv_network")
    conv = cg.functions["conv_network.conv_net"]
    (get,) = [i for i in conv.instructions() if isinstance(i, GetField) and i.field == "images"]
    init = cg.functions["conv_network.<module>"]
    (put,) = [i for i in init.instructions() if isinstance(i, PutField) and i.field == "images"]
    read_side = points_to(g, value_node(conv.name, get.dest))
    write_side = points_to(g, value_node(init.name, put.value))
    assert write_side and read_side == write_side


def test_two_imports_share_the_module_object(tf_models):
    mod, cg, g = analyze("import tensorflow as tf\nimport tensorflow as tf2\n", tf_models)
    a = points_to(g, node_named(mod, "t.<module>", "tf"))
    b = points_to(g, node_named(mod, "t.<module>", "tf2"))
    assert a and a == b


def test_unknown_module_is_opaque(tf_models):
    mod, cg, g = analyze("import scipy\nx = scipy.linalg\n", tf_models)
    assert points_to(g, node_named(mod, "t.<module>", "scipy")) == {ModuleObj("scipy")}
    assert any("scipy" in w.message for w in cg.warnings)


def test_unresolved_call_recorded(tf_models):
    mod, cg, g = analyze("def f(g):\n    return g(1)\nf(3)\n", tf_models)
    assert ("t.f", 0) in cg.unresolved
    assert any(w.code == "ARI008" for w in cg.warnings)


def test_arity_and_keyword_warnings(tf_models):
    mod, cg, g = analyze("def f(a):\n    return a\nf(1, 2)\nf(b=1)\n", tf_models)
    messages = sorted(w.message for w in cg.warnings)
    assert any("takes 1 positional argument but 2 were given" in m for m in messages)
    assert any("no parameter named 'b'" in m for m in messages)


def test_keyword_binding(tf_models):
    mod, cg, g = analyze("def f(a, b):\n    return b\nx = [1]\ny = f(b=x, a=3)\n", tf_models)
    assert points_to(g, node_named(mod, "t.<module>", "y")) == \
        points_to(g, node_named(mod, "t.<module>", "x"))


def test_recursion_terminates(tf_models):
    mod, cg, g = analyze("def f(x):\n    return f(x)\ny = f([1])\n", tf_models)
    assert cg.targets("t.f", 0) == {"t.f"}


def test_points_to_unknown_variable(tf_models):
    mod, cg, g = analyze("x = 1\n", tf_models)
    with pytest.raises(UnknownVariable):
        points_to(g, ("v", "nowhere", 3))


# -- class models -------------------------------------------------------------

def test_synthesized_constructor():
    mod = lower_module(parse_module("class Foo:\n    def foo(self, a):\n        return a\n", "t.py"), "t")
    info = mod.classes["t.Foo"]
    ctor = synthesize_class_model(info, {f.name: f for f in mod})
    assert validate(ctor) == []
    puts = [i for i in ctor.instructions() if isinstance(i, PutField) and i.field == "foo"]
    assert len(puts) == 1
    news = [i for i in ctor.instructions() if isinstance(i, New)]
    assert [n.token for n in news] == ["instance:t.Foo", "bound:t.Foo.foo"]


def test_class_without_methods():
    mod = lower_module(parse_module("class E:\n    pass\n", "t.py"), "t")
    ctor = synthesize_class_model(mod.classes["t.E"], {f.name: f for f in mod})
    assert [type(i) for i in ctor.instructions()] == [New, Return]


def test_constructor_runs_init(tf_models):
    src = ("class P:\n    def __init__(self, v):\n        self.v = v\n"
           "    def get(self):\n        return self.v\n"
           "s = [1, 2]\np = P(s)\nr = p.get()\n")
    mod, cg, g = analyze(src, tf_models)
    assert points_to(g, node_named(mod, "t.<module>", "r")) == {ShapeList((1, 2))}


def test_method_read_through_class_is_unbound(tf_models):
    src = ("class Foo:\n    def foo(self, a):\n        return a\n"
           "f = Foo.foo\nx = Foo()\nb = x.foo\n")
    mod, cg, g = analyze(src, tf_models)
    assert points_to(g, node_named(mod, "t.<module>", "f")) == {FunctionObj("t.Foo.foo")}
    (bound,) = points_to(g, node_named(mod, "t.<module>", "b"))
    assert isinstance(bound, BoundMethod) and bound.target == "t.Foo.foo"


def test_method_field_is_writable(tf_models):
    mod, cg, g = analyze(read(FOO), tf_models, "foo_snippet")
    (inst,) = points_to(g, node_named(mod, "foo_snippet.<module>", "x"))
    stored = points_to(g, field_node(inst, "foo"))
    assert FunctionObj("foo_snippet.Foo.foo") in stored
    assert any(isinstance(o, BoundMethod) for o in stored)


def test_inheritance(tf_models):
    src = ("class A:\n    def f(self):\n        return [1]\n"
           "class B(A):\n    def g(self):\n        return self.f()\n"
           "r = B().g()\n")
    mod, cg, g = analyze(src, tf_models)
    assert points_to(g, node_named(mod, "t.<module>", "r")) == {ShapeList((1,))}


# -- invariants ---------------------------------------------------------------

def test_edges_are_closed(tf_models):
    mod, cg, g = analyze(read(CONV_NET), tf_models, "conv_network")
    V = g.V
    for x, y in g.edges:
        assert x in V and y in V
        # S is closed under the copy edges
        assert g.S.get(y, set()) <= g.S.get(x, set())


def test_rebuild_is_idempotent(tf_models):
    mod = lower_module(parse_module(read(CONV_NET), "conv_network.py"), "conv_network")
    cg1, g1 = build([mod], tf_models)
    cg2, g2 = build([mod], tf_models)
    assert g1.S == g2.S and g1.edges == g2.edges and cg1.edges == cg2.edges


@pytest.mark.parametrize("seed", range(10))
def test_order_independent(tf_models, seed):
    mod = lower_module(parse_module(read(CONV_NET), "conv_network.py"), "conv_network")
    cg0, g0 = build([mod], tf_models)
    cg, g = build([mod], tf_models, seed=seed)
    assert g.S == g0.S and cg.edges == cg0.edges


def test_callgraph_json(tf_models):
    mod, cg, g = analyze(read(FOO), tf_models, "foo_snippet")
    doc = callgraph_json(cg, g)
    lines = {e["line"]: e["targets"] for e in doc["edges"] if "line" in e}
    assert lines[8] == ["foo_snippet.Foo.foo"]
    assert "foo_snippet.<module>" in doc["nodes"]
    assert any(p["name"] == "x" for p in doc["points_to"])


# -- soundness against the reference interpreter ------------------------------

HELPERS = {
    # ident(p) = p ; put(o, v): o.f = v; return o ; get(o) = o.f ; mk() = new
    "m.ident": [Return(1)],
    "m.put": [PutField(1, "f", 2), Return(1)],
    "m.get": [GetField(2, 1, "f"), Return(2)],
    "m.mk": [New(1, "obj", 0), Return(1)],
}
ARITY = {"m.ident": 1, "m.put": 2, "m.get": 1, "m.mk": 0}


def helper(name):
    n = ARITY[name]
    values = {i: Value(i, None, None) for i in range(n + 1)}
    for ins in HELPERS[name]:
        d = getattr(ins, "dest", None)
        if d is not None:
            values[d] = Value(d, None, None)
    return IRFunction(name, tuple(range(n + 1)), (None,) * (n + 1), [Block("b0", list(HELPERS[name]))],
                      values, module="m")


@st.composite
def straight_line(draw):
    n = draw(st.integers(1, 29) | st.integers(15, 29))
    body, defined, site = [], [], 0
    fns = {}        # value -> helper it holds
    stored = []     # (object value, field) pairs written so far
    objs = []       # values holding fresh objects
    globals_written = []
    for _ in range(n):
        kind = draw(st.sampled_from(["new", "const", "shape", "fn", "assign", "put", "get", "call",
                                     "gwrite", "gread"]))
        dest = len(defined) + 1
        pick = lambda: defined[draw(st.integers(0, len(defined) - 1))]
        if kind == "new":
            body.append(New(dest, draw(st.sampled_from(["A", "B"])), site)); site += 1
            objs.append(dest)
        elif kind == "const":
            body.append(Const(dest, draw(st.sampled_from([0, 3, None, "s"]))))
        elif kind == "shape":
            body.append(New(dest, draw(st.sampled_from(["shape:-1,28,28,1", "shape:None,784"])), site))
            site += 1
        elif kind == "fn":
            h = draw(st.sampled_from(sorted(HELPERS)))
            body.append(New(dest, "function:" + h, site)); site += 1
            fns[dest] = h
        elif not defined:
            continue
        elif kind == "assign":
            src = pick()
            body.append(Assign(dest, src))
            if src in fns:
                fns[dest] = fns[src]
        elif kind == "put":
            obj = draw(st.sampled_from(objs)) if objs and draw(st.integers(0, 3)) else pick()
            fld = draw(st.sampled_from(["f", "g", "*"]))
            body.append(PutField(obj, fld, pick()))
            stored.append((obj, fld))
            continue
        elif kind == "get":
            if not stored and draw(st.integers(0, 3)):
                continue
            if stored and draw(st.integers(0, 5)):
                obj, fld = draw(st.sampled_from(stored))
            else:
                obj, fld = pick(), draw(st.sampled_from(["f", "g", "*"]))
            body.append(GetField(dest, obj, fld))
        elif kind == "call":
            if not fns and draw(st.integers(0, 3)):
                continue
            if fns and draw(st.integers(0, 3)):
                callee = draw(st.sampled_from(sorted(fns)))
                k = ARITY[fns[callee]]
            else:
                callee, k = pick(), draw(st.integers(0, 2))
            body.append(Invoke(dest, callee, None, tuple(pick() for _ in range(k)), (), site)); site += 1
        elif kind == "gwrite":
            name = draw(st.sampled_from(["p", "q"]))
            body.append(LexicalWrite(name, pick()))
            globals_written.append(name)
            continue
        elif kind == "gread":
            if not globals_written and draw(st.integers(0, 3)):
                continue
            names = globals_written if globals_written and draw(st.integers(0, 3)) else ["p", "q"]
            body.append(LexicalRead(dest, draw(st.sampled_from(names))))
        defined.append(dest)
    ret = defined[-1] if defined else 0
    body.append(Return(ret))
    values = {0: Value(0, None, None)}
    values.update({d: Value(d, None, None) for d in defined})
    return IRFunction("m.<module>", (0,), (None,), [Block("b0", body)], values, module="m")


@settings(max_examples=200)
@given(straight_line())
def test_points_to_is_sound(main):
    assert validate(main) == []
    functions = [main] + [helper(h) for h in sorted(HELPERS)]
    cg, g = build(functions, ModelSpec(), entries=["m.<module>"])
    table = {f.name: f for f in functions}
    seen = observe(table, "m.<module>", "m")
    for node, objs in seen.items():
        assert objs <= g.S.get(node, set()), (node, objs, g.S.get(node))
