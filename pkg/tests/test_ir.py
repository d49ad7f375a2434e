import os
import re

from hypothesis import given, settings, strategies as st

from conftest import CONV_NET
from program_gen import programs
from tensorlint.frontend import lower_module, parse_module
from tensorlint.ir import (
    Assign, BinOp, Block, Branch, Const, GetField, Goto, IRFunction, Invoke, LexicalRead,
    LexicalWrite, New, Phi, PutField, Return, Value, format_instruction, pretty_print, validate,
)

GOLDEN = os.path.join(os.path.dirname(__file__), "golden", "conv_network_init.ir")


def fn(instructions, params=(0,), blocks=None, **kw):
    blocks = blocks or [Block("b0", list(instructions))]
    values = {}
    for b in blocks:
        for ins in b.instructions:
            d = getattr(ins, "dest", None)
            if d is not None:
                values[d] = Value(d, None, None)
    return IRFunction("t.f", tuple(params), tuple(None for _ in params), blocks, values, **kw)


def test_trivial_function_ok():
    assert validate(fn([Const(1, None), Return(1)])) == []


def test_undefined_use():
    (v,) = validate(fn([Return(7)]))
    assert v.value == 7 and "v7" in v.message


def test_double_definition():
    msgs = [v.message for v in validate(fn([Const(1, 1), Const(1, 2), Return(1)]))]
    assert msgs == ["v1 defined more than once"]


def test_duplicate_site_ids():
    f = fn([New(1, "x", 5), New(2, "y", 5), Return(1)])
    assert ["site id 5 used more than once"] == [v.message for v in validate(f)]


def test_use_not_dominated():
    blocks = [Block("b0", [Const(1, True), Branch(1, "b1", "b2")]),
              Block("b1", [Const(2, 1), Goto("b3")]),
              Block("b2", [Goto("b3")]),
              Block("b3", [Return(2)])]
    (v,) = validate(fn([], blocks=blocks))
    assert "not dominated" in v.message


def test_phi_operands_checked_per_predecessor():
    blocks = [Block("b0", [Const(1, True), Branch(1, "b1", "b2")]),
              Block("b1", [Const(2, 1), Goto("b3")]),
              Block("b2", [Const(3, 2), Goto("b3")]),
              Block("b3", [Phi(4, (("b1", 2), ("b2", 3))), Return(4)])]
    assert validate(fn([], blocks=blocks)) == []
    bad = [Block("b0", [Const(1, True), Branch(1, "b1", "b2")]),
           Block("b1", [Const(2, 1), Goto("b3")]),
           Block("b2", [Const(3, 2), Goto("b3")]),
           Block("b3", [Phi(4, (("b1", 3), ("b2", 3))), Return(4)])]
    assert len(validate(fn([], blocks=bad))) == 1


def test_method_needs_self():
    f = fn([Const(1, None), Return(1)], declared_class="t.A")
    assert any("self" in v.message for v in validate(f))


def test_unterminated_block():
    assert any("terminator" in v.message for v in validate(fn([Const(1, 1)])))


def test_format_examples():
    assert format_instruction(Const(1, 42)) == "v1 = const 42"
    assert format_instruction(GetField(3, 2, "images")) == "v3 = getfield v2 .images"
    assert format_instruction(Invoke(4, None, "model:tensorflow.import", (), (), 0)) == \
        "v4 = invoke-static model:tensorflow.import() @0"
    assert format_instruction(Invoke(5, 1, None, (2,), (("shape", 3),), 1)) == \
        "v5 = invoke v1(v2, shape=v3) @1"


def _conv_network():
    with open(CONV_NET, encoding="utf-8") as fh:
        return lower_module(parse_module(fh.read(), "conv_network.py"))


def test_conv_network_validates():
    for f in _conv_network():
        assert validate(f) == []


def test_conv_network_init_golden():
    with open(GOLDEN, encoding="utf-8") as fh:
        assert pretty_print(_conv_network().init) == fh.read()
    # and byte-stable across runs
    assert pretty_print(_conv_network().init) == pretty_print(_conv_network().init)


def _canonical(text):
    ids = {}
    return re.sub(r"\bv(\d+)\b", lambda m: "v%d" % ids.setdefault(m.group(1), len(ids)), text)


@settings(max_examples=200)
@given(programs, programs)
def test_pretty_print_injective_up_to_renaming(a, b):
    fa = lower_module(parse_module(a, "a.py"), "m").init
    fb = lower_module(parse_module(b, "b.py"), "m").init
    if _canonical(pretty_print(fa)) == _canonical(pretty_print(fb)):
        assert [[type(i) for i in blk.instructions] for blk in fa.blocks] == \
               [[type(i) for i in blk.instructions] for blk in fb.blocks]
        assert len(fa.values) == len(fb.values)


ids = st.integers(0, 6)
idents = st.sampled_from(["images", "x", "train", "*", "$self"])
instructions = st.one_of(
    st.builds(Const, ids, st.one_of(st.integers(-3, 3), st.booleans(), st.none(), st.just(1.0),
                                    st.sampled_from(["a", "1", "None"]))),
    st.builds(Assign, ids, ids),
    st.builds(Phi, ids, st.lists(st.tuples(st.sampled_from(["b0", "b1"]), ids), min_size=1,
                                 max_size=2).map(tuple)),
    st.builds(BinOp, ids, st.sampled_from(["+", "*", "<"]), ids, ids),
    st.builds(New, ids, st.sampled_from(["function:m.f", "class:m.A", "tensorflow/Tensor"]), ids),
    st.builds(GetField, ids, ids, idents),
    st.builds(PutField, ids, idents, ids),
    st.builds(Invoke, ids, st.one_of(st.none(), ids), st.none(),
              st.lists(ids, max_size=2).map(tuple),
              st.lists(st.tuples(st.sampled_from(["shape", "x"]), ids), max_size=1).map(tuple), ids),
    st.builds(LexicalRead, ids, idents), st.builds(LexicalWrite, idents, ids),
    st.builds(Return, ids), st.builds(Branch, ids, st.just("b1"), st.just("b2")),
    st.builds(Goto, st.sampled_from(["b1", "b2"])),
)


@settings(max_examples=1000)
@given(instructions, instructions)
def test_format_instruction_injective(a, b):
    if isinstance(a, Invoke) and a.callee is None:
        a = Invoke(a.dest, None, "model:m.import", a.args, a.kwargs, a.site)
    if isinstance(b, Invoke) and b.callee is None:
        b = Invoke(b.dest, None, "model:m.import", b.args, b.kwargs, b.site)
    if a != b:
        assert format_instruction(a) != format_instruction(b)
