import pytest
from hypothesis import given, settings, strategies as st

from strategies import atoms, dims, elements, pytypes
from tensorlint.tensor_types import (
    Function, Label, Labeled, Num, Product, Record, Sym, Tensor, TOP, Top, TypeSyntaxError,
    dim_size, format_type, is_fresh_label, make_product, normalize, parse_type, tensor_size,
    type_equal,
)

Y28, X28 = Labeled("y", 28), Labeled("x", 28)


# -- parsing ------------------------------------------------------------------

def test_parse_mnist_images():
    t = parse_type("tensor[batch, y(28)*x(28)] of channel")
    assert t == Tensor((Sym("batch"), Product((Y28, X28))), Label("channel"))


def test_parse_labels():
    assert parse_type("tensor[10] of label") == Tensor((Num(10),), Label("label"))


def test_parse_top():
    assert parse_type("top") is TOP or parse_type("top") == Top()


def test_parse_default_element_is_num():
    assert parse_type("tensor[3]") == Tensor((Num(3),), Label("num"))


def test_parse_record_and_function():
    t = parse_type("{train: {images: tensor[batch, 784] of channel}, n: tensor[1]}")
    assert isinstance(t, Record) and t.get("train").get("images").dims[1] == Num(784)
    f = parse_type("(x: tensor[a], k: top) -> tensor[a, 10] of channel")
    assert isinstance(f, Function) and [k for k, _ in f.params] == ["x", "k"]
    assert parse_type("() -> top") == Function((), TOP)


def test_parse_fresh_labels():
    t = parse_type("tensor[?1, 784] of num")
    assert t.dims[0] == Sym("?1") and is_fresh_label("?1") and not is_fresh_label("batch")


@pytest.mark.parametrize("text, offset", [
    ("tensor[", 7),
    ("tensor[a,]", 9),
    ("{a: top, a: top}", 1),
    ("tensor[x(y)]", 9),
    ("top top", 4),
    ("tensor[a] of", 12),
    ("tensor[a] % b", 10),
])
def test_syntax_errors_carry_offsets(text, offset):
    with pytest.raises(TypeSyntaxError) as info:
        parse_type(text)
    assert info.value.offset == offset


# -- normalize / equality -----------------------------------------------------

def test_nested_tensor_equals_flat_list():
    nested = Tensor((Sym("d1"),), Tensor((Sym("d2"), Sym("d3")), Label("p")))
    assert normalize(nested) == Tensor((Sym("d1"), Sym("d2"), Sym("d3")), Label("p"))


def test_product_associativity():
    a, b, c = Sym("a"), Sym("b"), Sym("c")
    assert make_product([a, make_product([b, c])]) == Product((a, b, c))


def test_flat_type_unchanged():
    t = parse_type("tensor[batch, y(28), x(28), 1] of channel")
    assert normalize(t) == t


def test_unit_and_unlabeled_factors_fold():
    assert make_product([Num(1), Num(2), Num(3), Labeled("x", 4)]) == Product((Num(6), Labeled("x", 4)))
    assert make_product([Num(1)]) == Num(1)


def test_record_field_order_ignored():
    t1, t2 = parse_type("tensor[a]"), parse_type("tensor[b]")
    assert type_equal(Record.of({"a": t1, "b": t2}), Record.of({"b": t2, "a": t1}))


def test_factor_order_is_significant():
    assert not type_equal(parse_type("tensor[y(28)*x(28)]"), parse_type("tensor[x(28)*y(28)]"))


def test_labels_are_significant():
    assert not type_equal(Tensor((Labeled("y", 28),)), Tensor((Num(28),)))


def test_top_equals_top():
    assert type_equal(TOP, Top())


def test_dim_sizes():
    assert dim_size(Product((Y28, X28))) == 784
    assert dim_size(Sym("batch")) is None
    assert dim_size(Num(0)) == 0
    assert dim_size(Product((Sym("b"), Num(3)))) is None
    assert tensor_size(parse_type("tensor[2, y(3)*x(4)]")) == 24


def test_negative_sizes_rejected():
    with pytest.raises(ValueError):
        Num(-1)
    with pytest.raises(ValueError):
        Labeled("x", -2)


def test_invariants_enforced():
    with pytest.raises(ValueError):
        Tensor(())
    with pytest.raises(ValueError):
        Product((Sym("a"),))
    with pytest.raises(ValueError):
        Product((Sym("a"), Product((Sym("b"), Sym("c")))))
    with pytest.raises(ValueError):
        Record((("a", TOP), ("a", TOP)))


# -- properties ---------------------------------------------------------------

@settings(max_examples=1000)
@given(pytypes)
def test_normalize_idempotent(t):
    n = normalize(t)
    assert normalize(n) == n
    assert type_equal(t, n)


@settings(max_examples=1000)
@given(st.lists(dims(), min_size=1, max_size=3), st.lists(dims(), min_size=1, max_size=3), elements)
def test_nested_equals_list(outer, inner, element):
    nested = Tensor(tuple(outer), Tensor(tuple(inner), element))
    assert type_equal(nested, Tensor(tuple(outer) + tuple(inner), element))


@settings(max_examples=300)
@given(pytypes)
def test_format_parse_round_trip(t):
    n = normalize(t)
    assert parse_type(format_type(n)) == n


@settings(max_examples=500)
@given(st.dictionaries(st.sampled_from("abcdef"), pytypes, min_size=1, max_size=5), st.randoms())
def test_record_permutation_invariance(fields, rnd):
    items = list(fields.items())
    shuffled = items[:]
    rnd.shuffle(shuffled)
    a, b = Record(tuple(items)), Record(tuple(shuffled))
    assert type_equal(a, b)
    # and nested one level down
    assert type_equal(Record.of({"outer": a}), Record.of({"outer": b}))


@settings(max_examples=300)
@given(st.lists(atoms(), min_size=2, max_size=5))
def test_product_size_multiplies(fs):
    sizes = [dim_size(f) for f in fs]
    expected = None if None in sizes else 1
    if expected is not None:
        for s in sizes:
            expected *= s
    assert dim_size(make_product(fs)) == expected
