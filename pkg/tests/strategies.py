"""Hypothesis strategies for dimension and Python types."""

from hypothesis import strategies as st

from tensorlint.tensor_types import Label, Labeled, Num, Product, Record, Sym, Tensor, TOP

LABELS = st.sampled_from(["batch", "x", "y", "z", "c", "n_classes"])
FIELDS = st.sampled_from(["images", "labels", "train", "test", "a", "b"])


def atoms(max_size=12):
    return st.one_of(
        st.builds(Sym, LABELS),
        st.builds(Num, st.integers(0, max_size)),
        st.builds(Labeled, LABELS, st.integers(0, max_size)),
    )


def dims(max_size=12):
    """Dims, including nested products (which normalize flattens)."""
    return st.recursive(atoms(max_size),
                        lambda inner: st.lists(inner, min_size=2, max_size=3).map(
                            lambda fs: Product(tuple(_flat(fs)))),
                        max_leaves=6)


def _flat(fs):
    out = []
    for f in fs:
        out.extend(f.factors if isinstance(f, Product) else [f])
    return out


elements = st.one_of(st.builds(Label, st.sampled_from(["channel", "num", "label"])), st.just(TOP))


def tensors(max_rank=4):
    # the element may itself be a tensor: the nested form normalize removes
    base = st.builds(lambda ds, e: Tensor(tuple(ds), e), st.lists(dims(), min_size=1, max_size=max_rank),
                     elements)
    return st.recursive(base, lambda inner: st.builds(
        lambda ds, e: Tensor(tuple(ds), e), st.lists(dims(), min_size=1, max_size=2), inner),
        max_leaves=3)


def records(children):
    return st.dictionaries(FIELDS, children, max_size=3).map(Record.of)


pytypes = st.recursive(st.one_of(tensors(), elements), records, max_leaves=8)


def known_tensors(max_factor=12, max_factors=6):
    """Tensors whose every dimension has a known size."""
    factor = st.one_of(st.builds(Num, st.integers(1, max_factor)),
                       st.builds(Labeled, st.sampled_from(["x", "y", "z", "c"]),
                                 st.integers(1, max_factor)))

    def group(fs):
        return fs[0] if len(fs) == 1 else Product(tuple(fs))

    return st.lists(st.lists(factor, min_size=1, max_size=3), min_size=1, max_size=4).filter(
        lambda ds: sum(map(len, ds)) <= max_factors).map(
        lambda ds: Tensor(tuple(group(d) for d in ds), Label("channel")))
