"""Random source programs inside the supported subset."""

from hypothesis import strategies as st

NAMES = st.sampled_from(["a", "b", "c", "x", "tf", "foo"])
ATTRS = st.sampled_from(["images", "reshape", "train", "n"])


def expressions():
    leaves = st.one_of(
        NAMES,
        st.integers(-5, 300).map(str),
        st.sampled_from(["'images'", "None", "True", "1.5", "'s'"]),
    )

    def extend(inner):
        return st.one_of(
            st.tuples(inner, ATTRS).map(lambda t: f"({t[0]}).{t[1]}"),
            st.tuples(inner, inner).map(lambda t: f"({t[0]})[{t[1]}]"),
            st.tuples(inner, st.lists(inner, max_size=2), st.lists(st.tuples(ATTRS, inner), max_size=2))
              .map(lambda t: "({})({})".format(t[0], ", ".join(t[1] + [f"{k}={v}" for k, v in t[2]]))),
            st.lists(inner, max_size=3).map(lambda xs: "[" + ", ".join(xs) + "]"),
            st.lists(inner, min_size=2, max_size=3).map(lambda xs: "(" + ", ".join(xs) + ")"),
            st.lists(st.tuples(st.sampled_from(["'a'", "'b'"]), inner), max_size=2)
              .map(lambda kv: "{" + ", ".join(f"{k}: {v}" for k, v in kv) + "}"),
            st.tuples(inner, st.sampled_from(["+", "-", "*", "//", "<", "=="]), inner)
              .map(lambda t: f"({t[0]} {t[1]} {t[2]})"),
        )
    return st.recursive(leaves, extend, max_leaves=6)


EXPR = expressions()
TARGET = st.one_of(NAMES, st.tuples(NAMES, ATTRS).map(lambda t: f"{t[0]}.{t[1]}"),
                   st.tuples(NAMES, st.sampled_from(["'k'", "0", "a"])).map(lambda t: f"{t[0]}[{t[1]}]"))


def _indent(lines):
    return ["    " + line for line in lines]


def statements(depth=2):
    simple = st.one_of(
        st.tuples(TARGET, EXPR).map(lambda t: [f"{t[0]} = {t[1]}"]),
        st.tuples(NAMES, st.sampled_from(["+", "*"]), EXPR).map(lambda t: [f"{t[0]} {t[1]}= {t[2]}"]),
        EXPR.map(lambda e: [e]),
        st.just(["import tensorflow as tf"]),
        st.just(["from tensorflow.examples.tutorials.mnist import input_data"]),
    )
    if depth == 0:
        return simple
    block = st.lists(statements(depth - 1), min_size=1, max_size=3).map(lambda bs: sum(bs, []))
    return st.one_of(
        simple,
        st.tuples(EXPR, block, st.one_of(st.none(), block)).map(
            lambda t: [f"if {t[0]}:"] + _indent(t[1]) + (["else:"] + _indent(t[2]) if t[2] else [])),
        st.tuples(EXPR, block).map(lambda t: [f"while {t[0]}:"] + _indent(t[1])),
        st.tuples(EXPR, st.one_of(st.none(), NAMES), block).map(
            lambda t: [f"with {t[0]}" + (f" as {t[1]}:" if t[1] else ":")] + _indent(t[2])),
    )


def function_defs():
    body = st.lists(statements(1), min_size=1, max_size=3).map(lambda bs: sum(bs, []))
    return st.tuples(st.sampled_from(["f", "g", "h"]), st.lists(NAMES, max_size=3, unique=True), body,
                     st.one_of(st.none(), EXPR)).map(
        lambda t: [f"def {t[0]}({', '.join(t[1])}):"] + _indent(t[2] + ([f"return {t[3]}"] if t[3] else [])))


programs = st.lists(st.one_of(statements(), function_defs()), min_size=1, max_size=5).map(
    lambda parts: "\n".join(sum(parts, [])) + "\n")
