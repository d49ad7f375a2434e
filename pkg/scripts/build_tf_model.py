"""Generate the bundled TensorFlow model (src/tensorlint/models/tensorflow.json).

The API surface is written as a tree: dicts are namespaces, ``Op`` leaves are
callables. Each importable root becomes a class with an ``import`` method
that allocates the whole namespace graph; each callable becomes a class
with a ``do`` method.

    python scripts/build_tf_model.py [--out PATH]
"""

import argparse
import json
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional

HERE = os.path.dirname(os.path.abspath(__file__))
DEFAULT_OUT = os.path.join(HERE, "..", "src", "tensorlint", "models", "tensorflow.json")

TENSOR = "tensorflow/Tensor"


@dataclass
class Op:
    tag: Optional[str] = "opaque"
    params: List[str] = field(default_factory=list)
    fields: Dict[str, "Op"] = field(default_factory=dict)   # callables hung on the result object
    body: Optional[list] = None                              # hand-written body replaces the default
    output: Optional[str] = None
    element: Optional[str] = None
    varargs: bool = True


class Value:
    """A plain constant-like object (dtypes, mode keys)."""


def opaque(*params, **kw):
    return Op("opaque", list(params), **kw)


LAYER = ["inputs"]

TENSORFLOW = {
    "reshape": Op("reshape", ["tensor", "shape", "name"]),
    "placeholder": Op("placeholder", ["dtype", "shape", "name"], element="num"),
    "decode_raw": opaque("bytes", "out_type", "little_endian", "name"),
    "argmax": opaque("input", "axis", "name", "dimension", "output_type"),
    "argmin": opaque("input", "axis", "name", "dimension", "output_type"),
    "reduce_mean": opaque("input_tensor", "axis", "keepdims", "name", "reduction_indices"),
    "reduce_sum": opaque("input_tensor", "axis", "keepdims", "name", "reduction_indices"),
    "cast": opaque("x", "dtype", "name"),
    "equal": opaque("x", "y", "name"),
    "matmul": opaque("a", "b", "transpose_a", "transpose_b", "name"),
    "add": opaque("x", "y", "name"),
    "zeros": opaque("shape", "dtype", "name"),
    "ones": opaque("shape", "dtype", "name"),
    "constant": opaque("value", "dtype", "shape", "name"),
    "truncated_normal": opaque("shape", "mean", "stddev", "dtype", "seed", "name"),
    "random_normal": opaque("shape", "mean", "stddev", "dtype", "seed", "name"),
    "Variable": opaque("initial_value", "trainable", "name"),
    "global_variables_initializer": opaque(fields={"run": opaque("feed_dict", "session")}),
    "identity": opaque("input", "name"),
    "parse_single_example": opaque("serialized", "features", "name", "example_names"),
    "FixedLenFeature": opaque("shape", "dtype", "default_value"),
    "TFRecordReader": opaque("name", "options", fields={"read": opaque("queue", "name")}),
    "variable_scope": opaque("name_or_scope", "default_name", "values", "reuse"),
    "name_scope": opaque("name", "default_name", "values"),
    "Session": opaque("target", "graph", "config", fields={
        "run": opaque("fetches", "feed_dict", "options", "run_metadata"),
        "close": opaque(),
    }),
    "InteractiveSession": opaque("target", "graph", "config", fields={
        "run": opaque("fetches", "feed_dict", "options", "run_metadata"),
        "close": opaque(),
    }),
    "ConfigProto": opaque(),
    "OptimizerOptions": {"ON_1": Value(), "ON_2": Value(), "OFF": Value()},
    "RunOptions": opaque("trace_level"),
    "RunMetadata": opaque(),
    "float32": Value(), "float64": Value(), "int32": Value(), "int64": Value(),
    "uint8": Value(), "string": Value(),
    "nn": {
        "relu": opaque("features", "name"),
        "softmax": opaque("logits", "axis", "name"),
        "dropout": opaque("x", "keep_prob", "noise_shape", "seed", "name"),
        "sparse_softmax_cross_entropy_with_logits": opaque("_sentinel", "labels", "logits", "name"),
        "softmax_cross_entropy_with_logits": opaque("_sentinel", "labels", "logits", "dim", "name"),
        "conv2d": Op("conv2d", ["input", "filter", "strides", "padding", "use_cudnn_on_gpu",
                                "data_format", "dilations", "name"]),
        "conv3d": Op("conv3d", ["input", "filter", "strides", "padding", "data_format",
                                "dilations", "name"]),
        "max_pool": opaque("value", "ksize", "strides", "padding", "data_format", "name"),
        "bias_add": opaque("value", "bias", "data_format", "name"),
        "l2_loss": opaque("t", "name"),
    },
    "layers": {
        "conv2d": Op("conv2d", LAYER + ["filters", "kernel_size", "strides", "padding", "data_format",
                                        "dilation_rate", "activation"]),
        "conv3d": Op("conv3d", LAYER + ["filters", "kernel_size", "strides", "padding", "data_format",
                                        "dilation_rate", "activation"]),
        "max_pooling2d": Op("max_pooling2d", LAYER + ["pool_size", "strides", "padding"]),
        "max_pooling3d": opaque("inputs", "pool_size", "strides", "padding"),
        "dense": Op("dense", LAYER + ["units", "activation"]),
        "dropout": Op("dropout", LAYER + ["rate", "noise_shape", "seed", "training"]),
        "flatten": Op("flatten", LAYER + ["name"]),
    },
    "contrib": {"layers": {"flatten": Op("flatten", LAYER + ["outputs_collections", "scope"])}},
    "estimator": {
        "Estimator": Op(None, ["model_fn", "model_dir", "config", "params"], body=[
            {"op": "new", "def": "x", "class": "tensorflow/estimator/train/train"},
            {"op": "putfield", "ref": "arg0", "field": "train", "value": "x"},
            {"op": "putfield", "ref": "x", "field": "$callback", "value": "arg1"},
            {"op": "return", "value": "arg0"},
        ]),
        "EstimatorSpec": opaque("mode", "predictions", "loss", "train_op", "eval_metric_ops"),
        "ModeKeys": {"PREDICT": Value(), "TRAIN": Value(), "EVAL": Value()},
        "inputs": {
            "numpy_input_fn": Op(None, ["x", "y", "batch_size", "num_epochs", "shuffle"], body=[
                {"op": "new", "def": "fn", "class": "tensorflow/estimator/inputs/input_fn"},
                {"op": "putfield", "ref": "fn", "field": "features", "value": "arg1"},
                {"op": "putfield", "ref": "fn", "field": "labels", "value": "arg2"},
                {"op": "return", "value": "fn"},
            ]),
        },
    },
    "train": {
        "AdamOptimizer": opaque("learning_rate", "beta1", "beta2", "epsilon", fields={
            "minimize": opaque("loss", "global_step", "var_list")}),
        "GradientDescentOptimizer": opaque("learning_rate", fields={
            "minimize": opaque("loss", "global_step", "var_list")}),
        "get_global_step": opaque("graph"),
        "string_input_producer": opaque("string_tensor", "num_epochs", "shuffle", "seed",
                                        "capacity", "name"),
        "shuffle_batch": opaque("tensors", "batch_size", "capacity", "min_after_dequeue",
                                "num_threads", "seed", "name"),
    },
    "losses": {"sparse_softmax_cross_entropy": opaque("labels", "logits", "weights", "scope")},
    "metrics": {"accuracy": opaque("labels", "predictions", "weights")},
    "summary": {
        "image": opaque("name", "tensor", "max_outputs", "collections", "family"),
        "scalar": opaque("name", "tensor", "collections", "family"),
        "histogram": opaque("name", "values", "collections", "family"),
        "merge_all": opaque("key", "scope"),
        "FileWriter": opaque("logdir", "graph", fields={
            "add_summary": opaque("summary", "global_step"),
            "add_run_metadata": opaque("run_metadata", "tag", "global_step"),
            "close": opaque(),
        }),
    },
}

# Hand-written classes reached only through other objects.
EXTRA_CLASSES = {
    "tensorflow/estimator/train": {
        "train": Op(None, ["input_fn", "hooks", "steps", "max_steps"], body=[
            {"op": "getfield", "ref": "arg0", "field": "$callback", "def": "cb"},
            {"op": "getfield", "ref": "arg1", "field": "features", "def": "features"},
            {"op": "getfield", "ref": "arg1", "field": "labels", "def": "labels"},
            {"op": "call", "receiver": "cb", "args": ["features", "labels", {"int": 0}], "def": "spec"},
            {"op": "return", "value": "spec"},
        ]),
    },
}

_DATASET = {"next_batch": opaque("batch_size", "fake_data", "shuffle")}

MNIST = {
    "input_data": {
        "read_data_sets": Op(None, ["train_dir", "fake_data", "one_hot", "dtype", "reshape"],
                             body="dataset"),
    },
}

ROOTS = {
    "tensorflow": TENSORFLOW,
    "tensorflow/examples/tutorials/mnist": MNIST,
}


class Builder:
    def __init__(self):
        self.packages: Dict[str, List[dict]] = {}

    def add_class(self, package: str, name: str, methods: List[dict]) -> str:
        self.packages.setdefault(package, []).append(
            {"name": name, "allocatable": True, "methods": methods})
        return f"{package}/{name}"

    def callable_class(self, package: str, name: str, op: Op) -> str:
        qname = f"{package}/{name}"
        if op.body == "dataset":
            body = self.dataset_body(qname)
        elif op.body is not None:
            body = op.body
        else:
            body = [{"op": "new", "def": "result", "class": TENSOR}]
            for fname, sub in op.fields.items():
                token = self.callable_class(qname, fname, sub)
                body.append({"op": "new", "def": fname, "class": token})
                body.append({"op": "putfield", "ref": "result", "field": fname, "value": fname})
            body.append({"op": "return", "value": "result"})
        method = {"name": "do", "numArgs": len(op.params) + 1, "semantics": op.tag,
                  "body": body, "params": op.params}
        if op.varargs:
            method["varargs"] = True
        if op.output:
            method["output"] = op.output
        if op.element:
            method["element"] = op.element
        return self.add_class(package, name, [method])

    def dataset_body(self, qname: str) -> list:
        body = [{"op": "new", "def": "datasets", "class": f"{qname}/Datasets"}]
        token = self.callable_class(f"{qname}/DataSet", "next_batch", _DATASET["next_batch"])
        for split in ("train", "validation", "test"):
            body += [
                {"op": "new", "def": split, "class": f"{qname}/DataSet"},
                {"op": "new", "def": f"{split}.next_batch", "class": token},
                {"op": "putfield", "ref": split, "field": "next_batch", "value": f"{split}.next_batch"},
                {"op": "new", "def": f"{split}.images", "class": TENSOR},
                {"op": "putfield", "ref": split, "field": "images", "value": f"{split}.images"},
                {"op": "new", "def": f"{split}.labels", "class": TENSOR},
                {"op": "putfield", "ref": split, "field": "labels", "value": f"{split}.labels"},
                {"op": "putfield", "ref": "datasets", "field": split, "value": split},
            ]
        body.append({"op": "return", "value": "datasets"})
        return body

    def namespace(self, path: str, tree: dict, body: list, var: str) -> None:
        for name, node in tree.items():
            child = f"{var}.{name}"
            if isinstance(node, dict):
                body.append({"op": "new", "def": child, "class": f"{path}/{name}"})
                self.namespace(f"{path}/{name}", node, body, child)
            elif isinstance(node, Value):
                body.append({"op": "new", "def": child, "class": f"{path}/{name}"})
            else:
                token = self.callable_class(path, name, node)
                body.append({"op": "new", "def": child, "class": token})
            body.append({"op": "putfield", "ref": var, "field": name, "value": child})

    def root(self, package: str, tree: dict) -> None:
        short = package.rsplit("/", 1)[-1]
        body = [{"op": "new", "def": short, "class": f"{package}/module"}]
        self.namespace(package, tree, body, short)
        body.append({"op": "return", "value": short})
        self.add_class(package, short, [
            {"name": "import", "numArgs": 1, "semantics": None, "body": body}])

    def document(self) -> dict:
        return {"packages": [{"name": p, "classes": cs} for p, cs in self.packages.items()]}


def build() -> dict:
    b = Builder()
    for package, tree in ROOTS.items():
        b.root(package, tree)
    for package, classes in EXTRA_CLASSES.items():
        for name, op in classes.items():
            b.callable_class(package, name, op)
    return b.document()


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=DEFAULT_OUT)
    args = ap.parse_args(argv)
    doc = build()
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")
    n = sum(len(p["classes"]) for p in doc["packages"])
    print(f"wrote {args.out}: {len(doc['packages'])} packages, {n} classes")


if __name__ == "__main__":
    main()
