"""Shape rules for the modeled tensor APIs.

Every function here is pure: it takes tensor types (plus whatever constant
arguments the call site supplied) and returns the result type or raises a
:class:`ShapeError` subclass whose ``code`` is the diagnostic code.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Callable, FrozenSet, Iterator, List, Optional, Sequence, Tuple, Union

from .tensor_types import (
    Dim, Label, Labeled, Num, Product, Sym, Tensor, Top,
    dim_size, factors_of, format_dim, format_type, is_fresh_label,
    make_product, normalize,
)

log = logging.getLogger(__name__)

IntOrUnknown = Union[int, str, None]


# -- errors -------------------------------------------------------------------

class ShapeError(Exception):
    code = "ARI000"


class ReshapeError(ShapeError):
    pass


class SizeMismatch(ReshapeError):
    code = "ARI001"

    def __init__(self, src_total, target_total):
        super().__init__(f"reshape changes the element count: input has {src_total}, shape asks for {target_total}")
        self.src_total = src_total
        self.target_total = target_total


class InvalidFactorization(ReshapeError):
    code = "ARI002"

    def __init__(self, target_entry: int, factor: Dim):
        super().__init__(
            f"shape entry {target_entry} does not line up with the factor {format_dim(factor)} of the input")
        self.target_entry = target_entry
        self.factor = factor


class MultipleWildcards(ReshapeError):
    code = "ARI006"

    def __init__(self, count: int):
        super().__init__(f"reshape shape has {count} wildcard (-1) entries; at most one is allowed")
        self.count = count


class WildcardUnresolvable(ReshapeError):
    code = "ARI006"


class RankError(ShapeError):
    code = "ARI003"

    def __init__(self, got: int, want: int, at_least: bool = False):
        wanted = f"at least {want}" if at_least else str(want)
        super().__init__(f"expected a tensor of rank {wanted}, got rank {got}")
        self.got = got
        self.want = want
        self.at_least = at_least


class PlaceholderRankZero(RankError):
    def __init__(self):
        ShapeError.__init__(self, "placeholder shape must have at least one dimension")
        self.got, self.want, self.at_least = 0, 1, True


class LabelError(ShapeError):
    code = "ARI004"

    def __init__(self, position: int, got: str, wanted: Sequence[str]):
        super().__init__(
            f"dimension {position} is labeled {got!r}, expected one of {', '.join(wanted)}")
        self.position = position
        self.got = got
        self.wanted = tuple(wanted)


class ElementNotNumeric(ShapeError):
    code = "ARI005"

    def __init__(self, label: str):
        super().__init__(f"tensor elements labeled {label!r} are not numeric")
        self.label = label


# -- configuration ------------------------------------------------------------

@dataclass(frozen=True)
class ShapeConfig:
    height: FrozenSet[str] = frozenset({"y", "height", "h"})
    width: FrozenSet[str] = frozenset({"x", "width", "w"})
    depth: FrozenSet[str] = frozenset({"z", "depth", "d"})
    strict_order: bool = True
    numeric_labels: FrozenSet[str] = frozenset({"channel", "num", "value", "pixel"})


DEFAULT_CONFIG = ShapeConfig()


# -- reshape ------------------------------------------------------------------

@dataclass
class _Factor:
    dim: Dim
    src: int        # index of the input dimension this factor came from
    alone: bool     # the factor is that whole dimension

    @property
    def size(self) -> Optional[int]:
        return dim_size(self.dim)


def _factor_sequence(t: Tensor) -> List[_Factor]:
    out: List[_Factor] = []
    for i, d in enumerate(t.dims):
        fs = factors_of(d)
        for f in fs:
            prev = out[-1] if out else None
            # unlabeled sizes carry no structure: fold neighbours together
            if (isinstance(f, Num) and prev is not None and type(prev.dim) is Num
                    and f.n != 1 and prev.dim.n != 1):
                # the merged factor ends in dimension i, so trailing units of i follow it
                out[-1] = _Factor(Num(prev.dim.n * f.n), i, False)
                continue
            out.append(_Factor(f, i, len(fs) == 1))
    return out


def _match(factors: List[_Factor], targets: Sequence[int], reverse: bool) -> Tuple[List[Dim], List[_Factor]]:
    """Greedy left-to-right assignment of ``targets`` to runs of ``factors``.

    Returns the produced dimensions and the unconsumed factors. With
    ``reverse`` the inputs are already reversed and each produced product is
    flipped back so that factor order still follows memory layout.
    """
    factors = list(factors)
    out: List[Dim] = []
    i = 0
    for z in targets:
        if z == 1:
            if i < len(factors) and factors[i].size == 1:
                group = [factors[i].dim]
                i += 1
                while (i < len(factors) and factors[i].size == 1 and not factors[i].alone
                       and factors[i].src == factors[i - 1].src):
                    group.append(factors[i].dim)
                    i += 1
                if reverse:
                    group.reverse()
                out.append(make_product(group))
            else:
                out.append(Num(1))
            continue
        while i < len(factors) and factors[i].size == 1 and factors[i].alone:
            i += 1
        group: List[Dim] = []
        prod = 1
        last_src = None
        while prod != z:
            if i >= len(factors):
                raise SizeMismatch(prod, z)
            f = factors[i]
            size = f.size
            if size is None:
                raise WildcardUnresolvable(
                    f"symbolic dimension {format_dim(f.dim)} can only be matched by a -1 entry")
            if size == 0:
                raise SizeMismatch(0, z)
            if z % (prod * size) == 0:
                group.append(f.dim)
                prod *= size
                last_src = f.src
                i += 1
            elif type(f.dim) is Num and z % prod == 0 and size % (z // prod) == 0:
                part = z // prod
                group.append(Num(part))
                factors[i] = replace(f, dim=Num(size // part), alone=False)
                prod = z
                last_src = None
            else:
                raise InvalidFactorization(z, f.dim)
        while (last_src is not None and i < len(factors) and factors[i].size == 1
               and factors[i].src == last_src and not factors[i].alone):
            group.append(factors[i].dim)
            i += 1
        if reverse:
            group.reverse()
        out.append(make_product(group) if len(group) > 1 else group[0])
    return out, factors[i:]


def reshape_apply(src: Tensor, shape: Sequence[Optional[int]]) -> Tensor:
    """Reshape ``src`` to ``shape``, keeping dimension labels where the
    regrouping respects the input's factor structure.

    ``-1`` (or ``None``) marks the single inferred entry. Labeled factors
    are never split; unlabeled sizes may be split or merged freely.
    """
    src = normalize(src)
    shape = [-1 if z is None else z for z in shape]
    wild = [k for k, z in enumerate(shape) if z == -1]
    if len(wild) > 1:
        raise MultipleWildcards(len(wild))
    if any(z < -1 for z in shape):
        raise WildcardUnresolvable(f"negative shape entry in {shape}")
    if not shape:
        raise SizeMismatch(dim_size(make_product(src.dims)), 1)

    factors = _factor_sequence(src)
    known = 1
    symbolic = 0
    for f in factors:
        if f.size is None:
            symbolic += 1
        else:
            known *= f.size
    wanted = 1
    for z in shape:
        if z != -1:
            wanted *= z

    if not wild:
        if symbolic:
            raise WildcardUnresolvable("input has symbolic dimensions but the shape has no -1 entry")
        if known != wanted:
            raise SizeMismatch(known, wanted)
        dims, rest = _match(factors, shape, reverse=False)
        if any(f.size != 1 for f in rest):
            raise SizeMismatch(known, wanted)
        return normalize(Tensor(tuple(dims), src.element))

    if wanted == 0 or known % wanted != 0:
        raise SizeMismatch(known, wanted)
    k = wild[0]
    left, rest = _match(factors, shape[:k], reverse=False)
    right, middle = _match(rest[::-1], shape[k + 1:][::-1], reverse=True)
    middle = [f for f in middle[::-1] if not (f.alone and f.size == 1)]
    mid = make_product([f.dim for f in middle]) if middle else Num(1)
    return normalize(Tensor(tuple(left + [mid] + right[::-1]), src.element))


# -- convolution and friends --------------------------------------------------

def _dim_label(d: Dim) -> Optional[str]:
    if isinstance(d, (Sym, Labeled)):
        return None if is_fresh_label(d.label) else d.label
    if isinstance(d, Product):
        return format_dim(d)
    return None


def _check_element(t: Tensor, config: ShapeConfig) -> None:
    el = t.element
    if isinstance(el, Top):
        return
    if not isinstance(el, Label):
        raise ElementNotNumeric(format_type(el))
    if el.name not in config.numeric_labels:
        raise ElementNotNumeric(el.name)


def _check_spatial(t: Tensor, roles: Sequence[FrozenSet[str]], config: ShapeConfig) -> None:
    spatial = t.dims[1:1 + len(roles)]
    if config.strict_order:
        for pos, (d, aliases) in enumerate(zip(spatial, roles), start=2):
            label = _dim_label(d)
            if label is not None and label not in aliases:
                raise LabelError(pos, label, sorted(aliases))
        return
    taken = set()
    everything = sorted(set().union(*roles))
    for pos, d in enumerate(spatial, start=2):
        label = _dim_label(d)
        if label is None:
            continue
        matches = [r for r, aliases in enumerate(roles) if label in aliases and r not in taken]
        if not matches:
            raise LabelError(pos, label, everything)
        taken.add(matches[0])


def _conv(t: Tensor, rank: int, roles, filters, config: ShapeConfig, output: str) -> Tensor:
    t = normalize(t)
    if t.rank != rank:
        raise RankError(t.rank, rank)
    _check_spatial(t, roles, config)
    _check_element(t, config)
    if output == "filters-last":
        last = Num(filters) if isinstance(filters, int) else Sym(filters or "filters")
        return Tensor(t.dims[:-1] + (last,), t.element)
    return t


def conv2d_check(t: Tensor, filters: IntOrUnknown = None, config: ShapeConfig = DEFAULT_CONFIG,
                 output: str = "same-as-input") -> Tensor:
    """Rank 4, height/width labels in the middle, numeric elements.

    By default the result type equals the input; ``output="filters-last"``
    replaces the channel dimension with the filter count instead.
    """
    return _conv(t, 4, (config.height, config.width), filters, config, output)


def conv3d_check(t: Tensor, filters: IntOrUnknown = None, config: ShapeConfig = DEFAULT_CONFIG,
                 output: str = "same-as-input") -> Tensor:
    return _conv(t, 5, (config.depth, config.height, config.width), filters, config, output)


def fresh_labels(prefix: str = "?") -> Iterator[str]:
    n = 0
    while True:
        n += 1
        yield f"{prefix}{n}"


def placeholder_type(shape: Sequence[Optional[int]], fresh: Union[Iterator[str], Callable[[], str]],
                     element: str = "num") -> Tensor:
    if not shape:
        raise PlaceholderRankZero()
    take = fresh if callable(fresh) else (lambda: next(fresh))
    dims = tuple(Sym(take()) if z is None or z == -1 else Num(z) for z in shape)
    return Tensor(dims, Label(element))


def pool2d_apply(t: Tensor, pool: IntOrUnknown, stride: IntOrUnknown,
                 config: ShapeConfig = DEFAULT_CONFIG) -> Tensor:
    """Downsample the two spatial dimensions by ``stride``.

    Sizes that do not divide evenly are floored (and logged).
    """
    t = normalize(t)
    if t.rank != 4:
        raise RankError(t.rank, 4)
    _check_element(t, config)
    if not isinstance(stride, int) or stride <= 0:
        return t
    dims = list(t.dims)
    for k in (1, 2):
        d = dims[k]
        size = dim_size(d)
        if size is not None and size % stride:
            log.warning("pooling %s by stride %d truncates", format_dim(d), stride)
        if isinstance(d, Labeled):
            dims[k] = Labeled(d.label, d.n // stride)
        elif isinstance(d, Num):
            dims[k] = Num(d.n // stride)
        elif isinstance(d, Product) and size is not None:
            dims[k] = Num(size // stride)
    return Tensor(tuple(dims), t.element)


def flatten_apply(t: Tensor) -> Tensor:
    t = normalize(t)
    if t.rank < 2:
        raise RankError(t.rank, 2, at_least=True)
    inner = [f for d in t.dims[1:] for f in factors_of(d) if dim_size(f) != 1]
    return Tensor((t.dims[0], make_product(inner) if inner else Num(1)), t.element)


def dense_apply(t: Tensor, units: IntOrUnknown) -> Tensor:
    t = normalize(t)
    if t.rank != 2:
        raise RankError(t.rank, 2)
    last = Num(units) if isinstance(units, int) else Sym(units or "units")
    return Tensor((t.dims[0], last), t.element)


def identity_apply(t: Tensor) -> Tensor:
    return normalize(t)


TRANSFER_TAGS = frozenset({
    "reshape", "conv2d", "conv3d", "placeholder", "max_pooling2d",
    "flatten", "dense", "dropout", "identity", "opaque",
})
