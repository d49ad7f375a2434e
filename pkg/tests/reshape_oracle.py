"""Brute-force reference for reshape: enumerate every legal way of
grouping the input's factors into the target entries.

Written from the rules, not from the implementation:

* the input is flattened into factors (products expand); each maximal run
  of adjacent unlabeled sizes is one free factor;
* a fixed entry consumes a contiguous run of factors whose sizes multiply
  to it; the run may start with what is left of a partly used free factor
  and may end with a divisor of a free factor, leaving the rest behind;
* labeled and symbolic factors are never split; symbolic ones can only be
  covered by the -1 entry;
* an entry of 1 may also be inserted, and a size-1 factor may be dropped;
* -1 covers any contiguous run (possibly empty);
* everything must be consumed.

Returns the set of normalized result types (empty means reject).
"""

from tensorlint.tensor_types import Num, Tensor, dim_size, factors_of, make_product, normalize


def factor_list(src):
    out = []
    for d in normalize(src).dims:
        for f in factors_of(d):
            if type(f) is Num and out and type(out[-1]) is Num:
                out[-1] = Num(out[-1].n * f.n)
            else:
                out.append(f)
    return out


def _divisors(n):
    return [p for p in range(1, n + 1) if n % p == 0]


def reshape_outcomes(src, shape):
    shape = [-1 if z is None else z for z in shape]
    if shape.count(-1) > 1 or not shape:
        return set()
    fs = factor_list(src)
    n = len(fs)
    results = set()

    def piece(i, rem):
        return Num(rem) if rem is not None else fs[i]

    def avail(i, rem):
        return rem if rem is not None else dim_size(fs[i])

    def runs(i, rem, target):
        """Yield (pieces, i, rem) for runs starting at i; target None = any product."""
        def step(i, rem, pieces, prod):
            if target is None or prod == target:
                yield pieces, i, rem
            if i >= n:
                return
            size = avail(i, rem)
            f = fs[i]
            if size is None:            # symbolic: only the wildcard may cover it
                if target is None:
                    yield from step(i + 1, None, pieces + [f], prod)
                return
            # drop a whole size-1 factor
            if size == 1 and rem is None:
                yield from step(i + 1, None, pieces, prod)
            # take the whole (remaining) factor
            if target is None or (prod * size and target % (prod * size) == 0 and prod * size <= target):
                yield from step(i + 1, None, pieces + [piece(i, rem)], prod * size)
            # take part of a free factor, ending the run here
            if type(f) is Num:
                for p in _divisors(size)[1:-1]:
                    if target is None or prod * p == target:
                        yield pieces + [Num(p)], i, size // p
        yield from step(i, rem, [], 1)

    def go(i, rem, j, acc):
        if j == len(shape):
            k = i
            if rem is not None:
                return
            while k < n and dim_size(fs[k]) == 1:
                k += 1
            if k == n:
                results.add(normalize(Tensor(tuple(acc), src.element)))
            return
        z = shape[j]
        if rem is None and i < n and dim_size(fs[i]) == 1:
            go(i + 1, None, j, acc)                               # drop it
        if z == 1:
            go(i, rem, j + 1, acc + [Num(1)])                     # insert
            # consuming size-1 factors is the ordinary run rule below
        target = None if z == -1 else z
        if target == 0:
            return
        for pieces, i2, rem2 in runs(i, rem, target):
            if target is not None and not pieces:
                continue
            go(i2, rem2, j + 1, acc + [make_product(pieces)])

    go(0, None, 0, [])
    return results
