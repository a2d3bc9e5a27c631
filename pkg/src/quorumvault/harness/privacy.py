"""Exhaustive small-field privacy checkers.

The multiplication-gate checker enumerates every honest random tape (dealer
sharings plus honest resharings) and compares the multiset of adversary
views across all input pairs: equality for every pair of input pairs is
exactly t-privacy at that scale. The adversary view is what corrupted nodes
receive: their input shares plus the resharing messages addressed to them.
Corrupted tapes are fixed (their own randomness is independent of the
secrets and never appears in what they receive).

Two scales are provided. The naive checker materializes every view
one tape at a time; Z_5 hosts at most four nodes, so it runs the 4-node,
t=1 gate over all 25 input pairs. The five-node gate (t=2, corrupted
{1,2}) needs p=7, where the full tape space (49^5 per input pair) cannot
be materialized; there the checker computes the identical joint multiset
in factored form: for each dealer tape it enumerates each honest node's
full resharing tape space and records that node's view-component multiset,
so the joint is the union over dealer tapes of prefix x M3 x M4 x M5.
Equal factored forms imply equal joints (the pass direction is exact);
an observed difference is confirmed through an exhaustively-enumerated
marginal (prefix plus one honest node's messages), which is also exact.
"""

from __future__ import annotations

from collections import Counter
from itertools import product

from ..errors import BadThreshold, FieldTooLarge
from ..fields import is_prime

PASS = "pass"
FAIL = "fail"
THRESHOLD_REACHED = "threshold_reached"


def _poly_eval(coeffs: tuple[int, ...], x: int, p: int) -> int:
    acc = 0
    for c in reversed(coeffs):
        acc = (acc * x + c) % p
    return acc


def _check_scale(p: int, n: int, k: int, corrupted: tuple[int, ...]) -> str | None:
    if not is_prime(p):
        raise BadThreshold(f"p={p} is not prime")
    if p > 7:
        raise FieldTooLarge(f"exhaustive enumeration refuses p={p} > 7")
    if len(corrupted) >= k:
        return THRESHOLD_REACHED
    if n >= p:
        raise BadThreshold(
            f"n={n} nodes need {n} distinct nonzero indices; Z_{p} has {p - 1}")
    if 2 * (k - 1) >= n:
        raise BadThreshold(f"degree reduction needs 2(k-1) < n, got k={k}, n={n}")
    return None


def _resharing_component(d: int, eval_points: tuple[int, ...], t: int, p: int,
                         broken_degree_zero: bool) -> tuple:
    """Multiset of one node's resharing messages to the corrupted set,
    over that node's entire tape space; canonical hashable form."""
    if broken_degree_zero:
        return ((tuple(d for _ in eval_points), 1),)
    views = Counter()
    for tape in product(range(p), repeat=t):
        views[tuple(_poly_eval((d, *tape), x, p) for x in eval_points)] += 1
    return tuple(sorted(views.items()))


def mul_views_factored(p: int, a: int, b: int, corrupted: tuple[int, ...], k: int, n: int,
                       broken_degree_zero: bool = False) -> Counter:
    """Factored joint view multiset for one input pair."""
    t = k - 1
    honest = tuple(i for i in range(1, n + 1) if i not in corrupted)
    component_cache = {d: _resharing_component(d, corrupted, t, p, broken_degree_zero)
                       for d in range(p)}
    views = Counter()
    for a_tape in product(range(p), repeat=t):
        fa = (a, *a_tape)
        for b_tape in product(range(p), repeat=t):
            fb = (b, *b_tape)
            prefix = tuple(_poly_eval(fa, i, p) for i in corrupted) \
                + tuple(_poly_eval(fb, i, p) for i in corrupted)
            components = tuple(
                component_cache[_poly_eval(fa, i, p) * _poly_eval(fb, i, p) % p]
                for i in honest)
            views[(prefix, components)] += 1
    return views


def mul_marginal(p: int, a: int, b: int, corrupted: tuple[int, ...], k: int, n: int,
                 honest_node: int, broken_degree_zero: bool = False) -> Counter:
    """Exact marginal over (prefix, one honest node's messages)."""
    t = k - 1
    views = Counter()
    reshare_tapes = [()] if broken_degree_zero else list(product(range(p), repeat=t))
    for a_tape in product(range(p), repeat=t):
        fa = (a, *a_tape)
        for b_tape in product(range(p), repeat=t):
            fb = (b, *b_tape)
            prefix = tuple(_poly_eval(fa, i, p) for i in corrupted) \
                + tuple(_poly_eval(fb, i, p) for i in corrupted)
            d = _poly_eval(fa, honest_node, p) * _poly_eval(fb, honest_node, p) % p
            for tape in reshare_tapes:
                msgs = tuple(_poly_eval((d, *tape), x, p) for x in corrupted)
                views[prefix + msgs] += 1
    return views


def mul_views_naive(p: int, a: int, b: int, corrupted: tuple[int, ...], k: int, n: int,
                    broken_degree_zero: bool = False) -> Counter:
    """Materialize every honest tape and the full view tuple; no factoring."""
    t = k - 1
    honest = tuple(i for i in range(1, n + 1) if i not in corrupted)
    views = Counter()
    reshare_tapes = [()] if broken_degree_zero else list(product(range(p), repeat=t))
    for a_tape in product(range(p), repeat=t):
        fa = (a, *a_tape)
        for b_tape in product(range(p), repeat=t):
            fb = (b, *b_tape)
            prefix = tuple(_poly_eval(fa, i, p) for i in corrupted) \
                + tuple(_poly_eval(fb, i, p) for i in corrupted)
            d_values = {i: _poly_eval(fa, i, p) * _poly_eval(fb, i, p) % p for i in honest}
            for assignment in product(reshare_tapes, repeat=len(honest)):
                msgs = []
                for i, tape in zip(honest, assignment):
                    msgs.extend(_poly_eval((d_values[i], *tape), x, p) for x in corrupted)
                views[prefix + tuple(msgs)] += 1
    return views


def privacy_check_multiplication(p: int, corrupted: tuple[int, ...] = (1, 2),
                                 k: int = 3, n: int = 5,
                                 broken_degree_zero: bool = False,
                                 naive: bool = False) -> dict:
    """Compare adversary-view multisets across every pair of input pairs."""
    early = _check_scale(p, n, k, corrupted)
    if early is not None:
        return {"status": early,
                "detail": f"corrupted set of size {len(corrupted)} >= k={k} reconstructs"}
    views_fn = mul_views_naive if naive else mul_views_factored
    baseline = None
    baseline_pair = None
    for a in range(p):
        for b in range(p):
            views = views_fn(p, a, b, corrupted, k, n, broken_degree_zero)
            if baseline is None:
                baseline, baseline_pair = views, (a, b)
            elif views != baseline:
                detail = f"views for inputs {(a, b)} differ from {baseline_pair}"
                if not naive:
                    # confirm through an exact enumerable marginal
                    honest = [i for i in range(1, n + 1) if i not in corrupted]
                    for h in honest:
                        m1 = mul_marginal(p, *baseline_pair, corrupted, k, n, h,
                                          broken_degree_zero)
                        m2 = mul_marginal(p, a, b, corrupted, k, n, h, broken_degree_zero)
                        if m1 != m2:
                            return {"status": FAIL,
                                    "detail": detail + f"; marginal at node {h} differs"}
                    return {"status": FAIL, "detail": detail + "; factored forms differ"}
                return {"status": FAIL, "detail": detail}
    return {"status": PASS, "detail": f"all {p * p} input pairs view-identical"}


def privacy_check_exhaustive(corrupted_set: tuple[int, ...], p: int,
                             k: int = 3, n: int = 5,
                             broken_degree_zero: bool = False) -> dict:
    """Spec-facing entry point; refuses p > 7, reports threshold reach."""
    naive = n <= 4
    return privacy_check_multiplication(p, tuple(corrupted_set), k, n,
                                        broken_degree_zero, naive=naive)


# -- consistency-check opening -----------------------------------------------


def consistency_opening_check(p: int = 7, width: int = 2, k: int = 3, n: int = 5,
                              corrupted: tuple[int, ...] = (1, 2)) -> dict:
    """The dual-consistency difference must open to zero for every honest
    encoding, and the adversary view of the opening (its own shares plus the
    honest nodes' difference-shares) must be distribution-identical across
    all secret values. Exhaustive over all dealer tapes."""
    early = _check_scale(p, n, k, corrupted)
    if early is not None:
        return {"status": early, "detail": "corrupted set can reconstruct"}
    if (1 << width) >= p:
        raise BadThreshold(f"width {width} overflows Z_{p}")
    t = k - 1
    honest = tuple(i for i in range(1, n + 1) if i not in corrupted)
    weights_all = None  # interpolation at 0 over all n indices, computed below
    from ..fields import Field
    from ..shamir import lagrange_coeffs
    field = Field(p)
    weights_all = lagrange_coeffs(field, list(range(1, n + 1)), 0)
    baseline = None
    for value in range(1 << width):
        bits = [(value >> i) & 1 for i in range(width)]
        views = Counter()
        for int_tape in product(range(p), repeat=t):
            f_int = (value % p, *int_tape)
            for bit_tapes in product(product(range(p), repeat=t), repeat=width):
                f_bits = [(bits[i], *bit_tapes[i]) for i in range(width)]
                def d_at(x):
                    acc = _poly_eval(f_int, x, p)
                    for i in range(width):
                        acc -= (1 << i) * _poly_eval(f_bits[i], x, p)
                    return acc % p
                opened = sum(weights_all[i - 1] * d_at(i) for i in range(1, n + 1)) % p
                if opened != 0:
                    return {"status": FAIL,
                            "detail": f"difference opened to {opened} for value {value}"}
                view = tuple(_poly_eval(f_int, x, p) for x in corrupted)
                for i in range(width):
                    view += tuple(_poly_eval(f_bits[i], x, p) for x in corrupted)
                view += tuple(d_at(i) for i in honest)
                views[view] += 1
        if baseline is None:
            baseline = views
        elif views != baseline:
            return {"status": FAIL, "detail": f"opening views differ at value {value}"}
    return {"status": PASS,
            "detail": f"all {1 << width} dual values open zero with identical views"}
