"""Coroutine definitions of the lookup kernels.

Each builder returns a fresh definition; expression text is plain
Python over the declared names (plus ``fmix64``/``fmix32``, which the
generated preamble imports).  The conventions here:

* every pointer dereference that can miss cache is announced with a
  prefetch and followed by a yield before the value is read;
* arithmetic and in-cache-line work stays inside a stage.
"""

from __future__ import annotations

from ..dsl import (
    CoroutineDef,
    assign,
    coroutine,
    if_,
    prefetch,
    return_,
    while_,
    yield_,
)

__all__ = [
    "binary_search_def",
    "bst_find_def",
    "skiplist_find_def",
    "skiplist_advance_def",
    "hashtable_find_def",
]

SELECTS = ("arith", "ternary")


def binary_search_def(select: str = "arith") -> CoroutineDef:
    """Branch-free lower bound: ceil(log2 size) probes for every key.

    ``select`` picks how the surviving half is chosen: ``arith``
    multiplies the comparison into the offset, ``ternary`` spells the
    same choice as a conditional expression.
    """
    if select == "arith":
        pick = "base + ((a[base + half - 1] < k) * half)"
    elif select == "ternary":
        pick = "(base + half) if a[base + half - 1] < k else base"
    else:
        raise ValueError(f"select must be one of {SELECTS}, got {select!r}")
    return (
        coroutine("binary_search")
        .result("uint64", "res")
        .shared_arg("uint64[]", "a")
        .shared_arg("uint64", "size")
        .arg("uint64", "k")
        .variable("uint64", "base", "0")
        .variable("uint64", "n", "size")
        .variable("uint64", "half")
        .body(
            while_("n > 1").do_(
                assign("half", "n >> 1"),
                prefetch("a[base + half - 1]"),
                yield_(),
                assign("base", pick),
                assign("n", "n - half"),
            ),
            return_("base + (a[base] < k)"),
        )
    )


def bst_find_def() -> CoroutineDef:
    """Unbalanced binary tree lookup; the child index is the compare."""
    return (
        coroutine("bst_find")
        .result("node", "res")
        .arg("node", "n")
        .arg("uint64", "key")
        .body(
            while_("n is not None").do_(
                prefetch("n"),
                yield_(),
                if_("n.key == key").then_(return_("n")),
                assign("n", "n.child[n.key < key]"),
            ),
            return_("None"),
        )
    )


def skiplist_find_def() -> CoroutineDef:
    """Skip list search: strafe right while short, else drop a level.

    Invariant: pred.key < k.  Every node is announced before its key is
    read on the other side of the yield.
    """
    return (
        coroutine("skiplist_find")
        .result("node", "res")
        .arg("node", "pred")
        .arg("uint64", "k")
        .variable("node", "n", "None")
        .variable("int", "lvl", "pred.height")
        .body(
            while_("True").do_(
                assign("n", "pred.skip[lvl - 1]"),
                prefetch("n"),
                yield_(),
                if_("n.key < k")
                .then_(assign("pred", "n"))
                .else_(
                    assign("lvl", "lvl - 1"),
                    if_("lvl == 0").then_(
                        return_("n if n.key == k else None"),
                    ),
                ),
            ),
        )
    )


def skiplist_advance_def() -> CoroutineDef:
    """Walk ``limit`` level-0 hops, then read the key landed on.

    The tail's self link absorbs walks past the end.  Exactly
    limit + 1 suspensions: one per hop plus one for the final key
    read.
    """
    return (
        coroutine("skiplist_advance")
        .result("uint64", "res")
        .arg("node", "n")
        .arg("int", "limit")
        .body(
            while_("(limit := limit - 1) >= 0").do_(
                prefetch("n"),
                yield_(),
                assign("n", "n.skip[0]"),
            ),
            prefetch("n"),
            yield_(),
            return_("n.key"),
        )
    )


def hashtable_find_def(static_hints: bool = False) -> CoroutineDef:
    """Linear-probe lookup over parallel key/value columns.

    Two suspensions: after hashing and after announcing the home slot.
    Probing past the home slot stays in the final stage (adjacent
    slots, likely same or next line).  With ``static_hints`` the
    suspensions are pinned to the static schedule, which makes the
    first two stages a lockstep prefix for the hybrid unit.
    """
    hint = "static" if static_hints else "default"
    return (
        coroutine("hashtable_find")
        .result("uint64", "res")
        .shared_arg("uint64[]", "ht_keys")
        .shared_arg("uint64[]", "ht_vals")
        .shared_arg("uint64", "size_1")
        .arg("uint64", "k")
        .variable("uint64", "hash")
        .body(
            assign("hash", "fmix64(k)"),
            assign("hash", "hash & size_1"),
            yield_(hint),
            prefetch("ht_keys[hash]"),
            yield_(hint),
            while_("ht_keys[hash] != k and ht_keys[hash] != 0").do_(
                assign("hash", "(hash + 1) & size_1"),
            ),
            if_("ht_keys[hash] == k").then_(return_("ht_vals[hash]")),
            return_("0"),
        )
    )
