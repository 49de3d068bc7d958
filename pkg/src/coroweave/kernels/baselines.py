"""Hand-written sequential forms of the lookup kernels.

These are the ground truth for equivalence runs: same algorithms as
the coroutine defs, written directly, with no suspension machinery.
Arguments follow the defs' declaration order (shared first).
"""

from __future__ import annotations

from ..runtime import fmix64

__all__ = [
    "binary_search",
    "bst_find",
    "skiplist_find",
    "skiplist_advance",
    "hashtable_find",
]


def binary_search(a, size, k):
    """Lower-bound index by size halving.

    Returns the first index whose key is >= k (== size if none is).
    Every search over the same array takes exactly ceil(log2 size)
    trips through the loop, whatever the key.
    """
    base = 0
    n = size
    while n > 1:
        half = n >> 1
        base = base + ((a[base + half - 1] < k) * half)
        n = n - half
    return base + (a[base] < k)


def bst_find(n, key):
    while n is not None:
        if n.key == key:
            return n
        n = n.child[n.key < key]
    return None


def skiplist_find(pred, k):
    """Descend-and-strafe search; pred.key < k holds throughout."""
    lvl = pred.height
    while True:
        n = pred.skip[lvl - 1]
        if n.key < k:
            pred = n
        else:
            lvl -= 1
            if lvl == 0:
                return n if n.key == k else None


def skiplist_advance(n, limit):
    while limit > 0:
        n = n.skip[0]
        limit -= 1
    return n.key


def hashtable_find(ht_keys, ht_vals, size_1, k):
    """Linear-probe lookup; returns the stored value, 0 when absent."""
    h = fmix64(k) & size_1
    while ht_keys[h] != k and ht_keys[h] != 0:
        h = (h + 1) & size_1
    if ht_keys[h] == k:
        return ht_vals[h]
    return 0
