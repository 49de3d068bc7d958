"""Finalizer hashes and the prefetch observation hook."""

from hypothesis import given, strategies as st

from coroweave import runtime
from coroweave.runtime import (
    BatchCoroutine,
    StepCoroutine,
    fmix32,
    fmix64,
    prefetch,
    prefetch_hook,
    set_prefetch_hook,
)


def ref32(x: int) -> int:
    """Table-driven reimplementation, kept apart from the shipped one."""
    h = x & 0xFFFFFFFF
    for shift, mul in ((16, 0x85EBCA6B), (13, 0xC2B2AE35), (16, 1)):
        h ^= h >> shift
        h = (h * mul) & 0xFFFFFFFF
    return h


def ref64(x: int) -> int:
    h = x & 0xFFFFFFFFFFFFFFFF
    for shift, mul in ((33, 0xFF51AFD7ED558CCD), (33, 0xC4CEB9FE1A85EC53), (33, 1)):
        h ^= h >> shift
        h = (h * mul) & 0xFFFFFFFFFFFFFFFF
    return h


FROZEN32 = {
    0: 0x00000000,
    1: 0x514E28B7,
    2: 0x30F4C306,
    0x12345678: 0xE37CD1BC,
    0xDEADBEEF: 0x0DE5C6A9,
    0xFFFFFFFF: 0x81F16F39,
}

FROZEN64 = {
    0: 0x0000000000000000,
    1: 0xB456BCFC34C2CB2C,
    2: 0x3ABF2A20650683E7,
    0x0123456789ABCDEF: 0x87CBFBFE89022CEA,
    0xDEADBEEFCAFEBABE: 0x7082995008F0C48C,
    2**64 - 1: 0x64B5720B4B825F21,
}


def test_fmix32_frozen_vectors():
    for x, want in FROZEN32.items():
        assert fmix32(x) == want, hex(x)


def test_fmix64_frozen_vectors():
    for x, want in FROZEN64.items():
        assert fmix64(x) == want, hex(x)


def test_zero_is_a_fixed_point():
    assert fmix32(0) == 0
    assert fmix64(0) == 0


@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_fmix32_matches_reference(x):
    assert fmix32(x) == ref32(x)


@given(st.integers(min_value=0, max_value=2**64 - 1))
def test_fmix64_matches_reference(x):
    assert fmix64(x) == ref64(x)


def test_wide_inputs_are_masked():
    assert fmix32(2**40 + 5) == fmix32(5)
    assert fmix64(2**70 + 5) == fmix64(5)


def test_fmix32_injective_on_a_window():
    n = 10_000
    assert len({fmix32(i) for i in range(n)}) == n


def test_fmix64_injective_on_a_window():
    n = 10_000
    assert len({fmix64(i) for i in range(n)}) == n


def test_results_stay_in_range():
    for i in range(0, 2**32, 2**28):
        assert 0 <= fmix32(i) < 2**32
    for i in range(0, 2**64, 2**60):
        assert 0 <= fmix64(i) < 2**64


class TestPrefetchHook:
    def test_noop_by_default(self):
        assert prefetch(object()) is None

    def test_hook_sees_addresses(self):
        seen = []
        set_prefetch_hook(seen.append)
        try:
            prefetch(41)
            prefetch("p")
        finally:
            set_prefetch_hook(None)
        assert seen == [41, "p"]
        prefetch(999)
        assert seen == [41, "p"]

    def test_context_manager_restores_previous(self):
        outer, inner = [], []
        with prefetch_hook(outer.append):
            prefetch(1)
            with prefetch_hook(inner.append):
                prefetch(2)
            prefetch(3)
        prefetch(4)
        assert outer == [1, 3]
        assert inner == [2]

    def test_context_manager_restores_on_error(self):
        probe = []
        try:
            with prefetch_hook(probe.append):
                raise RuntimeError("boom")
        except RuntimeError:
            pass
        assert runtime._hook is None


def test_generated_units_satisfy_the_protocols():
    from coroweave import emit_dynamic, emit_static, load_unit
    from coroweave.kernels import KERNELS
    from coroweave.kernels.defs import hashtable_find_def

    cls = load_unit(emit_dynamic(KERNELS["bt"].build_def()))()
    assert isinstance(cls(None, 1), StepCoroutine)
    batch_cls = load_unit(emit_static(hashtable_find_def(static_hints=True), 2))(
        [0, 0], [0, 0], 1
    )
    assert isinstance(batch_cls(), BatchCoroutine)
