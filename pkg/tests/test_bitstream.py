import pytest
from hypothesis import given, strategies as st

from fxguard.bitstream import (
    BitStream,
    TaintError,
    Terminal,
    add_limited,
    add_unbounded,
    concat,
    from_natural,
    is_clean,
    length,
    mul_limited,
    mul_unbounded,
    slice_bits,
    to_natural,
    truncate,
)

from oracles import bits_value, ripple_add, shift_add_mul, wrap_bits

O, X = Terminal.CLEAN, Terminal.OVERFLOW


def bs(*bits, t=O):
    return BitStream(bits, t)


bit_lists = st.lists(st.integers(0, 1), max_size=24)
streams = st.builds(BitStream, bit_lists, st.sampled_from([O, X]))
clean_streams = st.builds(BitStream, bit_lists)


# --- basic observers -----------------------------------------------------

@pytest.mark.parametrize(
    "v, n",
    [(bs(), 0), (bs(1, 1), 2), (bs(0, 0, 0, 1, t=X), 4)],
)
def test_length(v, n):
    assert length(v) == n


@pytest.mark.parametrize("v, clean", [(bs(1), True), (bs(1, t=X), False), (bs(t=X), False)])
def test_is_clean(v, clean):
    assert is_clean(v) is clean


@pytest.mark.parametrize("v, n", [(bs(), 0), (bs(1, 1), 3), (bs(0, 0, 1), 4)])
def test_to_natural(v, n):
    assert to_natural(v) == n


def test_to_natural_refuses_dirty():
    with pytest.raises(TaintError):
        to_natural(bs(1, t=X))


@pytest.mark.parametrize("n, v", [(0, bs()), (5, bs(1, 0, 1)), (8, bs(0, 0, 0, 1))])
def test_from_natural(n, v):
    assert from_natural(n) == v


def test_from_natural_rejects_negative():
    with pytest.raises(ValueError):
        from_natural(-1)


def test_str_marks_terminal():
    assert str(bs(1, 0, 1)) == "101o"
    assert str(bs(1, t=X)) == "1X"


def test_bits_validated():
    with pytest.raises(ValueError):
        BitStream([2])


# --- unbounded arithmetic ------------------------------------------------

def test_add_example():
    assert add_unbounded(bs(1, 1), bs(1)) == bs(0, 0, 1)


@given(clean_streams)
def test_add_identity(v):
    r = add_unbounded(v, bs())
    assert is_clean(r) and to_natural(r) == to_natural(v)


def test_add_taint():
    assert not is_clean(add_unbounded(bs(1, t=X), bs(1)))


def test_mul_example():
    assert mul_unbounded(bs(1, 1), bs(0, 1)) == bs(0, 1, 1)


@given(clean_streams)
def test_mul_annihilator_and_identity(v):
    zero = mul_unbounded(v, bs())
    assert is_clean(zero) and to_natural(zero) == 0
    one = mul_unbounded(bs(1), v)
    assert is_clean(one) and to_natural(one) == to_natural(v)


@pytest.mark.parametrize("a", range(0, 64))
def test_add_mul_match_bitwise_oracle(a):
    # exhaustive over small naturals against ripple-carry / shift-add on bit lists
    va = from_natural(a)
    for b in range(64):
        vb = from_natural(b)
        s = add_unbounded(va, vb)
        assert list(s.bits) == ripple_add(list(va.bits), list(vb.bits))
        m = mul_unbounded(va, vb)
        assert to_natural(m) == bits_value(shift_add_mul(list(va.bits), list(vb.bits)))


@given(bit_lists, bit_lists)
def test_add_unbounded_bits_match_ripple(a, b):
    assert list(add_unbounded(BitStream(a), BitStream(b)).bits) == ripple_add(a, b)


# --- limited arithmetic --------------------------------------------------

@pytest.mark.parametrize(
    "v1, v2, L, expected",
    [
        (bs(1, 1), bs(1), 2, bs(0, 0, t=X)),
        (bs(1), bs(0, 1), 3, bs(1, 1)),
        (bs(), bs(), 0, bs()),
    ],
)
def test_add_limited_examples(v1, v2, L, expected):
    assert add_limited(v1, v2, L) == expected


@pytest.mark.parametrize(
    "v1, v2, L, expected",
    [
        (bs(0, 1), bs(0, 1), 2, bs(0, 0, t=X)),
        (bs(1), bs(1), 1, bs(1)),
        (bs(1, 1), bs(1), 2, bs(1, 1)),
    ],
)
def test_mul_limited_examples(v1, v2, L, expected):
    assert mul_limited(v1, v2, L) == expected


@pytest.mark.parametrize("L", [1, 3, 6])
def test_limited_ops_match_modular_oracle(L):
    for a in range(1 << L):
        for b in range(1 << L):
            va, vb = from_natural(a), from_natural(b)
            for op, ref in ((add_limited, ripple_add), (mul_limited, shift_add_mul)):
                r = op(va, vb, L)
                low, overflow = wrap_bits(ref(list(va.bits), list(vb.bits)), L)
                assert is_clean(r) is not overflow
                assert length(r) <= L
                assert r.word == bits_value(low)
                if overflow:
                    assert length(r) == L


@given(streams, streams, st.integers(0, 30))
def test_taint_is_monotone(v1, v2, L):
    dirty_in = not (is_clean(v1) and is_clean(v2))
    for r in (add_unbounded(v1, v2), mul_unbounded(v1, v2), add_limited(v1, v2, L), mul_limited(v1, v2, L)):
        if dirty_in:
            assert not is_clean(r)


@given(st.integers(0, 2**40))
def test_natural_roundtrip(n):
    assert to_natural(from_natural(n)) == n


# --- slicing -------------------------------------------------------------

def test_slice_examples():
    assert slice_bits(bs(1, 0, 1, 1), 2, 2) == bs(1, 1)
    assert slice_bits(bs(1), 3, 2) == bs(0, 0)


@given(clean_streams)
def test_full_slice_is_identity(v):
    assert slice_bits(v, 0, length(v)) == v


def test_truncate_examples():
    assert truncate(bs(1, 0, 1), 2) == bs(1, 0)
    assert truncate(bs(1, 1, t=X), 1) == bs(1, t=X)
    empty = truncate(bs(1, 1), 0)
    assert length(empty) == 0 and is_clean(empty)
    assert not is_clean(truncate(bs(1, t=X), 0))


@given(streams, st.integers(0, 30))
def test_slices_keep_terminal_and_length(v, n):
    assert length(truncate(v, min(n, length(v)))) == min(n, length(v))
    assert slice_bits(v, n, 5).terminal is v.terminal


@given(clean_streams, clean_streams)
def test_concat_places_high_part(low, high):
    r = concat(low, high)
    assert to_natural(r) == to_natural(low) + (to_natural(high) << length(low))
