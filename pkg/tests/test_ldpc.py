import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from uralab.ldpc import (ConstructionFailed, LdpcCode, build_ldpc, gf2_rank, has_four_cycle,
                         ldpc_encode, parity_check, read_alist, syndrome, write_alist)


@pytest.mark.parametrize("Bc", [18, 24, 30])
def test_structure(Bc):
    code = build_ldpc(5, Bc)
    assert code.h.shape == (Bc, 2 * Bc)
    assert set(code.h.sum(0)) == {3}
    assert set(code.h.sum(1)) == {6}
    assert not has_four_cycle(code.h)
    assert gf2_rank(code.h) == Bc
    assert code.k == Bc


def test_deterministic(code24):
    np.testing.assert_array_equal(build_ldpc(7, 24).h, code24.h)


def test_too_small_for_girth_six():
    # a 4-cycle-free (3,6) graph needs more checks than this
    with pytest.raises(ConstructionFailed):
        build_ldpc(1, 8, retries=4)
    with pytest.raises(ValueError):
        build_ldpc(1, 7)


def test_zero_word_and_systematic(code24):
    zero = ldpc_encode(code24, np.zeros(24, dtype=np.uint8))
    assert not zero.any()
    v = np.arange(24) % 2
    w = ldpc_encode(code24, v)
    np.testing.assert_array_equal(w[:24], v)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=24, max_size=24))
def test_every_encoding_is_a_codeword(code24, bits):
    w = ldpc_encode(code24, bits)
    assert parity_check(code24, w)


def test_linearity(code24, rng):
    a, b = rng.integers(0, 2, (2, 24))
    np.testing.assert_array_equal(ldpc_encode(code24, a ^ b),
                                  ldpc_encode(code24, a) ^ ldpc_encode(code24, b))


def test_single_flip_breaks_parity(code24, rng):
    w = ldpc_encode(code24, rng.integers(0, 2, 24))
    for pos in range(w.size):
        bad = w.copy()
        bad[pos] ^= 1
        assert not parity_check(code24, bad)
        # exactly the three checks on that bit fire
        assert syndrome(code24, bad).sum() == 3


def test_alist_round_trip(code24, tmp_path):
    text = write_alist(code24.h, tmp_path / "h.alist")
    np.testing.assert_array_equal(read_alist(text), code24.h)
    np.testing.assert_array_equal(read_alist(tmp_path / "h.alist"), code24.h)
    assert text.splitlines()[0] == "48 24"


def test_from_matrix_rejects_irregular():
    h = np.array([[1, 1, 0], [0, 1, 1]])
    with pytest.raises(ValueError):
        LdpcCode.from_matrix(h)


def test_edge_tables_match_matrix(code24):
    flat = code24.check_vars.ravel()
    for v in range(code24.n):
        assert set(flat[code24.var_edges[v]]) == {v}
        checks = {e // 6 for e in code24.var_edges[v]}
        assert checks == set(np.nonzero(code24.h[:, v])[0])
