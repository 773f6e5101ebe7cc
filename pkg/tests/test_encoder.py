import numpy as np
import pytest
from hypothesis import given, strategies as st

from dgode import diffops
from dgode.encoder import (GruCellParams, ModalityEncoder, SpeakerTable, encode_modality,
                           fuse_speaker, gru_cell_step, speaker_embed)
from dgode.errors import DimensionError, EmptyInputError, UnknownSpeakerError


def test_speaker_column_selection():
    table = SpeakerTable(np.array([[1.0, 2.0], [3.0, 4.0]]))
    np.testing.assert_array_equal(speaker_embed([0, 1], table), [2, 4])
    np.testing.assert_array_equal(speaker_embed([0, 0], table), [0, 0])
    np.testing.assert_array_equal(speaker_embed([1, 0], SpeakerTable(np.zeros((2, 2)))), [0, 0])


def test_speaker_beyond_table():
    with pytest.raises(UnknownSpeakerError):
        speaker_embed([0, 0, 1], SpeakerTable(np.ones((2, 2))))


def zero_cell(n_in, h):
    z = lambda *s: np.zeros(s)
    return GruCellParams(z(h, n_in), z(h, n_in), z(h, n_in), z(h, h), z(h, h), z(h, h),
                         z(h), z(h), z(h))


def test_zero_cell_zero_state():
    np.testing.assert_array_equal(gru_cell_step(np.ones(3), np.zeros(2), zero_cell(3, 2)), [0, 0])


def test_saturated_update_gate_forgets():
    cell = zero_cell(3, 2)
    cell.bz = np.full(2, 50.0)
    out = gru_cell_step(np.ones(3), np.array([0.7, -0.4]), cell)
    np.testing.assert_allclose(out, [0, 0], atol=1e-20)


def scalar_gru(x, h, c):
    """Element-by-element re-implementation of the gate equations."""
    sig = lambda v: 1.0 / (1.0 + np.exp(-v))
    H, n = c.Wz.shape
    out = np.zeros(H)
    r = np.zeros(H)
    for k in range(H):
        r[k] = sig(sum(c.Wr[k, j] * x[j] for j in range(n)) + sum(c.Ur[k, j] * h[j] for j in range(H)) + c.br[k])
    for k in range(H):
        z = sig(sum(c.Wz[k, j] * x[j] for j in range(n)) + sum(c.Uz[k, j] * h[j] for j in range(H)) + c.bz[k])
        cand = np.tanh(sum(c.Wc[k, j] * x[j] for j in range(n))
                       + sum(c.Uc[k, j] * r[j] * h[j] for j in range(H)) + c.bc[k])
        out[k] = (1 - z) * h[k] + z * cand
    return out


def test_cell_matches_scalar_reimplementation(rng):
    cell = GruCellParams.init(4, 3, rng)
    x, h = rng.normal(size=4), rng.normal(size=3)
    np.testing.assert_allclose(gru_cell_step(x, h, cell), scalar_gru(x, h, cell), atol=1e-12)


def test_cell_shape_error(rng):
    with pytest.raises(DimensionError):
        gru_cell_step(np.ones(5), np.zeros(3), GruCellParams.init(4, 3, rng))


@given(st.integers(0, 2**31 - 1))
def test_cell_bounded(seed):
    r = np.random.default_rng(seed)
    cell = GruCellParams.init(3, 4, r)
    h = r.normal(scale=3, size=4)
    out = gru_cell_step(r.normal(size=3), h, cell)
    assert np.all(np.abs(out) <= np.maximum(np.abs(h), 1.0) + 1e-12)


def test_length_one_sequence(rng):
    enc = ModalityEncoder.init(3, 2, 4, rng)
    x = rng.normal(size=3)
    hf = gru_cell_step(x, np.zeros(2), enc.forward)
    hb = gru_cell_step(x, np.zeros(2), enc.backward)
    (out,) = encode_modality([x], enc)
    np.testing.assert_allclose(out, enc.projection @ np.concatenate([hf, hb]))


def test_reversal_swaps_directions_with_tied_cells(rng):
    cell = GruCellParams.init(3, 2, rng)
    proj = rng.normal(size=(4, 4))
    enc = ModalityEncoder(cell, cell, proj)
    swap = np.block([[np.zeros((2, 2)), np.eye(2)], [np.eye(2), np.zeros((2, 2))]])
    enc_swapped = ModalityEncoder(cell, cell, proj @ swap)
    seq = list(rng.normal(size=(5, 3)))
    fwd = encode_modality(seq, enc)
    rev = encode_modality(seq[::-1], enc_swapped)
    np.testing.assert_allclose(np.array(rev[::-1]), np.array(fwd), atol=1e-14)


def test_zero_input_zero_bias(rng):
    enc = ModalityEncoder.init(3, 2, 4, rng)
    for c in (enc.forward, enc.backward):
        c.bz[:] = c.br[:] = c.bc[:] = 0
    out = encode_modality([np.zeros(3)] * 4, enc)
    np.testing.assert_array_equal(np.array(out), 0)


def test_empty_and_ragged(rng):
    enc = ModalityEncoder.init(3, 2, 4, rng)
    with pytest.raises(EmptyInputError):
        encode_modality([], enc)
    with pytest.raises(DimensionError):
        encode_modality([np.zeros(3), np.zeros(2)], enc)


def test_deterministic(rng):
    enc = ModalityEncoder.init(3, 2, 4, rng)
    seq = list(rng.normal(size=(4, 3)))
    a, b = encode_modality(seq, enc), encode_modality(seq, enc)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


def test_batched_sequence_matches_cell_loop(rng):
    cell = GruCellParams.init(3, 2, rng)
    L, B = 4, 2
    x = rng.normal(size=(L, B, 3))
    mask = np.ones((L, B))
    mask[2:, 1] = 0
    out = np.asarray(diffops.gru_sequence(x, mask, cell.as_dict()))
    for b, length in ((0, 4), (1, 2)):
        h = np.zeros(2)
        for t in range(L):
            if t < length:
                h = gru_cell_step(x[t, b], h, cell)
            np.testing.assert_allclose(out[t, b], h, atol=1e-13)


def test_fuse_examples(rng):
    c = rng.normal(size=3)
    np.testing.assert_array_equal(fuse_speaker(c, np.zeros(3)), c)
    np.testing.assert_array_equal(fuse_speaker(np.array([1.0, 2.0]), np.array([3.0, 4.0])), [4, 6])
    s = rng.normal(size=3)
    np.testing.assert_allclose(fuse_speaker(c, s) - fuse_speaker(c, np.zeros(3)), s)
    with pytest.raises(DimensionError):
        fuse_speaker(np.zeros(2), np.zeros(3))
