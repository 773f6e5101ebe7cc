"""Speaker embedding, bidirectional GRU encoding and speaker fusion."""
from dataclasses import dataclass, fields

import numpy as np

from . import autograd as ag
from .errors import DimensionError, EmptyInputError, UnknownSpeakerError


def _uniform(rng, shape, fan_in):
    bound = 1.0 / np.sqrt(max(fan_in, 1))
    return rng.uniform(-bound, bound, size=shape)


@dataclass
class SpeakerTable:
    weight: np.ndarray  # (d, n_speakers)

    @classmethod
    def init(cls, dim, n_speakers, rng):
        return cls(_uniform(rng, (dim, n_speakers), n_speakers))

    @property
    def speaker_count(self):
        return ag.value(self.weight).shape[1]


@dataclass
class GruCellParams:
    Wz: np.ndarray
    Wr: np.ndarray
    Wc: np.ndarray
    Uz: np.ndarray
    Ur: np.ndarray
    Uc: np.ndarray
    bz: np.ndarray
    br: np.ndarray
    bc: np.ndarray

    @classmethod
    def init(cls, n_in, hidden, rng):
        w = {k: _uniform(rng, (hidden, n_in), n_in) for k in ("Wz", "Wr", "Wc")}
        u = {k: _uniform(rng, (hidden, hidden), hidden) for k in ("Uz", "Ur", "Uc")}
        b = {k: _uniform(rng, (hidden,), hidden) for k in ("bz", "br", "bc")}
        return cls(**w, **u, **b)

    @property
    def input_dim(self):
        return ag.value(self.Wz).shape[1]

    @property
    def hidden_dim(self):
        return ag.value(self.Wz).shape[0]

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class ModalityEncoder:
    forward: GruCellParams
    backward: GruCellParams
    projection: np.ndarray  # (d, 2 * hidden)

    @classmethod
    def init(cls, n_in, hidden, dim, rng):
        return cls(GruCellParams.init(n_in, hidden, rng),
                   GruCellParams.init(n_in, hidden, rng),
                   _uniform(rng, (dim, 2 * hidden), 2 * hidden))

    @property
    def output_dim(self):
        return ag.value(self.projection).shape[0]


def speaker_embed(one_hot, table):
    """Column of the speaker table picked out by a one-hot (or all-zero) vector."""
    p = np.asarray(one_hot, dtype=float).ravel()
    n = table.speaker_count
    if p.size > n:
        nz = np.flatnonzero(p)
        if nz.size and nz.max() >= n:
            raise UnknownSpeakerError(f"speaker index {nz.max()} beyond table of {n}")
        p = p[:n]
    if p.size < n:
        p = np.concatenate([p, np.zeros(n - p.size)])
    if not (np.all((p == 0) | (p == 1)) and p.sum() <= 1):
        raise ValueError("speaker indicator must be one-hot or all zeros")
    return ag.value(table.weight) @ p


def gru_cell_step(x, h_prev, cell):
    x = np.asarray(x, dtype=float).ravel()
    h_prev = np.asarray(h_prev, dtype=float).ravel()
    if x.size != cell.input_dim or h_prev.size != cell.hidden_dim:
        raise DimensionError(
            f"x has {x.size} (want {cell.input_dim}), h has {h_prev.size} (want {cell.hidden_dim})")
    z = ag.sigmoid(cell.Wz @ x + cell.Uz @ h_prev + cell.bz)
    r = ag.sigmoid(cell.Wr @ x + cell.Ur @ h_prev + cell.br)
    cand = ag.tanh(cell.Wc @ x + cell.Uc @ (r * h_prev) + cell.bc)
    return (1.0 - z) * h_prev + z * cand


def encode_modality(sequence, enc):
    """Contextual vectors for one modality of one conversation."""
    seq = [np.asarray(v, dtype=float).ravel() for v in sequence]
    if not seq:
        raise EmptyInputError("empty utterance sequence")
    width = {v.size for v in seq}
    if len(width) != 1:
        raise DimensionError(f"inconsistent input widths {sorted(width)}")
    hid = enc.forward.hidden_dim
    fwd, h = [], np.zeros(hid)
    for v in seq:
        h = gru_cell_step(v, h, enc.forward)
        fwd.append(h)
    bwd, h = [None] * len(seq), np.zeros(hid)
    for k in range(len(seq) - 1, -1, -1):
        h = gru_cell_step(seq[k], h, enc.backward)
        bwd[k] = h
    proj = ag.value(enc.projection)
    return [proj @ np.concatenate([f, b]) for f, b in zip(fwd, bwd)]


def fuse_speaker(c, s):
    cv, sv = ag.value(c), ag.value(s)
    if cv.shape != sv.shape:
        raise DimensionError(f"representation {cv.shape} vs speaker embedding {sv.shape}")
    return ag.add(c, s)
