"""Conversation graphs, normalized adjacency and mixhop propagation."""
from dataclasses import dataclass, field

import numpy as np

from . import autograd as ag
from . import kernels
from .errors import DimensionError, EmptyInputError, ShapeError, SymmetryError
from .numerics import EigenSystem, as_matrix, is_symmetric, sym_eig

MODALITIES = ("text", "audio", "visual")


@dataclass(frozen=True)
class NormalizedAdjacency:
    matrix: np.ndarray
    alpha: float
    eig: EigenSystem
    source: np.ndarray  # the binary adjacency it was built from

    @property
    def node_count(self):
        return self.matrix.shape[0]


@dataclass
class MixhopParams:
    weight: np.ndarray
    hop_gates: np.ndarray = field(default_factory=lambda: np.array([0.5, 0.5]))

    def __post_init__(self):
        w = ag.value(self.weight)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ShapeError("mixhop weight must be square")

    @property
    def hop_count(self):
        return int(np.size(ag.value(self.hop_gates)))

    def project(self):
        """Clip the hop gates back onto the nonnegative orthant."""
        np.maximum(self.hop_gates, 0.0, out=self.hop_gates)


@dataclass
class ConversationGraph:
    adjacency: np.ndarray
    features: np.ndarray
    utterance_index: np.ndarray
    modality_tag: list
    speaker_id: list
    label: list

    @property
    def node_count(self):
        return self.adjacency.shape[0]

    @property
    def utterance_count(self):
        return len(self.speaker_id)


def normalize_adjacency(a, alpha=1.0):
    """``(alpha/2) (I + D^-1/2 A D^-1/2)`` with its eigensystem cached.

    Isolated nodes get a zero ``D^-1/2`` entry, leaving ``alpha/2`` on their
    diagonal.
    """
    a = as_matrix(a, "adjacency")
    if a.shape[0] != a.shape[1]:
        raise ShapeError(f"adjacency must be square, got {a.shape}")
    if not is_symmetric(a):
        raise SymmetryError("adjacency must be symmetric")
    if not np.all((a == 0) | (a == 1)):
        raise ValueError("adjacency must be binary")
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    deg = a.sum(axis=1)
    inv_sqrt = np.zeros_like(deg)
    nz = deg > 0
    inv_sqrt[nz] = 1.0 / np.sqrt(deg[nz])
    norm = inv_sqrt[:, None] * a * inv_sqrt[None, :]
    a_hat = 0.5 * alpha * (np.eye(a.shape[0]) + norm)
    a_hat = 0.5 * (a_hat + a_hat.T)
    return NormalizedAdjacency(a_hat, float(alpha), sym_eig(a_hat), a.copy())


def conversation_adjacency(n_utterances, w_past=4, w_future=4, n_modalities=3):
    """Binary adjacency for a conversation, nodes ordered modality-major.

    Node ``m * n_utterances + i`` is modality ``m`` of utterance ``i``.
    Within a modality, utterances ``i < j`` are linked when ``j - i`` fits
    either window; the modal nodes of one utterance form a clique.
    """
    if n_utterances < 1:
        raise EmptyInputError("conversation has no utterances")
    if w_past < 0 or w_future < 0:
        raise ValueError("windows must be nonnegative")
    L = n_utterances
    reach = max(w_past, w_future)
    a = np.zeros((n_modalities * L, n_modalities * L))
    for m in range(n_modalities):
        base = m * L
        for i in range(L):
            for j in range(i + 1, min(L, i + reach + 1)):
                a[base + i, base + j] = a[base + j, base + i] = 1.0
    for i in range(L):
        nodes = [m * L + i for m in range(n_modalities)]
        for x in nodes:
            for y in nodes:
                if x != y:
                    a[x, y] = 1.0
    return a


def build_conversation_graph(utterances, w_past=4, w_future=4):
    """Graph over encoded utterances.

    ``utterances`` holds objects exposing ``text``, ``audio`` and ``visual``
    vectors of a common dimension, plus optional ``speaker_id`` and
    ``label`` attributes.
    """
    utterances = list(utterances)
    if not utterances:
        raise EmptyInputError("conversation has no utterances")
    L = len(utterances)
    d = None
    blocks = []
    for m in MODALITIES:
        rows = []
        for k, u in enumerate(utterances):
            v = np.asarray(getattr(u, m), dtype=float).ravel()
            if d is None:
                d = v.size
            elif v.size != d:
                raise DimensionError(f"utterance {k} {m} has dim {v.size}, expected {d}")
            rows.append(v)
        blocks.append(np.stack(rows))
    adjacency = conversation_adjacency(L, w_past, w_future, len(MODALITIES))
    return ConversationGraph(
        adjacency=adjacency,
        features=np.concatenate(blocks, axis=0),
        utterance_index=np.tile(np.arange(L), len(MODALITIES)),
        modality_tag=[m for m in MODALITIES for _ in range(L)],
        speaker_id=[getattr(u, "speaker_id", None) for u in utterances],
        label=[getattr(u, "label", None) for u in utterances],
    )


def mixhop_propagate(h_n, h_0, a_hat, weight, gates):
    """``sum_p gates[p] A^p H_n W + H_0``; works on arrays and Tensors."""
    y = h_n
    acc = None
    for p in range(int(np.size(ag.value(gates)))):
        y = ag.matmul(a_hat, y)
        term = ag.mul(gates[p], y)
        acc = term if acc is None else ag.add(acc, term)
    if acc is None:
        return h_0
    return ag.add(ag.matmul(acc, weight), h_0)


def _check_step_shapes(h_n, h_0, adj, params):
    hn, h0, w = ag.value(h_n), ag.value(h_0), ag.value(params.weight)
    if hn.shape != h0.shape:
        raise DimensionError(f"H_n {hn.shape} and H_0 {h0.shape} differ")
    if hn.ndim != 2 or hn.shape[0] != adj.node_count:
        raise DimensionError(f"features {hn.shape} do not match {adj.node_count} nodes")
    if w.shape[0] != hn.shape[1]:
        raise DimensionError(f"weight {w.shape} does not match feature dim {hn.shape[1]}")


def mixhop_step(h_n, h_0, adj, params):
    _check_step_shapes(h_n, h_0, adj, params)
    return mixhop_propagate(h_n, h_0, adj.matrix, params.weight, params.hop_gates)


def unroll_mixhop(e, adj, params, depth):
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    h = e
    for _ in range(int(depth)):
        h = mixhop_step(h, e, adj, params)
    return h


def dirichlet_energy(h, adj):
    """Half the sum over linked ordered pairs of squared feature gaps."""
    a = adj.source if isinstance(adj, NormalizedAdjacency) else as_matrix(adj)
    h = np.ascontiguousarray(ag.value(h), dtype=float)
    if h.ndim == 1:
        h = h[:, None]
    if h.shape[0] != a.shape[0]:
        raise DimensionError(f"{h.shape[0]} feature rows for {a.shape[0]} nodes")
    return float(kernels.dirichlet(h, np.ascontiguousarray(a, dtype=float)))
