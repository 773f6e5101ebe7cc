"""End-to-end classifier: encoders -> graph -> mixhop -> graph ODE -> head.

Parameters live as named numpy arrays (``ModelParams.named_arrays``) so the
optimizer and the text dump can walk them generically; the forward pass wraps
them in :class:`~dgode.autograd.Tensor` leaves when gradients are wanted.
"""
import copy
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import block_diag

from . import autograd as ag
from . import diffops, kernels
from .encoder import ModalityEncoder, SpeakerTable, _uniform
from .errors import ConfigError, EmptyInputError, LabelError
from .graph import conversation_adjacency, mixhop_propagate, normalize_adjacency
from .numerics import clamp_spectrum
from .odecore import OdeConfig

MODALITIES = ("text", "audio", "visual")
ARCHITECTURES = ("dgode", "vanilla_gcn")
LOG_FLOOR = float(np.log(1e-12))


@dataclass(frozen=True)
class ModelConfig:
    input_dims: tuple = (16, 12, 8)
    n_classes: int = 4
    n_speakers: int = 2
    hidden: int = 16  # GRU state per direction
    dim: int = 16  # common node feature width
    head_hidden: int = 16
    hop_count: int = 2
    mixhop_depth: int = 2
    alpha: float = 1.0
    w_past: int = 4
    w_future: int = 4
    w_rho: float = 0.9
    w_eps: float = 1e-3
    use_ode: bool = True
    use_mixhop: bool = True
    architecture: str = "dgode"
    gcn_layers: int = 4
    ode: OdeConfig = field(default_factory=OdeConfig)

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ConfigError(f"architecture must be one of {ARCHITECTURES}")
        if len(self.input_dims) != 3:
            raise ConfigError("input_dims needs one width per modality")
        if min(self.hidden, self.dim, self.head_hidden, self.n_classes) < 1:
            raise ConfigError("layer widths and class count must be positive")
        if self.hop_count < 1 or self.mixhop_depth < 0 or self.gcn_layers < 0:
            raise ConfigError("hop_count >= 1, mixhop_depth >= 0, gcn_layers >= 0")
        if not 0 < self.alpha <= 1:
            raise ConfigError("alpha must lie in (0, 1]")
        if not (0 < self.w_rho and 0 < self.w_eps):
            raise ConfigError("w_rho and w_eps must be positive")


@dataclass
class ModelParams:
    config: ModelConfig
    speaker: SpeakerTable
    encoders: dict
    mix_v: np.ndarray  # W = rho * V V^T / lambda_max(V V^T) + eps * I
    hop_gates: np.ndarray
    W_l: np.ndarray
    b_l: np.ndarray
    W_smax: np.ndarray
    b_smax: np.ndarray
    classes: tuple = ()
    speakers: tuple = ()

    def named_arrays(self):
        out = {"speaker.weight": self.speaker.weight}
        for m in MODALITIES:
            enc = self.encoders[m]
            for direction in ("forward", "backward"):
                for k, v in getattr(enc, direction).as_dict().items():
                    out[f"{m}.{direction}.{k}"] = v
            out[f"{m}.projection"] = enc.projection
        out["mixhop.V"] = self.mix_v
        out["mixhop.gates"] = self.hop_gates
        out["head.W_l"] = self.W_l
        out["head.b_l"] = self.b_l
        out["head.W_smax"] = self.W_smax
        out["head.b_smax"] = self.b_smax
        return out

    def weight_names(self):
        """Arrays subject to L2 decay: matrices only (biases and gates excluded)."""
        return [k for k, v in self.named_arrays().items() if v.ndim == 2]

    def copy(self):
        return copy.deepcopy(self)

    def with_config(self, **changes):
        new = self.copy()
        new.config = replace(self.config, **changes)
        return new

    def mixing_matrix(self):
        return ag.value(mixing_matrix(self.mix_v, self.config))


def init_params(config, seed=0, classes=(), speakers=()):
    rng = np.random.default_rng(seed)
    d = config.dim
    encoders = {m: ModalityEncoder.init(n_in, config.hidden, d, rng)
                for m, n_in in zip(MODALITIES, config.input_dims)}
    return ModelParams(
        config=config,
        speaker=SpeakerTable.init(d, config.n_speakers, rng),
        encoders=encoders,
        mix_v=_uniform(rng, (d, d), d) + np.eye(d),
        hop_gates=np.full(config.hop_count, 1.0 / config.hop_count),
        W_l=_uniform(rng, (config.head_hidden, d), d),
        b_l=_uniform(rng, (config.head_hidden,), d),
        W_smax=_uniform(rng, (config.n_classes, config.head_hidden), config.head_hidden),
        b_smax=_uniform(rng, (config.n_classes,), config.head_hidden),
        classes=tuple(classes),
        speakers=tuple(speakers),
    )


def mixing_matrix(v, config):
    """Symmetric mixing weight with spectrum in (w_eps, w_rho + w_eps]."""
    s = ag.matmul(v, ag.transpose(v))
    scale = ag.div(config.w_rho, diffops.lambda_max(s))
    return ag.add(ag.mul(s, scale), config.w_eps * np.eye(ag.value(v).shape[0]))


# --------------------------------------------------------------------------
# data preparation
# --------------------------------------------------------------------------

@dataclass
class PreparedConversation:
    features: dict  # modality -> (L, dim)
    speaker_index: np.ndarray  # -1 for unknown speakers
    labels: np.ndarray
    a_hat: np.ndarray
    eigvecs: np.ndarray
    eigvals: np.ndarray
    conversation_id: str = ""

    @property
    def length(self):
        return self.labels.shape[0]


def prepare_conversation(conv, classes, speakers, config):
    cls_index = {c: k for k, c in enumerate(classes)}
    spk_index = {s: k for k, s in enumerate(speakers)}
    L = len(conv)
    if L == 0:
        raise EmptyInputError(f"conversation {conv.conversation_id!r} is empty")
    try:
        labels = np.array([cls_index[u.label] for u in conv.utterances], dtype=np.intp)
    except KeyError as exc:
        raise LabelError(f"unknown label {exc.args[0]!r}") from exc
    adj = normalize_adjacency(conversation_adjacency(L, config.w_past, config.w_future),
                              config.alpha)
    return PreparedConversation(
        features={m: conv.modality(m) for m in MODALITIES},
        speaker_index=np.array([spk_index.get(s, -1) for s in conv.speakers], dtype=np.intp),
        labels=labels,
        a_hat=adj.matrix,
        eigvecs=adj.eig.vectors,
        eigvals=adj.eig.values,
        conversation_id=conv.conversation_id,
    )


def prepare_dataset(dataset, params):
    return [prepare_conversation(c, params.classes, params.speakers, params.config)
            for c in dataset.conversations]


@dataclass
class Batch:
    x: dict  # modality -> (Lmax, B, dim)
    x_rev: dict
    mask: np.ndarray
    fwd_rows: np.ndarray  # utterance -> row of the (Lmax*B, h) forward output
    bwd_rows: np.ndarray
    speaker_onehot: np.ndarray
    labels: np.ndarray
    node_perm: np.ndarray  # node -> row of stacked [text; audio; visual]
    a_hat: np.ndarray
    eigvecs: np.ndarray
    log_eigvals: np.ndarray
    eigvals: np.ndarray
    log_adj: np.ndarray
    readout: np.ndarray  # (utterances, nodes)

    @property
    def utterance_count(self):
        return self.labels.shape[0]


def collate(convs, n_speakers, clamp_eps):
    if not convs:
        raise EmptyInputError("empty batch")
    B = len(convs)
    lengths = [c.length for c in convs]
    Lmax = max(lengths)
    n_utt = sum(lengths)
    x, x_rev = {}, {}
    for m in MODALITIES:
        dim = convs[0].features[m].shape[1]
        fw = np.zeros((Lmax, B, dim))
        bw = np.zeros((Lmax, B, dim))
        for b, c in enumerate(convs):
            f = c.features[m]
            fw[:c.length, b] = f
            bw[:c.length, b] = f[::-1]
        x[m], x_rev[m] = fw, bw
    mask = np.zeros((Lmax, B))
    fwd_rows = np.empty(n_utt, dtype=np.intp)
    bwd_rows = np.empty(n_utt, dtype=np.intp)
    node_perm = np.empty(3 * n_utt, dtype=np.intp)
    readout = np.zeros((n_utt, 3 * n_utt))
    u0 = 0
    for b, c in enumerate(convs):
        L = c.length
        mask[:L, b] = 1.0
        pos = np.arange(L)
        fwd_rows[u0:u0 + L] = pos * B + b
        bwd_rows[u0:u0 + L] = (L - 1 - pos) * B + b
        n0 = 3 * u0
        for m in range(3):
            node_perm[n0 + m * L:n0 + (m + 1) * L] = m * n_utt + u0 + pos
            readout[u0 + pos, n0 + m * L + pos] = 1.0 / 3.0
        u0 += L
    onehot = np.zeros((n_utt, n_speakers))
    spk = np.concatenate([c.speaker_index for c in convs])
    known = spk >= 0
    onehot[np.flatnonzero(known), spk[known]] = 1.0
    eigvals = np.concatenate([c.eigvals for c in convs])
    eigvecs = block_diag(*[c.eigvecs for c in convs])
    log_eigvals = np.log(clamp_spectrum(eigvals, clamp_eps))
    return Batch(
        x=x, x_rev=x_rev, mask=mask, fwd_rows=fwd_rows, bwd_rows=bwd_rows,
        speaker_onehot=onehot, labels=np.concatenate([c.labels for c in convs]),
        node_perm=node_perm, a_hat=block_diag(*[c.a_hat for c in convs]),
        eigvecs=eigvecs, log_eigvals=log_eigvals, eigvals=eigvals,
        log_adj=(eigvecs * log_eigvals) @ eigvecs.T, readout=readout,
    )


# --------------------------------------------------------------------------
# forward pass
# --------------------------------------------------------------------------

def leaf_tensors(params):
    return {k: ag.Tensor(v, name=k) for k, v in params.named_arrays().items()}


def _cell(arrs, prefix):
    return {k: arrs[f"{prefix}.{k}"] for k in diffops._GRU_NAMES}


def encode_batch(batch, arrs):
    """Speaker-fused modal representations, one (utterances, d) block per modality."""
    spk = ag.matmul(batch.speaker_onehot, ag.transpose(arrs["speaker.weight"]))
    out = []
    for m in MODALITIES:
        Lmax, B = batch.mask.shape
        hf = diffops.gru_sequence(batch.x[m], batch.mask, _cell(arrs, f"{m}.forward"))
        hb = diffops.gru_sequence(batch.x_rev[m], batch.mask, _cell(arrs, f"{m}.backward"))
        hid = ag.value(hf).shape[2]
        hf = ag.take_rows(ag.reshape(hf, (Lmax * B, hid)), batch.fwd_rows)
        hb = ag.take_rows(ag.reshape(hb, (Lmax * B, hid)), batch.bwd_rows)
        both = ag.concat([hf, hb], axis=1)
        c = ag.matmul(both, ag.transpose(arrs[f"{m}.projection"]))
        out.append(ag.add(c, spk))
    return out


def ode_forward(e, w, batch, ode):
    p, pt = batch.eigvecs, batch.eigvecs.T
    delta = ode.sing_tol
    if ode.method == "closed_form_paper" and ode.t_end > 0:
        shifted_w = ag.sub(w, np.eye(ag.value(w).shape[0]))
        a = batch.eigvals - 1.0
        expo = diffops.eigen_flow(e, shifted_w, p, pt, a, ode.t_end, delta, kernels.EXPONENTIAL)
        corr = diffops.eigen_flow(e, shifted_w, p, pt, a, ode.t_end, delta, kernels.INTEGRAL)
        return ag.add(expo, corr)
    log_w = diffops.sym_logm(w)
    a = batch.log_eigvals
    if ode.method == "closed_form_exact" or ode.t_end == 0:
        return diffops.eigen_flow(e, log_w, p, pt, a, ode.t_end + 1.0, delta, kernels.INTEGRAL)
    h = diffops.eigen_flow(e, log_w, p, pt, a, 1.0, delta, kernels.INTEGRAL)
    step = ode.t_end / ode.steps

    def rhs(y):
        return ag.add(ag.add(ag.matmul(batch.log_adj, y), ag.matmul(y, log_w)), e)

    for _ in range(ode.steps):
        if ode.method == "euler":
            h = ag.add(h, ag.mul(step, rhs(h)))
        else:
            k1 = rhs(h)
            k2 = rhs(ag.add(h, ag.mul(0.5 * step, k1)))
            k3 = rhs(ag.add(h, ag.mul(0.5 * step, k2)))
            k4 = rhs(ag.add(h, ag.mul(step, k3)))
            incr = ag.add(ag.add(k1, ag.mul(2.0, k2)), ag.add(ag.mul(2.0, k3), k4))
            h = ag.add(h, ag.mul(step / 6.0, incr))
    return h


def propagate(nodes, batch, arrs, config):
    """Graph stage: mixhop and/or ODE for DGODE, stacked layers for vanilla GCN."""
    needs_w = config.architecture == "vanilla_gcn" or config.use_mixhop or config.use_ode
    if not needs_w:
        return nodes
    w = mixing_matrix(arrs["mixhop.V"], config)
    if config.architecture == "vanilla_gcn":
        h = nodes
        for _ in range(config.gcn_layers):
            h = ag.matmul(ag.matmul(batch.a_hat, h), w)
        return h
    h = nodes
    if config.use_mixhop:
        for _ in range(config.mixhop_depth):
            h = mixhop_propagate(h, nodes, batch.a_hat, w, arrs["mixhop.gates"])
    if config.use_ode:
        h = ode_forward(h, w, batch, config.ode)
    return h


def utterance_embeddings(batch, arrs, config):
    modal = encode_batch(batch, arrs)
    nodes = ag.take_rows(ag.concat(modal, axis=0), batch.node_perm)
    h = propagate(nodes, batch, arrs, config)
    return ag.matmul(batch.readout, h)


def forward_logits(batch, params, arrs=None, train_mode=False, dropout=0.0, rng=None):
    arrs = params.named_arrays() if arrs is None else arrs
    h = utterance_embeddings(batch, arrs, params.config)
    l = ag.relu(ag.add(ag.matmul(h, ag.transpose(arrs["head.W_l"])), arrs["head.b_l"]))
    if train_mode and dropout > 0:
        rng = np.random.default_rng() if rng is None else rng
        keep = (rng.random(ag.value(l).shape) >= dropout) / (1.0 - dropout)
        l = ag.mul(l, keep)
    return ag.add(ag.matmul(l, ag.transpose(arrs["head.W_smax"])), arrs["head.b_smax"])


def forward(batch, params, train_mode=False, dropout=0.0, rng=None):
    """Per-utterance class probabilities (rows sum to one)."""
    return ag.value(ag.softmax(forward_logits(batch, params, None, train_mode, dropout, rng)))


def predict_label(prob_row):
    p = np.asarray(prob_row, dtype=float).ravel()
    if p.size == 0:
        raise ValueError("empty probability row")
    return int(np.argmax(p))  # first maximum wins ties


def _check_labels(labels, n_classes):
    labels = np.asarray(labels, dtype=np.intp)
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise LabelError(f"labels must lie in [0, {n_classes})")
    return labels


def l2_penalty(arrs, names, l2):
    total = 0.0
    for k in names:
        total = ag.add(total, ag.sum_(ag.mul(arrs[k], arrs[k])))
    return ag.mul(l2, total)


def loss(probs, labels, params, l2=0.0):
    """Mean cross-entropy (probabilities floored at 1e-12) plus L2 on weights."""
    pv = ag.value(probs)
    labels = _check_labels(labels, pv.shape[1])
    if pv.shape[0] != labels.size:
        raise ValueError("probability rows and labels differ in count")
    picked = ag.getitem(probs, (np.arange(labels.size), labels))
    ce = ag.mul(-1.0, ag.mean(ag.log(ag.clip_min(picked, 1e-12))))
    arrs = params if isinstance(params, dict) else params.named_arrays()
    names = [k for k, v in arrs.items() if ag.value(v).ndim == 2]
    return ag.add(ce, l2_penalty(arrs, names, l2))


def loss_from_logits(logits, labels, arrs, names, l2):
    lv = ag.value(logits)
    labels = _check_labels(labels, lv.shape[1])
    logp = ag.log_softmax(logits)
    picked = ag.clip_min(ag.getitem(logp, (np.arange(labels.size), labels)), LOG_FLOOR)
    ce = ag.mul(-1.0, ag.mean(picked))
    return ag.add(ce, l2_penalty(arrs, names, l2))


def backward(batch, params, l2=0.0, train_mode=False, dropout=0.0, rng=None):
    """Loss and gradient of every named parameter array."""
    arrs = leaf_tensors(params)
    logits = forward_logits(batch, params, arrs, train_mode, dropout, rng)
    total = loss_from_logits(logits, batch.labels, arrs, params.weight_names(), l2)
    total.backward()
    grads = {k: (t.grad if t.grad is not None else np.zeros_like(t.value))
             for k, t in arrs.items()}
    return float(ag.value(total)), grads


def batch_loss(batch, params, l2=0.0, train_mode=False, dropout=0.0, rng=None):
    logits = forward_logits(batch, params, None, train_mode, dropout, rng)
    arrs = params.named_arrays()
    return float(ag.value(loss_from_logits(logits, batch.labels, arrs, params.weight_names(), l2)))
