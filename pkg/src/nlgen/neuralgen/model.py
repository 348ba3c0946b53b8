"""Attentional encoder-decoder: BiLSTM or CNN-pooling encoder, stacked LSTM decoder."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields

import numpy as np

from nlgen.errors import ConfigError, EmptySource
from nlgen.neuralgen import autodiff as ad
from nlgen.neuralgen.autodiff import Var

PAD, UNK, BOS, EOS = "<pad>", "<unk>", "<bos>", "<eos>"
SPECIALS = (PAD, UNK, BOS, EOS)
PAD_ID, UNK_ID, BOS_ID, EOS_ID = range(4)
ENCODERS = ("bilstm", "cnn_pooling")
MASK_NEG = -1e9


@dataclass
class Hyperparams:
    src_vocab_size: int = 8
    tgt_vocab_size: int = 8
    embed_dim: int = 32
    encoder: str = "bilstm"
    enc_hidden: int = 64        # cells per direction
    dec_layers: int = 1
    dec_hidden: int = 64
    attn_dim: int = 64
    beam_width: int = 10
    length_penalty: float = 0.6
    max_decode_len: int = 60
    learning_rate: float = 1e-3
    epochs: int = 10
    batch_size: int = 32
    seed: int = 0
    max_src_len: int = 128      # position table size for the CNN encoder
    cnn_window: int = 3
    clip_norm: float = 5.0
    init_scale: float = 0.1

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.encoder not in ENCODERS:
            raise ConfigError(f"unknown encoder {self.encoder!r}")
        for f in ("src_vocab_size", "tgt_vocab_size", "embed_dim", "enc_hidden", "dec_layers",
                  "dec_hidden", "attn_dim", "beam_width", "max_decode_len", "batch_size",
                  "max_src_len", "cnn_window"):
            if getattr(self, f) < 1:
                raise ConfigError(f"{f} must be >= 1")
        if not 0.0 <= self.length_penalty <= 2.0:
            raise ConfigError("length_penalty must lie in [0, 2]")

    @property
    def enc_dim(self) -> int:
        return 2 * self.enc_hidden

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> Hyperparams:
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown hyperparameters {sorted(unknown)}")
        return cls(**d)


class Vocab:
    def __init__(self, tokens=()):
        self.itos: list[str] = list(SPECIALS)
        self.stoi: dict[str, int] = {t: i for i, t in enumerate(self.itos)}
        for t in tokens:
            self.add(t)

    def add(self, token: str) -> int:
        if token not in self.stoi:
            self.stoi[token] = len(self.itos)
            self.itos.append(token)
        return self.stoi[token]

    def __len__(self) -> int:
        return len(self.itos)

    def encode(self, tokens) -> list[int]:
        return [self.stoi.get(t, UNK_ID) for t in tokens]

    def decode(self, ids) -> list[str]:
        out = []
        for i in ids:
            if i == EOS_ID:
                break
            if i in (PAD_ID, BOS_ID):
                continue
            out.append(self.itos[i] if 0 <= i < len(self.itos) else UNK)
        return out

    @classmethod
    def build(cls, sequences, min_count: int = 1) -> Vocab:
        counts: dict[str, int] = {}
        for seq in sequences:
            for t in seq:
                counts[t] = counts.get(t, 0) + 1
        return cls(sorted(t for t, c in counts.items() if c >= min_count and t not in SPECIALS))


def param_shapes(h: Hyperparams) -> dict[str, tuple[int, ...]]:
    """Name -> shape for every parameter tensor, in storage order."""
    d, E, Hd, A = h.embed_dim, h.enc_dim, h.dec_hidden, h.attn_dim
    shapes: dict[str, tuple[int, ...]] = {
        "src_embed": (h.src_vocab_size, d),
        "tgt_embed": (h.tgt_vocab_size, d),
    }
    if h.encoder == "bilstm":
        He = h.enc_hidden
        for direction in ("fwd", "bwd"):
            shapes[f"enc_{direction}_Wx"] = (d, 4 * He)
            shapes[f"enc_{direction}_Wh"] = (He, 4 * He)
            shapes[f"enc_{direction}_b"] = (4 * He,)
    else:
        shapes["cnn_pos"] = (h.max_src_len, d)
        shapes["cnn_W"] = (d, E)
        shapes["cnn_b"] = (E,)
    # attention MLP: first layer W over [h_i ; s] (stored input-major), second layer w
    shapes["att_W"] = (E + Hd, A)
    shapes["att_w"] = (A,)
    for l in range(h.dec_layers):
        in_dim = d + E if l == 0 else Hd
        shapes[f"bridge{l}_W"] = (E, Hd)
        shapes[f"bridge{l}_b"] = (Hd,)
        shapes[f"dec{l}_Wx"] = (in_dim, 4 * Hd)
        shapes[f"dec{l}_Wh"] = (Hd, 4 * Hd)
        shapes[f"dec{l}_b"] = (4 * Hd,)
    shapes["out_W"] = (Hd + E + d, h.tgt_vocab_size)
    shapes["out_b"] = (h.tgt_vocab_size,)
    return shapes


def init_params(h: Hyperparams, seed: int | None = None) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(h.seed if seed is None else seed)
    params = {}
    for name, shape in param_shapes(h).items():
        if name.endswith("_b") and len(shape) == 1 and (name.startswith("enc_") or name.startswith("dec")):
            b = np.zeros(shape)
            hid = shape[0] // 4
            b[hid:2 * hid] = 1.0   # forget gate
            params[name] = b
        elif name in ("out_b", "cnn_b") or name.startswith("bridge") and name.endswith("_b"):
            params[name] = np.zeros(shape)
        else:
            params[name] = rng.uniform(-h.init_scale, h.init_scale, size=shape)
    return params


@dataclass
class EncoderOutput:
    H: Var                  # (B, L, E)
    mask: np.ndarray        # (B, L) 1.0 for real positions
    HW: Var | None = None   # H projected by the attention's h-block, cached per sequence

    @property
    def length(self) -> int:
        return int(self.mask.sum(axis=1)[0])

    @property
    def hidden_states(self) -> np.ndarray:
        """Unpadded (L, E) array for the first sequence in the batch."""
        return self.H.value[0, :self.length]


@dataclass
class DecoderState:
    h: list                 # per layer (B, Hd)
    c: list
    q: Var | None = None    # last context vector
    t: int = 0
    u_prev: np.ndarray | None = None

    def take(self, idx: np.ndarray) -> DecoderState:
        return DecoderState([Var(x.value[idx]) for x in self.h], [Var(x.value[idx]) for x in self.c],
                            None if self.q is None else Var(self.q.value[idx]), self.t,
                            None if self.u_prev is None else self.u_prev[idx])


@dataclass
class AttentionWeights:
    alpha: np.ndarray


def as_vars(params: dict[str, np.ndarray], requires_grad: bool = False) -> dict[str, Var]:
    return {k: Var(np.asarray(v, dtype=np.float64), requires_grad=requires_grad, name=k)
            for k, v in params.items()}


def lstm_cell(x: Var, h: Var, c: Var, Wx: Var, Wh: Var, b: Var) -> tuple[Var, Var]:
    gates = x @ Wx + h @ Wh + b
    n = h.shape[-1]
    ifo = ad.sigmoid(gates[:, :3 * n])
    g = ad.tanh(gates[:, 3 * n:])
    i, f, o = ifo[:, :n], ifo[:, n:2 * n], ifo[:, 2 * n:]
    c_new = f * c + i * g
    return o * ad.tanh(c_new), c_new


def _check_ids(ids: np.ndarray, vocab_size: int) -> np.ndarray:
    ids = np.asarray(ids, dtype=np.int64)
    return np.where((ids >= 0) & (ids < vocab_size), ids, UNK_ID)


def pad_batch(seqs, pad=PAD_ID) -> tuple[np.ndarray, np.ndarray]:
    L = max(len(s) for s in seqs)
    ids = np.full((len(seqs), L), pad, dtype=np.int64)
    mask = np.zeros((len(seqs), L))
    for b, s in enumerate(seqs):
        ids[b, :len(s)] = s
        mask[b, :len(s)] = 1.0
    return ids, mask


def encode_batch(P: dict[str, Var], h: Hyperparams, src: np.ndarray, mask: np.ndarray) -> EncoderOutput:
    src = _check_ids(src, h.src_vocab_size)
    B, L = src.shape
    if L == 0 or (mask.sum(axis=1) == 0).any():
        raise EmptySource("cannot encode an empty source sequence")
    X = ad.embed(P["src_embed"], src)                       # (B, L, d)
    if h.encoder == "bilstm":
        He = h.enc_hidden
        outs = {}
        for direction, steps in (("fwd", range(L)), ("bwd", range(L - 1, -1, -1))):
            hs = Var(np.zeros((B, He)))
            cs = Var(np.zeros((B, He)))
            seq = [None] * L
            Wx, Wh, b = P[f"enc_{direction}_Wx"], P[f"enc_{direction}_Wh"], P[f"enc_{direction}_b"]
            for t in steps:
                m = mask[:, t:t + 1]
                hn, cn = lstm_cell(X[:, t], hs, cs, Wx, Wh, b)
                if m.min() < 1.0:
                    hn = hn * m + hs * (1.0 - m)
                    cn = cn * m + cs * (1.0 - m)
                hs, cs = hn, cn
                seq[t] = hs
            outs[direction] = ad.stack(seq, axis=1)
        H = ad.concat([outs["fwd"], outs["bwd"]], axis=-1)
    else:
        if L > h.max_src_len:
            raise ConfigError(f"source length {L} exceeds max_src_len {h.max_src_len}")
        pos = ad.embed(P["cnn_pos"], np.arange(L))             # (L, d)
        Xp = X + pos
        # windowed mean over real positions only
        w = h.cnn_window // 2
        avg = np.zeros((B, L, L))
        for i in range(L):
            lo, hi = max(0, i - w), min(L, i + w + 1)
            avg[:, i, lo:hi] = mask[:, lo:hi]
        avg /= np.maximum(avg.sum(axis=2, keepdims=True), 1.0)
        pooled = Var(avg) @ Xp                                  # (B, L, d)
        H = ad.tanh(pooled @ P["cnn_W"] + P["cnn_b"])
    E = h.enc_dim
    HW = H @ P["att_W"][:E]
    return EncoderOutput(H, mask, HW)


def initial_state(P: dict[str, Var], h: Hyperparams, enc: EncoderOutput) -> DecoderState:
    B, L = enc.mask.shape
    weights = enc.mask / enc.mask.sum(axis=1, keepdims=True)
    mean = ad.reshape(Var(weights.reshape(B, 1, L)) @ enc.H, (B, h.enc_dim))
    hs = [ad.tanh(mean @ P[f"bridge{l}_W"] + P[f"bridge{l}_b"]) for l in range(h.dec_layers)]
    cs = [Var(np.zeros((B, h.dec_hidden))) for _ in range(h.dec_layers)]
    return DecoderState(hs, cs, None, 0, np.full(B, BOS_ID, dtype=np.int64))


def attend_batch(P: dict[str, Var], h: Hyperparams, s_prev: Var, enc: EncoderOutput) -> tuple[Var, Var]:
    """alpha = softmax_i(w . tanh(W [h_i ; s_prev])),  q = sum_i alpha_i h_i."""
    E = h.enc_dim
    B, L = enc.mask.shape
    HW = enc.HW if enc.HW is not None else enc.H @ P["att_W"][:E]
    sW = ad.reshape(s_prev @ P["att_W"][E:], (B, 1, h.attn_dim))
    scores = ad.tanh(HW + sW) @ P["att_w"]                    # (B, L)
    if enc.mask.min() < 1.0:
        scores = scores + (1.0 - enc.mask) * MASK_NEG
    alpha = ad.softmax(scores, axis=-1)
    q = ad.reshape(ad.reshape(alpha, (B, 1, L)) @ enc.H, (B, E))
    return alpha, q


def decode_step_batch(P: dict[str, Var], h: Hyperparams, u_prev: np.ndarray, state: DecoderState,
                      enc: EncoderOutput) -> tuple[Var, DecoderState, Var]:
    """One decoder step; returns (logits, next state, attention weights)."""
    u_prev = _check_ids(u_prev, h.tgt_vocab_size)
    alpha, q = attend_batch(P, h, state.h[-1], enc)
    emb = ad.embed(P["tgt_embed"], u_prev)
    x = ad.concat([emb, q], axis=-1)
    hs, cs = [], []
    for l in range(h.dec_layers):
        hn, cn = lstm_cell(x, state.h[l], state.c[l], P[f"dec{l}_Wx"], P[f"dec{l}_Wh"], P[f"dec{l}_b"])
        hs.append(hn)
        cs.append(cn)
        x = hn
    logits = ad.concat([hs[-1], q, emb], axis=-1) @ P["out_W"] + P["out_b"]
    return logits, DecoderState(hs, cs, q, state.t + 1, u_prev), alpha


def batch_loss(P: dict[str, Var], h: Hyperparams, src_seqs, tgt_seqs) -> tuple[Var, int]:
    """Summed token cross-entropy of complete output sequences (EOS already appended)."""
    src, smask = pad_batch(src_seqs)
    n_tokens = sum(len(t) for t in tgt_seqs)
    if n_tokens == 0:
        return Var(np.asarray(0.0)), 0
    tgt, tmask = pad_batch(tgt_seqs)
    B, T = tgt.shape
    enc = encode_batch(P, h, src, smask)
    state = initial_state(P, h, enc)
    prev = np.full(B, BOS_ID, dtype=np.int64)
    total = None
    for t in range(T):
        logits, state, _ = decode_step_batch(P, h, prev, state, enc)
        step = ad.cross_entropy(logits, tgt[:, t], tmask[:, t])
        total = step if total is None else total + step
        prev = tgt[:, t]
    return total, n_tokens


class Seq2Seq:
    """A parameter set plus its hyperparameters and vocabularies."""

    def __init__(self, hyper: Hyperparams, params: dict[str, np.ndarray] | None = None,
                 src_vocab: Vocab | None = None, tgt_vocab: Vocab | None = None):
        self.hyper = hyper
        self.params = params if params is not None else init_params(hyper)
        self.src_vocab = src_vocab
        self.tgt_vocab = tgt_vocab
        shapes = param_shapes(hyper)
        for name, shape in shapes.items():
            if name not in self.params or tuple(self.params[name].shape) != shape:
                raise ConfigError(f"parameter {name} inconsistent with hyperparameters")

    def loss(self, src_seqs, tgt_seqs) -> float:
        with ad.no_grad():
            total, n = batch_loss(as_vars(self.params), self.hyper, src_seqs, tgt_seqs)
        return float(total.value) / max(n, 1)

    def encode(self, tokens) -> EncoderOutput:
        return encode(tokens, self.params, self.hyper)


# single-sequence API ------------------------------------------------------


def encode(tokens, params: dict[str, np.ndarray], hyper: Hyperparams) -> EncoderOutput:
    if len(tokens) == 0:
        raise EmptySource("cannot encode an empty source sequence")
    ids = np.asarray([list(tokens)], dtype=np.int64)
    with ad.no_grad():
        return encode_batch(as_vars(params), hyper, ids, np.ones(ids.shape))


def attend(state: DecoderState, enc: EncoderOutput, params: dict[str, np.ndarray],
           hyper: Hyperparams) -> tuple[AttentionWeights, np.ndarray]:
    with ad.no_grad():
        alpha, q = attend_batch(as_vars(params), hyper, state.h[-1], enc)
    return AttentionWeights(alpha.value[0]), q.value[0]


def start_state(enc: EncoderOutput, params, hyper) -> DecoderState:
    with ad.no_grad():
        return initial_state(as_vars(params), hyper, enc)


def decode_step(u_prev: int, state: DecoderState, enc: EncoderOutput, params,
                hyper: Hyperparams) -> tuple[np.ndarray, DecoderState]:
    with ad.no_grad():
        logits, nxt, _ = decode_step_batch(as_vars(params), hyper, np.asarray([u_prev]), state, enc)
    return np.exp(ad.log_softmax_np(logits.value[0])), nxt
