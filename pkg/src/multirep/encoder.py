"""Toy masked-position encoder.

Architecture: token embedding plus fixed sinusoidal position encoding,
then ``n_layers`` of (add context mean -> dense HxH mixing -> tanh),
applied per position. Bidirectional mode averages the whole sequence
into the context vector; causal mode averages only the prefix, so a
position never sees tokens to its right. A linear head maps hidden
states to vocabulary logits.

All forward/backward math runs in float64; representation sets are
stored in float32.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import BadFormat, BadSchedule, DimensionMismatch
from .prompts import TokenizedPrompt, prompt_prefix_ids
from .vocab import MASK_ID, QUOTE_ID

DEFAULT_HIDDEN = 128
DEFAULT_LAYERS = 2
_POS_SCALE = 0.1
_CKPT_MAGIC = b"DPRM"
_CKPT_VERSION = 1


@dataclass
class RepresentationSet:
    """K (hidden, logit) row pairs for one text."""

    hidden: np.ndarray  # (k, H) float32
    logits: np.ndarray | None  # (k, V) float32, or None if absent
    source: str = "parallel"  # parallel | sequential | multistep

    @property
    def k(self) -> int:
        return self.hidden.shape[0]

    @property
    def dim(self) -> int:
        return self.hidden.shape[1]


@dataclass
class DenoiseSchedule:
    per_step_unmask: list[int]

    def __post_init__(self):
        if not self.per_step_unmask:
            raise BadSchedule("schedule has no steps")
        if any(n < 1 for n in self.per_step_unmask):
            raise BadSchedule("every step must unmask at least one position")
        if max(self.per_step_unmask) - min(self.per_step_unmask) > 1:
            raise BadSchedule("schedule is not a balanced split")

    @property
    def steps(self) -> int:
        return len(self.per_step_unmask)

    @property
    def total(self) -> int:
        return sum(self.per_step_unmask)

    @classmethod
    def balanced(cls, k: int, steps: int) -> "DenoiseSchedule":
        """Split k positions over ``steps`` rounds, roughly k/steps each."""
        if steps < 1 or steps > k:
            raise BadSchedule(f"need 1 <= steps <= k, got steps={steps}, k={k}")
        base, rem = divmod(k, steps)
        return cls([base + 1] * rem + [base] * (steps - rem))


class EncoderParams:
    """Trainable weights; reproducible from (V, H, n_layers, seed)."""

    def __init__(self, vocab_size, hidden_dim, n_layers, emb, mix_w, mix_b, head, seed):
        self.vocab_size = vocab_size
        self.hidden_dim = hidden_dim
        self.n_layers = n_layers
        self.emb = emb  # (V, H)
        self.mix_w = mix_w  # list of (H, H)
        self.mix_b = mix_b  # list of (H,)
        self.head = head  # (H, V)
        self.seed = seed

    @classmethod
    def init(cls, vocab_size: int, hidden_dim: int = DEFAULT_HIDDEN,
             n_layers: int = DEFAULT_LAYERS, seed: int = 0) -> "EncoderParams":
        if min(vocab_size, hidden_dim, n_layers) < 1:
            raise ValueError("all dimensions must be > 0")
        rng = np.random.default_rng(seed)
        scale = 1.0 / np.sqrt(hidden_dim)
        emb = rng.normal(0.0, scale, (vocab_size, hidden_dim))
        mix_w = [rng.normal(0.0, scale, (hidden_dim, hidden_dim)) for _ in range(n_layers)]
        mix_b = [np.zeros(hidden_dim) for _ in range(n_layers)]
        head = rng.normal(0.0, scale, (hidden_dim, vocab_size))
        return cls(vocab_size, hidden_dim, n_layers, emb, mix_w, mix_b, head, seed)

    def copy(self) -> "EncoderParams":
        return EncoderParams(
            self.vocab_size, self.hidden_dim, self.n_layers,
            self.emb.copy(), [w.copy() for w in self.mix_w],
            [b.copy() for b in self.mix_b], self.head.copy(), self.seed,
        )

    def n_params(self) -> int:
        return self.emb.size + sum(w.size + b.size for w, b in zip(self.mix_w, self.mix_b)) + self.head.size

    # flat-vector view, used by the finite-difference gradient check
    def to_vector(self) -> np.ndarray:
        parts = [self.emb.ravel()]
        for w, b in zip(self.mix_w, self.mix_b):
            parts.extend([w.ravel(), b.ravel()])
        parts.append(self.head.ravel())
        return np.concatenate(parts)

    def from_vector(self, vec: np.ndarray) -> "EncoderParams":
        out = self.copy()
        i = 0

        def take(shape):
            nonlocal i
            n = int(np.prod(shape))
            block = vec[i:i + n].reshape(shape)
            i += n
            return block.copy()

        out.emb = take(self.emb.shape)
        out.mix_w, out.mix_b = [], []
        for w, b in zip(self.mix_w, self.mix_b):
            out.mix_w.append(take(w.shape))
            out.mix_b.append(take(b.shape))
        out.head = take(self.head.shape)
        return out

    def save(self, path) -> None:
        with open(path, "wb") as f:
            f.write(_CKPT_MAGIC)
            f.write(struct.pack("<IIIIq", _CKPT_VERSION, self.vocab_size,
                                self.hidden_dim, self.n_layers, self.seed))
            f.write(self.to_vector().astype("<f8").tobytes())

    @classmethod
    def load(cls, path) -> "EncoderParams":
        with open(path, "rb") as f:
            magic = f.read(4)
            if magic != _CKPT_MAGIC:
                raise BadFormat(f"not a params checkpoint: {path}")
            version, v, h, L, seed = struct.unpack("<IIIIq", f.read(24))
            if version != _CKPT_VERSION:
                raise BadFormat(f"unsupported checkpoint version {version}")
            blank = cls.init(v, h, L, seed=seed)
            payload = np.frombuffer(f.read(), dtype="<f8")
        if payload.size != blank.n_params():
            raise BadFormat("checkpoint payload size mismatch")
        return blank.from_vector(payload)


def position_encoding(n: int, h: int) -> np.ndarray:
    """Fixed sinusoidal position code; keeps distinct mask positions distinct."""
    pos = np.arange(n)[:, None]
    dim = np.arange(h)[None, :]
    angle = pos / np.power(10000.0, (2 * (dim // 2)) / h)
    enc = np.where(dim % 2 == 0, np.sin(angle), np.cos(angle))
    return _POS_SCALE * enc


def _check_ids(params: EncoderParams, ids) -> np.ndarray:
    arr = np.asarray(ids, dtype=np.int64)
    if arr.size and (arr.min() < 0 or arr.max() >= params.vocab_size):
        raise DimensionMismatch(
            f"token id out of range for vocab size {params.vocab_size}")
    return arr


def forward_hidden(params: EncoderParams, ids, causal: bool = False,
                   context_weights: np.ndarray | None = None,
                   return_caches: bool = False):
    """Final-layer hidden states for every position (float64).

    ``context_weights`` reweights the bidirectional context mean; the
    default is a uniform mean over all positions. Causal mode ignores it
    and uses the running prefix mean instead.
    """
    arr = _check_ids(params, ids)
    n = arr.size
    x = params.emb[arr] + position_encoding(n, params.hidden_dim)
    xs, zs = [x], []
    for w, b in zip(params.mix_w, params.mix_b):
        if causal:
            csum = np.cumsum(x, axis=0)
            ctx = csum / np.arange(1, n + 1)[:, None]
        elif context_weights is not None:
            cw = np.asarray(context_weights, dtype=np.float64)
            ctx = (cw[:, None] * x).sum(axis=0) / cw.sum()
        else:
            ctx = x.mean(axis=0)
        z = x + ctx
        x = np.tanh(z @ w + b)
        xs.append(x)
        zs.append(z)
    if return_caches:
        return x, (arr, xs, zs)
    return x


def backward_from_positions(params: EncoderParams, caches, positions,
                            d_hidden: np.ndarray, d_logits: np.ndarray | None):
    """Backprop a bidirectional forward pass given output-row gradients.

    Returns grads with the same structure as the parameters; positional
    codes are fixed and carry no gradient.
    """
    arr, xs, zs = caches
    n = arr.size
    positions = np.asarray(positions, dtype=np.int64)
    hidden = xs[-1][positions]

    grads = {
        "emb": np.zeros_like(params.emb),
        "mix_w": [np.zeros_like(w) for w in params.mix_w],
        "mix_b": [np.zeros_like(b) for b in params.mix_b],
        "head": np.zeros_like(params.head),
    }
    dh = np.array(d_hidden, dtype=np.float64, copy=True)
    if d_logits is not None:
        grads["head"] += hidden.T @ d_logits
        dh += d_logits @ params.head.T

    dx = np.zeros((n, params.hidden_dim))
    np.add.at(dx, positions, dh)
    for layer in range(params.n_layers - 1, -1, -1):
        x_out = xs[layer + 1]
        da = dx * (1.0 - x_out ** 2)
        grads["mix_w"][layer] += zs[layer].T @ da
        grads["mix_b"][layer] += da.sum(axis=0)
        dz = da @ params.mix_w[layer].T
        # z = x + mean(x): each row feeds every context mean with weight 1/n
        dx = dz + dz.sum(axis=0) / n
    np.add.at(grads["emb"], arr, dx)
    return grads


def _as_repset(hidden64: np.ndarray, head: np.ndarray, source: str) -> RepresentationSet:
    logits = hidden64 @ head
    return RepresentationSet(
        hidden=hidden64.astype(np.float32),
        logits=logits.astype(np.float32),
        source=source,
    )


def encode_parallel(params: EncoderParams, prompt: TokenizedPrompt) -> RepresentationSet:
    """One bidirectional pass; read rows at the mask positions."""
    x = forward_hidden(params, prompt.token_ids)
    return _as_repset(x[prompt.mask_positions], params.head, "parallel")


def encode_sequential(params: EncoderParams, prompt_prefix: TokenizedPrompt,
                      cap_n: int) -> RepresentationSet:
    """Autoregressive baseline: one causal pass per representation.

    Each step appends a mask, reads its row, commits the argmax token,
    and stops at the closing quote or at ``cap_n`` steps.
    """
    if cap_n < 1:
        raise ValueError("cap_n must be >= 1")
    seq = list(prompt_prefix_ids(prompt_prefix))
    hiddens, logit_rows = [], []
    for _ in range(cap_n):
        x = forward_hidden(params, seq + [MASK_ID], causal=True)
        h = x[-1]
        logit = h @ params.head
        hiddens.append(h)
        logit_rows.append(logit)
        tok = int(np.argmax(logit))
        seq.append(tok)
        if tok == QUOTE_ID:
            break
    return RepresentationSet(
        hidden=np.array(hiddens, dtype=np.float32),
        logits=np.array(logit_rows, dtype=np.float32),
        source="sequential",
    )


def encode_multistep(params: EncoderParams, prompt: TokenizedPrompt,
                     schedule: DenoiseSchedule) -> RepresentationSet:
    """Iterative denoising with confidence-based unmasking.

    Each pass unmasks the most confident remaining positions (max
    softmax probability; ties break toward the lower position index) and
    freezes their (hidden, logit) rows from the pass that unmasked them.
    """
    k = prompt.k
    if schedule.total != k:
        raise BadSchedule(f"schedule sums to {schedule.total}, prompt has {k} masks")
    ids = list(prompt.token_ids)
    remaining = list(prompt.mask_positions)
    frozen: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    for n_unmask in schedule.per_step_unmask:
        x = forward_hidden(params, ids)
        rows = x[remaining]
        logits = rows @ params.head
        shifted = logits - logits.max(axis=1, keepdims=True)
        probs = np.exp(shifted)
        conf = probs.max(axis=1) / probs.sum(axis=1)
        order = sorted(range(len(remaining)), key=lambda i: (-conf[i], remaining[i]))
        for i in order[:n_unmask]:
            pos = remaining[i]
            frozen[pos] = (rows[i].astype(np.float32), logits[i].astype(np.float32))
            ids[pos] = int(np.argmax(logits[i]))
        remaining = [p for p in remaining if p not in frozen]
    ordered = sorted(frozen)
    return RepresentationSet(
        hidden=np.stack([frozen[p][0] for p in ordered]),
        logits=np.stack([frozen[p][1] for p in ordered]),
        source="multistep",
    )
