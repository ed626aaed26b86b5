"""Transformer encoder: embeddings plus a configurable subset of
post-norm blocks, pooled at the reserved first position.

Block indices are 1-based so pruning subsets read the same way as the
ablation grid labels ("1,3,5,7,9,11", "1,5,9", "1,9", "5").
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import autograd as ag
from .autograd import Parameter, Tensor
from .errors import ArgumentError, ContractError
from .numerics import dropout, gelu, layer_norm, masked_softmax, xavier_init

LN_EPS = 1e-5


@dataclass(frozen=True)
class EncoderConfig:
    vocab_size: int
    d_model: int
    n_heads: int
    d_ff: int
    max_seq_len: int
    n_blocks_total: int = 12
    block_subset: tuple[int, ...] = tuple(range(1, 13))
    dropout_rate: float = 0.1

    def __post_init__(self):
        if self.d_model % self.n_heads != 0:
            raise ArgumentError(
                f"d_model {self.d_model} not divisible by n_heads {self.n_heads}")
        if self.max_seq_len < 2:
            raise ArgumentError("max_seq_len must be >= 2")
        subset = tuple(self.block_subset)
        if not subset:
            raise ArgumentError("block_subset must be nonempty")
        if list(subset) != sorted(set(subset)):
            raise ArgumentError("block_subset must be strictly increasing")
        if subset[0] < 1 or subset[-1] > self.n_blocks_total:
            raise ArgumentError(
                f"block_subset {subset} out of range 1..{self.n_blocks_total}")


def select_blocks(config: EncoderConfig, subset) -> EncoderConfig:
    """Return a config retaining only the given 1-based block indices."""
    return replace(config, block_subset=tuple(subset))


@dataclass
class BlockParams:
    wq: Parameter
    bq: Parameter
    wk: Parameter
    bk: Parameter
    wv: Parameter
    bv: Parameter
    wo: Parameter
    bo: Parameter
    ln1_gain: Parameter
    ln1_bias: Parameter
    w1: Parameter
    b1: Parameter
    w2: Parameter
    b2: Parameter
    ln2_gain: Parameter
    ln2_bias: Parameter

    def parameters(self) -> list[Parameter]:
        return [self.wq, self.bq, self.wk, self.bk, self.wv, self.bv,
                self.wo, self.bo, self.ln1_gain, self.ln1_bias,
                self.w1, self.b1, self.w2, self.b2,
                self.ln2_gain, self.ln2_bias]


@dataclass
class EncoderParams:
    token_embedding: Parameter
    position_embedding: Parameter
    blocks: dict[int, BlockParams] = field(default_factory=dict)

    def parameters(self) -> list[Parameter]:
        out = [self.token_embedding, self.position_embedding]
        for idx in sorted(self.blocks):
            out.extend(self.blocks[idx].parameters())
        return out


def init_encoder_params(config: EncoderConfig, rng: np.random.Generator,
                        dtype=np.float32) -> EncoderParams:
    d, ff = config.d_model, config.d_ff

    def lin(name, fan_out, fan_in):
        w = Parameter(xavier_init((fan_out, fan_in), rng, dtype), name + "/w")
        b = Parameter(np.zeros(fan_out, dtype=dtype), name + "/b")
        return w, b

    params = EncoderParams(
        token_embedding=Parameter(
            xavier_init((config.vocab_size, d), rng, dtype),
            "encoder/token_embedding"),
        position_embedding=Parameter(
            xavier_init((config.max_seq_len, d), rng, dtype),
            "encoder/position_embedding"))
    for idx in config.block_subset:
        prefix = f"encoder/block{idx}"
        wq, bq = lin(prefix + "/attn_q", d, d)
        wk, bk = lin(prefix + "/attn_k", d, d)
        wv, bv = lin(prefix + "/attn_v", d, d)
        wo, bo = lin(prefix + "/attn_o", d, d)
        w1, b1 = lin(prefix + "/ff1", ff, d)
        w2, b2 = lin(prefix + "/ff2", d, ff)
        params.blocks[idx] = BlockParams(
            wq=wq, bq=bq, wk=wk, bk=bk, wv=wv, bv=bv, wo=wo, bo=bo,
            ln1_gain=Parameter(np.ones(d, dtype=dtype), prefix + "/ln1/gain"),
            ln1_bias=Parameter(np.zeros(d, dtype=dtype), prefix + "/ln1/bias"),
            w1=w1, b1=b1, w2=w2, b2=b2,
            ln2_gain=Parameter(np.ones(d, dtype=dtype), prefix + "/ln2/gain"),
            ln2_bias=Parameter(np.zeros(d, dtype=dtype), prefix + "/ln2/bias"))
    return params


def param_count(config: EncoderConfig) -> int:
    """Closed-form scalar count for the retained blocks plus embeddings."""
    d, ff = config.d_model, config.d_ff
    embeddings = config.vocab_size * d + config.max_seq_len * d
    attention = 4 * (d * d + d)
    feed_forward = ff * d + ff + d * ff + d
    norms = 4 * d
    per_block = attention + feed_forward + norms
    return embeddings + len(config.block_subset) * per_block


def embed(ids: np.ndarray, params: EncoderParams) -> Tensor:
    """Token embedding plus position embedding, per position."""
    tok = ag.embedding(params.token_embedding, ids)
    seq_len = ids.shape[1]
    pos_data = params.position_embedding.data[:seq_len]

    pos = Tensor(pos_data[None, :, :], _parents=(params.position_embedding,),
                 _backward=lambda g: params.position_embedding.accumulate_grad(
                     _pad_position_grad(g, params.position_embedding.data.shape)))
    return tok + pos


def _pad_position_grad(g: np.ndarray, full_shape) -> np.ndarray:
    grad = np.zeros(full_shape, dtype=g.dtype)
    grad[: g.shape[1]] = g.sum(axis=0)
    return grad


def self_attention(hidden: Tensor, mask: np.ndarray, bp: BlockParams,
                   config: EncoderConfig) -> Tensor:
    """Multi-head scaled dot-product attention with PAD keys masked out."""
    if np.any(mask.sum(axis=-1) < 1):
        raise ContractError("self_attention: sample with no real positions")
    batch, seq_len, d = hidden.shape
    heads = config.n_heads
    dh = d // heads

    def split_heads(x):
        return ag.transpose(ag.reshape(x, (batch, seq_len, heads, dh)),
                            (0, 2, 1, 3))

    q = split_heads(ag.linear(hidden, bp.wq, bp.bq))
    k = split_heads(ag.linear(hidden, bp.wk, bp.bk))
    v = split_heads(ag.linear(hidden, bp.wv, bp.bv))
    scores = ag.matmul(q, ag.transpose(k, (0, 1, 3, 2))) * (1.0 / math.sqrt(dh))
    weights = masked_softmax(scores, mask)
    context = ag.matmul(weights, v)
    merged = ag.reshape(ag.transpose(context, (0, 2, 1, 3)),
                        (batch, seq_len, d))
    return ag.linear(merged, bp.wo, bp.bo)


def encoder_block(hidden: Tensor, mask: np.ndarray, bp: BlockParams,
                  config: EncoderConfig, mode: str,
                  rng: np.random.Generator) -> Tensor:
    """Post-norm block: attention and feed-forward sub-layers with
    residual connections and layer normalization."""
    attn = self_attention(hidden, mask, bp, config)
    attn = dropout(attn, config.dropout_rate, mode, rng)
    h1 = layer_norm(hidden + attn, bp.ln1_gain, bp.ln1_bias, LN_EPS)
    ff = ag.linear(gelu(ag.linear(h1, bp.w1, bp.b1)), bp.w2, bp.b2)
    ff = dropout(ff, config.dropout_rate, mode, rng)
    return layer_norm(h1 + ff, bp.ln2_gain, bp.ln2_bias, LN_EPS)


def encode_sequence(ids: np.ndarray, mask: np.ndarray, params: EncoderParams,
                    config: EncoderConfig, mode: str,
                    rng: np.random.Generator) -> Tensor:
    """Embed, run retained blocks in ascending index order, pool position 0."""
    hidden = embed(ids, params)
    for idx in config.block_subset:
        hidden = encoder_block(hidden, mask, params.blocks[idx], config,
                               mode, rng)
    return ag.take_first(hidden)
