"""Reduced-width TDNN encoder, two-layer sigmoid classifier and the modality fusion gate."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, ShapeError
from ..features import FeatureMatrix
from . import tensor as T
from .layers import (
    RES2_SCALE,
    attentive_stat_pool,
    conv,
    dense,
    init_attentive_pool,
    init_conv,
    init_linear,
    init_se_res2_block,
    se_res2_block,
)
from .tensor import Tensor

INPUT_KERNEL = 5


@dataclass(frozen=True)
class EtEncoderConfig:
    in_dim: int = 40
    channels: int = 512 // 8
    blocks: int = 3
    dilations: tuple = (2, 3, 4)
    se_bottleneck: int = 16
    attn_hidden: int = 16
    embed_dim: int = 48

    def __post_init__(self):
        object.__setattr__(self, "dilations", tuple(int(d) for d in self.dilations))
        if len(self.dilations) != self.blocks:
            raise ConfigError(f"{self.blocks} blocks but {len(self.dilations)} dilations")
        if self.channels % RES2_SCALE:
            raise ConfigError(f"channels must be divisible by {RES2_SCALE}")
        if min(self.in_dim, self.channels, self.blocks, self.se_bottleneck, self.attn_hidden, self.embed_dim) < 1:
            raise ConfigError("encoder sizes must be positive")


@dataclass(frozen=True)
class ClassifierConfig:
    hidden_dim: int = 32
    out_dim: int = 1

    def __post_init__(self):
        if self.hidden_dim < 1 or self.out_dim != 1:
            raise ConfigError("classifier needs hidden_dim >= 1 and out_dim == 1")


def init_encoder(cfg: EtEncoderConfig, rng, prefix="encoder"):
    params = {}
    init_conv(rng, params, f"{prefix}.conv_in", cfg.channels, cfg.in_dim, INPUT_KERNEL)
    for b in range(cfg.blocks):
        init_se_res2_block(rng, params, f"{prefix}.block{b}", cfg.channels, cfg.se_bottleneck)
    agg = cfg.channels * cfg.blocks
    init_conv(rng, params, f"{prefix}.mfa", agg, agg, 1)
    init_attentive_pool(rng, params, f"{prefix}.pool", agg, cfg.attn_hidden)
    init_linear(rng, params, f"{prefix}.embed", cfg.embed_dim, 2 * agg, gain=3.0)
    return params


def init_classifier(cfg: ClassifierConfig, embed_dim, rng, prefix="classifier"):
    params = {}
    init_linear(rng, params, f"{prefix}.fc1", cfg.hidden_dim, embed_dim)
    init_linear(rng, params, f"{prefix}.fc2", cfg.out_dim, cfg.hidden_dim, gain=1.0)
    return params


def _as_batch(features, in_dim):
    """Accept a FeatureMatrix (T x F), an (F, T) / (B, F, T) array or Tensor."""
    if isinstance(features, FeatureMatrix):
        x = Tensor(features.data.T[None])
        squeeze = True
    else:
        x = T.as_tensor(features)
        squeeze = x.ndim == 2
        if squeeze:
            x = T.reshape(x, (1,) + x.shape)
    if x.ndim != 3 or x.shape[1] != in_dim:
        raise ShapeError(f"encoder expects {in_dim} feature rows, got input of shape {x.shape}")
    return x, squeeze


def et_encoder_forward(features, cfg: EtEncoderConfig, params, prefix="encoder"):
    """Embed a feature sequence; returns (embed_dim,) or (B, embed_dim)."""
    x, squeeze = _as_batch(features, cfg.in_dim)
    h = T.relu(conv(params, f"{prefix}.conv_in", x))
    block_outputs = []
    for b, dilation in enumerate(cfg.dilations):
        h = se_res2_block(h, params, f"{prefix}.block{b}", dilation)
        block_outputs.append(h)
    h = T.relu(conv(params, f"{prefix}.mfa", T.concat(block_outputs, axis=1)))
    pooled = attentive_stat_pool(h, params, f"{prefix}.pool")
    emb = dense(params, f"{prefix}.embed", pooled)
    return T.reshape(emb, emb.shape[1:]) if squeeze else emb


def classifier_logit(embedding, params, prefix="classifier"):
    h = T.relu(dense(params, f"{prefix}.fc1", embedding))
    out = dense(params, f"{prefix}.fc2", h)
    return T.reshape(out, out.shape[:-1])


def classifier_forward(embedding, cfg: ClassifierConfig, params, prefix="classifier"):
    """Probability of the positive class; scalar for a single embedding, (B,) for a batch."""
    embedding = T.as_tensor(embedding)
    if not np.all(np.isfinite(embedding.data)):
        raise ValueError("embedding contains non-finite values")
    if embedding.shape[-1] != params[f"{prefix}.fc1.weight"].shape[1]:
        raise ShapeError(f"embedding width {embedding.shape[-1]} does not match classifier input")
    return T.sigmoid(classifier_logit(embedding, params, prefix))


@dataclass
class AlphaFusion:
    """alpha = logistic(raw_alpha); the cough-side weight of the fused embedding."""

    raw_alpha: Tensor = field(default_factory=lambda: T.parameter(0.0, "fusion.raw_alpha"))

    @property
    def alpha(self):
        return float(0.5 * (1.0 + np.tanh(0.5 * self.raw_alpha.data)))


def fuse_alpha(cough_emb, breath_emb, fusion: AlphaFusion):
    cough_emb, breath_emb = T.as_tensor(cough_emb), T.as_tensor(breath_emb)
    if cough_emb.shape != breath_emb.shape:
        raise ShapeError(f"cannot fuse embeddings of shapes {cough_emb.shape} and {breath_emb.shape}")
    alpha = T.sigmoid(fusion.raw_alpha)
    return alpha * cough_emb + (1.0 - alpha) * breath_emb


class C2CModel:
    """Encoder(s) + classifier, with a fusion gate when two modalities are used.

    ``modalities`` is ``("cough",)``, ``("breath",)`` or ``("cough", "breath")``;
    the two-modality variant holds one encoder per modality.
    """

    def __init__(self, encoder_cfg: EtEncoderConfig, classifier_cfg: ClassifierConfig = ClassifierConfig(),
                 modalities=("cough",), seed=0):
        self.encoder_cfg = encoder_cfg
        self.classifier_cfg = classifier_cfg
        self.modalities = tuple(modalities)
        if not 1 <= len(self.modalities) <= 2:
            raise ConfigError(f"expected one or two modalities, got {self.modalities}")
        rng = np.random.default_rng(seed)
        self.params: dict[str, Tensor] = {}
        for m in self.modalities:
            self.params.update(init_encoder(encoder_cfg, rng, self._encoder_prefix(m)))
        self.params.update(init_classifier(classifier_cfg, encoder_cfg.embed_dim, rng))
        self.fusion = None
        if len(self.modalities) == 2:
            self.fusion = AlphaFusion()
            self.params["fusion.raw_alpha"] = self.fusion.raw_alpha

    def _encoder_prefix(self, modality):
        return "encoder" if len(self.modalities) == 1 else f"encoder.{modality}"

    def embed(self, inputs):
        """``inputs`` maps modality -> (B, F, T) features."""
        embs = [et_encoder_forward(inputs[m], self.encoder_cfg, self.params, self._encoder_prefix(m))
                for m in self.modalities]
        if self.fusion is None:
            return embs[0]
        return fuse_alpha(embs[0], embs[1], self.fusion)

    def forward(self, inputs):
        return classifier_forward(self.embed(inputs), self.classifier_cfg, self.params)

    __call__ = forward

    @property
    def alpha(self):
        return None if self.fusion is None else self.fusion.alpha

    def parameters(self):
        return self.params

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def state_dict(self):
        return {k: v.data.copy() for k, v in self.params.items()}

    def load_state_dict(self, state):
        missing = set(self.params) - set(state)
        unexpected = set(state) - set(self.params)
        if missing or unexpected:
            raise ShapeError(f"state mismatch: missing {sorted(missing)}, unexpected {sorted(unexpected)}")
        for k, v in state.items():
            if self.params[k].shape != np.shape(v):
                raise ShapeError(f"{k}: expected shape {self.params[k].shape}, got {np.shape(v)}")
            self.params[k].data = np.array(v, dtype=np.float64).reshape(self.params[k].shape)

    @classmethod
    def from_state_dict(cls, state, modality="cough", seed=0):
        """Rebuild a model, inferring every size from the parameter shapes.

        Dilations are not stored; blocks get the default 2, 3, 4, ... pattern.
        ``modality`` names the input of a single-encoder model.
        """
        if any(k.startswith("encoder.cough.") for k in state):
            modalities = ("cough", "breath")
            prefix = "encoder.cough"
        else:
            modalities = (modality,)
            prefix = "encoder"
        conv_in = np.shape(state[f"{prefix}.conv_in.weight"])
        blocks = len({k.split(".")[len(prefix.split("."))] for k in state
                      if k.startswith(f"{prefix}.block")})
        enc = EtEncoderConfig(
            in_dim=conv_in[1],
            channels=conv_in[0],
            blocks=blocks,
            dilations=tuple(range(2, 2 + blocks)),
            se_bottleneck=np.shape(state[f"{prefix}.block0.se.squeeze.weight"])[0],
            attn_hidden=np.shape(state[f"{prefix}.pool.attn.weight"])[0],
            embed_dim=np.shape(state[f"{prefix}.embed.weight"])[0],
        )
        clf = ClassifierConfig(hidden_dim=np.shape(state["classifier.fc1.weight"])[0])
        model = cls(enc, clf, modalities, seed)
        model.load_state_dict(state)
        return model
