"""Building blocks of the encoder: SE-Res2 block and attentive statistics pooling.

Parameters live in flat ``{name: Tensor}`` dicts; every block reads its
own keys under a prefix, which keeps checkpoints and gradient checks
trivially enumerable.
"""
from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from . import tensor as T
from .tensor import Tensor

RES2_SCALE = 4
POOL_EPS = 1e-9


def init_conv(rng, params, name, c_out, c_in, kernel):
    bound = np.sqrt(6.0 / (c_in * kernel))
    params[f"{name}.weight"] = T.parameter(rng.uniform(-bound, bound, (c_out, c_in, kernel)), f"{name}.weight")
    params[f"{name}.bias"] = _init_bias(rng, c_out, c_in * kernel, f"{name}.bias")


def init_linear(rng, params, name, d_out, d_in, gain=6.0):
    bound = np.sqrt(gain / d_in)
    params[f"{name}.weight"] = T.parameter(rng.uniform(-bound, bound, (d_out, d_in)), f"{name}.weight")
    params[f"{name}.bias"] = _init_bias(rng, d_out, d_in, f"{name}.bias")


def _init_bias(rng, size, fan_in, name):
    # non-zero biases keep ReLU inputs off the kink at exactly 0
    bound = 1.0 / np.sqrt(fan_in)
    return T.parameter(rng.uniform(-bound, bound, size), name)


def conv(params, name, x, dilation=1):
    return T.conv1d(x, params[f"{name}.weight"], params[f"{name}.bias"], dilation)


def dense(params, name, x):
    return T.linear(x, params[f"{name}.weight"], params[f"{name}.bias"])


# -- SE-Res2 -----------------------------------------------------------------

def init_se_res2_block(rng, params, prefix, channels, bottleneck):
    if channels % RES2_SCALE:
        raise ConfigError(f"channels ({channels}) must be divisible by the Res2 scale {RES2_SCALE}")
    width = channels // RES2_SCALE
    init_conv(rng, params, f"{prefix}.conv_in", channels, channels, 1)
    for i in range(1, RES2_SCALE):
        init_conv(rng, params, f"{prefix}.res2.{i}", width, width, 3)
    init_conv(rng, params, f"{prefix}.conv_out", channels, channels, 1)
    init_linear(rng, params, f"{prefix}.se.squeeze", bottleneck, channels)
    init_linear(rng, params, f"{prefix}.se.excite", channels, bottleneck, gain=1.0)


def squeeze_excite(params, prefix, h):
    """Channel gate from the time-averaged activations; h is (B, C, T)."""
    s = T.tmean(h, axis=-1)
    z = T.relu(dense(params, f"{prefix}.squeeze", s))
    gate = T.sigmoid(dense(params, f"{prefix}.excite", z))
    return h * T.reshape(gate, gate.shape + (1,))


def se_res2_block(x, params, prefix, dilation):
    """1x1 conv, ReLU, Res2 dilated 3-tap convs, 1x1 conv, SE gate, residual add."""
    channels = x.shape[-2]
    if channels % RES2_SCALE:
        raise ConfigError(f"channels ({channels}) must be divisible by the Res2 scale {RES2_SCALE}")
    h = T.relu(conv(params, f"{prefix}.conv_in", x))
    chunks = T.split(h, RES2_SCALE, axis=-2)
    outs = [chunks[0]]
    prev = None
    for i in range(1, RES2_SCALE):
        inp = chunks[i] if prev is None else chunks[i] + prev
        prev = T.relu(conv(params, f"{prefix}.res2.{i}", inp, dilation))
        outs.append(prev)
    h = conv(params, f"{prefix}.conv_out", T.concat(outs, axis=-2))
    return squeeze_excite(params, f"{prefix}.se", h) + x


# -- attentive statistics pooling --------------------------------------------

def init_attentive_pool(rng, params, prefix, channels, hidden):
    init_linear(rng, params, f"{prefix}.attn", hidden, channels)
    bound = np.sqrt(1.0 / hidden)
    params[f"{prefix}.v"] = T.parameter(rng.uniform(-bound, bound, hidden), f"{prefix}.v")


def attentive_stat_pool(x, params, prefix):
    """(B, C, T) -> (B, 2C): attention-weighted mean and std over time."""
    frames = T.transpose(x, (0, 2, 1))                     # (B, T, C)
    hidden = T.tanh(dense(params, f"{prefix}.attn", frames))  # (B, T, H)
    v = params[f"{prefix}.v"]
    scores = T.reshape(T.linear(hidden, T.reshape(v, (1, v.shape[0]))), hidden.shape[:2])
    weights = T.softmax(scores, axis=-1)                   # (B, T)
    w = T.reshape(weights, (weights.shape[0], 1, weights.shape[1]))
    mu = T.tsum(x * w, axis=-1)
    second = T.tsum(x * x * w, axis=-1)
    sigma = T.sqrt(T.maximum(second - mu * mu, POOL_EPS))
    return T.concat([mu, sigma], axis=-1)
