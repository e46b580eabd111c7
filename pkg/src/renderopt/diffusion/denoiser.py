"""Attention-gated encoder-decoder noise predictor over 1-D sequences.

The network maps a perturbed preference sequence, a timestep, and a resource
condition vector to the noise it believes was injected. Layout:

    input projection + sinusoidal timestep embedding + condition embedding
    -> transformer block at full resolution          (encoder)
    -> mean-pool pairs                               (downsample)
    -> transformer block at half resolution          (bottleneck)
    -> nearest upsample
    -> additive attention gate on the encoder skip
    -> concat(up, gated skip) -> merge projection
    -> MLP block -> output projection

Everything is float64 numpy with hand-written backpropagation; gradients are
validated against central finite differences (see analytic_gradient_check).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from ..errors import NumericalError

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_LN_EPS = 1e-5


@dataclass(frozen=True)
class DenoiserConfig:
    """Shapes of the network. d_model must be even and divisible by heads."""

    feature_dim: int = 6
    cond_dim: int = 4
    d_model: int = 64
    heads: int = 4
    mlp_ratio: int = 2

    def __post_init__(self):
        if self.d_model % self.heads != 0:
            raise ValueError(f"d_model {self.d_model} not divisible by heads {self.heads}")
        if self.d_model % 2 != 0:
            raise ValueError(f"d_model must be even, got {self.d_model}")
        for name in ("feature_dim", "cond_dim", "d_model", "heads", "mlp_ratio"):
            if getattr(self, name) < 1:
                raise ValueError(f"DenoiserConfig.{name} must be >= 1")

    @property
    def gate_dim(self) -> int:
        return max(1, self.d_model // 2)


def timestep_embedding(t: np.ndarray, dim: int) -> np.ndarray:
    """Sinusoidal embedding of integer timesteps, shape (B, dim)."""
    t = np.asarray(t, dtype=np.float64).reshape(-1)
    half = dim // 2
    freqs = np.exp(-math.log(10_000.0) * np.arange(half, dtype=np.float64) / half)
    args = t[:, None] * freqs[None, :]
    return np.concatenate([np.sin(args), np.cos(args)], axis=-1)


def _gelu(x: np.ndarray) -> np.ndarray:
    return 0.5 * x * (1.0 + erf(x / _SQRT2))


def _gelu_grad(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + erf(x / _SQRT2)) + x * np.exp(-0.5 * x * x) * _INV_SQRT_2PI


def _linear(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    return x @ w + b


def _linear_back(x: np.ndarray, w: np.ndarray, dy: np.ndarray):
    """Returns (dx, dw, db) for y = x @ w + b with arbitrary leading axes."""
    din, dout = w.shape
    x2 = x.reshape(-1, din)
    dy2 = dy.reshape(-1, dout)
    dw = x2.T @ dy2
    db = dy2.sum(axis=0)
    dx = (dy2 @ w.T).reshape(x.shape)
    return dx, dw, db


def _layernorm(x: np.ndarray, g: np.ndarray, b: np.ndarray):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + _LN_EPS)
    xhat = xc * inv
    return g * xhat + b, (xhat, inv)


def _layernorm_back(dy: np.ndarray, g: np.ndarray, ctx):
    xhat, inv = ctx
    dg = (dy * xhat).reshape(-1, xhat.shape[-1]).sum(axis=0)
    db = dy.reshape(-1, xhat.shape[-1]).sum(axis=0)
    dxhat = dy * g
    dx = inv * (
        dxhat
        - dxhat.mean(axis=-1, keepdims=True)
        - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
    )
    return dx, dg, db


def _split_heads(x: np.ndarray, heads: int) -> np.ndarray:
    b, l, d = x.shape
    return x.reshape(b, l, heads, d // heads).transpose(0, 2, 1, 3)


def _merge_heads(x: np.ndarray) -> np.ndarray:
    b, h, l, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, l, h * dh)


def _attention_forward(params: dict, prefix: str, x: np.ndarray, heads: int, cache: dict):
    q = _linear(x, params[f"{prefix}.wq"], params[f"{prefix}.bq"])
    k = _linear(x, params[f"{prefix}.wk"], params[f"{prefix}.bk"])
    v = _linear(x, params[f"{prefix}.wv"], params[f"{prefix}.bv"])
    qh, kh, vh = (_split_heads(a, heads) for a in (q, k, v))
    scale = 1.0 / math.sqrt(qh.shape[-1])
    scores = (qh @ kh.transpose(0, 1, 3, 2)) * scale
    scores -= scores.max(axis=-1, keepdims=True)
    ex = np.exp(scores)
    probs = ex / ex.sum(axis=-1, keepdims=True)
    ctx = probs @ vh
    merged = _merge_heads(ctx)
    out = _linear(merged, params[f"{prefix}.wo"], params[f"{prefix}.bo"])
    cache[prefix] = (x, qh, kh, vh, probs, merged, scale)
    return out


def _attention_backward(params: dict, prefix: str, dout: np.ndarray, heads: int,
                        cache: dict, grads: dict):
    x, qh, kh, vh, probs, merged, scale = cache[prefix]
    dmerged, dwo, dbo = _linear_back(merged, params[f"{prefix}.wo"], dout)
    grads[f"{prefix}.wo"] = dwo
    grads[f"{prefix}.bo"] = dbo
    dctx = _split_heads(dmerged, heads)
    dprobs = dctx @ vh.transpose(0, 1, 3, 2)
    dvh = probs.transpose(0, 1, 3, 2) @ dctx
    dscores = probs * (dprobs - (dprobs * probs).sum(axis=-1, keepdims=True))
    dqh = (dscores @ kh) * scale
    dkh = (dscores.transpose(0, 1, 3, 2) @ qh) * scale
    dx = np.zeros_like(x)
    for name, dh in (("wq", dqh), ("wk", dkh), ("wv", dvh)):
        dflat = _merge_heads(dh)
        dxi, dw, db = _linear_back(x, params[f"{prefix}.{name}"], dflat)
        grads[f"{prefix}.{name}"] = dw
        grads[f"{prefix}.b{name[1]}"] = db
        dx += dxi
    return dx


def _mlp_forward(params: dict, prefix: str, x: np.ndarray, cache: dict):
    pre = _linear(x, params[f"{prefix}.w1"], params[f"{prefix}.b1"])
    act = _gelu(pre)
    out = _linear(act, params[f"{prefix}.w2"], params[f"{prefix}.b2"])
    cache[prefix] = (x, pre, act)
    return out


def _mlp_backward(params: dict, prefix: str, dout: np.ndarray, cache: dict, grads: dict):
    x, pre, act = cache[prefix]
    dact, dw2, db2 = _linear_back(act, params[f"{prefix}.w2"], dout)
    grads[f"{prefix}.w2"] = dw2
    grads[f"{prefix}.b2"] = db2
    dpre = dact * _gelu_grad(pre)
    dx, dw1, db1 = _linear_back(x, params[f"{prefix}.w1"], dpre)
    grads[f"{prefix}.w1"] = dw1
    grads[f"{prefix}.b1"] = db1
    return dx


def _block_forward(params: dict, prefix: str, x: np.ndarray, heads: int, cache: dict):
    """Pre-norm transformer block: x + attn(LN(x)), then + mlp(LN(.))."""
    ln1, ctx1 = _layernorm(x, params[f"{prefix}.ln1.g"], params[f"{prefix}.ln1.b"])
    cache[f"{prefix}.ln1"] = ctx1
    h1 = x + _attention_forward(params, f"{prefix}.attn", ln1, heads, cache)
    ln2, ctx2 = _layernorm(h1, params[f"{prefix}.ln2.g"], params[f"{prefix}.ln2.b"])
    cache[f"{prefix}.ln2"] = ctx2
    out = h1 + _mlp_forward(params, f"{prefix}.mlp", ln2, cache)
    return out


def _block_backward(params: dict, prefix: str, dout: np.ndarray, heads: int,
                    cache: dict, grads: dict):
    dln2 = _mlp_backward(params, f"{prefix}.mlp", dout, cache, grads)
    dh1, dg2, db2 = _layernorm_back(dln2, params[f"{prefix}.ln2.g"], cache[f"{prefix}.ln2"])
    grads[f"{prefix}.ln2.g"] = dg2
    grads[f"{prefix}.ln2.b"] = db2
    dh1 = dh1 + dout
    dln1 = _attention_backward(params, f"{prefix}.attn", dh1, heads, cache, grads)
    dx, dg1, db1 = _layernorm_back(dln1, params[f"{prefix}.ln1.g"], cache[f"{prefix}.ln1"])
    grads[f"{prefix}.ln1.g"] = dg1
    grads[f"{prefix}.ln1.b"] = db1
    return dx + dh1


def init_params(config: DenoiserConfig, seed: int) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(seed)
    d, f, c = config.d_model, config.feature_dim, config.cond_dim
    mf = config.d_model * config.mlp_ratio
    a = config.gate_dim

    def w(shape):
        return rng.standard_normal(shape) / math.sqrt(shape[0])

    params: dict[str, np.ndarray] = {
        "in.w": w((f, d)), "in.b": np.zeros(d),
        "time.w": w((d, d)), "time.b": np.zeros(d),
        "cond.w": w((c, d)), "cond.b": np.zeros(d),
        "gate.wg": w((d, a)), "gate.wx": w((d, a)), "gate.b": np.zeros(a),
        "gate.psi": w((a, 1)), "gate.bpsi": np.zeros(1),
        "merge.w": w((2 * d, d)), "merge.b": np.zeros(d),
        "dec.ln.g": np.ones(d), "dec.ln.b": np.zeros(d),
        "dec.mlp.w1": w((d, mf)), "dec.mlp.b1": np.zeros(mf),
        "dec.mlp.w2": w((mf, d)), "dec.mlp.b2": np.zeros(d),
        "out.w": w((d, f)), "out.b": np.zeros(f),
    }
    for prefix in ("enc", "bot"):
        params[f"{prefix}.ln1.g"] = np.ones(d)
        params[f"{prefix}.ln1.b"] = np.zeros(d)
        params[f"{prefix}.ln2.g"] = np.ones(d)
        params[f"{prefix}.ln2.b"] = np.zeros(d)
        for name in ("wq", "wk", "wv", "wo"):
            params[f"{prefix}.attn.{name}"] = w((d, d))
        for name in ("bq", "bk", "bv", "bo"):
            params[f"{prefix}.attn.{name}"] = np.zeros(d)
        params[f"{prefix}.mlp.w1"] = w((d, mf))
        params[f"{prefix}.mlp.b1"] = np.zeros(mf)
        params[f"{prefix}.mlp.w2"] = w((mf, d))
        params[f"{prefix}.mlp.b2"] = np.zeros(d)
    return params


def forward(params: dict, config: DenoiserConfig, m_t: np.ndarray, t: np.ndarray,
            s: np.ndarray, cache: dict | None = None) -> np.ndarray:
    """Predict the injected noise. m_t: (B, L, F); t: (B,); s: (B, C)."""
    want_cache = cache is not None
    if cache is None:
        cache = {}
    b, l, f = m_t.shape
    if l % 2 != 0 or l < 2:
        raise ValueError(f"sequence length must be even and >= 2, got {l}")
    if f != config.feature_dim:
        raise ValueError(f"expected {config.feature_dim} features, got {f}")
    if s.shape != (b, config.cond_dim):
        raise ValueError(f"condition shape {s.shape} != ({b}, {config.cond_dim})")
    heads = config.heads

    x0 = _linear(m_t, params["in.w"], params["in.b"])
    sin_emb = timestep_embedding(t, config.d_model)
    temb = _linear(sin_emb, params["time.w"], params["time.b"])
    semb = _linear(s, params["cond.w"], params["cond.b"])
    h = x0 + temb[:, None, :] + semb[:, None, :]

    enc = _block_forward(params, "enc", h, heads, cache)
    down = 0.5 * (enc[:, 0::2, :] + enc[:, 1::2, :])
    bot = _block_forward(params, "bot", down, heads, cache)
    up = np.repeat(bot, 2, axis=1)

    gpre = up @ params["gate.wg"] + enc @ params["gate.wx"] + params["gate.b"]
    gact = np.tanh(gpre)
    zpsi = gact @ params["gate.psi"] + params["gate.bpsi"]
    alpha = 1.0 / (1.0 + np.exp(-zpsi))
    gated = alpha * enc

    cat = np.concatenate([up, gated], axis=-1)
    mrg = _linear(cat, params["merge.w"], params["merge.b"])
    dln, dctx = _layernorm(mrg, params["dec.ln.g"], params["dec.ln.b"])
    dec = mrg + _mlp_forward(params, "dec.mlp", dln, cache)
    out = _linear(dec, params["out.w"], params["out.b"])

    if want_cache:
        cache.update(m_t=m_t, sin_emb=sin_emb, s=s, enc=enc, up=up, gact=gact,
                     alpha=alpha, gated=gated, cat=cat, dec=dec)
        cache["dec.ln"] = dctx
    return out


def loss_and_grads(params: dict, config: DenoiserConfig, m_t: np.ndarray,
                   t: np.ndarray, s: np.ndarray, target: np.ndarray):
    """Mean squared error against the true noise and gradients for every tensor."""
    cache: dict = {}
    out = forward(params, config, m_t, t, s, cache)
    diff = out - target
    loss = float(np.mean(diff * diff))
    grads: dict[str, np.ndarray] = {}
    dout = 2.0 * diff / diff.size

    ddec, dw, db = _linear_back(cache["dec"], params["out.w"], dout)
    grads["out.w"] = dw
    grads["out.b"] = db

    ddln = _mlp_backward(params, "dec.mlp", ddec, cache, grads)
    dmrg, dg, dbn = _layernorm_back(ddln, params["dec.ln.g"], cache["dec.ln"])
    grads["dec.ln.g"] = dg
    grads["dec.ln.b"] = dbn
    dmrg = dmrg + ddec

    dcat, dw, db = _linear_back(cache["cat"], params["merge.w"], dmrg)
    grads["merge.w"] = dw
    grads["merge.b"] = db
    d = config.d_model
    dup = dcat[..., :d].copy()
    dgated = dcat[..., d:]

    enc, up, gact, alpha = cache["enc"], cache["up"], cache["gact"], cache["alpha"]
    dalpha = (dgated * enc).sum(axis=-1, keepdims=True)
    denc = dgated * alpha
    dzpsi = dalpha * alpha * (1.0 - alpha)
    _, dpsi, dbpsi = _linear_back(gact, params["gate.psi"], dzpsi)
    grads["gate.psi"] = dpsi
    grads["gate.bpsi"] = dbpsi
    dgact = dzpsi @ params["gate.psi"].T
    dgpre = dgact * (1.0 - gact * gact)
    dup += dgpre @ params["gate.wg"].T
    denc = denc + dgpre @ params["gate.wx"].T
    a_dim = params["gate.b"].shape[0]
    grads["gate.wg"] = up.reshape(-1, d).T @ dgpre.reshape(-1, a_dim)
    grads["gate.wx"] = enc.reshape(-1, d).T @ dgpre.reshape(-1, a_dim)
    grads["gate.b"] = dgpre.reshape(-1, a_dim).sum(axis=0)

    dbot = dup[:, 0::2, :] + dup[:, 1::2, :]
    ddown = _block_backward(params, "bot", dbot, config.heads, cache, grads)
    denc[:, 0::2, :] += 0.5 * ddown
    denc[:, 1::2, :] += 0.5 * ddown
    dh = _block_backward(params, "enc", denc, config.heads, cache, grads)

    dtemb = dh.sum(axis=1)
    _, dw, db = _linear_back(cache["sin_emb"], params["time.w"], dtemb)
    grads["time.w"] = dw
    grads["time.b"] = db
    _, dw, db = _linear_back(cache["s"], params["cond.w"], dtemb)
    grads["cond.w"] = dw
    grads["cond.b"] = db
    _, dw, db = _linear_back(cache["m_t"], params["in.w"], dh)
    grads["in.w"] = dw
    grads["in.b"] = db
    return loss, grads


class AttentionGatedDenoiser:
    """Stateful wrapper: parameters, config, and a denoiser-call counter."""

    def __init__(self, config: DenoiserConfig, seed: int = 0,
                 params: dict[str, np.ndarray] | None = None):
        self.config = config
        self.params = params if params is not None else init_params(config, seed)
        self.step_count = 0
        self.call_count = 0

    def predict(self, m_t: np.ndarray, t, s) -> np.ndarray:
        """Noise prediction for one sequence (L, F) or a batch (B, L, F)."""
        m_t = np.asarray(m_t, dtype=np.float64)
        single = m_t.ndim == 2
        if single:
            m_t = m_t[None]
        t_arr = np.atleast_1d(np.asarray(t, dtype=np.float64))
        if t_arr.shape[0] == 1 and m_t.shape[0] > 1:
            t_arr = np.full(m_t.shape[0], t_arr[0])
        s_arr = np.asarray(s, dtype=np.float64)
        if s_arr.ndim == 1:
            s_arr = np.broadcast_to(s_arr, (m_t.shape[0], s_arr.shape[0]))
        out = forward(self.params, self.config, m_t, t_arr, s_arr)
        self.call_count += 1
        if not np.isfinite(out).all():
            raise NumericalError("denoiser produced non-finite activations")
        return out[0] if single else out


def analytic_gradient_check(model: AttentionGatedDenoiser, m_t: np.ndarray,
                            t: np.ndarray, s: np.ndarray, target: np.ndarray,
                            fd_step: float = 1e-4) -> float:
    """Max relative error between backprop and central finite differences.

    Perturbs every element of every parameter tensor, so keep the model tiny
    (d_model <= 16) and the probe batch small.
    """
    params, config = model.params, model.config
    _, grads = loss_and_grads(params, config, m_t, t, s, target)

    def loss_at() -> float:
        out = forward(params, config, m_t, t, s)
        diff = out - target
        return float(np.mean(diff * diff))

    max_rel = 0.0
    for name, tensor in params.items():
        flat = tensor.reshape(-1)
        gflat = grads[name].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + fd_step
            hi = loss_at()
            flat[i] = orig - fd_step
            lo = loss_at()
            flat[i] = orig
            fd = (hi - lo) / (2.0 * fd_step)
            rel = abs(fd - gflat[i]) / max(abs(fd), abs(gflat[i]), 1e-6)
            if rel > max_rel:
                max_rel = rel
    return max_rel
