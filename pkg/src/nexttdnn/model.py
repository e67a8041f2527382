"""NeXt-TDNN network: stem, three block stages, MFA, attentive statistics pooling, head."""

from collections import OrderedDict
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Optional, Tuple

import numpy as np

from .blocks import (
    FFN_EXPANSION,
    BlockParams,
    ConfigError,
    Variant,
    apply_block,
    check_block_geometry,
    kernel_set_for,
)
from .ops import DTYPE, ShapeError, conv1d_general, layer_norm, pconv1d, softmax_time

NUM_STAGES = 3
STEM_KERNEL = 4
EMBED_DIM = 192
ATTENTION_DIM = 128
VAR_FLOOR = 1e-10
INIT_STD = 0.02


class NumericError(ArithmeticError):
    """Raised when a forward pass produces non-finite values."""


@dataclass(frozen=True)
class ModelConfig:
    C: int
    B: int
    variant: Variant = Variant.TS_CONVNEXT
    kernel_set: Optional[Tuple[int, ...]] = None
    s: Optional[int] = None
    C_mel: int = 80
    C_MFA: Optional[int] = None
    d_embed: int = EMBED_DIM
    d_att: int = ATTENTION_DIM

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "variant", Variant(self.variant))
        set_(self, "kernel_set", kernel_set_for(self.variant, self.kernel_set))
        if self.s is None:
            set_(self, "s", len(self.kernel_set))
        elif self.s != len(self.kernel_set):
            raise ConfigError(f"s={self.s} but kernel_set has {len(self.kernel_set)} entries")
        if self.C_MFA is None:
            set_(self, "C_MFA", NUM_STAGES * self.C)
        check_block_geometry(self.variant, self.C, self.kernel_set)
        if self.B < 1:
            raise ConfigError(f"B must be >= 1, got {self.B}")
        if self.C_MFA != NUM_STAGES * self.C:
            raise ConfigError(f"C_MFA must equal 3*C={NUM_STAGES * self.C}, got {self.C_MFA}")
        if self.d_embed != EMBED_DIM:
            raise ConfigError(f"d_embed must be {EMBED_DIM}, got {self.d_embed}")
        if self.C_mel < 1 or self.d_att < 1:
            raise ConfigError("C_mel and d_att must be positive")

    @property
    def light(self):
        return self.variant is Variant.TS_CONVNEXT_LIGHT

    @property
    def branch_channels(self):
        return self.C // self.s

    def to_dict(self):
        """Field dict without C_MFA, which is always derived from C."""
        d = asdict(self)
        del d["C_MFA"]
        d["variant"] = self.variant.value
        d["kernel_set"] = list(self.kernel_set)
        return d

    @classmethod
    def from_dict(cls, d):
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        unknown = set(d) - set(known)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "kernel_set" in known:
            known["kernel_set"] = tuple(known["kernel_set"])
        return cls(**known)


# ---------------------------------------------------------------------------
# canonical parameter naming


def block_prefix(stage, block):
    return f"stages.{stage}.blocks.{block}"


def param_shapes(config: ModelConfig):
    """Ordered mapping of every parameter name to its shape."""
    c, cb = config.C, config.branch_channels
    hidden = FFN_EXPANSION * c
    shapes = OrderedDict()
    shapes["stem.weight"] = (c, config.C_mel, STEM_KERNEL)
    shapes["stem.bias"] = (c,)
    for n in range(NUM_STAGES):
        for b in range(config.B):
            p = block_prefix(n, b)
            shapes[f"{p}.norm1.gamma"] = (c,)
            shapes[f"{p}.norm1.beta"] = (c,)
            if config.light:
                shapes[f"{p}.dconv.weight"] = (c, config.kernel_set[0])
                shapes[f"{p}.dconv.bias"] = (c,)
            else:
                for i, k in enumerate(config.kernel_set):
                    shapes[f"{p}.msc.proj{i}.weight"] = (cb, c)
                    shapes[f"{p}.msc.proj{i}.bias"] = (cb,)
                    shapes[f"{p}.msc.dconv{i}.weight"] = (cb, k)
                    shapes[f"{p}.msc.dconv{i}.bias"] = (cb,)
                shapes[f"{p}.msc.out.weight"] = (c, config.s * cb)
                shapes[f"{p}.msc.out.bias"] = (c,)
            shapes[f"{p}.norm2.gamma"] = (c,)
            shapes[f"{p}.norm2.beta"] = (c,)
            shapes[f"{p}.ffn.up.weight"] = (hidden, c)
            shapes[f"{p}.ffn.up.bias"] = (hidden,)
            shapes[f"{p}.ffn.grn.gamma"] = (hidden,)
            shapes[f"{p}.ffn.grn.beta"] = (hidden,)
            shapes[f"{p}.ffn.down.weight"] = (c, hidden)
            shapes[f"{p}.ffn.down.bias"] = (c,)
    shapes["mfa.weight"] = (config.C_MFA, NUM_STAGES * c)
    shapes["mfa.bias"] = (config.C_MFA,)
    shapes["mfa.norm.gamma"] = (config.C_MFA,)
    shapes["mfa.norm.beta"] = (config.C_MFA,)
    shapes["asp.attn_in.weight"] = (config.d_att, config.C_MFA)
    shapes["asp.attn_in.bias"] = (config.d_att,)
    shapes["asp.attn_out.weight"] = (config.C_MFA, config.d_att)
    shapes["asp.attn_out.bias"] = (config.C_MFA,)
    shapes["head.weight"] = (config.d_embed, 2 * config.C_MFA)
    shapes["head.bias"] = (config.d_embed,)
    return shapes


def _init_value(name, shape, rng):
    if ".grn." in name:
        return np.zeros(shape, DTYPE)
    if name.endswith("norm1.gamma") or name.endswith("norm2.gamma") or name == "mfa.norm.gamma":
        return np.ones(shape, DTYPE)
    if name.endswith("norm1.beta") or name.endswith("norm2.beta") or name == "mfa.norm.beta":
        return np.zeros(shape, DTYPE)
    return rng.normal(0.0, INIT_STD, size=shape).astype(DTYPE)


# ---------------------------------------------------------------------------
# model


class MFAParams(NamedTuple):
    weight: np.ndarray
    bias: np.ndarray
    gamma: np.ndarray
    beta: np.ndarray


class ASPParams(NamedTuple):
    in_weight: np.ndarray
    in_bias: np.ndarray
    out_weight: np.ndarray
    out_bias: np.ndarray


@dataclass
class Model:
    """A configuration bound to a full, validated set of named parameters."""

    config: ModelConfig
    params: "OrderedDict[str, np.ndarray]" = field(repr=False)

    def __post_init__(self):
        expected = param_shapes(self.config)
        missing = [k for k in expected if k not in self.params]
        extra = [k for k in self.params if k not in expected]
        if missing or extra:
            raise ConfigError(f"parameter names do not match config: missing={missing[:5]} extra={extra[:5]}")
        ordered = OrderedDict()
        for name, shape in expected.items():
            arr = np.asarray(self.params[name], dtype=DTYPE)
            if arr.shape != shape:
                raise ShapeError(f"{name}: expected shape {shape}, got {arr.shape}")
            ordered[name] = arr
        self.params = ordered
        self._blocks = [
            [self._build_block(n, b) for b in range(self.config.B)]
            for n in range(NUM_STAGES)
        ]

    @classmethod
    def random(cls, config: ModelConfig, seed=0):
        rng = np.random.default_rng(seed)
        params = OrderedDict(
            (name, _init_value(name, shape, rng)) for name, shape in param_shapes(config).items()
        )
        return cls(config, params)

    def _build_block(self, stage, block):
        p = self.params
        pre = block_prefix(stage, block)
        cfg = self.config
        pair = lambda base, a="weight", b="bias": (p[f"{pre}.{base}.{a}"], p[f"{pre}.{base}.{b}"])
        if cfg.light:
            in_proj, dconv, out_proj = (), (pair("dconv"),), None
        else:
            in_proj = tuple(pair(f"msc.proj{i}") for i in range(cfg.s))
            dconv = tuple(pair(f"msc.dconv{i}") for i in range(cfg.s))
            out_proj = pair("msc.out")
        return BlockParams(
            variant=cfg.variant,
            channels=cfg.C,
            kernel_set=cfg.kernel_set,
            norm1=pair("norm1", "gamma", "beta"),
            msc_in_proj=in_proj,
            msc_dconv=dconv,
            msc_out_proj=out_proj,
            norm2=pair("norm2", "gamma", "beta"),
            ffn_up=pair("ffn.up"),
            grn_gamma=p[f"{pre}.ffn.grn.gamma"],
            grn_beta=p[f"{pre}.ffn.grn.beta"],
            ffn_down=pair("ffn.down"),
        )

    def block_params(self, stage, block) -> BlockParams:
        return self._blocks[stage][block]

    @property
    def stem(self):
        return self.params["stem.weight"], self.params["stem.bias"]

    @property
    def mfa_params(self):
        p = self.params
        return MFAParams(p["mfa.weight"], p["mfa.bias"], p["mfa.norm.gamma"], p["mfa.norm.beta"])

    @property
    def asp_params(self):
        p = self.params
        return ASPParams(
            p["asp.attn_in.weight"], p["asp.attn_in.bias"],
            p["asp.attn_out.weight"], p["asp.attn_out.bias"],
        )

    @property
    def head(self):
        return self.params["head.weight"], self.params["head.bias"]

    def num_elements(self):
        return sum(a.size for a in self.params.values())


def run_stage(x, model: Model, stage):
    for b in range(model.config.B):
        x = apply_block(x, model.block_params(stage, b))
    return x


def forward_backbone(features, model: Model):
    """Stem conv and the three block stages; returns every stage output."""
    features = np.asarray(features)
    if features.ndim != 2 or features.shape[0] != model.config.C_mel:
        raise ShapeError(
            f"mel channels: model expects C_mel={model.config.C_mel}, got features shape {features.shape}"
        )
    if features.shape[1] < 1:
        raise ShapeError("frames: need at least one frame")
    x = conv1d_general(features, *model.stem)
    outs = []
    for n in range(NUM_STAGES):
        x = run_stage(x, model, n)
        outs.append(x)
    return tuple(outs)


def mfa(f1, f2, f3, params: MFAParams):
    """Concatenate stage outputs along channels, project pointwise, layer-normalize."""
    frames = {np.shape(f)[1] for f in (f1, f2, f3)}
    chans = {np.shape(f)[0] for f in (f1, f2, f3)}
    if len(frames) != 1:
        raise ShapeError(f"frames: stage outputs disagree on T: {sorted(frames)}")
    if len(chans) != 1:
        raise ShapeError(f"channels: stage outputs disagree on C: {sorted(chans)}")
    stacked = np.concatenate([f1, f2, f3], axis=0)
    return layer_norm(pconv1d(stacked, params.weight, params.bias), params.gamma, params.beta)


def attention_weights(H, params: ASPParams):
    hidden = np.tanh(pconv1d(H, params.in_weight, params.in_bias))
    return softmax_time(pconv1d(hidden, params.out_weight, params.out_bias))


def asp_pool(H, params: ASPParams):
    """Attentive statistics pooling; returns concat(weighted mean, weighted std)."""
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[1] < 1:
        raise ShapeError(f"H: expected (C_MFA, T>=1), got shape {H.shape}")
    alpha = attention_weights(H, params).astype(np.float64)
    h = H.astype(np.float64)
    mu = (alpha * h).sum(axis=1)
    var = (alpha * h * h).sum(axis=1) - mu * mu
    sigma = np.sqrt(np.maximum(var, VAR_FLOOR))
    return np.concatenate([mu, sigma]).astype(DTYPE)


def embed(features, model: Model):
    """Speaker embedding (length 192) for one utterance's log-mel features."""
    f1, f2, f3 = forward_backbone(features, model)
    pooled = asp_pool(mfa(f1, f2, f3, model.mfa_params), model.asp_params)
    w, b = model.head
    with np.errstate(invalid="ignore", over="ignore"):
        out = (w.astype(np.float64) @ pooled.astype(np.float64) + b).astype(DTYPE)
    if not np.all(np.isfinite(out)):
        raise NumericError("non-finite embedding; checkpoint is likely corrupt")
    return out


# ---------------------------------------------------------------------------
# cost accounting


class LayerCost(NamedTuple):
    name: str
    kind: str  # conv | pointwise | depthwise | norm | grn | linear
    params: int
    macs: int


def cost_table(config: ModelConfig, frames: int):
    """Per-layer parameter and multiply-accumulate counts at ``frames`` frames.

    MACs cover convolution and affine layers only; biases, norms,
    activations, softmax and the GRN gate are free.
    """
    if frames < 1:
        raise ValueError("frames must be >= 1")
    T = frames
    c, cb, s = config.C, config.branch_channels, config.s
    hidden = FFN_EXPANSION * c
    rows = [LayerCost("stem", "conv", c * config.C_mel * STEM_KERNEL + c, c * config.C_mel * STEM_KERNEL * T)]
    for n in range(NUM_STAGES):
        for b in range(config.B):
            p = block_prefix(n, b)
            rows.append(LayerCost(f"{p}.norm1", "norm", 2 * c, 0))
            if config.light:
                k = config.kernel_set[0]
                rows.append(LayerCost(f"{p}.dconv", "depthwise", c * k + c, c * k * T))
            else:
                for i, k in enumerate(config.kernel_set):
                    rows.append(LayerCost(f"{p}.msc.proj{i}", "pointwise", cb * c + cb, cb * c * T))
                    rows.append(LayerCost(f"{p}.msc.dconv{i}", "depthwise", cb * k + cb, cb * k * T))
                rows.append(LayerCost(f"{p}.msc.out", "pointwise", c * s * cb + c, c * s * cb * T))
            rows.append(LayerCost(f"{p}.norm2", "norm", 2 * c, 0))
            rows.append(LayerCost(f"{p}.ffn.up", "pointwise", hidden * c + hidden, hidden * c * T))
            rows.append(LayerCost(f"{p}.ffn.grn", "grn", 2 * hidden, 0))
            rows.append(LayerCost(f"{p}.ffn.down", "pointwise", c * hidden + c, c * hidden * T))
    m, mi = config.C_MFA, NUM_STAGES * c
    rows.append(LayerCost("mfa", "pointwise", m * mi + m, m * mi * T))
    rows.append(LayerCost("mfa.norm", "norm", 2 * m, 0))
    a = config.d_att
    rows.append(LayerCost("asp.attn_in", "pointwise", a * m + a, a * m * T))
    rows.append(LayerCost("asp.attn_out", "pointwise", m * a + m, m * a * T))
    rows.append(LayerCost("head", "linear", config.d_embed * 2 * m + config.d_embed, config.d_embed * 2 * m))
    return rows


def count_params(config: ModelConfig):
    return sum(r.params for r in cost_table(config, 1))


def count_macs(config: ModelConfig, frames: int):
    return sum(r.macs for r in cost_table(config, frames))
