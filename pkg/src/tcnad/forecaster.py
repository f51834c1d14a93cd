"""One-step-ahead forecaster over sliding telemetry windows.

Given a window of w rows by m features the model predicts row w (the next
observation). Pipeline: a linear causal preconvolution smooths the input,
temporal and variable attention each produce a re-weighted view of it, the
three are concatenated feature-wise, a dilated TCN stack mixes them over time,
and an MLP head maps the last time step to the m predicted values.

Parameters are plain dataclasses of autodiff tensors; ``save_checkpoint`` /
``load_checkpoint`` round-trip them (plus normalization stats) bit-exactly
through a single JSON file.
"""

from __future__ import annotations

import base64
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .attention import (
    ACTIVATIONS,
    MODES,
    AttentionParams,
    init_attention,
    temporal_attention,
    variable_attention,
)
from .autodiff import (
    Tensor,
    add,
    causal_dilated_conv1d,
    concat_cols,
    dropout,
    leaky_relu,
    linear,
    reshape,
    take_row,
)
from .tcn import TcnStackParams, init_tcn_stack, tcn_forward

CHECKPOINT_FORMAT = "tcnad-checkpoint-v1"
LEAKY_SLOPE = 0.2


@dataclass
class ModelConfig:
    window: int = 100
    conv_kernel: int = 7
    tcn_kernel: int = 4
    tcn_channels: int = 32
    dilations: tuple[int, ...] = (1, 2, 4)
    mlp_layers: int = 2
    mlp_units: int = 32
    dropout: float = 0.1
    attention_mode: str = "dynamic"
    attention_activation: str = "sigmoid"
    temporal_attention: bool = True
    variable_attention: bool = True

    def __post_init__(self):
        self.dilations = tuple(int(d) for d in self.dilations)
        if self.window < 1:
            raise ValueError(f"window must be >= 1, got {self.window}")
        for name in ("conv_kernel", "tcn_kernel", "tcn_channels", "mlp_units"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.mlp_layers < 0:
            raise ValueError(f"mlp_layers must be >= 0, got {self.mlp_layers}")
        if not self.dilations or any(d < 1 for d in self.dilations):
            raise ValueError(f"dilations must be positive, got {self.dilations}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.attention_mode not in MODES:
            raise ValueError(f"unknown attention_mode {self.attention_mode!r}")
        if self.attention_activation not in ACTIVATIONS:
            raise ValueError(
                f"unknown attention_activation {self.attention_activation!r}"
            )


@dataclass
class ForecasterParams:
    config: ModelConfig
    n_features: int
    seed: int
    preconv_filters: Tensor                 # (conv_kernel, m, m)
    preconv_bias: Tensor                    # (m,)
    temporal: AttentionParams | None
    variable: AttentionParams | None
    tcn: TcnStackParams
    mlp: list[tuple[Tensor, Tensor]] = field(default_factory=list)

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        """Trainable tensors in a stable order (checkpoint and optimizer rely on it)."""
        out = [("preconv.filters", self.preconv_filters), ("preconv.bias", self.preconv_bias)]
        if self.temporal is not None:
            out += [("temporal.weight", self.temporal.weight),
                    ("temporal.score_vec", self.temporal.score_vec)]
        if self.variable is not None:
            out += [("variable.weight", self.variable.weight),
                    ("variable.score_vec", self.variable.score_vec)]
        for i, b in enumerate(self.tcn.blocks):
            out += [(f"tcn.{i}.conv1_filters", b.conv1_filters),
                    (f"tcn.{i}.conv1_bias", b.conv1_bias),
                    (f"tcn.{i}.conv2_filters", b.conv2_filters),
                    (f"tcn.{i}.conv2_bias", b.conv2_bias)]
            if b.downsample is not None:
                out.append((f"tcn.{i}.downsample", b.downsample))
        for i, (w, bias) in enumerate(self.mlp):
            out += [(f"mlp.{i}.weight", w), (f"mlp.{i}.bias", bias)]
        return out

    def tensors(self) -> list[Tensor]:
        return [t for _, t in self.named_parameters()]

    @property
    def concat_width(self) -> int:
        branches = 1
        if self.temporal is not None:
            branches += 1
        if self.variable is not None:
            branches += 1
        return branches * self.n_features


def init_forecaster(n_features: int, config: ModelConfig, seed: int = 0) -> ForecasterParams:
    """Fan-in scaled uniform weights, zero biases, all drawn from one seeded rng."""
    if n_features < 1:
        raise ValueError(f"n_features must be >= 1, got {n_features}")
    rng = np.random.default_rng(seed)
    m, k = n_features, config.conv_kernel

    bound = 1.0 / np.sqrt(k * m)
    preconv_filters = Tensor(rng.uniform(-bound, bound, size=(k, m, m)), requires_grad=True)
    preconv_bias = Tensor(np.zeros(m), requires_grad=True)

    temporal = None
    if config.temporal_attention:
        temporal = init_attention(
            m, mode=config.attention_mode,
            activation=config.attention_activation, rng=rng,
        )
    variable = None
    if config.variable_attention:
        variable = init_attention(
            config.window, mode=config.attention_mode,
            activation=config.attention_activation, rng=rng,
        )

    branches = 1 + (temporal is not None) + (variable is not None)
    tcn = init_tcn_stack(
        branches * m, config.tcn_channels, config.tcn_kernel,
        config.dilations, config.dropout, rng,
    )

    mlp: list[tuple[Tensor, Tensor]] = []
    dims = [config.tcn_channels] + [config.mlp_units] * config.mlp_layers + [m]
    for d_in, d_out in zip(dims[:-1], dims[1:]):
        wb = 1.0 / np.sqrt(d_in)
        mlp.append((
            Tensor(rng.uniform(-wb, wb, size=(d_in, d_out)), requires_grad=True),
            Tensor(np.zeros(d_out), requires_grad=True),
        ))

    return ForecasterParams(
        config=config, n_features=n_features, seed=seed,
        preconv_filters=preconv_filters, preconv_bias=preconv_bias,
        temporal=temporal, variable=variable, tcn=tcn, mlp=mlp,
    )


def forward(
    x: Tensor,
    params: ForecasterParams,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> Tensor:
    """Predict the next observation from a (window, m) tensor; returns shape (m,)."""
    cfg = params.config
    w, m = cfg.window, params.n_features
    if x.values.shape != (w, m):
        raise ValueError(f"expected window of shape {(w, m)}, got {x.values.shape}")

    h = add(causal_dilated_conv1d(x, params.preconv_filters, 1), params.preconv_bias)

    parts = [h]
    if params.temporal is not None:
        parts.append(temporal_attention(h, params.temporal))
    if params.variable is not None:
        parts.append(variable_attention(h, params.variable))
    z = concat_cols(parts) if len(parts) > 1 else h

    z = tcn_forward(z, params.tcn, training, rng)
    out = take_row(z, w - 1)                       # (1, tcn_channels)

    n_layers = len(params.mlp)
    for i, (weight, bias) in enumerate(params.mlp):
        out = linear(out, weight, bias)
        if i < n_layers - 1:
            out = leaky_relu(out, LEAKY_SLOPE)
            out = dropout(out, cfg.dropout, training, rng)
    return reshape(out, (m,))


def predict(params: ForecasterParams, window: np.ndarray) -> np.ndarray:
    """Tape-free inference convenience for a single numpy window."""
    return forward(Tensor(window), params, training=False).values


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

def _encode_array(a: np.ndarray) -> dict:
    buf = np.ascontiguousarray(a, dtype="<f8").tobytes()
    return {"shape": list(a.shape), "data": base64.b64encode(buf).decode("ascii")}


def _decode_array(entry: dict) -> np.ndarray:
    raw = base64.b64decode(entry["data"])
    arr = np.frombuffer(raw, dtype="<f8").reshape(entry["shape"])
    return np.array(arr, dtype=np.float64)


def save_checkpoint(path, params: ForecasterParams, stats=None):
    """Write params (and optional normalization stats) as one JSON document.

    float64 payloads go through base64 so reloading is bit-exact; keys are
    sorted so identical params produce identical bytes.
    """
    doc = {
        "format": CHECKPOINT_FORMAT,
        "config": asdict(params.config) | {"dilations": list(params.config.dilations)},
        "n_features": params.n_features,
        "seed": params.seed,
        "normalization": None,
        "tensors": {name: _encode_array(t.values) for name, t in params.named_parameters()},
    }
    if stats is not None:
        doc["normalization"] = {
            "mode": stats.mode,
            "minimum": _encode_array(stats.minimum),
            "maximum": _encode_array(stats.maximum),
        }
    with open(path, "w", encoding="ascii") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_checkpoint(path):
    """Rebuild (ForecasterParams, NormalizationStats | None) from ``save_checkpoint`` output."""
    from .data import DataFormatError, NormalizationStats

    try:
        with open(path, encoding="ascii") as fh:
            doc = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise DataFormatError(f"{path}: not a checkpoint file ({exc})") from None
    if not isinstance(doc, dict) or doc.get("format") != CHECKPOINT_FORMAT:
        raise DataFormatError(
            f"{path}: unsupported checkpoint format {doc.get('format')!r}"
            if isinstance(doc, dict) else f"{path}: not a checkpoint file"
        )
    try:
        cfg_dict = dict(doc["config"])
        cfg_dict["dilations"] = tuple(cfg_dict["dilations"])
        config = ModelConfig(**cfg_dict)
        params = init_forecaster(int(doc["n_features"]), config, int(doc["seed"]))
        saved = doc["tensors"]
        expected = params.named_parameters()
        expected_names = {name for name, _ in expected}
        extra = set(saved) - expected_names
        if extra:
            raise DataFormatError(f"{path}: unexpected tensors {sorted(extra)}")
        for name, tensor in expected:
            if name not in saved:
                raise DataFormatError(f"{path}: missing tensor {name!r}")
            arr = _decode_array(saved[name])
            if arr.shape != tensor.values.shape:
                raise DataFormatError(
                    f"{path}: tensor {name!r} has shape {arr.shape}, "
                    f"expected {tensor.values.shape}"
                )
            tensor.values = arr
        stats = None
        if doc.get("normalization") is not None:
            nd = doc["normalization"]
            stats = NormalizationStats(
                minimum=_decode_array(nd["minimum"]),
                maximum=_decode_array(nd["maximum"]),
                mode=nd["mode"],
            )
        return params, stats
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, DataFormatError):
            raise
        raise DataFormatError(f"{path}: malformed checkpoint ({exc})") from None
