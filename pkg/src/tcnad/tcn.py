"""Temporal convolutional network: stacked residual blocks of causal dilated convs.

A block applies conv -> leaky_relu -> dropout twice at one dilation, then adds
a residual path (identity when channel counts match, otherwise a 1x1 conv).
The stack doubles the dilation per block so the receptive field grows as

    rf = 1 + sum_blocks 2 * (K - 1) * dilation_b
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, add, causal_dilated_conv1d, dropout, leaky_relu


@dataclass
class TcnBlockParams:
    conv1_filters: Tensor          # (K, c_in, c_out)
    conv1_bias: Tensor             # (c_out,)
    conv2_filters: Tensor          # (K, c_out, c_out)
    conv2_bias: Tensor             # (c_out,)
    downsample: Tensor | None      # (1, c_in, c_out), only when c_in != c_out
    dilation: int
    dropout_rate: float = 0.0
    slope: float = 0.2

    def __post_init__(self):
        k, c_in, c_out = self.conv1_filters.values.shape
        if self.conv2_filters.values.shape != (k, c_out, c_out):
            raise ValueError("conv2 filters must be (K, c_out, c_out)")
        if self.conv1_bias.values.shape != (c_out,) or self.conv2_bias.values.shape != (c_out,):
            raise ValueError("conv biases must be (c_out,)")
        if (c_in != c_out) != (self.downsample is not None):
            raise ValueError("downsample conv required exactly when c_in != c_out")
        if self.downsample is not None and self.downsample.values.shape != (1, c_in, c_out):
            raise ValueError("downsample filters must be (1, c_in, c_out)")
        if self.dilation < 1:
            raise ValueError(f"dilation must be >= 1, got {self.dilation}")

    @property
    def kernel_size(self) -> int:
        return self.conv1_filters.values.shape[0]

    def tensors(self) -> list[Tensor]:
        out = [self.conv1_filters, self.conv1_bias, self.conv2_filters, self.conv2_bias]
        if self.downsample is not None:
            out.append(self.downsample)
        return out


@dataclass
class TcnStackParams:
    blocks: list[TcnBlockParams]

    def tensors(self) -> list[Tensor]:
        return [t for b in self.blocks for t in b.tensors()]


def _uniform(rng: np.random.Generator, shape, fan_in: int) -> Tensor:
    bound = 1.0 / np.sqrt(fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)


def init_tcn_block(
    c_in: int,
    c_out: int,
    kernel: int,
    dilation: int,
    dropout_rate: float,
    rng: np.random.Generator,
) -> TcnBlockParams:
    down = None
    if c_in != c_out:
        down = _uniform(rng, (1, c_in, c_out), c_in)
    return TcnBlockParams(
        conv1_filters=_uniform(rng, (kernel, c_in, c_out), kernel * c_in),
        conv1_bias=Tensor(np.zeros(c_out), requires_grad=True),
        conv2_filters=_uniform(rng, (kernel, c_out, c_out), kernel * c_out),
        conv2_bias=Tensor(np.zeros(c_out), requires_grad=True),
        downsample=down,
        dilation=dilation,
        dropout_rate=dropout_rate,
    )


def init_tcn_stack(
    c_in: int,
    channels: int,
    kernel: int,
    dilations: tuple[int, ...],
    dropout_rate: float,
    rng: np.random.Generator,
) -> TcnStackParams:
    blocks = []
    prev = c_in
    for d in dilations:
        blocks.append(init_tcn_block(prev, channels, kernel, d, dropout_rate, rng))
        prev = channels
    return TcnStackParams(blocks=blocks)


def tcn_block_forward(
    x: Tensor,
    params: TcnBlockParams,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> Tensor:
    h = causal_dilated_conv1d(x, params.conv1_filters, params.dilation)
    h = add(h, params.conv1_bias)
    h = leaky_relu(h, params.slope)
    h = dropout(h, params.dropout_rate, training, rng)
    h = causal_dilated_conv1d(h, params.conv2_filters, params.dilation)
    h = add(h, params.conv2_bias)
    h = leaky_relu(h, params.slope)
    h = dropout(h, params.dropout_rate, training, rng)
    if params.downsample is None:
        res = x
    else:
        res = causal_dilated_conv1d(x, params.downsample, 1)
    return add(h, res)


def tcn_forward(
    x: Tensor,
    params: TcnStackParams,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> Tensor:
    h = x
    for block in params.blocks:
        h = tcn_block_forward(h, block, training, rng)
    return h


def receptive_field(params: TcnStackParams) -> int:
    """Number of trailing input steps that can influence the last output step."""
    rf = 1
    for b in params.blocks:
        rf += 2 * (b.kernel_size - 1) * b.dilation
    return rf
