"""Symbolic complexity accounting: #params, #FLOPs, #activations.

Counts follow the convention of common conv-net profiling tools: one FLOP is
one multiply-accumulate, only convolution layers contribute FLOPs and
activations (elementwise ops, pooling, interpolation, normalization, and
non-linearities are free), and activations are the output element count of
each convolution at its actual evaluation resolution (pyramid convolutions
run on the floor-divided pooled planes).  Parameter counts include every
trainable scalar, so normalization affine weights do appear in the params
column with zero FLOPs/acts.

Everything is closed-form over the configuration; no tensors are allocated.
"""
from __future__ import annotations

import io
import json
from dataclasses import dataclass

from .errors import ConfigError
from .model import MIXER_EXPANSION, SE_REDUCTION, ModelConfig, SafmnModel

REPORT_COLUMNS = ("name", "kind", "params", "flops", "acts")


@dataclass(frozen=True)
class LayerCost:
    name: str
    kind: str
    params: int
    flops: int
    acts: int


@dataclass
class ComplexityReport:
    layers: list[LayerCost]
    input_hw: tuple[int, int]
    batch: int = 1

    @property
    def total_params(self) -> int:
        return sum(rec.params for rec in self.layers)

    @property
    def total_flops(self) -> int:
        return sum(rec.flops for rec in self.layers)

    @property
    def total_acts(self) -> int:
        return sum(rec.acts for rec in self.layers)


def _conv_cost(name, kind, c_in, c_out, k, groups, out_h, out_w, batch) -> LayerCost:
    params = c_out * (c_in // groups) * k * k + c_out
    out_elems = batch * c_out * out_h * out_w
    flops = (c_in // groups) * k * k * out_elems
    return LayerCost(name, kind, params, flops, out_elems)


def _norm_cost(name: str, kind: str, c: int) -> LayerCost:
    affine = 2 * c if kind in ("layernorm", "batchnorm") else 0
    return LayerCost(name, kind, affine, 0, 0)


def _safm_costs(prefix: str, c: int, variant, h: int, w: int, batch: int) -> list[LayerCost]:
    recs = []
    if variant.uses_multi_scale:
        levels = variant.pyramid_levels()
        part = c // len(levels)
        for i, level in enumerate(levels):
            ph, pw = h // 2**level, w // 2**level
            recs.append(
                _conv_cost(f"{prefix}.mfr.{i}", "dwconv3x3", part, part, 3, part, ph, pw, batch)
            )
    else:
        recs.append(_conv_cost(f"{prefix}.mfr.0", "dwconv3x3", c, c, 3, c, h, w, batch))
    if variant.uses_aggregation:
        recs.append(_conv_cost(f"{prefix}.aggr", "conv1x1", c, c, 1, 1, h, w, batch))
    return recs


def _mixer_costs(prefix: str, c: int, mode: str, h: int, w: int, batch: int) -> list[LayerCost]:
    hidden = c * MIXER_EXPANSION
    k1 = 1 if mode == "channel-mlp" else 3
    kind1 = "conv1x1" if k1 == 1 else "conv3x3"
    recs = [_conv_cost(f"{prefix}.conv1", kind1, c, hidden, k1, 1, h, w, batch)]
    if mode == "inverted-residual":
        recs.append(
            _conv_cost(f"{prefix}.depthwise", "dwconv3x3", hidden, hidden, 3, hidden, h, w, batch)
        )
    if mode == "ccm-se":
        squeezed = hidden // SE_REDUCTION
        recs.append(_conv_cost(f"{prefix}.se.reduce", "conv1x1", hidden, squeezed, 1, 1, 1, 1, batch))
        recs.append(_conv_cost(f"{prefix}.se.expand", "conv1x1", squeezed, hidden, 1, 1, 1, 1, batch))
    recs.append(_conv_cost(f"{prefix}.conv2", "conv1x1", hidden, c, 1, 1, h, w, batch))
    return recs


def profile_model(config: ModelConfig, in_h: int, in_w: int, batch: int = 1) -> ComplexityReport:
    """Per-layer complexity of the configured model at the given LR input size."""
    if in_h < 1 or in_w < 1 or batch < 1:
        raise ConfigError(f"invalid profile resolution {in_h}x{in_w} (batch {batch})")
    c = config.channels
    variant = config.variant
    recs = [_conv_cost("first_conv", "conv3x3", 3, c, 3, 1, in_h, in_w, batch)]
    for b in range(config.num_blocks):
        prefix = f"blocks.{b}"
        if variant.safm != "none":
            if variant.norm != "none":
                recs.append(_norm_cost(f"{prefix}.norm1", variant.norm, c))
            recs.extend(_safm_costs(f"{prefix}.safm", c, variant, in_h, in_w, batch))
        if variant.mixer != "none":
            if variant.norm != "none":
                recs.append(_norm_cost(f"{prefix}.norm2", variant.norm, c))
            recs.extend(_mixer_costs(f"{prefix}.mixer", c, variant.mixer, in_h, in_w, batch))
    recs.append(
        _conv_cost("upsampler", "conv3x3", c, 3 * config.scale**2, 3, 1, in_h, in_w, batch)
    )
    return ComplexityReport(recs, (in_h, in_w), batch)


def config_of(model_or_config: SafmnModel | ModelConfig) -> ModelConfig:
    return model_or_config.config if isinstance(model_or_config, SafmnModel) else model_or_config


def count_params(model_or_config: SafmnModel | ModelConfig) -> int:
    """Total trainable scalar count, computed symbolically."""
    return profile_model(config_of(model_or_config), 1, 1).total_params


def count_flops(model_or_config: SafmnModel | ModelConfig, in_h: int, in_w: int) -> int:
    """Multiply-accumulate count of the convolutions at the given input size."""
    return profile_model(config_of(model_or_config), in_h, in_w).total_flops


def count_acts(model_or_config: SafmnModel | ModelConfig, in_h: int, in_w: int) -> int:
    """Output element count of the convolutions at the given input size."""
    return profile_model(config_of(model_or_config), in_h, in_w).total_acts


def emit_report(report: ComplexityReport, fmt: str = "table") -> str:
    """Render a report as an aligned table, CSV, or JSON lines."""
    rows = [(rec.name, rec.kind, rec.params, rec.flops, rec.acts) for rec in report.layers]
    total = ("TOTAL", "", report.total_params, report.total_flops, report.total_acts)
    if fmt == "csv":
        buf = io.StringIO()
        buf.write(",".join(REPORT_COLUMNS) + "\n")
        for row in rows + [total]:
            buf.write(",".join(str(v) for v in row) + "\n")
        return buf.getvalue()
    if fmt == "json-lines":
        buf = io.StringIO()
        for row in rows + [total]:
            buf.write(json.dumps(dict(zip(REPORT_COLUMNS, row))) + "\n")
        return buf.getvalue()
    if fmt == "table":
        str_rows = [[str(v) for v in row] for row in [REPORT_COLUMNS] + rows + [total]]
        widths = [max(len(r[i]) for r in str_rows) for i in range(len(REPORT_COLUMNS))]
        lines = []
        for r in str_rows:
            lines.append(
                "  ".join(
                    cell.ljust(widths[i]) if i < 2 else cell.rjust(widths[i])
                    for i, cell in enumerate(r)
                )
            )
        lines.insert(1, "  ".join("-" * wd for wd in widths))
        return "\n".join(lines) + "\n"
    raise ConfigError(f"unknown report format {fmt!r}; expected table, csv, or json-lines")
