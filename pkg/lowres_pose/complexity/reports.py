"""Complexity reports: parameter and MAC totals of backbone + head pairs."""

import logging
from typing import Dict, List, Optional, Sequence, Tuple, Union

from lowres_pose.complexity.layers import (
    CONVENTION,
    RESNET_STRIDE,
    ablation_head_layers,
    head_layers,
    resnet_layers,
    toy_backbone_layers,
)
from lowres_pose.errors import ShapeError
from lowres_pose.observability import get_tracer
from lowres_pose.schemas.results import BudgetSummary, ComplexityReport, ComponentCost
from lowres_pose.schemas.specs import BackboneSpec, HeadKind, HeadSpec

logger = logging.getLogger(__name__)

BackboneRef = Union[BackboneSpec, str]

RESNET_TOKENS = {"resnet50": 50, "resnet101": 101, "resnet152": 152}

BASELINE_EXTENT = (256, 192)


def _resnet_depth(token: str) -> int:
    try:
        return RESNET_TOKENS[token.lower()]
    except KeyError:
        raise ValueError(
            f"Unknown backbone '{token}', expected one of {sorted(RESNET_TOKENS)}"
        ) from None


def resnet_params(depth: int) -> int:
    """Convolution + batch-norm parameters of a bottleneck ResNet, no classifier."""
    return sum(layer.params for layer in resnet_layers(depth))


def resnet50_params() -> int:
    return resnet_params(50)


def count_head_params(spec: HeadSpec) -> int:
    """Closed-form head parameter count; extent-independent."""
    return sum(layer.params for layer in head_layers(spec, (1, 1)))


def lhr_spec(num_keypoints: int = 17, in_channels: int = 2048, ratio: int = 8) -> HeadSpec:
    return HeadSpec(
        kind=HeadKind.LHR,
        in_channels=in_channels,
        num_keypoints=num_keypoints,
        upsample_ratio=ratio,
    )


def deconv_spec(num_keypoints: int = 17, in_channels: int = 2048, layers: int = 3) -> HeadSpec:
    return HeadSpec(
        kind=HeadKind.DECONV,
        in_channels=in_channels,
        num_keypoints=num_keypoints,
        filters=256,
        kernel_size=4,
        layers=layers,
    )


def _backbone_component(
    backbone: BackboneRef, input_extent: Tuple[int, int]
) -> Tuple[ComponentCost, Tuple[int, int]]:
    if isinstance(backbone, str):
        stride = RESNET_STRIDE
        layers = resnet_layers(_resnet_depth(backbone), input_extent)
    else:
        stride = backbone.total_stride
        layers = toy_backbone_layers(backbone, input_extent)
    h, w = input_extent
    if h % stride or w % stride:
        raise ShapeError(f"Input extent {input_extent} not divisible by backbone stride {stride}")
    return ComponentCost.from_layers("backbone", layers), (h // stride, w // stride)


def complexity_report(
    backbone: BackboneRef,
    head: HeadSpec,
    input_extent: Tuple[int, int] = BASELINE_EXTENT,
    label: str = "",
    published_gflops: Optional[float] = None,
    published_params_m: Optional[float] = None,
) -> ComplexityReport:
    backbone_cost, feature_extent = _backbone_component(backbone, input_extent)
    head_cost = ComponentCost.from_layers("head", head_layers(head, feature_extent))
    return _report(
        label, input_extent, backbone_cost, head_cost, published_gflops, published_params_m
    )


def _report(label, input_extent, backbone_cost, head_cost, gflops=None, params_m=None):
    components = [backbone_cost, head_cost]
    return ComplexityReport(
        label=label,
        convention=CONVENTION,
        input_extent=input_extent,
        components=components,
        total_params=sum(c.params for c in components),
        total_macs=sum(c.macs for c in components),
        published_gflops=gflops,
        published_params_m=params_m,
    )


def count_flops(
    backbone: BackboneRef, head: HeadSpec, input_extent: Tuple[int, int] = BASELINE_EXTENT
) -> int:
    """Total multiply-accumulates of backbone + head at an input extent."""
    return complexity_report(backbone, head, input_extent).total_macs


# (feature extent, published GFLOPs, published params in millions)
RESOLUTION_ABLATION = [
    ((8, 6), 3.8, 25.6),
    ((16, 12), 5.2, 31.9),
    ((32, 24), 6.0, 33.0),
    ((64, 48), 9.0, 34.0),
]


def resolution_ablation_report() -> List[ComplexityReport]:
    """ResNet-50 at 256x192 with 0-3 deconvolutions before an LHR head.

    Every row emits 64x48 heatmaps; the label names the resolution the
    regressor works at.
    """
    tracer = get_tracer(__name__)
    with tracer.start_as_current_span("complexity.resolution_ablation"):
        backbone_cost, feature_extent = _backbone_component("resnet50", BASELINE_EXTENT)
        reports = []
        for deconvs, (extent, gflops, params_m) in enumerate(RESOLUTION_ABLATION):
            head_cost = ComponentCost.from_layers(
                "head", ablation_head_layers(deconvs, feature_extent)
            )
            label = f"{extent[0]}x{extent[1]}"
            reports.append(
                _report(label, BASELINE_EXTENT, backbone_cost, head_cost, gflops, params_m)
            )
        logger.info("Built resolution ablation with %d rows", len(reports))
        return reports


# (backbone, input extent, keypoints, head kind, published GFLOPs, published params)
BACKBONE_COMPARISON: List[Tuple[str, Tuple[int, int], int, HeadKind, float, Optional[float]]] = [
    ("resnet50", (256, 192), 17, HeadKind.DECONV, 9.0, 34.0),
    ("resnet101", (256, 192), 17, HeadKind.DECONV, 12.4, 53.0),
    ("resnet152", (256, 192), 17, HeadKind.DECONV, 15.8, 68.6),
    ("resnet50", (256, 192), 17, HeadKind.LHR, 3.8, 25.7),
    ("resnet101", (256, 192), 17, HeadKind.LHR, 7.2, 44.7),
    ("resnet152", (256, 192), 17, HeadKind.LHR, 10.6, 60.4),
    ("resnet50", (384, 288), 17, HeadKind.DECONV, 20.2, 34.0),
    ("resnet101", (384, 288), 17, HeadKind.DECONV, 27.9, 53.0),
    ("resnet152", (384, 288), 17, HeadKind.DECONV, 35.5, 68.6),
    ("resnet50", (384, 288), 17, HeadKind.LHR, 8.6, 25.7),
    ("resnet101", (384, 288), 17, HeadKind.LHR, 16.2, 44.7),
    ("resnet152", (384, 288), 17, HeadKind.LHR, 23.9, 60.4),
    ("resnet50", (256, 256), 16, HeadKind.DECONV, 12.0, None),
    ("resnet101", (256, 256), 16, HeadKind.DECONV, 16.5, None),
    ("resnet152", (256, 256), 16, HeadKind.DECONV, 21.0, None),
    ("resnet50", (256, 256), 16, HeadKind.LHR, 5.1, None),
    ("resnet101", (256, 256), 16, HeadKind.LHR, 9.6, None),
    ("resnet152", (256, 256), 16, HeadKind.LHR, 14.1, None),
]


def backbone_comparison_report() -> List[ComplexityReport]:
    """LHR and deconv heads on three residual depths and three input geometries."""
    tracer = get_tracer(__name__)
    with tracer.start_as_current_span("complexity.backbone_comparison"):
        reports = []
        for token, extent, n, kind, gflops, params_m in BACKBONE_COMPARISON:
            head = lhr_spec(n) if kind == HeadKind.LHR else deconv_spec(n)
            label = f"{kind.value}-{token}-{extent[0]}x{extent[1]}-n{n}"
            reports.append(complexity_report(token, head, extent, label, gflops, params_m))
        return reports


def budget_summary() -> BudgetSummary:
    """Where the baseline spends its weights and FLOPs, and what LHR saves."""
    lhr = complexity_report("resnet50", lhr_spec(), label="lhr-resnet50")
    deconv = complexity_report("resnet50", deconv_spec(), label="deconv-resnet50")
    lhr_head = lhr.component("head")
    deconv_head = deconv.component("head")
    return BudgetSummary(
        regressor_params_lhr=lhr_head.params,
        regressor_params_deconv=deconv_head.params,
        regressor_reduction=1.0 - lhr_head.params / deconv_head.params,
        total_params_ratio=lhr.total_params / deconv.total_params,
        total_macs_ratio=lhr.total_macs / deconv.total_macs,
        deconv_head_mac_share=deconv_head.macs / deconv.total_macs,
    )


def _fmt_published(value: Optional[float], fmt: str) -> str:
    return "-" if value is None else format(value, fmt)


def render_table(headers: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    """Left-aligned first column, right-aligned numbers."""
    widths = [len(h) for h in headers]
    for row in rows:
        widths = [max(w, len(cell)) for w, cell in zip(widths, row)]

    def line(cells: Sequence[str]) -> str:
        parts = [cells[0].ljust(widths[0])]
        parts += [c.rjust(w) for c, w in zip(cells[1:], widths[1:])]
        return "  ".join(parts).rstrip()

    rule = "  ".join("-" * w for w in widths)
    return "\n".join([line(headers), rule, *(line(r) for r in rows)])


def render_reports(reports: Sequence[ComplexityReport]) -> str:
    headers = ["label", "input", "backbone M", "head M", "params M", "pub M", "GFLOPs", "pub G"]
    rows = []
    for r in reports:
        rows.append(
            [
                r.label,
                f"{r.input_extent[0]}x{r.input_extent[1]}",
                f"{r.component('backbone').params / 1e6:.3f}",
                f"{r.component('head').params / 1e6:.3f}",
                f"{r.params_m:.3f}",
                _fmt_published(r.published_params_m, ".1f"),
                f"{r.gflops:.3f}",
                _fmt_published(r.published_gflops, ".1f"),
            ]
        )
    return f"convention: {CONVENTION}\n" + render_table(headers, rows)


def render_budget(summary: BudgetSummary) -> str:
    rows: List[List[str]] = [
        ["regressor params (LHR)", f"{summary.regressor_params_lhr:,}"],
        ["regressor params (deconv)", f"{summary.regressor_params_deconv:,}"],
        ["regressor weight reduction", f"{summary.regressor_reduction:.1%}"],
        ["total params ratio", f"{summary.total_params_ratio:.1%}"],
        ["total FLOPs ratio", f"{summary.total_macs_ratio:.1%}"],
        ["deconv head FLOP share", f"{summary.deconv_head_mac_share:.1%}"],
    ]
    return render_table(["quantity", "value"], rows)


def report_records(reports: Sequence[ComplexityReport]) -> List[Dict[str, object]]:
    return [r.to_record() for r in reports]
