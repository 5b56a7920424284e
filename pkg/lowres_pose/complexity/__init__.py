"""Analytic parameter and multiply-accumulate accounting."""

from lowres_pose.complexity.layers import (
    CONVENTION,
    ablation_head_layers,
    head_layers,
    resnet_layers,
)
from lowres_pose.complexity.reports import (
    backbone_comparison_report,
    budget_summary,
    complexity_report,
    count_flops,
    count_head_params,
    deconv_spec,
    lhr_spec,
    render_budget,
    render_reports,
    report_records,
    resnet50_params,
    resnet_params,
    resolution_ablation_report,
)

__all__ = [
    "CONVENTION",
    "ablation_head_layers",
    "backbone_comparison_report",
    "budget_summary",
    "complexity_report",
    "count_flops",
    "count_head_params",
    "deconv_spec",
    "head_layers",
    "lhr_spec",
    "render_budget",
    "render_reports",
    "report_records",
    "resnet50_params",
    "resnet_layers",
    "resnet_params",
    "resolution_ablation_report",
]
