"""Evaluation and complexity result models."""

from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, Field, field_validator, model_validator


class EvalResult(BaseModel):
    """Keypoint accuracy summary of one evaluation pass."""

    ap: float = Field(..., ge=0.0, le=1.0)
    ap50: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    ap75: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    ar: float = Field(..., ge=0.0, le=1.0)
    pckh_per_keypoint: List[float] = Field(default_factory=list)
    pckh_mean: float = Field(default=0.0, ge=0.0, le=1.0)
    ap_per_threshold: Dict[str, float] = Field(default_factory=dict)

    @field_validator("pckh_per_keypoint")
    @classmethod
    def check_range(cls, v: List[float]) -> List[float]:
        if any(not 0.0 <= x <= 1.0 for x in v):
            raise ValueError("PCKh values must lie in [0, 1]")
        return v

    @model_validator(mode="after")
    def check_order(self) -> "EvalResult":
        """AP averaged over thresholds can never exceed AP at the loosest one.

        Checked against the smallest evaluated threshold, so a threshold set
        without 0.50 (and no AP50) still validates.
        """
        if not self.ap_per_threshold:
            return self
        loosest = min(self.ap_per_threshold, key=float)
        if self.ap > self.ap_per_threshold[loosest] + 1e-12:
            raise ValueError(
                f"AP {self.ap} exceeds AP {self.ap_per_threshold[loosest]} at OKS {loosest}"
            )
        return self


class LayerCost(BaseModel):
    """Analytic cost of one layer."""

    name: str
    kind: str  # conv, deconv, bn
    in_channels: int
    out_channels: int
    kernel_size: int
    out_extent: Tuple[int, int]
    params: int
    macs: int


class ComponentCost(BaseModel):
    """Aggregated cost of a backbone or head."""

    name: str
    params: int
    macs: int
    layers: List[LayerCost] = Field(default_factory=list)

    @classmethod
    def from_layers(cls, name: str, layers: List[LayerCost]) -> "ComponentCost":
        return cls(
            name=name,
            params=sum(layer.params for layer in layers),
            macs=sum(layer.macs for layer in layers),
            layers=layers,
        )


class ComplexityReport(BaseModel):
    """Parameter and MAC totals of a backbone + head at an input extent."""

    label: str
    convention: str
    input_extent: Tuple[int, int]
    components: List[ComponentCost]
    total_params: int
    total_macs: int
    published_gflops: Optional[float] = None
    published_params_m: Optional[float] = None

    @model_validator(mode="after")
    def check_totals(self) -> "ComplexityReport":
        """Totals are the component sums."""
        if self.total_params != sum(c.params for c in self.components):
            raise ValueError("total_params differs from the component sum")
        if self.total_macs != sum(c.macs for c in self.components):
            raise ValueError("total_macs differs from the component sum")
        return self

    @property
    def gflops(self) -> float:
        return self.total_macs / 1e9

    @property
    def params_m(self) -> float:
        return self.total_params / 1e6

    def component(self, name: str) -> ComponentCost:
        for c in self.components:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_record(self) -> Dict[str, object]:
        """Flat record for the run ledger."""
        return {
            "label": self.label,
            "convention": self.convention,
            "input_extent": list(self.input_extent),
            "total_params": self.total_params,
            "total_macs": self.total_macs,
            "gflops": round(self.gflops, 4),
            **{f"{c.name}_params": c.params for c in self.components},
            **{f"{c.name}_macs": c.macs for c in self.components},
        }


class BudgetSummary(BaseModel):
    """Weight and FLOP shares of the LHR and deconvolution heads on ResNet-50."""

    regressor_params_lhr: int
    regressor_params_deconv: int
    regressor_reduction: float = Field(..., ge=0.0, le=1.0)
    total_params_ratio: float = Field(..., gt=0.0)
    total_macs_ratio: float = Field(..., gt=0.0)
    deconv_head_mac_share: float = Field(..., ge=0.0, le=1.0)
