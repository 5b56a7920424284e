"""Heatmap targets and decoding."""

from lowres_pose.heatmaps.codec import (
    HeatmapSet,
    align_flipped,
    count_pos_neg,
    decode,
    decode_maps,
    flip_average,
    gaussian_maps,
    gen_target,
    heatmap_targets,
    instance_score,
    pairs_to_permutation,
    pos_neg_ratio,
    positive_radius_sq,
)

__all__ = [
    "HeatmapSet",
    "align_flipped",
    "count_pos_neg",
    "decode",
    "decode_maps",
    "flip_average",
    "gaussian_maps",
    "gen_target",
    "heatmap_targets",
    "instance_score",
    "pairs_to_permutation",
    "pos_neg_ratio",
    "positive_radius_sq",
]
