"""Python surface of the two-pass grounding toolkit.

Everything here is implemented in C++ and exposed through the `_core`
extension: sampling plans, model-output parsers, the two confidence gates,
the benchmark metric, and the bootstrap statistics.
"""

from twopass._core import (  # noqa: F401
    CollisionType,
    SamplingPlan,
    Source,
    VideoRecord,
    bootstrap_ci,
    build_pass1_plan,
    build_pass2_plan,
    build_type_clip_plan,
    extract_json_block,
    gate1_temporal,
    gate2_spatial,
    harmonic_mean3,
    naive_fill,
    normalize_type,
    paired_bootstrap,
    parse_pass1,
    parse_pass2,
    render_prompt,
    score_pair,
    spatial_score,
    temporal_score,
    type_name,
    type_score,
)

__all__ = [
    "CollisionType",
    "SamplingPlan",
    "Source",
    "VideoRecord",
    "bootstrap_ci",
    "build_pass1_plan",
    "build_pass2_plan",
    "build_type_clip_plan",
    "extract_json_block",
    "gate1_temporal",
    "gate2_spatial",
    "harmonic_mean3",
    "naive_fill",
    "normalize_type",
    "paired_bootstrap",
    "parse_pass1",
    "parse_pass2",
    "render_prompt",
    "score_pair",
    "spatial_score",
    "temporal_score",
    "type_name",
    "type_score",
]
