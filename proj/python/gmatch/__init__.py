"""Geometry-constrained incremental keypoint matching for 6DoF pose."""

from ._core import (
    CameraIntrinsics,
    CandidatePair,
    ErrorCode,
    FeatureMetric,
    GMatchError,
    IcpConfig,
    IcpResult,
    KeypointSet,
    LoadedKeypoints,
    MatchConfig,
    MatchState,
    PipelineConfig,
    PipelineResult,
    PoseError,
    PoseFile,
    RigidTransform,
    ScenePreset,
    StageTimings,
    SynthParams,
    SynthScene,
    back_project,
    brute_force_max_consistent,
    candidate_pairs,
    estimate_pose,
    evaluate_pose,
    gmatch,
    icp_refine,
    kabsch_solve,
    load_keypoints,
    load_pose,
    recover_transform_constructive,
    save_keypoints,
    save_pose,
    save_scene,
    seed_hypotheses,
    synth_intrinsics,
    synth_scene,
    verify_consistency,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
