"""Gridworld novelty-detection testbed: python surface over the C++ core."""

from novelgrid._core import (
    Context,
    DetectorSuite,
    Environment,
    EpisodeTrace,
    ReplayBuffer,
    Rng,
    WorldModel,
    auc,
    calibrate,
    cmtre_calibrate,
    collect_steps,
    cross_entropy,
    cusum_update,
    environment_ids,
    kl_divergence,
    mahalanobis,
    mare,
    merge_buffers,
    method_names,
    random_action,
    run_episode,
)

__all__ = [
    "Context",
    "DetectorSuite",
    "Environment",
    "EpisodeTrace",
    "ReplayBuffer",
    "Rng",
    "WorldModel",
    "auc",
    "calibrate",
    "cmtre_calibrate",
    "collect_steps",
    "cross_entropy",
    "cusum_update",
    "environment_ids",
    "kl_divergence",
    "mahalanobis",
    "mare",
    "merge_buffers",
    "method_names",
    "random_action",
    "run_episode",
]
