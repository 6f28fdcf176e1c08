"""Pose descriptions, pose-set sampling, frame retrieval and benchmark scoring.

Modules: ``kinematics`` (skeletons, forward kinematics, yaw alignment),
``posecode`` and ``describer`` (rule-based pose text), ``sampler``
(furthest-point subsets), ``retrieval`` (frame scoring, NMS, segmentation),
``metrics`` (Top@1, IoU accuracy, TAL mAP), ``pres3`` (summary-first
annotation pipeline), ``formats``, ``mixing`` and ``cli``.
"""
from .errors import DegeneratePoseError, InputError, PipelineError

__version__ = "0.1.0"

__all__ = ["DegeneratePoseError", "InputError", "PipelineError", "__version__"]
