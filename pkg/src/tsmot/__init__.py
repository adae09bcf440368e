"""Interleaved teacher/student multi-object tracking over simulated detectors.

A heavy *teacher* detector runs every K frames; a light *student* runs in
between, helped by the teacher's object-center attention extrapolated forward
in time. Detections from both feed one appearance + IoU tracker, scored with
CLEAR-MOT and IDF1.
"""

from .core import BoundingBox, Detection, FrameDetections, Track, TrackedBox, iou
from .scheduler import PolicyKind, SchedulerPolicy, plan, run_pipeline, simulated_throughput
from .simworld import DetectorProfile, GroundTruthSequence, WorldConfig, detect, generate_world
from .metrics import MotReport, clear_mot, evaluate, idf1

__version__ = "0.1.0"

__all__ = [
    "BoundingBox", "Detection", "FrameDetections", "Track", "TrackedBox", "iou",
    "PolicyKind", "SchedulerPolicy", "plan", "run_pipeline", "simulated_throughput",
    "DetectorProfile", "GroundTruthSequence", "WorldConfig", "detect", "generate_world",
    "MotReport", "clear_mot", "evaluate", "idf1",
]
