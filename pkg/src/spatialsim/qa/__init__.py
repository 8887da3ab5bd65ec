"""Question-answer synthesis: templates, generators, gates, and choice balancing."""

from .choices import LetterBalancer, finalize_pool, make_multiple_choice
from .gates import QualityConfig, quality_gate
from .generators import generate_candidates, salient_objects
from .geometry import classify_direction, closest_point_distance, ego_frame_angle
from .items import QTYPES, Provenance, QAItem

__all__ = [
    "LetterBalancer", "Provenance", "QAItem", "QTYPES", "QualityConfig", "classify_direction",
    "closest_point_distance", "ego_frame_angle", "finalize_pool", "generate_candidates",
    "make_multiple_choice", "quality_gate", "salient_objects",
]
