"""Zero-shot action recognition over precomputed features.

Text and video embed into one unit-sphere space; recognition is nearest
class by fused similarity. Subpackages cover training, evaluation, classic
baselines, benchmark split construction, feature-file IO, and the class
description annotation pipeline.
"""

__version__ = "0.1.0"

from .config import TrainConfig, config_hash, load_config
from .model import JointModel
from .text_embed import (Description, HashedTokenEncoder, embed_class,
                         embed_concept_sequence, load_descriptions,
                         save_descriptions)
from .video_embed import (ConceptVocabulary, FeatureRecord, channel_gate,
                          embed_objects, embed_st, embed_video, top_objects)

__all__ = [
    "TrainConfig", "config_hash", "load_config", "JointModel",
    "Description", "HashedTokenEncoder", "embed_class",
    "embed_concept_sequence", "load_descriptions", "save_descriptions",
    "ConceptVocabulary", "FeatureRecord", "channel_gate", "embed_objects",
    "embed_st", "embed_video", "top_objects",
]
