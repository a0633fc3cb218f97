"""soundseg: synthetic triplet datasets and an audio-aware query
transformer for sounding-object segmentation.
"""

from .audio import AudioClip, SpectrogramConfig, log_mel_spectrogram
from .clips import FrameClip
from .config import ModelConfig, OptimConfig, RunConfig, load_config
from .masks import BinaryMask, MaskRLE, resize_mask, rle_decode, rle_encode
from .metrics import EvalAccumulator, aggregate, f_measure, iou
from .model import SoundingObjectSegmenter, build_model
from .objective import CostConfig, MatchResult, dice_cost, focal_cost, match, sound_cost, training_loss
from .ontology import AliasTable, load_alias_table, normalize_label
from .synthesis import (
    DatasetManifest,
    TripletSample,
    compose_triplets,
    read_manifest,
    split_manifest,
    write_manifest,
)

__version__ = "0.1.0"
