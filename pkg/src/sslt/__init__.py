"""Correlation-filter tracking refined by a saliency-supervised online segmenter."""

from .config import ConfigError, PipelineConfig, load_config
from .dataset import GroundTruth, Sequence, SynthConfig, load_sequence, split_challenge_suite, synthesize
from .geometry import Box, GeometryConfig, clamp_min, expand, refine_from_mask, tight_box
from .metrics import SegReport, dp_curve, mask_iou, op_curve, s_measure
from .pipeline import SequenceResult, run_sequence, tracker_only, write_result
from .saliency import SaliencyConfig, saliency_map, select_pseudo_label
from .segment import SegModel, TrainConfig, fine_tune, init_model, loss_and_grad, segment_crop
from .tracker import TrackerConfig, track_init, track_sequence, track_step

__version__ = "0.1.0"
