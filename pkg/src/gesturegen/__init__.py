"""Speech-driven co-speech gesture synthesis toolkit.

Parses motion-capture/audio/transcript corpora, extracts frame-aligned
acoustic and semantic features, trains a windowed bidirectional-GRU
generator against a 1-D convolutional discriminator with a three-term
adversarial loss, and emits generated upper-body motion plus objective
metrics and ablations.
"""

from .audio import AudioTrack, audio_features, read_wav, read_wav_file
from .bvh import (
    DEFAULT_JOINT_NAMES,
    JointHierarchy,
    JointSelection,
    MotionClip,
    clip_euler_to_expmap,
    clip_expmap_to_euler,
    clip_positions,
    forward_kinematics,
    parse_bvh,
    resample_fps,
    select_joints,
    write_bvh,
)
from .config import PipelineConfig, TrainConfig, load_config, parse_config
from .errors import GestureGenError
from .features import FeatureSequence, build_model_input, read_ggf, write_ggf
from .metrics import MetricsReport, motion_statistics, rmse
from .models import (
    Discriminator,
    GenerationContext,
    Generator,
    ModelDims,
    Normalization,
    discriminator_forward,
    generate_sequence,
    generator_step,
    init_params,
)
from .rotations import (
    euler_to_expmap,
    expmap_continuity_fix,
    expmap_to_euler,
)
from .textfeat import (
    HashEmbedding,
    Transcript,
    align_text_to_frames,
    embed_words,
    parse_transcript,
)
from .training import (
    DatasetSplit,
    discriminator_loss,
    generator_loss,
    split_dataset,
    train_epoch,
)

__version__ = "0.1.0"
