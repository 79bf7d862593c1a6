"""Device-free human counting from a single WiFi link's blockage pattern.

Pipeline: an RSS trace (or a simulated walk) becomes a binary blockage
sequence; single-person sequences are superposed and balanced into a
multi-class training set; an LSTM classifier maps a sequence to the
number of people in the area.

Modules:
- core: domain types, windowing, shared file formats
- blockage: RSS thresholding into blockage sequences
- synthesis: training-set generation and class balancing
- nn: from-scratch LSTM classifier (BPTT + SGDM)
- sim: random-waypoint motion and synthetic RSS ground truth
- metrics: counting-error metrics and evaluation reports
- cli: the ``linkcount`` command
"""

from .blockage import DetectorParams, detect_blockages, mean_rss
from .core import (
    BlockageSequence,
    ConfigError,
    FileFormatError,
    LabeledDataset,
    LabeledSample,
    LinkCountError,
    ModelMismatchError,
    RssTrace,
    SystemConfig,
    split_into_windows,
    timestamps_to_sequence,
)
from .metrics import EvalReport, absolute_counting_error, error_cdf, exact_accuracy
from .nn import (
    LstmModel,
    LstmParams,
    OptimizerState,
    TrainHyper,
    backward,
    cross_entropy,
    forward,
    load_model,
    lstm_step,
    predict,
    save_model,
    sgdm_step,
    train,
)
from .sim import (
    GroundTruth,
    SimScenario,
    crossings,
    generate_ground_truth,
    simulate_walk,
    synthesize_rss,
)
from .synthesis import (
    SynthesisPlan,
    balance_class,
    build_dataset,
    flip_random_bit,
    superpose,
    unbalanced_class_size,
    zero_class_set,
)

__version__ = "0.1.0"

__all__ = [
    "BlockageSequence",
    "ConfigError",
    "DetectorParams",
    "EvalReport",
    "FileFormatError",
    "GroundTruth",
    "LabeledDataset",
    "LabeledSample",
    "LinkCountError",
    "LstmModel",
    "LstmParams",
    "ModelMismatchError",
    "OptimizerState",
    "RssTrace",
    "SimScenario",
    "SynthesisPlan",
    "SystemConfig",
    "TrainHyper",
    "absolute_counting_error",
    "backward",
    "balance_class",
    "build_dataset",
    "cross_entropy",
    "crossings",
    "detect_blockages",
    "error_cdf",
    "exact_accuracy",
    "flip_random_bit",
    "forward",
    "generate_ground_truth",
    "load_model",
    "lstm_step",
    "mean_rss",
    "predict",
    "save_model",
    "sgdm_step",
    "simulate_walk",
    "split_into_windows",
    "superpose",
    "synthesize_rss",
    "timestamps_to_sequence",
    "train",
    "unbalanced_class_size",
    "zero_class_set",
]
