"""Dark channel prior dehazing refined by multiple linear regression, plus
the inverse model for adding uniform synthetic haze to clean images."""

from hazeforge.dcp import DcpConfig, dehaze_dcp
from hazeforge.mlr import RegressionParams, TrainConfig, dehaze_mldcp, train
from hazeforge.synth import HazeSpec, synthesize

__all__ = [
    "DcpConfig",
    "HazeSpec",
    "RegressionParams",
    "TrainConfig",
    "dehaze_dcp",
    "dehaze_mldcp",
    "synthesize",
    "train",
]

__version__ = "0.1.0"
