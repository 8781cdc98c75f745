"""Flow-synthesis visual servoing: radial flow targets, a CEM flow-servo controller and
flow-balance baselines, flown in a box-world simulator."""

from ._core import *  # noqa: F401,F403
from ._core import (
    CameraModel,
    CemConfig,
    Pose,
    Scene,
    VelocityCommand,
    load_scenario,
    run_episode,
    run_suite,
)

__version__ = "0.1.0"
