"""Frequency-splitting MPC motion cueing for a two-axis tilt/translation platform."""

from .freq_split import ReferenceSet, SplitConfig, build_references, split
from .mca import McaConfig, MotionCueing, tick
from .model import GRAVITY, AxisState, ControlInput, PlatformState, SpecificForce, output_map, step_dynamics
from .mpc import BrakingParams, Limits, MpcSolution, MpcSolver, Weights, build_problem
from .plant import IdealPlant, SurrogatePlant, TrajectoryLog, run_closed_loop
from .scaling import recommend_scale
from .scenarios import Scenario, get_scenario, load_drive_csv, make_multisine, make_step, make_synthetic_slalom

__version__ = "0.1.0"
