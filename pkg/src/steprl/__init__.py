"""Success-rate aware multi-turn policy optimisation on a synthetic environment."""

from .advantage import combine_final, decompose, sr_weighted_advantage, tgrpo_advantages
from .allocator import AllocationPlan, allocate, allocate_uniform, replacement_probability
from .augment import AugmentationGroup, aug_advantages, build_group, select_for_augmentation
from .core import State, Step, StepSample, Trajectory, truncate_history
from .envsim import SyntheticEnv, SyntheticTaskSpec, default_suite
from .policy import TabularSoftmaxPolicy, UpdateConfig, update
from .tracker import SuccessRateTable, cache, init_table, update_round

__version__ = "0.1.0"
