"""Achievable rates of a diffusive molecular link with a resetting absorbing receiver."""
from .channel import (ChannelError, ChannelImpulseResponse, MemoryOverflowError, SystemParams,
                      compute_cir, effective_memory, expected_cumulative_absorbed,
                      hitting_probability, validate_gaussian)
from .detection import (Detector, TransitionTable, build_transition_table, conditional_moments,
                        q_function, transition_probability)
from .kernels import BACKEND
from .mutual_info import SCENARIOS, MIResult, Scenario, mutual_information
from .optimize import (CapacityResult, ThresholdSearch, air, air_surface, capacity,
                       capacity_sweep, optimize_threshold)
from .sources import (IndependentSource, MarkovSource, binary_entropy, entropy_rate,
                      sequence_probability, stationary_distribution)

__version__ = "0.1.0"
