"""Learning deterministic labelled MDPs from exact teachers, samples and passive traces."""

from .alergia import Fpta, build_fpta, exact_frequency_fpta, ioalergia_learn
from .estimators import ExactLStarMDP, IOAlergia, SamplingLStarMDP
from .exact import ExactObservationTable, ExactTeacher, learn_exact
from .io import MdpParseError, export_dot, load_mdp, parse_mdp, save_mdp, serialize_mdp
from .mdp import (
    CHAOS,
    InvalidMdpError,
    Mdp,
    MemorylessScheduler,
    PropertySpec,
    RandomizedScheduler,
    are_equivalent,
    equivalence_check,
    isomorphic,
    minimize,
    path_probability,
    validate,
)
from .metrics import DistanceConfig, bisim_distance, kantorovich, pmax_bounded
from .sampling import LearnerConfig, SampledObservationTable, learn_sampling
from .stats import hoeffding_bound, hoeffding_diff
from .sul import Sul, build_coffee_machine, builtin_model, load_gridworld, random_deterministic_mdp
from .teacher import ExactFrequencyTeacher, SampleStore, SamplingTeacher, TeacherConfig

__version__ = "0.1.0"
