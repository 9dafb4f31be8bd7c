"""Decohered TFIM density matrices as filtered Choi-doubled MPS."""

from .errors import ConvergenceError, DimensionError, FitError, InputError
from .models import ChannelSpec, ModelParams, QatParams, map_px, tau_of_p
from .mps import EXACT, MpsState, TruncationPolicy
from .dmrg import DmrgConfig, DmrgReport, find_ground_state, prepare_initial_choi_state
from .filtering import FilteredState, filter_state
from .observables import CorrelatorKind, correlator, entropy_cut, fit_ceff, purity_log, susceptibility

__version__ = "0.1.0"
