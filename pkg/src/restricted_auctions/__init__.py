"""Revenue-optimal menus for a single buyer under restricted allocation sets.

Expected revenue of a menu equals the integral of its consumer surplus
against a transformed signed measure; prices are calibrated so every
option's cell integrates to zero, and optimality is certified on a grid by
the min-cost transport dual between the positive and negative parts.
"""

from .allocation import AllocationSet
from .calibrate import calibrate_extrapolated, calibrate_prices
from .certify import (CERTIFIED, INCONCLUSIVE, REFUTED, CertificateReport, MatchingCondition,
                      certify_menu, check_matching_condition, stochastic_dominance_1d)
from .config import InstanceConfig, load_config
from .density import DensitySpec
from .errors import (ConvergenceError, InputError, SolverError, StructuralError,
                     UnsupportedError)
from .measure import SignedMeasure, integrate, total_mass, transform
from .menu import Menu, cell_measures, revenue_direct, revenue_via_measure
from .presets import get_preset
from .transport import discretize_dual, recovered_mechanism, solve

__version__ = "0.1.0"
