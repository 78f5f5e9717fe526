"""Rate-independent evolutions of a scalar state with viscous corrections.

The package builds the energy/dissipation system, evaluates the corrected
one-sided slopes and their monotone envelopes, constructs optimal jump
transitions, and computes evolutions either by the incremental minimization
scheme (and its limit) or directly for monotone loadings.
"""

from .errors import *  # noqa: F401,F403
from .system import (
    AdmissibilityReport,
    Dissipation,
    EnergyDensity,
    Loading,
    PowerLaw,
    RISystem,
    ViscousCorrection,
    check_admissibility,
)
from .numerics import ArgminSet, MinimizeSettings, coercive_bracket, global_min
from .moreau import is_stable_by_definition, moreau_yosida, residual, residuals_batch
from .slopes import *  # noqa: F401,F403
from .envelopes import MonotoneEnvelope, build_envelope, contact_selection, p_left, p_right, q_left, q_right
from .transitions import *  # noqa: F401,F403
from .evolution import *  # noqa: F401,F403

__version__ = "0.1.0"
