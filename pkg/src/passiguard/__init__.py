"""passiguard: closed-loop simulation with data-driven fault detection and
controller reconfiguration via passivity indices."""

from ._backend import backend_name
from .linsys import (FrequencySweep, RationalTF, StateSpaceModel, l2_gain,
                     tf_to_ss, true_indices_lti)
from .mmatrix import (MMatrix, certify, design_ifofp, design_ifp, design_ofp,
                      design_passive)
from .passivity import (DetectionVerdict, PassivityEstimate, Thresholds,
                        detect, verify_dissipativity)
from .plants import (FaultKind, FaultSchedule, MassDamperSpring, plant_ex1,
                     plant_ex2, plant_ex3, plant_from_tf)
from .reconfig import ReconfigState, install, tick
from .scenario import (RunLog, Scenario, load, load_bundled, loads, report,
                       run)
from .simcore import (DelayLine, LoopStepper, Method, SolverConfig, step_ode,
                      wire_nominal, wire_wrapped)

__version__ = "0.1.0"
