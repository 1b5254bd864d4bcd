"""Example plants and their fault models as time-scheduled dynamics morphing.

Three stock plants are provided:

* ``plant_ex1`` -- the second-order LTI system (s^2+3s+2)/(s^2+s+2) whose
  input passes through a time-varying delay that ramps in per the schedule
  (denial-of-service / actuator-lag style fault).
* ``plant_ex2`` -- the same system in its explicit realization
  dx1 = -x1 - 2 x2 + 2u, dx2 = x1, y = x1 + u, whose second state equation
  swaps instantaneously to x1 - 0.5 x2^2 at the scheduled time.
* ``plant_ex3`` -- a base-excited mass-damper-spring in relative coordinates
  z = (y-u, dy-du) whose cubic spring coefficient alpha ramps negative
  (softening spring).  The base-motion derivatives entering the dynamics are
  formed by backward differences of the commanded displacement, which keeps
  the model causal on the solver grid.

Ramped quantities (delay, alpha) interpolate linearly between t_start and
t_full and hold the final magnitude afterwards; the dynamics swap is binary.
All plants share a linear output map y = Cp x + Dp u_in, which is what lets
the loop's feedthrough algebra stay closed-form even for the nonlinear ones.
"""

import enum
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .linsys import RationalTF, tf_to_ss

__all__ = [
    "FaultKind",
    "FaultSchedule",
    "MassDamperSpring",
    "Plant",
    "plant_ex1",
    "plant_ex2",
    "plant_ex3",
    "plant_from_tf",
    "NO_FAULT",
]


class FaultKind(enum.IntEnum):
    NONE = K.F_NONE
    INPUT_DELAY_RAMP = K.F_DELAY
    DYNAMICS_SWAP = K.F_SWAP
    SPRING_SOFTENING = K.F_SOFTEN


@dataclass(frozen=True)
class FaultSchedule:
    kind: FaultKind
    t_start: float = 0.0
    t_full: float = 0.0
    magnitude: float = 0.0

    def __post_init__(self):
        if self.t_start > self.t_full:
            raise ValueError("t_start must be <= t_full")
        if self.kind == FaultKind.INPUT_DELAY_RAMP and self.magnitude < 0:
            raise ValueError("delay magnitude must be >= 0 seconds")
        if self.kind == FaultKind.SPRING_SOFTENING and self.magnitude > 0:
            raise ValueError("softening magnitude must be <= 0 (alpha < 0)")
        if self.kind == FaultKind.DYNAMICS_SWAP and self.magnitude not in (0.0, 1.0):
            raise ValueError("swap magnitude is binary (0 disables, 1 enables)")

    @property
    def active(self) -> bool:
        return self.kind != FaultKind.NONE and self.magnitude != 0.0

    def delay_at(self, t: float) -> float:
        return K.delay_at(int(self.kind), self.t_start, self.t_full, self.magnitude, t)

    def alpha_at(self, t: float) -> float:
        return K.alpha_at(int(self.kind), self.t_start, self.t_full, self.magnitude, t)

    def swapped_at(self, t: float) -> bool:
        return bool(K.swap_active(int(self.kind), self.t_start, self.magnitude, t))


NO_FAULT = FaultSchedule(kind=FaultKind.NONE)


@dataclass(frozen=True)
class MassDamperSpring:
    m: float
    c: float
    k: float
    alpha: float = 0.0

    def __post_init__(self):
        if self.m <= 0:
            raise ValueError("mass must be > 0")
        if self.c < 0:
            raise ValueError("damping must be >= 0")
        if self.k <= 0:
            raise ValueError("stiffness must be > 0")


@dataclass
class Plant:
    """Simulatable plant: dynamics kind + matrices + fault schedule.

    ``Ap``/``Bp`` drive the LTI kind; ``msd`` holds (m, c, k) for the
    mass-damper-spring kind; the output map y = Cp x + Dp u_in applies to
    all kinds.  Instances are cheap immutable descriptions; the loop stepper
    owns the evolving state.
    """

    kind: int
    Ap: np.ndarray
    Bp: np.ndarray
    Cp: np.ndarray
    Dp: float
    schedule: FaultSchedule = NO_FAULT
    msd: np.ndarray = field(default_factory=lambda: np.zeros(3))
    name: str = ""

    def __post_init__(self):
        self.Ap = np.ascontiguousarray(np.atleast_2d(self.Ap), dtype=float)
        self.Bp = np.ascontiguousarray(np.asarray(self.Bp, dtype=float).reshape(-1))
        self.Cp = np.ascontiguousarray(np.asarray(self.Cp, dtype=float).reshape(-1))
        self.Dp = float(self.Dp)
        self.msd = np.ascontiguousarray(np.asarray(self.msd, dtype=float).reshape(3))

    @property
    def n_states(self) -> int:
        return 2 if self.kind in (K.P_EX2, K.P_EX3) else self.Ap.shape[0]

    def delay_at(self, t: float) -> float:
        return self.schedule.delay_at(t)

    def alpha_at(self, t: float) -> float:
        return self.schedule.alpha_at(t)

    def swapped_at(self, t: float) -> bool:
        return self.schedule.swapped_at(t)

    def deriv(self, t: float, x, u: float, udd: float = 0.0) -> np.ndarray:
        """State derivative at (t, x, u); udd is the held base acceleration (ex3)."""
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        K.plant_deriv(self.kind, self.Ap, self.Bp, x, float(u),
                      self.swapped_at(t), self.alpha_at(t), self.msd,
                      float(udd), out)
        return out

    def max_delay(self) -> float:
        if self.schedule.kind == FaultKind.INPUT_DELAY_RAMP:
            return self.schedule.magnitude
        return 0.0


# paper realization of (s^2+3s+2)/(s^2+s+2):
#   dx1 = -x1 - 2 x2 + 2u, dx2 = x1, y = x1 + u
_EX_A = np.array([[-1.0, -2.0], [1.0, 0.0]])
_EX_B = np.array([2.0, 0.0])
_EX_C = np.array([1.0, 0.0])
_EX_D = 1.0


def plant_ex1(schedule: FaultSchedule) -> Plant:
    """Second-order LTI plant with a scheduled input-delay ramp."""
    if schedule.kind not in (FaultKind.NONE, FaultKind.INPUT_DELAY_RAMP):
        raise ValueError("plant_ex1 takes an input_delay_ramp (or none) schedule")
    return Plant(kind=K.P_LTI, Ap=_EX_A, Bp=_EX_B, Cp=_EX_C, Dp=_EX_D,
                 schedule=schedule, name="ex1")


def plant_ex2(schedule: FaultSchedule) -> Plant:
    """Same nominal dynamics; dx2 becomes x1 - 0.5 x2^2 at the swap time."""
    if schedule.kind not in (FaultKind.NONE, FaultKind.DYNAMICS_SWAP):
        raise ValueError("plant_ex2 takes a dynamics_swap (or none) schedule")
    return Plant(kind=K.P_EX2, Ap=_EX_A, Bp=_EX_B, Cp=_EX_C, Dp=_EX_D,
                 schedule=schedule, name="ex2")


def plant_ex3(params: MassDamperSpring, schedule: FaultSchedule) -> Plant:
    """Base-excited mass-damper-spring with a scheduled softening spring."""
    if schedule.kind not in (FaultKind.NONE, FaultKind.SPRING_SOFTENING):
        raise ValueError("plant_ex3 takes a spring_softening (or none) schedule")
    return Plant(kind=K.P_EX3, Ap=np.zeros((2, 2)), Bp=np.zeros(2),
                 Cp=np.array([1.0, 0.0]), Dp=1.0,
                 schedule=schedule, msd=np.array([params.m, params.c, params.k]),
                 name="ex3")


def plant_from_tf(tf: RationalTF, schedule: FaultSchedule = NO_FAULT) -> Plant:
    """User LTI plant from a proper transfer function (optionally delayed)."""
    if schedule.kind not in (FaultKind.NONE, FaultKind.INPUT_DELAY_RAMP):
        raise ValueError("transfer-function plants support input delay faults only")
    ss = tf_to_ss(tf)
    return Plant(kind=K.P_LTI, Ap=ss.A,
                 Bp=ss.B[:, 0] if ss.n_states else np.zeros(0),
                 Cp=ss.C[0, :] if ss.n_states else np.zeros(0),
                 Dp=float(ss.D[0, 0]), schedule=schedule, name="tf")
