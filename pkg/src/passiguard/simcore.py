"""Deterministic fixed-step closed-loop simulation.

The loop stepper advances one plant/controller pair on a fixed grid with
zero-order-hold inputs.  Feedthrough algebra (including the reconfiguration
wrapper) is solved in closed form each step, so runs are bit-reproducible.
A wrapper of identity reproduces the nominal feedback loop exactly: both
constructors share one code path, which is what makes the equivalence exact
rather than approximate.

Wrapper port convention: the 2x2 wrapper M maps the controller's ports onto
the loop-facing ports, [loop_in; loop_out] = M [ctrl_in; ctrl_out].  Under
this assignment the synthesized wrappers in `mmatrix` carry their certified
passivity levels into the loop; see that module for the design rules.
"""

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .linsys import StateSpaceModel

__all__ = [
    "SolverConfig",
    "Method",
    "DelayLine",
    "DivergenceSignal",
    "WellPosednessError",
    "StepRecord",
    "LoopStepper",
    "step_ode",
    "delayed_read",
    "wire_nominal",
    "wire_wrapped",
    "DIVERGENCE_THRESHOLD",
]

DIVERGENCE_THRESHOLD = 1e6
WELLPOSED_TOL = 1e-9


class Method(enum.IntEnum):
    RK4 = K.M_RK4
    EULER = K.M_EULER


class WellPosednessError(ValueError):
    """The feedthrough algebraic loop has no (bounded) solution."""


class DivergenceSignal(RuntimeError):
    """State left the finite/bounded region; an expected outcome, not a bug."""

    def __init__(self, t, norm):
        self.t = t
        self.norm = norm
        super().__init__(f"state diverged at t={t:.6g} (|x|_inf={norm:.3g})")


@dataclass(frozen=True)
class SolverConfig:
    dt: float = 1e-3
    t_end: float = 120.0
    method: Method = Method.RK4

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if self.t_end < self.dt:
            raise ValueError("t_end must be >= dt")

    @property
    def n_steps(self) -> int:
        """Whole steps fitting in [0, t_end); a trailing partial step is dropped."""
        return int(math.floor(self.t_end / self.dt + 1e-9))


def step_ode(f, x, u, dt: float, method: Method = Method.RK4):
    """Advance dx/dt = f(x, u) one fixed step with the input held constant.

    Raises DivergenceSignal when the step produces a non-finite state.
    """
    x = np.asarray(x, dtype=float)
    if method == Method.EULER:
        x_next = x + dt * np.asarray(f(x, u), dtype=float)
    else:
        k1 = np.asarray(f(x, u), dtype=float)
        k2 = np.asarray(f(x + 0.5 * dt * k1, u), dtype=float)
        k3 = np.asarray(f(x + 0.5 * dt * k2, u), dtype=float)
        k4 = np.asarray(f(x + dt * k3, u), dtype=float)
        x_next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(x_next)):
        norm = float(np.max(np.abs(x_next[np.isfinite(x_next)]))) if np.any(np.isfinite(x_next)) else math.inf
        raise DivergenceSignal(t=math.nan, norm=max(norm, math.inf))
    return x_next


class DelayLine:
    """Uniformly-sampled signal history supporting interpolated delayed reads.

    Samples older than the capacity (max expected delay plus margin) are
    evicted.  Reads before the first sample's time return 0 (zero initial
    rest); reads past the newest sample hold its value.
    """

    def __init__(self, capacity: float):
        if capacity <= 0:
            raise ValueError("capacity must be positive seconds")
        self.capacity = float(capacity)
        self._t = []
        self._v = []

    def push(self, t: float, value: float):
        if self._t and t <= self._t[-1]:
            raise ValueError("timestamps must be strictly increasing")
        self._t.append(float(t))
        self._v.append(float(value))
        cutoff = t - self.capacity
        drop = 0
        while drop < len(self._t) - 1 and self._t[drop + 1] <= cutoff:
            drop += 1
        if drop:
            del self._t[:drop]
            del self._v[:drop]

    def read(self, t: float, tau: float) -> float:
        if tau < 0:
            raise ValueError("tau must be >= 0")
        if tau > self.capacity:
            raise ValueError(
                f"requested delay {tau:.3g}s exceeds buffer capacity {self.capacity:.3g}s"
            )
        tq = t - tau
        if tq < 0.0 or not self._t:
            return 0.0
        return float(np.interp(tq, self._t, self._v))


def delayed_read(line: DelayLine, t: float, tau: float) -> float:
    """Interpolated value of the buffered signal at time t - tau."""
    return line.read(t, tau)


@dataclass(frozen=True)
class StepRecord:
    """Per-step loop signals; u is the feedback entering the error junction."""

    t: float
    r: float
    e: float
    y: float
    u: float
    ctrl_in: float


IDENTITY_M = (1.0, 0.0, 0.0, 1.0)


def _m_elements(m):
    if m is None:
        return IDENTITY_M
    if hasattr(m, "m11"):
        return (float(m.m11), float(m.m12), float(m.m21), float(m.m22))
    m11, m12, m21, m22 = (float(v) for v in m)
    return (m11, m12, m21, m22)


def check_well_posed(m, controller_feedthrough: float, plant_feedthrough: float = 0.0):
    """Validate the wrapper/feedthrough algebra; raises WellPosednessError."""
    m11, m12, m21, m22 = _m_elements(m)
    dc = float(controller_feedthrough)
    d1 = m11 + m12 * dc
    if abs(d1) < WELLPOSED_TOL:
        raise WellPosednessError(
            f"wrapper ill-posed: m11 + m12*Dc = {d1:.3e} (|.| < {WELLPOSED_TOL:g})"
        )
    d2 = m21 + m22 * dc
    den = 1.0 + plant_feedthrough * d2 / d1
    if abs(den) < WELLPOSED_TOL:
        raise WellPosednessError(
            f"loop ill-posed: 1 + Dp*(m21 + m22*Dc)/(m11 + m12*Dc) = {den:.3e}"
        )
    return d1


@dataclass
class LoopStepper:
    """Stateful one-loop simulator; see `wire_nominal` / `wire_wrapped`.

    Not thread-safe; run distinct steppers on distinct threads if needed.
    """

    plant: object
    controller: StateSpaceModel
    reference: object  # callable t -> float
    solver: SolverConfig = field(default_factory=SolverConfig)
    m: tuple = IDENTITY_M
    div_threshold: float = DIVERGENCE_THRESHOLD

    def __post_init__(self):
        if not self.controller.is_siso:
            raise ValueError("controller must be SISO")
        self.m = _m_elements(self.m)
        self._Ac = np.ascontiguousarray(self.controller.A)
        self._Bc = np.ascontiguousarray(self.controller.B[:, 0])
        self._Cc = np.ascontiguousarray(self.controller.C[0, :])
        self._Dc = float(self.controller.D[0, 0])
        check_well_posed(self.m, self._Dc, self.plant.Dp)
        self.k = 0
        self.xp = np.zeros(self.plant.n_states)
        self.xc = np.zeros(self.controller.n_states)
        cap = max(self.solver.n_steps + 2, 16)
        self._ehist = np.zeros(cap)
        n = self.plant.n_states
        nc = self.controller.n_states
        self._sp = [np.zeros(n) for _ in range(5)]
        self._sc = [np.zeros(nc) for _ in range(5)]

    @property
    def t(self) -> float:
        return self.k * self.solver.dt

    def install(self, m) -> None:
        """Swap wrapper coefficients between steps (states untouched)."""
        m = _m_elements(m)
        check_well_posed(m, self._Dc, self.plant.Dp)
        self.m = m

    def step(self) -> StepRecord:
        dt = self.solver.dt
        k = self.k
        t = k * dt
        if k >= self._ehist.shape[0] - 1:
            self._ehist = np.concatenate([self._ehist, np.zeros(self._ehist.shape[0])])
        r = float(self.reference(t))
        tau = self.plant.delay_at(t)
        m11, m12, m21, m22 = self.m
        pout = K.dot1(self.plant.Cp, self.xp)
        cout = K.dot1(self._Cc, self.xc)
        y, v, w, u, e, e_d = K.loop_signals(pout, cout, self.plant.Dp, self._Dc,
                                            m11, m12, m21, m22,
                                            r, tau, self._ehist, k, dt)

        swapped = self.plant.swapped_at(t)
        alpha = self.plant.alpha_at(t)
        udd = 0.0
        if self.plant.kind == K.P_EX3:
            em1 = self._ehist[k - 1] if k >= 1 else 0.0
            em2 = self._ehist[k - 2] if k >= 2 else 0.0
            udd = (e - 2.0 * em1 + em2) / (dt * dt)
        sp, sc = self._sp, self._sc
        K.advance_state(self.plant.kind, self.plant.Ap, self.plant.Bp,
                        self.xp, e_d, swapped, alpha, self.plant.msd, udd,
                        dt, int(self.solver.method),
                        sp[0], sp[1], sp[2], sp[3], sp[4])
        K.advance_state(K.P_LTI, self._Ac, self._Bc,
                        self.xc, v, False, 0.0, self.plant.msd, 0.0,
                        dt, int(self.solver.method),
                        sc[0], sc[1], sc[2], sc[3], sc[4])
        self._ehist[k] = e
        self.k = k + 1

        finite = np.isfinite(e) and np.isfinite(y) and np.isfinite(u)
        norm = 0.0
        for arr in (self.xp, self.xc):
            if arr.size:
                a = float(np.max(np.abs(arr)))
                if not np.isfinite(a):
                    finite = False
                norm = max(norm, a)
        if not finite or norm > self.div_threshold:
            raise DivergenceSignal(t=t, norm=norm)
        return StepRecord(t=t, r=r, e=e, y=y, u=u, ctrl_in=v)

    def run(self, n_steps=None):
        """Step repeatedly; returns the list of records (may raise DivergenceSignal)."""
        if n_steps is None:
            n_steps = self.solver.n_steps
        return [self.step() for _ in range(n_steps)]


def wire_nominal(plant, controller: StateSpaceModel, reference,
                 solver: SolverConfig = None) -> LoopStepper:
    """Nominal feedback loop: e = r - u_c, plant input e, controller input y."""
    return LoopStepper(plant=plant, controller=controller, reference=reference,
                       solver=solver or SolverConfig())


def wire_wrapped(plant, controller: StateSpaceModel, m, reference,
                 solver: SolverConfig = None) -> LoopStepper:
    """Feedback loop with the reconfiguration wrapper installed around C.

    With m = identity the stepper is the nominal loop, sample for sample.
    """
    return LoopStepper(plant=plant, controller=controller, reference=reference,
                       solver=solver or SolverConfig(), m=_m_elements(m))
