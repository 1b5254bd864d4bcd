"""Online passivity-index estimation from input-output data.

The estimator maintains the running integrals int(e*y), int(y*y), int(e*e)
by trapezoidal quadrature (compensated summation bounds drift over millions
of steps) and exposes the ratio estimates

    rho_bar = int(e*y) / int(y*y)      nu_bar = int(e*y) / int(e*e)

which upper-bound the plant's true output-feedback / input-feedforward
indices for trajectories from rest.  Ratios are undefined until the
denominators carry real signal energy; detection additionally waits out a
startup warmup so near-zero denominators cannot fire spurious faults.

An optional moving window keeps the integrals from saturating on long runs:
per-step increments are retired once they age past the window.
"""

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K

__all__ = [
    "PassivityEstimate",
    "Thresholds",
    "DetectionVerdict",
    "detect",
    "verify_dissipativity",
]


class DetectionVerdict(enum.IntEnum):
    NOMINAL = K.V_NOMINAL
    RHO_LOW = K.V_RHO_LOW
    NU_LOW = K.V_NU_LOW
    BOTH_LOW = K.V_BOTH_LOW
    INDETERMINATE = K.V_INDETERMINATE


@dataclass(frozen=True)
class Thresholds:
    """Safe floor values for the index estimates plus the compensation margin."""

    rho0: float = -0.15
    nu0: float = -0.15
    eps_margin: float = 0.05

    def __post_init__(self):
        if not self.eps_margin > 0:
            raise ValueError("eps_margin must be > 0")


class PassivityEstimate:
    """Sequential estimator of the passivity-index ratios.

    Parameters
    ----------
    window:
        Moving-window length in seconds, or None for cumulative integrals.
    eps_den:
        Denominator energy below which a ratio is reported as undefined.
    warmup:
        Time before which detection treats the estimate as indeterminate.
    dt_hint:
        Expected sample spacing; sizes the window ring buffer.
    """

    def __init__(self, window=None, eps_den=1e-9, warmup=1.0, dt_hint=1e-3):
        if window is not None and window <= 0:
            raise ValueError("window must be positive seconds or None")
        self.window = window
        self.eps_den = float(eps_den)
        self.warmup = float(warmup)
        self._state = np.zeros(K.EST_SLOTS)
        if window is None:
            self._win = np.zeros((1, 4))
            self._win_meta = np.zeros(2, dtype=np.int64)
            self._window_arg = 0.0
        else:
            cap = int(math.ceil(window / dt_hint)) + 8
            self._win = np.zeros((cap, 4))
            self._win_meta = np.zeros(2, dtype=np.int64)
            self._window_arg = float(window)

    # -- integral views -------------------------------------------------

    @property
    def I_ey(self) -> float:
        return float(self._state[0])

    @property
    def I_yy(self) -> float:
        return float(self._state[2])

    @property
    def I_ee(self) -> float:
        return float(self._state[4])

    @property
    def t(self) -> float:
        """Time of the most recent accepted sample (starts at 0)."""
        return float(self._state[9])

    @property
    def signal_fault(self) -> bool:
        """True once a non-finite sample froze the estimator."""
        return self._state[10] != 0.0

    @property
    def rho_bar(self):
        return float(self._state[0] / self._state[2]) if self._state[2] > self.eps_den else None

    @property
    def nu_bar(self):
        return float(self._state[0] / self._state[4]) if self._state[4] > self.eps_den else None

    @property
    def warmup_elapsed(self) -> float:
        """Seconds of data accumulated since the last integral reset."""
        return float(self._state[9] - self._state[11])

    @property
    def ready(self) -> bool:
        """Both ratios defined and the warmup period has elapsed."""
        return (self.warmup_elapsed >= self.warmup
                and self._state[2] > self.eps_den
                and self._state[4] > self.eps_den)

    # -- updates ----------------------------------------------------------

    def update(self, e: float, y: float, dt: float) -> "PassivityEstimate":
        """Fold one (e, y) sample into the integrals; returns self."""
        if dt <= 0:
            raise ValueError("dt must be > 0")
        K.est_update(self._state, self._win, self._win_meta,
                     self._window_arg, float(e), float(y), float(dt))
        return self

    def reset_integrals(self) -> "PassivityEstimate":
        """Zero the integrals and window; elapsed time and fault flag remain.

        Used after a reconfiguration so the estimates reflect the loop as
        reconfigured instead of carrying momentum from pre-install data
        (the integrator-reset remedy; both ratios report undefined until
        fresh signal energy accumulates).
        """
        t, fault = self._state[9], self._state[10]
        self._state[:] = 0.0
        self._state[9] = t
        self._state[10] = fault
        self._state[11] = t  # re-arm the detection warmup
        self._win[:] = 0.0
        self._win_meta[:] = 0
        return self

    def update_batch(self, e, y, dt):
        """Feed whole traces; returns (rho_bar, nu_bar) arrays per sample."""
        e = np.ascontiguousarray(e, dtype=float)
        y = np.ascontiguousarray(y, dtype=float)
        if e.shape != y.shape:
            raise ValueError("e and y traces must have equal length")
        rho = np.empty_like(e)
        nu = np.empty_like(e)
        K.est_rollout(self._state, self._win, self._win_meta,
                      self._window_arg, e, y, float(dt), self.eps_den, rho, nu)
        return rho, nu


def detect(est: PassivityEstimate, th: Thresholds) -> DetectionVerdict:
    """Algorithm verdict from the current estimates against the thresholds."""
    state = est._state
    rho, nu = K.est_ratios(state, est.eps_den)
    code = K.detect_code(rho, nu, th.rho0, th.nu0, state[9] - state[11],
                         est.warmup)
    return DetectionVerdict(int(code))


def verify_dissipativity(u, y, dt: float, eps: float, delta: float) -> float:
    """Supply integral of the combined-index rate over a uniform-dt trace.

    Integrates (1 + eps*delta) u y - delta y^2 - eps u^2 by the trapezoid
    rule.  For a trajectory from rest (zero stored energy) a nonnegative
    value is consistent with the system being simultaneously input-feedforward
    passive of level eps and output-feedback passive of level delta; with
    eps = delta = 0 this reduces to the plain passivity integral int(u*y).
    """
    u = np.ascontiguousarray(u, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    if u.shape != y.shape or u.ndim != 1 or u.size == 0:
        raise ValueError("trace must be two equal-length nonempty vectors")
    if dt <= 0:
        raise ValueError("dt must be > 0")
    return float(K.supply_integral(u, y, float(dt), float(eps), float(delta)))
