"""Detection-and-reconfiguration state machine.

Per tick the verdict from the passivity estimator selects one of three
compensation branches (or none):

* rho estimate below threshold, nu healthy -> strengthen the wrapper's
  input-feedforward level so nu_c(new) + rho_bar clears the margin;
* nu estimate below threshold, rho healthy -> mirror with the
  output-feedback level;
* both below -> combined design targeting both sums.

Watermarks rho_min / nu_min hold the lowest estimates seen; a branch only
re-synthesizes on a strict undercut ("already compensated" otherwise), so
the number of installs is bounded by the number of strict watermark drops.

Each re-synthesis designs a fresh wrapper around the original controller
(gain bound ``gamma`` supplied by the caller) and REPLACES the installed
one; targets ratchet with the watermarks, so compensation only ever
strengthens while a fault deepens.  Synthesis or well-posedness failures
log a CRITICAL event and keep the previous wrapper installed -- removing a
working wrapper mid-fault is strictly worse than keeping it.
"""

import math
from dataclasses import dataclass, field

from .mmatrix import (IDENTITY, InfeasibleDesignError, MMatrix,
                      design_ifofp, design_ifp, design_ofp)
from .passivity import DetectionVerdict, PassivityEstimate, Thresholds, detect

__all__ = ["FaultEvent", "ReconfigState", "tick", "install"]

WELLPOSED_TOL = 1e-9

ACTION_NONE = "none"
ACTION_CRITICAL = "critical"


@dataclass(frozen=True)
class FaultEvent:
    t: float
    verdict: DetectionVerdict
    rho_bar: float
    nu_bar: float
    action: str
    m: MMatrix
    detail: str = ""


@dataclass
class ReconfigState:
    rho_min: float = math.inf
    nu_min: float = math.inf
    current_m: MMatrix = IDENTITY
    fault_log: list = field(default_factory=list)
    manual_override: bool = False

    @property
    def n_installs(self) -> int:
        return sum(1 for ev in self.fault_log if ev.action.startswith("install"))

    def last_install(self):
        for ev in reversed(self.fault_log):
            if ev.action.startswith("install"):
                return ev
        return None


def _nanfloat(v):
    return float("nan") if v is None else float(v)


def tick(state: ReconfigState, est: PassivityEstimate, th: Thresholds,
         gamma: float, t: float, controller_feedthrough: float = None):
    """One pass of the monitoring loop; returns the new wrapper M or None.

    ``gamma`` must bound the gain of the controller the wrapper goes
    around.  When ``controller_feedthrough`` is given, a candidate that
    would make the loop algebra ill-posed is rejected as CRITICAL and the
    previous wrapper stays.
    """
    if state.manual_override:
        return None
    verdict = detect(est, th)
    if verdict in (DetectionVerdict.NOMINAL, DetectionVerdict.INDETERMINATE):
        return None

    rho_bar = _nanfloat(est.rho_bar)
    nu_bar = _nanfloat(est.nu_bar)

    def log(action, m, detail=""):
        state.fault_log.append(FaultEvent(t=t, verdict=verdict, rho_bar=rho_bar,
                                          nu_bar=nu_bar, action=action, m=m,
                                          detail=detail))

    # compensation levels: the loop-health sums index_plant + level_wrapper
    # must clear eps_margin, so the target is eps_margin - estimate; the
    # floor keeps targets positive when a (positive) threshold is crossed
    # while the estimate itself is still positive.
    def target(estimate):
        return max(th.eps_margin - estimate, th.eps_margin)

    synth = None
    action = ACTION_NONE
    try:
        if verdict == DetectionVerdict.RHO_LOW:
            if rho_bar < state.rho_min:
                state.rho_min = rho_bar
                synth = design_ifp(gamma, nu_target=target(rho_bar))
                action = "install_ifp"
        elif verdict == DetectionVerdict.NU_LOW:
            if nu_bar < state.nu_min:
                state.nu_min = nu_bar
                synth = design_ofp(gamma, rho_target=target(nu_bar))
                action = "install_ofp"
        else:  # BOTH_LOW
            if rho_bar < state.rho_min or nu_bar < state.nu_min:
                state.rho_min = rho_bar
                state.nu_min = nu_bar
                synth = design_ifofp(gamma,
                                     rho_target=target(nu_bar),
                                     nu_target=target(rho_bar))
                action = "install_ifofp"
    except (InfeasibleDesignError, ValueError) as exc:
        log(ACTION_CRITICAL, state.current_m, detail=f"synthesis failed: {exc}")
        return None

    if synth is None:
        log(ACTION_NONE, state.current_m)
        return None

    if controller_feedthrough is not None:
        d1 = synth.m11 + synth.m12 * controller_feedthrough
        if abs(d1) < WELLPOSED_TOL:
            log(ACTION_CRITICAL, state.current_m,
                detail=f"install refused: m11 + m12*Dc = {d1:.3e}")
            return None
    state.current_m = synth
    log(action, synth, detail=synth.warning or "")
    return synth


def install(loop, m: MMatrix, t: float):
    """Swap the loop's wrapper coefficients between solver steps.

    Controller and plant state are untouched; the new coefficients govern
    from the next step on.  Raises WellPosednessError (from the stepper) if
    the wrapper cannot be solved against the controller's feedthrough.
    """
    loop.install(m)
    return loop
