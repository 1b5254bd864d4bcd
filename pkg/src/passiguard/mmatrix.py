"""Synthesis and certification of the 2x2 reconfiguration wrapper.

A wrapper M = [[m11, m12], [m21, m22]] installed around a finite-gain stable
controller C (gain bound ``gamma``) relates the controller's ports to the
loop-facing ports by [p; q] = M [v; w], where v/w are C's input/output and
p/q are the wrapped system's input/output.  Under this port assignment the
wrapped system's passivity levels follow from gamma and the entries of M:

* ``design_passive``  m11 = m21, m22 = -m21           -> passive
* ``design_ofp``      m21 >= m22*g, m11 m22 > m12 m21 -> OFP level
                      0.5 (m11/m21 + m12/m22)
* ``design_ifp``      m11 >= m12*g, m12 m21 > m11 m22 -> IFP level
                      0.5 (m21/m11 + m22/m12)
* ``design_ifofp``    m12 = 0, m21 >= m22*g/sqrt(1-a) -> OFP 0.5 m11/m21 and
                      IFP (a/2) m21/m11, with free 0 < a < 1

Each rule admits a feasible set, not a point; the designers pin the free
parameters deterministically and conservatively (factor-2 slack on the gain
inequalities, 5% inflation where gamma enters a denominator-critical spot)
and re-check every inequality before returning.  Certification is a
trajectory spot check: drive the wrapped controller with a probe battery
and require the claimed dissipation inequality to hold at every truncation.

Known soundness limit, flagged rather than hidden: the passive rule forces
|m22| = m11, so its gain inequality m11 >= |m22|*gamma can only hold for
gamma <= 1 -- wrapping cannot passivate a gain-exceeding-one controller with
this entry pattern.  ``design_passive`` still returns the conventional
parameterization for larger gamma but attaches a warning, and certification
will fail for controllers that actually exercise the excess gain.  (As
printed in the source material the constraint chain requires m22*gamma > 0
with m22 < 0, which nothing satisfies; the |m22| reading used here is the
documented resolution.)
"""

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels as K
from .linsys import StateSpaceModel, UnstableSystemError, is_hurwitz

__all__ = [
    "MCase",
    "MMatrix",
    "IDENTITY",
    "InfeasibleDesignError",
    "design_passive",
    "design_ofp",
    "design_ifp",
    "design_ifofp",
    "constraint_margins",
    "compose",
    "wrapped_controller_ss",
    "wrapped_gain",
    "make_probes",
    "certify",
    "CertificationReport",
]

IFOFP_A_SLACK = 0.05
IFOFP_PRODUCT_CAP = 0.25 - 0.01  # feasibility boundary minus margin
GAIN_SLACK = 1.05


class InfeasibleDesignError(ValueError):
    """Requested targets violate a structural bound of the synthesis rule."""


class MCase(enum.Enum):
    IDENTITY = "identity"
    PASSIVE = "passive"
    OFP = "ofp"
    IFP = "ifp"
    IFOFP = "ifofp"


@dataclass(frozen=True)
class MMatrix:
    """Wrapper entries plus the synthesis record they were produced under.

    ``nu_level`` / ``rho_level`` are the claimed input-feedforward /
    output-feedback levels of the wrapped system (None when the case makes
    no claim for that index).  ``a`` is the free parameter of the combined
    case.  ``warning`` carries non-fatal synthesis caveats (target shrink,
    infeasible gain regime).
    """

    m11: float
    m12: float
    m21: float
    m22: float
    case: MCase = MCase.IDENTITY
    a: float = None
    gamma_used: float = None
    rho_target: float = None
    nu_target: float = None
    rho_level: float = None
    nu_level: float = None
    warning: str = None

    def __post_init__(self):
        if self.det == 0.0:
            raise ValueError("M must be invertible (det != 0)")

    @property
    def det(self) -> float:
        return self.m11 * self.m22 - self.m12 * self.m21

    @property
    def elements(self):
        return (self.m11, self.m12, self.m21, self.m22)

    def as_array(self) -> np.ndarray:
        return np.array([[self.m11, self.m12], [self.m21, self.m22]])


IDENTITY = MMatrix(1.0, 0.0, 0.0, 1.0, case=MCase.IDENTITY,
                   rho_level=None, nu_level=None)


def constraint_margins(m: MMatrix) -> dict:
    """Slack of every inequality of the matrix's synthesis case.

    Keys map to the case's conditions; each value must be >= 0 (equalities
    are folded in as -|lhs - rhs|).  Margins use the documented |m22|
    reading for the passive case.
    """
    g = m.gamma_used
    out = {}
    if m.case == MCase.PASSIVE:
        out["m11 == m21"] = -abs(m.m11 - m.m21)
        out["m22 == -m21"] = -abs(m.m22 + m.m21)
        out["m11 >= |m22|*gamma"] = m.m11 - abs(m.m22) * g
        out["|m22|*gamma > 0"] = abs(m.m22) * g
    elif m.case == MCase.OFP:
        out["m21 >= m22*gamma"] = m.m21 - m.m22 * g
        out["m22*gamma > 0"] = m.m22 * g
        out["m11*m22 > m12*m21"] = m.m11 * m.m22 - m.m12 * m.m21
        out["m12*m21 > 0"] = m.m12 * m.m21
    elif m.case == MCase.IFP:
        out["m11 >= m12*gamma"] = m.m11 - m.m12 * g
        out["m12*gamma > 0"] = m.m12 * g
        out["m12*m21 > m11*m22"] = m.m12 * m.m21 - m.m11 * m.m22
        out["m11*m22 > 0"] = m.m11 * m.m22
    elif m.case == MCase.IFOFP:
        root = math.sqrt(1.0 - m.a)
        out["m11 > 0"] = m.m11
        out["m12 == 0"] = -abs(m.m12)
        out["m21 >= m22*gamma/sqrt(1-a)"] = m.m21 - m.m22 * g / root
        out["m22*gamma/sqrt(1-a) > 0"] = m.m22 * g / root
        out["0 < a"] = m.a
        out["a < 1"] = 1.0 - m.a
    return out


def _require_feasible(m: MMatrix) -> MMatrix:
    margins = constraint_margins(m)
    bad = {k: v for k, v in margins.items() if v < 0.0}
    if bad:
        raise InfeasibleDesignError(f"synthesized M violates its case constraints: {bad}")
    return m


def design_passive(gamma: float) -> MMatrix:
    """Wrapper targeting plain passivity of the wrapped system.

    Only sound for gamma <= 1 (see module docstring); beyond that the
    conventional entries are returned with a warning attached instead of an
    error, since the rule admits no alternative.
    """
    if gamma <= 0:
        raise ValueError("gamma must be > 0")
    c = GAIN_SLACK * gamma
    warning = None
    if gamma > 1.0:
        warning = (
            f"passive case infeasible for gamma={gamma:g} > 1: the rule pins "
            "|m22| = m11, so m11 >= |m22|*gamma cannot hold"
        )
    return MMatrix(m11=c, m12=0.0, m21=c, m22=-c, case=MCase.PASSIVE,
                   gamma_used=gamma, rho_level=0.0, nu_level=0.0,
                   warning=warning)


def design_ofp(gamma: float, rho_target: float) -> MMatrix:
    """Wrapper with output-feedback level >= rho_target."""
    if gamma <= 0:
        raise ValueError("gamma must be > 0")
    if rho_target <= 0:
        raise InfeasibleDesignError("rho_target must be > 0 (case needs positive excess)")
    m22 = 1.0
    m21 = 2.0 * gamma
    m12 = m22 * rho_target
    m11 = max(2.0 * m12 * m21 / m22, rho_target * m21)
    level = 0.5 * (m11 / m21 + m12 / m22)
    m = MMatrix(m11, m12, m21, m22, case=MCase.OFP, gamma_used=gamma,
                rho_target=rho_target, rho_level=level)
    if level < rho_target:
        raise InfeasibleDesignError("achieved OFP level below target")
    return _require_feasible(m)


def design_ifp(gamma: float, nu_target: float) -> MMatrix:
    """Wrapper with input-feedforward level >= nu_target."""
    if gamma <= 0:
        raise ValueError("gamma must be > 0")
    if nu_target <= 0:
        raise InfeasibleDesignError("nu_target must be > 0 (case needs positive excess)")
    m11 = 1.0
    m12 = 1.0 / (2.0 * gamma)
    m22 = m12 * nu_target
    m21 = max(2.0 * m11 * m22 / m12, nu_target)
    level = 0.5 * (m21 / m11 + m22 / m12)
    m = MMatrix(m11, m12, m21, m22, case=MCase.IFP, gamma_used=gamma,
                nu_target=nu_target, nu_level=level)
    if level < nu_target:
        raise InfeasibleDesignError("achieved IFP level below target")
    return _require_feasible(m)


def design_ifofp(gamma: float, rho_target: float, nu_target: float) -> MMatrix:
    """Wrapper with both levels; joint targets capped by rho*nu < 1/4.

    The combined case's levels multiply to a/4 < 1/4, so infeasible target
    pairs are shrunk proportionally to the boundary (minus margin) and the
    shrink is reported in the warning.
    """
    if gamma <= 0:
        raise ValueError("gamma must be > 0")
    if rho_target <= 0 or nu_target <= 0:
        raise InfeasibleDesignError("both targets must be > 0")
    warning = None
    product = rho_target * nu_target
    if product >= IFOFP_PRODUCT_CAP:
        scale = math.sqrt(IFOFP_PRODUCT_CAP / product)
        warning = (
            f"targets ({rho_target:g}, {nu_target:g}) exceed the structural "
            f"product bound 1/4; shrunk by {scale:.6g}"
        )
        rho_target *= scale
        nu_target *= scale
        product = rho_target * nu_target
    a = min(4.0 * product * (1.0 + IFOFP_A_SLACK), 0.99)
    if not 0.0 < a < 1.0:
        raise InfeasibleDesignError(
            f"no admissible free parameter: rho*nu = {product:g} vs bound 0.25")
    m22 = 1.0
    m21 = m22 * gamma / math.sqrt(1.0 - a) * GAIN_SLACK
    m11 = 2.0 * rho_target * m21
    delta0 = 0.5 * m11 / m21
    eps0 = 0.5 * a * m21 / m11
    if eps0 < nu_target:
        raise InfeasibleDesignError(
            f"achieved IFP level {eps0:g} below target {nu_target:g} "
            f"(product bound {IFOFP_PRODUCT_CAP:g})")
    m = MMatrix(m11, 0.0, m21, m22, case=MCase.IFOFP, a=a, gamma_used=gamma,
                rho_target=rho_target, nu_target=nu_target,
                rho_level=delta0, nu_level=eps0, warning=warning)
    return _require_feasible(m)


def compose(outer: MMatrix, inner: MMatrix) -> MMatrix:
    """One wrapper equivalent to installing ``outer`` around ``inner``.

    Wrapping composes by matrix product (outer @ inner on the port vectors).
    Entries are rescaled to unit max-magnitude: for a linear controller the
    wrapped loop's signals are invariant under positive rescaling of M, and
    normalizing keeps long chains of re-syntheses numerically bounded.  The
    synthesis record (case, targets, claimed levels) is the outer wrap's,
    since its claims hold around the composed inner system.
    """
    prod = outer.as_array() @ inner.as_array()
    scale = np.max(np.abs(prod))
    if scale == 0.0:
        raise ValueError("composition produced the zero matrix")
    prod = prod / scale
    return replace(outer, m11=float(prod[0, 0]), m12=float(prod[0, 1]),
                   m21=float(prod[1, 0]), m22=float(prod[1, 1]))


def wrapped_controller_ss(m: MMatrix, controller: StateSpaceModel) -> StateSpaceModel:
    """State-space realization of the wrapped controller (loop ports p -> q)."""
    if not controller.is_siso:
        raise ValueError("controller must be SISO")
    Ac, Bc = controller.A, controller.B
    Cc, Dc = controller.C, float(controller.D[0, 0])
    d1 = m.m11 + m.m12 * Dc
    if abs(d1) < 1e-12:
        raise ValueError("wrapper ill-posed against this controller feedthrough")
    d2 = m.m21 + m.m22 * Dc
    A0 = Ac - Bc @ Cc * (m.m12 / d1)
    B0 = Bc / d1
    C0 = (m.m22 - d2 * m.m12 / d1) * Cc
    D0 = [[d2 / d1]]
    return StateSpaceModel(A0, B0, C0, D0)


def wrapped_gain(m: MMatrix, controller_response: np.ndarray,
                 safety: float = GAIN_SLACK) -> float:
    """Grid gain bound of the wrapped controller from C's frequency response.

    The wrap acts on the response as the linear fractional map
    (m21 + m22 C)/(m11 + m12 C); the sweep maximum is inflated by ``safety``
    for use as the next synthesis gamma.
    """
    c = controller_response
    sig = (m.m21 + m.m22 * c) / (m.m11 + m.m12 * c)
    return float(np.max(np.abs(sig))) * safety


# -- trajectory certification -------------------------------------------


def make_probes(dt: float = 1e-3, t_end: float = 10.0, seed: int = 2718):
    """Deterministic battery of 20 probe signals: steps, ramps, sines,
    chirp, square, pulses and smoothed seeded noise."""
    n = int(round(t_end / dt))
    t = np.arange(n) * dt
    rng = np.random.default_rng(seed)
    probes = [
        ("step+1", np.ones(n)),
        ("step-0.7", -0.7 * np.ones(n)),
        ("ramp-sat", np.clip(t / 2.0, 0.0, 1.0)),
        ("sine0.2", np.sin(0.2 * t)),
        ("sine0.5", np.sin(0.5 * t)),
        ("sine1", np.sin(1.0 * t)),
        ("sine2", np.sin(2.0 * t)),
        ("sine5", np.sin(5.0 * t)),
        ("sine10", np.sin(10.0 * t)),
        ("cos3", np.cos(3.0 * t)),
        ("decay-sine", np.exp(-0.3 * t) * np.sin(2.0 * t)),
        ("chirp", np.sin((0.1 + (10.0 - 0.1) * t / (2.0 * t_end)) * t)),
        ("two-tone", np.sin(0.7 * t) + 0.5 * np.sin(4.3 * t)),
        ("square4", np.where((t % 4.0) < 2.0, 1.0, -1.0)),
        ("pulses", np.where((t % 2.5) < 0.5, 1.0, 0.0)),
        ("offset-sine", 0.4 + np.sin(1.3 * t)),
    ]
    alpha = dt / (dt + 0.05)  # ~20 rad/s first-order smoothing
    for i in range(4):
        white = rng.standard_normal(n)
        smooth = np.empty(n)
        acc = 0.0
        for k_ in range(n):
            acc += alpha * (white[k_] - acc)
            smooth[k_] = acc
        probes.append((f"noise{i}", smooth))
    return probes


@dataclass(frozen=True)
class CertificationReport:
    case: MCase
    eps_used: float
    delta_used: float
    residuals: tuple  # (probe name, min prefix supply integral)
    min_residual: float
    passed: bool
    failures: tuple

    def __str__(self):
        state = "PASS" if self.passed else "CERTIFICATION FAILURE"
        lines = [f"{state}: case={self.case.value} eps={self.eps_used:g} "
                 f"delta={self.delta_used:g} min_residual={self.min_residual:.3e}"]
        for name, r in self.residuals:
            lines.append(f"  {name:12s} {r: .6e}")
        return "\n".join(lines)


def certify(m: MMatrix, controller: StateSpaceModel, probes=None,
            dt: float = 1e-3, tol: float = 1e-6) -> CertificationReport:
    """Spot-check the wrapped system's claimed dissipativity on trajectories.

    Each probe drives the wrapped controller's loop-facing input from rest;
    the supply integral for the claimed levels is evaluated at every
    truncation time and its minimum must stay above -tol.
    """
    if not controller.is_siso:
        raise ValueError("controller must be SISO")
    if not is_hurwitz(controller):
        raise UnstableSystemError("certification requires a stable controller")
    if probes is None:
        probes = make_probes(dt=dt)
    eps = m.nu_level if m.nu_level is not None else 0.0
    delta = m.rho_level if m.rho_level is not None else 0.0

    Ac = np.ascontiguousarray(controller.A)
    Bc = np.ascontiguousarray(controller.B[:, 0] if controller.n_states else np.zeros(0))
    Cc = np.ascontiguousarray(controller.C[0, :] if controller.n_states else np.zeros(0))
    Dc = float(controller.D[0, 0])
    if abs(m.m11 + m.m12 * Dc) < 1e-12:
        raise ValueError("wrapper ill-posed against this controller feedthrough")
    nc = controller.n_states
    scratch = [np.zeros(nc) for _ in range(5)]
    msd_dummy = np.zeros(3)

    results = []
    for name, p_seq in probes:
        p_seq = np.ascontiguousarray(p_seq, dtype=float)
        xc = np.zeros(nc)
        q = np.empty_like(p_seq)
        K.wrapped_probe_rollout(Ac, Bc, Cc, Dc, m.m11, m.m12, m.m21, m.m22,
                                p_seq, dt, K.M_RK4, xc, q,
                                scratch[0], scratch[1], scratch[2], scratch[3],
                                scratch[4], msd_dummy)
        coef = 1.0 + eps * delta
        integrand = coef * p_seq * q - delta * q * q - eps * p_seq * p_seq
        prefix = np.concatenate(
            [[0.0], np.cumsum(0.5 * dt * (integrand[1:] + integrand[:-1]))])
        results.append((name, float(np.min(prefix))))

    min_res = min(r for _, r in results)
    failures = tuple(name for name, r in results if r < -tol)
    return CertificationReport(case=m.case, eps_used=eps, delta_used=delta,
                               residuals=tuple(results), min_residual=min_res,
                               passed=not failures, failures=failures)
