"""Declarative scenarios: config parsing, run orchestration and reporting.

Config format is sectioned key-value text (UTF-8)::

    # comment lines start with '#' or ';'
    [section]
    key = value

Recognized sections/keys are listed in ``SCHEMA``.  Unknown sections or keys
are hard errors with line diagnostics -- silent defaults in safety tooling
hide typos in threshold names.  Values are floats, integers, booleans
(on/off/true/false), bare words, or whitespace-separated float lists
(polynomial coefficients, descending powers of s).

A run produces a uniform-dt table logged at every solver step plus an event
list; both serialize to CSV with LF endings, a mandatory header row and 15
significant digits, so identical configs reproduce byte-identical files.
"""

import enum
import hashlib
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from ._backend import backend_name
from .linsys import (DEFAULT_SWEEP, RationalTF, freq_response_grid, is_hurwitz,
                     tf_to_ss)
from .mmatrix import IDENTITY, MMatrix, wrapped_gain
from .passivity import DetectionVerdict, PassivityEstimate, Thresholds
from .plants import (FaultKind, FaultSchedule, MassDamperSpring, Plant,
                     plant_ex1, plant_ex2, plant_ex3, plant_from_tf)
from .reconfig import ReconfigState, tick
from .simcore import (DIVERGENCE_THRESHOLD, Method, SolverConfig,
                      check_well_posed)

__all__ = [
    "ConfigError",
    "ReferenceKind",
    "ReferenceSpec",
    "Scenario",
    "RunLog",
    "RunSummary",
    "load",
    "loads",
    "load_bundled",
    "bundled_names",
    "run",
    "report",
    "LOG_COLUMNS",
    "EVENT_COLUMNS",
]

LOG_COLUMNS = ["t", "r", "e", "y", "u", "rho_bar", "nu_bar", "verdict",
               "m11", "m12", "m21", "m22", "diverged"]
EVENT_COLUMNS = ["t", "verdict", "rho_bar", "nu_bar", "action",
                 "m11", "m12", "m21", "m22"]

BUNDLED = ("ex1_delay", "ex2_swap", "ex3_spring")


class ConfigError(ValueError):
    """Scenario config violates the schema; message carries line/field info."""


class ReferenceKind(enum.IntEnum):
    STEP = K.R_STEP
    SQUARE = K.R_SQUARE
    SINE = K.R_SINE


@dataclass(frozen=True)
class ReferenceSpec:
    kind: ReferenceKind = ReferenceKind.SQUARE
    amplitude: float = 1.0
    period: float = 20.0
    offset: float = 0.0

    def __post_init__(self):
        if self.kind != ReferenceKind.STEP and self.period <= 0:
            raise ValueError("reference period must be > 0")

    def __call__(self, t: float) -> float:
        return K.ref_value(int(self.kind), self.amplitude, self.period,
                           self.offset, t)


@dataclass(frozen=True)
class Scenario:
    name: str
    controller: RationalTF
    plant_kind: str = "ex1"
    plant_tf: RationalTF = None
    msd: MassDamperSpring = None
    reference: ReferenceSpec = ReferenceSpec()
    fault: FaultSchedule = FaultSchedule(FaultKind.NONE)
    thresholds: Thresholds = Thresholds()
    solver: SolverConfig = SolverConfig()
    window: float = None
    eps_den: float = 1e-9
    warmup: float = 1.0
    reset_on_install: bool = True
    mitigation: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.plant_kind not in ("ex1", "ex2", "ex3", "tf"):
            raise ConfigError(f"unknown plant kind {self.plant_kind!r}")
        if self.plant_kind == "tf" and self.plant_tf is None:
            raise ConfigError("plant kind 'tf' requires num/den")
        if self.plant_kind == "ex3" and self.msd is None:
            raise ConfigError("plant kind 'ex3' requires m, c, k")
        if self.fault.active and self.solver.t_end <= self.fault.t_full:
            raise ConfigError(
                f"t_end={self.solver.t_end:g} must exceed fault t_full={self.fault.t_full:g}")

    def build_plant(self) -> Plant:
        if self.plant_kind == "ex1":
            return plant_ex1(self.fault)
        if self.plant_kind == "ex2":
            return plant_ex2(self.fault)
        if self.plant_kind == "ex3":
            return plant_ex3(self.msd, self.fault)
        return plant_from_tf(self.plant_tf, self.fault)

    def canonical_text(self) -> str:
        """Deterministic rendering of every field (hash input)."""
        parts = [
            f"name={self.name}",
            f"plant_kind={self.plant_kind}",
            f"plant_tf={self.plant_tf.num if self.plant_tf else None}"
            f"/{self.plant_tf.den if self.plant_tf else None}",
            f"msd={(self.msd.m, self.msd.c, self.msd.k) if self.msd else None}",
            f"controller={self.controller.num}/{self.controller.den}",
            f"reference=({self.reference.kind.name},{self.reference.amplitude!r},"
            f"{self.reference.period!r},{self.reference.offset!r})",
            f"fault=({self.fault.kind.name},{self.fault.t_start!r},"
            f"{self.fault.t_full!r},{self.fault.magnitude!r})",
            f"thresholds=({self.thresholds.rho0!r},{self.thresholds.nu0!r},"
            f"{self.thresholds.eps_margin!r})",
            f"solver=({self.solver.dt!r},{self.solver.t_end!r},{self.solver.method.name})",
            f"window={self.window!r}",
            f"eps_den={self.eps_den!r}",
            f"warmup={self.warmup!r}",
            f"reset_on_install={self.reset_on_install}",
            f"mitigation={self.mitigation}",
            f"seed={self.seed}",
        ]
        return "\n".join(parts)

    def hash(self) -> str:
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()[:16]


# -- config parsing -------------------------------------------------------


def _as_float(s):
    return float(s)


def _as_int(s):
    return int(s)


def _as_bool(s):
    v = s.strip().lower()
    if v in ("on", "true", "yes", "1"):
        return True
    if v in ("off", "false", "no", "0"):
        return False
    raise ValueError(f"expected on/off, got {s!r}")


def _as_floats(s):
    return tuple(float(tok) for tok in s.split())


def _as_float_or_none(s):
    return None if s.strip().lower() == "none" else float(s)


def _as_word(s):
    return s.strip().lower()


_REQUIRED = object()

SCHEMA = {
    "scenario": {
        "name": (_as_word, "scenario"),
        "mitigation": (_as_bool, True),
        "seed": (_as_int, 0),
    },
    "plant": {
        "kind": (_as_word, _REQUIRED),
        "num": (_as_floats, None),
        "den": (_as_floats, None),
        "m": (_as_float, None),
        "c": (_as_float, None),
        "k": (_as_float, None),
    },
    "controller": {
        "num": (_as_floats, _REQUIRED),
        "den": (_as_floats, _REQUIRED),
    },
    "reference": {
        "kind": (_as_word, "square"),
        "amplitude": (_as_float, 1.0),
        "period": (_as_float, 20.0),
        "offset": (_as_float, 0.0),
    },
    "fault": {
        "kind": (_as_word, "none"),
        "t_start": (_as_float, 0.0),
        "t_full": (_as_float, 0.0),
        "magnitude": (_as_float, 0.0),
    },
    "thresholds": {
        "rho0": (_as_float, -0.15),
        "nu0": (_as_float, -0.15),
        "eps_margin": (_as_float, 0.05),
    },
    "solver": {
        "dt": (_as_float, 1e-3),
        "t_end": (_as_float, 120.0),
        "method": (_as_word, "rk4"),
    },
    "estimator": {
        "window": (_as_float_or_none, None),
        "eps_den": (_as_float, 1e-9),
        "warmup": (_as_float, 1.0),
        "reset_on_install": (_as_bool, True),
    },
}

_FAULT_KINDS = {
    "none": FaultKind.NONE,
    "input_delay_ramp": FaultKind.INPUT_DELAY_RAMP,
    "dynamics_swap": FaultKind.DYNAMICS_SWAP,
    "spring_softening": FaultKind.SPRING_SOFTENING,
}

_REF_KINDS = {
    "step": ReferenceKind.STEP,
    "square": ReferenceKind.SQUARE,
    "sine": ReferenceKind.SINE,
}

_METHODS = {"rk4": Method.RK4, "euler": Method.EULER}


def _parse_sections(text: str):
    """Raw parse to {section: {key: (value, line_no)}} with diagnostics."""
    sections = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith(";"):
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip().lower()
            if current not in SCHEMA:
                raise ConfigError(f"line {lineno}: unknown section [{current}]")
            sections.setdefault(current, {})
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        if current is None:
            raise ConfigError(f"line {lineno}: key outside of any [section]")
        key, _, value = line.partition("=")
        key = key.strip().lower()
        if key not in SCHEMA[current]:
            raise ConfigError(f"line {lineno}: unknown key {key!r} in [{current}]")
        if key in sections[current]:
            raise ConfigError(f"line {lineno}: duplicate key {key!r} in [{current}]")
        sections[current][key] = (value.strip(), lineno)
    return sections


def apply_overrides(sections, overrides):
    """Apply 'section.key=value' (or unique bare 'key=value') overrides."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not KEY=VALUE")
        key, _, value = item.partition("=")
        key = key.strip().lower()
        if "." in key:
            sec, _, k = key.partition(".")
        else:
            hits = [s for s, keys in SCHEMA.items() if key in keys]
            if not hits:
                raise ConfigError(f"override key {key!r} matches no schema key")
            if len(hits) > 1:
                raise ConfigError(
                    f"override key {key!r} is ambiguous across sections {hits}; "
                    "qualify as section.key")
            sec, k = hits[0], key
        if sec not in SCHEMA or k not in SCHEMA[sec]:
            raise ConfigError(f"override {item!r}: no such key [{sec}] {k}")
        sections.setdefault(sec, {})[k] = (value.strip(), 0)
    return sections


def _build_scenario(sections) -> Scenario:
    values = {}
    for sec, keys in SCHEMA.items():
        got = sections.get(sec, {})
        for key, (cast, default) in keys.items():
            if key in got:
                raw, lineno = got[key]
                try:
                    values[(sec, key)] = cast(raw)
                except ValueError as exc:
                    where = f"line {lineno}: " if lineno else ""
                    raise ConfigError(
                        f"{where}[{sec}] {key} = {raw!r}: {exc}") from None
            elif default is _REQUIRED:
                raise ConfigError(f"missing required key [{sec}] {key}")
            else:
                values[(sec, key)] = default

    fault_kind = values[("fault", "kind")]
    if fault_kind not in _FAULT_KINDS:
        raise ConfigError(f"[fault] kind {fault_kind!r} not one of {sorted(_FAULT_KINDS)}")
    ref_kind = values[("reference", "kind")]
    if ref_kind not in _REF_KINDS:
        raise ConfigError(f"[reference] kind {ref_kind!r} not one of {sorted(_REF_KINDS)}")
    method = values[("solver", "method")]
    if method not in _METHODS:
        raise ConfigError(f"[solver] method {method!r} not one of {sorted(_METHODS)}")

    plant_kind = values[("plant", "kind")]
    plant_tf = None
    if values[("plant", "num")] is not None or values[("plant", "den")] is not None:
        if plant_kind != "tf":
            raise ConfigError("[plant] num/den are only valid with kind = tf")
        if values[("plant", "num")] is None or values[("plant", "den")] is None:
            raise ConfigError("[plant] kind = tf requires both num and den")
        plant_tf = RationalTF(values[("plant", "num")], values[("plant", "den")])
    msd = None
    msd_given = [values[("plant", p)] for p in ("m", "c", "k")]
    if any(v is not None for v in msd_given):
        if plant_kind != "ex3":
            raise ConfigError("[plant] m/c/k are only valid with kind = ex3")
        if any(v is None for v in msd_given):
            raise ConfigError("[plant] kind = ex3 requires all of m, c, k")
        msd = MassDamperSpring(m=msd_given[0], c=msd_given[1], k=msd_given[2])

    try:
        fault = FaultSchedule(kind=_FAULT_KINDS[fault_kind],
                              t_start=values[("fault", "t_start")],
                              t_full=values[("fault", "t_full")],
                              magnitude=values[("fault", "magnitude")])
        scenario = Scenario(
            name=values[("scenario", "name")],
            mitigation=values[("scenario", "mitigation")],
            seed=values[("scenario", "seed")],
            plant_kind=plant_kind,
            plant_tf=plant_tf,
            msd=msd,
            controller=RationalTF(values[("controller", "num")],
                                  values[("controller", "den")]),
            fault=fault,
            reference=ReferenceSpec(kind=_REF_KINDS[ref_kind],
                                    amplitude=values[("reference", "amplitude")],
                                    period=values[("reference", "period")],
                                    offset=values[("reference", "offset")]),
            thresholds=Thresholds(rho0=values[("thresholds", "rho0")],
                                  nu0=values[("thresholds", "nu0")],
                                  eps_margin=values[("thresholds", "eps_margin")]),
            solver=SolverConfig(dt=values[("solver", "dt")],
                                t_end=values[("solver", "t_end")],
                                method=_METHODS[method]),
            window=values[("estimator", "window")],
            eps_den=values[("estimator", "eps_den")],
            warmup=values[("estimator", "warmup")],
            reset_on_install=values[("estimator", "reset_on_install")],
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return scenario


def loads(text: str, overrides=()) -> Scenario:
    """Parse and validate a scenario from config text."""
    sections = _parse_sections(text)
    if not sections:
        raise ConfigError("empty config: no sections found")
    if overrides:
        sections = apply_overrides(sections, overrides)
    return _build_scenario(sections)


def load(path, overrides=()) -> Scenario:
    """Parse and validate a scenario config file."""
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read(), overrides=overrides)


def bundled_names():
    return BUNDLED


def load_bundled(name: str, overrides=()) -> Scenario:
    """Load one of the packaged scenario configs (ex1_delay/ex2_swap/ex3_spring)."""
    from importlib import resources

    if name not in BUNDLED:
        raise ConfigError(f"no bundled scenario {name!r}; have {BUNDLED}")
    text = resources.files("passiguard").joinpath(f"configs/{name}.cfg").read_text()
    return loads(text, overrides=overrides)


# -- run engine -----------------------------------------------------------


@dataclass
class RunLog:
    """Uniform-dt log of one run plus the reconfiguration event list."""

    t: np.ndarray
    r: np.ndarray
    e: np.ndarray
    y: np.ndarray
    u: np.ndarray
    rho_bar: np.ndarray
    nu_bar: np.ndarray
    verdict: np.ndarray  # int codes, see DetectionVerdict
    m: np.ndarray        # (n, 4)
    diverged_flag: np.ndarray
    diverged: bool
    events: list
    metadata: dict = field(default_factory=dict)

    @property
    def n_steps(self) -> int:
        return len(self.t)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        buf.write(",".join(LOG_COLUMNS) + "\n")
        names = {int(v): v.name for v in DetectionVerdict}
        for i in range(self.n_steps):
            row = [
                _fmt(self.t[i]), _fmt(self.r[i]), _fmt(self.e[i]),
                _fmt(self.y[i]), _fmt(self.u[i]), _fmt(self.rho_bar[i]),
                _fmt(self.nu_bar[i]), names[int(self.verdict[i])],
                _fmt(self.m[i, 0]), _fmt(self.m[i, 1]), _fmt(self.m[i, 2]),
                _fmt(self.m[i, 3]), str(int(self.diverged_flag[i])),
            ]
            buf.write(",".join(row) + "\n")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        return text

    def events_to_csv(self, path=None) -> str:
        """All fault-verdict ticks; installs/criticals carry their action."""
        buf = io.StringIO()
        buf.write(",".join(EVENT_COLUMNS) + "\n")
        actions = {round(ev.t / self._dt()): ev for ev in self.events}
        names = {int(v): v.name for v in DetectionVerdict}
        fault_codes = (int(DetectionVerdict.RHO_LOW), int(DetectionVerdict.NU_LOW),
                       int(DetectionVerdict.BOTH_LOW))
        for i in range(self.n_steps):
            code = int(self.verdict[i])
            if code not in fault_codes:
                continue
            ev = actions.get(i)
            action = ev.action if ev is not None else "none"
            melems = ev.m.elements if ev is not None else tuple(self.m[i])
            row = [_fmt(self.t[i]), names[code], _fmt(self.rho_bar[i]),
                   _fmt(self.nu_bar[i]), action,
                   _fmt(melems[0]), _fmt(melems[1]), _fmt(melems[2]),
                   _fmt(melems[3])]
            buf.write(",".join(row) + "\n")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        return text

    def _dt(self) -> float:
        return self.metadata.get("dt", self.t[1] - self.t[0] if self.n_steps > 1 else 1.0)


def _fmt(x) -> str:
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return f"{x:.15g}"


def run(s: Scenario) -> RunLog:
    """Execute a scenario; deterministic for a given config and backend."""
    plant = s.build_plant()
    ctrl = tf_to_ss(s.controller)
    dc = float(ctrl.D[0, 0])
    try:
        check_well_posed(IDENTITY, dc, plant.Dp)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    if s.mitigation and not is_hurwitz(ctrl):
        raise ConfigError("mitigation requires a finite-gain stable controller")

    dt = s.solver.dt
    n = s.solver.n_steps
    method = int(s.solver.method)

    est = PassivityEstimate(window=s.window, eps_den=s.eps_den,
                            warmup=s.warmup, dt_hint=dt)
    rec = ReconfigState()
    # every wrapper goes around the original controller, so one grid gain
    # bound (inflated by the safety factor) serves all syntheses
    gamma = None
    if s.mitigation:
        cjw = freq_response_grid(ctrl, DEFAULT_SWEEP.grid())
        gamma = wrapped_gain(IDENTITY, cjw)

    Ac = np.ascontiguousarray(ctrl.A)
    Bc = np.ascontiguousarray(ctrl.B[:, 0] if ctrl.n_states else np.zeros(0))
    Cc = np.ascontiguousarray(ctrl.C[0, :] if ctrl.n_states else np.zeros(0))

    xp = np.zeros(plant.n_states)
    xc = np.zeros(ctrl.n_states)
    ehist = np.zeros(n + 2)
    logs = {name: np.zeros(n) for name in ("r", "e", "y", "u", "rho", "nu")}
    log_verdict = np.zeros(n, dtype=np.int64)
    log_m = np.zeros((n, 4))
    log_div = np.zeros(n, dtype=np.int64)
    sp = [np.zeros(plant.n_states) for _ in range(5)]
    sc = [np.zeros(ctrl.n_states) for _ in range(5)]

    mvec = np.array([1.0, 0.0, 0.0, 1.0])
    wm = np.array([math.inf, math.inf])

    k = 0
    status = K.S_DONE
    while True:
        status, k = K.run_segment(
            k, n, dt, method,
            plant.kind, plant.Ap, plant.Bp, plant.Cp, plant.Dp, plant.msd,
            int(plant.schedule.kind), plant.schedule.t_start,
            plant.schedule.t_full, plant.schedule.magnitude,
            Ac, Bc, Cc, dc,
            mvec,
            int(s.reference.kind), s.reference.amplitude,
            s.reference.period, s.reference.offset,
            est._state, est._win, est._win_meta, est._window_arg, s.eps_den,
            s.thresholds.rho0, s.thresholds.nu0, s.warmup,
            wm, 1 if s.mitigation else 0, DIVERGENCE_THRESHOLD,
            xp, xc, ehist,
            logs["r"], logs["e"], logs["y"], logs["u"],
            logs["rho"], logs["nu"], log_verdict, log_m, log_div,
            sp[0], sp[1], sp[2], sp[3], sp[4],
            sc[0], sc[1], sc[2], sc[3], sc[4])
        if status != K.S_RECONFIG:
            break
        t_event = (k - 1) * dt
        new_m = tick(rec, est, s.thresholds, gamma, t_event,
                     controller_feedthrough=dc)
        if new_m is not None:
            mvec[:] = new_m.elements
            if s.reset_on_install:
                est.reset_integrals()
        wm[0] = rec.rho_min
        wm[1] = rec.nu_min

    diverged = status == K.S_DIVERGED
    n_logged = k if diverged else n
    sl = slice(0, n_logged)

    metadata = {
        "scenario": s.name,
        "scenario_hash": s.hash(),
        "dt": dt,
        "t_end": s.solver.t_end,
        "method": s.solver.method.name,
        "mitigation": s.mitigation,
        "backend": backend_name(),
        "window": s.window,
        "eps_den": s.eps_den,
        "warmup": s.warmup,
        "reset_on_install": s.reset_on_install,
        "gamma_safety": 1.05,
        "sweep": f"{DEFAULT_SWEEP.omega_min:g}..{DEFAULT_SWEEP.omega_max:g}"
                 f"@{DEFAULT_SWEEP.points_per_decade}/decade",
        "divergence_threshold": DIVERGENCE_THRESHOLD,
        "signal_fault": est.signal_fault,
        "dropped_tail_s": s.solver.t_end - n * dt,
    }
    return RunLog(
        t=np.arange(n_logged) * dt,
        r=logs["r"][sl].copy(), e=logs["e"][sl].copy(),
        y=logs["y"][sl].copy(), u=logs["u"][sl].copy(),
        rho_bar=logs["rho"][sl].copy(), nu_bar=logs["nu"][sl].copy(),
        verdict=log_verdict[sl].copy(), m=log_m[sl].copy(),
        diverged_flag=log_div[sl].copy(), diverged=diverged,
        events=list(rec.fault_log), metadata=metadata)


# -- reporting ------------------------------------------------------------


@dataclass
class RunSummary:
    scenario: str
    diverged: bool
    diverged_t: float
    sup_abs_y: float
    first_fault_t: float
    n_reconfigs: int
    n_critical: int
    final_m: MMatrix
    min_rho_margin_after_final: float
    min_nu_margin_after_final: float
    metadata: dict

    def table_row(self) -> dict:
        return {
            "scenario": self.scenario,
            "diverged": self.diverged,
            "sup_abs_y": self.sup_abs_y,
            "first_fault_t": self.first_fault_t,
            "n_reconfigs": self.n_reconfigs,
        }

    def __str__(self):
        lines = [f"scenario: {self.scenario}"]
        for key in ("scenario_hash", "dt", "method", "mitigation", "backend",
                    "window", "eps_den", "warmup", "gamma_safety", "sweep",
                    "divergence_threshold"):
            lines.append(f"{key}: {self.metadata.get(key)}")
        lines.append(f"diverged: {self.diverged}"
                     + (f" (t={self.diverged_t:.6g}s)" if self.diverged else ""))
        lines.append(f"sup|y|: {self.sup_abs_y:.6g}")
        lines.append("first_fault_t: "
                     + (f"{self.first_fault_t:.6g}" if self.first_fault_t is not None
                        else "none"))
        lines.append(f"n_reconfigs: {self.n_reconfigs}")
        lines.append(f"n_critical: {self.n_critical}")
        fm = self.final_m
        lines.append(f"final_m: case={fm.case.value} "
                     f"[{fm.m11:.6g}, {fm.m12:.6g}; {fm.m21:.6g}, {fm.m22:.6g}]")
        for label, v in (("min(rho_bar + nu_c) after final install",
                          self.min_rho_margin_after_final),
                         ("min(nu_bar + rho_c) after final install",
                          self.min_nu_margin_after_final)):
            lines.append(f"{label}: " + (f"{v:.6g}" if v is not None else "n/a"))
        return "\n".join(lines) + "\n"


def report(log: RunLog) -> RunSummary:
    """Summarize a run: boundedness, event timing and loop-health margins.

    The margin traces add the plant's index estimates to the wrapper's
    claimed complementary levels (the two index sums of the loop stability
    condition); their minima after the final install certify that the loop
    finished above the configured margin.
    """
    dt = log._dt()
    fault_codes = (int(DetectionVerdict.RHO_LOW), int(DetectionVerdict.NU_LOW),
                   int(DetectionVerdict.BOTH_LOW))
    fault_mask = np.isin(log.verdict, fault_codes)
    first_fault_t = float(log.t[fault_mask][0]) if np.any(fault_mask) else None

    installs = [ev for ev in log.events if ev.action.startswith("install")]
    n_critical = sum(1 for ev in log.events if ev.action == "critical")
    final_m = installs[-1].m if installs else IDENTITY

    min_rho_margin = None
    min_nu_margin = None
    if installs:
        k_final = int(round(installs[-1].t / dt)) + 1
        if k_final < log.n_steps:
            rho = log.rho_bar[k_final:]
            nu = log.nu_bar[k_final:]
            if final_m.nu_level is not None:
                vals = rho[~np.isnan(rho)] + final_m.nu_level
                min_rho_margin = float(np.min(vals)) if vals.size else None
            if final_m.rho_level is not None:
                vals = nu[~np.isnan(nu)] + final_m.rho_level
                min_nu_margin = float(np.min(vals)) if vals.size else None

    return RunSummary(
        scenario=log.metadata.get("scenario", "?"),
        diverged=log.diverged,
        diverged_t=float(log.t[-1]) if log.diverged and log.n_steps else None,
        sup_abs_y=float(np.max(np.abs(log.y))) if log.n_steps else 0.0,
        first_fault_t=first_fault_t,
        n_reconfigs=len(installs),
        n_critical=n_critical,
        final_m=final_m,
        min_rho_margin_after_final=min_rho_margin,
        min_nu_margin_after_final=min_nu_margin,
        metadata=log.metadata)
