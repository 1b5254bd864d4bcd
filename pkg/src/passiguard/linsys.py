"""LTI system representations and frequency-domain oracles.

Transfer functions are stored as real coefficient lists in descending powers
of s.  State-space realizations use the controllable canonical (companion)
form, which is deterministic and exact for the low-order plants and
compensators this package targets.

The index oracles here are grid quantities: ``l2_gain`` returns a sweep
maximum (a lower bound on the true H-infinity gain, optionally inflated by a
safety factor), and ``true_indices_lti`` returns sweep minima of Re{G(jw)}
and Re{1/G(jw)} (upper bounds on the true input-feedforward / output-feedback
passivity indices).  Grid bias is the caller's to manage; the defaults
resolve second-order dynamics comfortably.
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "RationalTF",
    "StateSpaceModel",
    "FrequencySweep",
    "TrueIndices",
    "ImproperTransferFunction",
    "UnstableSystemError",
    "SingularResolventError",
    "DEFAULT_SWEEP",
    "tf_to_ss",
    "freq_response",
    "freq_response_grid",
    "l2_gain",
    "true_indices_lti",
    "series",
    "is_hurwitz",
]


class ImproperTransferFunction(ValueError):
    """deg(num) > deg(den) or degenerate denominator."""


class UnstableSystemError(ValueError):
    """Operation requires all eigenvalues of A in the open left half-plane."""


class SingularResolventError(ValueError):
    """jwI - A is singular at the queried frequency."""


@dataclass(frozen=True)
class RationalTF:
    """SISO transfer function num(s)/den(s), coefficients in descending powers."""

    num: tuple
    den: tuple

    def __init__(self, num, den):
        num = tuple(float(c) for c in num)
        den = tuple(float(c) for c in den)
        if not den:
            raise ImproperTransferFunction("denominator is empty")
        if den[0] == 0.0:
            raise ImproperTransferFunction("denominator leading coefficient is zero")
        # strip leading zeros of the numerator so degree comparisons are honest
        while len(num) > 1 and num[0] == 0.0:
            num = num[1:]
        if not num:
            num = (0.0,)
        if len(num) > len(den):
            raise ImproperTransferFunction(
                f"improper transfer function: deg(num)={len(num) - 1} > deg(den)={len(den) - 1}"
            )
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    @property
    def order(self) -> int:
        return len(self.den) - 1

    def __call__(self, s):
        """Evaluate num(s)/den(s) directly (polynomial-division oracle)."""
        return np.polyval(self.num, s) / np.polyval(self.den, s)

    def __mul__(self, other):
        if isinstance(other, RationalTF):
            return RationalTF(np.convolve(self.num, other.num), np.convolve(self.den, other.den))
        return NotImplemented


@dataclass
class StateSpaceModel:
    """Continuous-time realization (A, B, C, D); n may be zero (static gain)."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.B = np.atleast_2d(np.asarray(self.B, dtype=float))
        self.C = np.atleast_2d(np.asarray(self.C, dtype=float))
        self.D = np.atleast_2d(np.asarray(self.D, dtype=float))
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise ValueError(f"A must be square, got {self.A.shape}")
        if n == 0:
            # normalize degenerate shapes so B/C agree with an empty state
            p, m = self.D.shape
            self.B = np.zeros((0, m))
            self.C = np.zeros((p, 0))
        if self.B.shape[0] != n:
            raise ValueError(f"B must have {n} rows, got {self.B.shape}")
        if self.C.shape[1] != n:
            raise ValueError(f"C must have {n} columns, got {self.C.shape}")
        p, m = self.C.shape[0], self.B.shape[1]
        if self.D.shape != (p, m):
            raise ValueError(f"D must be {p}x{m}, got {self.D.shape}")

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.B.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.C.shape[0]

    @property
    def is_siso(self) -> bool:
        return self.n_inputs == 1 and self.n_outputs == 1


@dataclass(frozen=True)
class FrequencySweep:
    """Log-spaced evaluation grid in rad/s."""

    omega_min: float = 1e-3
    omega_max: float = 1e4
    points_per_decade: int = 200

    def __post_init__(self):
        if self.omega_min <= 0:
            raise ValueError("omega_min must be > 0")
        if not self.omega_min < self.omega_max:
            raise ValueError("omega_min must be < omega_max")
        if self.points_per_decade < 1:
            raise ValueError("points_per_decade must be >= 1")

    def grid(self) -> np.ndarray:
        decades = np.log10(self.omega_max / self.omega_min)
        n = int(np.ceil(decades * self.points_per_decade)) + 1
        return np.logspace(np.log10(self.omega_min), np.log10(self.omega_max), n)


DEFAULT_SWEEP = FrequencySweep()


@dataclass(frozen=True)
class TrueIndices:
    """Grid passivity-index oracles; skipped lists frequencies where |G| = 0."""

    nu: float
    rho: float
    skipped: tuple = field(default_factory=tuple)


def tf_to_ss(tf: RationalTF) -> StateSpaceModel:
    """Controllable canonical realization of a proper SISO transfer function.

    The denominator is normalized monic; D carries the feedthrough (ratio of
    leading coefficients for a biproper tf, zero otherwise) and C holds the
    strictly-proper remainder coefficients.
    """
    den = np.asarray(tf.den, dtype=float)
    num = np.asarray(tf.num, dtype=float)
    den = den / den[0] if den[0] != 1.0 else den
    num = np.asarray(tf.num, dtype=float) / tf.den[0]

    n = len(den) - 1
    if n == 0:
        return StateSpaceModel(
            np.zeros((0, 0)), np.zeros((0, 1)), np.zeros((1, 0)), [[num[0]]]
        )

    num_full = np.concatenate([np.zeros(n + 1 - len(num)), num])
    d = num_full[0]
    rem = num_full[1:] - d * den[1:]  # strictly-proper part, descending powers

    A = np.zeros((n, n))
    A[0, :] = -den[1:]
    if n > 1:
        A[1:, :-1] = np.eye(n - 1)
    B = np.zeros((n, 1))
    B[0, 0] = 1.0
    C = rem.reshape(1, n)
    return StateSpaceModel(A, B, C, [[d]])


def freq_response(sys: StateSpaceModel, omega: float) -> np.ndarray:
    """C (jwI - A)^-1 B + D at a single frequency; shape (p, m)."""
    n = sys.n_states
    if n == 0:
        return sys.D.astype(complex)
    M = 1j * omega * np.eye(n) - sys.A
    try:
        X = np.linalg.solve(M, sys.B)
    except np.linalg.LinAlgError as exc:
        raise SingularResolventError(
            f"resolvent singular at omega={omega!r} rad/s"
        ) from exc
    return sys.C @ X + sys.D


def freq_response_grid(sys: StateSpaceModel, omegas: np.ndarray) -> np.ndarray:
    """SISO frequency response over an array of frequencies (complex vector)."""
    if not sys.is_siso:
        raise ValueError("freq_response_grid supports SISO systems only")
    out = np.empty(len(omegas), dtype=complex)
    for i, w in enumerate(np.asarray(omegas, dtype=float)):
        out[i] = freq_response(sys, w)[0, 0]
    return out


def is_hurwitz(sys: StateSpaceModel) -> bool:
    """True when every eigenvalue of A lies in the open left half-plane."""
    if sys.n_states == 0:
        return True
    return bool(np.max(np.linalg.eigvals(sys.A).real) < 0.0)


def l2_gain(sys: StateSpaceModel, sweep: FrequencySweep = DEFAULT_SWEEP,
            safety: float = 1.05) -> float:
    """Grid maximum of the largest singular value, inflated by ``safety``.

    The sweep maximum is a lower bound on the true H-infinity gain; the
    default 5% inflation keeps downstream synthesis constraints (which need
    an upper bound) conservative.  Pass ``safety=1.0`` for the raw grid value.
    """
    if not is_hurwitz(sys):
        raise UnstableSystemError("L2 gain undefined: system is not Hurwitz-stable")
    gmax = 0.0
    if sys.is_siso:
        gmax = float(np.max(np.abs(freq_response_grid(sys, sweep.grid()))))
    else:
        for w in sweep.grid():
            s = np.linalg.svd(freq_response(sys, w), compute_uv=False)
            gmax = max(gmax, float(s[0]))
    return gmax * safety


def true_indices_lti(sys: StateSpaceModel, sweep: FrequencySweep = DEFAULT_SWEEP,
                     zero_tol: float = 1e-12) -> TrueIndices:
    """Grid oracles for the passivity indices of a stable SISO LTI system.

    nu  = min over the grid of Re{G(jw)}    (input-feedforward index bound)
    rho = min over the grid of Re{1/G(jw)}  (output-feedback index bound)

    Grid points where |G(jw)| vanishes are skipped for rho and reported in
    the result.  Both values are upper bounds on the true indices and are
    intended as test oracles, not certified quantities.
    """
    if not sys.is_siso:
        raise ValueError("true_indices_lti supports SISO systems only")
    if not is_hurwitz(sys):
        raise UnstableSystemError("passivity indices undefined for unstable system")
    omegas = sweep.grid()
    g = freq_response_grid(sys, omegas)
    nu = float(np.min(g.real))
    mag = np.abs(g)
    scale = float(np.max(mag))
    ok = mag > zero_tol * max(scale, 1.0)
    skipped = tuple(float(w) for w in omegas[~ok])
    if not np.any(ok):
        raise ValueError("|G(jw)| vanishes on the whole grid")
    rho = float(np.min((1.0 / g[ok]).real))
    return TrueIndices(nu=nu, rho=rho, skipped=skipped)


def series(first: StateSpaceModel, second: StateSpaceModel) -> StateSpaceModel:
    """Cascade: output of ``first`` drives ``second`` (y = second(first(u)))."""
    if first.n_outputs != second.n_inputs:
        raise ValueError("cascade dimension mismatch")
    n1, n2 = first.n_states, second.n_states
    A = np.zeros((n1 + n2, n1 + n2))
    A[:n1, :n1] = first.A
    A[n1:, n1:] = second.A
    A[n1:, :n1] = second.B @ first.C
    B = np.vstack([first.B, second.B @ first.D])
    C = np.hstack([second.D @ first.C, second.C])
    D = second.D @ first.D
    return StateSpaceModel(A, B, C, D)
