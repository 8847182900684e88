"""
Asymptotic laws extracted from recorded trajectories.

* decay fits: power law C t^{-p} against the slowed law (A + B log t) t^{-1/2};
* the origin amplitude a0 from its integral representation, cross-checked by
  a direct fit of v(t, 0) t^{1/2} e^{-it} e^{-i pi/4};
* the resonant component

      v_mod(t, x) = (a0^2 / 2) int_1^t (e^{i(t-s)<D>} <D>^{-1} alpha)(x) e^{2is} / s ds

  by composite Gauss-Legendre quadrature in s, and its leading term on the
  rays x = +-(sqrt3/2) t;
* limit profiles V_hat (resonant case) and W_hat (non-resonant case with the
  integrating-factor phase B(t, xi)) and the pointwise prediction built on W.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid
from scipy.special import sici

from .coefficients import Coefficient
from .evolution import Trajectory, ray_key
from .spectral import SQRT2PI, SQRT3, Grid, bracket, sample_cubic

MIN_FIT_SAMPLES = 12
DEFAULT_WINDOW = (1.0 / 16.0, 0.5)
ORIGIN_FIT_WINDOW = (50.0, 300.0)
TAIL_UNRELIABLE = 0.2
PHASE = np.exp(1j * math.pi / 4)


class DegenerateWindowError(ValueError):
    """Fit window outside the series or with too few samples."""


# ---------------------------------------------------------------------------
# decay fits
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DecayFit:
    """Least-squares fit of a decay law on a window.

    ``params`` holds ``C`` and ``p`` for the power model and ``A`` and ``B``
    for the logpower model; ``residual`` is the RMS of log(fit) - log(data)
    over the window (``inf`` if the fitted logpower law is not positive).
    """

    model: str
    params: dict
    window: tuple
    residual: float
    n_samples: int

    def predict(self, t):
        t = np.asarray(t, dtype=float)
        if self.model == "power":
            return self.params["C"] * t ** (-self.params["p"])
        return (self.params["A"] + self.params["B"] * np.log(t)) * t**-0.5

    def to_dict(self) -> dict:
        return asdict(self)


def _window_mask(t: np.ndarray, window) -> np.ndarray:
    t1, t2 = float(window[0]), float(window[1])
    if t1 < 1 or t2 <= t1:
        raise DegenerateWindowError(f"invalid fit window [{t1}, {t2}]; need 1 <= t1 < t2")
    if t1 < t.min() - 1e-12 or t2 > t.max() + 1e-9:
        raise DegenerateWindowError(f"window [{t1}, {t2}] exceeds the series range [{t.min()}, {t.max()}]")
    m = (t >= t1) & (t <= t2)
    if m.sum() < MIN_FIT_SAMPLES:
        raise DegenerateWindowError(f"window [{t1}, {t2}] holds {m.sum()} < {MIN_FIT_SAMPLES} samples")
    return m


def default_window(T: float) -> tuple[float, float]:
    return (max(1.0, DEFAULT_WINDOW[0] * T), DEFAULT_WINDOW[1] * T)


def fit_decay(t, values, model: str = "power", window=None) -> DecayFit:
    """Fit ``power`` (C t^{-p}) or ``logpower`` ((A + B log t) t^{-1/2}).

    ``values`` must be positive on the window (pass moduli).  The power law
    is fitted linearly in log space; the logpower law by linear least squares
    in (1, log t) against values t^{1/2}.  The default window is
    [T/16, T/2] with T the last sample time.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(values)
    if np.iscomplexobj(y):
        raise ValueError("fit_decay expects positive real values; pass moduli")
    y = y.astype(float)
    if window is None:
        window = default_window(float(t.max()))
    m = _window_mask(t, window)
    tw, yw = t[m], y[m]
    if np.any(yw <= 0):
        raise ValueError("values must be positive on the fit window")
    lt = np.log(tw)
    if model == "power":
        A = np.column_stack([np.ones_like(lt), -lt])
        c, *_ = np.linalg.lstsq(A, np.log(yw), rcond=None)
        params = {"C": float(np.exp(c[0])), "p": float(c[1])}
        resid = A @ c - np.log(yw)
    elif model == "logpower":
        A = np.column_stack([np.ones_like(lt), lt])
        c, *_ = np.linalg.lstsq(A, yw * np.sqrt(tw), rcond=None)
        params = {"A": float(c[0]), "B": float(c[1])}
        pred = (A @ c) / np.sqrt(tw)
        resid = np.log(pred) - np.log(yw) if np.all(pred > 0) else np.full_like(yw, np.inf)
    else:
        raise ValueError(f"unknown model {model!r}")
    return DecayFit(model, params, (float(window[0]), float(window[1])), float(np.sqrt(np.mean(resid**2))), int(m.sum()))


def compare_models(t, values, window=None) -> dict:
    """Both fits and the ratio residual(power) / residual(logpower).

    A ratio above one means the slowed law describes the data better.
    """
    p = fit_decay(t, values, "power", window)
    lp = fit_decay(t, values, "logpower", window)
    ratio = p.residual / lp.residual if lp.residual > 0 else np.inf
    return {"power": p, "logpower": lp, "ratio": float(ratio)}


LOG_SIGNATURE_SHARE = 0.1


def log_signature_share(fit: DecayFit) -> float:
    """Relative change of the amplitude carried by the log term of a logpower fit.

    |B| log(t2/t1) / |A + B log t2| over the fit window [t1, t2]: how much the
    factor (A + B log t) moves across the window, relative to its final size.
    """
    if fit.model != "logpower":
        raise ValueError("log signature needs a logpower fit")
    t1, t2 = fit.window
    A, B = fit.params["A"], fit.params["B"]
    end = abs(A + B * math.log(t2))
    return math.inf if end == 0 else abs(B) * math.log(t2 / t1) / end


def has_log_signature(fit: DecayFit, share: float = LOG_SIGNATURE_SHARE) -> bool:
    """True if the log term moves the amplitude by more than ``share`` across the window."""
    return log_signature_share(fit) > share


# ---------------------------------------------------------------------------
# rays and the origin
# ---------------------------------------------------------------------------


def sample_ray(traj: Trajectory, c: float, source: str = "auto") -> tuple[np.ndarray, np.ndarray]:
    """v(t, ct) along a ray.

    ``source="checkpoints"`` interpolates each checkpoint snapshot (cubic
    Lagrange); ``"series"`` reads the recorded series of the run, which holds
    the same interpolation at every recording step; ``"auto"`` prefers the
    series when the ray was recorded.  Samples with |ct| > 0.9 L are dropped
    with a warning.
    """
    if abs(c) >= 1:
        raise ValueError("ray speed must satisfy |c| < 1")
    key = ray_key(c)
    if c == 0 and source != "checkpoints":
        t, vals = np.asarray(traj.series["t"]), np.asarray(traj.series["origin"])
    elif source in ("auto", "series") and key in traj.series:
        t, vals = np.asarray(traj.series["t"]), np.asarray(traj.series[key])
    elif source == "series":
        raise KeyError(f"ray {c} was not recorded")
    else:
        g = traj.grid
        t = np.asarray(traj.times, dtype=float)
        vals = np.array([sample_cubic(g, traj.v(i).values, c * ti) for i, ti in enumerate(t)])
    limit = 0.9 * traj.grid.L
    keep = np.abs(c * t) <= limit
    if not np.all(keep):
        warnings.warn(f"ray c={c} leaves |x| <= {limit:.1f}; truncated at t = {t[keep][-1]:.2f}", RuntimeWarning)
    return t[keep], vals[keep]


def origin_normalized(t, v0) -> np.ndarray:
    """v(t, 0) t^{1/2} e^{-it} e^{-i pi/4}, which tends to a0."""
    t = np.asarray(t, dtype=float)
    return np.asarray(v0) * np.sqrt(t) * np.exp(-1j * t) / PHASE


def fit_a0_origin(t, v0, window=ORIGIN_FIT_WINDOW) -> complex:
    """a0 by complex least squares of the normalized origin value on {1, t^{-1/2}}.

    The second basis function absorbs the O(t^{-1+}) remainder of the
    origin asymptotics after scaling by t^{1/2}.
    """
    t = np.asarray(t, dtype=float)
    m = _window_mask(t, window)
    z = origin_normalized(t[m], np.asarray(v0)[m])
    A = np.column_stack([np.ones(m.sum()), t[m] ** -0.5]).astype(complex)
    c, *_ = np.linalg.lstsq(A, z, rcond=None)
    return complex(c[0])


@dataclass
class AmplitudeA0:
    """a0 with its seven constituents, truncation time and tail estimate."""

    value: complex
    T_int: float
    tail: float
    reliable: bool
    breakdown: dict

    def to_dict(self) -> dict:
        cx = lambda z: [float(np.real(z)), float(np.imag(z))]
        return {
            "value": cx(self.value),
            "abs": float(abs(self.value)),
            "T_int": self.T_int,
            "tail": self.tail,
            "reliable": self.reliable,
            "breakdown": {k: cx(v) for k, v in self.breakdown.items()},
        }


def _tail_constant(s: np.ndarray, env: np.ndarray) -> float:
    """C in env ~ C s^{-3/2}, fitted in log space over the last decade."""
    m = (s >= s[-1] / 10) & (env > 0)
    if m.sum() < 2:
        return 0.0
    return float(np.exp(np.mean(np.log(env[m]) + 1.5 * np.log(s[m]))))


def compute_a0(traj: Trajectory, alpha=None, T_int_fraction: float = 0.8) -> AmplitudeA0:
    """a0 from its integral representation.

        a0 = v0_hat(0) + (1/sqrt(2pi)) ( 1/2 int alpha v0^2 - int alpha |v0|^2 - 1/6 int alpha conj(v0)^2 )
           + (1/sqrt(2pi)) ( int e^{is} J1 - int e^{-is} J2 - 1/3 int e^{-3is} conj(J1) ) ds

    where, with w = e^{-is} v,  J1 = int alpha (dw/ds) w dx  and
    J2 = d/ds int alpha |w|^2 dx  are recorded at every step of the run.  The
    time integrals are truncated at T_int = 0.8 T (trapezoidal).  The tail
    beyond T_int is estimated as 2 C T_int^{-1/2} from an s^{-3/2} fit of the
    integrand envelope over the last decade; it is reported, not added, and
    the result is flagged unreliable if it exceeds 20% of |a0|.
    """
    g = traj.grid
    al = traj.model().alpha if alpha is None else np.asarray(getattr(alpha, "values", alpha), dtype=float)
    v0 = traj.v(0).values
    v0hat0 = complex(g.fft(v0)[0])
    q1 = 0.5 * np.sum(al * v0 * v0) * g.dx / SQRT2PI
    q2 = -np.sum(al * np.abs(v0) ** 2) * g.dx / SQRT2PI
    q3 = -np.sum(al * np.conj(v0) ** 2) * g.dx / 6 / SQRT2PI
    d = traj.dense
    s = np.asarray(d["t"])
    T_int = T_int_fraction * float(s[-1])
    m = s <= T_int + 1e-9
    s, J1, J2 = s[m], np.asarray(d["J1"])[m], np.asarray(d["J2"])[m]
    i1 = trapezoid(np.exp(1j * s) * J1, s) / SQRT2PI
    i2 = -trapezoid(np.exp(-1j * s) * J2, s) / SQRT2PI
    i3 = -trapezoid(np.exp(-3j * s) * np.conj(J1), s) / 3 / SQRT2PI
    value = v0hat0 + q1 + q2 + q3 + i1 + i2 + i3
    env = (np.abs(J1) * (1 + 1 / 3) + np.abs(J2)) / SQRT2PI
    late = s >= 1
    C = _tail_constant(s[late], env[late]) if late.sum() > 1 else 0.0
    tail = 2 * C * T_int**-0.5 if T_int > 0 else 0.0
    reliable = tail <= TAIL_UNRELIABLE * abs(value) or tail == 0.0
    breakdown = {
        "v0_hat(0)": v0hat0,
        "initial_vv": complex(q1),
        "initial_abs": complex(q2),
        "initial_conj": complex(q3),
        "time_vv": complex(i1),
        "time_abs": complex(i2),
        "time_conj": complex(i3),
    }
    return AmplitudeA0(complex(value), T_int, float(tail), bool(reliable), breakdown)


@dataclass
class OriginCheck:
    """Pointwise error of the origin asymptotics and its fitted decay."""

    t: np.ndarray
    error: np.ndarray
    fit: DecayFit | None

    @property
    def exponent(self) -> float:
        return -self.fit.params["p"] if self.fit is not None else float("nan")


def check_origin(traj_or_series, a0: complex, window=None) -> OriginCheck:
    """|v(t,0) - t^{-1/2} e^{i pi/4} e^{it} a0| for t >= 1, with a power fit.

    ``traj_or_series`` is a trajectory (dense origin series) or a pair
    (t, v(t, 0)).  The exponent is fitted on ``window`` (default
    [10, t_max/2]); it is None-valued if the error vanishes identically.
    """
    if isinstance(traj_or_series, Trajectory):
        t, v0 = np.asarray(traj_or_series.dense["t"]), np.asarray(traj_or_series.dense["origin"])
    else:
        t, v0 = (np.asarray(a) for a in traj_or_series)
    m = t >= 1
    t, v0 = t[m], v0[m]
    err = np.abs(v0 - t**-0.5 * PHASE * np.exp(1j * t) * a0)
    if window is None:
        window = (max(10.0, float(t[0])), float(t[-1]) / 2)
    wm = (t >= window[0]) & (t <= window[1])
    fit = None
    if np.all(err[wm] > 0):
        fit = fit_decay(t, np.where(err > 0, err, np.inf), "power", window)
    return OriginCheck(t, err, fit)


# ---------------------------------------------------------------------------
# the resonant component v_mod
# ---------------------------------------------------------------------------

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(4)


def vmod_nodes(t: float, refine: int = 1, near: float = 0.05, far: float = 0.2, rel: float = 1 / 50) -> tuple[np.ndarray, np.ndarray]:
    """Composite 4-point Gauss-Legendre nodes and weights on [1, t].

    Panel width min(far, rel*s) in general and at most ``near`` within one
    time unit of s = t; ``refine`` divides every panel width.
    """
    if t <= 1:
        return np.empty(0), np.empty(0)
    edges = [1.0]
    s = 1.0
    while s < t:
        h = near if s >= t - 1 else min(far, rel * s)
        s = min(t, s + h / refine)
        edges.append(s)
    e = np.asarray(edges)
    a, b = e[:-1, None], e[1:, None]
    nodes = 0.5 * (a + b) + 0.5 * (b - a) * _GL_NODES
    weights = 0.5 * (b - a) * _GL_WEIGHTS
    return nodes.ravel(), weights.ravel()


def _active(alpha_hat: np.ndarray, rtol: float = 1e-16) -> np.ndarray:
    return np.abs(alpha_hat) > rtol * np.max(np.abs(alpha_hat))


def time_integral_quadrature(a, t: float, refine: int = 1, chunk: int = 4096) -> np.ndarray:
    """int_1^t e^{i a s} / s ds for an array of frequencies a, by quadrature."""
    a = np.asarray(a, dtype=float)
    s, w = vmod_nodes(t, refine)
    out = np.zeros(a.shape, dtype=complex)
    ws = w / s
    for i in range(0, len(s), chunk):
        out += np.exp(1j * np.outer(a, s[i : i + chunk])) @ ws[i : i + chunk]
    return out


def time_integral_exact(a, t: float) -> np.ndarray:
    """int_1^t e^{i a s} / s ds in closed form via the sine and cosine integrals."""
    a = np.asarray(a, dtype=float)
    out = np.empty(a.shape, dtype=complex)
    z = a == 0
    out[z] = math.log(t) if t > 0 else 0.0
    A = np.abs(a[~z])
    si1, ci1 = sici(A * t)
    si0, ci0 = sici(A)
    out[~z] = (ci1 - ci0) + 1j * np.sign(a[~z]) * (si1 - si0)
    return out


def _alpha_hat(alpha) -> tuple[Grid, np.ndarray]:
    g = alpha.grid
    return g, g.fft(np.asarray(alpha.values, dtype=float))


def vmod_spectrum(a0: complex, alpha: Coefficient, t: float, refine: int = 1, exact: bool = False) -> np.ndarray:
    """Fourier coefficients of v_mod(t) on the grid of ``alpha``.

        v_mod_hat = (a0^2 / 2) <xi>^{-1} alpha_hat e^{it<xi>} int_1^t e^{is(2 - <xi>)} / s ds

    The s-integral is evaluated by :func:`time_integral_quadrature` (or in
    closed form if ``exact``) on the frequencies where alpha_hat is not
    negligible.
    """
    g, ah = _alpha_hat(alpha)
    out = np.zeros(g.N, dtype=complex)
    if a0 == 0 or t <= 1:
        return out
    w = bracket(g.xi)
    act = _active(ah) if np.any(ah) else np.zeros(g.N, bool)
    if not np.any(act):
        return out
    a = 2.0 - w[act]
    I = time_integral_exact(a, t) if exact else time_integral_quadrature(a, t, refine)
    out[act] = 0.5 * a0**2 / w[act] * ah[act] * np.exp(1j * t * w[act]) * I
    return out


def evaluate_spectrum(g: Grid, coeffs: np.ndarray, x) -> complex | np.ndarray:
    """Trigonometric interpolant (1/sqrt(2pi)) sum_k c_k e^{i x xi_k} dxi at arbitrary x."""
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    nz = np.flatnonzero(coeffs)
    out = np.exp(1j * np.outer(x_arr, g.xi[nz])) @ coeffs[nz] * g.dxi / SQRT2PI
    return complex(out[0]) if np.ndim(x) == 0 else out


def vmod_quadrature(a0: complex, alpha: Coefficient, t: float, x, refine: int = 1) -> complex | np.ndarray:
    """v_mod(t, x) by composite Gauss-Legendre quadrature in s.

    The inner propagator is applied spectrally, so the value at x is the
    exact trigonometric interpolant of the grid field.
    """
    if a0 == 0 or t <= 1:
        return 0j if np.ndim(x) == 0 else np.zeros(np.shape(x), complex)
    return evaluate_spectrum(alpha.grid, vmod_spectrum(a0, alpha, t, refine), x)


def vmod_ray_formula(a0: complex, alpha: Coefficient, t: float, sign: int = 1) -> complex:
    """Leading term on x = sign (sqrt3/2) t:

        (a0^2 / sqrt 8) e^{i pi/4} e^{it/2} alpha_hat(-sign sqrt3) log(t) / t^{1/2}.
    """
    if t <= 1:
        raise ValueError("formula requires t > 1")
    ah = alpha.r_minus if sign > 0 else alpha.r_plus
    return complex(a0**2 / math.sqrt(8) * PHASE * np.exp(0.5j * t) * ah * math.log(t) / math.sqrt(t))


def vmod_off_ray_bound(a0: complex, alpha: Coefficient, t: float, c: float, delta: float = 0.05, refine: int = 1) -> float:
    """|v_mod(t, ct)| t^{1/2} away from the resonant rays (|c -+ sqrt3/2| >= delta)."""
    if min(abs(c - SQRT3 / 2), abs(c + SQRT3 / 2)) < delta:
        raise ValueError(f"speed {c} is within {delta} of a resonant ray")
    return float(abs(vmod_quadrature(a0, alpha, t, c * t, refine)) * math.sqrt(t))


# ---------------------------------------------------------------------------
# limit profiles
# ---------------------------------------------------------------------------


@dataclass
class LimitProfile:
    """Profile samples on the lattice (ascending xi) with a Cauchy curve.

    ``cauchy`` rows are (t1, t2, sup_xi |P(t1) - P(t2)|) over checkpoint
    pairs t2 ~ 2 t1.
    """

    name: str
    xi: np.ndarray
    values: np.ndarray
    cauchy: list = field(default_factory=list)
    times: np.ndarray = field(default_factory=lambda: np.empty(0))

    def at(self, xi) -> np.ndarray | complex:
        """Linear interpolation in xi (zero outside the lattice)."""
        re = np.interp(xi, self.xi, self.values.real, left=0.0, right=0.0)
        im = np.interp(xi, self.xi, self.values.imag, left=0.0, right=0.0)
        out = re + 1j * im
        return complex(out) if np.ndim(xi) == 0 else out

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def cauchy_diffs(self) -> np.ndarray:
        return np.array([c[2] for c in self.cauchy])

    def to_dict(self, samples=(0.0, 0.5, 1.0, 1.5, SQRT3, 2.0, 3.0)) -> dict:
        return {
            "name": self.name,
            "sup": self.sup(),
            "samples": {f"{x:.6f}": [self.at(x).real, self.at(x).imag] for x in samples},
            "cauchy": [[float(a), float(b), float(c)] for a, b, c in self.cauchy],
        }


def dyadic_pairs(times, t_min: float = 1.0, factor: float = 2.0, rtol: float = 0.05) -> list[tuple[int, int]]:
    """Consecutive index pairs of a doubling chain through the checkpoints.

    The chain starts at the first time >= t_min and repeatedly jumps to the
    checkpoint closest to ``factor`` times the current one, accepting ratios
    within ``rtol * factor`` of ``factor``; the pairs are disjoint dyadic
    intervals t -> 2t.
    """
    times = np.asarray(times, dtype=float)
    start = np.flatnonzero(times >= t_min)
    if len(start) == 0:
        return []
    pairs = []
    i = int(start[0])
    while True:
        j = int(np.argmin(np.abs(times - factor * times[i])))
        if j <= i or abs(times[j] / times[i] - factor) > rtol * factor:
            break
        pairs.append((i, j))
        i = j
    return pairs


def _profile_from(g: Grid, name, P_by_index: dict, times, pairs) -> LimitProfile:
    order = g.order
    last = max(P_by_index)
    cauchy = [(times[i], times[j], float(np.max(np.abs(P_by_index[j] - P_by_index[i])))) for i, j in pairs]
    return LimitProfile(name, g.xi[order], P_by_index[last][order], cauchy, np.asarray(times))


def extract_V(traj: Trajectory, a0: complex, alpha=None, t_min: float = 2.0, refine: int = 1) -> LimitProfile:
    """P(t, xi) = <xi>^{3/2} g_hat(t, xi) with g the profile of v - v_mod.

    V_hat is P at the last checkpoint; the Cauchy curve compares dyadic
    checkpoint pairs.  Checkpoints with t < t_min are skipped.
    """
    g = traj.grid
    m = traj.model()
    if alpha is None:
        alpha = traj.config.coefficients(g)[0]
    w32 = bracket(g.xi) ** 1.5
    times = np.asarray(traj.times, dtype=float)
    P = {}
    for i, t in enumerate(times):
        if t < t_min:
            continue
        ghat = traj.snapshots[i] - np.exp(-1j * t * m.omega) * vmod_spectrum(a0, alpha, t, refine)
        P[i] = w32 * ghat
    if not P:
        raise ValueError("no checkpoints at or after t_min")
    pairs = [(i, j) for i, j in dyadic_pairs(times, t_min) if i in P and j in P]
    return _profile_from(g, "V", P, times, pairs)


def integrating_phase(t, fhat, xi: float, beta0: float) -> tuple[np.ndarray, np.ndarray]:
    """B(t) = (3 beta0 / 2) <xi>^{-1} int_1^t |<xi>^{3/2} f_hat(s)|^2 / s ds for t >= 1."""
    t = np.asarray(t, dtype=float)
    f = np.asarray(fhat)
    m = t >= 1
    t, f = t[m], f[m]
    if beta0 == 0 or len(t) == 0:
        return t, np.zeros(len(t))
    wx = float(bracket(xi))
    integrand = np.abs(wx**1.5 * f) ** 2 / t
    return t, 1.5 * beta0 / wx * cumulative_trapezoid(integrand, t, initial=0.0)


def integrating_phase_B(traj: Trajectory, beta0: float | None = None, xi=None) -> dict:
    """B(t) at the tracked frequencies from the every-step profile record.

    Returns {xi: (t, B)} over the tracked lattice frequencies (or the subset
    nearest to the requested ``xi``).
    """
    if beta0 is None:
        beta0 = traj.config.beta0
    track = np.asarray(traj.track_xi)
    idx = range(len(track)) if xi is None else [int(np.argmin(np.abs(track - x))) for x in np.atleast_1d(xi)]
    t = np.asarray(traj.dense["t"])
    F = np.asarray(traj.dense["fhat"])
    return {float(track[k]): integrating_phase(t, F[:, k], track[k], beta0) for k in idx}


def tracked_profile(traj: Trajectory, beta0: float | None = None) -> dict:
    """Every-step P = <xi>^{3/2} f_hat, B and P e^{iB} at the tracked frequencies."""
    out = {}
    for x, (t, B) in integrating_phase_B(traj, beta0).items():
        k = int(np.argmin(np.abs(np.asarray(traj.track_xi) - x)))
        tt = np.asarray(traj.dense["t"])
        f = np.asarray(traj.dense["fhat"])[tt >= 1, k]
        P = float(bracket(x)) ** 1.5 * f
        out[x] = {"t": t, "P": P, "B": B, "corrected": P * np.exp(1j * B)}
    return out


def dyadic_sup_cauchy(t, P, t_start: float, factor: float = 2.0) -> list[tuple[float, float, float]]:
    """Cauchy differences of a time record over a doubling chain.

    For consecutive chain intervals [a, b] = [t_start factor^k, t_start
    factor^{k+1}] (the last one truncated at the final sample) returns
    (a, b, max_{a <= s <= b} |P(s) - P(b)|), with b the last sample in the
    interval.  The supremum over the interval is insensitive to where
    decaying oscillations happen to sit at the endpoints.
    """
    t = np.asarray(t, dtype=float)
    P = np.asarray(P)
    if t_start <= 0 or factor <= 1:
        raise ValueError("need t_start > 0 and factor > 1")
    out = []
    a = float(t_start)
    while a < t[-1]:
        b = min(a * factor, float(t[-1]))
        m = (t >= a) & (t <= b)
        if m.sum() >= 2:
            seg = P[m]
            out.append((a, float(t[m][-1]), float(np.max(np.abs(seg - seg[-1])))))
        a *= factor
    return out


def cauchy_ratios(chain) -> np.ndarray:
    """Successive ratios of the differences returned by :func:`dyadic_sup_cauchy`."""
    d = np.array([c[2] for c in chain], dtype=float)
    return d[1:] / d[:-1]


def phase_drift(t, P, t_a: float, t_b: float) -> float:
    """arg(P(t_b) / P(t_a)) at the samples nearest to t_a and t_b."""
    t = np.asarray(t, dtype=float)
    i = int(np.argmin(np.abs(t - t_a)))
    j = int(np.argmin(np.abs(t - t_b)))
    return float(np.angle(P[j] / P[i]))


def log_slope(t, B, window) -> float:
    """Least-squares slope of B against log t over ``window``."""
    t = np.asarray(t, dtype=float)
    m = _window_mask(t, window)
    return float(np.polyfit(np.log(t[m]), np.asarray(B)[m], 1)[0])


def extract_W(traj: Trajectory, beta0: float | None = None, t_min: float = 1.0) -> LimitProfile:
    """W_hat(xi) = <xi>^{3/2} f_hat(T, xi) e^{iB(T, xi)} on the full lattice.

    B is integrated over the checkpoints with the trapezoidal rule in log t
    (the integrand |P|^2 varies slowly in log t); the tracked-frequency
    record in :func:`tracked_profile` gives the every-step version.
    """
    if beta0 is None:
        beta0 = traj.config.beta0
    g = traj.grid
    times = np.asarray(traj.times, dtype=float)
    w = bracket(g.xi)
    idx = [i for i, t in enumerate(times) if t >= t_min]
    if not idx:
        raise ValueError("no checkpoints at or after t_min")
    P = {i: w**1.5 * traj.snapshots[i] for i in idx}
    B = np.zeros(g.N)
    corrected = {idx[0]: P[idx[0]] * np.exp(1j * B)}
    for a, b in zip(idx[:-1], idx[1:]):
        dlog = math.log(times[b] / times[a])
        B = B + 1.5 * beta0 / w * 0.5 * (np.abs(P[a]) ** 2 + np.abs(P[b]) ** 2) * dlog
        corrected[b] = P[b] * np.exp(1j * B)
    pairs = [(i, j) for i, j in dyadic_pairs(times, t_min) if i in corrected and j in corrected]
    return _profile_from(g, "W", corrected, times, pairs)


def predict_pointwise(W: LimitProfile, beta0: float, t: float, x) -> complex | np.ndarray:
    """Leading term of v(t, x) built on the final state W:

        t^{-1/2} e^{i pi/4} e^{i rho} e^{-i (3 beta0/2) <xi>^{-1} |W(xi)|^2 log t} W(xi),
        xi = -x / rho,  rho = (t^2 - x^2)^{1/2},

    and zero for |x| >= t.
    """
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.zeros(x_arr.shape, dtype=complex)
    inside = np.abs(x_arr) < t
    if np.any(inside):
        xs = x_arr[inside]
        rho = np.sqrt(t * t - xs * xs)
        xi = -xs / rho
        Wv = np.atleast_1d(W.at(xi))
        phase = 1.5 * beta0 / bracket(xi) * np.abs(Wv) ** 2 * math.log(t)
        out[inside] = t**-0.5 * PHASE * np.exp(1j * rho) * np.exp(-1j * phase) * Wv
    return complex(out[0]) if np.ndim(x) == 0 else out


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if hasattr(obj, "to_dict"):
        return _jsonable(obj.to_dict())
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def write_json(path, payload: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def write_csv(path, columns: dict) -> Path:
    """Columns of equal length; complex columns are split into _re/_im."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names, data = [], []
    for k, v in columns.items():
        v = np.asarray(v)
        if np.iscomplexobj(v):
            names += [f"{k}_re", f"{k}_im"]
            data += [v.real, v.imag]
        else:
            names.append(k)
            data.append(v.astype(float))
    np.savetxt(path, np.column_stack(data), delimiter=",", header=",".join(names), comments="", fmt="%.12e")
    return path


def write_plt(path, csv_name: str, title: str, xcol: int, ycols: dict, logx=False, logy=False, xlabel="t", ylabel="") -> Path:
    """A gnuplot script plotting columns of ``csv_name`` (1-based indices)."""
    path = Path(path)
    lines = [
        "set datafile separator ','",
        f"set title '{title}'",
        f"set xlabel '{xlabel}'",
        f"set ylabel '{ylabel}'",
        "set key left top",
    ]
    if logx:
        lines.append("set logscale x")
    if logy:
        lines.append("set logscale y")
    plots = [f"'{csv_name}' every ::1 using {xcol}:{c} with lines title '{lbl}'" for lbl, c in ycols.items()]
    lines.append("plot " + ", \\\n     ".join(plots))
    path.write_text("\n".join(lines) + "\n")
    return path
