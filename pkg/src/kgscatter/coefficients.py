"""
Localized real coefficients alpha(x), beta(x) and their resonance data.

The quadratic coefficient interacts resonantly with the e^{2it} oscillation
of the solution at the origin exactly through its Fourier transform at the
two frequencies +-sqrt(3) (where <xi> = 2).  ``Coefficient`` stores those two
values together with the flag separating the resonant from the non-resonant
regime; ``deresonate`` removes them by subtracting a real modulated window.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .spectral import SQRT3, Field, Grid, ft_at, to_spectrum, from_spectrum, Spectrum, bracket

#: relative resonance tolerance, multiplied by ||alpha||_{L^2}
RESONANCE_RTOL = 1e-8
#: boundary values of a preset must stay below this times its amplitude
BOUNDARY_RTOL = 1e-10

PROFILE_KINDS = ("gaussian", "sech2", "sech_tanh", "cosine_gaussian", "zero")


@dataclass(frozen=True)
class Coefficient:
    """A real, spatially localized coefficient with its resonance values.

    Attributes
    ----------
    field : Field
        Real samples on the grid.
    r_plus, r_minus : complex
        Continuous Fourier transform at +sqrt(3) and -sqrt(3).
    resonant : bool
        True iff max(|r_plus|, |r_minus|) exceeds ``tolerance``.
    tolerance : float
        Absolute threshold used for the flag.
    spec : dict
        Construction recipe (kind and parameters) for serialization.
    norms : dict
        Cache of weighted Sobolev norms keyed by ``(j, m)``.
    """

    field: Field
    r_plus: complex
    r_minus: complex
    resonant: bool
    tolerance: float
    spec: dict = field(default_factory=dict)
    norms: dict = field(default_factory=dict, compare=False)

    @property
    def grid(self) -> Grid:
        return self.field.grid

    @property
    def values(self) -> np.ndarray:
        return self.field.values

    def norm(self, j: int = 0, m: int = 0) -> float:
        key = (j, m)
        if key not in self.norms:
            self.norms[key] = weighted_sobolev(self.field, j, m)
        return self.norms[key]

    def describe(self) -> dict:
        return {
            "spec": self.spec,
            "r_plus": [self.r_plus.real, self.r_plus.imag],
            "r_minus": [self.r_minus.real, self.r_minus.imag],
            "resonant": self.resonant,
            "tolerance": self.tolerance,
            "l2": self.norm(0, 0),
        }


def coefficient_from_field(f: Field, spec: dict | None = None, rtol: float = RESONANCE_RTOL) -> Coefficient:
    """Wrap real samples into a :class:`Coefficient`, measuring its resonance values."""
    if not f.is_real:
        raise ValueError("coefficients must be real-valued")
    f = f.real()
    rp = complex(ft_at(f, SQRT3))
    rm = complex(ft_at(f, -SQRT3))
    tol = rtol * f.norm()
    resonant = max(abs(rp), abs(rm)) > tol
    return Coefficient(f, rp, rm, bool(resonant), float(tol), dict(spec or {"kind": "custom"}))


def _sech(x):
    """1/cosh(x) without overflow for large |x|."""
    e = np.exp(-np.abs(x))
    return 2 * e / (1 + e * e)


def _profile_values(grid: Grid, kind: str, p: dict) -> tuple[np.ndarray, float]:
    x = grid.x
    A = float(p.get("A", 1.0))
    if kind == "gaussian":
        s = float(p.get("sigma", 1.0))
        x0 = float(p.get("x0", 0.0))
        if s <= 0:
            raise ValueError("sigma must be positive")
        return A * np.exp(-((x - x0) ** 2) / (2 * s * s)), A
    if kind == "sech2":
        w = float(p.get("w", 1.0))
        if w <= 0:
            raise ValueError("w must be positive")
        return A * _sech(x / w) ** 2, A
    if kind == "sech_tanh":
        # quadratic coefficient of the sine-Gordon kink linearization
        return -A * np.tanh(x) * _sech(x), A
    if kind == "cosine_gaussian":
        s = float(p.get("sigma", 1.0))
        om = float(p.get("omega", SQRT3))
        if s <= 0:
            raise ValueError("sigma must be positive")
        return A * np.cos(om * x) * np.exp(-x * x / (2 * s * s)), A
    if kind == "zero":
        return np.zeros_like(x), 0.0
    raise ValueError(f"unknown profile kind {kind!r}; expected one of {PROFILE_KINDS}")


def make_profile(kind: str, grid: Grid, **params) -> Coefficient:
    """Build a preset coefficient on ``grid``.

    Parameters
    ----------
    kind : {'gaussian', 'sech2', 'sech_tanh', 'cosine_gaussian', 'zero'}
        gaussian(A, sigma, x0), sech2(A, w), sech_tanh(A),
        cosine_gaussian(A, sigma, omega).
    grid : Grid
    **params
        Profile parameters; missing ones take the defaults A=1, sigma=1,
        x0=0, w=1, omega=sqrt(3).

    Raises
    ------
    ValueError
        Unknown kind, or the profile has not decayed to 1e-10*|A| at the
        boundary of the grid.
    """
    vals, A = _profile_values(grid, kind, params)
    edge = max(abs(vals[0]), abs(vals[-1]))
    if edge > BOUNDARY_RTOL * abs(A):
        raise ValueError(f"{kind} profile not localized on the grid: boundary value {edge:.2e}")
    spec = {"kind": kind, **{k: float(v) for k, v in params.items()}}
    return coefficient_from_field(Field(grid, vals), spec)


def resonance_values(c: Coefficient, recompute: bool = False) -> tuple[complex, complex]:
    """Return (alpha_hat(+sqrt 3), alpha_hat(-sqrt 3))."""
    if recompute:
        return complex(ft_at(c.field, SQRT3)), complex(ft_at(c.field, -SQRT3))
    return c.r_plus, c.r_minus


def default_window(grid: Grid, sigma: float = 2.0) -> Field:
    return Field(grid, np.exp(-grid.x**2 / (2 * sigma * sigma)))


def deresonate(c: Coefficient, window: Field | None = None, cond_max: float = 1e8) -> Coefficient:
    """Remove alpha_hat(+-sqrt 3) by subtracting real modulated windows.

    Solves for real c1, c2 with

        alpha' = alpha - c1 cos(sqrt3 x) g - c2 sin(sqrt3 x) g,
        alpha_hat'(sqrt3) = 0.

    The real and imaginary parts of the condition form a 2x2 real system;
    conjugate symmetry then forces alpha_hat'(-sqrt3) = 0 as well.  The
    returned coefficient records ``c1``, ``c2`` in its spec.
    """
    grid = c.grid
    g = default_window(grid) if window is None else window
    if not g.grid.same_as(grid):
        raise ValueError("window lives on a different grid")
    g = g.real()
    cos_g = Field(grid, np.cos(SQRT3 * grid.x) * g.values)
    sin_g = Field(grid, np.sin(SQRT3 * grid.x) * g.values)
    a = complex(ft_at(cos_g, SQRT3))
    b = complex(ft_at(sin_g, SQRT3))
    r = complex(ft_at(c.field, SQRT3))
    mat = np.array([[a.real, b.real], [a.imag, b.imag]])
    if not np.all(np.isfinite(mat)) or np.linalg.cond(mat) > cond_max:
        raise ValueError("degenerate window: the de-resonation system is singular")
    c1, c2 = np.linalg.solve(mat, np.array([r.real, r.imag]))
    vals = c.values - c1 * cos_g.values - c2 * sin_g.values
    spec = {"kind": "deresonated", "source": c.spec, "c1": float(c1), "c2": float(c2)}
    return coefficient_from_field(Field(grid, vals), spec)


def weighted_sobolev(f: Field, j: int = 0, m: int = 0) -> float:
    """||<x>^j f||_{H^m} = (sum_{k<=m} ||d^k(<x>^j f)||^2)^{1/2}, spectral derivatives."""
    if j < 0 or m < 0 or int(j) != j or int(m) != m:
        raise ValueError("j and m must be non-negative integers")
    if m > 4:
        raise ValueError("derivative order limited to 4")
    g = f.grid
    F = g.fft(bracket(g.x) ** j * f.values)
    total = 0.0
    for k in range(int(m) + 1):
        total += g.l2_spectral((1j * g.xi) ** k * F) ** 2
    return float(np.sqrt(total))


def boundary_fraction(f: Field, j: int = 8, m: int = 3, frac: float = 0.9) -> float:
    """Share of ||<x>^j f||_{H^m}^2 carried by nodes with |x| > frac*L.

    Used to check that a coefficient's weighted norm is dominated by the
    interior of the box, i.e. truncation to the periodic grid is harmless.
    """
    g = f.grid
    total = weighted_sobolev(f, j, m) ** 2
    if total == 0:
        return 0.0
    F = g.fft(bracket(g.x) ** j * f.values)
    outer = np.abs(g.x) > frac * g.L
    part = 0.0
    for k in range(m + 1):
        dk = g.ifft((1j * g.xi) ** k * F)
        part += np.sum(np.abs(dk[outer]) ** 2) * g.dx
    return float(part / total)
