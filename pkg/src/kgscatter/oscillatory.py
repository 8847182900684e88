"""
Two-dimensional stationary phase and the phase geometry of the problem.

* :func:`stationary_phase_2d` evaluates the leading term

      2 pi e^{i pi s / 4} / sqrt|det Hess psi| * e^{i lam psi(z0)} / lam * F(z0) chi(z0)

  of  I(lam) = int int e^{i lam psi} F chi  at the unique stationary point z0,
  located by damped Newton iteration.
* :func:`brute_force_2d` is the reference: a tensor trapezoidal rule resolving
  every oscillation with at least 40 nodes per wavelength.
* :func:`cubic_phase_data` locates the stationary points of the four cubic
  interaction phases  -<xi> +- <xi - eta - sigma> +- <eta> +- <sigma>.
* :func:`vmod_phase` and :func:`ray_phase_taylor` describe the phase of the
  resonant component along the rays x = +-(sqrt3/2) t.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .spectral import bracket

DEGENERATE_DET = 1e-8
NEWTON_MAXITER = 50


class ConvergenceError(ValueError):
    """Newton iteration for a stationary point did not converge."""


class DegenerateHessianError(ValueError):
    """Hessian determinant below the degeneracy threshold at the stationary point."""


# ---------------------------------------------------------------------------
# phases, amplitudes, cutoffs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Phase2D:
    """A smooth phase psi(eta, sigma) with analytic gradient and Hessian.

    ``value`` is vectorized over arrays of equal shape; ``grad`` and ``hess``
    take scalars and return arrays of shape (2,) and (2, 2).
    """

    value: Callable
    grad: Callable
    hess: Callable
    name: str = "psi"


def quadratic_phase(a: float = 1.0, b: float = 1.0, c: float = 0.0) -> Phase2D:
    """psi = (a eta^2 + 2 c eta sigma + b sigma^2) / 2."""
    H = np.array([[a, c], [c, b]], dtype=float)
    return Phase2D(
        value=lambda e, s: 0.5 * (a * e * e + 2 * c * e * s + b * s * s),
        grad=lambda e, s: H @ np.array([e, s], dtype=float),
        hess=lambda e, s: H.copy(),
        name=f"quadratic({a},{b},{c})",
    )


def zero_phase() -> Phase2D:
    return Phase2D(
        value=lambda e, s: np.zeros(np.broadcast(e, s).shape),
        grad=lambda e, s: np.zeros(2),
        hess=lambda e, s: np.zeros((2, 2)),
        name="zero",
    )


@dataclass(frozen=True)
class BumpCutoff:
    """chi(z) = exp(1 - 1/(1 - |z - c|^2 / r^2)) inside the disc, 0 outside; chi(c) = 1."""

    center: tuple = (0.0, 0.0)
    radius: float = 2.0

    def __call__(self, e, s):
        e = np.asarray(e, dtype=float)
        s = np.asarray(s, dtype=float)
        q = ((e - self.center[0]) ** 2 + (s - self.center[1]) ** 2) / self.radius**2
        if q.ndim == 0:
            return float(math.exp(1.0 - 1.0 / (1.0 - float(q)))) if q < 1 else 0.0
        out = np.zeros(q.shape)
        inside = q < 1
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - q[inside]))
        return out

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        c0, c1 = self.center
        r = self.radius
        return c0 - r, c0 + r, c1 - r, c1 + r


def gaussian_amplitude(width: float = 1.0, center=(0.0, 0.0)) -> Callable:
    """F = exp(-|z - center|^2 / (2 width^2))."""

    def F(e, s):
        return np.exp(-((np.asarray(e) - center[0]) ** 2 + (np.asarray(s) - center[1]) ** 2) / (2 * width**2))

    return F


# ---------------------------------------------------------------------------
# Newton
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PhaseAnalysis2D:
    """Stationary point, phase value, Hessian determinant and signature.

    ``iterations`` and ``grad_norm`` form the Newton convergence report;
    ``seeded`` is True when the iteration from the requested start failed and
    the point was found from a grid seed inside the search region.
    """

    point: tuple
    value: float
    det: float
    signature: int
    iterations: int
    grad_norm: float
    hessian: np.ndarray = field(repr=False, compare=False, default=None)
    seeded: bool = False


def newton_stationary(phase: Phase2D, start, tol: float = 1e-13, maxiter: int = NEWTON_MAXITER, region=None):
    """Damped Newton iteration on grad psi = 0.

    Returns (point, iterations, |grad psi|).  Steps are halved until the
    gradient norm decreases; with ``region = (center, radius)`` they are also
    shortened to keep the iterate inside that disc.
    """
    z = np.array(start, dtype=float)
    g = np.asarray(phase.grad(*z), dtype=float)
    gn = float(np.linalg.norm(g))
    for it in range(1, maxiter + 1):
        if gn <= tol:
            return z, it - 1, gn
        H = np.asarray(phase.hess(*z), dtype=float)
        try:
            step = -np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            step = -g
        a = 1.0
        if region is not None:
            c = np.asarray(region[0], dtype=float)
            while np.linalg.norm(z + a * step - c) > region[1] and a > 1e-12:
                a *= 0.5
        while True:
            z_new = z + a * step
            g_new = np.asarray(phase.grad(*z_new), dtype=float)
            gn_new = float(np.linalg.norm(g_new))
            if gn_new < gn or a < 1e-6:
                break
            a *= 0.5
        small_step = np.linalg.norm(z_new - z) <= 1e-15 * max(1.0, np.linalg.norm(z))
        z, g, gn = z_new, g_new, gn_new
        if not np.all(np.isfinite(z)):
            break
        if gn <= tol or (small_step and gn <= 1e3 * tol):
            return z, it, gn
    raise ConvergenceError(f"Newton did not converge in {maxiter} iterations (|grad| = {gn:.2e})")


def _grid_seeds(phase: Phase2D, region, n: int = 41, count: int = 8) -> list:
    """Local minima of |grad psi| on an n x n grid over the disc, smallest first."""
    c = np.asarray(region[0], dtype=float)
    r = float(region[1])
    ax = np.linspace(-r, r, n)
    G = np.full((n, n), np.inf)
    for i, a in enumerate(ax):
        for k, b in enumerate(ax):
            if a * a + b * b <= r * r:
                G[i, k] = np.linalg.norm(phase.grad(c[0] + a, c[1] + b))
    P = np.pad(G, 1, constant_values=np.inf)
    nb = [P[1 + di : n + 1 + di, 1 + dk : n + 1 + dk] for di in (-1, 0, 1) for dk in (-1, 0, 1) if di or dk]
    is_min = np.isfinite(G) & np.all([G <= q for q in nb], axis=0)
    idx = np.argwhere(is_min)
    idx = idx[np.argsort(G[is_min])][:count]
    return [(c[0] + ax[i], c[1] + ax[k]) for i, k in idx]


def analyze_phase(phase: Phase2D, start=(0.0, 0.0), tol: float = 1e-13, region=None) -> PhaseAnalysis2D:
    """Locate the stationary point from ``start`` and classify it.

    For saddle phases the Hessian may degenerate along curves, and damped
    Newton can stall there or drift towards infinity, where the gradient of
    <.>-type phases flattens out.  If ``region = (center, radius)`` is given
    the iteration is confined to that disc, and on failure it is restarted
    from the local minima of |grad psi| on a grid over the disc, so the
    result does not depend on ``start``.

    Raises
    ------
    ConvergenceError
        Newton failed within 50 iterations (from every seed).
    DegenerateHessianError
        |det Hess psi| < 1e-8 at the point found.
    """
    seeded = False
    try:
        z, it, gn = newton_stationary(phase, start, tol, region=region)
    except ConvergenceError:
        if region is None:
            raise
        for seed in _grid_seeds(phase, region):
            try:
                z, it, gn = newton_stationary(phase, seed, tol, region=region)
                seeded = True
                break
            except ConvergenceError:
                continue
        else:
            raise
    H = np.asarray(phase.hess(*z), dtype=float)
    det = float(np.linalg.det(H))
    if abs(det) < DEGENERATE_DET:
        raise DegenerateHessianError(f"|det Hess| = {abs(det):.2e} at {tuple(z)}")
    eig = np.linalg.eigvalsh(0.5 * (H + H.T))
    sig = int(np.sum(eig > 0) - np.sum(eig < 0))
    return PhaseAnalysis2D(
        (float(z[0]), float(z[1])), float(phase.value(z[0], z[1])), det, sig, it, gn, H, seeded
    )


def check_derivatives(phase: Phase2D, point, h: float = 1e-5) -> float:
    """Largest discrepancy between analytic and central-difference derivatives.

    Gradient compared against differences of ``value``, Hessian against
    differences of ``grad``; the result is scaled by max(1, |derivative|).
    """
    e, s = float(point[0]), float(point[1])
    f = lambda a, b: float(phase.value(np.float64(a), np.float64(b)))
    fd_grad = np.array([(f(e + h, s) - f(e - h, s)) / (2 * h), (f(e, s + h) - f(e, s - h)) / (2 * h)])
    G = lambda a, b: np.asarray(phase.grad(a, b), dtype=float)
    fd_hess = np.column_stack([(G(e + h, s) - G(e - h, s)) / (2 * h), (G(e, s + h) - G(e, s - h)) / (2 * h)])
    g = G(e, s)
    H = np.asarray(phase.hess(e, s), dtype=float)
    eg = np.max(np.abs(fd_grad - g)) / max(1.0, np.max(np.abs(g)))
    eh = np.max(np.abs(fd_hess - H)) / max(1.0, np.max(np.abs(H)))
    return float(max(eg, eh))


# ---------------------------------------------------------------------------
# leading term and brute-force oracle
# ---------------------------------------------------------------------------


def stationary_phase_2d(
    phase: Phase2D,
    amplitude: Callable,
    cutoff: BumpCutoff,
    lam: float,
    start=None,
    return_analysis: bool = False,
):
    """Leading stationary-phase term of int int e^{i lam psi} F chi.

    Newton starts from the cutoff centre unless ``start`` is given.
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    an = analyze_phase(phase, cutoff.center if start is None else start, region=(cutoff.center, cutoff.radius))
    e0, s0 = an.point
    val = (
        2 * math.pi
        * np.exp(1j * math.pi * an.signature / 4)
        / math.sqrt(abs(an.det))
        * np.exp(1j * lam * an.value)
        / lam
        * float(amplitude(e0, s0))
        * float(cutoff(e0, s0))
    )
    return (complex(val), an) if return_analysis else complex(val)


def _max_gradient(phase: Phase2D, cutoff: BumpCutoff, n: int = 81) -> float:
    x0, x1, y0, y1 = cutoff.bounds
    best = 0.0
    for e in np.linspace(x0, x1, n):
        for s in np.linspace(y0, y1, n):
            if cutoff(e, s) > 0:
                best = max(best, float(np.linalg.norm(phase.grad(e, s))))
    return best


def brute_force_2d(
    phase: Phase2D,
    amplitude: Callable,
    cutoff: BumpCutoff,
    lam: float,
    ppw: float = 40.0,
    min_nodes: int = 400,
    max_points: float = 2e9,
    chunk: int = 2_000_000,
) -> complex:
    """Tensor trapezoidal quadrature of int int e^{i lam psi} F chi over supp chi.

    The spacing resolves the shortest local wavelength 2 pi / (lam max|grad psi|)
    with ``ppw`` nodes.  The integrand vanishes to infinite order at the edge
    of the support, so the trapezoidal rule converges spectrally.

    Raises
    ------
    MemoryError
        If the grid would exceed ``max_points`` nodes.
    """
    x0, x1, y0, y1 = cutoff.bounds
    width = max(x1 - x0, y1 - y0)
    gmax = _max_gradient(phase, cutoff) * abs(lam)
    n = min_nodes
    if gmax > 0:
        h = 2 * math.pi / gmax / ppw
        n = max(n, int(math.ceil(width / h)))
    if float(n) * n > max_points:
        raise MemoryError(f"brute-force grid of {n}x{n} nodes exceeds the limit of {max_points:.0e}")
    xs = np.linspace(x0, x1, n + 1)
    ys = np.linspace(y0, y1, n + 1)
    hx = xs[1] - xs[0]
    hy = ys[1] - ys[0]
    rows = max(1, int(chunk // len(ys)))
    total = 0.0 + 0.0j
    for i in range(0, len(xs), rows):
        E, S = np.meshgrid(xs[i : i + rows], ys, indexing="ij")
        w = cutoff(E, S)
        keep = w > 0
        if not np.any(keep):
            continue
        e, s = E[keep], S[keep]
        total += np.sum(np.exp(1j * lam * phase.value(e, s)) * amplitude(e, s) * w[keep])
    return complex(total * hx * hy)


# ---------------------------------------------------------------------------
# cubic interaction phases
# ---------------------------------------------------------------------------

#: signs (a, b, c) of <xi - eta - sigma>, <eta>, <sigma> in phi_j
CUBIC_SIGNS = {1: (1, 1, 1), 2: (1, -1, 1), 3: (1, -1, -1), 4: (-1, -1, -1)}


def cubic_phase(j: int, xi: float) -> Phase2D:
    """phi_j(xi, eta, sigma) = -<xi> + a<xi - eta - sigma> + b<eta> + c<sigma>."""
    if j not in CUBIC_SIGNS:
        raise ValueError("j must be 1, 2, 3 or 4")
    a, b, c = CUBIC_SIGNS[j]
    xi = float(xi)
    base = -float(bracket(xi))

    def value(e, s):
        return base + a * bracket(xi - e - s) + b * bracket(e) + c * bracket(s)

    def grad(e, s):
        z = xi - e - s
        dz = a * z / bracket(z)
        return np.array([-dz + b * e / bracket(e), -dz + c * s / bracket(s)])

    def hess(e, s):
        hz = a * bracket(xi - e - s) ** -3
        he = b * bracket(e) ** -3
        hs = c * bracket(s) ** -3
        return np.array([[hz + he, hz], [hz, hz + hs]])

    return Phase2D(value, grad, hess, name=f"phi{j}(xi={xi})")


def cubic_closed_form(j: int, xi: float) -> dict:
    """Stationary point, value, Hessian determinant and signature in closed form."""
    w = float(bracket(xi))
    w3 = float(bracket(xi / 3))
    table = {
        1: ((xi / 3, xi / 3), -w + 3 * w3, 3 * w3**-6, 2),
        2: ((-xi, xi), 0.0, -(w**-6), 0),
        3: ((xi, xi), -2 * w, -(w**-6), 0),
        4: ((xi / 3, xi / 3), -w - 3 * w3, 3 * w3**-6, -2),
    }
    p, v, d, s = table[j]
    return {"point": (float(p[0]), float(p[1])), "value": float(v), "det": float(d), "signature": s}


@dataclass(frozen=True)
class CubicPhaseData:
    j: int
    xi: float
    point: tuple
    value: float
    det: float
    signature: int
    iterations: int
    derivative_check: float
    seeded: bool = False

    def max_deviation(self) -> float:
        """Largest deviation from :func:`cubic_closed_form`."""
        cf = cubic_closed_form(self.j, self.xi)
        dev = max(
            abs(self.point[0] - cf["point"][0]),
            abs(self.point[1] - cf["point"][1]),
            abs(self.value - cf["value"]),
            abs(self.det - cf["det"]),
        )
        return float(dev) if self.signature == cf["signature"] else float("inf")


def cubic_phase_data(j: int, xi: float, start=(0.0, 0.0)) -> CubicPhaseData:
    """Newton-located stationary point of phi_j(xi, ., .) with its classification.

    The search is confined to the disc of radius 2|xi| + 2 about the origin,
    which contains every stationary point; see :func:`analyze_phase` for the
    restart strategy.
    """
    ph = cubic_phase(j, xi)
    an = analyze_phase(ph, start, tol=1e-14, region=((0.0, 0.0), 2 * abs(float(xi)) + 2))
    chk = check_derivatives(ph, an.point)
    if chk > 1e-6:
        raise AssertionError(f"analytic derivatives of phi{j} disagree with finite differences ({chk:.2e})")
    return CubicPhaseData(j, float(xi), an.point, an.value, an.det, an.signature, an.iterations, chk, an.seeded)


# ---------------------------------------------------------------------------
# resonant-component phase
# ---------------------------------------------------------------------------


def vmod_phase(s, xi, t, x):
    """psi = x xi + (t - s)<xi> + 2s with its first and second xi-derivatives."""
    s = np.asarray(s, dtype=float)
    xi = np.asarray(xi, dtype=float)
    w = bracket(xi)
    psi = x * xi + (t - s) * w + 2 * s
    d1 = x + (t - s) * xi / w
    d2 = (t - s) / w**3
    return psi, d1, d2


def ray_phase_taylor(t: float, s):
    """phi(s; t) = rho(t - s, (sqrt3/2) t) + 2s and its deviation |phi - t/2|.

    rho = ((t - s)^2 - 3t^2/4)^{1/2}.  The deviation is evaluated without
    cancellation:  phi - t/2 = s (s + 2 (s^2 - 2ts)/(rho + t/2)) / (rho + t/2),
    whose Taylor expansion is -3 s^2 / t.
    """
    s = np.asarray(s, dtype=float)
    smax = t - 0.5 * math.sqrt(3.0) * t
    if np.any(s < 0) or np.any(s >= smax):
        raise ValueError(f"s must lie in [0, {smax:.6g})")
    rho = np.sqrt((t - s) ** 2 - 0.75 * t * t)
    den = rho + 0.5 * t
    dev = s * (s + 2 * (s * s - 2 * t * s) / den) / den
    phi = 0.5 * t + dev
    return phi, np.abs(dev)


def ray_phase_constant(t: float, s) -> np.ndarray:
    """Measured C = |phi - t/2| * t / s^2 (tends to 3 for s << t)."""
    s = np.asarray(s, dtype=float)
    _, dev = ray_phase_taylor(t, s)
    return dev * t / s**2
