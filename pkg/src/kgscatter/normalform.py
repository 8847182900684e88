"""
Quadratic normal form for the non-resonant case.

With v0 = v(t, 0) and localized coefficients

    alpha1_hat = (1/2) (2 - <xi>)^{-1} <xi>^{-1} alpha_hat,
    alpha2_hat = -<xi>^{-2} alpha_hat,
    alpha3_hat = -(1/2) (2 + <xi>)^{-1} <xi>^{-1} alpha_hat,

the correction Q = alpha1 v0^2 + alpha2 |v0|^2 + alpha3 conj(v0)^2 removes the
quadratic interaction with the origin value: with w = e^{-it} v0,

    (d/dt - i<D>)(v + Q) = 2 alpha1 e^{2it} w' w + 2 alpha2 Re(w' conj w)
                         + 2 alpha3 e^{-2it} conj(w') conj(w)
                         + (1/2i)<D>^{-1}(alpha (u^2 - u(t,0)^2))
                         + (1/2i)<D>^{-1}((beta + beta0) u^3).

The identity is algebraic, so :func:`residual_check` must find it satisfied
to rounding error along any trajectory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .coefficients import Coefficient
from .evolution import KGModel, Trajectory
from .spectral import Field, Grid, ResonanceError, bracket, guard_band


@dataclass(frozen=True)
class NormalFormCoeffs:
    """Fields alpha1, alpha2, alpha3 with their spectra and guard-band diagnostics."""

    grid: Grid
    a1: Field
    a2: Field
    a3: Field
    a1_hat: np.ndarray
    a2_hat: np.ndarray
    a3_hat: np.ndarray
    alpha: np.ndarray
    source: dict = field(default_factory=dict)
    guard: dict = field(default_factory=dict)

    def sup_norms(self) -> tuple[float, float, float]:
        return self.a1.sup(), self.a2.sup(), self.a3.sup()


def _interpolate_band(xi_sorted: np.ndarray, q_sorted: np.ndarray, band_sorted: np.ndarray) -> np.ndarray:
    """Replace band entries of q by cubic interpolation through two outside nodes per side."""
    q = q_sorted.copy()
    outside = np.flatnonzero(~band_sorted)
    for p in np.flatnonzero(band_sorted):
        left = outside[outside < p][-2:]
        right = outside[outside > p][:2]
        nodes = np.concatenate([left, right])
        if len(nodes) < 4:
            raise ResonanceError("guard band touches the edge of the frequency lattice")
        x = xi_sorted[nodes] - xi_sorted[p]
        re = np.polyfit(x, q_sorted[nodes].real, 3)
        im = np.polyfit(x, q_sorted[nodes].imag, 3)
        q[p] = re[-1] + 1j * im[-1]
    return q


def normal_form_coefficients(alpha: Coefficient) -> NormalFormCoeffs:
    """Compute alpha1, alpha2, alpha3 from a non-resonant coefficient.

    Raises
    ------
    ResonanceError
        If ``alpha`` is resonant, i.e. alpha_hat(+-sqrt 3) is not negligible.
    """
    if alpha.resonant:
        raise ResonanceError(
            f"alpha is resonant: |alpha_hat(+sqrt3)| = {abs(alpha.r_plus):.3e}, "
            f"|alpha_hat(-sqrt3)| = {abs(alpha.r_minus):.3e}"
        )
    g = alpha.grid
    xi = g.xi
    w = bracket(xi)
    ahat = g.fft(alpha.values)
    band = guard_band(xi)
    q = np.zeros_like(ahat)
    q[~band] = ahat[~band] / (2.0 - w[~band])
    if np.any(band):
        order = g.order
        q[order] = _interpolate_band(xi[order], q[order], band[order])
    a1_hat = 0.5 * q / w
    a2_hat = -ahat / w**2
    a3_hat = -0.5 * ahat / ((2.0 + w) * w)
    guard = {"band_points": int(band.sum()), "band_xi": [float(x) for x in xi[band]]}
    if np.any(band):
        # compare with the nearest lattice points outside the band
        near = (~band) & (np.abs(np.abs(xi) - np.sqrt(3.0)) < 4 * g.dxi)
        guard["band_max"] = float(np.max(np.abs(a1_hat[band])))
        guard["edge_max"] = float(np.max(np.abs(a1_hat[near])))
    mk = lambda h: Field(g, g.ifft(h))
    return NormalFormCoeffs(g, mk(a1_hat), mk(a2_hat), mk(a3_hat), a1_hat, a2_hat, a3_hat, np.asarray(alpha.values, float), dict(alpha.spec), guard)


def q_field(nf: NormalFormCoeffs, v_origin: complex) -> Field:
    """Q = alpha1 v0^2 + alpha2 |v0|^2 + alpha3 conj(v0)^2."""
    z = complex(v_origin)
    vals = nf.a1.values * z * z + nf.a2.values * abs(z) ** 2 + nf.a3.values * np.conj(z) ** 2
    return Field(nf.grid, vals)


@dataclass
class ResidualReport:
    """Per-checkpoint L^2 residuals of the transformed equation."""

    times: np.ndarray
    residuals: np.ndarray
    v_norms: np.ndarray
    source_norms: np.ndarray
    guard: dict

    @property
    def max_residual(self) -> float:
        return float(np.max(self.residuals)) if len(self.residuals) else 0.0

    @property
    def scale(self) -> float:
        return float(np.max(self.v_norms)) if len(self.v_norms) else 0.0

    def passes(self, rtol: float = 1e-8) -> bool:
        return self.max_residual <= rtol * self.scale

    def to_dict(self) -> dict:
        return {
            "max_residual": self.max_residual,
            "max_v_l2": self.scale,
            "relative": self.max_residual / self.scale if self.scale else 0.0,
            "checkpoints": [
                {"t": float(t), "residual": float(r), "v_l2": float(n), "source_l2": float(s)}
                for t, r, n, s in zip(self.times, self.residuals, self.v_norms, self.source_norms)
            ],
            "guard": self.guard,
        }

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
        return path


def transformed_residual(m: KGModel, nf: NormalFormCoeffs, vhat: np.ndarray, t: float) -> tuple[float, float]:
    """L^2 norm of LHS - RHS of the transformed equation at one state, and of the source terms."""
    g = m.grid
    o = g.origin_index
    nhat, v = m.nonlinear_hat(vhat)
    v0 = v[o]
    # d/dt v(t,0) from the equation itself
    dv0 = g.ifft(1j * m.omega * vhat + nhat)[o]
    a1, a2, a3 = nf.a1.values, nf.a2.values, nf.a3.values
    Q = a1 * v0 * v0 + a2 * abs(v0) ** 2 + a3 * np.conj(v0) ** 2
    dQ = 2 * a1 * v0 * dv0 + 2 * a2 * (dv0 * np.conj(v0)).real + 2 * a3 * np.conj(v0) * np.conj(dv0)
    lhs = nhat + g.fft(dQ) - 1j * m.omega * g.fft(Q)
    w = np.exp(-1j * t) * v0
    dw = np.exp(-1j * t) * (dv0 - 1j * v0)
    src = (
        2 * a1 * np.exp(2j * t) * dw * w
        + 2 * a2 * (dw * np.conj(w)).real
        + 2 * a3 * np.exp(-2j * t) * np.conj(dw) * np.conj(w)
    )
    u = 2.0 * v.real
    u0 = u[o]
    a = nf.alpha
    # the last term vanishes when the model's alpha is the one the normal
    # form was built from; it keeps the identity exact otherwise
    rhs = g.fft(src) + m.duhamel * g.fft(
        a * (u * u - u0 * u0) + m.gamma * u**3 + (m.alpha - a) * u * u
    )
    return g.l2_spectral(lhs - rhs), g.l2(src)


def residual_check(traj: Trajectory, nf: NormalFormCoeffs, out=None) -> ResidualReport:
    """Verify the transformed equation at every checkpoint of ``traj``.

    Time derivatives come from the equation and the chain rule on Q, never
    from finite differences.  If ``out`` is a directory the report is written
    to ``out/normalform.json``.
    """
    m = traj.model()
    if not m.grid.same_as(nf.grid):
        raise ValueError("normal form computed on a different grid")
    res, norms, srcs = [], [], []
    for i, t in enumerate(traj.times):
        vhat = traj.vhat(i)
        r, s = transformed_residual(m, nf, vhat, float(t))
        res.append(r)
        srcs.append(s)
        norms.append(m.grid.l2_spectral(vhat))
    rep = ResidualReport(np.asarray(traj.times), np.array(res), np.array(norms), np.array(srcs), nf.guard)
    if out is not None:
        rep.save(Path(out) / "normalform.json")
    return rep


def source_series(traj: Trajectory, nf: NormalFormCoeffs, stride: int = 10) -> tuple[np.ndarray, np.ndarray]:
    """||source terms||_{L^2} along the dense series (every ``stride``-th step).

    Evaluated exactly from the recorded origin value v(t,0) and the
    phase-filtered derivative d/dt(e^{-it} v)(t,0).
    """
    t = traj.dense["t"][::stride]
    v0 = traj.dense["origin"][::stride]
    dw = traj.dense["dtw0"][::stride]
    w = np.exp(-1j * t) * v0
    a1, a2, a3 = nf.a1.values, nf.a2.values, nf.a3.values
    g = nf.grid
    out = np.empty(len(t))
    for n in range(len(t)):
        src = (
            2 * a1 * np.exp(2j * t[n]) * dw[n] * w[n]
            + 2 * a2 * (dw[n] * np.conj(w[n])).real
            + 2 * a3 * np.exp(-2j * t[n]) * np.conj(dw[n]) * np.conj(w[n])
        )
        out[n] = g.l2(src)
    return t, out
