"""Weighted-mass and linearized-energy functionals around a decomposition.

The transition weight psi ramps from 0 to 1 over the length scale 4/sqrt(sigma0)
and is built from the ambient ground profile: psi' = c_psi Q(sqrt(sigma0) x / 2)
with c_psi fixed so that the total increment is exactly 1. Localized masses,
the speed-ramp quadratic form, its constrained spectrum, and the linearized
energy bookkeeping all live here.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg
from scipy.special import beta as beta_fn
from scipy.special import betainc

from .errors import ParameterError, SpectralFailureError
from .grid import Field, Grid
from .modulation import Decomposition
from .profiles import (ModelParams, SolitonState, _check_p, _sech, eval_Qc,
                       soliton_energy)
from .solver import spectral_derivative


# ---------------------------------------------------------------------------
# transition weight

@dataclass(frozen=True)
class PsiWeight:
    """Monotone 0-to-1 transition weight for a given model and sigma0.

    Closed-form path: psi(x) = (1 + sign(x) I(tanh^2(b x); 1/2, 1/(p-1))) / 2
    with I the regularized incomplete beta and b = (p-1) sqrt(sigma0) / 4;
    its derivative is exactly c_psi Q(sqrt(sigma0) x / 2). The numeric path
    (cumulative spectral quadrature with an analytic left-tail correction)
    exists for cross-validation and must agree to 1e-10.
    """

    p: int
    sigma0: float

    def __post_init__(self):
        _check_p(self.p)
        if not (self.sigma0 > 0) or not math.isfinite(self.sigma0):
            raise ParameterError(f"sigma0 must be positive and finite, got {self.sigma0}")

    @property
    def q(self) -> float:
        return 2.0 / (self.p - 1)

    @property
    def b(self) -> float:
        return 0.25 * (self.p - 1) * math.sqrt(self.sigma0)

    @property
    def amplitude(self) -> float:
        return ((self.p + 1) / 2.0) ** (1.0 / (self.p - 1))

    @property
    def c_psi(self) -> float:
        """Normalization (2 intQ / sqrt(sigma0))^-1 with intQ in closed beta form."""
        intQ = self.amplitude * beta_fn(0.5, 0.5 * self.q) * 2.0 / (self.p - 1)
        return math.sqrt(self.sigma0) / (2.0 * intQ)

    # -- closed-form path ---------------------------------------------------

    def _phi(self, x: np.ndarray) -> np.ndarray:
        return self.c_psi * self.amplitude * _sech(self.b * x) ** self.q

    def _phi2(self, x: np.ndarray) -> np.ndarray:
        s = _sech(self.b * x)
        q = self.q
        return self.c_psi * self.amplitude * self.b**2 * (q * q * s**q - q * (q + 1.0) * s ** (q + 2.0))

    def psi(self, x, deriv: int = 0, method: str = "closed"):
        """psi (deriv 0), psi' (deriv 1) or psi''' (deriv 3) at x."""
        x = np.asarray(x, dtype=np.float64)
        if deriv == 1:
            return self._phi(x)
        if deriv == 3:
            return self._phi2(x)
        if deriv != 0:
            raise ParameterError(f"deriv must be 0, 1 or 3, got {deriv}")
        if method == "closed":
            # swapped-argument incomplete beta: sech^2 stays accurate where
            # tanh^2 would round to 1 and silently drop the far tail
            s2 = _sech(self.b * x) ** 2
            tail = 0.5 * betainc(0.5 * self.q, 0.5, s2)
            return np.where(x < 0, tail, 1.0 - tail)
        if method == "numeric":
            return self._psi_numeric(x)
        raise ParameterError(f"method must be 'closed' or 'numeric', got {method}")

    # -- numeric path (cumulative spectral quadrature) ----------------------

    @cached_property
    def _numeric_table(self):
        # tail decay rate of phi is q*b = sqrt(sigma0)/2 for every p
        rate = self.q * self.b
        half_width = 40.0 / rate  # 40 e-foldings of tail clearance
        m = 1 << max(12, int(np.ceil(np.log2(2.0 * half_width / (0.01 / math.sqrt(self.sigma0))))))
        xs = -half_width + (2.0 * half_width / m) * np.arange(m)
        phi = self._phi(xs)
        ds = xs[1] - xs[0]
        a0 = float(np.mean(phi))
        fh = np.fft.rfft(phi)
        kk = (2.0 * np.pi / (2.0 * half_width)) * np.arange(m // 2 + 1)
        H = np.zeros_like(fh)
        H[1:] = fh[1:] / (1j * kk[1:])
        if m % 2 == 0:
            H[-1] = 0.0
        G = np.fft.irfft(H, m)
        tail_left = self._phi(np.array([-half_width]))[0] / rate  # analytic e^{rate x} tail
        psi_ref = tail_left + a0 * (xs + half_width) + (G - G[0])
        from scipy.interpolate import CubicHermiteSpline
        spline = CubicHermiteSpline(xs, psi_ref, phi)
        return half_width, rate, tail_left, spline

    def _psi_numeric(self, x: np.ndarray) -> np.ndarray:
        half_width, rate, tail_left, spline = self._numeric_table
        shape = x.shape
        x = np.atleast_1d(x)
        out = np.empty_like(x)
        lo = x < -half_width
        hi = x >= half_width - 2.0 / rate  # stay clear of the periodized right edge
        mid = ~(lo | hi)
        out[lo] = tail_left * np.exp(rate * (x[lo] + half_width))
        out[hi] = 1.0 - self._phi(x[hi]) / rate  # right tail, same asymptotic
        out[mid] = spline(x[mid])
        return out.reshape(shape)


def psi_eval(w: PsiWeight, x, deriv: int = 0, method: str = "closed"):
    """Module-level convenience wrapper around PsiWeight.psi."""
    return w.psi(x, deriv=deriv, method=method)


def weight_for(dec_or_state, params: ModelParams) -> PsiWeight:
    state = dec_or_state.state if isinstance(dec_or_state, Decomposition) else dec_or_state
    return PsiWeight(params.p, state.sigma0)


# ---------------------------------------------------------------------------
# localized masses

def _require_sorted_positions(state: SolitonState) -> np.ndarray:
    x = state.position_array
    if x.size > 1 and not np.all(np.diff(x) > 0):
        raise ParameterError("localized functionals require positions sorted increasing")
    return x


def midpoints(state: SolitonState) -> np.ndarray:
    """Midpoints (x_{j-1} + x_j)/2 between consecutive solitons (length N-1)."""
    x = _require_sorted_positions(state)
    return 0.5 * (x[:-1] + x[1:])


@dataclass
class LocalizedMassRecord:
    """Weighted masses to the right of each midpoint, plus edge probes.

    masses[i] = int u^2 psi(x - m_{i+2}) for the midpoint between solitons
    i+1 and i+2 (1-based labels). j_left/j_right probe the mass beyond +-y0
    of the reference soliton.
    """

    t: float
    midpoints: np.ndarray
    masses: np.ndarray
    j_left: float | None
    j_right: float | None
    y0: float | None
    ref_index: int | None


def localized_masses(t: float, u: Field, dec_or_state, w: PsiWeight,
                     params: ModelParams, y0: float | None = None,
                     ref_index: int | None = None) -> LocalizedMassRecord:
    state = dec_or_state.state if isinstance(dec_or_state, Decomposition) else dec_or_state
    x = _require_sorted_positions(state)
    h = u.grid.spacing
    u2 = u.values**2
    mids = midpoints(state)
    masses = np.array([h * float(np.sum(u2 * w.psi(u.grid.x - m))) for m in mids])
    j_left = j_right = None
    if y0 is not None:
        if not (y0 > 0):
            raise ParameterError(f"edge-probe offset y0 must be positive, got {y0}")
        r = state.n - 1 if ref_index is None else int(ref_index)
        if not (0 <= r < state.n):
            raise ParameterError(f"ref_index {ref_index} outside 0..{state.n - 1}")
        j_left = h * float(np.sum(u2 * (1.0 - w.psi(u.grid.x - (x[r] - y0)))))
        j_right = h * float(np.sum(u2 * w.psi(u.grid.x - (x[r] + y0))))
    return LocalizedMassRecord(t=float(t), midpoints=mids, masses=masses,
                               j_left=j_left, j_right=j_right, y0=y0,
                               ref_index=ref_index if y0 is not None else None)


def localized_mass_rate_terms(u: Field, m: float, w: PsiWeight,
                              params: ModelParams) -> tuple[float, float]:
    """Pieces of the exact rate of int u^2 psi(x - m(t)).

    Returns (S1, S2) with d/dt = S1 - mdot * S2:
    S1 = int (-3 u_x^2 + (2p/(p+1)) u^(p+1)) psi' + u^2 psi''',
    S2 = int u^2 psi'.
    """
    h = u.grid.spacing
    xs = u.grid.x - m
    phi = w.psi(xs, 1)
    phi2 = w.psi(xs, 3)
    ux = spectral_derivative(u, 1).values
    v = u.values
    p = params.p
    S1 = h * float(np.sum((-3.0 * ux * ux + (2.0 * p / (p + 1.0)) * v ** (p + 1)) * phi
                          + v * v * phi2))
    S2 = h * float(np.sum(v * v * phi))
    return S1, S2


# ---------------------------------------------------------------------------
# partial speed sums

def dj_sums(dec_or_state, params: ModelParams) -> np.ndarray:
    """Tail sums d_j = sum_{k>=j} c_k^(beta - 1/2), j = 1..N."""
    state = dec_or_state.state if isinstance(dec_or_state, Decomposition) else dec_or_state
    c = state.speed_array
    powers = c ** params.mass_exponent
    return np.cumsum(powers[::-1])[::-1]


def abel_resummed(state_t, state_0, params: ModelParams) -> float:
    """Summation-by-parts combination of the d_j increments with frozen gaps."""
    s_t = state_t.state if isinstance(state_t, Decomposition) else state_t
    s_0 = state_0.state if isinstance(state_0, Decomposition) else state_0
    if s_t.n != s_0.n:
        raise ParameterError("states must have the same number of solitons")
    d_t = dj_sums(s_t, params)
    d_0 = dj_sums(s_0, params)
    c0 = s_0.speed_array
    val = c0[0] * (d_t[0] - d_0[0])
    for j in range(1, s_0.n):
        val += (c0[j] - c0[j - 1]) * (d_t[j] - d_0[j])
    return float(val)


# ---------------------------------------------------------------------------
# quadratic form and its constrained spectrum

def _state_of(dec_or_state) -> SolitonState:
    return dec_or_state.state if isinstance(dec_or_state, Decomposition) else dec_or_state


def _profile_sum(state: SolitonState, params: ModelParams, grid: Grid) -> np.ndarray:
    total = np.zeros(grid.n)
    for c, x0 in zip(state.speeds, state.positions):
        total += eval_Qc(params.p, c, grid.wrap(grid.x - x0))
    return total


def speed_ramp(dec_or_state, w: PsiWeight, grid: Grid) -> np.ndarray:
    """c(x) = c_1 + sum_{j>=2} (c_j - c_{j-1}) psi(x - m_j), on raw coordinates."""
    state = _state_of(dec_or_state)
    _require_sorted_positions(state)
    c = state.speed_array
    out = np.full(grid.n, c[0])
    for j, m in enumerate(midpoints(state), start=1):
        out += (c[j] - c[j - 1]) * w.psi(grid.x - m)
    return out


def bilinear_form(f: Field, g: Field, dec_or_state, w: PsiWeight,
                  params: ModelParams) -> float:
    """int f_x g_x - p R^(p-1) f g + c(x) f g with R the full profile sum."""
    state = _state_of(dec_or_state)
    grid = f.grid
    R = _profile_sum(state, params, grid)
    ramp = speed_ramp(state, w, grid)
    fx = spectral_derivative(f, 1).values
    gx = spectral_derivative(g, 1).values
    h = grid.spacing
    return h * float(np.sum(fx * gx + (-params.p * R ** (params.p - 1) + ramp) * f.values * g.values))


def quadratic_form(eps: Field, dec_or_state, w: PsiWeight, params: ModelParams) -> float:
    return bilinear_form(eps, eps, dec_or_state, w, params)


def linearized_energy_form(eps: Field, dec_or_state, params: ModelParams) -> float:
    """int eps_x^2 - p R^(p-1) eps^2 (no speed ramp), the energy Hessian term."""
    state = _state_of(dec_or_state)
    grid = eps.grid
    R = _profile_sum(state, params, grid)
    ex = spectral_derivative(eps, 1).values
    h = grid.spacing
    return h * float(np.sum(ex * ex - params.p * R ** (params.p - 1) * eps.values**2))


def _second_derivative_matrix(grid: Grid) -> np.ndarray:
    """Dense matrix of -d2/dx2 as the square of the spectral first derivative.

    The symbol is k^2 with the Nyquist entry zeroed, which makes the matrix
    exactly D^T D for the first-derivative matrix D used by the quadrature
    forms, so discrete form values and matrix quadratic forms agree to
    round-off for every vector.
    """
    k = grid.wavenumbers
    sym = k**2
    if grid.n % 2 == 0:
        sym = sym.copy()
        sym[-1] = 0.0
    kernel = np.fft.irfft(sym, grid.n)
    return scipy.linalg.circulant(kernel)


@dataclass
class SpectrumResult:
    lambda_min: float
    eigenvector: Field
    constrained: bool


def constrained_spectrum(dec_or_state, w: PsiWeight, params: ModelParams,
                         grid: Grid, constrained: bool = True) -> SpectrumResult:
    """Smallest eigenvalue of -d2/dx2 - p R^(p-1) + c(x) relative to the H1
    inner product, optionally restricted to the orthocomplement of every
    profile and profile slope."""
    state = _state_of(dec_or_state)
    _require_sorted_positions(state)
    n = grid.n
    D2 = _second_derivative_matrix(grid)
    R = _profile_sum(state, params, grid)
    V = -params.p * R ** (params.p - 1) + speed_ramp(state, w, grid)
    H = D2 + np.diag(V)
    M = np.eye(n) + D2

    if constrained:
        cols = []
        for c, x0 in zip(state.speeds, state.positions):
            y = grid.wrap(grid.x - x0)
            cols.append(eval_Qc(params.p, c, y))
            cols.append(eval_Qc(params.p, c, y, 1))
        C = np.stack(cols, axis=1)
        Z = scipy.linalg.null_space(C.T)
        A = Z.T @ (H @ Z)
        B = Z.T @ (M @ Z)
    else:
        Z = None
        A, B = H, M

    try:
        vals, vecs = scipy.linalg.eigh(A, B, subset_by_index=(0, 0))
    except (scipy.linalg.LinAlgError, np.linalg.LinAlgError) as exc:  # pragma: no cover
        raise SpectralFailureError(f"dense eigensolve failed: {exc}") from exc
    lam = float(vals[0])
    v = vecs[:, 0]
    vec = Z @ v if Z is not None else v
    nrm = math.sqrt(grid.spacing * float(vec @ vec))
    if nrm > 0:
        vec = vec / nrm
    return SpectrumResult(lambda_min=lam, eigenvector=Field(grid, vec), constrained=constrained)


def write_spectral_certificate(path, result: SpectrumResult, dec_or_state,
                               params: ModelParams, grid: Grid,
                               tolerance: float) -> None:
    """JSON record of one positivity certificate."""
    state = _state_of(dec_or_state)
    seps = list(np.diff(state.position_array)) if state.n > 1 else []
    payload = {
        "p": params.p,
        "N": state.n,
        "speeds": list(state.speeds),
        "separations": [float(s) for s in seps],
        "lambda_min": result.lambda_min,
        "constrained": result.constrained,
        "grid": {"n": grid.n, "length": grid.length, "x0": grid.x0},
        "tolerance": tolerance,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# linearized energy bookkeeping

def energy_expansion_residual(u: Field, dec: Decomposition, ref,
                              params: ModelParams) -> float:
    """Drift of the soliton energies plus half the energy Hessian of eps.

    Under exact evolution the total energy is conserved, so this combination
    is controlled by |eps(0)|^2, |eps(t)|^3 and the interaction tail; it is
    the quantity whose smallness certifies the energy linearization.
    """
    ref_state = _state_of(ref)
    state = dec.state
    if state.n != ref_state.n:
        raise ParameterError("reference state must have the same number of solitons")
    drift = sum(soliton_energy(params.p, ct) - soliton_energy(params.p, c0)
                for ct, c0 in zip(state.speeds, ref_state.speeds))
    eps = Field(u.grid, u.values - _profile_sum(state, params, u.grid))
    return float(drift + 0.5 * linearized_energy_form(eps, state, params))
