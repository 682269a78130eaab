"""Initial perturbations: compactly supported bump and band-limited noise.

Both are rescaled so their H1 norm equals the requested amplitude exactly,
which is what every scaling experiment sweeps over.
"""

from __future__ import annotations

import numpy as np

from ..errors import ParameterError
from ..grid import Field, Grid
from ..profiles import SolitonState
from ..solver import h1_norm
from .config import PerturbationConfig


def smooth_bump(grid: Grid, center: float, width: float) -> Field:
    """C-infinity bump exp(1 - 1/(1 - r^2)) supported on |x - center| < width."""
    if not (width > 0):
        raise ParameterError(f"bump width must be positive, got {width}")
    r = grid.wrap(grid.x - center) / width
    vals = np.zeros(grid.n)
    inside = np.abs(r) < 1.0
    vals[inside] = np.exp(1.0 - 1.0 / (1.0 - r[inside] ** 2))
    return Field(grid, vals)


def band_noise(grid: Grid, seed: int, kmin: float, kmax: float) -> Field:
    """Random-phase field with spectrum supported on kmin <= |k| <= kmax."""
    if not (0.0 <= kmin < kmax):
        raise ParameterError(f"need 0 <= kmin < kmax, got ({kmin}, {kmax})")
    rng = np.random.default_rng(seed)
    k = grid.wavenumbers
    band = (k >= kmin) & (k <= kmax) & (k > 0)
    if not np.any(band):
        raise ParameterError(f"no grid modes inside band ({kmin}, {kmax}) "
                             f"at spacing {grid.spacing:g}")
    coeff = np.zeros(k.size, dtype=complex)
    amp = rng.standard_normal(int(band.sum()))
    phase = rng.uniform(0.0, 2.0 * np.pi, int(band.sum()))
    coeff[band] = amp * np.exp(1j * phase)
    if grid.n % 2 == 0:
        coeff[-1] = 0.0  # keep the field band-limited below Nyquist
    return Field(grid, np.fft.irfft(coeff, grid.n))


def _resolve_center(location, state: SolitonState) -> float:
    if isinstance(location, str):
        k = int(location.split(":", 1)[1])
        x = np.sort(state.position_array)
        if not (1 <= k <= state.n - 1):
            raise ParameterError(f"gap index {k} outside 1..{state.n - 1}")
        return 0.5 * (x[k - 1] + x[k])
    return float(location)


def make_perturbation(cfg: PerturbationConfig, grid: Grid,
                      state: SolitonState) -> Field:
    """Build the configured perturbation with H1 norm exactly cfg.amplitude."""
    if cfg.kind == "none" or cfg.amplitude == 0.0:
        return Field(grid, np.zeros(grid.n))
    if cfg.kind == "bump":
        raw = smooth_bump(grid, _resolve_center(cfg.location, state), cfg.width)
    elif cfg.kind == "noise":
        raw = band_noise(grid, cfg.seed, cfg.kmin, cfg.kmax)
    else:
        raise ParameterError(f"unknown perturbation kind {cfg.kind!r}")
    nrm = h1_norm(raw)
    if nrm == 0.0:
        raise ParameterError("perturbation is identically zero; cannot normalize")
    return Field(grid, raw.values * (cfg.amplitude / nrm))
