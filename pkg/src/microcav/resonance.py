"""Resonance structure of the assembled cavity.

Two complementary views of the same physics:

* ``find_resonances`` / ``dispersion_map`` locate maxima of the full-stack
  transmission T(lambda), which is what a spectrometer sees.
* ``PhaseModel`` encodes the exact round-trip phase condition.  Splitting
  the cavity at the fiber-coating surface, a resonance satisfies
  ``4 pi t_g / lambda + arg r_fiber(lambda) + arg r_rest(lambda) = 2 pi (q+1)``
  where r_fiber is the fiber mirror seen from the gap and r_rest the
  reflection of everything beyond the gap (membrane, second gap, plane
  mirror).  The phases are unwrapped continuously in wavelength and
  anchored to their principal values at the mirror design wavelength, so
  mode orders are reproducible across calls for a given geometry.

The mode order convention q = round(phase / 2pi) - 1 counts out the two
~pi mirror reflection phases; for an ideal empty cavity it reproduces
lambda_q = 2 L / q exactly.  Labels increment by exactly 1 between
adjacent fundamental resonances.

Air-like vs diamond-like classification compares |d lambda / d t_g| with
the slope lambda/t_g of an empty cavity whose whole length is the gap:
above 60% of it -> air-like, below 25% -> diamond-like, else mixed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.signal import find_peaks

from . import constants
from .stack import AIR, CavityAssembly, LayerStack, flatten_assembly
from .tmm import _wave_amplitudes, amplitude_coefficients, transmission


class NoResonanceError(RuntimeError):
    """No resonance exists in the requested window."""


class OffResonanceError(RuntimeError):
    """Field-based quantities requested too far from a resonance."""


@dataclass(frozen=True)
class ResonancePoint:
    """One transmission resonance of the assembled cavity."""

    gap_nm: float
    wavelength_nm: float
    q_gap: int
    character: str  # "air-like" | "diamond-like" | "mixed"

    def to_dict(self) -> dict:
        return {
            "gap_nm": self.gap_nm,
            "wavelength_nm": self.wavelength_nm,
            "q_gap": self.q_gap,
            "character": self.character,
        }


# anchor for phase unwrapping; any fixed wavelength works, the mirror
# design wavelength keeps mode orders stable across call sites
_ANCHOR_NM = constants.MIRROR_CENTER_NM


class PhaseModel:
    """Cached unwrapped mirror phases for one geometry over one window.

    All resonance solving reduces to interpolation on two dense phase
    grids, so repeated solves (dispersion fits, lifetime curves) stay
    cheap.  The gap itself enters analytically and is not part of the
    cache, so one model serves every gap value.
    """

    def __init__(self, assembly: CavityAssembly, wl_min_nm: float, wl_max_nm: float, step_nm: float = 0.02):
        lo = min(wl_min_nm, _ANCHOR_NM - 2.0)
        hi = max(wl_max_nm, _ANCHOR_NM + 2.0)
        n = int(np.ceil((hi - lo) / step_nm)) + 1
        self.wl = np.linspace(lo, hi, n)
        self.assembly = assembly

        fiber = assembly.fiber_mirror.as_stack(AIR)
        rest_layers = []
        if assembly.membrane is not None:
            rest_layers.append(assembly.membrane)
        if assembly.gap2_nm > 0:
            from .stack import Layer

            rest_layers.append(Layer(AIR, assembly.gap2_nm))
        rest_layers.extend(reversed(assembly.plane_mirror.layers))
        rest = LayerStack(AIR, tuple(rest_layers), assembly.plane_mirror.substrate)

        r_l, _ = amplitude_coefficients(fiber, self.wl)
        r_r, _ = amplitude_coefficients(rest, self.wl)
        self.mag = np.abs(r_l) * np.abs(r_r)
        self.phi_mirrors = self._anchored_unwrap(r_l) + self._anchored_unwrap(r_r)

    def _anchored_unwrap(self, r: np.ndarray) -> np.ndarray:
        phi = np.unwrap(np.angle(r))
        i0 = int(np.argmin(np.abs(self.wl - _ANCHOR_NM)))
        # anchor to the principal value in [0, 2pi): mirrors reflecting with
        # phase ~pi must not flip to ~-pi, or mode orders would shift by 2
        principal = np.angle(r[i0]) % (2.0 * np.pi)
        return phi + 2.0 * np.pi * np.round((principal - phi[i0]) / (2.0 * np.pi))

    # -- continuous quantities ------------------------------------------------

    def mirror_phase(self, wl_nm):
        return np.interp(wl_nm, self.wl, self.phi_mirrors)

    def round_trip_phase(self, wl_nm, gap_nm: float):
        return 4.0 * np.pi * gap_nm / np.asarray(wl_nm, dtype=float) + self.mirror_phase(wl_nm)

    def mode_order(self, wl_nm: float, gap_nm: float) -> int:
        return int(np.round(self.round_trip_phase(wl_nm, gap_nm) / (2.0 * np.pi) - 1.0))

    def group_length_nm(self, wl_nm) -> float:
        """Optical length of everything except the gap, (dphi/dk) / 2."""
        k = 2.0 * np.pi / self.wl
        dphi_dk = np.gradient(self.phi_mirrors, k)
        return float(np.interp(wl_nm, self.wl, 0.5 * dphi_dk))

    def linewidth_nm(self, wl_nm: float, gap_nm: float) -> float:
        """Airy FWHM estimate from the round-trip amplitude |r_L r_R|."""
        rho = float(np.interp(wl_nm, self.wl, self.mag))
        rho = min(rho, 1.0 - 1e-12)
        finesse = np.pi * np.sqrt(rho) / (1.0 - rho)
        l_opt = gap_nm + self.group_length_nm(wl_nm)
        fsr = wl_nm**2 / (2.0 * l_opt)
        return fsr / finesse

    # -- solving --------------------------------------------------------------

    def solve_wavelength(self, q: int, gap_nm: float, window: tuple[float, float] | None = None) -> float:
        """Resonance wavelength of mode order q at a given gap.

        Scans the cached grid for sign changes of the phase miss and
        refines with brentq; raises NoResonanceError when the mode does
        not cross the window.
        """
        lo = self.wl[0] if window is None else max(window[0], self.wl[0])
        hi = self.wl[-1] if window is None else min(window[1], self.wl[-1])
        sel = (self.wl >= lo) & (self.wl <= hi)
        wl = self.wl[sel]
        if wl.size < 2:
            raise NoResonanceError("window outside the cached phase grid")
        target = 2.0 * np.pi * (q + 1.0)
        miss = 4.0 * np.pi * gap_nm / wl + self.phi_mirrors[sel] - target
        sign_change = np.nonzero(np.diff(np.signbit(miss)))[0]
        if sign_change.size == 0:
            raise NoResonanceError(f"mode q={q} has no resonance in [{lo:.2f}, {hi:.2f}] nm at gap {gap_nm:.1f} nm")
        i = int(sign_change[0])

        def f(x):
            return 4.0 * np.pi * gap_nm / x + self.mirror_phase(x) - target

        return float(brentq(f, wl[i], wl[i + 1], xtol=1e-9))

    def solve_gap(self, q: int, wl_nm: float) -> float:
        """Gap putting mode order q on resonance at a given wavelength."""
        gap = (2.0 * np.pi * (q + 1.0) - self.mirror_phase(wl_nm)) * wl_nm / (4.0 * np.pi)
        return float(gap)

    def retune_gap(self, wl_nm: float, target_gap_nm: float) -> tuple[float, int]:
        """(gap, q) of the resonance at wl nearest to a target gap."""
        q_float = self.round_trip_phase(wl_nm, target_gap_nm) / (2.0 * np.pi) - 1.0
        best = None
        for q in (int(np.floor(q_float)), int(np.ceil(q_float))):
            gap = self.solve_gap(q, wl_nm)
            if gap <= 0:
                continue
            if best is None or abs(gap - target_gap_nm) < abs(best[0] - target_gap_nm):
                best = (gap, q)
        if best is None:
            raise NoResonanceError(f"no positive gap puts {wl_nm} nm on resonance near {target_gap_nm} nm")
        return best

    def nearest_resonance(self, wl_nm: float, gap_nm: float) -> tuple[float, int]:
        """(wavelength, q) of the resonance closest to wl at this gap."""
        q_float = self.round_trip_phase(wl_nm, gap_nm) / (2.0 * np.pi) - 1.0
        best = None
        for q in (int(np.floor(q_float)), int(np.ceil(q_float))):
            try:
                w = self.solve_wavelength(q, gap_nm)
            except NoResonanceError:
                continue
            if best is None or abs(w - wl_nm) < abs(best[0] - wl_nm):
                best = (w, q)
        if best is None:
            raise NoResonanceError(f"no resonance near {wl_nm} nm at gap {gap_nm} nm")
        return best


def _phase_model(assembly: CavityAssembly, window: tuple[float, float], margin_nm: float = 5.0) -> PhaseModel:
    return PhaseModel(assembly, window[0] - margin_nm, window[1] + margin_nm)


def classify_character(
    pm: PhaseModel, q: int, gap_nm: float, wl_nm: float, delta_gap_nm: float = 2.0
) -> str:
    """Air-like / diamond-like / mixed from the dispersion slope d lambda/d t_g."""
    try:
        wl_plus = pm.solve_wavelength(q, gap_nm + delta_gap_nm)
        wl_minus = pm.solve_wavelength(q, gap_nm - delta_gap_nm)
    except NoResonanceError:
        return "mixed"
    slope = abs(wl_plus - wl_minus) / (2.0 * delta_gap_nm)
    # reference: slope of an empty cavity whose whole length is the gap
    slope_ref = wl_nm / gap_nm
    if slope >= 0.60 * slope_ref:
        return "air-like"
    if slope <= 0.25 * slope_ref:
        return "diamond-like"
    return "mixed"


def find_resonances(
    assembly: CavityAssembly,
    gap_nm: float,
    wavelength_window: tuple[float, float],
    rel_prominence: float = 1e-3,
    max_grid: int = 400_000,
) -> list[ResonancePoint]:
    """All transmission maxima in the window, refined and labeled.

    The wavelength grid is sized so that at least ~6 points span the
    narrowest expected linewidth; each grid maximum is refined by
    parabolic interpolation on log T, labeled with its mode order from
    the round-trip phase and classified by dispersion slope.
    """
    lo, hi = wavelength_window
    if not hi > lo:
        raise ValueError("empty wavelength window")
    cav = assembly.with_gap(gap_nm)
    pm = _phase_model(cav, wavelength_window)
    mid = 0.5 * (lo + hi)
    width = pm.linewidth_nm(mid, gap_nm)
    n = int(np.clip(np.ceil(6.0 * (hi - lo) / width), 1001, max_grid))
    wl = np.linspace(lo, hi, n)
    t = transmission(flatten_assembly(cav), wl)

    idx, _ = find_peaks(t, prominence=rel_prominence * float(np.max(t)))
    points = []
    logt = np.log(np.maximum(t, 1e-300))
    for i in idx:
        if i == 0 or i == n - 1:
            continue
        denom = logt[i - 1] - 2.0 * logt[i] + logt[i + 1]
        shift = 0.0 if denom >= 0 else 0.5 * (logt[i - 1] - logt[i + 1]) / denom
        wl_res = wl[i] + shift * (wl[1] - wl[0])
        q = pm.mode_order(wl_res, gap_nm)
        char = classify_character(pm, q, gap_nm, wl_res)
        points.append(ResonancePoint(gap_nm, float(wl_res), q, char))
    return points


@dataclass(frozen=True)
class DispersionMap:
    """Transmission T(gap, wavelength) on a dense rectangular grid.

    ``t`` has shape (len(gaps), len(wavelengths)); row i is the spectrum at
    ``gaps_nm[i]``.  ``rows()`` yields (gap_nm, wavelength_nm, T) records in
    gap-major order, the layout of the CSV export.
    """

    gaps_nm: np.ndarray
    wavelengths_nm: np.ndarray
    t: np.ndarray

    def rows(self):
        for i, g in enumerate(self.gaps_nm):
            for j, w in enumerate(self.wavelengths_nm):
                yield float(g), float(w), float(self.t[i, j])


def dispersion_map(
    assembly: CavityAssembly,
    gap_range_nm: tuple[float, float],
    gap_steps: int,
    wavelength_window: tuple[float, float],
    wavelength_steps: int,
) -> DispersionMap:
    """Dense transmission map over a gap x wavelength grid."""
    if gap_steps < 2 or wavelength_steps < 2:
        raise ValueError("need at least 2 steps per axis")
    gaps = np.linspace(gap_range_nm[0], gap_range_nm[1], gap_steps)
    wls = np.linspace(wavelength_window[0], wavelength_window[1], wavelength_steps)
    t = np.empty((gap_steps, wavelength_steps))
    for i, g in enumerate(gaps):
        t[i] = transmission(flatten_assembly(assembly.with_gap(g)), wls)
    return DispersionMap(gaps, wls, t)


# ---------------------------------------------------------------------------
# field-energy integrals and the effective length
# ---------------------------------------------------------------------------


def _expm1_over(c: float, d: float) -> float:
    """(exp(c d) - 1)/c with the c -> 0 limit."""
    x = c * d
    if abs(x) < 1e-12:
        return d * (1.0 + 0.5 * x)
    return float(np.expm1(x) / c)


def _layer_energy(a: complex, b: complex, k: complex, d: float) -> float:
    """Integral of |a e^{ikz} + b e^{-ikz}|^2 over a layer of thickness d."""
    tiny = 1e-140
    kp, kpp = k.real, k.imag
    total = 0.0
    if abs(a) > tiny:
        total += abs(a) ** 2 * _expm1_over(-2.0 * kpp, d)
    if abs(b) > tiny:
        total += abs(b) ** 2 * _expm1_over(2.0 * kpp, d)
    if abs(a) > tiny and abs(b) > tiny:
        if abs(kp) < 1e-12:
            cross = a * np.conj(b) * d
        else:
            cross = a * np.conj(b) * (np.exp(2j * kp * d) - 1.0) / (2j * kp)
        total += 2.0 * cross.real
    return total


def _layer_peak_intensity(a: complex, b: complex, k: complex, d: float) -> float:
    """Max of |a e^{ikz} + b e^{-ikz}|^2 over z in [0, d] (lossless k)."""
    if abs(k.imag) > 1e-12:
        z = np.linspace(0.0, d, 2001)
        e = a * np.exp(1j * k * z) + b * np.exp(-1j * k * z)
        return float(np.max(np.abs(e) ** 2))
    base = abs(a) ** 2 + abs(b) ** 2
    if abs(a) < 1e-140 or abs(b) < 1e-140:
        return base
    phi = np.angle(a * np.conj(b))
    kp = k.real
    # antinode where cos(2 k z + phi) = 1
    z_star = (-phi) / (2.0 * kp)
    period = np.pi / kp
    z_star -= np.floor(z_star / period) * period
    if 0.0 <= z_star <= d:
        return (abs(a) + abs(b)) ** 2
    ends = [abs(a * np.exp(1j * kp * z) + b * np.exp(-1j * kp * z)) ** 2 for z in (0.0, d)]
    return float(max(ends))


def _energy_ratio(assembly: CavityAssembly, wavelength_nm: float, normalize: str) -> float:
    """Integral of n^2 |E|^2 over the stack / its peak in the host layer.

    Per-layer log scales are referenced to the host layer, so extreme
    scale separation (opaque mirrors) degrades gracefully instead of
    over/underflowing.
    """
    stack = flatten_assembly(assembly)
    amps, log_scales, _, _ = _wave_amplitudes(stack, wavelength_nm)

    if normalize == "auto":
        normalize = "membrane" if assembly.membrane is not None else "gap"
    n_fiber_layers = len(assembly.fiber_mirror.layers)
    if normalize == "membrane":
        if assembly.membrane is None:
            raise ValueError("normalize='membrane' requires a membrane")
        j_norm = n_fiber_layers + (1 if assembly.gap_nm > 0 else 0)
    elif normalize == "gap":
        if assembly.gap_nm <= 0:
            raise ValueError("normalize='gap' requires a nonzero gap")
        j_norm = n_fiber_layers
    else:
        raise ValueError(f"unknown normalize mode {normalize!r}")

    layer = stack.layers[j_norm]
    a, b = amps[j_norm]
    k = 2.0 * np.pi * layer.material.nc / wavelength_nm
    peak = layer.material.n**2 * _layer_peak_intensity(a, b, k, layer.thickness_nm)
    ls_norm = log_scales[j_norm]

    total = 0.0
    for layer, (a, b), ls in zip(stack.layers, amps, log_scales):
        k = 2.0 * np.pi * layer.material.nc / wavelength_nm
        energy = layer.material.n**2 * _layer_energy(a, b, k, layer.thickness_nm)
        if energy <= 0.0:
            continue
        log_term = 2.0 * (ls - ls_norm) + np.log(energy) - np.log(peak)
        if log_term < -745.0:
            continue
        total += np.inf if log_term > 700.0 else np.exp(log_term)
    return total


def effective_length(
    assembly: CavityAssembly,
    wavelength_nm: float,
    normalize: str = "auto",
    tolerance_linewidths: float = 0.5,
) -> float:
    """Energy-weighted effective cavity length in um.

    L_eff = 2 * integral of n^2 |E|^2 over the stack (mirror penetration
    included) divided by the peak n^2 |E|^2 in the emitter's host layer
    (the membrane when present, else the gap).  The factor 2 makes an
    ideal hard-mirror empty cavity come out at its geometric length.

    Requires the assembly to sit within ``tolerance_linewidths`` cavity
    linewidths of a resonance, else the standing-wave normalization is
    ill-defined and OffResonanceError is raised.
    """
    pm = PhaseModel(assembly, wavelength_nm - 5.0, wavelength_nm + 5.0)
    try:
        wl_res, _ = pm.nearest_resonance(wavelength_nm, assembly.gap_nm)
    except NoResonanceError as exc:
        raise OffResonanceError(str(exc)) from exc
    width = pm.linewidth_nm(wl_res, assembly.gap_nm)
    if abs(wavelength_nm - wl_res) > tolerance_linewidths * width:
        raise OffResonanceError(
            f"{wavelength_nm} nm is {abs(wavelength_nm - wl_res):.4g} nm from the nearest "
            f"resonance at {wl_res:.4f} nm (linewidth {width:.4g} nm)"
        )
    return float(2.0 * _energy_ratio(assembly, wavelength_nm, normalize)) * 1e-3


def membrane_interface_intensity(assembly: CavityAssembly, wavelength_nm: float) -> float:
    """Standing-wave weight of the membrane's fiber-facing surface.

    Returns n^2 |E|^2 at that interface over the peak intracavity
    n^2 |E|^2, using the larger (membrane-side) index at the boundary;
    this is the ``relative_intensity`` input of
    :func:`microcav.metrics.roughness_loss`.
    """
    from .tmm import _scale_factors

    if assembly.membrane is None:
        raise ValueError("assembly has no membrane")
    stack = flatten_assembly(assembly)
    amps, log_scales, _, _ = _wave_amplitudes(stack, wavelength_nm)
    factors = _scale_factors(log_scales)
    n_fiber = len(assembly.fiber_mirror.layers)
    j_mem = n_fiber + (1 if assembly.gap_nm > 0 else 0)
    a, b = amps[j_mem]
    e2_if = abs((a + b) * factors[j_mem]) ** 2
    n_d = assembly.membrane.material.n

    peak = 0.0
    intracavity = range(n_fiber, j_mem + (2 if assembly.gap2_nm > 0 else 1))
    for j in intracavity:
        layer = stack.layers[j]
        k = 2.0 * np.pi * layer.material.nc / wavelength_nm
        aj, bj = amps[j]
        peak = max(peak, layer.material.n**2 * factors[j] ** 2 * _layer_peak_intensity(aj, bj, k, layer.thickness_nm))
    return float(np.clip(n_d**2 * e2_if / peak, 0.0, 1.0))
