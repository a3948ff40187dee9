"""Cavity length-scan and lock-trace analysis.

Covers the bare-cavity characterization chain: resonance peaks in a length
scan, finesse from spacing/width ratios, side-of-fringe inversion of
transmission into length deviations, and windowed noise spectra.

Side-of-fringe conventions (documented constants of this toolkit):

* cavity linewidth in length units: DL_FWHM = lambda / (2 F);
* lock setpoint: the ``setpoint_fraction`` point of the Lorentzian fringe
  (default one half, i.e. the half-maximum);
* the trace median is assumed to sit at the setpoint for calibration;
* samples past the fringe peak cannot be inverted unambiguously: they are
  excluded from the deviation statistics and reported as clipped.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import find_peaks, peak_widths


@dataclass(frozen=True)
class ScanTrace:
    """Uniformly sampled cavity-length scan, detector units."""

    transmission: np.ndarray
    reflection: np.ndarray | None = None
    dt_s: float = 1.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        y = np.asarray(self.transmission, dtype=float)
        object.__setattr__(self, "transmission", y)
        if y.ndim != 1 or y.size < 8:
            raise ValueError("transmission must be a 1D array of >= 8 samples")
        if not np.all(np.isfinite(y)):
            raise ValueError("transmission must be finite")


@dataclass(frozen=True)
class ScanPeak:
    """One resonance in a length scan, positions/widths in sample units."""

    position: float
    height: float
    fwhm: float
    prominence: float
    fundamental: bool


def detect_scan_resonances(
    trace: ScanTrace,
    prominence: float = 0.05,
    fundamental_fraction: float = 0.5,
) -> list[ScanPeak]:
    """Resonance peaks above a prominence threshold, sorted by position.

    ``prominence`` is a fraction of the full trace swing.  Peaks at or
    above ``fundamental_fraction`` of the tallest peak are flagged as
    fundamental modes; smaller ones are higher-order transverse modes.
    Returns an empty list when nothing clears the threshold.
    """
    y = trace.transmission
    swing = float(np.ptp(y))
    if swing == 0.0:
        return []
    idx, props = find_peaks(y, prominence=prominence * swing)
    if idx.size == 0:
        return []
    widths = peak_widths(y, idx, rel_height=0.5)[0]
    heights = y[idx] - float(np.min(y))
    top = float(np.max(heights))
    peaks = []
    for i, pos in enumerate(idx):
        # parabolic refinement of the peak position
        if 0 < pos < y.size - 1:
            denom = y[pos - 1] - 2.0 * y[pos] + y[pos + 1]
            shift = 0.0 if denom >= 0 else 0.5 * (y[pos - 1] - y[pos + 1]) / denom
        else:
            shift = 0.0
        peaks.append(
            ScanPeak(
                position=float(pos + shift),
                height=float(heights[i]),
                fwhm=float(widths[i]),
                prominence=float(props["prominences"][i]),
                fundamental=bool(heights[i] >= fundamental_fraction * top),
            )
        )
    return sorted(peaks, key=lambda p: p.position)


def finesse_from_scan(peaks: list[ScanPeak]) -> float:
    """F = mean adjacent fundamental-peak spacing / mean fundamental FWHM."""
    fund = [p for p in peaks if p.fundamental]
    if len(fund) < 2:
        raise ValueError(f"need >= 2 fundamental peaks, got {len(fund)}")
    positions = np.array([p.position for p in fund])
    spacings = np.diff(np.sort(positions))
    mean_fwhm = float(np.mean([p.fwhm for p in fund]))
    if mean_fwhm <= 0:
        raise ValueError("degenerate peak widths")
    return float(np.mean(spacings) / mean_fwhm)


@dataclass(frozen=True)
class LockTrace:
    """Transmission time trace near a lock setpoint, plus cavity metadata."""

    time_s: np.ndarray
    transmission: np.ndarray
    wavelength_nm: float
    finesse: float
    setpoint_fraction: float = 0.5
    state: str = "unlocked"

    def __post_init__(self):
        t = np.asarray(self.time_s, dtype=float)
        y = np.asarray(self.transmission, dtype=float)
        object.__setattr__(self, "time_s", t)
        object.__setattr__(self, "transmission", y)
        if t.shape != y.shape or t.ndim != 1 or t.size < 16:
            raise ValueError("need matching 1D time/transmission arrays")
        dt = np.diff(t)
        if np.any(dt <= 0) or np.ptp(dt) > 1e-6 * dt[0]:
            raise ValueError("time axis must be a uniform increasing grid")
        if not 0.0 < self.setpoint_fraction < 1.0:
            raise ValueError("setpoint fraction must lie in (0, 1)")

    @property
    def rate_hz(self) -> float:
        return 1.0 / float(self.time_s[1] - self.time_s[0])

    def linewidth_pm(self) -> float:
        """Cavity linewidth in length units, DL_FWHM = lambda/(2F), in pm."""
        return self.wavelength_nm / (2.0 * self.finesse) * 1e3


@dataclass(frozen=True)
class LengthDeviation:
    """Per-sample cavity length deviation from the lock setpoint."""

    time_s: np.ndarray
    delta_pm: np.ndarray  # NaN where the sample was clipped
    sigma_pm: float
    n_clipped: int
    linewidth_pm: float

    @property
    def valid(self) -> np.ndarray:
        return ~np.isnan(self.delta_pm)


def length_deviation(trace: LockTrace) -> LengthDeviation:
    """Invert the transmission fringe into length deviations, in pm.

    The Lorentzian fringe T(d) = T_max / (1 + (2 d / DL)^2) is inverted on
    the lock side of the resonance around the setpoint.  The fringe
    maximum is calibrated from the trace median: the median commutes with
    the monotone fringe map, so for symmetric length noise it sits exactly
    at the setpoint, unlike the mean.  Samples whose transmission exceeds
    the calibrated fringe maximum, or is nonpositive, cannot be inverted:
    they are reported NaN and excluded from sigma.  (Excursions past the
    peak onto the far fringe side are inherently ambiguous and map onto
    the lock side; that is the side-of-fringe method's blind spot.)
    """
    dl = trace.linewidth_pm()
    s = trace.setpoint_fraction
    t_max = float(np.median(trace.transmission)) / s
    delta_set = 0.5 * dl * np.sqrt(1.0 / s - 1.0)
    y = trace.transmission
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = t_max / y - 1.0
        delta = 0.5 * dl * np.sqrt(ratio) - delta_set
    clipped = (y <= 0.0) | (ratio < 0.0)
    delta = np.where(clipped, np.nan, delta)
    n_clipped = int(np.count_nonzero(clipped))
    good = delta[~np.isnan(delta)]
    if good.size < 2:
        raise ValueError("too few invertible samples on the fringe")
    return LengthDeviation(
        time_s=trace.time_s,
        delta_pm=delta,
        sigma_pm=float(np.std(good)),
        n_clipped=n_clipped,
        linewidth_pm=dl,
    )


def fringe_transmission(delta_pm, linewidth_pm: float, setpoint_fraction: float = 0.5, t_max: float = 1.0):
    """Forward fringe model: transmission at a deviation from the setpoint."""
    delta_set = 0.5 * linewidth_pm * np.sqrt(1.0 / setpoint_fraction - 1.0)
    d = np.asarray(delta_pm, dtype=float) + delta_set
    return t_max / (1.0 + (2.0 * d / linewidth_pm) ** 2)


@dataclass(frozen=True)
class NoiseSpectrum:
    """One-sided amplitude spectral density of a length-deviation series.

    Hann-windowed periodogram, density normalization: ``asd`` in
    pm/sqrt(Hz), so the integral of asd^2 over frequency reproduces the
    time-domain variance (Parseval, up to the window's sampling wobble).
    ``peaks`` are (frequency_hz, amplitude_pm) of prominent spectral
    lines, the amplitude recovered by integrating the PSD over +-3 bins.
    """

    freq_hz: np.ndarray
    asd: np.ndarray
    peaks: list[tuple[float, float]]

    def integrated_variance(self) -> float:
        df = self.freq_hz[1] - self.freq_hz[0]
        return float(np.sum(self.asd**2) * df)


def noise_spectrum(
    series_pm,
    sample_rate_hz: float | None = None,
    time_s=None,
    peak_threshold: float = 8.0,
) -> NoiseSpectrum:
    """Hann-windowed one-sided ASD of a uniformly sampled series.

    Provide either ``sample_rate_hz`` or a uniform ``time_s`` axis
    (non-uniform axes are rejected).  Spectral lines exceeding
    ``peak_threshold`` times the median ASD are returned in ``peaks``.
    """
    x = np.asarray(series_pm, dtype=float)
    if x.size < 256:
        raise ValueError("need at least 256 samples")
    if sample_rate_hz is None:
        if time_s is None:
            raise ValueError("provide sample_rate_hz or time_s")
        t = np.asarray(time_s, dtype=float)
        dt = np.diff(t)
        if np.any(dt <= 0) or np.ptp(dt) > 1e-6 * np.mean(dt):
            raise ValueError("non-uniform sampling")
        sample_rate_hz = 1.0 / float(np.mean(dt))

    x = x - np.mean(x)
    n = x.size
    w = np.hanning(n)
    spec = np.fft.rfft(x * w)
    # density normalization: sum(PSD) * df == windowed sample variance
    psd = 2.0 * np.abs(spec) ** 2 / (sample_rate_hz * np.sum(w**2))
    psd[0] /= 2.0
    if n % 2 == 0:
        psd[-1] /= 2.0
    freq = np.fft.rfftfreq(n, d=1.0 / sample_rate_hz)
    asd = np.sqrt(psd)

    floor = float(np.median(asd))
    peaks = []
    if floor > 0:
        idx, _ = find_peaks(asd, height=peak_threshold * floor)
        df = freq[1] - freq[0]
        for i in idx:
            lo, hi = max(i - 3, 0), min(i + 4, psd.size)
            power = float(np.sum(psd[lo:hi]) * df)
            peaks.append((float(freq[i]), float(np.sqrt(2.0 * power))))
    return NoiseSpectrum(freq_hz=freq, asd=asd, peaks=peaks)


@dataclass(frozen=True)
class LockSynthConfig:
    """Recipe for a synthetic unlocked/locked trace pair.

    The unlocked deviation is white noise plus the given spectral lines,
    scaled to ``sigma_unlocked_pm`` exactly.  The locked deviation damps
    every component below ``suppression_edge_hz`` by one common factor
    chosen to hit ``sigma_locked_pm`` exactly, leaving higher frequencies
    untouched.
    """

    sigma_unlocked_pm: float = 290.0
    sigma_locked_pm: float = 60.0
    lines: tuple[tuple[float, float], ...] = ((20.0, 200.0), (293.0, 120.0))
    suppression_edge_hz: float = 800.0
    rate_hz: float = 20_000.0
    n_samples: int = 1 << 17
    wavelength_nm: float = 780.0
    finesse: float = 300.0
    setpoint_fraction: float = 0.5


def synthesize_length_noise(config: LockSynthConfig, seed: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(time_s, unlocked_pm, locked_pm) deviation series for a seed."""
    rng = np.random.default_rng(seed)
    n = config.n_samples
    t = np.arange(n) / config.rate_hz
    if config.sigma_unlocked_pm == 0.0:
        zero = np.zeros(n)
        return t, zero, zero.copy()
    x = rng.normal(size=n)
    for f, amp in config.lines:
        x = x + amp * np.sqrt(2.0) * np.sin(2.0 * np.pi * f * t + rng.uniform(0, 2 * np.pi))
    x = x - np.mean(x)
    x = x * (config.sigma_unlocked_pm / np.std(x))

    spec = np.fft.rfft(x)
    freq = np.fft.rfftfreq(n, d=1.0 / config.rate_hz)
    below = freq < config.suppression_edge_hz
    var_total = config.sigma_unlocked_pm**2
    var_above = np.sum(np.abs(spec[~below]) ** 2) / np.sum(np.abs(spec) ** 2) * var_total
    target = config.sigma_locked_pm**2
    if target <= var_above:
        raise ValueError(
            f"sigma_locked {config.sigma_locked_pm} pm unreachable: "
            f"{np.sqrt(var_above):.1f} pm of noise lies above the suppression edge"
        )
    var_below = var_total - var_above
    g = np.sqrt((target - var_above) / var_below)
    spec_locked = np.where(below, g * spec, spec)
    y = np.fft.irfft(spec_locked, n)
    y = y - np.mean(y)
    y = y * (config.sigma_locked_pm / np.std(y))
    return t, x, y


def synthesize_lock_traces(config: LockSynthConfig, seed: int) -> tuple[LockTrace, LockTrace]:
    """(unlocked, locked) transmission traces through the fringe model.

    Deterministic for a given seed; the underlying deviation statistics
    match the requested sigmas exactly by construction.
    """
    t, x_unlocked, x_locked = synthesize_length_noise(config, seed)
    dl = config.wavelength_nm / (2.0 * config.finesse) * 1e3
    common = dict(
        wavelength_nm=config.wavelength_nm,
        finesse=config.finesse,
        setpoint_fraction=config.setpoint_fraction,
    )
    unlocked = LockTrace(
        t, fringe_transmission(x_unlocked, dl, config.setpoint_fraction), state="unlocked", **common
    )
    locked = LockTrace(
        t, fringe_transmission(x_locked, dl, config.setpoint_fraction), state="locked", **common
    )
    return unlocked, locked
