"""Two-pulse delay scans of c(T), f(T) and their Fourier spectra."""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .lindblad import DEFAULT_DT
from .pulses import pulse_train
from .regression import DetectionParams, check_residual, integration_window, pair_integrals
from .units import fs_to_au

log = logging.getLogger(__name__)

# Delays are batched in fixed chunks so results never depend on the worker count.
CHUNK = 32


@dataclass
class ScanConfig:
    """Delay range (a.u.), system, pulse template and numerics for one scan.

    ``channels`` lists the drive channel of each pulse in time order; pulse i
    is centered at ``first_center + i * T``.
    """

    system: object
    template: object
    channels: tuple
    detection: DetectionParams
    t_min: float = 0.0
    t_max: float = fs_to_au(220.0)
    t_step: float = fs_to_au(0.25)
    first_center: float = None
    dt: float = DEFAULT_DT
    pad: float = None
    stride: int = 1
    allow_undersampling: bool = False
    strict: bool = False
    fluorescence: str = "incoherent"

    def __post_init__(self):
        if not self.t_max > self.t_min:
            raise ValueError("t_max must exceed t_min")
        if self.t_step <= 0:
            raise ValueError("delay step must be positive")
        if self.first_center is None:
            self.first_center = 5.0 * self.template.duration
        nyquist = np.pi / self.template.carrier
        if self.t_step >= nyquist and not self.allow_undersampling:
            raise ValueError(
                f"delay step {self.t_step:.4g} a.u. does not resolve the carrier (needs < {nyquist:.4g});"
                " set allow_undersampling to override"
            )

    @property
    def delays(self):
        n = int(np.floor((self.t_max - self.t_min) / self.t_step + 1e-9))
        return self.t_min + self.t_step * np.arange(n + 1)

    def drive(self, delay):
        return pulse_train(self.template, self.first_center, delay, self.channels)

    def grid(self):
        return integration_window(
            self.system, self.drive(self.t_max), dt=self.dt, pad=self.pad, multiple_of=self.stride
        )


@dataclass
class ScanResult:
    delays: np.ndarray
    c: np.ndarray
    f: np.ndarray
    peak_excited: np.ndarray = None
    residual: np.ndarray = None
    diagnostics: dict = field(default_factory=dict)


def _run_chunk(args):
    cfg, delays = args
    grid = cfg.grid()
    fop = cfg.system.fluorescence_op(cfg.detection.gamma_f, cfg.fluorescence)
    return pair_integrals(cfg.system, [cfg.drive(T) for T in delays], grid, stride=cfg.stride, fluor_op=fop)


def run_delay_scan(cfg, workers=1, delays=None):
    """c(T) and f(T) for every delay of ``cfg`` (or the explicit ``delays``).

    All delays share one time window sized for the longest delay. Chunks of
    delays are independent tasks; output order follows the delay index.
    """
    delays = cfg.delays if delays is None else np.asarray(delays, dtype=float)
    chunks = [(cfg, delays[i:i + CHUNK]) for i in range(0, len(delays), CHUNK)]
    if workers > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_run_chunk, chunks))
    else:
        parts = [_run_chunk(c) for c in chunks]

    det = cfg.detection
    pairs = np.concatenate([p.pairs for p in parts])
    fluor = np.concatenate([p.fluorescence for p in parts])
    residual = np.concatenate([p.residual for p in parts])
    bad = ~(np.isfinite(pairs) & np.isfinite(fluor))
    if bad.any():
        raise RuntimeError(f"scan failed at T = {delays[np.argmax(bad)]:.6g} a.u.")
    check_residual(float(residual.max()), cfg.strict, what="scan window")
    c = det.eta_c**2 * det.nu_rep * det.gamma_f**2 * pairs
    f = det.eta_f * det.nu_rep * det.gamma_f * fluor
    diagnostics = {
        "max_trace_drift": max(p.max_trace_drift for p in parts),
        "max_hermiticity": max(p.max_hermiticity for p in parts),
        "min_eigenvalue": min(p.min_eigenvalue for p in parts),
        "max_residual": float(residual.max()),
        "n_steps": cfg.grid().n_steps,
    }
    return ScanResult(delays, c, f, np.concatenate([p.peak_excited for p in parts]), residual, diagnostics)


@dataclass
class Spectrum:
    omega: np.ndarray
    magnitude: np.ndarray
    window: str = "none"
    subtract_mean: bool = True

    @property
    def bin_width(self):
        return float(self.omega[1] - self.omega[0])


def spectrum_of(times, values, window="none", subtract_mean=True):
    """Positive-frequency DFT magnitudes of a uniformly sampled series."""
    times = np.asarray(times, dtype=float)
    x = np.asarray(values, dtype=float)
    if len(times) < 2:
        raise ValueError("need at least two samples")
    step = (times[-1] - times[0]) / (len(times) - 1)
    # tolerance leaves room for delays read back from 9-digit CSV files
    if step <= 0 or np.max(np.abs(np.diff(times) - step)) > 1e-4 * step:
        raise ValueError("spectrum needs uniformly spaced, increasing delays")
    if subtract_mean:
        x = x - x.mean()
    if window == "hann":
        x = x * np.hanning(len(x))
    elif window != "none":
        raise ValueError(f"unknown window {window!r}")
    mags = np.abs(np.fft.rfft(x))
    omega = 2.0 * np.pi * np.fft.rfftfreq(len(x), d=step)
    return Spectrum(omega, mags, window, subtract_mean)


def spectrum(scan, channel="c", window="none", subtract_mean=True):
    if channel not in ("c", "f"):
        raise ValueError("channel must be 'c' or 'f'")
    return spectrum_of(scan.delays, getattr(scan, channel), window, subtract_mean)


def refine_peak(spec, k):
    """Quadratic interpolation of the peak around bin ``k``; returns (omega, magnitude)."""
    m = spec.magnitude
    if k <= 0 or k >= len(m) - 1:
        return float(spec.omega[k]), float(m[k])
    a, b, c = m[k - 1], m[k], m[k + 1]
    denom = a - 2 * b + c
    off = 0.0 if denom == 0 else 0.5 * (a - c) / denom
    return float(spec.omega[k] + off * spec.bin_width), float(b - 0.25 * (a - c) * off)


def peak_in_band(spec, lo, hi):
    """Strongest interpolated peak with lo <= omega <= hi."""
    sel = np.nonzero((spec.omega >= lo) & (spec.omega <= hi))[0]
    if len(sel) == 0:
        raise ValueError("empty frequency band")
    k = sel[np.argmax(spec.magnitude[sel])]
    return refine_peak(spec, k)


def local_peaks(spec, lo, hi, min_rel=0.05):
    """Interpolated local maxima in [lo, hi] above ``min_rel`` of the band maximum, by height."""
    m = spec.magnitude
    sel = np.nonzero((spec.omega >= lo) & (spec.omega <= hi))[0]
    sel = sel[(sel > 0) & (sel < len(m) - 1)]
    if len(sel) == 0:
        return []
    top = m[sel].max()
    ks = [k for k in sel if m[k] >= m[k - 1] and m[k] > m[k + 1] and m[k] >= min_rel * top]
    peaks = [refine_peak(spec, k) for k in ks]
    return sorted(peaks, key=lambda p: -p[1])


def noise_floor(spec, exclude, halfwidth):
    """Median magnitude outside ``halfwidth`` of each excluded frequency."""
    keep = spec.omega > halfwidth
    for w in exclude:
        keep &= np.abs(spec.omega - w) > halfwidth
    return float(np.median(spec.magnitude[keep]))


def modulation_depth(values):
    """(max - min) / mean of a series."""
    values = np.asarray(values, dtype=float)
    return float((values.max() - values.min()) / values.mean())


def band_modulation(times, values, omega, halfwidth):
    """Relative amplitude of the oscillation near ``omega``: 2 |X_k| / (N mean)."""
    spec = spectrum_of(times, values, subtract_mean=True)
    band = np.abs(spec.omega - omega) <= halfwidth
    return float(2.0 * spec.magnitude[band].max() / (len(values) * np.mean(values)))


def _band_mask(times, n, center, halfwidth):
    omega = 2.0 * np.pi * np.fft.rfftfreq(n, d=times[1] - times[0])
    return np.abs(omega - center) < halfwidth


def bandpass(times, values, center, halfwidth):
    """Keep only Fourier components with |omega - center| < halfwidth (mean removed)."""
    x = np.asarray(values, dtype=float)
    X = np.fft.rfft(x - x.mean())
    return np.fft.irfft(np.where(_band_mask(times, len(x), center, halfwidth), X, 0.0), len(x))


@dataclass
class DampedCosineFit:
    frequencies: np.ndarray
    amplitudes: np.ndarray
    damping: np.ndarray
    phases: np.ndarray
    residual_fraction: float

    @property
    def separation(self):
        return float(abs(self.frequencies[0] - self.frequencies[-1]))


def _damped_cosines(p, t):
    out = np.zeros_like(t)
    for A, G, w, ph in p.reshape(-1, 4):
        out += A * np.exp(-G * t) * np.cos(w * t + ph)
    return out


def fit_damped_cosines(times, values, guesses, damping=1.65e-3, n_phase=6, band=None):
    """Least-squares fit of sum_i A_i exp(-G_i t) cos(w_i t + phi_i) to ``values``.

    ``guesses`` are the starting frequencies. If ``band = (center, halfwidth)``
    is given, model and data pass through the same linear filter (end-point
    detrend, then the Fourier components inside the band) before they are
    compared, so the filter itself cannot bias the estimate.
    Every combination of starting phases on an ``n_phase`` grid is tried and
    the lowest-cost result is kept, since the cost surface in the phases has
    many local minima.
    """
    from itertools import product

    from scipy.optimize import least_squares

    t = np.asarray(times, dtype=float) - times[0]
    y = np.asarray(values, dtype=float)
    if band is None:
        target = y

        def resid(p):
            return _damped_cosines(p, t) - target
    else:
        mask = _band_mask(t, len(t), *band)
        ramp = np.linspace(0.0, 1.0, len(t))

        def project(x):
            # the end-point line is removed so the periodic extension has no jump
            # and out-of-band trends do not leak into the band
            X = np.fft.rfft(x - x[0] - (x[-1] - x[0]) * ramp)[mask]
            return np.concatenate([X.real, X.imag])

        target = project(y)

        def resid(p):
            return project(_damped_cosines(p, t)) - target

    amp = float(np.std(bandpass(t, y, *band) if band else y)) or 1.0
    # amplitude and phase free, damping non-negative, frequency inside the band if one is given
    lo_w, hi_w = (band[0] - band[1], band[0] + band[1]) if band else (0.0, np.inf)
    lower = np.tile([-np.inf, 0.0, lo_w, -np.inf], len(guesses))
    upper = np.tile([np.inf, np.inf, hi_w, np.inf], len(guesses))
    bounds = (lower, upper)
    best = None
    phases = np.linspace(0.0, 2.0 * np.pi, n_phase, endpoint=False)
    for combo in product(phases, repeat=len(guesses)):
        p0 = np.ravel([[amp, damping, w, ph] for w, ph in zip(guesses, combo)])
        r = least_squares(resid, p0, x_scale="jac", bounds=bounds)
        if best is None or r.cost < best.cost:
            best = r
    p = best.x.reshape(-1, 4)
    p = p[np.argsort(-p[:, 2])]
    frac = float(2.0 * best.cost / max(np.sum(target**2), 1e-300))
    return DampedCosineFit(p[:, 2], p[:, 0], p[:, 1], np.mod(p[:, 3], 2 * np.pi), frac)


def fitted_splitting(times, values, center, halfwidth=0.025, search=0.015, damping=1.65e-3, t_start=None):
    """Separation of the two strongest components near ``center`` from a band-limited two-cosine fit.

    Samples before ``t_start`` are dropped (the pulse-overlap transient at
    small delay is not a sum of damped cosines). Starting frequencies come
    from the spectrum: the two strongest local peaks if resolved, otherwise
    symmetric offsets of 1-3 bins around the single peak; the best fit wins.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if t_start is not None:
        keep = times >= t_start
        times, values = times[keep], values[keep]
    spec = spectrum_of(times, values)
    peaks = local_peaks(spec, center - search, center + search, 0.1)
    starts = []
    if len(peaks) >= 2:
        starts.append([peaks[0][0], peaks[1][0]])
    w = peaks[0][0] if peaks else center
    starts += [[w + m * spec.bin_width, w - m * spec.bin_width] for m in (1, 2, 3)]
    fits = [fit_damped_cosines(times, values, g, damping=damping, band=(center, halfwidth)) for g in starts]
    return min(fits, key=lambda f: f.residual_fraction)
