"""Photon-number statistics of the heralded single-photon source.

The source is checked from bucket-detector click rates: the vacuum
probability within a coincidence window fixes the Poisson mean, which in
turn bounds multi-photon emission and the chance of a second photon
arriving during the detector dead time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np
from scipy.optimize import brentq
from scipy.special import gammainc, gammaln

NS = 1e-9
SERIES_CUTOFF = 1e-18


@dataclass(frozen=True)
class Poisson:
    mean: float

    def __post_init__(self):
        if not self.mean >= 0:
            raise ValueError(f"Poisson mean must be non-negative, got {self.mean}")


@dataclass(frozen=True)
class Thermal:
    mean: float

    def __post_init__(self):
        if not self.mean >= 0:
            raise ValueError(f"thermal mean must be non-negative, got {self.mean}")


def photon_number_pmf(model, n):
    """Probability of ``n`` photons under a Poisson or thermal source.

    Parameters
    ----------
    model : Poisson or Thermal
    n : int or array_like of int
        Photon numbers, all non-negative.
    """
    if not isinstance(model, (Poisson, Thermal)):
        raise TypeError(f"unsupported source model {type(model).__name__}")
    n = np.asarray(n)
    if np.any(n < 0) or not np.all(np.equal(np.mod(n, 1), 0)):
        raise ValueError("photon numbers must be non-negative integers")
    n = n.astype(float)
    m = model.mean
    if isinstance(model, Poisson):
        if m == 0:
            out = np.where(n == 0, 1.0, 0.0)
        else:
            out = np.exp(n * np.log(m) - m - gammaln(n + 1))
    else:
        out = np.exp(n * math.log(m) - (n + 1) * math.log1p(m)) if m > 0 else np.where(n == 0, 1.0, 0.0)
    return float(out) if out.ndim == 0 else out


def multiphoton_probability(mean):
    """P(n > 1) for a Poisson source, 1 - exp(-mean)(1 + mean)."""
    if mean < 0:
        raise ValueError("mean photon number must be non-negative")
    return float(gammainc(2, mean))


def _vacuum_series(lam, eta):
    """Sum_n P(lam, n) (1 - eta)^n, truncated once terms drop below the cutoff."""
    if lam == 0:
        return 1.0
    n_max = int(lam + 10 * math.sqrt(lam) + 40)
    while True:
        n = np.arange(n_max + 1)
        terms = photon_number_pmf(Poisson(lam), n) * (1 - eta) ** n
        if terms[-1] < SERIES_CUTOFF or eta == 1:
            return float(math.fsum(terms))
        n_max *= 2


def estimate_mean_photons(p0, eta_det):
    """Mean photon number from the probability of recording no click.

    A photon is detected with efficiency ``eta_det``, so the no-click
    probability is the Poisson average of (1 - eta_det)**n.  The series is
    inverted by bracketed root finding.

    Parameters
    ----------
    p0 : float
        No-click probability per window, in (0, 1].
    eta_det : float
        Detector efficiency, in (0, 1].

    Returns
    -------
    float
    """
    if not 0 < p0 <= 1:
        raise ValueError(f"no-click probability must lie in (0, 1], got {p0}")
    if not 0 < eta_det <= 1:
        raise ValueError(f"detector efficiency must lie in (0, 1], got {eta_det}")
    if p0 == 1:
        return 0.0

    def f(lam):
        return _vacuum_series(lam, eta_det) - p0

    hi = 1e-6
    while f(hi) > 0:
        hi *= 4
    return float(brentq(f, 0.0, hi, xtol=1e-300, rtol=1e-14, maxiter=500))


@dataclass(frozen=True)
class DetectorModel:
    """Bucket detector observing the source.

    ``window`` and ``dead_time`` are in nanoseconds, ``click_rate`` in
    counts per second.
    """

    efficiency: float
    window: float = 1.0
    dead_time: float = 35.0
    click_rate: float = 0.0

    def __post_init__(self):
        errors = []
        if not 0 < self.efficiency <= 1:
            errors.append(f"efficiency must lie in (0, 1], got {self.efficiency}")
        if not self.window > 0:
            errors.append(f"window must be positive, got {self.window}")
        if not self.dead_time >= self.window:
            errors.append(f"dead time {self.dead_time} ns is shorter than the window")
        if not self.click_rate >= 0:
            errors.append(f"click rate must be non-negative, got {self.click_rate}")
        if errors:
            raise ValueError("; ".join(errors))

    @property
    def clicks_per_window(self):
        return self.click_rate * self.window * NS


@dataclass(frozen=True)
class SourceReport:
    p0: float
    mean_photons: float
    p_multiphoton: float
    dead_time_vacuum: float

    def as_dict(self):
        return asdict(self)


def source_report(det):
    """Source adequacy figures for one detector configuration."""
    clicks = det.clicks_per_window
    if clicks >= 1:
        raise ValueError(f"{clicks:.3g} clicks per window; the rate is inconsistent with the window")
    p0 = 1.0 - clicks
    lam = estimate_mean_photons(p0, det.efficiency)
    vacuum = photon_number_pmf(Poisson(det.dead_time / det.window * lam), 0)
    return SourceReport(p0, lam, multiphoton_probability(lam), vacuum)
