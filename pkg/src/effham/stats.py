"""Ensemble statistics: standard errors, autocorrelation, jackknife."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError


@dataclass
class EnsembleStats:
    """Mean with a standard error corrected for sample correlation.

    std_error = sample_std * sqrt((1 + 2 tau) / n), i.e. the effective
    sample count is n / (1 + 2 tau) with tau the integrated
    autocorrelation time (0 for independent draws).
    """

    mean: float
    std_error: float
    n_samples: int
    autocorrelation_time: float = 0.0


def integrated_autocorr_time(series, window_factor: float = 5.0) -> float:
    """Integrated autocorrelation time tau = sum_{t>=1} rho(t).

    Uses the automatic windowing rule: truncate the sum at the smallest
    lag W with W >= window_factor * (0.5 + tau(W)).  Returns 0 for
    series that are too short or have no variance.
    """
    x = np.asarray(series, dtype=float)
    n = x.size
    if n < 8:
        return 0.0
    x = x - x.mean()
    var = float(np.dot(x, x)) / n
    if var == 0.0:
        return 0.0
    # FFT autocovariance, lags 0..n-1
    m = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, m)
    acov = np.fft.irfft(f * np.conjugate(f), m)[:n].real / n
    rho = acov / acov[0]
    tau = 0.0
    for t in range(1, n // 2):
        tau += rho[t]
        if t >= window_factor * (0.5 + tau):
            break
    return max(tau, 0.0)


def series_stats(series, correct_autocorr: bool = True) -> EnsembleStats:
    """Mean and standard error of a measurement series."""
    x = np.asarray(series, dtype=float)
    n = x.size
    if n < 2:
        raise ConfigurationError("need at least 2 samples for a standard error")
    tau = integrated_autocorr_time(x) if correct_autocorr else 0.0
    err = float(x.std(ddof=1)) * np.sqrt((1.0 + 2.0 * tau) / n)
    return EnsembleStats(float(x.mean()), float(err), int(n), float(tau))


def jackknife(data, estimator, n_blocks: int = 20):
    """Delete-one-block jackknife of an arbitrary estimator.

    data is an array whose first axis indexes samples; estimator maps a
    sub-array to a scalar.  Returns (full-sample value, error).
    """
    data = np.asarray(data)
    n = data.shape[0]
    if n < 2 * n_blocks:
        n_blocks = max(2, n // 2)
    block = n // n_blocks
    used = block * n_blocks
    full = float(estimator(data[:used]))
    idx = np.arange(used)
    thetas = np.empty(n_blocks)
    for b in range(n_blocks):
        mask = (idx < b * block) | (idx >= (b + 1) * block)
        thetas[b] = estimator(data[:used][mask])
    err = np.sqrt((n_blocks - 1) / n_blocks * np.sum((thetas - thetas.mean()) ** 2))
    return full, float(err)


class RunningMoments:
    """Streaming mean/variance accumulator with exact chunk merging."""

    def __init__(self):
        self.n = 0
        self.mean = 0.0
        self.m2 = 0.0

    def update(self, chunk):
        chunk = np.asarray(chunk, dtype=float)
        cn = chunk.size
        if cn == 0:
            return
        cmean = float(chunk.mean())
        cm2 = float(((chunk - cmean) ** 2).sum())
        if self.n == 0:
            self.n, self.mean, self.m2 = cn, cmean, cm2
            return
        delta = cmean - self.mean
        tot = self.n + cn
        self.m2 += cm2 + delta**2 * self.n * cn / tot
        self.mean += delta * cn / tot
        self.n = tot

    def stats(self) -> EnsembleStats:
        if self.n < 2:
            raise ConfigurationError("need at least 2 samples")
        std = np.sqrt(self.m2 / (self.n - 1))
        return EnsembleStats(self.mean, float(std / np.sqrt(self.n)), self.n, 0.0)
