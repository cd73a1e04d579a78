# Copyright (c) 2026 The pycanoa developers
# Distributed under the terms of the MIT license, see setup.py.

# pylint: disable=C0103,R0902,R0913,R0914

"""
The ``pycanoa.sigfeat`` module turns power traces into features of
transmissions.

For every decoded transmission ``(t, S)`` and every ECU ``E_k`` the ECU's
normalized power trace is sliced from ``t`` for one transmission window
``tau``, tapered with a Tukey window, taken to the frequency domain and
projected onto the first ``M`` principal components of that ECU's spectra.
"""

import logging

import numpy as np

from scipy import fft
from scipy.signal import windows

from pycanoa import exceptions

logger = logging.getLogger(__name__)

DEFAULT_M = 50
DEFAULT_ALPHA = 0.25
DEFAULT_CALIB_LEN = 100000
MIN_CALIB_LEN = 1000


class NormStats(object):
    """
    Mean and standard deviation of an ECU's power, estimated on a
    calibration sample.
    """

    def __init__(self, mean, std):
        self.mean = float(mean)
        self.std = float(std)
        if not self.std > 0:
            raise exceptions.DegenerateTraceError()

    def normalize(self, samples):
        return (np.asarray(samples, dtype=np.float64) - self.mean) / self.std

    def to_dict(self):
        return {'mean': self.mean, 'std': self.std}


class TukeyParams(object):

    def __init__(self, alpha=DEFAULT_ALPHA):
        self.alpha = alpha

    def __setattr__(self, name, value):
        if name == 'alpha' and not 0 <= value <= 1:
            raise exceptions.InvalidValueError(
                "TukeyParams.alpha must lie in [0, 1].")
        return super(TukeyParams, self).__setattr__(name, float(value))


class Tau(object):
    """
    Transmission window in seconds.
    """

    def __init__(self, value):
        if not value > 0:
            raise exceptions.InvalidValueError("Tau must be positive.")
        self.value = float(value)

    def samples(self, sample_rate):
        return max(int(round(self.value * sample_rate)), 2)

    def __repr__(self):
        return "Tau(%.6g s)" % self.value


class PcaBasis(object):
    """
    Principal directions of a corpus of spectra.  ``components`` has one
    orthonormal row per direction, in order of decreasing explained
    variance.
    """

    def __init__(self, mean, components, explained_variance,
        total_variance=None):
        self.mean = np.asarray(mean, dtype=np.float64)
        self.components = np.atleast_2d(
            np.asarray(components, dtype=np.float64))
        self.explained_variance = np.asarray(explained_variance,
                                             dtype=np.float64)
        if total_variance is None:
            total_variance = float(self.explained_variance.sum())
        self.total_variance = float(total_variance)

    @property
    def m(self):
        return self.components.shape[0]

    def project(self, spectra):
        return (np.asarray(spectra, dtype=np.float64) - self.mean).dot(
            self.components.T)

    def reconstruct(self, coordinates):
        return np.asarray(coordinates).dot(self.components) + self.mean

    def truncated(self, m):
        return PcaBasis(self.mean, self.components[:m],
                        self.explained_variance[:m], self.total_variance)


class FeatureDataset(object):
    """
    Features of transmissions seen on ECU ``ecu`` with labels for source
    address ``sa``: 1 where the transmission claimed ``sa``, 0 otherwise.
    """

    def __init__(self, X, y, sa, ecu, basis=None, stats=None, times=None):
        self.X = np.asarray(X, dtype=np.float64)
        self.y = np.asarray(y, dtype=np.int8)
        self.sa = sa
        self.ecu = ecu
        self.basis = basis
        self.stats = stats
        self.times = times
        if len(self.y) != self.X.shape[0]:
            raise exceptions.InvalidValueError(
                "FeatureDataset labels and rows differ in length.")
        if not np.all(np.isfinite(self.X)):
            raise exceptions.InvalidValueError(
                "FeatureDataset rows must be finite.")

    def __len__(self):
        return len(self.y)

    @property
    def n_positive(self):
        return int(self.y.sum())

    @property
    def shape(self):
        return self.X.shape


def estimate_norm_stats(trace, calib_len=DEFAULT_CALIB_LEN):
    """
    Sample mean and unbiased standard deviation over the first
    ``calib_len`` samples of ``trace`` (the whole trace when shorter).
    """
    if calib_len < MIN_CALIB_LEN:
        raise exceptions.InvalidValueError(
            "calibration needs at least %d samples" % MIN_CALIB_LEN)
    prefix = np.asarray(trace.samples[:calib_len], dtype=np.float64)
    if prefix.size < 2:
        raise exceptions.DegenerateTraceError("trace too short to calibrate")
    std = prefix.std(ddof=1)
    if not std > 0:
        raise exceptions.DegenerateTraceError()
    return NormStats(prefix.mean(), std)


def estimate_tau(transmissions, n=None):
    """
    Mean duration of the first ``n`` transmissions (all by default).
    """
    transmissions = list(transmissions)
    if n is not None:
        transmissions = transmissions[:n]
    if not transmissions:
        raise exceptions.EmptyInputError("no transmissions to estimate tau")
    tau = Tau(np.mean([tx.duration for tx in transmissions]))
    logger.info("estimated tau = %.4f ms over %d transmissions",
                tau.value * 1e3, len(transmissions))
    return tau


def tukey_window(length, params=None):
    if length < 2:
        raise exceptions.InvalidValueError("window length must be >= 2")
    if params is None:
        params = TukeyParams()
    elif not isinstance(params, TukeyParams):
        params = TukeyParams(params)
    return windows.tukey(length, params.alpha, sym=True)


def spectrum(segment):
    """
    Magnitude of the one-sided DFT, ``floor(n/2) + 1`` bins.
    """
    segment = np.asarray(segment, dtype=np.float64)
    if segment.size < 2:
        raise exceptions.InvalidValueError("segment length must be >= 2")
    return np.abs(fft.rfft(segment))


def fit_pca(spectra, m):
    """
    Top ``m`` principal directions of the mean-centered rows of
    ``spectra``.  Each component is signed so that its largest-magnitude
    entry is positive.
    """
    spectra = np.asarray(spectra, dtype=np.float64)
    n = spectra.shape[0]
    if not (1 <= m < n):
        raise exceptions.InvalidValueError(
            "PCA needs N > M >= 1, got N=%d, M=%d" % (n, m))
    mean = spectra.mean(axis=0)
    _, singular, vt = np.linalg.svd(spectra - mean, full_matrices=False)
    variance = singular ** 2 / (n - 1)
    tol = max(variance[0], 0.0) * 1e-12 if variance.size else 0.0
    rank = int(np.sum(variance > tol)) if variance.size and \
        variance[0] > 0 else 0
    if rank < m:
        raise exceptions.RankDeficientError(
            "only %d nonzero variance directions for M=%d" % (rank, m))
    components = vt[:m].copy()
    for row in components:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1
    return PcaBasis(mean, components, variance[:m], variance.sum())


def _segment(trace, stats, start, n):
    return stats.normalize(trace.samples[start:start + n])


def _start_index(trace, t, n):
    start = trace.index_of(t)
    if start < 0 or start + n > len(trace):
        raise exceptions.OutOfBoundsError(
            "window [%.9f, %.9f] s is outside the trace [%.9f, %.9f)" %
            (t, t + n / float(trace.sample_rate), trace.start_time,
             trace.start_time + trace.duration))
    return start


def window_fits(trace, t, tau):
    """
    Whether the ``tau`` window starting at ``t`` lies inside ``trace``.
    """
    start = trace.index_of(t)
    return start >= 0 and start + tau.samples(trace.sample_rate) <= len(trace)


def spectra_matrix(trace, stats, times, tau, window=None):
    """
    One spectrum row per start time: normalize, slice ``tau``, taper, FFT.
    """
    n = tau.samples(trace.sample_rate)
    taper = tukey_window(n, window)
    rows = np.empty((len(times), n // 2 + 1))
    for i, t in enumerate(times):
        rows[i] = spectrum(_segment(trace, stats, _start_index(trace, t, n),
                                    n) * taper)
    return rows


def extract_feature(trace, stats, t, tau, window, basis):
    """
    Feature vector of the transmission starting at ``t`` on ``trace``.
    Slicing at a time the ECU was not transmitting still yields a feature.
    """
    return basis.project(spectra_matrix(trace, stats, [t], tau, window))[0]


def build_datasets(powers, transmissions, sa_map, tau, window=None,
    m=DEFAULT_M, calib_len=DEFAULT_CALIB_LEN, stats=None):
    """
    Build one ``FeatureDataset`` per ``(ecu, sa)`` pair of ``sa_map``.

    ``powers`` is indexed by ECU index.  For every ECU one PCA basis is
    fitted on the spectra of all usable transmissions (CRC good, known
    source address) and shared by the datasets of the source addresses the
    ECU owns.  Transmissions whose window does not fit inside every power
    trace are left out.  Returns a dict keyed by ``(ecu, sa)``.
    """
    usable = [tx for tx in transmissions if tx.crc_ok and tx.sa is not None]
    inside = [tx for tx in usable
              if all(window_fits(powers[k], tx.t, tau) for k in sa_map.ecus)]
    if len(inside) < len(usable):
        logger.debug("left out %d transmissions running past the traces",
                     len(usable) - len(inside))
    usable = inside
    if not usable:
        raise exceptions.EmptyInputError("no usable transmissions")
    times = np.array([tx.t for tx in usable])
    sas = np.array([tx.sa for tx in usable])
    datasets = {}
    for ecu in sa_map.ecus:
        trace = powers[ecu]
        ecu_stats = stats[ecu] if stats else \
            estimate_norm_stats(trace, calib_len)
        spectra = spectra_matrix(trace, ecu_stats, times, tau, window)
        basis = fit_pca(spectra, m)
        X = basis.project(spectra)
        for sa in sa_map.sas_of(ecu):
            datasets[(ecu, sa)] = FeatureDataset(
                X, (sas == sa).astype(np.int8), sa, ecu, basis, ecu_stats,
                times)
            logger.debug("dataset (ECU %d, SA %d): %d rows, %d positive",
                         ecu, sa, len(times), int((sas == sa).sum()))
    logger.info("built %d datasets of %d x %d features", len(datasets),
                len(times), m)
    return datasets
