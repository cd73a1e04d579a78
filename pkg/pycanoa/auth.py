# Copyright (c) 2026 The pycanoa developers
# Distributed under the terms of the MIT license, see setup.py.

# pylint: disable=C0103,R0902,R0913,R0914

"""
The ``pycanoa.auth`` module decides who sent a frame.

Every source address model scores the transmission on its ECU's power trace.
The calibrated probabilities go through a softmax; a source address wins when
its softmax value is maximal, exceeds ``delta`` and its own probability says
"transmitting".  The winner is then compared against the ECU that owns the
claimed source address to tell authentic frames from impersonation by a
legitimate ECU and from frames sent by an added module.
"""

import logging
import time

import numpy as np

from pycanoa import enums
from pycanoa import exceptions
from pycanoa import learn
from pycanoa import sigfeat

logger = logging.getLogger(__name__)

DEFAULT_DELTA = 0.5
DEFAULT_SHARPNESS = 10.0
TIE_TOLERANCE = 1e-12
BATCH_SIZE = 256


class BundleEntry(object):
    """
    What it takes to score one source address: its model and the feature
    pipeline state of the ECU owning it.
    """

    def __init__(self, sa, ecu, model, basis, stats):
        self.sa = int(sa)
        self.ecu = int(ecu)
        self.model = model
        self.basis = basis
        self.stats = stats
        if model.m != basis.m:
            raise exceptions.DimensionMismatchError(
                "SA %d: model takes %d features, basis gives %d" %
                (sa, model.m, basis.m))


class ModelBundle(object):
    """
    The set of per source address models plus everything shared by them:
    transmission window ``tau``, feature count ``m``, Tukey parameters,
    threshold ``delta``, softmax ``sharpness`` and the source address map.
    """

    def __init__(self, entries, tau, window, sa_map, delta=DEFAULT_DELTA,
        sharpness=DEFAULT_SHARPNESS, bitrate=None, metadata=None):
        self.entries = sorted(entries, key=lambda e: e.sa)
        self.tau = tau
        self.window = window
        self.sa_map = sa_map
        self.delta = delta
        self.sharpness = sharpness
        self.bitrate = bitrate
        self.metadata = metadata or {}
        self.validate()

    def __setattr__(self, name, value):
        if name == 'delta' and not 0 < value < 1:
            raise exceptions.InvalidValueError(
                "ModelBundle.delta must lie in (0, 1).")
        if name == 'sharpness' and not value > 0:
            raise exceptions.InvalidValueError(
                "ModelBundle.sharpness must be positive.")
        return super(ModelBundle, self).__setattr__(name, value)

    def validate(self):
        sas = [e.sa for e in self.entries]
        if sas != self.sa_map.source_addresses:
            raise exceptions.InvalidValueError(
                "bundle source addresses %s do not match the map %s" %
                (sas, self.sa_map.source_addresses))
        for entry in self.entries:
            if self.sa_map.ecu_of(entry.sa) != entry.ecu:
                raise exceptions.InvalidValueError(
                    "SA %d is owned by ECU %s, not %d" %
                    (entry.sa, self.sa_map.ecu_of(entry.sa), entry.ecu))
        if len(set(e.model.m for e in self.entries)) > 1:
            raise exceptions.DimensionMismatchError(
                "bundle models differ in feature count")

    @property
    def m(self):
        return self.entries[0].model.m

    @property
    def source_addresses(self):
        return [e.sa for e in self.entries]

    @property
    def ecus(self):
        return self.sa_map.ecus

    def entry(self, sa):
        for e in self.entries:
            if e.sa == sa:
                return e
        raise KeyError(sa)

    def check_channels(self, powers):
        if len(powers) <= max(self.ecus):
            raise exceptions.BundleMismatchError(
                "bundle needs %d power channels, got %d" %
                (max(self.ecus) + 1, len(powers)))

    @classmethod
    def build(cls, trained, datasets, tau, window, sa_map,
        delta=DEFAULT_DELTA, sharpness=DEFAULT_SHARPNESS, bitrate=None):
        """
        Assemble a bundle from ``train_models`` output and the datasets it
        was trained on (both keyed by ``(ecu, sa)``).
        """
        entries = []
        for key in sorted(trained):
            ds = datasets[key]
            entries.append(BundleEntry(ds.sa, ds.ecu, trained[key][0],
                                       ds.basis, ds.stats))
        return cls(entries, tau, window, sa_map, delta, sharpness, bitrate)


class Verdict(object):
    """
    Outcome of authenticating one transmission.

    ``probabilities`` and ``p_tx`` map every source address to its softmax
    value and calibrated transmission probability.  ``true_source`` is an
    ``(ecu, sa)`` pair for impersonation, ``flagged_compromised`` the ECU
    index found transmitting in place of the owner.  A verdict whose
    ``status`` is not ``SCORED`` has empty maps and no decision.
    """

    def __init__(self, t, claimed_sa, frame_id, probabilities, p_tx,
        winner_sa=None, tie=False, status=enums.VerdictStatus.SCORED):
        self.status = status
        self.t = t
        self.claimed_sa = claimed_sa
        self.frame_id = frame_id
        self.probabilities = probabilities
        self.p_tx = p_tx
        self.winner_sa = winner_sa
        self.tie = tie
        self.decision = None
        self.true_source = None
        self.flagged_compromised = None
        self.attributed_sa = None
        self.attributed_ecu = None
        self.multiple_positive = []
        self.latency = None

    @property
    def scored(self):
        return self.status == enums.VerdictStatus.SCORED

    @property
    def attack_label(self):
        if self.decision is None:
            return None
        if self.decision == enums.Decision.AUTHENTIC:
            return enums.AttackLabel.NORMAL
        return enums.AttackLabel.ATTACK

    def __repr__(self):
        return "Verdict(t=%.9f, sa=%s, %s, source=%s)" % (
            self.t, self.claimed_sa, self.decision or self.status,
            self.true_source)


def softmax(v):
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        raise exceptions.InvalidValueError("softmax of an empty vector")
    e = np.exp(v - v.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def _probability_matrix(times, powers, bundle):
    """
    ``p_tx`` for every (time, source address) pair, columns in bundle order.
    """
    P = np.empty((len(times), len(bundle.entries)))
    for j, entry in enumerate(bundle.entries):
        spectra = sigfeat.spectra_matrix(powers[entry.ecu], entry.stats,
                                         times, bundle.tau, bundle.window)
        P[:, j] = learn.transmission_probability(
            entry.model, entry.basis.project(spectra))
    return P


def _draft(t, claimed_sa, frame_id, p, bundle):
    sas = bundle.source_addresses
    soft = softmax(bundle.sharpness * p)
    top = soft.max()
    candidates = [i for i in range(len(sas)) if top - soft[i] <= TIE_TOLERANCE]
    best = candidates[0]
    winner = None
    if soft[best] > bundle.delta and p[best] > 0.5:
        winner = sas[best]
    tie = len(candidates) > 1
    if tie:
        logger.warning("t=%.9f: softmax tie between SAs %s", t,
                       [sas[i] for i in candidates])
    return Verdict(t, claimed_sa, frame_id,
                   dict(zip(sas, soft.tolist())), dict(zip(sas, p.tolist())),
                   winner, tie)


def _ecu_scores(verdict, bundle):
    """
    Per ECU: its best source address and the probability that it transmitted
    at all, the sum over its source addresses capped at one.
    """
    scores = {}
    for entry in bundle.entries:
        p = verdict.p_tx[entry.sa]
        best, best_p, total = scores.get(entry.ecu, (entry.sa, p, 0.0))
        if p > best_p:
            best, best_p = entry.sa, p
        scores[entry.ecu] = (best, best_p, total + p)
    return dict((k, (sa, min(total, 1.0)))
                for k, (sa, _, total) in scores.items())


def _positive_ecus(verdict, bundle):
    scores = _ecu_scores(verdict, bundle)
    ecus = sorted(scores)
    soft = softmax(bundle.sharpness * np.array([scores[k][1] for k in ecus]))
    positive = [k for k, s in zip(ecus, soft)
                if s > bundle.delta and scores[k][1] > 0.5]
    return positive, scores


def attribute(transmission, powers, bundle):
    """
    Score ``transmission`` with every model of ``bundle`` and pick the
    winning source address.  The returned verdict has no decision yet.
    """
    p = _probability_matrix([transmission.t], powers, bundle)[0]
    return _draft(transmission.t, transmission.sa, transmission.frame_id, p,
                  bundle)


def detect_attack(transmission, verdict, powers, bundle):
    """
    Turn an attributed ``verdict`` into a decision.

    The frame is authentic when the winner belongs to the purported sender.
    Otherwise ECUs are visited in ascending index order and the first one
    found transmitting is reported as the true source and flagged
    compromised.  When no ECU was transmitting the frame came from an added
    module.  If no single source address won, the ECUs' best probabilities
    go through a second softmax so that confusion between two source
    addresses of one ECU still names that ECU.
    """
    # pylint: disable=W0613
    purported = bundle.sa_map.ecu_of(transmission.sa)
    positive, scores = _positive_ecus(verdict, bundle)
    winner_ecu = None
    if verdict.winner_sa is not None:
        winner_ecu = bundle.sa_map.ecu_of(verdict.winner_sa)
        positive = sorted(set(positive) | set([winner_ecu]))

    if (winner_ecu is not None and winner_ecu == purported) or \
            (winner_ecu is None and purported in positive):
        verdict.decision = enums.Decision.AUTHENTIC
        verdict.attributed_ecu = purported
        verdict.attributed_sa = verdict.winner_sa \
            if winner_ecu is not None else scores[purported][0]
        return verdict

    others = [k for k in positive if k != purported]
    if winner_ecu is not None and winner_ecu != purported:
        others.remove(winner_ecu)
        others.insert(0, winner_ecu)
    if others:
        k = others[0]
        sa = verdict.winner_sa if k == winner_ecu else scores[k][0]
        verdict.decision = enums.Decision.IMPERSONATION
        verdict.true_source = (k, sa)
        verdict.flagged_compromised = k
        verdict.attributed_ecu, verdict.attributed_sa = k, sa
        verdict.multiple_positive = others[1:]
        if verdict.multiple_positive:
            logger.warning("t=%.9f: ECUs %s also look like transmitters",
                           verdict.t, verdict.multiple_positive)
        return verdict

    verdict.decision = enums.Decision.ADDED_MODULE
    return verdict


def authenticate(transmission, powers, bundle):
    start = time.perf_counter()
    verdict = detect_attack(transmission,
                            attribute(transmission, powers, bundle), powers,
                            bundle)
    verdict.latency = time.perf_counter() - start
    return verdict


def _unscored(tx, status):
    return Verdict(tx.t, tx.sa, tx.frame_id, {}, {}, status=status)


def _score_batch(batch, powers, bundle):
    """
    Verdicts of ``batch``.  When a window of the batch leaves the power
    traces, its transmissions are scored one at a time and those that do
    not fit are marked ``OUT_OF_TRACE``.
    """
    try:
        P = _probability_matrix([tx.t for tx in batch], powers, bundle)
    except exceptions.OutOfBoundsError:
        if len(batch) == 1:
            return [_unscored(batch[0], enums.VerdictStatus.OUT_OF_TRACE)]
        verdicts = []
        for tx in batch:
            verdicts.extend(_score_batch([tx], powers, bundle))
        return verdicts
    return [detect_attack(tx, _draft(tx.t, tx.sa, tx.frame_id, p, bundle),
                          powers, bundle)
            for tx, p in zip(batch, P)]


def authenticate_all(transmissions, powers, bundle, batch_size=BATCH_SIZE):
    """
    One verdict per transmission, in input order.

    Frames that failed their CRC, claim no known source address or whose
    window leaves the power traces get a verdict with that ``status`` and
    no decision.  Features are computed a batch at a time; each scored
    verdict's ``latency`` is its share of the batch time.
    """
    bundle.check_channels(powers)
    known = set(bundle.source_addresses)
    verdicts = [None] * len(transmissions)
    scoreable = []
    for i, tx in enumerate(transmissions):
        if not tx.crc_ok:
            verdicts[i] = _unscored(tx, enums.VerdictStatus.CRC_ERROR)
        elif tx.sa not in known:
            verdicts[i] = _unscored(tx, enums.VerdictStatus.UNKNOWN_SA)
        else:
            scoreable.append(i)
    for lo in range(0, len(scoreable), batch_size):
        batch = scoreable[lo:lo + batch_size]
        start = time.perf_counter()
        done = _score_batch([transmissions[i] for i in batch], powers, bundle)
        share = (time.perf_counter() - start) / len(batch)
        for i, verdict in zip(batch, done):
            if verdict.scored:
                verdict.latency = share
            verdicts[i] = verdict

    counts = {}
    for verdict in verdicts:
        key = verdict.decision if verdict.scored else verdict.status
        counts[key] = counts.get(key, 0) + 1
    skipped = sum(1 for v in verdicts if not v.scored)
    if skipped:
        logger.warning("%d of %d transmissions could not be scored",
                       skipped, len(verdicts))
    scored = [v.latency for v in verdicts if v.scored]
    if scored:
        logger.info("authenticated %d transmissions: %s, mean latency "
                    "%.3f ms", len(verdicts), counts, 1e3 * np.mean(scored))
    return verdicts
