# Copyright (c) 2026 The pycanoa developers
# Distributed under the terms of the MIT license, see setup.py.

# pylint: disable=C0103,R0902,R0913,R0914

"""
The ``pycanoa.evalkit`` module measures how well sender authentication works:
confusion matrices and the metrics derived from them, t-tests of feature
separability, a full simulate-to-verdict pipeline run and the factor sweep
over bus speed, frame format and firmware activity.
"""

import copy
import itertools
import logging

from concurrent.futures import ProcessPoolExecutor

import numpy as np

from scipy import stats

from pycanoa import auth
from pycanoa import bussim
from pycanoa import canproto
from pycanoa import config
from pycanoa import enums
from pycanoa import exceptions
from pycanoa import learn
from pycanoa import sigfeat

logger = logging.getLogger(__name__)

UNATTRIBUTED = "none"
SWEEP_BITRATES = enums.STANDARD_BITRATES
SWEEP_FORMATS = enums.VALID_FRAME_FORMATS
SWEEP_PROGRAMS = enums.VALID_PROGRAM_LEVELS
METRIC_NAMES = ('precision', 'recall', 'accuracy', 'f_measure')


def _label_key(label):
    return (isinstance(label, str), label)


def label_name(label):
    if isinstance(label, tuple):
        return "ECU%d/SA%d" % (label[0] + 1, label[1])
    return str(label)


class ConfusionMatrix(object):
    """
    ``counts[i][j]`` is the number of items with true label ``labels[i]``
    predicted as ``labels[j]``.
    """

    def __init__(self, labels, counts):
        self.labels = list(labels)
        self.counts = np.asarray(counts, dtype=np.int64)
        if self.counts.shape != (len(self.labels), len(self.labels)):
            raise exceptions.InvalidValueError(
                "ConfusionMatrix counts must be square over the labels.")
        if (self.counts < 0).any():
            raise exceptions.InvalidValueError(
                "ConfusionMatrix counts must not be negative.")

    @property
    def total(self):
        return int(self.counts.sum())

    @property
    def rates(self):
        rows = self.counts.sum(axis=1, keepdims=True).astype(np.float64)
        return np.divide(self.counts, rows, out=np.zeros(self.counts.shape),
                         where=rows > 0)

    def rate(self, truth, predicted):
        return float(self.rates[self.labels.index(truth),
                                self.labels.index(predicted)])

    def diagonal(self):
        """
        Row-normalized hit rate of every label that occurs in the truth.
        """
        rates = self.rates
        rows = self.counts.sum(axis=1)
        return dict((label, float(rates[i, i]))
                    for i, label in enumerate(self.labels) if rows[i])

    def __add__(self, other):
        labels = sorted(set(self.labels) | set(other.labels), key=_label_key)
        counts = np.zeros((len(labels), len(labels)), dtype=np.int64)
        for cm in (self, other):
            idx = [labels.index(l) for l in cm.labels]
            counts[np.ix_(idx, idx)] += cm.counts
        return ConfusionMatrix(labels, counts)

    def to_rows(self):
        header = ["truth \\ predicted"] + [label_name(l) for l in self.labels]
        rows = [header]
        for i, label in enumerate(self.labels):
            rows.append([label_name(label)] +
                        ["%.4f" % r for r in self.rates[i]])
        return rows


class MetricReport(object):
    """
    Precision, recall, accuracy and F-measure per label (one against the
    rest) and macro-averaged.  ``flags`` lists ``(label, metric)`` pairs
    whose denominator was zero; those values are reported as 0.
    """

    def __init__(self, per_label, macro, accuracy, flags=None):
        self.per_label = per_label
        self.macro = macro
        self.accuracy = accuracy
        self.flags = flags or []

    def to_dict(self):
        return {
            'accuracy': self.accuracy,
            'macro': self.macro,
            'per_label': dict((label_name(l), v)
                              for l, v in self.per_label.items()),
            'flags': [[label_name(l), m] for l, m in self.flags]}


class SeparabilityReport(object):

    def __init__(self, scores=None):
        self.scores = scores or {}

    def to_rows(self):
        rows = [["sa", "ecu", "t_score", "p_value"]]
        for (ecu, sa), (t, p) in sorted(self.scores.items()):
            rows.append([str(sa), str(ecu), "%.4f" % t, "%.3g" % p])
        return rows


class CellResult(object):

    def __init__(self, key, report=None, error=None, seeds=()):
        self.key = key
        self.report = report
        self.error = error
        self.seeds = list(seeds)

    @property
    def ok(self):
        return self.report is not None


class FactorGrid(object):
    """
    One ``CellResult`` per ``(bitrate, frame_format, program)`` level
    combination.
    """

    def __init__(self, bitrates=SWEEP_BITRATES, formats=SWEEP_FORMATS,
        programs=SWEEP_PROGRAMS):
        self.bitrates = tuple(bitrates)
        self.formats = tuple(formats)
        self.programs = tuple(programs)
        self.cells = {}

    def keys(self):
        return list(itertools.product(self.bitrates, self.formats,
                                      self.programs))

    @property
    def simplest(self):
        return (min(self.bitrates), enums.FrameFormat.STANDARD,
                enums.ProgramActivity.UNIFORM)

    @property
    def hardest(self):
        return (max(self.bitrates), enums.FrameFormat.EXTENDED,
                enums.ProgramActivity.HETEROGENEOUS)

    def is_complete(self):
        return all(k in self.cells and self.cells[k].ok for k in self.keys())

    def to_rows(self):
        rows = [["bitrate", "format", "program"] + list(METRIC_NAMES) +
                ["error"]]
        for key in self.keys():
            cell = self.cells.get(key)
            values = [""] * len(METRIC_NAMES)
            error = "not run"
            if cell is not None and cell.ok:
                values = ["%.4f" % cell.report.macro[m] for m in METRIC_NAMES]
                error = ""
            elif cell is not None:
                error = cell.error
            rows.append([str(key[0]), key[1], key[2]] + values + [error])
        return rows


def confusion(truth, predicted, labels=None):
    truth = list(truth)
    predicted = list(predicted)
    if len(truth) != len(predicted):
        raise exceptions.LengthMismatchError(
            "%d truth labels against %d predictions" %
            (len(truth), len(predicted)))
    if not truth:
        raise exceptions.LengthMismatchError("no labels to compare")
    if labels is None:
        labels = sorted(set(truth) | set(predicted), key=_label_key)
    labels = list(labels)
    index = dict((label, i) for i, label in enumerate(labels))
    counts = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for a, b in zip(truth, predicted):
        counts[index[a], index[b]] += 1
    return ConfusionMatrix(labels, counts)


def _ratio(num, den, label, name, flags):
    if den == 0:
        flags.append((label, name))
        return 0.0
    return float(num) / den


def metrics(cm):
    if not cm.labels:
        raise exceptions.InvalidValueError("empty confusion matrix")
    total = cm.total
    flags = []
    per_label = {}
    for i, label in enumerate(cm.labels):
        tp = cm.counts[i, i]
        fp = cm.counts[:, i].sum() - tp
        fn = cm.counts[i, :].sum() - tp
        tn = total - tp - fp - fn
        precision = _ratio(tp, tp + fp, label, 'precision', flags)
        recall = _ratio(tp, tp + fn, label, 'recall', flags)
        f = _ratio(2 * precision * recall, precision + recall, label,
                   'f_measure', flags)
        per_label[label] = {
            'precision': precision,
            'recall': recall,
            'accuracy': _ratio(tp + tn, total, label, 'accuracy', flags),
            'f_measure': f}
    accuracy = float(np.trace(cm.counts)) / total if total else 0.0
    macro = dict((name, float(np.mean([v[name] for v in per_label.values()])))
                 for name in ('precision', 'recall', 'f_measure'))
    macro['accuracy'] = accuracy
    return MetricReport(per_label, macro, accuracy, flags)


def separability(pos, neg, coordinate=0):
    """
    Welch's two-sample t statistic of ``pos`` against ``neg`` on one feature
    coordinate, and its two-sided p-value from the Student t survival
    function with Welch-Satterthwaite degrees of freedom.
    """
    a = np.asarray(pos, dtype=np.float64)
    b = np.asarray(neg, dtype=np.float64)
    if a.ndim > 1:
        a = a[:, coordinate]
    if b.ndim > 1:
        b = b[:, coordinate]
    if len(a) < 2 or len(b) < 2:
        raise exceptions.InvalidValueError(
            "each population needs at least 2 rows")
    va = a.var(ddof=1) / len(a)
    vb = b.var(ddof=1) / len(b)
    diff = a.mean() - b.mean()
    if va + vb == 0:
        if diff == 0:
            raise exceptions.ZeroVarianceError()
        return float(np.copysign(np.inf, diff)), 0.0
    t = diff / np.sqrt(va + vb)
    dof = (va + vb) ** 2 / (va ** 2 / (len(a) - 1) + vb ** 2 / (len(b) - 1))
    p = 2 * stats.t.sf(abs(t), dof)
    return float(t), float(min(max(p, 0.0), 1.0))


def separability_report(datasets, coordinate=0):
    report = SeparabilityReport()
    for key in sorted(datasets):
        ds = datasets[key]
        report.scores[key] = separability(ds.X[ds.y == 1], ds.X[ds.y == 0],
                                          coordinate)
    return report


def summarize_bootstrap(datasets, cfg=None):
    """
    ``bootstrap_accuracy`` of every dataset, keyed like ``datasets``.
    """
    return dict((key, learn.bootstrap_accuracy(datasets[key], cfg))
                for key in sorted(datasets))


class PipelineResult(object):
    """
    Everything one simulate-to-verdict run produced and measured.
    """

    def __init__(self, scenario, tau, bundle, curves, verdicts, truth,
        sender, attack):
        self.scenario = scenario
        self.tau = tau
        self.bundle = bundle
        self.curves = curves
        self.verdicts = verdicts
        self.truth = truth
        self.sender = sender
        self.attack = attack

    @property
    def sender_metrics(self):
        return metrics(self.sender)

    @property
    def attack_metrics(self):
        return metrics(self.attack)

    @property
    def models(self):
        return dict((e.sa, e.model) for e in self.bundle.entries)

    def pairs(self, attack_kind=None):
        return [(v, e) for v, e in zip(self.verdicts, self.truth)
                if attack_kind is None or e.attack_kind == attack_kind]

    def misattributions(self):
        """
        Normal frames not attributed to the source address they claimed.
        """
        return sum(1 for v, e in self.pairs(enums.AttackKind.NORMAL)
                   if v.attributed_sa != e.claimed_sa)

    def flagged_rate(self, attack_kind=enums.AttackKind.COMPROMISED_ECU):
        """
        Share of ``attack_kind`` frames decided Impersonation with the true
        transmitter flagged.
        """
        pairs = self.pairs(attack_kind)
        if not pairs:
            return float('nan')
        return sum(1 for v, e in pairs
                   if v.decision == enums.Decision.IMPERSONATION and
                   v.flagged_compromised == e.true_source) / float(len(pairs))

    def mean_latency(self):
        return float(np.mean([v.latency for v in self.verdicts])) \
            if self.verdicts else 0.0


def _truth_for(verdicts, log, bitrate):
    truth = []
    kept = []
    for verdict in verdicts:
        entry = log.nearest(verdict.t, 0.5 / bitrate)
        if entry is None:
            logger.warning("no ground truth for frame at t=%.9f", verdict.t)
            continue
        truth.append(entry)
        kept.append(verdict)
    return kept, truth


def drop_attacks(transmissions, log, bitrate):
    """
    The transmissions the ground truth ``log`` marks as normal traffic.
    """
    kept = []
    for tx in transmissions:
        entry = log.nearest(tx.t, 0.5 / bitrate)
        if entry is not None and not entry.is_attack:
            kept.append(tx)
    return kept


def train_bundle(powers, transmissions, sa_map, bitrate, cfg, jobs=1):
    """
    Estimate tau, build the datasets, train every source address model and
    bundle them.  Returns ``(bundle, datasets, trained)``.
    """
    tau = sigfeat.estimate_tau(transmissions)
    window = cfg.window()
    calib_len = max(min(cfg.calib_len, len(powers[0])),
                    sigfeat.MIN_CALIB_LEN)
    datasets = sigfeat.build_datasets(powers, transmissions, sa_map, tau,
                                      window, cfg.m, calib_len)
    trained = learn.train_models(datasets, cfg.train_config(), jobs)
    bundle = auth.ModelBundle.build(trained, datasets, tau, window, sa_map,
                                    cfg.delta, cfg.sharpness, bitrate)
    return bundle, datasets, trained


def score_verdicts(verdicts, log, sa_map, bitrate):
    """
    Match verdicts with the ground truth and build the sender confusion
    (normal frames, over ``(ecu, sa)``) and the attack confusion (all
    frames, Normal against Attack).  Verdicts without a decision are left
    out.  Returns ``(verdicts, truth, sender, attack)``; ``sender`` is
    ``None`` without normal frames.
    """
    verdicts, truth = _truth_for([v for v in verdicts if v.scored], log,
                                 bitrate)
    if not verdicts:
        raise exceptions.EmptyInputError("no verdict matches the ground truth")
    normal = [(v, e) for v, e in zip(verdicts, truth) if not e.is_attack]
    sender = None
    if normal:
        sender = confusion(
            [(sa_map.ecu_of(e.claimed_sa), e.claimed_sa) for _, e in normal],
            [(v.attributed_ecu, v.attributed_sa)
             if v.attributed_sa is not None else UNATTRIBUTED
             for v, _ in normal])
    attack = confusion(
        [enums.AttackLabel.ATTACK if e.is_attack else enums.AttackLabel.NORMAL
         for e in truth],
        [v.attack_label for v in verdicts],
        [enums.AttackLabel.NORMAL, enums.AttackLabel.ATTACK])
    return verdicts, truth, sender, attack


def run_pipeline(scenario, cfg, jobs=1):
    """
    Simulate ``scenario``, decode the bus, train on the first
    ``cfg.train_fraction`` of the decoded transmissions and authenticate the
    rest.  Attack frames in the training part are left out of training.
    """
    voltage, powers, log = bussim.simulate(scenario)
    bitrate = scenario.bus.bitrate
    sa_map = scenario.source_address_map()
    decoded = [tx for tx in canproto.decode_transmissions(voltage, bitrate,
                                                          sa_map)
               if tx.crc_ok and tx.sa is not None]
    if len(decoded) < 2:
        raise exceptions.EmptyInputError("too few frames decoded")
    cut = int(len(decoded) * cfg.train_fraction)
    training = drop_attacks(decoded[:cut], log, bitrate)
    bundle, _, trained = train_bundle(powers, training, sa_map, bitrate, cfg,
                                      jobs)
    verdicts = auth.authenticate_all(decoded[cut:], powers, bundle)
    verdicts, truth, sender, attack = score_verdicts(verdicts, log, sa_map,
                                                     bitrate)
    curves = dict((key[1], value[1]) for key, value in trained.items())
    result = PipelineResult(scenario, bundle.tau, bundle, curves, verdicts,
                            truth, sender, attack)
    logger.info("pipeline: tau %.4f ms, %d verdicts, sender accuracy %s",
                bundle.tau.value * 1e3, len(verdicts),
                "%.4f" % result.sender_metrics.accuracy if sender else "n/a")
    return result


def cell_scenario(base, key, seed):
    """
    A copy of ``base`` moved to the levels of ``key`` with ``seed``.
    """
    bitrate, frame_format, program = key
    scenario = copy.deepcopy(base)
    scenario.bus = bussim.BusConfig(bitrate, frame_format,
                                    base.bus.sample_rate,
                                    base.bus.voltage_noise)
    for ecu in scenario.ecus:
        ecu.profile.program = program
    scenario.seed = seed
    scenario.validate()
    return scenario


def _run_cell(args):
    base, key, seeds, cfg = args
    total = None
    try:
        for seed in seeds:
            result = run_pipeline(cell_scenario(base, key, seed), cfg)
            if result.sender is None:
                raise exceptions.EmptyInputError("no normal frames to score")
            total = result.sender if total is None else total + result.sender
    except exceptions.CanoaError as exc:
        logger.warning("sweep cell %s failed: %s", key, exc)
        return CellResult(key, error=str(exc), seeds=seeds)
    return CellResult(key, metrics(total), seeds=seeds)


def factor_sweep(base, grid=None, seeds=(0,), cfg=None, jobs=1):
    """
    Run the pipeline for every cell of ``grid`` (all 12 by default) and
    every seed; a cell's report is computed over the pooled sender confusion
    of its seeds.  Failed cells carry their error instead of a report.
    """
    cfg = cfg or config.PipelineConfig()
    grid = grid or FactorGrid()
    work = [(base, key, list(seeds), cfg) for key in grid.keys()]
    if jobs and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_cell, work))
    else:
        results = [_run_cell(item) for item in work]
    for cell in results:
        grid.cells[cell.key] = cell
    logger.info("sweep: %d of %d cells complete",
                sum(1 for c in results if c.ok), len(results))
    return grid


def format_table(rows):
    """
    Fixed-width text rendering of a list of rows.
    """
    widths = [max(len(str(row[i])) for row in rows)
              for i in range(len(rows[0]))]
    return "\n".join("  ".join(str(cell).ljust(w)
                               for cell, w in zip(row, widths)).rstrip()
                     for row in rows)
