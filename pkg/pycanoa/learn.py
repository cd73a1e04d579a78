# Copyright (c) 2026 The pycanoa developers
# Distributed under the terms of the MIT license, see setup.py.

# pylint: disable=C0103,R0902,R0913,R0914

"""
The ``pycanoa.learn`` module trains one binary linear SVM per source address.

A model answers "did this ECU transmit this frame under this source
address?".  Its raw margin ``w . x + b`` is mapped to a probability with a
Platt sigmoid fitted on the validation split.  Training is plain seeded
mini-batch subgradient descent on the regularized hinge loss, stopped when
the validation loss settles.
"""

import logging
import warnings

from concurrent.futures import ProcessPoolExecutor

import numpy as np

from scipy.special import expit

from pycanoa import exceptions

logger = logging.getLogger(__name__)

DEFAULT_EPSILON = 1e-4
DEFAULT_MAX_ITERS = 500
DEFAULT_C = 1.0
DEFAULT_SPLIT = (0.7, 0.3)
DEFAULT_BOOTSTRAP_ROUNDS = 100
DEFAULT_SETTLE_EPOCHS = 5
MIN_BOOTSTRAP_ROUNDS = 10


class TrainConfig(object):
    """
    Knobs of ``train`` and ``bootstrap_accuracy``.

    ``split`` holds two (train, validation) or three (train, validation,
    test) ratios summing to one.  The step size of epoch ``e`` is
    ``learning_rate * lr_decay ** e``.  Once the validation loss settles,
    training runs ``settle_epochs`` more epochs.
    """

    def __init__(self, epsilon=DEFAULT_EPSILON, max_iters=DEFAULT_MAX_ITERS,
        c=DEFAULT_C, split=DEFAULT_SPLIT,
        bootstrap_rounds=DEFAULT_BOOTSTRAP_ROUNDS, seed=0, learning_rate=0.1,
        lr_decay=0.97, batch_size=64, min_iters=5,
        settle_epochs=DEFAULT_SETTLE_EPOCHS):
        self.epsilon = epsilon
        self.max_iters = max_iters
        self.c = c
        self.split = split
        self.bootstrap_rounds = bootstrap_rounds
        self.seed = seed
        self.learning_rate = learning_rate
        self.lr_decay = lr_decay
        self.batch_size = batch_size
        self.min_iters = min_iters
        self.settle_epochs = settle_epochs

    def __setattr__(self, name, value):
        msg = None
        if name == 'epsilon' and not value > 0:
            msg = "TrainConfig.epsilon must be positive."
        elif name == 'c' and not value > 0:
            msg = "TrainConfig.c must be positive."
        elif name in ('max_iters', 'batch_size', 'bootstrap_rounds') and \
                int(value) < 1:
            msg = "TrainConfig.%s must be at least 1." % name
        elif name == 'settle_epochs' and int(value) < 0:
            msg = "TrainConfig.settle_epochs must not be negative."
        elif name == 'lr_decay' and not 0 < value <= 1:
            msg = "TrainConfig.lr_decay must lie in (0, 1]."
        elif name == 'split':
            value = tuple(float(r) for r in value)
            if len(value) not in (2, 3) or min(value) <= 0 or \
                    abs(sum(value) - 1.0) > 1e-9:
                msg = "TrainConfig.split must be 2 or 3 positive ratios " \
                      "summing to 1."
        if msg:
            raise exceptions.InvalidValueError(msg)
        return super(TrainConfig, self).__setattr__(name, value)

    def to_dict(self):
        data = dict(self.__dict__)
        data['split'] = list(self.split)
        return data


class SvmModel(object):
    """
    A trained linear classifier on raw (unstandardized) features.

    ``calibration`` is the Platt pair ``(A, B)``: the probability of
    transmission at margin ``m`` is ``1 / (1 + exp(A * m + B))``.
    """

    def __init__(self, w, b, calibration=(-1.0, 0.0), metadata=None):
        self.w = np.asarray(w, dtype=np.float64)
        self.b = float(b)
        self.calibration = tuple(float(v) for v in calibration)
        self.metadata = metadata or {}
        if self.w.ndim != 1 or not np.all(np.isfinite(self.w)) or \
                not np.isfinite(self.b):
            raise exceptions.InvalidValueError(
                "SvmModel weights must be a finite vector.")

    @property
    def m(self):
        return self.w.shape[0]

    def margin(self, X):
        return np.asarray(X, dtype=np.float64).dot(self.w) + self.b

    def to_dict(self):
        return {
            'w': self.w.tolist(),
            'b': self.b,
            'calibration': list(self.calibration),
            'metadata': self.metadata}

    @classmethod
    def from_dict(cls, data):
        return cls(data['w'], data['b'], data['calibration'],
                   data.get('metadata'))


class LearningCurve(object):
    """
    Training and validation loss after every epoch, and the epoch at which
    training stopped.
    """

    def __init__(self, train_loss, val_loss, convergence_index,
        converged=True):
        self.train_loss = list(train_loss)
        self.val_loss = list(val_loss)
        self.convergence_index = convergence_index
        self.converged = converged
        if len(self.train_loss) != len(self.val_loss):
            raise exceptions.InvalidValueError(
                "LearningCurve losses differ in length.")

    def __len__(self):
        return len(self.val_loss)

    def final_delta(self):
        if len(self.val_loss) < 2:
            return float('inf')
        i = self.convergence_index
        return abs(self.val_loss[i] - self.val_loss[i - 1])

    def post_convergence_std(self):
        tail = self.val_loss[self.convergence_index:]
        return float(np.std(tail)) if tail else 0.0

    def to_gnuplot(self):
        lines = ["# epoch train_loss val_loss"]
        for i, (tr, va) in enumerate(zip(self.train_loss, self.val_loss)):
            lines.append("%d %.10g %.10g" % (i, tr, va))
        lines.append("# converged at %d" % self.convergence_index)
        return "\n".join(lines) + "\n"


class BootstrapSummary(object):

    def __init__(self, accuracies):
        self.accuracies = np.asarray(accuracies, dtype=np.float64)
        q = np.percentile(self.accuracies, [0, 25, 50, 75, 100])
        self.min, self.q1, self.median, self.q3, self.max = \
            [float(v) for v in q]

    @property
    def iqr(self):
        return self.q3 - self.q1

    def to_dict(self):
        return {'min': self.min, 'q1': self.q1, 'median': self.median,
                'q3': self.q3, 'max': self.max,
                'rounds': len(self.accuracies)}


def hinge_objective(w, b, X, y, lam):
    """
    ``0.5 * lam * |w|^2 + mean(max(0, 1 - y * (X w + b)))`` with labels in
    ``{-1, +1}``.
    """
    slack = np.maximum(0.0, 1.0 - y * (X.dot(w) + b))
    return 0.5 * lam * w.dot(w) + slack.mean()


def hinge_subgradient(w, b, X, y, lam):
    """
    A subgradient ``(g_w, g_b)`` of ``hinge_objective``.
    """
    active = 1.0 - y * (X.dot(w) + b) > 0
    n = float(len(y))
    g_w = lam * w - X[active].T.dot(y[active]) / n
    g_b = -y[active].sum() / n
    return g_w, g_b


def platt_fit(margins, labels, max_iteration=100, min_step=1e-10,
    sigma=1e-12, eps=1e-5):
    """
    Fit ``(A, B)`` of ``1 / (1 + exp(A * m + B))`` to ``labels`` (0/1) by
    Newton steps with backtracking line search on regularized targets.
    """
    margins = np.asarray(margins, dtype=np.float64)
    labels = np.asarray(labels)
    prior1 = float(np.sum(labels > 0))
    prior0 = len(labels) - prior1
    t = np.where(labels > 0, (prior1 + 1.0) / (prior1 + 2.0),
                 1.0 / (prior0 + 2.0))

    def objective(a, b):
        fapb = margins * a + b
        return np.sum(np.where(fapb >= 0, t, t - 1) * fapb +
                      np.log1p(np.exp(-np.abs(fapb))))

    a, b = 0.0, float(np.log((prior0 + 1.0) / (prior1 + 1.0)))
    fval = objective(a, b)
    for _ in range(max_iteration):
        p = expit(-(margins * a + b))
        d2 = p * (1 - p)
        h11 = sigma + np.sum(margins * margins * d2)
        h22 = sigma + np.sum(d2)
        h21 = np.sum(margins * d2)
        d1 = t - p
        g1 = np.sum(margins * d1)
        g2 = np.sum(d1)
        if abs(g1) < eps and abs(g2) < eps:
            break
        det = h11 * h22 - h21 * h21
        dA = -(h22 * g1 - h21 * g2) / det
        dB = -(-h21 * g1 + h11 * g2) / det
        gd = g1 * dA + g2 * dB
        step = 1.0
        while step >= min_step:
            new_f = objective(a + step * dA, b + step * dB)
            if new_f < fval + 1e-4 * step * gd:
                a, b, fval = a + step * dA, b + step * dB, new_f
                break
            step /= 2.0
        if step < min_step:
            logger.debug("Platt line search stalled at A=%g, B=%g", a, b)
            break
    return float(a), float(b)


def _balanced_split(y, split, rng):
    """
    Indices of the train, validation (and test) parts.  Both classes are cut
    to the size of the smaller one and split per class by ``split``.
    """
    order = rng.permutation(len(y))
    pos = order[y[order] == 1]
    neg = order[y[order] == 0]
    if not len(pos) or not len(neg):
        raise exceptions.SingleClassError()
    n = min(len(pos), len(neg))
    if n < len(split):
        raise exceptions.EmptyInputError(
            "need at least %d examples per class, got %d" % (len(split), n))
    bounds = [0]
    for i, ratio in enumerate(split[:-1]):
        bounds.append(min(max(int(round(bounds[-1] + ratio * n)),
                              bounds[-1] + 1), n - (len(split) - 1 - i)))
    bounds.append(n)
    parts = []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        parts.append(np.sort(np.concatenate((pos[lo:hi], neg[lo:hi]))))
    return parts


def _fit(X_tr, y_tr, X_val, y_val, cfg, rng):
    """
    Subgradient descent on standardized features.  Returns the raw-feature
    ``(w, b)`` and the learning curve.
    """
    mu = X_tr.mean(axis=0)
    sd = X_tr.std(axis=0)
    sd[sd == 0] = 1.0
    Z_tr = (X_tr - mu) / sd
    Z_val = (X_val - mu) / sd
    s_tr = np.where(y_tr == 1, 1.0, -1.0)
    s_val = np.where(y_val == 1, 1.0, -1.0)
    lam = 1.0 / (cfg.c * len(s_tr))

    w = np.zeros(Z_tr.shape[1])
    b = 0.0
    train_loss, val_loss = [], []
    converged_at = None
    epoch = 0
    while epoch < int(cfg.max_iters):
        step = cfg.learning_rate * cfg.lr_decay ** epoch
        order = rng.permutation(len(s_tr))
        for lo in range(0, len(order), int(cfg.batch_size)):
            batch = order[lo:lo + int(cfg.batch_size)]
            g_w, g_b = hinge_subgradient(w, b, Z_tr[batch], s_tr[batch], lam)
            w = w - step * g_w
            b = b - step * g_b
        train_loss.append(hinge_objective(w, b, Z_tr, s_tr, lam))
        val_loss.append(hinge_objective(w, b, Z_val, s_val, lam))
        if converged_at is None and epoch + 1 >= cfg.min_iters and \
                epoch > 0 and abs(val_loss[-1] - val_loss[-2]) < cfg.epsilon:
            converged_at = epoch
        if converged_at is not None and \
                epoch >= converged_at + int(cfg.settle_epochs):
            break
        epoch += 1
    if converged_at is None:
        curve = LearningCurve(train_loss, val_loss, len(val_loss) - 1, False)
    else:
        curve = LearningCurve(train_loss, val_loss, converged_at, True)
    w_raw = w / sd
    return w_raw, b - w_raw.dot(mu), curve


def _accuracy(w, b, X, y):
    if not len(y):
        return float('nan')
    return float(np.mean((X.dot(w) + b > 0) == (y == 1)))


def train(ds, cfg=None):
    """
    Train the model of ``ds.sa`` and return ``(SvmModel, LearningCurve)``.

    Raises ``SingleClassError`` when ``ds`` lacks one class.  When the
    validation loss has not settled after ``cfg.max_iters`` epochs a
    ``NotConvergedWarning`` is issued and the model is returned anyway.
    """
    cfg = cfg or TrainConfig()
    rng = np.random.default_rng(cfg.seed)
    parts = _balanced_split(ds.y, cfg.split, rng)
    X, y = ds.X, ds.y
    tr, val = parts[0], parts[1]
    w, b, curve = _fit(X[tr], y[tr], X[val], y[val], cfg, rng)
    margins = X[val].dot(w) + b
    calibration = platt_fit(margins, y[val])
    metadata = {
        'sa': ds.sa,
        'ecu': ds.ecu,
        'iterations': len(curve),
        'convergence_index': curve.convergence_index,
        'converged': curve.converged,
        'final_loss': curve.val_loss[-1],
        'epsilon': cfg.epsilon,
        'n_train': len(tr),
        'n_val': len(val),
        'train_accuracy': _accuracy(w, b, X[tr], y[tr]),
        'val_accuracy': _accuracy(w, b, X[val], y[val])}
    if len(parts) == 3:
        metadata['n_test'] = len(parts[2])
        metadata['test_accuracy'] = _accuracy(w, b, X[parts[2]],
                                              y[parts[2]])
    if not curve.converged:
        logger.warning("SA %s: validation loss still moving after %d epochs",
                       ds.sa, len(curve))
        warnings.warn("model for SA %s did not converge in %d epochs" %
                      (ds.sa, len(curve)), exceptions.NotConvergedWarning)
    logger.info("SA %s: %d epochs, validation accuracy %.4f", ds.sa,
                len(curve), metadata['val_accuracy'])
    return SvmModel(w, b, calibration, metadata), curve


def _check_features(model, x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1:] != (model.m,):
        raise exceptions.DimensionMismatchError(
            "expected %d features, got shape %s" % (model.m, x.shape))
    if not np.all(np.isfinite(x)):
        raise exceptions.InvalidValueError("features must be finite")
    return x


def transmission_probability(model, X):
    """
    Calibrated probability of transmission for one row or a matrix of rows.
    """
    A, B = model.calibration
    return expit(-(A * model.margin(_check_features(model, X)) + B))


def predict_proba(model, x):
    """
    ``(p_non_transmission, p_transmission)`` for the feature vector ``x``.
    """
    x = _check_features(model, x)
    if x.ndim != 1:
        raise exceptions.DimensionMismatchError(
            "predict_proba takes one feature vector")
    p = float(transmission_probability(model, x))
    return 1.0 - p, p


def bootstrap_accuracy(ds, cfg=None):
    """
    Retrain on ``cfg.bootstrap_rounds`` resamples (with replacement) of the
    training split and collect the validation accuracy of every round.
    """
    cfg = cfg or TrainConfig()
    if cfg.bootstrap_rounds < MIN_BOOTSTRAP_ROUNDS:
        raise exceptions.InvalidValueError(
            "bootstrapping needs at least %d rounds" % MIN_BOOTSTRAP_ROUNDS)
    rng = np.random.default_rng(cfg.seed)
    parts = _balanced_split(ds.y, cfg.split, rng)
    tr, val = parts[0], parts[1]
    X, y = ds.X, ds.y
    accuracies = []
    for _ in range(int(cfg.bootstrap_rounds)):
        sample = tr[rng.integers(0, len(tr), size=len(tr))]
        if y[sample].min() == y[sample].max():
            raise exceptions.SingleClassError(
                "a bootstrap resample drew a single class")
        with warnings.catch_warnings():
            warnings.simplefilter('ignore', exceptions.NotConvergedWarning)
            w, b, _ = _fit(X[sample], y[sample], X[val], y[val], cfg, rng)
        accuracies.append(_accuracy(w, b, X[val], y[val]))
    summary = BootstrapSummary(accuracies)
    logger.info("SA %s bootstrap: median %.4f, IQR %.4f over %d rounds",
                ds.sa, summary.median, summary.iqr, len(accuracies))
    return summary


def _train_one(args):
    ds, cfg = args
    return train(ds, cfg)


def train_models(datasets, cfg=None, jobs=1):
    """
    Train every dataset of ``datasets`` (a dict keyed by ``(ecu, sa)``) and
    return a dict of ``(SvmModel, LearningCurve)`` with the same keys.
    Results do not depend on ``jobs``.
    """
    cfg = cfg or TrainConfig()
    keys = sorted(datasets)
    work = [(datasets[key], cfg) for key in keys]
    if jobs and jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_train_one, work))
    else:
        results = [_train_one(item) for item in work]
    return dict(zip(keys, results))
