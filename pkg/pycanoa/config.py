# Copyright (c) 2026 The pycanoa developers
# Distributed under the terms of the MIT license, see setup.py.

# pylint: disable=C0103,R0902,R0912

"""
Configuration for pycanoa uses the standard ini file structure, found in
``~/.canoa`` for a user level one or ``/etc/canoa.cfg`` for one at the system
level.  A file named on the command line is read last.  Later files
supersede earlier ones.

Sections:

``[scenario]``
    ``preset`` (``lab`` or ``truck``), ``bitrate``, ``frame_format``,
    ``sample_rate``, ``duration``, ``n_frames``, ``max_frames``, ``period``,
    ``program``, ``seed``, ``voltage_noise``.

``[pipeline]``
    ``m``, ``alpha``, ``delta``, ``sharpness``, ``epsilon``, ``c``,
    ``split`` (``0.7,0.3`` or ``6:2:2``), ``bootstrap_rounds``,
    ``max_iters``, ``min_iters``, ``settle_epochs``, ``learning_rate``,
    ``lr_decay``, ``batch_size``, ``calib_len``, ``train_fraction``.

``[ecu N]``
    ``source_addresses``, ``name``, ``period``, ``priority``, ``payload``,
    ``dlc`` and every ``PowerProfile`` knob.  When present these replace the
    preset's ECUs.

``[attack N]``
    ``kind``, ``spoofed_sa``, ``attacker``, ``count``, ``trigger_times``,
    ``start``, ``stop``.

Unknown sections and keys are refused with a ``ConfigError`` naming the line.
"""

import configparser
import logging
import os
import re

from pycanoa import auth
from pycanoa import bussim
from pycanoa import enums
from pycanoa import exceptions
from pycanoa import learn
from pycanoa import sigfeat

USER_CONFIG_PATH = os.path.expanduser('~/.canoa')
CONFIG_PATH = '/etc/canoa.cfg'
CONFIG_LOCATIONS = [CONFIG_PATH, USER_CONFIG_PATH]
LOG_ENV = 'CANOA_LOG'
LOG_LEVELS = {
    'debug': logging.DEBUG,
    'info': logging.INFO,
    'warning': logging.WARNING,
    'error': logging.ERROR}
PRESETS = ('lab', 'truck')

_SECTION = re.compile(r'^\s*\[([^\]]+)\]')
_OPTION = re.compile(r'^\s*([^:=\s][^:=]*?)\s*[:=]')


def _positive(kind):
    def convert(value):
        value = kind(value)
        if not value > 0:
            raise ValueError("must be positive")
        return value
    return convert


def _non_negative(value):
    value = float(value)
    if value < 0:
        raise ValueError("must not be negative")
    return value


def _int_list(value):
    return [int(v, 0) for v in re.split(r'[,\s]+', value.strip()) if v]


def _float_list(value):
    return [float(v) for v in re.split(r'[,\s]+', value.strip()) if v]


def _non_negative_int(value):
    value = int(value)
    if value < 0:
        raise ValueError("must not be negative")
    return value


def _fraction(value):
    value = float(value)
    if not 0 < value < 1:
        raise ValueError("must lie in (0, 1)")
    return value


def _unit(value):
    value = float(value)
    if not 0 <= value <= 1:
        raise ValueError("must lie in [0, 1]")
    return value


def _choice(*choices):
    def convert(value):
        if value not in choices:
            raise ValueError("must be one of %s" % ", ".join(choices))
        return value
    return convert


def parse_split(value):
    """
    ``"0.7,0.3"`` or ``"6:2:2"`` to ratios summing to one.
    """
    parts = [float(v) for v in re.split(r'[,:\s]+', str(value).strip()) if v]
    total = sum(parts)
    if len(parts) not in (2, 3) or min(parts) <= 0:
        raise ValueError("split needs 2 or 3 positive parts")
    return tuple(p / total for p in parts)


SCENARIO_KEYS = {
    'preset': _choice(*PRESETS),
    'bitrate': _positive(int),
    'frame_format': _choice(*enums.VALID_FRAME_FORMATS),
    'sample_rate': _positive(int),
    'duration': _positive(float),
    'n_frames': _positive(int),
    'max_frames': _positive(int),
    'period': _positive(float),
    'program': _choice(*enums.VALID_PROGRAM_LEVELS),
    'seed': int,
    'voltage_noise': _non_negative}

PIPELINE_KEYS = {
    'm': _positive(int),
    'alpha': _unit,
    'delta': _fraction,
    'sharpness': _positive(float),
    'epsilon': _positive(float),
    'c': _positive(float),
    'split': parse_split,
    'bootstrap_rounds': _positive(int),
    'max_iters': _positive(int),
    'min_iters': _positive(int),
    'settle_epochs': _non_negative_int,
    'learning_rate': _positive(float),
    'lr_decay': _positive(float),
    'batch_size': _positive(int),
    'calib_len': _positive(int),
    'train_fraction': _fraction}

ECU_KEYS = {
    'source_addresses': _int_list,
    'name': str,
    'period': _positive(float),
    'priority': int,
    'payload': _choice('random', 'j1939'),
    'dlc': int,
    'program': _choice(*enums.VALID_PROGRAM_LEVELS)}
for _knob in bussim.PowerProfile().to_dict():
    ECU_KEYS.setdefault(_knob, float)

ATTACK_KEYS = {
    'kind': _choice(*enums.VALID_ATTACK_KINDS),
    'spoofed_sa': lambda v: int(v, 0),
    'attacker': int,
    'count': _positive(int),
    'trigger_times': _float_list,
    'start': _non_negative,
    'stop': _positive(float)}


class PipelineConfig(object):
    """
    Knobs of the feature, learning and authentication stages.
    """

    def __init__(self, m=sigfeat.DEFAULT_M, alpha=sigfeat.DEFAULT_ALPHA,
        delta=auth.DEFAULT_DELTA, sharpness=auth.DEFAULT_SHARPNESS,
        epsilon=learn.DEFAULT_EPSILON, c=learn.DEFAULT_C,
        split=learn.DEFAULT_SPLIT,
        bootstrap_rounds=learn.DEFAULT_BOOTSTRAP_ROUNDS,
        max_iters=learn.DEFAULT_MAX_ITERS, min_iters=5, learning_rate=0.1,
        lr_decay=0.97, batch_size=64, calib_len=sigfeat.DEFAULT_CALIB_LEN,
        train_fraction=0.8, seed=0,
        settle_epochs=learn.DEFAULT_SETTLE_EPOCHS):
        self.m = m
        self.alpha = alpha
        self.delta = delta
        self.sharpness = sharpness
        self.epsilon = epsilon
        self.c = c
        self.split = tuple(split)
        self.bootstrap_rounds = bootstrap_rounds
        self.max_iters = max_iters
        self.min_iters = min_iters
        self.settle_epochs = settle_epochs
        self.learning_rate = learning_rate
        self.lr_decay = lr_decay
        self.batch_size = batch_size
        self.calib_len = calib_len
        self.train_fraction = train_fraction
        self.seed = seed

    def __setattr__(self, name, value):
        if name == 'delta' and not 0 < value < 1:
            raise exceptions.InvalidValueError(
                "PipelineConfig.delta must lie in (0, 1).")
        if name == 'train_fraction' and not 0 < value < 1:
            raise exceptions.InvalidValueError(
                "PipelineConfig.train_fraction must lie in (0, 1).")
        return super(PipelineConfig, self).__setattr__(name, value)

    def train_config(self):
        return learn.TrainConfig(
            epsilon=self.epsilon, max_iters=self.max_iters, c=self.c,
            split=self.split, bootstrap_rounds=self.bootstrap_rounds,
            seed=self.seed, learning_rate=self.learning_rate,
            lr_decay=self.lr_decay, batch_size=self.batch_size,
            min_iters=self.min_iters, settle_epochs=self.settle_epochs)

    def window(self):
        return sigfeat.TukeyParams(self.alpha)

    def to_dict(self):
        data = dict(self.__dict__)
        data['split'] = list(self.split)
        return data


def _line_index(paths):
    """
    ``(section, key) -> (path, line)`` and ``section -> (path, line)`` for
    the last file defining each.
    """
    index = {}
    for path in paths:
        section = None
        with open(path) as fp:
            for lineno, line in enumerate(fp, 1):
                if line.lstrip().startswith(('#', ';')):
                    continue
                match = _SECTION.match(line)
                if match:
                    section = match.group(1).strip()
                    index[section] = (path, lineno)
                    continue
                match = _OPTION.match(line)
                if match and section is not None and not line[0].isspace():
                    index[(section, match.group(1).strip().lower())] = \
                        (path, lineno)
    return index


def _fail(message, where):
    path, line = where if where else (None, None)
    if path:
        message = "%s: %s" % (path, message)
    raise exceptions.ConfigError(message, line)


def _convert(section, options, schema, index):
    values = {}
    for key, raw in options.items():
        where = index.get((section, key))
        if key not in schema:
            _fail("unknown key %r in [%s]" % (key, section), where)
        try:
            values[key] = schema[key](raw.strip().strip("'").strip('"'))
        except ValueError as exc:
            _fail("bad value %r for %s: %s" % (raw, key, exc), where)
    return values


class RunConfig(object):
    """
    A parsed run configuration: scenario settings, pipeline knobs, optional
    explicit ECUs and attacks.
    """

    def __init__(self, scenario=None, pipeline=None, ecus=None, attacks=None):
        self.scenario = scenario or {}
        self.pipeline = pipeline or PipelineConfig()
        self.ecus = ecus or {}
        self.attacks = attacks or {}
        if 'seed' in self.scenario:
            self.pipeline.seed = self.scenario['seed']

    @classmethod
    def load(cls, path=None, locations=None):
        """
        Read the system, user and ``path`` files.  A missing ``path`` is a
        ``ConfigError``; missing system or user files are skipped.
        """
        if locations is None:
            locations = CONFIG_LOCATIONS
        paths = [p for p in locations if os.path.isfile(p)]
        if path is not None:
            if not os.path.isfile(path):
                raise exceptions.ConfigError("no such config file %s" % path)
            paths.append(path)
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read(paths)
        except configparser.ParsingError as exc:
            lineno = exc.errors[0][0] if exc.errors else None
            raise exceptions.ConfigError(
                "%s: syntax error" % exc.source, lineno)
        except (configparser.DuplicateSectionError,
                configparser.DuplicateOptionError,
                configparser.MissingSectionHeaderError) as exc:
            raise exceptions.ConfigError(
                "%s: %s" % (exc.source, exc.message), exc.lineno)
        return cls.from_parser(parser, _line_index(paths))

    @classmethod
    def from_parser(cls, parser, index=None):
        index = index or {}
        scenario, pipeline, ecus, attacks = {}, {}, {}, {}
        for section in parser.sections():
            options = dict(parser.items(section))
            name = section.strip().lower()
            match = re.match(r'^(ecu|attack)\s+(\d+)$', name)
            if name == 'scenario':
                scenario = _convert(section, options, SCENARIO_KEYS, index)
            elif name == 'pipeline':
                pipeline = _convert(section, options, PIPELINE_KEYS, index)
            elif match and match.group(1) == 'ecu':
                ecus[int(match.group(2))] = _convert(section, options,
                                                     ECU_KEYS, index)
            elif match:
                attacks[int(match.group(2))] = _convert(section, options,
                                                        ATTACK_KEYS, index)
            else:
                _fail("unknown section [%s]" % section, index.get(section))
        return cls(scenario, PipelineConfig(**pipeline), ecus, attacks)

    @property
    def seed(self):
        return self.scenario.get('seed', 0)

    def set_seed(self, seed):
        self.scenario['seed'] = seed
        self.pipeline.seed = seed

    def _attack_specs(self):
        specs = []
        for key in sorted(self.attacks):
            values = dict(self.attacks[key])
            if 'kind' not in values or 'spoofed_sa' not in values:
                raise exceptions.ConfigError(
                    "[attack %d] needs kind and spoofed_sa" % key)
            specs.append(bussim.AttackSpec(values.pop('kind'),
                                           values.pop('spoofed_sa'),
                                           **values))
        return specs or None

    def _custom_ecus(self):
        ecus = []
        for index in sorted(self.ecus):
            values = dict(self.ecus[index])
            sas = values.pop('source_addresses', None)
            if not sas:
                raise exceptions.ConfigError(
                    "[ecu %d] needs source_addresses" % index)
            message = dict((k, values.pop(k)) for k in
                           ('period', 'priority', 'payload', 'dlc')
                           if k in values)
            message.setdefault('period', self.scenario.get('period', 0.01))
            name = values.pop('name', None)
            profile = bussim.PowerProfile(**values)
            messages = [bussim.MessageSpec(sa, **message) for sa in sas]
            ecus.append(bussim.EcuSpec(index, sas, messages, profile, name))
        return ecus

    def build_scenario(self):
        """
        The ``bussim.Scenario`` this configuration describes.
        """
        s = self.scenario
        attacks = self._attack_specs()
        try:
            if self.ecus:
                bus = bussim.BusConfig(
                    s.get('bitrate', 125000),
                    s.get('frame_format', enums.FrameFormat.EXTENDED),
                    s.get('sample_rate', bussim.DEFAULT_SAMPLE_RATE),
                    s.get('voltage_noise', bussim.DEFAULT_VOLTAGE_NOISE))
                return bussim.Scenario(bus, self._custom_ecus(),
                                       s.get('duration', 1.0),
                                       seed=self.seed, attacks=attacks,
                                       max_frames=s.get('max_frames'))
            common = dict(
                frame_format=s.get('frame_format',
                                   enums.FrameFormat.EXTENDED),
                sample_rate=s.get('sample_rate',
                                  bussim.DEFAULT_SAMPLE_RATE),
                attacks=attacks)
            for key in ('n_frames', 'bitrate', 'period', 'program', 'seed'):
                if key in s:
                    common[key] = s[key]
            if s.get('preset', 'lab') == 'truck':
                scenario = bussim.truck_scenario(**common)
            else:
                if 'duration' in s:
                    common['duration'] = s['duration']
                scenario = bussim.lab_scenario(**common)
            if 'voltage_noise' in s:
                scenario.bus.voltage_noise = s['voltage_noise']
            if 'max_frames' in s:
                scenario.max_frames = s['max_frames']
            if 'duration' in s:
                scenario.duration = s['duration']
            return scenario
        except exceptions.InvalidValueError as exc:
            raise exceptions.ConfigError(str(exc))


def log_level(default=logging.WARNING):
    """
    Logging level named by the ``CANOA_LOG`` environment variable.
    """
    name = os.environ.get(LOG_ENV, '').strip().lower()
    return LOG_LEVELS.get(name, default)
