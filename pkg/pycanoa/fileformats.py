# Copyright (c) 2026 The pycanoa developers
# Distributed under the terms of the MIT license, see setup.py.

# pylint: disable=C0103,R0914

"""
On-disk formats of pycanoa.

Trace files (``.ctr``) hold sampled signals: a fixed little-endian header
followed by channel-major 32-bit floats.  Model bundles (``.cnb``) hold a
trained ``ModelBundle`` as length-prefixed sections closed by an MD5 footer.
Ground truth, verdicts and reports are CSV, JSON or gnuplot text.
"""

import csv
import hashlib
import logging
import os
import struct

import numpy as np
import simplejson

from pycanoa import auth
from pycanoa import bussim
from pycanoa import canproto
from pycanoa import enums
from pycanoa import exceptions
from pycanoa import learn
from pycanoa import sigfeat

logger = logging.getLogger(__name__)

TRACE_MAGIC = b"CTRC"
TRACE_VERSION = 1
TRACE_HEADER = struct.Struct('<4sHBHIQQ')
SAMPLE_DTYPE = np.dtype('<f4')

BUNDLE_MAGIC = b"CNBL"
BUNDLE_VERSION = 1
BUNDLE_HEADER = struct.Struct('<4sHH')
SECTION_NAME = struct.Struct('<H')
SECTION_SIZE = struct.Struct('<Q')
ARRAY_DTYPE = np.dtype('<f8')
CHECKSUM_SIZE = 16

GROUND_TRUTH_HEADER = ['t_sec', 'frame_id', 'claimed_sa', 'true_source',
                       'attack_kind']

VOLTAGE_FILE = 'voltage.ctr'
POWER_FILE = 'power_%d.ctr'
GROUND_TRUTH_FILE = 'ground_truth.csv'
MANIFEST_FILE = 'manifest.json'


def write_trace(path, traces):
    """
    Write one or more equally long traces of the same kind and sample rate
    as the channels of one trace file.
    """
    if isinstance(traces, bussim.SampledTrace):
        traces = [traces]
    first = traces[0]
    for trace in traces[1:]:
        if len(trace) != len(first) or \
                trace.sample_rate != first.sample_rate or \
                trace.kind != first.kind:
            raise exceptions.InvalidValueError(
                "trace channels differ in length, rate or kind")
    header = TRACE_HEADER.pack(TRACE_MAGIC, TRACE_VERSION, first.kind,
                               len(traces), int(first.sample_rate),
                               len(first),
                               int(round(first.start_time * 1e9)))
    with open(path, 'wb') as fp:
        fp.write(header)
        for trace in traces:
            fp.write(np.asarray(trace.samples, dtype=SAMPLE_DTYPE).tobytes())


def read_trace(path):
    """
    The channels of a trace file, as a list of ``SampledTrace``.
    """
    with open(path, 'rb') as fp:
        head = fp.read(TRACE_HEADER.size)
        if len(head) < TRACE_HEADER.size:
            raise exceptions.TraceFormatError("%s: truncated header" % path)
        magic, version, kind, channels, rate, n, start_ns = \
            TRACE_HEADER.unpack(head)
        if magic != TRACE_MAGIC:
            raise exceptions.TraceFormatError("%s: bad magic %r" %
                                              (path, magic))
        if version != TRACE_VERSION:
            raise exceptions.TraceFormatError(
                "%s: unsupported version %d" % (path, version))
        body = fp.read()
    if len(body) != channels * n * SAMPLE_DTYPE.itemsize:
        raise exceptions.TraceFormatError(
            "%s: body holds %d bytes, header promises %d" %
            (path, len(body), channels * n * SAMPLE_DTYPE.itemsize))
    data = np.frombuffer(body, dtype=SAMPLE_DTYPE).reshape(channels, n)
    return [bussim.SampledTrace(data[i].astype(np.float32), rate,
                                start_ns / 1e9, kind)
            for i in range(channels)]


def write_ground_truth(path, log):
    with open(path, 'w', newline='') as fp:
        writer = csv.writer(fp)
        writer.writerow(GROUND_TRUTH_HEADER)
        for e in log:
            writer.writerow([repr(float(e.t)), e.frame_id, e.claimed_sa,
                             e.true_source, e.attack_kind])


def read_ground_truth(path):
    entries = []
    with open(path, newline='') as fp:
        reader = csv.reader(fp)
        header = next(reader, None)
        if header != GROUND_TRUTH_HEADER:
            raise exceptions.TraceFormatError(
                "%s: not a ground truth file" % path)
        for row in reader:
            entries.append(bussim.GroundTruthEntry(
                float(row[0]), int(row[1]), int(row[2]), int(row[3]),
                row[4]))
    return bussim.GroundTruthLog(entries)


def write_json(path, data):
    with open(path, 'w') as fp:
        fp.write(simplejson.dumps(data, indent=2, sort_keys=True))
        fp.write("\n")


def read_json(path):
    with open(path) as fp:
        return simplejson.loads(fp.read())


def write_run(directory, scenario, voltage, powers, log):
    """
    Store one simulation: the voltage trace, one power trace per ECU, the
    ground truth and a manifest describing the bus.
    """
    if not os.path.isdir(directory):
        os.makedirs(directory)
    write_trace(os.path.join(directory, VOLTAGE_FILE), voltage)
    for ecu, power in zip(scenario.ecus, powers):
        write_trace(os.path.join(directory, POWER_FILE % ecu.index), power)
    write_ground_truth(os.path.join(directory, GROUND_TRUTH_FILE), log)
    write_json(os.path.join(directory, MANIFEST_FILE), {
        'bitrate': scenario.bus.bitrate,
        'frame_format': scenario.bus.frame_format,
        'sample_rate': scenario.bus.sample_rate,
        'seed': scenario.seed,
        'ecus': dict((str(e.index), e.name) for e in scenario.ecus),
        'sa_map': scenario.source_address_map().to_dict()})


class RunData(object):

    def __init__(self, voltage, powers, log, bitrate, sa_map, manifest):
        self.voltage = voltage
        self.powers = powers
        self.log = log
        self.bitrate = bitrate
        self.sa_map = sa_map
        self.manifest = manifest


def read_run(directory):
    """
    Load what ``write_run`` stored.  ``powers`` is indexed by ECU index.
    """
    manifest_path = os.path.join(directory, MANIFEST_FILE)
    if not os.path.isfile(manifest_path):
        raise exceptions.MissingChannelError(
            "%s: no %s" % (directory, MANIFEST_FILE))
    manifest = read_json(manifest_path)
    sa_map = canproto.SourceAddressMap.from_dict(manifest['sa_map'])
    voltage = read_trace(os.path.join(directory, VOLTAGE_FILE))[0]
    powers = []
    for ecu in range(max(sa_map.ecus) + 1):
        path = os.path.join(directory, POWER_FILE % ecu)
        if not os.path.isfile(path):
            raise exceptions.MissingChannelError(
                "%s: no power trace for ECU %d" % (directory, ecu))
        powers.append(read_trace(path)[0])
    log = None
    truth_path = os.path.join(directory, GROUND_TRUTH_FILE)
    if os.path.isfile(truth_path):
        log = read_ground_truth(truth_path)
    return RunData(voltage, powers, log, manifest['bitrate'], sa_map,
                   manifest)


def _array_section(name, array):
    return name, np.ascontiguousarray(array, dtype=ARRAY_DTYPE).tobytes()


def _bundle_sections(bundle):
    meta = {
        'tau': bundle.tau.value,
        'alpha': bundle.window.alpha,
        'delta': bundle.delta,
        'sharpness': bundle.sharpness,
        'bitrate': bundle.bitrate,
        'm': bundle.m,
        'sa_map': bundle.sa_map.to_dict(),
        'metadata': bundle.metadata,
        'entries': []}
    sections = []
    for e in bundle.entries:
        meta['entries'].append({
            'sa': e.sa,
            'ecu': e.ecu,
            'b': e.model.b,
            'calibration': list(e.model.calibration),
            'model': e.model.metadata,
            'stats': e.stats.to_dict(),
            'spectrum_bins': int(e.basis.mean.shape[0]),
            'total_variance': e.basis.total_variance})
        sections.append(_array_section('w/%d' % e.sa, e.model.w))
        sections.append(_array_section('mean/%d' % e.sa, e.basis.mean))
        sections.append(_array_section('components/%d' % e.sa,
                                       e.basis.components))
        sections.append(_array_section('variance/%d' % e.sa,
                                       e.basis.explained_variance))
    meta_bytes = simplejson.dumps(meta, sort_keys=True).encode('utf-8')
    return [('meta', meta_bytes)] + sections


def save_bundle(path, bundle):
    sections = _bundle_sections(bundle)
    parts = [BUNDLE_HEADER.pack(BUNDLE_MAGIC, BUNDLE_VERSION, len(sections))]
    for name, payload in sections:
        name = name.encode('ascii')
        parts.append(SECTION_NAME.pack(len(name)) + name)
        parts.append(SECTION_SIZE.pack(len(payload)) + payload)
    body = b"".join(parts)
    with open(path, 'wb') as fp:
        fp.write(body)
        fp.write(hashlib.md5(body).digest())


def _read_sections(data, path):
    if len(data) < BUNDLE_HEADER.size + CHECKSUM_SIZE:
        raise exceptions.BundleFormatError("%s: truncated" % path)
    body, digest = data[:-CHECKSUM_SIZE], data[-CHECKSUM_SIZE:]
    magic, version, count = BUNDLE_HEADER.unpack_from(body)
    if magic != BUNDLE_MAGIC:
        raise exceptions.BundleFormatError("%s: bad magic %r" % (path, magic))
    if version != BUNDLE_VERSION:
        raise exceptions.BundleFormatError(
            "%s: unsupported version %d" % (path, version))
    if hashlib.md5(body).digest() != digest:
        raise exceptions.BundleFormatError("%s: checksum mismatch" % path)
    sections = {}
    offset = BUNDLE_HEADER.size
    try:
        for _ in range(count):
            (size,) = SECTION_NAME.unpack_from(body, offset)
            offset += SECTION_NAME.size
            name = body[offset:offset + size].decode('ascii')
            offset += size
            (size,) = SECTION_SIZE.unpack_from(body, offset)
            offset += SECTION_SIZE.size
            if offset + size > len(body):
                raise exceptions.BundleFormatError(
                    "%s: section %s is truncated" % (path, name))
            sections[name] = body[offset:offset + size]
            offset += size
    except struct.error:
        raise exceptions.BundleFormatError("%s: truncated section" % path)
    return sections


def _array(sections, name, path):
    if name not in sections:
        raise exceptions.BundleFormatError("%s: no section %s" % (path, name))
    return np.frombuffer(sections[name], dtype=ARRAY_DTYPE).copy()


def load_bundle(path):
    with open(path, 'rb') as fp:
        sections = _read_sections(fp.read(), path)
    if 'meta' not in sections:
        raise exceptions.BundleFormatError("%s: no meta section" % path)
    meta = simplejson.loads(sections['meta'].decode('utf-8'))
    entries = []
    for item in meta['entries']:
        sa = item['sa']
        model = learn.SvmModel(_array(sections, 'w/%d' % sa, path),
                               item['b'], item['calibration'], item['model'])
        components = _array(sections, 'components/%d' % sa, path).reshape(
            -1, item['spectrum_bins'])
        basis = sigfeat.PcaBasis(_array(sections, 'mean/%d' % sa, path),
                                 components,
                                 _array(sections, 'variance/%d' % sa, path),
                                 item['total_variance'])
        stats = sigfeat.NormStats(item['stats']['mean'],
                                  item['stats']['std'])
        entries.append(auth.BundleEntry(sa, item['ecu'], model, basis,
                                        stats))
    return auth.ModelBundle(
        entries, sigfeat.Tau(meta['tau']), sigfeat.TukeyParams(meta['alpha']),
        canproto.SourceAddressMap.from_dict(meta['sa_map']), meta['delta'],
        meta['sharpness'], meta['bitrate'], meta['metadata'])


VERDICT_HEADER = ['t_sec', 'frame_id', 'claimed_sa', 'status', 'decision',
                  'attributed_ecu', 'attributed_sa', 'true_source_ecu',
                  'true_source_sa', 'flagged_compromised', 'winner_sa',
                  'tie', 'multiple_positive', 'latency_ms']


def _blank(value):
    return "" if value is None else value


def _number(values, sa):
    return "%.6g" % values[sa] if sa in values else ""


def write_verdicts(path, verdicts, source_addresses):
    """
    One row per verdict.  Unscored verdicts keep their ``status`` and leave
    the decision and probability columns blank.
    """
    with open(path, 'w', newline='') as fp:
        writer = csv.writer(fp)
        writer.writerow(VERDICT_HEADER +
                        ['p_tx_%d' % sa for sa in source_addresses] +
                        ['softmax_%d' % sa for sa in source_addresses])
        for v in verdicts:
            source = v.true_source or (None, None)
            latency = "" if v.latency is None else "%.6f" % (1e3 * v.latency)
            writer.writerow(
                [repr(float(v.t)), _blank(v.frame_id), _blank(v.claimed_sa),
                 v.status, _blank(v.decision), _blank(v.attributed_ecu),
                 _blank(v.attributed_sa), _blank(source[0]),
                 _blank(source[1]), _blank(v.flagged_compromised),
                 _blank(v.winner_sa), int(v.tie),
                 " ".join(str(k) for k in v.multiple_positive), latency] +
                [_number(v.p_tx, sa) for sa in source_addresses] +
                [_number(v.probabilities, sa) for sa in source_addresses])


def read_verdict_decisions(path):
    """
    ``(t_sec, status, decision)`` of every row of a verdict file; the
    decision is ``None`` for unscored rows.
    """
    with open(path, newline='') as fp:
        reader = csv.DictReader(fp)
        return [(float(row['t_sec']), row['status'], row['decision'] or None)
                for row in reader]


def write_rows(path, rows):
    with open(path, 'w', newline='') as fp:
        csv.writer(fp).writerows(rows)


def write_learning_curve(path, curve):
    with open(path, 'w') as fp:
        fp.write(curve.to_gnuplot())


def write_boxplot(path, summaries):
    """
    gnuplot candlestick data: one row per source address with the whiskers
    and quartiles of its bootstrap accuracies.
    """
    with open(path, 'w') as fp:
        fp.write("# x sa min q1 median q3 max\n")
        for x, key in enumerate(sorted(summaries), 1):
            s = summaries[key]
            sa = key[1] if isinstance(key, tuple) else key
            fp.write("%d %d %.6f %.6f %.6f %.6f %.6f\n" %
                     (x, sa, s.min, s.q1, s.median, s.q3, s.max))
