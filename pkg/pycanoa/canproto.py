# Copyright (c) 2026 The pycanoa developers
# Distributed under the terms of the MIT license, see setup.py.

# pylint: disable=C0103,R0902,R0913,R0914,W0622

"""
The ``pycanoa.canproto`` module models CAN data frames and moves them between
their logical form, the bit image a controller drives on the wire, and the
sampled differential voltage an oscilloscope records.

Framing follows ISO 11898-1: CRC-15 with polynomial 0x4599, a stuff bit after
five equal bits from SOF through the CRC field, a dominant ACK slot written by
the receivers and a three bit intermission between frames.
"""

import heapq
import logging
import math

from collections import Counter

import numpy as np

from pycanoa import enums
from pycanoa import exceptions

logger = logging.getLogger(__name__)

CRC15_POLY = 0x4599
STUFF_RUN = 5
INTERMISSION_BITS = 3
IDLE_BITS = 11
MAX_STANDARD_ID = (1 << 11) - 1
MAX_EXTENDED_ID = (1 << 29) - 1
DOMINANT_THRESHOLD = 1.0
MIN_SAMPLES_PER_BIT = 10


def _int_bits(value, width):
    return [(value >> i) & 1 for i in range(width - 1, -1, -1)]


def _bits_int(bits):
    value = 0
    for bit in bits:
        value = (value << 1) | bit
    return value


class BitSequence(object):
    """
    An ordered run of bits, either the logical image of a frame or the image
    after stuffing.
    """

    def __init__(self, bits=(), role=enums.BitRole.UNSTUFFED):
        if isinstance(bits, str):
            bits = [int(char) for char in bits if char in "01"]
        self.bits = tuple(int(bit) for bit in bits)
        if any(bit not in (0, 1) for bit in self.bits):
            raise exceptions.InvalidValueError(
                "BitSequence may only hold 0 and 1.")
        self.role = role

    def __len__(self):
        return len(self.bits)

    def __iter__(self):
        return iter(self.bits)

    def __getitem__(self, index):
        return self.bits[index]

    def __add__(self, other):
        return BitSequence(self.bits + tuple(other), self.role)

    def __eq__(self, other):
        if isinstance(other, BitSequence):
            return self.bits == other.bits
        if isinstance(other, str):
            return self.to_string() == other
        return self.bits == tuple(other)

    def __ne__(self, other):
        return not self == other

    def __hash__(self):
        return hash(self.bits)

    def __repr__(self):
        return "BitSequence(%r, %s)" % (self.to_string(), self.role)

    def to_string(self):
        return "".join(str(bit) for bit in self.bits)


class CanFrame(object):
    """
    A CAN data frame.  The CRC is derived from the rest of the frame; frames
    are immutable once built.
    """

    def __init__(self, id, format=enums.FrameFormat.STANDARD, payload=b"",
        dlc=None):
        payload = bytes(bytearray(payload))
        if dlc is None:
            dlc = len(payload)
        self.format = format
        self.id = id
        self.dlc = dlc
        self.payload = payload
        if len(payload) != dlc:
            raise exceptions.InvalidValueError(
                "CanFrame.payload must hold exactly dlc bytes.")
        self._crc = None
        self._frozen = True

    def __setattr__(self, name, value):
        if getattr(self, "_frozen", False):
            raise exceptions.InvalidValueError("CanFrame is immutable.")
        msg = None
        if name == 'format' and value not in enums.VALID_FRAME_FORMATS:
            msg = "CanFrame.format must be STANDARD or EXTENDED."
        if name == 'id':
            limit = MAX_EXTENDED_ID
            if self.format == enums.FrameFormat.STANDARD:
                limit = MAX_STANDARD_ID
            if not isinstance(value, (int, np.integer)) or \
                    value < 0 or value > limit:
                msg = "CanFrame.id must be an integer in [0, %#x]." % limit
            else:
                value = int(value)
        if name == 'dlc' and (not isinstance(value, (int, np.integer)) or
                              value < 0 or value > 8):
            msg = "CanFrame.dlc must be an integer in [0, 8]."
        if msg:
            raise exceptions.InvalidValueError(msg)
        return super(CanFrame, self).__setattr__(name, value)

    @property
    def is_extended(self):
        return self.format == enums.FrameFormat.EXTENDED

    @property
    def crc(self):
        if self._crc is None:
            super(CanFrame, self).__setattr__(
                '_crc', compute_crc15(frame_bits(self)))
        return self._crc

    def __eq__(self, other):
        if not isinstance(other, CanFrame):
            return NotImplemented
        return (self.id, self.format, self.payload) == \
            (other.id, other.format, other.payload)

    def __ne__(self, other):
        return not self == other

    def __hash__(self):
        return hash((self.id, self.format, self.payload))

    def __repr__(self):
        return "CanFrame(id=%#x, format=%s, payload=%s)" % (
            self.id, self.format, self.payload.hex())


def j1939_id(priority, pgn, sa):
    """
    Build a 29-bit J1939 identifier from priority, parameter group number and
    source address.
    """
    return ((priority & 0x7) << 26) | ((pgn & 0x3FFFF) << 8) | (sa & 0xFF)


class SourceAddressMap(object):
    """
    Resolves the source address a frame claims, and the ECU index that owns
    each source address.

    With ``LOW_BYTE_OF_ID`` the source address is ``id & 0xFF``.  With
    ``EXPLICIT_TABLE`` the first ``(mask, value, sa)`` pattern with
    ``id & mask == value`` wins.
    """

    def __init__(self, owners, derivation=enums.SaDerivation.LOW_BYTE_OF_ID,
        patterns=None):
        self.owners = dict((int(sa), int(k)) for sa, k in owners.items())
        self.derivation = derivation
        self.patterns = [tuple(int(v) for v in p) for p in (patterns or [])]
        if derivation not in (enums.SaDerivation.LOW_BYTE_OF_ID,
                              enums.SaDerivation.EXPLICIT_TABLE):
            raise exceptions.InvalidValueError(
                "Unknown source address derivation %r." % derivation)
        for _, _, sa in self.patterns:
            if sa not in self.owners:
                raise exceptions.InvalidValueError(
                    "Pattern source address %d has no owning ECU." % sa)

    def source_address(self, frame_id):
        if self.derivation == enums.SaDerivation.LOW_BYTE_OF_ID:
            sa = frame_id & 0xFF
            return sa if sa in self.owners else None
        for mask, value, sa in self.patterns:
            if frame_id & mask == value:
                return sa
        return None

    def ecu_of(self, sa):
        return self.owners.get(sa)

    def lookup(self, frame_id):
        sa = self.source_address(frame_id)
        if sa is None:
            return None
        return sa, self.owners[sa]

    @property
    def source_addresses(self):
        return sorted(self.owners)

    @property
    def ecus(self):
        return sorted(set(self.owners.values()))

    def sas_of(self, ecu):
        return sorted(sa for sa, k in self.owners.items() if k == ecu)

    def to_dict(self):
        return {
            'derivation': self.derivation,
            'owners': [[sa, k] for sa, k in sorted(self.owners.items())],
            'patterns': [list(p) for p in self.patterns]}

    @classmethod
    def from_dict(cls, data):
        return cls(dict((sa, k) for sa, k in data['owners']),
                   derivation=data['derivation'],
                   patterns=data.get('patterns'))


class DecodedTransmission(object):
    """
    One frame recovered from the bus voltage: start time ``t`` of its SOF
    edge and the source address ``sa`` it claims.
    """

    def __init__(self, t, sa, frame_id, duration, crc_ok, dlc=0, payload=b"",
        format=enums.FrameFormat.STANDARD, sample_index=0):
        if duration <= 0:
            raise exceptions.InvalidValueError(
                "DecodedTransmission.duration must be positive.")
        self.t = t
        self.sa = sa
        self.frame_id = frame_id
        self.duration = duration
        self.crc_ok = crc_ok
        self.dlc = dlc
        self.payload = payload
        self.format = format
        self.sample_index = sample_index

    def __repr__(self):
        return "DecodedTransmission(t=%.9f, sa=%s, id=%s, crc_ok=%s)" % (
            self.t, self.sa, self.frame_id, self.crc_ok)


def compute_crc15(bits):
    """
    CRC-15/CAN remainder of ``bits`` (SOF through the end of the data
    field), shift register initialised to zero.
    """
    crc = 0
    for bit in bits:
        if ((crc >> 14) & 1) ^ bit:
            crc = ((crc << 1) ^ CRC15_POLY) & 0x7FFF
        else:
            crc = (crc << 1) & 0x7FFF
    return crc


def stuff_bits(bits):
    """
    Insert the complement after every run of five equal bits.  Inserted bits
    count towards the following run.
    """
    out = []
    run_bit = None
    run_len = 0
    for bit in bits:
        out.append(bit)
        if bit == run_bit:
            run_len += 1
        else:
            run_bit, run_len = bit, 1
        if run_len == STUFF_RUN:
            run_bit, run_len = 1 - bit, 1
            out.append(run_bit)
    return BitSequence(out, enums.BitRole.STUFFED)


def unstuff_bits(bits):
    """
    Remove stuff bits.  Raises ``StuffViolation`` where a sixth equal bit
    takes the place of a stuff bit.
    """
    bits = tuple(bits)
    out = []
    run_bit = None
    run_len = 0
    i = 0
    while i < len(bits):
        bit = bits[i]
        out.append(bit)
        if bit == run_bit:
            run_len += 1
        else:
            run_bit, run_len = bit, 1
        i += 1
        if run_len == STUFF_RUN and i < len(bits):
            if bits[i] == bit:
                raise exceptions.StuffViolation(raw_data=i)
            run_bit, run_len = bits[i], 1
            i += 1
    return BitSequence(out, enums.BitRole.UNSTUFFED)


def frame_bits(frame):
    """
    Unstuffed bit image from SOF through the end of the data field, the
    range the CRC covers.
    """
    bits = [0]
    if frame.is_extended:
        bits += _int_bits(frame.id >> 18, 11)
        bits += [1, 1]  # SRR, IDE
        bits += _int_bits(frame.id & 0x3FFFF, 18)
        bits += [0, 0, 0]  # RTR, r1, r0
    else:
        bits += _int_bits(frame.id, 11)
        bits += [0, 0, 0]  # RTR, IDE, r0
    bits += _int_bits(frame.dlc, 4)
    for byte in frame.payload:
        bits += _int_bits(byte, 8)
    return BitSequence(bits)


# CRC delimiter, ACK slot (driven by the receivers), ACK delimiter, EOF.
FRAME_TAIL = (1, 0, 1) + (1,) * 7


def serialize_frame(frame):
    """
    Stuffed bit image of ``frame`` as it appears on the wire, from SOF through
    the end of EOF.
    """
    bits = frame_bits(frame)
    stuffed = stuff_bits(bits.bits + tuple(_int_bits(frame.crc, 15)))
    return stuffed + FRAME_TAIL


def frame_bit_length(frame):
    return len(serialize_frame(frame))


def frame_duration(frame, bitrate):
    return frame_bit_length(frame) / float(bitrate)


class ScheduledFrame(object):
    """
    A frame that won arbitration, with the bit time at which its SOF starts.
    """

    def __init__(self, frame, request_time, start_bit, bits, bitrate):
        self.frame = frame
        self.request_time = request_time
        self.start_bit = start_bit
        self.bits = bits
        self.bitrate = bitrate

    @property
    def start_time(self):
        return self.start_bit / float(self.bitrate)

    @property
    def end_bit(self):
        return self.start_bit + len(self.bits)

    @property
    def duration(self):
        return len(self.bits) / float(self.bitrate)

    def __repr__(self):
        return "ScheduledFrame(%r, start_bit=%d)" % (self.frame, self.start_bit)


def arbitrate(start_requests, bitrate=125000):
    """
    Resolve who gets the bus for a list of ``(CanFrame, request_time)``
    pairs.  Whenever the bus is idle every pending requester contends and the
    lowest identifier wins; the others retry when the bus is idle again.
    Returns the ``ScheduledFrame`` list in transmission order.
    """
    seen = Counter((float(t), frame.id) for frame, t in start_requests)
    for (t, frame_id), count in seen.items():
        if count > 1:
            raise exceptions.DuplicateIdError(
                "identifier %#x requested twice at t=%r" % (frame_id, t),
                frame_id)

    requests = sorted(((float(t), frame.id, seq, frame)
                       for seq, (frame, t) in enumerate(start_requests)),
                      key=lambda r: (r[0], r[1], r[2]))
    pending = []
    order = []
    free_bit = 0
    i = 0
    while i < len(requests) or pending:
        if pending:
            start_bit = free_bit
        else:
            start_bit = max(free_bit,
                            int(math.ceil(requests[i][0] * bitrate - 1e-9)))
        horizon = start_bit / float(bitrate)
        while i < len(requests) and requests[i][0] <= horizon + 1e-12:
            t, frame_id, seq, frame = requests[i]
            heapq.heappush(pending, (frame_id, t, seq, frame))
            i += 1
        frame_id, t, seq, frame = heapq.heappop(pending)
        bits = serialize_frame(frame)
        order.append(ScheduledFrame(frame, t, start_bit, bits, bitrate))
        free_bit = start_bit + len(bits) + INTERMISSION_BITS
    return order


class _BitReader(object):
    """
    Samples bits mid-bit from a dominant/recessive level array, starting at a
    SOF edge, and strips stuff bits while ``stuffing`` is on.
    """

    def __init__(self, dominant, sof_index, samples_per_bit):
        self.dominant = dominant
        self.sof_index = sof_index
        self.samples_per_bit = samples_per_bit
        self.position = 0
        self.stuffing = True
        self.run_bit = None
        self.run_len = 0
        self.unstuffed = []

    def raw(self):
        index = int(self.sof_index + (self.position + 0.5) *
                    self.samples_per_bit)
        self.position += 1
        if index >= len(self.dominant):
            return 1
        return 0 if self.dominant[index] else 1

    def _track(self, bit):
        if bit == self.run_bit:
            self.run_len += 1
        else:
            self.run_bit, self.run_len = bit, 1

    def _skip_stuff(self):
        if self.stuffing and self.run_len == STUFF_RUN:
            stuff = self.raw()
            if stuff == self.run_bit:
                raise exceptions.StuffViolation(raw_data=self.position)
            self.run_bit, self.run_len = stuff, 1

    def bit(self):
        self._skip_stuff()
        bit = self.raw()
        self._track(bit)
        self.unstuffed.append(bit)
        return bit

    def field(self, width):
        return _bits_int([self.bit() for _ in range(width)])

    def end_stuffing(self):
        self._skip_stuff()
        self.stuffing = False


def _parse_frame(reader):
    """
    Parse one frame and return ``(fields, ok)``.  ``fields`` holds whatever
    was read before an error.
    """
    fields = {'id': None, 'dlc': 0, 'payload': b"",
              'format': enums.FrameFormat.STANDARD}
    reader.bit()  # SOF
    base = reader.field(11)
    fields['id'] = base
    reader.bit()  # RTR / SRR
    ide = reader.bit()
    if ide:
        fields['format'] = enums.FrameFormat.EXTENDED
        ext = reader.field(18)
        fields['id'] = (base << 18) | ext
        reader.field(3)  # RTR, r1, r0
    else:
        reader.bit()  # r0
    dlc = reader.field(4)
    nbytes = min(dlc, 8)
    fields['dlc'] = nbytes
    fields['payload'] = bytes(bytearray(reader.field(8)
                                        for _ in range(nbytes)))
    covered = list(reader.unstuffed)
    crc = reader.field(15)
    reader.end_stuffing()
    tail = tuple(reader.raw() for _ in range(len(FRAME_TAIL)))
    ok = crc == compute_crc15(covered) and tail == FRAME_TAIL
    return fields, ok


def _idle_resume(dominant, start, samples_per_bit):
    """
    First sample index at or after ``start`` that ends a run of eleven
    recessive bit times.
    """
    need = int(math.ceil(IDLE_BITS * samples_per_bit))
    dom_idx = np.flatnonzero(dominant[start:]) + start
    previous = start - 1
    for idx in dom_idx:
        if idx - previous - 1 >= need:
            return previous + 1 + need
        previous = idx
    return len(dominant)


def decode_transmissions(trace, bitrate, sa_map,
    threshold=DOMINANT_THRESHOLD):
    """
    Find every frame in a differential voltage trace.

    Each returned ``DecodedTransmission`` is stamped with the time of its SOF
    falling edge.  Frames whose CRC, stuffing or fixed-form bits are wrong
    are returned with ``crc_ok=False``; after such a frame the decoder waits
    for eleven recessive bit times before it looks for the next SOF.
    """
    samples = np.asarray(trace.samples)
    if samples.size == 0:
        raise exceptions.EmptyTraceError()
    samples_per_bit = trace.sample_rate / float(bitrate)
    if samples_per_bit < MIN_SAMPLES_PER_BIT:
        raise exceptions.InvalidValueError(
            "sample rate must be at least %d times the bitrate" %
            MIN_SAMPLES_PER_BIT)

    dominant = samples > threshold
    edges = np.flatnonzero(dominant[1:] & ~dominant[:-1]) + 1
    if dominant[0]:
        edges = np.concatenate(([0], edges))

    found = []
    resume = 0
    failures = 0
    for edge in edges:
        if edge < resume:
            continue
        reader = _BitReader(dominant, edge, samples_per_bit)
        try:
            fields, ok = _parse_frame(reader)
        except exceptions.StuffViolation:
            fields, ok = None, False
        end = int(edge + reader.position * samples_per_bit)
        frame_id = fields['id'] if fields else None
        sa = None
        if frame_id is not None:
            sa = sa_map.source_address(frame_id)
        found.append(DecodedTransmission(
            t=trace.start_time + edge / float(trace.sample_rate),
            sa=sa,
            frame_id=frame_id,
            duration=reader.position / float(bitrate),
            crc_ok=ok,
            dlc=fields['dlc'] if fields else 0,
            payload=fields['payload'] if fields else b"",
            format=fields['format'] if fields else enums.FrameFormat.STANDARD,
            sample_index=int(edge)))
        if ok:
            resume = end
        else:
            failures += 1
            resume = _idle_resume(dominant, end, samples_per_bit)
    if failures:
        logger.warning("%d of %d decoded frames failed CRC or form checks",
                       failures, len(found))
    logger.info("decoded %d transmissions at %d bit/s", len(found), bitrate)
    return found
