# Copyright (c) 2026 The pycanoa developers
# Distributed under the terms of the MIT license, see setup.py.

# pylint: disable=C0103,R0902,R0903,R0913,R0914

"""
The ``pycanoa.bussim`` module simulates a CAN bus with several ECUs.  It
schedules each ECU's periodic messages, resolves arbitration, injects the
impersonation attacks and synthesizes the differential bus voltage together
with one power consumption trace per ECU.

A simulation is a deterministic function of its ``Scenario``: every random
draw comes from generators seeded with the scenario seed.
"""

import logging

import numpy as np

from pycanoa import canproto
from pycanoa import enums
from pycanoa import exceptions

logger = logging.getLogger(__name__)

DOMINANT_VOLTS = 2.0
RECESSIVE_VOLTS = 0.0
DEFAULT_SAMPLE_RATE = 10000000
DEFAULT_VOLTAGE_NOISE = 0.05
TAIL_TIME_CONSTANTS = 5


class SampledTrace(object):
    """
    A uniformly sampled real signal: bus voltage in volts or ECU power in
    normalized units.
    """

    def __init__(self, samples, sample_rate, start_time=0.0,
        kind=enums.TraceKind.POWER):
        self.samples = np.asarray(samples)
        self.sample_rate = sample_rate
        self.start_time = float(start_time)
        self.kind = kind

    def __setattr__(self, name, value):
        if name == 'sample_rate' and not value > 0:
            raise exceptions.InvalidValueError(
                "SampledTrace.sample_rate must be positive.")
        return super(SampledTrace, self).__setattr__(name, value)

    def __len__(self):
        return len(self.samples)

    @property
    def duration(self):
        return len(self.samples) / float(self.sample_rate)

    def index_of(self, t):
        return int(round((t - self.start_time) * self.sample_rate))


class PowerProfile(object):
    """
    Knobs of an ECU's power consumption model.

    The transmission signature is a step of ``signature_amplitude`` with an
    exponential rise and fall of ``rise_time`` seconds, jittered by
    ``amplitude_jitter`` per frame, carrying a ripple at ``ripple_frequency``
    and a small extra draw on every dominant bit (``bit_coupling``).
    Receivers see ``reception_amplitude`` over other ECUs' frames.
    ``load_jitter`` is the standard deviation of a level shift drawn anew
    for every frame on the bus, sent or received.
    """

    def __init__(self, baseline_mean=1.0, noise_sigma=0.1,
        signature_amplitude=1.0, rise_time=5e-6, amplitude_jitter=0.02,
        ripple_frequency=100000.0, ripple_amplitude=0.25,
        reception_amplitude=0.15, bit_coupling=0.05,
        program=enums.ProgramActivity.UNIFORM, burst_amplitude=0.4,
        burst_duration=300e-6, burst_frequency=8000.0, noise_floor=0.0,
        load_jitter=0.0):
        self.baseline_mean = baseline_mean
        self.noise_sigma = noise_sigma
        self.signature_amplitude = signature_amplitude
        self.rise_time = rise_time
        self.amplitude_jitter = amplitude_jitter
        self.ripple_frequency = ripple_frequency
        self.ripple_amplitude = ripple_amplitude
        self.reception_amplitude = reception_amplitude
        self.bit_coupling = bit_coupling
        self.program = program
        self.burst_amplitude = burst_amplitude
        self.burst_duration = burst_duration
        self.burst_frequency = burst_frequency
        self.noise_floor = noise_floor
        self.load_jitter = load_jitter

    def __setattr__(self, name, value):
        msg = None
        if name in ('noise_sigma', 'load_jitter') and value < 0:
            msg = "PowerProfile.%s must not be negative." % name
        if name == 'rise_time' and value <= 0:
            msg = "PowerProfile.rise_time must be positive."
        if name == 'program' and value not in enums.VALID_PROGRAM_LEVELS:
            msg = "PowerProfile.program must be UNIFORM or HETEROGENEOUS."
        if msg:
            raise exceptions.InvalidValueError(msg)
        return super(PowerProfile, self).__setattr__(name, value)

    def to_dict(self):
        return dict(self.__dict__)


class MessageSpec(object):
    """
    One periodic message an ECU sends under source address ``sa``.
    ``payload`` is ``random`` (uniform bytes) or ``j1939`` (mostly 0xFF, the
    way unused J1939 signal bytes are filled).

    The firmware task producing the message draws a tone of
    ``task_amplitude`` at ``task_frequency`` while the frame is sent.  When
    ``share_every`` is set, every ``share_every``-th frame goes out while
    the task of the message with source address ``shared_with`` runs.
    """

    def __init__(self, sa, period, priority=6, pgn=0xFF00, dlc=8,
        payload="random", task_frequency=None, task_amplitude=0.0,
        shared_with=None, share_every=0):
        self.sa = sa
        self.period = period
        self.priority = priority
        self.pgn = pgn
        self.dlc = dlc
        self.payload = payload
        self.task_frequency = task_frequency
        self.task_amplitude = task_amplitude
        self.shared_with = shared_with
        self.share_every = int(share_every)
        if period <= 0:
            raise exceptions.InvalidValueError(
                "MessageSpec.period must be positive.")
        if self.share_every < 0:
            raise exceptions.InvalidValueError(
                "MessageSpec.share_every must not be negative.")
        if task_frequency is not None and not task_frequency > 0:
            raise exceptions.InvalidValueError(
                "MessageSpec.task_frequency must be positive.")

    def task(self, ecu_index):
        """
        ``(ecu_index, frequency, amplitude)`` of the task tone or ``None``.
        """
        if self.task_frequency is None or not self.task_amplitude:
            return None
        return (ecu_index, self.task_frequency, self.task_amplitude)

    def frame_id(self, frame_format):
        if frame_format == enums.FrameFormat.EXTENDED:
            return canproto.j1939_id(self.priority, self.pgn, self.sa)
        return ((self.priority & 0x7) << 8) | (self.sa & 0xFF)

    def make_payload(self, rng):
        data = rng.integers(0, 256, size=self.dlc)
        if self.payload == "j1939":
            unused = rng.random(self.dlc) < 0.6
            data[unused] = 0xFF
        return bytes(bytearray(int(b) for b in data))


class EcuSpec(object):
    """
    An ECU: its index on the bus, the source addresses it owns, the messages
    it sends and its power profile.
    """

    def __init__(self, index, source_addresses, messages=None, profile=None,
        name=None):
        self.index = index
        self.source_addresses = [int(sa) for sa in source_addresses]
        self.messages = messages or [MessageSpec(sa, 0.01)
                                     for sa in self.source_addresses]
        self.profile = profile or PowerProfile()
        self.name = name or "ECU%d" % (index + 1)
        for message in self.messages:
            if message.sa not in self.source_addresses:
                raise exceptions.InvalidValueError(
                    "%s sends source address %d it does not own." %
                    (self.name, message.sa))
            if message.share_every and \
                    self.message_for(message.shared_with) is None:
                raise exceptions.InvalidValueError(
                    "%s shares the task of source address %r it does not "
                    "send." % (self.name, message.shared_with))
        if not self.profile.signature_amplitude > \
                3 * self.profile.noise_sigma:
            raise exceptions.InvalidValueError(
                "%s: signature amplitude must exceed 3 x noise sigma." %
                self.name)

    def message_for(self, sa):
        for message in self.messages:
            if message.sa == sa:
                return message
        return None


class AttackSpec(object):
    """
    An impersonation attack to inject.

    ``attacker`` is the index of the misbehaving ECU (``None`` for an added
    module), ``spoofed_sa`` the source address the attack frames claim.
    Attack frames are triggered at ``trigger_times`` or, when not given, at
    ``count`` seeded random times in ``[start, stop)`` (``stop`` defaults to
    90% of the scenario duration).
    """

    def __init__(self, kind, spoofed_sa, attacker=None, count=1,
        trigger_times=None, start=0.0, stop=None):
        if kind not in enums.VALID_ATTACK_KINDS:
            raise exceptions.InvalidValueError(
                "AttackSpec.kind must be one of %s." %
                ", ".join(enums.VALID_ATTACK_KINDS))
        self.kind = kind
        self.spoofed_sa = spoofed_sa
        self.attacker = attacker
        self.count = count
        self.trigger_times = trigger_times
        self.start = start
        self.stop = stop

    def times(self, duration, rng):
        if self.trigger_times is not None:
            return sorted(float(t) for t in self.trigger_times)
        stop = self.stop if self.stop is not None else 0.9 * duration
        return sorted(rng.uniform(self.start, stop, size=self.count))


class BusConfig(object):

    def __init__(self, bitrate=125000, frame_format=enums.FrameFormat.EXTENDED,
        sample_rate=DEFAULT_SAMPLE_RATE, voltage_noise=DEFAULT_VOLTAGE_NOISE):
        self.bitrate = int(bitrate)
        self.frame_format = frame_format
        self.sample_rate = int(sample_rate)
        self.voltage_noise = voltage_noise
        if frame_format not in enums.VALID_FRAME_FORMATS:
            raise exceptions.InvalidValueError(
                "BusConfig.frame_format must be STANDARD or EXTENDED.")
        if self.bitrate <= 0 or self.sample_rate % self.bitrate:
            raise exceptions.InvalidValueError(
                "BusConfig.sample_rate must be a whole multiple of the "
                "bitrate.")

    @property
    def samples_per_bit(self):
        return self.sample_rate // self.bitrate


class Scenario(object):
    """
    Everything needed to run one simulation.
    """

    def __init__(self, bus, ecus, duration, seed=0, attacks=None,
        max_frames=None):
        self.bus = bus
        self.ecus = sorted(ecus, key=lambda e: e.index)
        self.duration = duration
        self.seed = seed
        self.attacks = attacks or []
        self.max_frames = max_frames
        self.validate()

    def validate(self):
        if not self.duration > 0:
            raise exceptions.InvalidValueError(
                "Scenario.duration must be positive.")
        owners = {}
        for ecu in self.ecus:
            for sa in ecu.source_addresses:
                if sa in owners:
                    raise exceptions.InvalidValueError(
                        "source address %d is owned twice" % sa)
                owners[sa] = ecu.index
        indices = [ecu.index for ecu in self.ecus]
        for attack in self.attacks:
            if attack.spoofed_sa not in owners:
                raise exceptions.InvalidValueError(
                    "spoofed source address %d is not owned by any ECU" %
                    attack.spoofed_sa)
            if attack.kind == enums.AttackKind.ADDED_MODULE:
                continue
            if attack.attacker not in indices:
                raise exceptions.InvalidValueError(
                    "attacker %r is not a legitimate ECU" % attack.attacker)
            if owners[attack.spoofed_sa] == attack.attacker:
                raise exceptions.InvalidValueError(
                    "attacker %d already owns source address %d" %
                    (attack.attacker, attack.spoofed_sa))

    def source_address_map(self):
        owners = {}
        for ecu in self.ecus:
            for sa in ecu.source_addresses:
                owners[sa] = ecu.index
        if self.bus.frame_format == enums.FrameFormat.EXTENDED:
            return canproto.SourceAddressMap(owners)
        patterns = [(0xFF, sa, sa) for sa in sorted(owners)]
        return canproto.SourceAddressMap(
            owners, derivation=enums.SaDerivation.EXPLICIT_TABLE,
            patterns=patterns)

    def ecu(self, index):
        for ecu in self.ecus:
            if ecu.index == index:
                return ecu
        raise KeyError(index)

    def owner_of(self, sa):
        for ecu in self.ecus:
            if sa in ecu.source_addresses:
                return ecu
        raise KeyError(sa)


class GroundTruthEntry(object):

    def __init__(self, t, frame_id, claimed_sa, true_source, attack_kind):
        self.t = t
        self.frame_id = frame_id
        self.claimed_sa = claimed_sa
        self.true_source = true_source
        self.attack_kind = attack_kind

    @property
    def is_attack(self):
        return self.attack_kind != enums.AttackKind.NORMAL

    def __eq__(self, other):
        return isinstance(other, GroundTruthEntry) and \
            self.__dict__ == other.__dict__

    def __repr__(self):
        return "GroundTruthEntry(t=%r, id=%#x, sa=%s, source=%s, %s)" % (
            self.t, self.frame_id, self.claimed_sa, self.true_source,
            self.attack_kind)


class GroundTruthLog(object):
    """
    One entry per frame present on the bus, in bus order.  ``timeline``
    keeps the bit-level drive segments of the run that produced the log.
    """

    def __init__(self, entries=None, timeline=None):
        self.entries = list(entries or [])
        self.timeline = timeline

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, index):
        return self.entries[index]

    def count(self, attack_kind):
        return sum(1 for e in self.entries if e.attack_kind == attack_kind)

    def nearest(self, t, tolerance=1e-7):
        """
        Entry whose start time matches ``t``, or ``None``.
        """
        times = getattr(self, '_times', None)
        if times is None or len(times) != len(self.entries):
            times = np.array([e.t for e in self.entries])
            self._times = times
        if not len(times):
            return None
        i = int(np.searchsorted(times, t))
        for j in (i - 1, i):
            if 0 <= j < len(times) and abs(times[j] - t) <= tolerance:
                return self.entries[j]
        return None


class TimelineEntry(object):
    """
    A frame on the bus: its stuffed bits, the bit time its SOF starts at,
    and ``segments`` of ``(ecu_index, first_bit, stop_bit)`` telling which
    ECU drove which bits.  ``task`` is the ``(ecu_index, frequency,
    amplitude)`` tone of the firmware task behind the frame, if any.
    """

    def __init__(self, start_bit, bits, segments, task=None):
        self.start_bit = start_bit
        self.bits = bits
        self.segments = segments
        self.task = task

    @property
    def drivers(self):
        return set(k for k, _, _ in self.segments)


def _hijack_frame(victim, frame_format):
    """
    The frame an attacker puts on the bus when it overwrites the first
    recessive bit of ``victim``'s identifier above the source address byte.
    Returns ``(frame, takeover_bit)`` or ``None`` when there is no such bit.
    """
    width = 29 if frame_format == enums.FrameFormat.EXTENDED else 11
    for bit in range(width - 1, 7, -1):
        if victim.id & (1 << bit):
            forged = canproto.CanFrame(victim.id & ~(1 << bit), frame_format,
                                       victim.payload)
            a = canproto.serialize_frame(victim)
            b = canproto.serialize_frame(forged)
            takeover = next(i for i in range(min(len(a), len(b)))
                            if a[i] != b[i])
            return forged, takeover
    return None


class _Request(object):

    def __init__(self, frame, t, claimed_sa, kind, segments_for):
        self.frame = frame
        self.t = t
        self.claimed_sa = claimed_sa
        self.kind = kind
        self.segments_for = segments_for
        self.true_source = None
        self.task = None


def _schedule_requests(scenario, rng):
    bus = scenario.bus
    requests = []
    by_sa = {}
    for ecu in scenario.ecus:
        for message in ecu.messages:
            phase = rng.uniform(0, message.period)
            t = phase
            frame_id = message.frame_id(bus.frame_format)
            count = 0
            while t < scenario.duration:
                frame = canproto.CanFrame(frame_id, bus.frame_format,
                                          message.make_payload(rng))
                req = _Request(frame, t, message.sa, enums.AttackKind.NORMAL,
                               None)
                req.true_source = ecu.index
                count += 1
                if message.share_every and count % message.share_every == 0:
                    req.task = ecu.message_for(message.shared_with).task(
                        ecu.index)
                else:
                    req.task = message.task(ecu.index)
                requests.append(req)
                by_sa.setdefault(message.sa, []).append(req)
                t += message.period
    return requests, by_sa


def _inject_attacks(scenario, requests, by_sa, rng):
    bus = scenario.bus
    for attack in scenario.attacks:
        victim = scenario.owner_of(attack.spoofed_sa)
        template = victim.message_for(attack.spoofed_sa)
        times = attack.times(scenario.duration, rng)
        if attack.kind == enums.AttackKind.HIJACK_TRANSMISSION:
            targets = sorted(by_sa.get(attack.spoofed_sa, []),
                             key=lambda r: r.t)
            cursor = 0
            for t in times:
                while cursor < len(targets) and (
                        targets[cursor].t < t or
                        targets[cursor].kind != enums.AttackKind.NORMAL):
                    cursor += 1
                if cursor >= len(targets):
                    break
                req = targets[cursor]
                forged = _hijack_frame(req.frame, bus.frame_format)
                if forged is None:
                    logger.warning(
                        "cannot hijack frame %#x at t=%.6f: no recessive "
                        "identifier bit above the source address",
                        req.frame.id, req.t)
                    continue
                req.frame, req.segments_for = forged[0], (
                    victim.index, attack.attacker, forged[1])
                req.kind = enums.AttackKind.HIJACK_TRANSMISSION
                req.true_source = attack.attacker
            continue
        for t in times:
            frame = canproto.CanFrame(template.frame_id(bus.frame_format),
                                      bus.frame_format,
                                      template.make_payload(rng))
            req = _Request(frame, float(t), attack.spoofed_sa, attack.kind,
                           None)
            if attack.kind == enums.AttackKind.ADDED_MODULE:
                req.true_source = enums.ADDED_MODULE_SOURCE
            else:
                req.true_source = attack.attacker
            requests.append(req)


def _segments(req, nbits):
    if req.kind == enums.AttackKind.ADDED_MODULE:
        return []
    if req.kind == enums.AttackKind.HIJACK_TRANSMISSION:
        victim, attacker, takeover = req.segments_for
        return [(victim, 0, takeover), (attacker, takeover, nbits)]
    return [(req.true_source, 0, nbits)]


def synth_voltage(timeline, bus, duration, seed=0):
    """
    Differential bus voltage: 2 V on dominant bits, 0 V on recessive bits and
    idle bus, plus Gaussian noise of ``bus.voltage_noise`` volts.
    """
    n = int(round(duration * bus.sample_rate))
    spb = bus.samples_per_bit
    volts = np.full(n, RECESSIVE_VOLTS, dtype=np.float32)
    for entry in timeline:
        levels = np.where(np.asarray(entry.bits.bits) == 0, DOMINANT_VOLTS,
                          RECESSIVE_VOLTS).astype(np.float32)
        wave = np.repeat(levels, spb)
        start = entry.start_bit * spb
        stop = min(start + len(wave), n)
        if stop > start:
            volts[start:stop] = wave[:stop - start]
    if bus.voltage_noise > 0:
        rng = np.random.default_rng([seed, 0xB05])
        volts += rng.standard_normal(n, dtype=np.float32) * \
            np.float32(bus.voltage_noise)
    return SampledTrace(volts, bus.sample_rate, kind=enums.TraceKind.VOLTAGE)


def _add_burst(power, start, length, profile, rng, sample_rate):
    start = max(start, 0)
    stop = min(start + length, len(power))
    if stop <= start:
        return
    t = np.arange(stop - start) / float(sample_rate)
    phase = rng.uniform(0, 2 * np.pi)
    level = profile.burst_amplitude * rng.uniform(0.5, 1.0)
    power[start:stop] += (level * (1 + np.sin(
        2 * np.pi * profile.burst_frequency * t + phase)) / 2).astype(
            power.dtype)


def synth_power(ecu, timeline, duration, seed, bus):
    """
    Power consumption of ``ecu`` over the run described by ``timeline``.

    Baseline noise plus noise floor everywhere, the transmission signature
    over exactly the bits this ECU drove (with an exponential fall after it
    stops driving), and reception ripple over frames other ECUs drove.  A
    ``HETEROGENEOUS`` program adds activity bursts before and after the ECU's
    own transmissions.  Task tones ride on the ECU's own signature and the
    load jitter shifts the level of every frame interval.
    """
    profile = ecu.profile
    rng = np.random.default_rng([seed, ecu.index + 1])
    n = int(round(duration * bus.sample_rate))
    spb = bus.samples_per_bit
    rate = float(bus.sample_rate)
    power = np.full(n, profile.baseline_mean + profile.noise_floor,
                    dtype=np.float32)
    if profile.noise_sigma > 0:
        power += rng.standard_normal(n, dtype=np.float32) * \
            np.float32(profile.noise_sigma)

    rise = profile.rise_time * rate
    tail = int(np.ceil(TAIL_TIME_CONSTANTS * rise))
    burst_len = int(round(profile.burst_duration * rate))
    for entry in timeline:
        base = entry.start_bit * spb
        dominant = np.repeat(np.asarray(entry.bits.bits) == 0, spb)
        if profile.load_jitter > 0:
            stop = min(base + len(dominant), n)
            if stop > base:
                power[base:stop] += np.float32(
                    profile.load_jitter * rng.standard_normal())
        own = [(a, b) for k, a, b in entry.segments if k == ecu.index]
        if not own:
            stop = min(base + len(dominant), n)
            if stop > base:
                ripple = profile.reception_amplitude * (
                    0.5 + 0.5 * dominant[:stop - base])
                power[base:stop] += ripple.astype(np.float32)
            continue
        amplitude = profile.signature_amplitude * (
            1 + profile.amplitude_jitter * rng.standard_normal())
        phase = rng.uniform(0, 2 * np.pi)
        task = entry.task
        if task is not None and task[0] != ecu.index:
            task = None
        if task is not None:
            task_phase = rng.uniform(0, 2 * np.pi)
        for first_bit, stop_bit in own:
            start = base + first_bit * spb
            length = (stop_bit - first_bit) * spb
            i = np.arange(length + tail)
            envelope = np.where(
                i < length, 1 - np.exp(-i / rise),
                (1 - np.exp(-length / rise)) * np.exp(-(i - length) / rise))
            ripple = profile.ripple_amplitude * np.sin(
                2 * np.pi * profile.ripple_frequency * i / rate + phase)
            drawn = np.zeros(length + tail)
            drawn[:length] = dominant[first_bit * spb:stop_bit * spb]
            signature = (amplitude + ripple) * envelope + \
                profile.bit_coupling * drawn
            if task is not None:
                signature += task[2] * np.sin(
                    2 * np.pi * task[1] * i / rate + task_phase) * envelope
            stop = min(start + len(signature), n)
            if stop > start:
                power[start:stop] += signature[:stop - start].astype(
                    np.float32)
        if profile.program == enums.ProgramActivity.HETEROGENEOUS:
            _add_burst(power, base - burst_len, burst_len, profile, rng, rate)
            _add_burst(power, base + len(dominant), burst_len, profile, rng,
                       rate)
    return SampledTrace(power, bus.sample_rate, kind=enums.TraceKind.POWER)


def simulate(scenario):
    """
    Run ``scenario`` and return ``(voltage, powers, log)``: the bus voltage
    trace, one power trace per ECU in ECU index order and the ground truth
    log of every frame on the bus.
    """
    bus = scenario.bus
    rng = np.random.default_rng([scenario.seed, 0x5C4ED])
    requests, by_sa = _schedule_requests(scenario, rng)
    _inject_attacks(scenario, requests, by_sa, rng)

    lookup = {}
    for req in requests:
        lookup[(float(req.t), req.frame.id)] = req
    order = canproto.arbitrate([(req.frame, req.t) for req in requests],
                               bus.bitrate)

    end_bit = int(scenario.duration * bus.bitrate)
    timeline = []
    entries = []
    for scheduled in order:
        if scheduled.end_bit > end_bit:
            continue
        if scenario.max_frames is not None and \
                len(entries) >= scenario.max_frames:
            break
        req = lookup[(float(scheduled.request_time), scheduled.frame.id)]
        timeline.append(TimelineEntry(scheduled.start_bit, scheduled.bits,
                                      _segments(req, len(scheduled.bits)),
                                      req.task))
        entries.append(GroundTruthEntry(scheduled.start_time,
                                        scheduled.frame.id, req.claimed_sa,
                                        req.true_source, req.kind))

    # traces run one longest frame past the last frame so its window fits
    duration = scenario.duration
    if timeline:
        last = timeline[-1]
        longest = max(len(e.bits) for e in timeline)
        end = (last.start_bit + len(last.bits) + canproto.IDLE_BITS +
               longest) / float(bus.bitrate)
        if scenario.max_frames is not None and \
                len(entries) == scenario.max_frames:
            duration = end
        else:
            duration = max(duration, end)

    voltage = synth_voltage(timeline, bus, duration, scenario.seed)
    powers = [synth_power(ecu, timeline, duration, scenario.seed, bus)
              for ecu in scenario.ecus]
    log = GroundTruthLog(entries, timeline)
    logger.info("simulated %d frames (%d attack) over %.3f s at %d bit/s",
                len(entries), sum(1 for e in entries if e.is_attack),
                duration, bus.bitrate)
    return voltage, powers, log


def lab_scenario(n_frames=5000, bitrate=125000,
    frame_format=enums.FrameFormat.EXTENDED, sample_rate=DEFAULT_SAMPLE_RATE,
    program=enums.ProgramActivity.UNIFORM, period=0.007, seed=1,
    attacks=None, duration=None):
    """
    Five ECUs with one source address each (SA k+1 on ECU index k), shaped
    after a bench prototype of boards sharing one supply.
    """
    ripple = [60000.0, 130000.0, 200000.0, 270000.0, 340000.0]
    noise = [0.1, 0.1, 0.1, 0.08, 0.15]
    ecus = []
    for k in range(5):
        sa = k + 1
        profile = PowerProfile(noise_sigma=noise[k],
                               ripple_frequency=ripple[k], program=program)
        message = MessageSpec(sa, period, priority=k % 8,
                              pgn=0xFF10 + k)
        ecus.append(EcuSpec(k, [sa], [message], profile))
    if duration is None:
        duration = n_frames * period / 5.0 + 3 * period
    return Scenario(BusConfig(bitrate, frame_format, sample_rate), ecus,
                    duration, seed=seed, attacks=attacks,
                    max_frames=n_frames if attacks is None else None)


def truck_scenario(n_frames=3000, bitrate=250000,
    frame_format=enums.FrameFormat.EXTENDED, sample_rate=DEFAULT_SAMPLE_RATE,
    program=enums.ProgramActivity.UNIFORM, period=0.006, seed=2,
    attacks=None):
    """
    An engine controller (ECM) owning source addresses 0 and 15 and an ABS
    controller owning 11, with J1939 style traffic.

    The two ECM addresses come from separate firmware tasks that the
    scheduler sometimes swaps: one frame in 16 of SA 15 and one in 100 of
    SA 0 goes out while the other task runs.  The ABS channel is noisier and
    its level wanders from frame to frame with the valve load, and the ECM
    channel sits on a raised noise floor.
    """
    ecm = EcuSpec(0, [0, 15], [
        MessageSpec(0, period, priority=3, pgn=0xF004, payload="j1939",
                    task_frequency=40000.0, task_amplitude=0.4,
                    shared_with=15, share_every=100),
        MessageSpec(15, period, priority=6, pgn=0xFEF1, payload="j1939",
                    task_frequency=150000.0, task_amplitude=0.4,
                    shared_with=0, share_every=16)],
        PowerProfile(noise_sigma=0.1, ripple_frequency=90000.0,
                     bit_coupling=0.0, noise_floor=0.2, program=program),
        name="ECM")
    abs_ = EcuSpec(1, [11], [
        MessageSpec(11, period, priority=6, pgn=0xFEBF, payload="j1939")],
        PowerProfile(noise_sigma=0.3, ripple_frequency=230000.0,
                     ripple_amplitude=0.0, bit_coupling=0.075,
                     load_jitter=0.22, program=program),
        name="ABS")
    duration = n_frames * period / 3.0 + 3 * period
    return Scenario(BusConfig(bitrate, frame_format, sample_rate),
                    [ecm, abs_], duration, seed=seed, attacks=attacks,
                    max_frames=n_frames if attacks is None else None)
