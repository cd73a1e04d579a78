# Copyright (c) 2026 The pycanoa developers
# Distributed under the terms of the MIT license, see setup.py.

import unittest

import numpy as np

from pycanoa import bussim
from pycanoa import canproto
from pycanoa import enums
from pycanoa import exceptions

SAMPLE_RATE = 1250000


def _window(trace, entry):
    start = trace.index_of(entry.t)
    stop = start + int(0.8e-3 * trace.sample_rate)
    return np.asarray(trace.samples[start:stop], dtype=np.float64)


class ConfigObjectsTest(unittest.TestCase):

    def test_sample_rate_must_be_bitrate_multiple(self):
        bus = bussim.BusConfig(125000, sample_rate=1250000)
        self.assertEqual(bus.samples_per_bit, 10)
        try:
            bussim.BusConfig(125000, sample_rate=1000001)
            self.fail("InvalidValueError not raised")
        except exceptions.InvalidValueError:
            pass

    def test_frame_format(self):
        try:
            bussim.BusConfig(frame_format="FD")
            self.fail("InvalidValueError not raised")
        except exceptions.InvalidValueError:
            pass

    def test_signature_must_clear_noise(self):
        try:
            bussim.EcuSpec(0, [1], profile=bussim.PowerProfile(
                noise_sigma=0.4, signature_amplitude=1.0))
            self.fail("InvalidValueError not raised")
        except exceptions.InvalidValueError:
            pass

    def test_ecu_sends_only_its_own_addresses(self):
        try:
            bussim.EcuSpec(0, [1], [bussim.MessageSpec(2, 0.01)])
            self.fail("InvalidValueError not raised")
        except exceptions.InvalidValueError:
            pass

    def test_power_profile_validation(self):
        profile = bussim.PowerProfile()
        try:
            profile.program = "BUSY"
            self.fail("InvalidValueError not raised")
        except exceptions.InvalidValueError:
            pass
        try:
            profile.rise_time = 0
            self.fail("InvalidValueError not raised")
        except exceptions.InvalidValueError:
            pass
        try:
            profile.load_jitter = -0.1
            self.fail("InvalidValueError not raised")
        except exceptions.InvalidValueError:
            pass

    def test_shared_task_must_be_sent(self):
        message = bussim.MessageSpec(1, 0.01, task_frequency=40000.0,
                                     task_amplitude=0.4, shared_with=7,
                                     share_every=10)
        try:
            bussim.EcuSpec(0, [1], [message])
            self.fail("InvalidValueError not raised")
        except exceptions.InvalidValueError:
            pass

    def test_task_tone(self):
        self.assertEqual(bussim.MessageSpec(1, 0.01).task(0), None)
        message = bussim.MessageSpec(1, 0.01, task_frequency=40000.0,
                                     task_amplitude=0.4)
        self.assertEqual(message.task(3), (3, 40000.0, 0.4))
        try:
            bussim.MessageSpec(1, 0.01, task_frequency=0.0)
            self.fail("InvalidValueError not raised")
        except exceptions.InvalidValueError:
            pass

    def test_attack_kind(self):
        try:
            bussim.AttackSpec("REPLAY", 1)
            self.fail("InvalidValueError not raised")
        except exceptions.InvalidValueError:
            pass

    def test_attack_times(self):
        rng = np.random.default_rng(0)
        spec = bussim.AttackSpec(enums.AttackKind.ADDED_MODULE, 1, count=5,
                                 start=0.1, stop=0.2)
        times = spec.times(1.0, rng)
        self.assertEqual(len(times), 5)
        self.assertEqual(times, sorted(times))
        self.assertTrue(all(0.1 <= t < 0.2 for t in times))
        spec = bussim.AttackSpec(enums.AttackKind.ADDED_MODULE, 1,
                                 trigger_times=[0.3, 0.1])
        self.assertEqual(spec.times(1.0, rng), [0.1, 0.3])

    def test_message_payloads(self):
        rng = np.random.default_rng(0)
        message = bussim.MessageSpec(3, 0.01, dlc=8, payload="j1939")
        payloads = [message.make_payload(rng) for _ in range(50)]
        self.assertTrue(all(len(p) == 8 for p in payloads))
        filled = sum(p.count(b"\xff") for p in payloads)
        self.assertTrue(filled > 200)
        self.assertEqual(message.frame_id(enums.FrameFormat.EXTENDED),
                         canproto.j1939_id(6, 0xFF00, 3))
        self.assertEqual(message.frame_id(enums.FrameFormat.STANDARD),
                         0x603)


class ScenarioTest(unittest.TestCase):

    def test_duration_must_be_positive(self):
        try:
            bussim.lab_scenario(n_frames=10, duration=0)
            self.fail("InvalidValueError not raised")
        except exceptions.InvalidValueError:
            pass

    def test_source_address_owned_once(self):
        try:
            bussim.Scenario(bussim.BusConfig(),
                            [bussim.EcuSpec(0, [1]), bussim.EcuSpec(1, [1])],
                            1.0)
            self.fail("InvalidValueError not raised")
        except exceptions.InvalidValueError:
            pass

    def test_attacker_cannot_spoof_itself(self):
        attack = bussim.AttackSpec(enums.AttackKind.COMPROMISED_ECU, 1,
                                   attacker=0)
        try:
            bussim.lab_scenario(n_frames=10, attacks=[attack])
            self.fail("InvalidValueError not raised")
        except exceptions.InvalidValueError:
            pass

    def test_attacker_must_exist(self):
        attack = bussim.AttackSpec(enums.AttackKind.COMPROMISED_ECU, 1,
                                   attacker=9)
        try:
            bussim.lab_scenario(n_frames=10, attacks=[attack])
            self.fail("InvalidValueError not raised")
        except exceptions.InvalidValueError:
            pass

    def test_lab_layout(self):
        scenario = bussim.lab_scenario(n_frames=10)
        sa_map = scenario.source_address_map()
        self.assertEqual(sa_map.source_addresses, [1, 2, 3, 4, 5])
        self.assertEqual([sa_map.ecu_of(sa) for sa in range(1, 6)],
                         [0, 1, 2, 3, 4])
        self.assertEqual(scenario.owner_of(4).index, 3)

    def test_truck_layout(self):
        scenario = bussim.truck_scenario(n_frames=10)
        sa_map = scenario.source_address_map()
        self.assertEqual(sa_map.sas_of(0), [0, 15])
        self.assertEqual(sa_map.sas_of(1), [11])
        self.assertEqual(scenario.ecu(1).name, "ABS")
        self.assertEqual(scenario.ecu(1).profile.noise_sigma, 0.3)

    def test_truck_program(self):
        scenario = bussim.truck_scenario(
            n_frames=10, program=enums.ProgramActivity.HETEROGENEOUS)
        for ecu in scenario.ecus:
            self.assertEqual(ecu.profile.program,
                             enums.ProgramActivity.HETEROGENEOUS)

    def test_standard_frames_use_explicit_table(self):
        scenario = bussim.lab_scenario(
            n_frames=10, frame_format=enums.FrameFormat.STANDARD)
        sa_map = scenario.source_address_map()
        self.assertEqual(sa_map.derivation,
                         enums.SaDerivation.EXPLICIT_TABLE)
        self.assertEqual(sa_map.source_address(0x104), 4)


class SimulateTest(unittest.TestCase):

    def setUp(self):
        self.scenario = bussim.lab_scenario(n_frames=150,
                                            sample_rate=SAMPLE_RATE)
        self.voltage, self.powers, self.log = bussim.simulate(self.scenario)

    def test_frame_count_and_channels(self):
        self.assertEqual(len(self.log), 150)
        self.assertEqual(len(self.powers), 5)
        for trace in self.powers:
            self.assertEqual(len(trace), len(self.voltage))
            self.assertEqual(trace.kind, enums.TraceKind.POWER)
        self.assertEqual(self.log.count(enums.AttackKind.NORMAL), 150)

    def test_voltage_decodes_to_ground_truth(self):
        decoded = canproto.decode_transmissions(
            self.voltage, 125000, self.scenario.source_address_map())
        self.assertEqual(len(decoded), len(self.log))
        for tx, entry in zip(decoded, self.log):
            self.assertTrue(tx.crc_ok)
            self.assertEqual(tx.sa, entry.claimed_sa)
            self.assertEqual(tx.frame_id, entry.frame_id)
            self.assertTrue(abs(tx.t - entry.t) < 1e-9)

    def test_frames_do_not_overlap(self):
        timeline = self.log.timeline
        for a, b in zip(timeline, timeline[1:]):
            self.assertTrue(b.start_bit >= a.start_bit + len(a.bits) + 3)

    def test_traces_cover_the_last_window(self):
        last = self.log.timeline[-1]
        spb = self.scenario.bus.samples_per_bit
        self.assertTrue(len(self.voltage) >=
                        (last.start_bit + 2 * len(last.bits)) * spb)

    def test_sender_draws_power(self):
        for entry in self.log.entries[:20]:
            for k, trace in enumerate(self.powers):
                lift = _window(trace, entry).mean() - 1.0
                if k == entry.true_source:
                    self.assertTrue(lift > 0.5)
                else:
                    self.assertTrue(lift < 0.3)

    def test_deterministic(self):
        voltage, powers, log = bussim.simulate(self.scenario)
        self.assertTrue(np.array_equal(voltage.samples, self.voltage.samples))
        for a, b in zip(powers, self.powers):
            self.assertTrue(np.array_equal(a.samples, b.samples))
        self.assertEqual(log.entries, self.log.entries)

    def test_seed_changes_run(self):
        scenario = bussim.lab_scenario(n_frames=150, sample_rate=SAMPLE_RATE,
                                       seed=7)
        voltage, _, _ = bussim.simulate(scenario)
        self.assertFalse(len(voltage) == len(self.voltage) and
                         np.array_equal(voltage.samples,
                                        self.voltage.samples))

    def test_nearest(self):
        entry = self.log[10]
        self.assertTrue(self.log.nearest(entry.t + 2e-7, 1e-6) is entry)
        self.assertEqual(self.log.nearest(entry.t + 1e-4, 1e-6), None)


class AttackSimulationTest(unittest.TestCase):

    def _run(self, attack):
        scenario = bussim.lab_scenario(n_frames=100, sample_rate=SAMPLE_RATE,
                                       attacks=[attack])
        return bussim.simulate(scenario)

    def _attack_entries(self, log):
        return [(e, tl) for e, tl in zip(log.entries, log.timeline)
                if e.is_attack]

    def test_compromised_ecu(self):
        attack = bussim.AttackSpec(enums.AttackKind.COMPROMISED_ECU, 1,
                                   attacker=2, trigger_times=[0.05, 0.1])
        _, powers, log = self._run(attack)
        attacks = self._attack_entries(log)
        self.assertEqual(len(attacks), 2)
        for entry, timeline in attacks:
            self.assertEqual(entry.claimed_sa, 1)
            self.assertEqual(entry.true_source, 2)
            self.assertEqual(entry.attack_kind,
                             enums.AttackKind.COMPROMISED_ECU)
            self.assertEqual(timeline.drivers, set([2]))
            self.assertTrue(_window(powers[2], entry).mean() > 1.5)
            self.assertTrue(_window(powers[0], entry).mean() < 1.3)

    def test_added_module(self):
        attack = bussim.AttackSpec(enums.AttackKind.ADDED_MODULE, 3,
                                   count=3)
        _, powers, log = self._run(attack)
        attacks = self._attack_entries(log)
        self.assertEqual(len(attacks), 3)
        for entry, timeline in attacks:
            self.assertEqual(entry.true_source, enums.ADDED_MODULE_SOURCE)
            self.assertEqual(timeline.drivers, set())
            for trace in powers:
                self.assertTrue(_window(trace, entry).mean() < 1.3)

    def test_hijack(self):
        attack = bussim.AttackSpec(enums.AttackKind.HIJACK_TRANSMISSION, 1,
                                   attacker=3, trigger_times=[0.05])
        _, _, log = self._run(attack)
        attacks = self._attack_entries(log)
        self.assertEqual(len(attacks), 1)
        entry, timeline = attacks[0]
        self.assertEqual(entry.claimed_sa, 1)
        self.assertEqual(entry.true_source, 3)
        self.assertEqual(timeline.drivers, set([0, 3]))
        (victim, a0, a1), (attacker, b0, b1) = timeline.segments
        self.assertEqual((victim, attacker), (0, 3))
        self.assertEqual((a0, a1, b1), (0, b0, len(timeline.bits)))
        self.assertEqual(entry.frame_id & 0xFF, 1)

    def test_hijack_frame_clears_one_bit(self):
        victim = canproto.CanFrame(canproto.j1939_id(6, 0xFF10, 1),
                                   enums.FrameFormat.EXTENDED, b"\x00" * 8)
        forged, takeover = bussim._hijack_frame(victim,
                                                enums.FrameFormat.EXTENDED)
        self.assertTrue(forged.id < victim.id)
        self.assertEqual(bin(victim.id ^ forged.id).count("1"), 1)
        self.assertEqual(forged.id & 0xFF, 1)
        a = canproto.serialize_frame(victim)
        b = canproto.serialize_frame(forged)
        self.assertEqual(a[:takeover], b[:takeover])
        self.assertEqual((a[takeover], b[takeover]), (1, 0))

    def test_hijack_needs_a_recessive_identifier_bit(self):
        ecus = [bussim.EcuSpec(0, [1], [bussim.MessageSpec(1, 0.01,
                                                           priority=0,
                                                           pgn=0)]),
                bussim.EcuSpec(1, [2])]
        attack = bussim.AttackSpec(enums.AttackKind.HIJACK_TRANSMISSION, 1,
                                   attacker=1, trigger_times=[0.02])
        scenario = bussim.Scenario(bussim.BusConfig(sample_rate=SAMPLE_RATE),
                                   ecus, 0.05, attacks=[attack])
        with self.assertLogs('pycanoa.bussim', 'WARNING') as logs:
            _, _, log = bussim.simulate(scenario)
        self.assertEqual(log.count(enums.AttackKind.HIJACK_TRANSMISSION), 0)
        self.assertTrue(any("cannot hijack" in line for line in logs.output))


class HeterogeneousProgramTest(unittest.TestCase):

    def test_bursts_raise_power_around_frames(self):
        uniform = bussim.lab_scenario(n_frames=60, sample_rate=SAMPLE_RATE)
        busy = bussim.lab_scenario(
            n_frames=60, sample_rate=SAMPLE_RATE,
            program=enums.ProgramActivity.HETEROGENEOUS)
        _, p_uniform, _ = bussim.simulate(uniform)
        _, p_busy, _ = bussim.simulate(busy)
        self.assertTrue(np.mean(p_busy[0].samples) >
                        np.mean(p_uniform[0].samples))


class TaskAndLoadTest(unittest.TestCase):

    def setUp(self):
        self.bus = bussim.BusConfig(125000, sample_rate=SAMPLE_RATE)
        frame = canproto.CanFrame(canproto.j1939_id(6, 0xFF00, 1),
                                  enums.FrameFormat.EXTENDED, b"\x33" * 8)
        self.bits = canproto.serialize_frame(frame)

    def test_task_tone_rides_on_the_signature(self):
        profile = bussim.PowerProfile(noise_sigma=0.0, amplitude_jitter=0.0,
                                      ripple_amplitude=0.0, bit_coupling=0.0)
        ecu = bussim.EcuSpec(0, [1], profile=profile)
        plain = bussim.TimelineEntry(100, self.bits,
                                     [(0, 0, len(self.bits))])
        busy = bussim.TimelineEntry(100, self.bits, [(0, 0, len(self.bits))],
                                    task=(0, 40000.0, 0.4))
        a = bussim.synth_power(ecu, [plain], 0.005, 0, self.bus).samples
        b = bussim.synth_power(ecu, [busy], 0.005, 0, self.bus).samples
        spb = self.bus.samples_per_bit
        start = (100 + 10) * spb
        stop = (100 + len(self.bits)) * spb
        tone = np.asarray(b[start:stop] - a[start:stop], dtype=np.float64)
        self.assertTrue(abs(np.abs(tone).max() - 0.4) < 0.02)
        peak = np.argmax(np.abs(np.fft.rfft(tone))) * \
            self.bus.sample_rate / float(len(tone))
        self.assertTrue(abs(peak - 40000.0) < 2 * self.bus.sample_rate /
                        float(len(tone)))

    def test_task_of_another_ecu_is_ignored(self):
        ecu = bussim.EcuSpec(0, [1])
        plain = bussim.TimelineEntry(100, self.bits,
                                     [(0, 0, len(self.bits))])
        foreign = bussim.TimelineEntry(100, self.bits,
                                       [(0, 0, len(self.bits))],
                                       task=(1, 40000.0, 0.4))
        a = bussim.synth_power(ecu, [plain], 0.005, 0, self.bus)
        b = bussim.synth_power(ecu, [foreign], 0.005, 0, self.bus)
        self.assertTrue(np.array_equal(a.samples, b.samples))

    def _frame_levels(self, load_jitter):
        ecu = bussim.EcuSpec(0, [1], profile=bussim.PowerProfile(
            noise_sigma=0.01, load_jitter=load_jitter))
        timeline = [bussim.TimelineEntry(200 * k, self.bits,
                                         [(1, 0, len(self.bits))])
                    for k in range(40)]
        trace = bussim.synth_power(ecu, timeline, 0.07, 3, self.bus)
        spb = self.bus.samples_per_bit
        return np.array([
            trace.samples[e.start_bit * spb:
                          (e.start_bit + len(e.bits)) * spb].mean()
            for e in timeline])

    def test_load_jitter_moves_every_frame(self):
        self.assertTrue(np.std(self._frame_levels(0.0)) < 0.02)
        self.assertTrue(np.std(self._frame_levels(0.3)) > 0.15)

    def test_truck_siblings_swap_tasks(self):
        scenario = bussim.truck_scenario(n_frames=150,
                                         sample_rate=SAMPLE_RATE * 2)
        _, _, log = bussim.simulate(scenario)
        tasks = {}
        for entry, frame in zip(log.entries, log.timeline):
            tasks.setdefault(entry.claimed_sa, []).append(frame.task)
        self.assertTrue(len(tasks[15]) > 32)
        for i, task in enumerate(tasks[15]):
            expected = 40000.0 if (i + 1) % 16 == 0 else 150000.0
            self.assertEqual(task, (0, expected, 0.4))
        self.assertTrue(all(task == (0, 40000.0, 0.4)
                            for task in tasks[0][:99]))
        self.assertTrue(all(task is None for task in tasks[11]))


class SynthesisTest(unittest.TestCase):

    def setUp(self):
        self.bus = bussim.BusConfig(125000, sample_rate=SAMPLE_RATE)

    def test_idle_bus_voltage(self):
        trace = bussim.synth_voltage([], self.bus, 0.01)
        self.assertEqual(len(trace), 12500)
        self.assertTrue(abs(trace.samples.mean()) < 0.01)
        self.assertTrue(np.all(trace.samples < 1.0))

    def test_signature_amplitude(self):
        frame = canproto.CanFrame(canproto.j1939_id(6, 0xFF00, 1),
                                  enums.FrameFormat.EXTENDED, b"\x5a" * 8)
        bits = canproto.serialize_frame(frame)
        entry = bussim.TimelineEntry(1000, bits, [(0, 0, len(bits))])
        ecu = bussim.EcuSpec(0, [1])
        trace = bussim.synth_power(ecu, [entry], 0.03, 0, self.bus)
        spb = self.bus.samples_per_bit
        start = (entry.start_bit + 10) * spb
        stop = (entry.start_bit + len(bits)) * spb
        busy = trace.samples[start:stop].mean()
        idle = trace.samples[:entry.start_bit * spb].mean()
        self.assertTrue(abs((busy - idle) - 1.0) < 0.1)

    def test_channels_are_independent(self):
        powers = [bussim.synth_power(bussim.EcuSpec(k, [k + 1]), [], 0.1, 4,
                                     self.bus) for k in range(2)]
        rho = np.corrcoef(powers[0].samples, powers[1].samples)[0, 1]
        self.assertEqual(len(powers[0]), 125000)
        self.assertTrue(abs(rho) < 0.05)

    def test_noiseless_voltage_thresholds_to_bits(self):
        bus = bussim.BusConfig(125000, sample_rate=10000000, voltage_noise=0)
        frame = canproto.CanFrame(canproto.j1939_id(6, 0xFF00, 3),
                                  enums.FrameFormat.EXTENDED, b"\x00\xff\x0f")
        bits = canproto.serialize_frame(frame)
        entry = bussim.TimelineEntry(20, bits, [(0, 0, len(bits))])
        trace = bussim.synth_voltage([entry], bus, 0.002)
        self.assertEqual(bus.samples_per_bit, 80)
        mid = (np.arange(len(bits)) + entry.start_bit) * 80 + 40
        recovered = tuple(np.where(trace.samples[mid] > 1.0, 0, 1))
        self.assertEqual(recovered, bits.bits)
