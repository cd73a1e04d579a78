# Copyright (c) 2026 The pycanoa developers
# Distributed under the terms of the MIT license, see setup.py.

import unittest

import mock
import numpy as np

from scipy import stats

from pycanoa import bussim
from pycanoa import canproto
from pycanoa import config
from pycanoa import enums
from pycanoa import evalkit
from pycanoa import exceptions


class ConfusionTest(unittest.TestCase):

    def test_identity(self):
        labels = ['a', 'b', 'c', 'a', 'b']
        cm = evalkit.confusion(labels, labels)
        self.assertEqual(cm.labels, ['a', 'b', 'c'])
        self.assertTrue(np.array_equal(cm.counts, np.diag([2, 2, 1])))
        self.assertEqual(cm.diagonal(), {'a': 1.0, 'b': 1.0, 'c': 1.0})
        self.assertEqual(evalkit.metrics(cm).accuracy, 1.0)

    def test_counts_and_rates(self):
        cm = evalkit.confusion(['x', 'x', 'x', 'y'], ['x', 'y', 'x', 'y'])
        self.assertTrue(np.array_equal(cm.counts, [[2, 1], [0, 1]]))
        self.assertAlmostEqual(cm.rate('x', 'y'), 1 / 3.0)
        self.assertEqual(cm.rate('y', 'y'), 1.0)
        self.assertEqual(cm.total, 4)

    def test_fixed_labels(self):
        cm = evalkit.confusion(['Normal'], ['Normal'], ['Normal', 'Attack'])
        self.assertEqual(cm.labels, ['Normal', 'Attack'])
        # rows with no truth keep a zero rate
        self.assertEqual(cm.rate('Attack', 'Attack'), 0.0)

    def test_source_labels_sort_before_strings(self):
        cm = evalkit.confusion([(1, 11), (0, 0)],
                               [evalkit.UNATTRIBUTED, (0, 0)])
        self.assertEqual(cm.labels, [(0, 0), (1, 11), evalkit.UNATTRIBUTED])

    def test_length_mismatch(self):
        try:
            evalkit.confusion([1, 2], [1])
            self.fail("LengthMismatchError not raised")
        except exceptions.LengthMismatchError:
            pass

    def test_add(self):
        a = evalkit.ConfusionMatrix(['A', 'B'], [[1, 0], [0, 1]])
        b = evalkit.ConfusionMatrix(['B', 'C'], [[2, 1], [0, 3]])
        total = a + b
        self.assertEqual(total.labels, ['A', 'B', 'C'])
        self.assertTrue(np.array_equal(total.counts,
                                       [[1, 0, 0], [0, 3, 1], [0, 0, 3]]))

    def test_to_rows(self):
        cm = evalkit.confusion([(0, 1), (1, 2)], [(0, 1), (0, 1)])
        rows = cm.to_rows()
        self.assertEqual(rows[0], ["truth \\ predicted", "ECU1/SA1",
                                   "ECU2/SA2"])
        self.assertEqual(rows[2], ["ECU2/SA2", "1.0000", "0.0000"])

    def test_square_counts(self):
        try:
            evalkit.ConfusionMatrix(['A', 'B'], [[1, 2, 3]])
            self.fail("InvalidValueError not raised")
        except exceptions.InvalidValueError:
            pass


class MetricsTest(unittest.TestCase):

    def test_precision_recall(self):
        cm = evalkit.ConfusionMatrix(['A', 'B'], [[9, 0], [1, 0]])
        report = evalkit.metrics(cm)
        a = report.per_label['A']
        self.assertAlmostEqual(a['precision'], 0.9)
        self.assertAlmostEqual(a['recall'], 1.0)
        self.assertAlmostEqual(a['f_measure'], 18 / 19.0)
        self.assertAlmostEqual(a['accuracy'], 0.9)
        self.assertAlmostEqual(report.accuracy, 0.9)

    def test_zero_denominator_is_flagged(self):
        cm = evalkit.ConfusionMatrix(['A', 'B'], [[9, 0], [1, 0]])
        report = evalkit.metrics(cm)
        self.assertEqual(report.per_label['B']['precision'], 0.0)
        self.assertTrue(('B', 'precision') in report.flags)
        self.assertTrue(('B', 'f_measure') in report.flags)
        self.assertFalse(('A', 'precision') in report.flags)

    def test_macro(self):
        cm = evalkit.ConfusionMatrix(['A', 'B'], [[3, 1], [1, 3]])
        report = evalkit.metrics(cm)
        self.assertAlmostEqual(report.macro['precision'], 0.75)
        self.assertAlmostEqual(report.macro['recall'], 0.75)
        self.assertAlmostEqual(report.macro['accuracy'], 0.75)
        self.assertEqual(report.to_dict()['per_label']['A']['recall'], 0.75)


class SeparabilityTest(unittest.TestCase):

    def test_identical_populations(self):
        x = np.random.default_rng(0).standard_normal(100)
        t, p = evalkit.separability(x, x.copy())
        self.assertAlmostEqual(t, 0.0)
        self.assertAlmostEqual(p, 1.0)

    def test_distinct_populations(self):
        rng = np.random.default_rng(1)
        t, p = evalkit.separability(rng.normal(10, 1, 100),
                                    rng.normal(0, 1, 100))
        self.assertTrue(t > 0)
        self.assertTrue(p < 1e-10)

    def test_matches_welch(self):
        rng = np.random.default_rng(2)
        a = rng.normal(0.3, 1.0, 40)
        b = rng.normal(0.0, 2.0, 70)
        t, p = evalkit.separability(a, b)
        expected = stats.ttest_ind(a, b, equal_var=False)
        self.assertAlmostEqual(t, expected.statistic)
        self.assertAlmostEqual(p, expected.pvalue)

    def test_coordinate(self):
        pos = np.column_stack([np.ones(5), np.arange(5.0)])
        neg = np.column_stack([np.ones(5), np.arange(5.0) + 100])
        t, _ = evalkit.separability(pos, neg, coordinate=1)
        self.assertTrue(t < 0)

    def test_constant_equal(self):
        try:
            evalkit.separability(np.ones(5), np.ones(5))
            self.fail("ZeroVarianceError not raised")
        except exceptions.ZeroVarianceError:
            pass

    def test_constant_different(self):
        self.assertEqual(evalkit.separability(np.ones(5), np.zeros(5)),
                         (float('inf'), 0.0))
        self.assertEqual(evalkit.separability(np.zeros(5), np.ones(5))[0],
                         float('-inf'))

    def test_too_few_rows(self):
        try:
            evalkit.separability([1.0], [1.0, 2.0])
            self.fail("InvalidValueError not raised")
        except exceptions.InvalidValueError:
            pass


class FactorGridTest(unittest.TestCase):

    def test_keys(self):
        grid = evalkit.FactorGrid()
        keys = grid.keys()
        self.assertEqual(len(keys), 12)
        self.assertEqual(len(set(keys)), 12)
        self.assertEqual(grid.simplest, (125000, enums.FrameFormat.STANDARD,
                                         enums.ProgramActivity.UNIFORM))
        self.assertEqual(grid.hardest,
                         (500000, enums.FrameFormat.EXTENDED,
                          enums.ProgramActivity.HETEROGENEOUS))
        self.assertFalse(grid.is_complete())

    def test_rows_mark_missing_cells(self):
        rows = evalkit.FactorGrid(bitrates=[125000]).to_rows()
        self.assertEqual(len(rows), 5)
        self.assertEqual(rows[1][-1], "not run")

    def test_cell_scenario(self):
        base = bussim.lab_scenario(n_frames=50)
        key = (250000, enums.FrameFormat.STANDARD,
               enums.ProgramActivity.HETEROGENEOUS)
        cell = evalkit.cell_scenario(base, key, 7)
        self.assertEqual(cell.bus.bitrate, 250000)
        self.assertEqual(cell.bus.frame_format, enums.FrameFormat.STANDARD)
        self.assertEqual(cell.seed, 7)
        for ecu in cell.ecus:
            self.assertEqual(ecu.profile.program,
                             enums.ProgramActivity.HETEROGENEOUS)
        # the base is left alone
        self.assertEqual(base.bus.bitrate, 125000)
        self.assertEqual(base.ecus[0].profile.program,
                         enums.ProgramActivity.UNIFORM)


class FactorSweepTest(unittest.TestCase):

    def _fake_pipeline(self, scenario, cfg):
        if scenario.bus.bitrate == 500000:
            raise exceptions.EmptyInputError("too few frames decoded")
        result = mock.Mock()
        result.sender = evalkit.confusion([(0, 1), (1, 2)], [(0, 1), (1, 2)])
        return result

    def test_every_cell_is_reported(self):
        base = bussim.lab_scenario(n_frames=50)
        with mock.patch('pycanoa.evalkit.run_pipeline',
                        side_effect=self._fake_pipeline) as run:
            grid = evalkit.factor_sweep(base, seeds=(0, 1),
                                        cfg=config.PipelineConfig(m=4))
        self.assertEqual(run.call_count, 8 * 2 + 4)
        self.assertEqual(len(grid.cells), 12)
        for key, cell in grid.cells.items():
            if key[0] == 500000:
                self.assertFalse(cell.ok)
                self.assertTrue("too few frames" in cell.error)
            else:
                self.assertTrue(cell.ok)
                self.assertEqual(cell.report.accuracy, 1.0)
                self.assertEqual(cell.seeds, [0, 1])
        self.assertFalse(grid.is_complete())
        rows = grid.to_rows()
        self.assertEqual(len(rows), 13)
        self.assertEqual(rows[0][:3], ["bitrate", "format", "program"])

    def test_seeds_pool_confusions(self):
        base = bussim.lab_scenario(n_frames=50)
        grid = evalkit.FactorGrid(bitrates=[125000])
        with mock.patch('pycanoa.evalkit.run_pipeline',
                        side_effect=self._fake_pipeline):
            evalkit.factor_sweep(base, grid, seeds=(3, 4, 5))
        self.assertTrue(grid.is_complete())
        cell = grid.cells[grid.simplest]
        self.assertEqual(cell.report.per_label[(0, 1)]['recall'], 1.0)


class FormatTableTest(unittest.TestCase):

    def test_columns_line_up(self):
        text = evalkit.format_table([["a", "bb"], ["ccc", "d"]])
        self.assertEqual(text, "a    bb\nccc  d")


class TruckPipelineTest(unittest.TestCase):
    """
    Two source addresses on the engine controller look alike on its power
    channel whenever their tasks swap; that confusion must not leak onto the
    ABS controller.
    """

    @classmethod
    def setUpClass(cls):
        scenario = bussim.truck_scenario(n_frames=1500, sample_rate=2500000)
        cls.result = evalkit.run_pipeline(
            scenario, config.PipelineConfig(m=10, train_fraction=0.6))

    def test_no_cross_ecu_confusion(self):
        sender = self.result.sender
        for sa in (0, 15):
            if (0, sa) in sender.labels:
                self.assertTrue(sender.rate((0, sa), (1, 11)) < 0.01)

    def test_engine_frames_are_authentic(self):
        pairs = [(v, e) for v, e in self.result.pairs(enums.AttackKind.NORMAL)
                 if e.claimed_sa in (0, 15)]
        self.assertTrue(len(pairs) > 20)
        authentic = sum(1 for v, _ in pairs
                        if v.decision == enums.Decision.AUTHENTIC and
                        v.attributed_ecu == 0)
        self.assertTrue(authentic >= 0.95 * len(pairs))

    def test_abs_frames_are_attributed(self):
        pairs = [(v, e) for v, e in self.result.pairs(enums.AttackKind.NORMAL)
                 if e.claimed_sa == 11]
        self.assertTrue(len(pairs) > 10)
        hits = sum(1 for v, _ in pairs if v.attributed_sa == 11)
        self.assertTrue(hits >= 0.95 * len(pairs))

    def test_metrics_report(self):
        report = self.result.sender_metrics.to_dict()
        self.assertTrue('ECU2/SA11' in report['per_label'])
        self.assertTrue(report['accuracy'] > 1 / 3.0)

    def test_engine_siblings_are_confused_now_and_then(self):
        sender = self.result.sender
        rate = sender.rate((0, 15), (0, 0))
        self.assertTrue(0 < rate <= 0.1)
        self.assertTrue(sender.rate((0, 0), (0, 0)) >= 0.9)


class TruckBootstrapTest(unittest.TestCase):

    def test_abs_accuracy_spreads_widest(self):
        scenario = bussim.truck_scenario(n_frames=900, sample_rate=2500000)
        voltage, powers, _ = bussim.simulate(scenario)
        sa_map = scenario.source_address_map()
        bitrate = scenario.bus.bitrate
        decoded = [tx for tx in canproto.decode_transmissions(voltage, bitrate,
                                                              sa_map)
                   if tx.crc_ok and tx.sa is not None]
        cfg = config.PipelineConfig(m=10)
        _, datasets, _ = evalkit.train_bundle(powers, decoded, sa_map, bitrate,
                                              cfg)
        train = cfg.train_config()
        train.bootstrap_rounds = 20
        summaries = evalkit.summarize_bootstrap(datasets, train)
        self.assertEqual(sorted(summaries), [(0, 0), (0, 15), (1, 11)])
        spread = summaries[(1, 11)]
        self.assertTrue(spread.median < 1.0)
        for key in ((0, 0), (0, 15)):
            self.assertTrue(spread.iqr > summaries[key].iqr)


class LabPipelineTest(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        scenario = bussim.lab_scenario(n_frames=1000, sample_rate=1250000)
        cls.result = evalkit.run_pipeline(scenario,
                                          config.PipelineConfig(m=10))

    def test_validation_accuracy(self):
        for entry in self.result.bundle.entries:
            self.assertTrue(entry.model.metadata['val_accuracy'] >= 0.99)

    def test_sender_diagonal(self):
        diagonal = self.result.sender.diagonal()
        self.assertEqual(sorted(diagonal), [(k, k + 1) for k in range(5)])
        for rate in diagonal.values():
            self.assertTrue(rate >= 0.99)


class LabSweepTest(unittest.TestCase):

    def test_hardest_cell_stays_accurate(self):
        base = bussim.lab_scenario(n_frames=500, sample_rate=5000000)
        grid = evalkit.factor_sweep(
            base, evalkit.FactorGrid(bitrates=[125000, 500000]),
            cfg=config.PipelineConfig(m=10))
        self.assertTrue(grid.is_complete())
        simplest = grid.cells[grid.simplest].report.accuracy
        hardest = grid.cells[grid.hardest].report.accuracy
        self.assertTrue(simplest >= hardest)
        self.assertTrue(hardest >= 0.95)
