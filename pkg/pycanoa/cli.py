# Copyright (c) 2026 The pycanoa developers
# Distributed under the terms of the MIT license, see setup.py.

# pylint: disable=C0103,R0914

"""
Command line front end::

    canoa simulate --config run.cfg --out traces/
    canoa train traces/ --config run.cfg --out model/
    canoa authenticate traces/ model/bundle.cnb --out results/
    canoa sweep --config run.cfg --out sweep/
    canoa all --config run.cfg --out run/

Exit status is 0 on success, 1 on usage errors and 2 on data errors.
"""

import argparse
import csv
import logging
import os
import sys

from pycanoa import __version__
from pycanoa import auth
from pycanoa import bussim
from pycanoa import canproto
from pycanoa import config
from pycanoa import enums
from pycanoa import evalkit
from pycanoa import exceptions
from pycanoa import fileformats

logger = logging.getLogger(__name__)

BUNDLE_FILE = 'bundle.cnb'
TRAIN_REPORT_FILE = 'train_report.json'
BOOTSTRAP_FILE = 'bootstrap.dat'
LEARNING_FILE = 'learning_%d.dat'
VERDICT_FILE = 'verdicts.csv'
SWEEP_FILE = 'sweep.csv'
TRACES_DIR = 'traces'


class ArgumentParser(argparse.ArgumentParser):

    def error(self, message):
        raise exceptions.UsageError(message)


def configure_logging(verbose=False):
    level = logging.DEBUG if verbose else config.log_level()
    root = logging.getLogger('pycanoa')
    if not root.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(
            "%(asctime)s %(name)s %(levelname)s: %(message)s"))
        root.addHandler(handler)
    root.setLevel(level)


def _load_config(args):
    run_config = config.RunConfig.load(args.config)
    if args.seed is not None:
        run_config.set_seed(args.seed)
    if getattr(args, 'delta', None) is not None:
        if not 0 < args.delta < 1:
            raise exceptions.UsageError("--delta must lie in (0, 1)")
        run_config.pipeline.delta = args.delta
    return run_config


def _out_dir(args):
    if not os.path.isdir(args.out):
        os.makedirs(args.out)
    return args.out


def _emit(rows, fmt, stream=None):
    stream = stream or sys.stdout
    if fmt == enums.OutputFormat.CSV:
        csv.writer(stream).writerows(rows)
    else:
        stream.write(evalkit.format_table(rows) + "\n")


def _decode(run):
    decoded = canproto.decode_transmissions(run.voltage, run.bitrate,
                                            run.sa_map)
    return [tx for tx in decoded if tx.crc_ok and tx.sa is not None], decoded


def cmd_simulate(args):
    run_config = _load_config(args)
    scenario = run_config.build_scenario()
    voltage, powers, log = bussim.simulate(scenario)
    fileformats.write_run(_out_dir(args), scenario, voltage, powers, log)
    attacks = sum(1 for e in log if e.is_attack)
    print("simulated %d frames (%d attack) over %.3f s into %s" %
          (len(log), attacks, voltage.duration, args.out))
    return exceptions.EXIT_OK


def _train(traces, run_config, out, jobs):
    run = fileformats.read_run(traces)
    usable, _ = _decode(run)
    if run.log is not None:
        usable = evalkit.drop_attacks(usable, run.log, run.bitrate)
    cfg = run_config.pipeline
    bundle, datasets, trained = evalkit.train_bundle(
        run.powers, usable, run.sa_map, run.bitrate, cfg, jobs)
    bundle.metadata = {'traces': os.path.abspath(traces),
                       'seed': cfg.seed,
                       'pipeline': cfg.to_dict()}
    fileformats.save_bundle(os.path.join(out, BUNDLE_FILE), bundle)

    summaries = evalkit.summarize_bootstrap(datasets, cfg.train_config())
    fileformats.write_boxplot(os.path.join(out, BOOTSTRAP_FILE), summaries)
    separability = evalkit.separability_report(datasets)
    models = []
    for key in sorted(trained):
        model, curve = trained[key]
        fileformats.write_learning_curve(
            os.path.join(out, LEARNING_FILE % key[1]), curve)
        t, p = separability.scores[key]
        entry = dict(model.metadata)
        entry.update({'bootstrap': summaries[key].to_dict(),
                      't_score': t, 'p_value': p})
        models.append(entry)
        print("SA %3d (ECU %d): validation accuracy %.4f, converged at "
              "epoch %d" % (key[1], key[0], model.metadata['val_accuracy'],
                            curve.convergence_index))
    fileformats.write_json(os.path.join(out, TRAIN_REPORT_FILE), {
        'tau_sec': bundle.tau.value,
        'transmissions': len(usable),
        'm': bundle.m,
        'models': models})
    return bundle


def cmd_train(args):
    run_config = _load_config(args)
    try:
        _train(args.traces, run_config, _out_dir(args), args.jobs)
    except exceptions.CanoaError as exc:
        exc.description = "%s: %s" % (args.traces, exc.description)
        raise
    return exceptions.EXIT_OK


def _check_bundle(bundle, run):
    if bundle.sa_map.to_dict() != run.sa_map.to_dict():
        raise exceptions.BundleMismatchError(
            "bundle source addresses %s, traces %s" %
            (bundle.source_addresses, run.sa_map.source_addresses))
    bundle.check_channels(run.powers)
    if bundle.bitrate and bundle.bitrate != run.bitrate:
        raise exceptions.BundleMismatchError(
            "bundle trained at %d bit/s, traces at %d bit/s" %
            (bundle.bitrate, run.bitrate))


def _authenticate(traces, bundle_path, out, fmt, delta=None):
    run = fileformats.read_run(traces)
    bundle = fileformats.load_bundle(bundle_path)
    if delta is not None:
        bundle.delta = delta
    _check_bundle(bundle, run)
    _, decoded = _decode(run)
    verdicts = auth.authenticate_all(decoded, run.powers, bundle)
    fileformats.write_verdicts(os.path.join(out, VERDICT_FILE), verdicts,
                               bundle.source_addresses)
    scored = [v.latency for v in verdicts if v.scored]
    print("%d transmissions decoded, %d scored, mean latency %.3f ms" %
          (len(decoded), len(scored),
           1e3 * sum(scored) / max(len(scored), 1)))
    if run.log is None:
        return verdicts
    _, _, sender, attack = evalkit.score_verdicts(verdicts, run.log,
                                                  run.sa_map, run.bitrate)
    report = {'attack': evalkit.metrics(attack).to_dict()}
    print("attack detection:")
    _emit(attack.to_rows(), fmt)
    fileformats.write_rows(os.path.join(out, 'attack_confusion.csv'),
                           attack.to_rows())
    if sender is not None:
        report['sender'] = evalkit.metrics(sender).to_dict()
        print("sender authentication:")
        _emit(sender.to_rows(), fmt)
        fileformats.write_rows(os.path.join(out, 'sender_confusion.csv'),
                               sender.to_rows())
    fileformats.write_json(os.path.join(out, 'metrics.json'), report)
    return verdicts


def cmd_authenticate(args):
    if args.delta is not None and not 0 < args.delta < 1:
        raise exceptions.UsageError("--delta must lie in (0, 1)")
    _authenticate(args.traces, args.bundle, _out_dir(args), args.format,
                  args.delta)
    return exceptions.EXIT_OK


def cmd_sweep(args):
    run_config = _load_config(args)
    base = run_config.build_scenario()
    seeds = [run_config.seed + i for i in range(args.repeats)]
    grid = evalkit.factor_sweep(base, evalkit.FactorGrid(), seeds,
                                run_config.pipeline, args.jobs)
    rows = grid.to_rows()
    fileformats.write_rows(os.path.join(_out_dir(args), SWEEP_FILE), rows)
    _emit(rows, args.format)
    return exceptions.EXIT_OK


def cmd_all(args):
    run_config = _load_config(args)
    out = _out_dir(args)
    traces = os.path.join(out, TRACES_DIR)
    scenario = run_config.build_scenario()
    voltage, powers, log = bussim.simulate(scenario)
    fileformats.write_run(traces, scenario, voltage, powers, log)
    print("simulated %d frames into %s" % (len(log), traces))
    _train(traces, run_config, out, args.jobs)
    _authenticate(traces, os.path.join(out, BUNDLE_FILE), out, args.format)
    return exceptions.EXIT_OK


def build_parser():
    parser = ArgumentParser(
        prog="canoa",
        description="Authenticate CAN frame senders from ECU power traces.")
    parser.add_argument('--version', action='version',
                        version='%(prog)s ' + __version__)
    common = ArgumentParser(add_help=False)
    common.add_argument("--verbose", "-v", action="store_true")
    common.add_argument('--config', help="run configuration file")
    common.add_argument('--seed', type=int)
    common.add_argument('--out', default='.', help="output directory")
    common.add_argument('--jobs', type=int, default=1)
    common.add_argument('--delta', type=float)
    common.add_argument('--format', choices=(enums.OutputFormat.CSV,
                                             enums.OutputFormat.TEXT),
                        default=enums.OutputFormat.TEXT)
    sub = parser.add_subparsers(dest='command', parser_class=ArgumentParser)
    p = sub.add_parser('simulate', parents=[common])
    p.set_defaults(func=cmd_simulate)
    p = sub.add_parser('train', parents=[common])
    p.add_argument('traces')
    p.set_defaults(func=cmd_train)
    p = sub.add_parser('authenticate', parents=[common])
    p.add_argument('traces')
    p.add_argument('bundle')
    p.set_defaults(func=cmd_authenticate)
    p = sub.add_parser('sweep', parents=[common])
    p.add_argument('--repeats', type=int, default=1,
                   help="seeds per cell, counting up from --seed")
    p.set_defaults(func=cmd_sweep)
    p = sub.add_parser('all', parents=[common])
    p.set_defaults(func=cmd_all)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, 'func', None):
            raise exceptions.UsageError("a command is required")
        if args.jobs < 1:
            raise exceptions.UsageError("--jobs must be at least 1")
        configure_logging(args.verbose)
        return args.func(args)
    except exceptions.CanoaError as exc:
        if exc.exit_code == exceptions.EXIT_USAGE:
            parser.print_usage(sys.stderr)
        sys.stderr.write("canoa: error: %s (E%d)\n" % (exc, exc.code))
        logger.debug("E%d: %s", exc.code, " ".join(exc.cause.split()))
        return exc.exit_code
    except (IOError, OSError) as exc:
        sys.stderr.write("canoa: error: %s\n" % exc)
        return exceptions.EXIT_DATA


if __name__ == '__main__':
    sys.exit(main())
