# Copyright (c) 2026 The pycanoa developers
# Distributed under the terms of the MIT license, see setup.py.

# pylint: disable=C0111

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class CanoaError(Exception):
    description = "a general error"
    cause = "An unspecified and unexpected error"
    code = 100
    exit_code = EXIT_DATA

    def __init__(self, description=None, raw_data=None):
        self.description = description or self.description
        self.raw_data = raw_data
        super(CanoaError, self).__init__(self.description, self.raw_data)

    def __str__(self):
        return self.description


class UsageError(CanoaError):
    description = "invalid command line usage"
    cause = "Missing or conflicting command line arguments."
    code = 101
    exit_code = EXIT_USAGE


class ConfigError(CanoaError):
    description = "invalid configuration"
    cause = """A configuration file has a syntax error, an unknown section or
            key, or a value outside its documented range."""
    code = 102

    @property
    def line(self):
        return self.raw_data

    def __str__(self):
        if self.raw_data is not None:
            return "line %s: %s" % (self.raw_data, self.description)
        return self.description


class InvalidValueError(CanoaError):
    description = "a value violates the invariants of its type"
    cause = "A domain object was given a value outside its valid range."
    code = 103


class StuffViolation(CanoaError):
    description = "six consecutive equal bits in the stuffed region"
    cause = "A stuffed bit sequence is corrupt or was never stuffed."
    code = 200


class DuplicateIdError(CanoaError):
    description = "two simultaneous requesters share one identifier"
    cause = """Arbitration cannot separate two nodes that start the same
            identifier at the same instant."""
    code = 201


class EmptyTraceError(CanoaError):
    description = "the trace has no samples"
    cause = "Decoding was asked to work on an empty voltage trace."
    code = 202


class DegenerateTraceError(CanoaError):
    description = "the calibration sample has zero standard deviation"
    cause = "A power trace is constant over its calibration prefix."
    code = 300


class EmptyInputError(CanoaError):
    description = "no input to work on"
    cause = "An estimate was requested over an empty collection."
    code = 301


class RankDeficientError(CanoaError):
    description = "fewer nonzero variance directions than components requested"
    cause = "The spectra do not span M directions."
    code = 302


class OutOfBoundsError(CanoaError):
    description = "the transmission window lies outside the trace"
    cause = "A transmission start time is before or after the power trace."
    code = 303


class SingleClassError(CanoaError):
    description = "training data holds a single class"
    cause = """A source address has no transmissions, or is the only source
            address seen by its ECU."""
    code = 400


class DimensionMismatchError(CanoaError):
    description = "feature vector length does not match the model"
    cause = "A feature vector of the wrong length was fed to a model."
    code = 401


class LengthMismatchError(CanoaError):
    description = "truth and prediction sequences differ in length"
    cause = "Label sequences handed to the evaluator are misaligned."
    code = 500


class ZeroVarianceError(CanoaError):
    description = "both populations are constant and equal"
    cause = "A t statistic is undefined for two identical constants."
    code = 501


class TraceFormatError(CanoaError):
    description = "not a valid trace file"
    cause = "Bad magic, unsupported version or truncated sample body."
    code = 600


class BundleFormatError(CanoaError):
    description = "not a valid model bundle"
    cause = "Bad magic, unsupported version, truncated section or checksum."
    code = 601


class MissingChannelError(CanoaError):
    description = "a power channel is missing"
    cause = "The traces directory lacks the power trace of an ECU."
    code = 602


class BundleMismatchError(CanoaError):
    description = "the model bundle does not match the traces"
    cause = "The bundle was trained for a different set of ECUs."
    code = 603


class NotConvergedWarning(UserWarning):
    """
    Training hit ``max_iters`` before the validation loss settled.  The model
    is still returned.
    """
