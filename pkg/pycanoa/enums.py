# Copyright (c) 2026 The pycanoa developers
# Distributed under the terms of the MIT license, see setup.py.

# pylint: disable=C0111,R0903


class FrameFormat(object):
    """
    STANDARD:
        11-bit identifier (CAN 2.0A).

    EXTENDED:
        29-bit identifier (CAN 2.0B).
    """
    STANDARD = "STANDARD"
    EXTENDED = "EXTENDED"


class BitRole(object):
    UNSTUFFED = "UNSTUFFED"
    STUFFED = "STUFFED"


class SaDerivation(object):
    """
    LOW_BYTE_OF_ID:
        Source address is the low 8 bits of the identifier (J1939).

    EXPLICIT_TABLE:
        Source address looked up from (mask, value) identifier patterns.
    """
    LOW_BYTE_OF_ID = "LOW_BYTE_OF_ID"
    EXPLICIT_TABLE = "EXPLICIT_TABLE"


class ProgramActivity(object):
    """
    UNIFORM:
        The ECU firmware does the same amount of work all the time.

    HETEROGENEOUS:
        The firmware runs bursts of extra work around its own transmissions.
    """
    UNIFORM = "UNIFORM"
    HETEROGENEOUS = "HETEROGENEOUS"


class AttackKind(object):
    """
    NORMAL:
        Legitimate frame, not an attack.

    COMPROMISED_ECU:
        A legitimate ECU sends frames under another ECU's source address.

    ADDED_MODULE:
        Hardware added to the bus sends frames; it has no power channel.

    HIJACK_TRANSMISSION:
        An ECU overwrites recessive bits of an ongoing transmission and takes
        the rest of the frame over.
    """
    NORMAL = "NORMAL"
    COMPROMISED_ECU = "COMPROMISED_ECU"
    ADDED_MODULE = "ADDED_MODULE"
    HIJACK_TRANSMISSION = "HIJACK_TRANSMISSION"


class TraceKind(object):
    VOLTAGE = 0
    POWER = 1


class Decision(object):
    """
    AUTHENTIC:
        The ECU owning the claimed source address transmitted the frame.

    IMPERSONATION:
        Another legitimate ECU transmitted the frame.

    ADDED_MODULE:
        None of the legitimate ECUs transmitted the frame.
    """
    AUTHENTIC = "AUTHENTIC"
    IMPERSONATION = "IMPERSONATION"
    ADDED_MODULE = "ADDED_MODULE"


class VerdictStatus(object):
    """
    SCORED:
        Every model scored the transmission and a decision was taken.

    CRC_ERROR:
        The frame failed its CRC, stuffing or form checks.

    UNKNOWN_SA:
        The identifier maps to no known source address.

    OUT_OF_TRACE:
        The transmission window does not fit inside the power traces.
    """
    SCORED = "SCORED"
    CRC_ERROR = "CRC_ERROR"
    UNKNOWN_SA = "UNKNOWN_SA"
    OUT_OF_TRACE = "OUT_OF_TRACE"


class AttackLabel(object):
    NORMAL = "Normal"
    ATTACK = "Attack"


class OutputFormat(object):
    CSV = "csv"
    TEXT = "text"


ADDED_MODULE_SOURCE = -1
STANDARD_BITRATES = (125000, 250000, 500000)
VALID_FRAME_FORMATS = (FrameFormat.STANDARD, FrameFormat.EXTENDED)
VALID_PROGRAM_LEVELS = (ProgramActivity.UNIFORM, ProgramActivity.HETEROGENEOUS)
VALID_ATTACK_KINDS = (AttackKind.COMPROMISED_ECU, AttackKind.ADDED_MODULE,
                      AttackKind.HIJACK_TRANSMISSION)
