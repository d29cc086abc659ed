"""
Exception hierarchy for the sqz toolkit.
Library code raises these; only the command-line layer catches them.
"""


class SqzError(Exception):
    """Base class for every error raised by sqz"""


class ConfigError(SqzError):
    """Invalid setting in the environment or a config file"""


# Signals

class SignalError(SqzError):
    pass


class InvalidSignal(SignalError):
    pass


class NyquistViolation(SignalError):
    pass


class EmptySignal(SignalError):
    pass


class BadInterval(SignalError):
    pass


class ZeroSignal(SignalError):
    pass


class Overflow(SignalError):
    pass


# Codecs and containers

class CodecError(SqzError):
    pass


class CorruptStream(CodecError):
    pass


class ContainerError(SqzError):
    pass


class BadMagic(ContainerError):
    pass


class UnsupportedVersion(ContainerError):
    pass


class TruncatedContainer(ContainerError):
    pass


class IntegrityError(SqzError):
    pass


class ChecksumMismatch(IntegrityError):
    pass


# Analysis (period, wavelet, fundamental, metrics)

class AnalysisError(SqzError):
    pass


class NoPeriodicity(AnalysisError):
    pass


class SignalTooShort(AnalysisError):
    pass


class TooManyLevels(AnalysisError):
    pass


class ShapeMismatch(AnalysisError):
    pass


class RatioUnreachable(AnalysisError):
    pass


class NoFundamental(AnalysisError):
    pass


class BandEmpty(AnalysisError):
    pass


class ZeroDenominator(AnalysisError):
    pass


class ZeroReference(AnalysisError):
    pass


class LengthMismatch(AnalysisError):
    pass


# Firmware images

class RomError(SqzError):
    pass


class BadChecksum(RomError):
    def __init__(self, line):
        super().__init__(f"record checksum mismatch on line {line}")
        self.line = line


class BadHexDigit(RomError):
    def __init__(self, line):
        super().__init__(f"invalid hex digit on line {line}")
        self.line = line


class MissingEof(RomError):
    pass


class OverlappingData(RomError):
    def __init__(self, address):
        super().__init__(f"data overlaps at address 0x{address:08X}")
        self.address = address


class UnsupportedRecordType(RomError):
    pass


class ManifestError(RomError):
    pass


class PolicyUnknownAlgo(RomError):
    pass


# Memory simulation

class SimulationError(SqzError):
    pass


class AddressOutOfRange(SimulationError):
    def __init__(self, address):
        super().__init__(f"address 0x{address:X} is outside the memory image")
        self.address = address


class ZeroLengthTrace(SimulationError):
    pass
