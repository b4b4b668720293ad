"""Exception hierarchy.

Errors split into two families so the command line can map them to exit codes:
``InputError`` (malformed files, exit 2) and ``ContractError`` (a valid input
that violates an operation's precondition, exit 3).
"""


class VvtError(Exception):
    pass


class InputError(VvtError):
    pass


class ContractError(VvtError):
    pass


# elf_loader
class BadMagic(InputError):
    pass


class Unsupported(InputError):
    pass


class Truncated(InputError):
    pass


class MachineMismatch(InputError):
    pass


# rv_decoder
class WidthMismatch(ContractError):
    pass


# static_features / static_models
class InvalidN(ContractError):
    pass


class EmptyVocabulary(ContractError):
    pass


class EmptyClass(ContractError):
    pass


class ShapeMismatch(ContractError):
    pass


class NonFiniteLoss(ContractError):
    def __init__(self, epoch, loss):
        super().__init__(f"loss became non-finite ({loss}) at epoch {epoch}")
        self.epoch = epoch
        self.loss = loss


# hpc_data
class TraceFormatError(InputError):
    """CSV trace problem; carries the 1-based line number when known."""

    def __init__(self, message, line=None, source=None):
        where = ""
        if source is not None:
            where += f"{source}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)
        self.line = line
        self.source = source


class RaggedRow(TraceFormatError):
    pass


class NonMonotonicTime(TraceFormatError):
    pass


class NegativeCount(TraceFormatError):
    pass


class NonUniformPeriod(TraceFormatError):
    pass


class UnknownEvent(ContractError):
    pass


class WindowTooLong(ContractError):
    pass


# feature_selection
class SingleClass(ContractError):
    pass


class LengthMismatch(ContractError):
    pass


class ConstantInput(ContractError):
    pass


class InvalidK(ContractError):
    pass


# detectors / synth / metrics
class TooFewSamples(ContractError):
    pass


class EmptyEnsemble(ContractError):
    pass


class SpanOutOfRange(ContractError):
    pass


class UnknownPositiveClass(ContractError):
    pass


class ModelFormatError(InputError):
    pass
