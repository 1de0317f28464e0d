"""Exception hierarchy.

Every error carries the name of the component that raised it so the CLI can
report failures as ``error [component]: message``.
"""


class IsimedError(Exception):
    component = "isimed"


# synthvol
class InvalidConfig(IsimedError, ValueError):
    component = "synthvol"


class DegenerateIntensity(IsimedError, ValueError):
    component = "synthvol"


class EmptyForeground(IsimedError, ValueError):
    component = "synthvol"


class FormatError(IsimedError, ValueError):
    component = "synthvol"


class TruncatedData(FormatError):
    pass


# sampling
class VolumeTooSmall(IsimedError, ValueError):
    component = "sampling"

    def __init__(self, subject_id, shape, patch_size):
        self.subject_id = subject_id
        super().__init__(
            f"volume {subject_id!r} with shape {tuple(shape)} is smaller than patch size {patch_size}"
        )


class ClassExhausted(IsimedError, RuntimeError):
    component = "sampling"

    def __init__(self, label, attempts):
        self.label = label
        self.attempts = attempts
        name = "anomalous" if label == 1 else "healthy"
        super().__init__(f"could not sample enough {name} patches after {attempts} attempts")


# tensor
class ShapeMismatch(IsimedError, ValueError):
    component = "tensor"


class GraphCycle(IsimedError, RuntimeError):
    component = "tensor"


class UnsupportedOp(IsimedError, RuntimeError):
    component = "tensor"


class NonFiniteGradient(IsimedError, FloatingPointError):
    component = "tensor"


# ssl
class DimensionMismatch(IsimedError, ValueError):
    component = "ssl"


class ZeroNormRow(IsimedError, ValueError):
    component = "ssl"


class NonFiniteLoss(IsimedError, FloatingPointError):
    component = "ssl"

    def __init__(self, step, value):
        self.step = step
        super().__init__(f"loss became {value} at step {step}")


# eval
class ConfigMismatch(IsimedError, ValueError):
    component = "eval"


class SingleClass(IsimedError, ValueError):
    component = "eval"


class FoldDegenerate(IsimedError, ValueError):
    component = "eval"


class ZeroVariance(IsimedError, ValueError):
    component = "eval"


class RankDeficient(IsimedError, ValueError):
    component = "eval"


# cli
class ConfigParseError(IsimedError, ValueError):
    component = "cli"


class MissingData(IsimedError, FileNotFoundError):
    component = "cli"


class IoError(IsimedError, OSError):
    component = "cli"
