"""
Exception hierarchy shared by every milkit sub-package
"""


class MILKitError(Exception):
    """Base class for all milkit errors"""


class BagDataError(MILKitError, ValueError):
    """Invalid bag contents or an inconsistent batch"""


class ArrayFileError(MILKitError, ValueError):
    """Array container that cannot be decoded"""


class DatasetError(MILKitError, ValueError):
    """Problems reading or writing a processed dataset"""


class GeneratorError(DatasetError):
    """Synthetic dataset parameters that cannot be realised"""


class ModelConfigError(MILKitError, ValueError):
    """Unknown model name or invalid field combination"""


class ModelInputError(MILKitError, ValueError):
    """Batch that does not fit the model it is fed to"""


class MetricError(MILKitError, ValueError):
    """Metric undefined on the given labels"""


class ConfigError(MILKitError, ValueError):
    """Invalid command-line configuration file or override"""


class DivergenceError(MILKitError, RuntimeError):
    """Non-finite training loss"""

    def __init__(self, epoch: int, step: int, loss: float):
        self.epoch = epoch
        self.step = step
        self.loss = loss
        super().__init__(f"divergence detected at epoch {epoch}, step {step} (loss={loss})")
