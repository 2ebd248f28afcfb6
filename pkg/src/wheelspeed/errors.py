"""Exception types shared across the package.

Every error carries a short machine-readable ``code`` (for example
``"empty-input"`` or ``"missing-channel:M_drive"``) so callers and the CLI can
branch on it without parsing messages.
"""


class WheelSpeedError(ValueError):
    """Base error; ``code`` is the stable identifier."""

    def __init__(self, code, detail=None):
        self.code = code
        self.detail = detail
        msg = code if detail is None else f"{code}: {detail}"
        super().__init__(msg)


class ConfigError(WheelSpeedError):
    """Invalid experiment configuration (CLI exit code 2)."""


class SchemaError(WheelSpeedError):
    """Data file does not match the interchange schema (CLI exit code 3)."""


class DivergenceError(WheelSpeedError):
    """Numerical divergence in simulation or training (CLI exit code 5)."""

    def __init__(self, code, detail=None, *, index=None):
        self.index = index
        super().__init__(code, detail)
