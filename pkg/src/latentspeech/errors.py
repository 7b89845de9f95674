"""Exception types shared across the package."""


class LatentSpeechError(Exception):
    pass


class ConfigError(LatentSpeechError, ValueError):
    """Invalid configuration or incompatible component settings."""


class DimensionError(LatentSpeechError, ValueError):
    """Tensor or signal shapes do not line up."""


class InputError(LatentSpeechError, ValueError):
    """Malformed user-supplied data (audio, tokens, manifests)."""


class NumericError(LatentSpeechError, FloatingPointError):
    """A computation produced NaN or Inf."""


class FormatError(LatentSpeechError, ValueError):
    """A persisted file (checkpoint, WAV) is corrupt or has the wrong layout."""


class TransportError(LatentSpeechError, RuntimeError):
    """Remote transcription failed after exhausting retries."""

    def __init__(self, message: str, attempts: int):
        super().__init__(f"{message} (after {attempts} attempts)")
        self.attempts = attempts
