class AdapterError(Exception):
    """Base class for adapter failures."""


class ModelLoadError(AdapterError):
    """A model or tokenizer could not be loaded, or the pair is incompatible."""


class TokenizationError(AdapterError):
    """A record cannot be tokenized into a scoreable sequence."""


class SchemaError(AdapterError):
    """An input file does not match the expected format."""
