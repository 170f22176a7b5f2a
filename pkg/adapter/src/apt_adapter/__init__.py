"""apt-adapter: dataset conversion and logprob export for the apt-align toolkit.

The adapter talks to the toolkit exclusively through its file formats
(pairs/prefs/annotations/scored JSONL) and the byte-exact prompt template.
It never computes losses or metrics; all math lives in the toolkit.
"""

from .config import AdapterConfig
from .errors import AdapterError, ModelLoadError, SchemaError, TokenizationError

__version__ = "0.1.0"

__all__ = [
    "AdapterConfig",
    "AdapterError",
    "ModelLoadError",
    "SchemaError",
    "TokenizationError",
    "__version__",
]
