"""Token-level text privatization and the reconstruction attacks used to probe it."""

from tokpriv.errors import FormatError, OutOfVocabularyError

__version__ = "0.1.0"

__all__ = ["FormatError", "OutOfVocabularyError", "__version__"]
