"""Hidden-state extraction client for the deconfound estimation package."""

from .coder import keyword_treatment_coder
from .errors import DecodingConfigError, ExtractorError, JobError, ModelError
from .extract import ExtractionResult, extract
from .io import load_texts
from .job import ExtractionJob
from .models import RepeatRNN, load_model, register_model

__version__ = "0.1.0"

__all__ = [
    "DecodingConfigError",
    "ExtractionJob",
    "ExtractionResult",
    "ExtractorError",
    "JobError",
    "ModelError",
    "RepeatRNN",
    "extract",
    "keyword_treatment_coder",
    "load_model",
    "load_texts",
    "register_model",
]
