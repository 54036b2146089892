"""Error types for the extraction pipeline."""


class ExtractorError(Exception):
    """Base class for extraction failures."""


class JobError(ExtractorError):
    """Invalid job description."""


class DecodingConfigError(JobError):
    """A decoding configuration that could produce nondeterministic output."""


class ModelError(ExtractorError):
    """Model unavailable or failed to run."""
