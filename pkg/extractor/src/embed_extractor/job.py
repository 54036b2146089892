"""Extraction job description and validation."""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import DecodingConfigError, JobError

POOLINGS = ("last_token", "cls_token", "mean")
MODES = ("generate", "reuse")


@dataclass
class ExtractionJob:
    """One extraction run: a model, a prompt pattern, and the input texts.

    ``inputs`` holds one entry per output row: the document itself in reuse
    mode, or the template variable in generate mode. Decoding is locked to
    greedy (temperature 0, no sampling) and texts run one at a time;
    relaxing either would break the byte-reproducibility contract, so the
    constructor refuses such configurations outright.
    """

    model_id: str
    mode: str
    system_prompt: str
    user_prompt_template: str
    inputs: list = field(default_factory=list)
    ids: list | None = None
    pooling: str = "last_token"
    temperature: float = 0.0
    sample: bool = False
    batch_disabled: bool = True
    out_representations: str = "representations.bin"
    out_labels: str = "labels.csv"
    out_manifest: str = "manifest.json"

    def __post_init__(self):
        if self.mode not in MODES:
            raise JobError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.pooling not in POOLINGS:
            raise JobError(f"pooling must be one of {POOLINGS}, got {self.pooling!r}")
        if not self.system_prompt or not self.user_prompt_template:
            raise JobError("prompts must be nonempty")
        if "{text}" not in self.user_prompt_template:
            raise JobError("user_prompt_template must contain a {text} slot")
        if self.temperature != 0.0 or self.sample:
            raise DecodingConfigError(
                "nondeterministic decoding refused: extraction requires "
                "temperature 0 and no sampling so identical jobs produce "
                "byte-identical representation files"
            )
        if not self.batch_disabled:
            raise JobError("batching is disabled by contract; texts run one at a time")
        if not self.inputs:
            raise JobError("job has no inputs")
        if self.ids is not None and len(self.ids) != len(self.inputs):
            raise JobError("ids must align with inputs")

    def row_ids(self) -> list:
        if self.ids is not None:
            return [str(i) for i in self.ids]
        width = max(4, len(str(len(self.inputs) - 1)))
        return [f"text-{i:0{width}d}" for i in range(len(self.inputs))]

    def prompt_for(self, text: str) -> str:
        """Full prompt for one input, with the input marked as payload so
        backends know which span a repetition prompt targets."""
        from .models import PAYLOAD_SEP

        body = self.user_prompt_template.format(
            text=PAYLOAD_SEP + text + PAYLOAD_SEP)
        return self.system_prompt + "\n" + body
