"""Model backends that expose per-token hidden states.

A backend is anything with a ``run(prompt)`` method returning
``(generated_text, hidden_states)`` where ``hidden_states`` has one row per
generated token (the final hidden layer). Decoding must be deterministic:
identical prompts give identical text and identical states.

The built-in ``repeat-rnn`` reference backend is a small fixed-weight
recurrent encoder that echoes the payload of its prompt. It stands in for a
real language model in tests and desk runs; a transformer backend plugs in
by registering another factory under a new model id.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .errors import ModelError

# marks the start of the text a repeater prompt carries as payload
PAYLOAD_SEP = "\n<<payload>>\n"


def _token_seed(token: str) -> int:
    return int.from_bytes(hashlib.sha256(token.encode("utf-8")).digest()[:8], "little")


class RepeatRNN:
    """Deterministic recurrent encoder that repeats the prompt payload.

    Weights are a pure function of the model id, token embeddings a pure
    function of the token bytes, so identical inputs always produce
    identical hidden states.
    """

    def __init__(self, model_id: str = "repeat-rnn", hidden_dim: int = 64):
        self.model_id = model_id
        self.hidden_dim = hidden_dim
        rng = np.random.default_rng(_token_seed(model_id))
        d = hidden_dim
        self._W = rng.normal(0.0, 1.0 / np.sqrt(d), (d, d))
        self._U = rng.normal(0.0, 1.0 / np.sqrt(d), (d, d))
        self._b = rng.normal(0.0, 0.1, d)

    def _embed(self, token: str) -> np.ndarray:
        rng = np.random.default_rng(_token_seed(token))
        return rng.normal(0.0, 1.0, self.hidden_dim)

    def run(self, prompt: str):
        parts = prompt.split(PAYLOAD_SEP)
        text = parts[-2] if len(parts) >= 3 else prompt
        tokens = text.split()
        if not tokens:
            return text, np.zeros((0, self.hidden_dim))
        h = np.zeros(self.hidden_dim)
        states = np.empty((len(tokens), self.hidden_dim))
        for i, tok in enumerate(tokens):
            h = np.tanh(self._W @ h + self._U @ self._embed(tok) + self._b)
            states[i] = h
        return text, states


_REGISTRY = {
    "repeat-rnn": RepeatRNN,
}


def register_model(model_id: str, factory) -> None:
    _REGISTRY[model_id] = factory


def load_model(model_id: str):
    try:
        factory = _REGISTRY[model_id]
    except KeyError:
        raise ModelError(f"no local model registered under {model_id!r}")
    return factory(model_id)
