"""Real-model adapters behind the midialign wire protocol.

This package is deliberately independent of the engine: the only shared
surface is wire protocol v1 (one JSON object per line over stdio, or HTTP
POST to /hello, /generate, /mutate, /score). It hosts three adapter slots -
a MIDI generator checkpoint, an audio-text embedding scorer with built-in
synthesis, and an LLM caption mutator - each with a deterministic stub so
protocol conformance is testable without model weights.
"""

__version__ = "0.1.0"
