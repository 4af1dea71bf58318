"""Reward-guided decode-time alignment for text-to-MIDI generation.

Wraps any autoregressive text-to-MIDI backend and steers its decoding with
a composite of text-audio and harmonic consistency rewards: caption
mutation explores the instruction space, periodic beam replacement exploits
high-reward prefixes. Ships with deterministic built-in backends, a wire
protocol for real model bridges, and an objective evaluation suite (tempo
bins, key matching, pattern compression).
"""

__version__ = "0.1.0"
