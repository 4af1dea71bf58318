"""Bridge configuration.

Credentials are referenced by environment-variable name and resolved once
at startup; the resolved secret lives only in a private attribute that
repr/asdict-style dumps never include.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field


@dataclass
class BridgeConfig:
    generator: str = "stub"
    mutator: str = "stub"
    scorer: str = "stub"
    device: str = "cpu"
    sample_rate: int = 22050
    soundfont: str | None = None       # reserved for sample-based synths
    llm_model: str = ""
    api_key_env: str = "MIDIALIGN_BRIDGE_API_KEY"
    transport: str = "stdio"           # "stdio" or "http"
    port: int = 8400
    concurrent: bool = False
    _api_key: str = field(default="", repr=False, compare=False)

    def __post_init__(self):
        if self.transport not in ("stdio", "http"):
            raise ValueError(f"transport must be stdio or http, got {self.transport!r}")
        self._api_key = os.environ.get(self.api_key_env, "")

    @property
    def resolved_api_key(self) -> str:
        return self._api_key

    def public_dict(self) -> dict:
        """Everything loggable; never the resolved credential."""
        return {
            "generator": self.generator,
            "mutator": self.mutator,
            "scorer": self.scorer,
            "device": self.device,
            "sample_rate": self.sample_rate,
            "soundfont": self.soundfont,
            "llm_model": self.llm_model,
            "api_key_env": self.api_key_env,
            "transport": self.transport,
            "port": self.port,
            "concurrent": self.concurrent,
        }
