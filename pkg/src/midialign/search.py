"""Reward-guided decode-time search.

One run maintains a candidate set of captions. Each mutation cycle picks a
candidate, paraphrases it into T variant captions, and grows one beam per
variant: every replacement cycle extends each unfinished beam by m tokens,
scores every beam against the ORIGINAL caption, and overwrites the beams
outside the top k with copies of top-k beams (captions included). Caption
variants that dominated the top-k log and beat the candidate's own best
reward are promoted into the candidate set for the next mutation cycle.
The reported winner is the highest-composite state seen anywhere in the run.

Seed derivation is part of the reproducibility contract:

    generation   derive_seed(seed, "gen", z, t, slot)
    replacement  derive_seed(seed, "replace", z, t)
    candidate    derive_seed(seed, "candidate", z)
    mutation     derive_seed(seed, "mutate", z)

so identical (caption, config, backends) always give identical reports,
regardless of worker count or scheduling.
"""

from __future__ import annotations

import dataclasses
import logging
import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from midialign.backends import GeneratorRequest, MutationRequest
from midialign.midi.tokens import Token, tokens_to_notes
from midialign.rewards import (
    RewardBreakdown,
    ScorerUnavailable,
    harmonic_consistency,
    parse_caption,
    resolve_reward_key,
    text_audio_consistency,
)
from midialign.seeding import derive_seed

logger = logging.getLogger(__name__)

BEST_OF_N_MODE = "best-of-N"
GUIDED_MODE = "guided"


@dataclass
class SearchState:
    """One beam: its caption assignment, token prefix, and cached reward."""

    state_id: int
    caption: str
    tokens: list[Token] = field(default_factory=list)
    reward: RewardBreakdown | None = None
    finished: bool = False

    def clone(self) -> "SearchState":
        return dataclasses.replace(self, tokens=list(self.tokens))


class ConfigError(ValueError):
    """Invalid search configuration; ``violations`` lists every problem."""

    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


@dataclass(frozen=True)
class SearchConfig:
    """Every knob of the search in one place.

    ``tau`` defaults to floor(max_tokens / m) + 1 so the t = 2..tau
    replacement loop performs enough m-token extensions to reach the token
    budget; ``k`` defaults to max(1, ceil(T / 2) - 1). With T = 1 the
    replacement step is the identity and k is ignored.
    """

    m: int = 100
    T: int = 5
    Z: int = 1
    tau: int | None = None
    k: int | None = None
    alpha: float = 1.0
    beta: float = 5.0
    max_tokens: int = 2000
    seed: int = 0
    retries: int = 1
    scorer_jobs: int = 1
    enable_mutation: bool = True
    enable_replacement: bool = True

    @property
    def effective_tau(self) -> int:
        if self.tau is not None:
            return self.tau
        return max(2, self.max_tokens // max(1, self.m) + 1)

    @property
    def effective_k(self) -> int:
        if self.k is not None:
            return self.k
        return max(1, -(-self.T // 2) - 1)

    def violations(self) -> list[str]:
        """All violated invariants, not just the first."""
        problems = []
        if self.m < 1:
            problems.append(f"m must be >= 1, got {self.m}")
        if self.T < 1:
            problems.append(f"T must be >= 1, got {self.T}")
        if self.Z < 1:
            problems.append(f"Z must be >= 1, got {self.Z}")
        if self.max_tokens < 1:
            problems.append(f"max_tokens must be >= 1, got {self.max_tokens}")
        if self.effective_tau < 2:
            problems.append(f"tau must be >= 2, got {self.effective_tau}")
        if self.m >= 1 and self.max_tokens >= 1 and \
                self.m * (self.effective_tau - 1) > self.max_tokens:
            problems.append(
                f"m * (tau - 1) = {self.m * (self.effective_tau - 1)} exceeds "
                f"max_tokens = {self.max_tokens}")
        if self.T > 1 and not 1 <= self.effective_k < self.T:
            problems.append(f"k must satisfy 1 <= k < T, got k={self.effective_k} T={self.T}")
        if self.alpha < 0 or self.beta < 0:
            problems.append(f"alpha/beta must be >= 0, got {self.alpha}/{self.beta}")
        if self.retries < 0:
            problems.append(f"retries must be >= 0, got {self.retries}")
        if self.scorer_jobs < 1:
            problems.append(f"scorer_jobs must be >= 1, got {self.scorer_jobs}")
        return problems

    def validate(self) -> "SearchConfig":
        problems = self.violations()
        if problems:
            raise ConfigError(problems)
        return self


@dataclass
class SearchReport:
    """Everything observable about one run."""

    original_caption: str
    config: SearchConfig
    mode: str
    best_state: SearchState
    per_cycle_rewards: list[dict]
    promoted_captions: list[tuple[int, str]]
    wall_time: float

    def to_dict(self) -> dict:
        from midialign.midi.tokens import token_to_wire

        best = self.best_state
        return {
            "original_caption": self.original_caption,
            "config": dataclasses.asdict(self.config),
            "mode": self.mode,
            "best_state": {
                "state_id": best.state_id,
                "caption": best.caption,
                "tokens": [token_to_wire(t) for t in best.tokens],
                "reward": dataclasses.asdict(best.reward) if best.reward else None,
                "finished": best.finished,
            },
            "per_cycle_rewards": self.per_cycle_rewards,
            "promoted_captions": [list(p) for p in self.promoted_captions],
            "wall_time": self.wall_time,
        }

    def signature(self) -> str:
        """Canonical JSON with wall time removed; equal signatures mean
        equal runs."""
        import json

        doc = self.to_dict()
        doc.pop("wall_time")
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def replace(states: list[SearchState], k: int, rng: random.Random) -> list[SearchState]:
    """Keep the k best states, overwrite the rest with copies of them.

    The returned list holds the top-k states (ranked by composite, ties to
    the lower state_id) in its first k slots, then q - k uniform copies of
    those survivors, captions included.
    """
    if not 1 <= k < len(states):
        raise ValueError(f"k must satisfy 1 <= k < {len(states)}, got {k}")
    if any(s.reward is None for s in states):
        raise ValueError("replace() requires every state to carry a reward")
    ranked = sorted(states, key=lambda s: (-s.reward.composite, s.state_id))
    top = ranked[:k]
    out = list(top)
    for _ in range(len(states) - k):
        out.append(top[rng.randrange(k)].clone())
    return out


def _score_one(state: SearchState, original_caption: str,
               config: SearchConfig, scorer) -> float | ScorerUnavailable:
    try:
        return text_audio_consistency(
            state.tokens, original_caption, scorer,
            retries=config.retries, state_id=state.state_id)
    except ScorerUnavailable as exc:
        return exc


def score_states(states: list[SearchState], original_caption: str,
                 config: SearchConfig, scorer) -> None:
    """Attach a RewardBreakdown (against the original caption) to every state.

    Finished states keep their cached reward: their tokens can no longer
    change. A state whose scorer calls all fail is assigned the worst
    text-audio score observed this cycle (or -1.0 when nothing succeeded).
    """
    original_attrs = parse_caption(original_caption)
    pending = [s for s in states if not (s.finished and s.reward is not None)]

    jobs = config.scorer_jobs if getattr(scorer, "concurrent", False) else 1
    if jobs > 1 and len(pending) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            ra_results = list(pool.map(
                lambda s: _score_one(s, original_caption, config, scorer), pending))
    else:
        ra_results = [_score_one(s, original_caption, config, scorer) for s in pending]

    observed = [r for r in ra_results if not isinstance(r, ScorerUnavailable)]
    fallback_ra = min(observed) if observed else -1.0
    for state, ra in zip(pending, ra_results):
        if isinstance(ra, ScorerUnavailable):
            logger.warning("state %s unscorable (%s); using worst observed ra %.4f",
                           state.state_id, ra.cause, fallback_ra)
            ra = fallback_ra
        notes = tokens_to_notes(state.tokens)
        if not notes:
            rh = 0.0
        else:
            rh = harmonic_consistency(notes, resolve_reward_key(original_attrs, notes))
        state.reward = RewardBreakdown.compute(ra, rh, config.alpha, config.beta)


def run_replacement_cycles(
    captions: list[str],
    original_caption: str,
    config: SearchConfig,
    backends,
    z: int = 1,
    id_start: int = 0,
    on_scored=None,
) -> tuple[list[SearchState], list[tuple[int, list[str]]]]:
    """Run the inner t = 2..tau loop for one set of caption variants.

    Returns the post-replacement states after the final cycle plus the
    per-cycle top-k caption log. ``on_scored(t, states)`` fires after each
    scoring pass, before replacement.
    """
    states = [SearchState(state_id=id_start + i, caption=caption)
              for i, caption in enumerate(captions)]
    k = min(config.effective_k, len(states))
    topk_log: list[tuple[int, list[str]]] = []

    for t in range(2, config.effective_tau + 1):
        for slot, state in enumerate(states):
            if state.finished:
                continue
            budget = min(config.m, config.max_tokens - len(state.tokens))
            if budget <= 0:
                continue
            new_tokens = backends.generator.generate(GeneratorRequest(
                caption=state.caption,
                prefix=tuple(state.tokens),
                n_tokens=budget,
                seed=derive_seed(config.seed, "gen", z, t, slot),
            ))
            state.tokens.extend(new_tokens)
            if len(new_tokens) < budget or any(tok.kind == "eos" for tok in new_tokens):
                state.finished = True

        score_states(states, original_caption, config, backends.scorer)
        if on_scored is not None:
            on_scored(t, states)

        if config.enable_replacement and len(states) > 1:
            states = replace(states, k, random.Random(derive_seed(config.seed, "replace", z, t)))
            topk_log.append((t, [s.caption for s in states[:k]]))
        else:
            ranked = sorted(states, key=lambda s: (-s.reward.composite, s.state_id))
            topk_log.append((t, [s.caption for s in ranked[:k]]))

    return states, topk_log


def promote_captions(
    topk_log: list[tuple[int, list[str]]],
    candidate: tuple[str, float],
    final_states: list[SearchState],
    k: int,
) -> list[tuple[str, float]]:
    """Select the captions that earned a place in the next candidate set.

    Counts caption frequency across the top-k log (ties break to the
    earliest appearance), takes the k most frequent, and keeps those whose
    best final-state composite beats the candidate's own reference reward.
    If none qualify the candidate set keeps the candidate unchanged: an
    empty set would deadlock the next mutation cycle.
    """
    counts: dict[str, int] = {}
    first_seen: dict[str, tuple[int, int]] = {}
    for cycle_idx, (t, caps) in enumerate(topk_log):
        for pos, caption in enumerate(caps):
            counts[caption] = counts.get(caption, 0) + 1
            first_seen.setdefault(caption, (cycle_idx, pos))
    frequent = sorted(counts, key=lambda c: (-counts[c], first_seen[c]))[:k]

    best_final: dict[str, float] = {}
    for state in final_states:
        if state.reward is None:
            continue
        prev = best_final.get(state.caption)
        if prev is None or state.reward.composite > prev:
            best_final[state.caption] = state.reward.composite

    _, candidate_ref = candidate
    promoted = [(c, best_final[c]) for c in frequent
                if c in best_final and best_final[c] > candidate_ref]
    return promoted if promoted else [candidate]


def run_inferalign(original_caption: str, config: SearchConfig, backends) -> SearchReport:
    """Full search: Z mutation cycles of caption variation, guided decoding,
    and candidate promotion. Returns the global best state and the full
    reward history."""
    config.validate()
    start = time.perf_counter()

    candidate_set: list[tuple[str, float]] = [(original_caption, float("-inf"))]
    best: SearchState | None = None
    rows: list[dict] = []
    promoted_log: list[tuple[int, str]] = []

    for z in range(1, config.Z + 1):
        rng = random.Random(derive_seed(config.seed, "candidate", z))
        candidate = candidate_set[rng.randrange(len(candidate_set))]
        candidate_caption, _ = candidate

        if config.enable_mutation:
            captions = backends.mutator.mutate(MutationRequest(
                caption=candidate_caption,
                count=config.T,
                seed=derive_seed(config.seed, "mutate", z),
            ))
        else:
            captions = [candidate_caption] * config.T

        def record(t: int, states: list[SearchState], z=z) -> None:
            nonlocal best
            for slot, state in enumerate(states):
                rows.append({
                    "mutation_cycle": z,
                    "replacement_cycle": t,
                    "slot": slot,
                    "state_id": state.state_id,
                    "caption": state.caption,
                    "ra": state.reward.ra,
                    "rh": state.reward.rh,
                    "composite": state.reward.composite,
                })
                if best is None or state.reward.composite > best.reward.composite:
                    best = state.clone()

        states, topk_log = run_replacement_cycles(
            captions, original_caption, config, backends,
            z=z, id_start=(z - 1) * config.T, on_scored=record)

        candidate_set = promote_captions(topk_log, candidate, states, config.effective_k)
        promoted_log.extend((z, caption) for caption, _ in candidate_set)

    mode = BEST_OF_N_MODE if config.m >= config.max_tokens else GUIDED_MODE
    return SearchReport(
        original_caption=original_caption,
        config=config,
        mode=mode,
        best_state=best,
        per_cycle_rewards=rows,
        promoted_captions=promoted_log,
        wall_time=time.perf_counter() - start,
    )
