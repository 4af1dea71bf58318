"""Reward function tests with an independent off-key counting oracle."""

import random

import pytest
from hypothesis import given, settings, strategies as st

from midialign.midi.features import MAJOR, MINOR, Key
from midialign.midi.smf import notes_to_smf
from midialign.midi.tokens import NoteEvent, note_on, duration, tempo
from midialign.rewards import (
    CaptionAttributes,
    MockScorer,
    RewardBreakdown,
    ScorerUnavailable,
    composite_reward,
    harmonic_consistency,
    mock_scorer,
    parse_caption,
    resolve_reward_key,
    text_audio_consistency,
)

from test_features import scale_notes


def oracle_offkey_fraction(notes, key):
    """Independent count: derive the diatonic set from scale-step patterns,
    then count pitch classes outside it."""
    steps = (2, 2, 1, 2, 2, 2, 1) if key.mode == MAJOR else (2, 1, 2, 2, 1, 2, 2)
    allowed = set()
    pc = key.tonic
    for step in steps:
        allowed.add(pc % 12)
        pc += step
    off = sum(1 for n in notes if n.pitch % 12 not in allowed)
    return off, len(notes)


# --- caption parsing


def test_parse_caption_key_and_tempo_word():
    attrs = parse_caption(
        "A melodic electronic song with ambient elements, featuring piano. "
        "Set in G minor with a 4/4 time signature, it moves at a lively Presto tempo.")
    assert attrs.key == Key(7, MINOR)
    assert attrs.tempo_bpm == 180


def test_parse_caption_free_text_has_no_attributes():
    attrs = parse_caption("Upbeat acoustic guitar tune with a warm and cheerful feel.")
    assert attrs.key is None and attrs.tempo_bpm is None and attrs.density is None


def test_parse_caption_empty():
    attrs = parse_caption("")
    assert attrs == CaptionAttributes(raw_text="")


def test_parse_caption_accidentals_and_bpm():
    assert parse_caption("in C# major").key == Key(1, MAJOR)
    assert parse_caption("in Db major").key == Key(1, MAJOR)
    assert parse_caption("at 132 bpm").tempo_bpm == 132
    # explicit bpm beats the tempo word
    assert parse_caption("an Adagio piece at 132 bpm").tempo_bpm == 132
    # out-of-range bpm is ignored, tempo word still applies
    assert parse_caption("an Adagio piece at 999 bpm").tempo_bpm == 70


def test_parse_caption_density():
    assert parse_caption("3 notes per beat").density == 3.0
    assert parse_caption("a sparse texture").density == 1.0
    assert parse_caption("a dense wall of sound").density == 4.0


def test_parse_caption_tempo_words_table():
    for word, bpm in (("Presto", 180), ("Allegro", 140), ("Moderato", 110),
                      ("Andante", 90), ("Adagio", 70), ("Largo", 50)):
        assert parse_caption(f"a piece at a {word} pace").tempo_bpm == bpm


def test_parse_caption_lowercase_letter_not_a_key():
    assert parse_caption("a minor point about tuning").key is None
    assert parse_caption("in A minor").key == Key(9, MINOR)


# --- harmonic consistency


def test_harmonic_all_in_key():
    notes = [NoteEvent(0, p, 480) for p in (60, 64, 67, 71)]
    assert harmonic_consistency(notes, Key(0, MAJOR)) == 1.0


def test_harmonic_half_off():
    notes = [NoteEvent(0, 60, 480), NoteEvent(0, 61, 480)]
    assert harmonic_consistency(notes, Key(0, MAJOR)) == 0.5


def test_harmonic_two_of_seven_off():
    pitches = (60, 62, 64, 65, 67, 61, 63)  # 61, 63 off-key in C major
    notes = [NoteEvent(0, p, 480) for p in pitches]
    off, total = oracle_offkey_fraction(notes, Key(0, MAJOR))
    assert (off, total) == (2, 7)
    assert harmonic_consistency(notes, Key(0, MAJOR)) == 1.0 - 2.0 / 7.0


def test_harmonic_empty_is_zero():
    assert harmonic_consistency([], Key(0, MAJOR)) == 0.0


def test_harmonic_matches_oracle_on_random_instances(rng):
    for _ in range(300):
        key = Key(rng.randrange(12), rng.choice([MAJOR, MINOR]))
        notes = [NoteEvent(0, rng.randrange(128), rng.randrange(1, 960))
                 for _ in range(rng.randrange(1, 50))]
        off, total = oracle_offkey_fraction(notes, key)
        assert harmonic_consistency(notes, key) == 1.0 - off / total


def test_harmonic_transposition_invariance(rng):
    for _ in range(100):
        key = Key(rng.randrange(12), rng.choice([MAJOR, MINOR]))
        notes = [NoteEvent(0, rng.randrange(20, 100), 480)
                 for _ in range(rng.randrange(1, 30))]
        t = rng.randrange(12)
        shifted = [NoteEvent(n.onset, n.pitch + t, n.duration) for n in notes]
        shifted_key = Key((key.tonic + t) % 12, key.mode)
        assert harmonic_consistency(notes, key) == \
            harmonic_consistency(shifted, shifted_key)


# --- key resolution


def test_resolve_key_caption_precedence():
    attrs = parse_caption("in G minor")
    notes = scale_notes(0, MAJOR)
    assert resolve_reward_key(attrs, notes) == Key(7, MINOR)


def test_resolve_key_falls_back_to_estimate():
    attrs = parse_caption("no key here")
    assert resolve_reward_key(attrs, scale_notes(0, MAJOR)) == Key(0, MAJOR)


def test_resolve_key_error_when_undecidable():
    with pytest.raises(ValueError):
        resolve_reward_key(parse_caption("nothing"), [])


# --- composite


def test_composite_paper_weights():
    assert composite_reward(0.2, 0.8, 1.0, 5.0) == pytest.approx(4.2)
    assert composite_reward(0.0, 0.0) == 0.0
    assert composite_reward(1.0, 1.0, 1.0, 5.0) == 6.0


def test_reward_breakdown_identity():
    r = RewardBreakdown.compute(0.3, 0.9, 1.0, 5.0)
    assert r.composite == r.alpha * r.ra + r.beta * r.rh


@settings(deadline=None, max_examples=60)
@given(ra=st.floats(-1, 1), rh=st.floats(0, 1),
       bump=st.floats(0.001, 1.0))
def test_composite_monotone(ra, rh, bump):
    base = composite_reward(ra, rh)
    assert composite_reward(min(1.0, ra + bump), rh) >= base
    assert composite_reward(ra, min(1.0, rh + bump)) >= base


# --- mock scorer


def _render(notes, bpm=120):
    return notes_to_smf(notes, 480, bpm)


def test_mock_scorer_full_match_is_one():
    smf = _render(scale_notes(0, MAJOR), bpm=120)
    assert mock_scorer(smf, "in C major at 120 bpm") == pytest.approx(1.0)


def test_mock_scorer_weighted_partial_match():
    # key matches, tempo off by 30, no density: (0.5*1 + 0.3*0.5) / 0.8
    smf = _render(scale_notes(0, MAJOR), bpm=150)
    assert mock_scorer(smf, "in C major at 120 bpm") == pytest.approx(0.8125)


def test_mock_scorer_neutral_for_attribute_free_caption():
    smf = _render(scale_notes(0, MAJOR))
    assert mock_scorer(smf, "a nice tune") == 0.5


def test_mock_scorer_relative_key_half_credit():
    smf = _render(scale_notes(9, MINOR), bpm=120)
    assert mock_scorer(smf, "in C major") == pytest.approx(0.5)
    assert mock_scorer(smf, "in A minor") == pytest.approx(1.0)
    assert mock_scorer(smf, "in D major") == pytest.approx(0.0)


def test_mock_scorer_density_term():
    # 8 quarter notes spanning 8 beats: 1 note per beat
    notes = [NoteEvent(i * 480, 60, 480) for i in range(8)]
    assert mock_scorer(_render(notes), "2 notes per beat") == pytest.approx(0.5)
    assert mock_scorer(_render(notes), "1 notes per beat") == pytest.approx(1.0)


def test_mock_scorer_deterministic():
    smf = _render(scale_notes(4, MAJOR), bpm=97)
    caption = "in E major at 97 bpm"
    scores = {mock_scorer(smf, caption) for _ in range(10)}
    assert len(scores) == 1


# --- text-audio consistency plumbing


class FlakyScorer:
    concurrent = False

    def __init__(self, failures):
        self.failures = failures
        self.calls = 0

    def score(self, smf_bytes, caption):
        self.calls += 1
        if self.calls <= self.failures:
            raise ConnectionError("transport down")
        return 0.25


def test_text_audio_consistency_retries_then_succeeds():
    toks = [tempo(120), note_on(60), duration(12)]
    scorer = FlakyScorer(failures=2)
    assert text_audio_consistency(toks, "x", scorer, retries=2) == 0.25
    assert scorer.calls == 3


def test_text_audio_consistency_raises_after_retries():
    toks = [tempo(120), note_on(60), duration(12)]
    scorer = FlakyScorer(failures=10)
    with pytest.raises(ScorerUnavailable) as err:
        text_audio_consistency(toks, "x", scorer, retries=1, state_id=42)
    assert err.value.state_id == 42
    assert scorer.calls == 2


def test_text_audio_consistency_clamps():
    class Loud:
        def score(self, smf_bytes, caption):
            return 3.5

    assert text_audio_consistency([note_on(60)], "x", Loud()) == 1.0


def test_text_audio_consistency_deterministic_with_mock():
    toks = [tempo(120)] + [t for p in (60, 64, 67) for t in (note_on(p), duration(12))]
    a = text_audio_consistency(toks, "in C major", MockScorer())
    b = text_audio_consistency(toks, "in C major", MockScorer())
    assert a == b
