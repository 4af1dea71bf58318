"""Objective metric and corpus evaluation tests."""

import json

import pytest

from midialign.evaluation import (
    ck_ckd,
    evaluate_corpus,
    rows_to_csv,
    tb_tbt,
    tempo_bin,
    TEMPO_BIN_BOUNDARIES,
)
from midialign.midi.features import MAJOR, MINOR, Key
from midialign.midi.smf import notes_to_smf
from midialign.midi.tokens import NoteEvent
from midialign.rewards import MockScorer

from test_features import scale_notes


# --- tempo bins


def test_tempo_bin_boundaries_belong_to_upper_bin():
    for i, boundary in enumerate(TEMPO_BIN_BOUNDARIES):
        assert tempo_bin(boundary) == i + 1
        assert tempo_bin(boundary - 0.001) == i


def test_tempo_bin_examples():
    assert tempo_bin(100) == 4   # [90, 110)
    assert tempo_bin(40) == 1    # boundary joins the upper bin
    assert tempo_bin(250) == 8   # open-ended top bin
    assert tempo_bin(1) == 0


def test_tempo_bin_rejects_nonpositive():
    for bad in (0, -5):
        with pytest.raises(ValueError):
            tempo_bin(bad)


def test_tempo_bin_monotone_step_function():
    previous = 0
    for bpm in range(1, 400):
        bin_ = tempo_bin(bpm)
        assert bin_ >= previous
        previous = bin_


def test_tb_tbt_examples():
    assert tb_tbt(100, 95) == (True, True)
    assert tb_tbt(100, 115) == (False, True)
    assert tb_tbt(45, 200) == (False, False)


def test_tbt_symmetry(rng):
    for _ in range(100):
        a = rng.uniform(1, 300)
        b = rng.uniform(1, 300)
        assert tb_tbt(a, b) == tb_tbt(b, a)


# --- key match


def test_ck_ckd_examples():
    assert ck_ckd(Key(0, MAJOR), Key(0, MAJOR)) == (True, True)
    assert ck_ckd(Key(9, MINOR), Key(0, MAJOR)) == (False, True)
    assert ck_ckd(Key(0, MAJOR), Key(9, MINOR)) == (False, True)
    assert ck_ckd(Key(2, MAJOR), Key(0, MAJOR)) == (False, False)


def test_ck_ckd_symmetric(rng):
    for _ in range(100):
        a = Key(rng.randrange(12), rng.choice([MAJOR, MINOR]))
        b = Key(rng.randrange(12), rng.choice([MAJOR, MINOR]))
        assert ck_ckd(a, b) == ck_ckd(b, a)


# --- corpus evaluation


def write_corpus(directory, specs):
    """specs: name -> (tonic, mode, bpm)."""
    directory.mkdir(parents=True, exist_ok=True)
    for name, (tonic, mode, bpm) in specs.items():
        notes = scale_notes(tonic, mode)
        (directory / name).write_bytes(notes_to_smf(notes, 480, bpm))


def test_self_comparison_all_match(tmp_path):
    specs = {f"piece_{i}.mid": (i % 12, MAJOR if i % 2 else MINOR, 80 + 10 * i)
             for i in range(5)}
    write_corpus(tmp_path / "gen", specs)
    write_corpus(tmp_path / "ref", specs)
    result = evaluate_corpus(tmp_path / "gen", tmp_path / "ref")
    agg = result.aggregates
    assert agg["pairs"] == 5
    assert agg["TB"] == agg["TBT"] == agg["CK"] == agg["CKD"] == 100.0
    assert agg["CR"] is not None and agg["CLAP"] is None


def test_sixteen_pair_tb_fixture(tmp_path):
    # engineered so exactly 6 of 16 pairs share a tempo bin: TB = 37.50%
    same_bin = [(100, 95), (45, 50), (120, 130), (65, 68), (75, 85), (170, 200)]
    diff_bin = [(100, 115), (45, 200), (100, 150), (30, 45), (60, 55), (95, 115),
                (145, 165), (215, 190), (80, 95), (135, 105)]
    pairs = same_bin + diff_bin
    assert len(pairs) == 16
    from midialign.evaluation import tempo_bin as tbin

    assert sum(1 for g, r in pairs if tbin(g) == tbin(r)) == 6

    gen_specs = {}
    ref_specs = {}
    for i, (g, r) in enumerate(pairs):
        gen_specs[f"p{i:02d}.mid"] = (i % 12, MAJOR, g)
        ref_specs[f"p{i:02d}.mid"] = (i % 12, MAJOR, r)
    write_corpus(tmp_path / "gen", gen_specs)
    write_corpus(tmp_path / "ref", ref_specs)
    result = evaluate_corpus(tmp_path / "gen", tmp_path / "ref", compute_cr=False)
    assert result.aggregates["TB"] == 37.5


def test_missing_pairs_warn_not_fail(tmp_path):
    write_corpus(tmp_path / "gen", {"a.mid": (0, MAJOR, 100), "b.mid": (2, MAJOR, 100)})
    write_corpus(tmp_path / "ref", {"b.mid": (2, MAJOR, 100), "c.mid": (4, MAJOR, 100)})
    result = evaluate_corpus(tmp_path / "gen", tmp_path / "ref", compute_cr=False)
    assert result.aggregates["pairs"] == 1
    assert any("a.mid" in w for w in result.warnings)
    assert any("c.mid" in w for w in result.warnings)


def test_empty_intersection_zero_rows_with_warning(tmp_path):
    write_corpus(tmp_path / "gen", {"a.mid": (0, MAJOR, 100)})
    write_corpus(tmp_path / "ref", {"z.mid": (0, MAJOR, 100)})
    result = evaluate_corpus(tmp_path / "gen", tmp_path / "ref", compute_cr=False)
    assert result.rows == []
    assert result.aggregates["pairs"] == 0
    assert any("no filename pairs" in w for w in result.warnings)


def test_unreadable_directory_raises(tmp_path):
    with pytest.raises(NotADirectoryError):
        evaluate_corpus(tmp_path / "nope", tmp_path / "nada")


def test_corrupt_pair_skipped_with_warning(tmp_path):
    write_corpus(tmp_path / "gen", {"a.mid": (0, MAJOR, 100)})
    write_corpus(tmp_path / "ref", {"a.mid": (0, MAJOR, 100)})
    (tmp_path / "gen" / "bad.mid").write_bytes(b"garbage")
    (tmp_path / "ref" / "bad.mid").write_bytes(b"garbage")
    result = evaluate_corpus(tmp_path / "gen", tmp_path / "ref", compute_cr=False)
    assert result.aggregates["pairs"] == 1
    assert any("bad.mid" in w for w in result.warnings)


def test_scorer_column_with_captions(tmp_path):
    specs = {"a.mid": (0, MAJOR, 120)}
    write_corpus(tmp_path / "gen", specs)
    write_corpus(tmp_path / "ref", specs)
    captions = {"a": "in C major at 120 bpm"}
    result = evaluate_corpus(tmp_path / "gen", tmp_path / "ref",
                             scorer=MockScorer(), captions=captions, compute_cr=False)
    assert result.rows[0].clap == pytest.approx(1.0)
    assert result.aggregates["CLAP"] == pytest.approx(1.0)


def test_rows_csv_shape(tmp_path):
    specs = {"a.mid": (0, MAJOR, 120), "b.mid": (7, MINOR, 66)}
    write_corpus(tmp_path / "gen", specs)
    write_corpus(tmp_path / "ref", specs)
    result = evaluate_corpus(tmp_path / "gen", tmp_path / "ref")
    csv_text = rows_to_csv(result.rows)
    lines = csv_text.strip().splitlines()
    assert lines[0].startswith("name,gen_tempo,ref_tempo")
    assert len(lines) == 3
    assert "G minor" in lines[2]
