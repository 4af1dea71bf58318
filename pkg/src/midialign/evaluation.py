"""Objective evaluation of generated MIDI against references.

Per-pair metrics: tempo-bin match (TB) and tempo-bin-with-tolerance (TBT)
over the nine bins delimited at 40/60/70/90/110/140/160/210 bpm; correct
key (CK) and correct key counting relative-major/minor duplicates (CKD);
pattern compression ratio (CR); and optionally a text-audio score when a
scorer backend and captions are supplied. Corpus aggregates are percentages
for the match metrics and means for CR and the scorer score.
"""

from __future__ import annotations

import bisect
import csv
import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from midialign.midi.features import Key, estimate_key, extract_tempo
from midialign.midi.smf import parse_smf
from midialign.patterns import compression_ratio

logger = logging.getLogger(__name__)

TEMPO_BIN_BOUNDARIES = (40, 60, 70, 90, 110, 140, 160, 210)

AGGREGATE_COLUMNS = ("CR", "CLAP", "TB", "TBT", "CK", "CKD")

CSV_COLUMNS = (
    "name", "gen_tempo", "ref_tempo", "gen_key", "ref_key",
    "gen_cr", "ref_cr", "tb", "tbt", "ck", "ckd", "clap",
)


def tempo_bin(bpm: float) -> int:
    """Half-open bin index: bin b covers [boundary_{b-1}, boundary_b), so a
    boundary value belongs to the upper bin. Bin 0 is (0, 40), bin 8 is
    [210, inf)."""
    if bpm <= 0:
        raise ValueError(f"bpm must be positive, got {bpm}")
    return bisect.bisect_right(TEMPO_BIN_BOUNDARIES, bpm)


def tb_tbt(gen_bpm: float, ref_bpm: float) -> tuple[bool, bool]:
    """Exact tempo-bin match and adjacent-bin tolerance match."""
    gen_bin = tempo_bin(gen_bpm)
    ref_bin = tempo_bin(ref_bpm)
    return gen_bin == ref_bin, abs(gen_bin - ref_bin) <= 1


def ck_ckd(gen_key: Key, ref_key: Key) -> tuple[bool, bool]:
    """Exact key match and match-up-to-relative-major/minor."""
    ck = gen_key == ref_key
    return ck, ck or gen_key == ref_key.relative()


@dataclass
class EvalRow:
    """Metrics for one generated/reference file pair."""

    name: str
    gen_tempo: float
    ref_tempo: float
    gen_key: Key
    ref_key: Key
    gen_cr: float | None
    ref_cr: float | None
    tb: bool
    tbt: bool
    ck: bool
    ckd: bool
    clap: float | None = None


@dataclass
class CorpusResult:
    rows: list[EvalRow]
    aggregates: dict
    warnings: list[str] = field(default_factory=list)


def _evaluate_pair(name: str, gen_bytes: bytes, ref_bytes: bytes,
                   compute_cr: bool, scorer, caption: str | None) -> EvalRow:
    gen_notes, gen_ppq, _ = parse_smf(gen_bytes)
    ref_notes, ref_ppq, _ = parse_smf(ref_bytes)
    if not gen_notes or not ref_notes:
        raise ValueError("empty note list")
    gen_tempo = extract_tempo(gen_bytes)
    ref_tempo = extract_tempo(ref_bytes)
    gen_key = estimate_key(gen_notes)
    ref_key = estimate_key(ref_notes)
    tb, tbt = tb_tbt(gen_tempo, ref_tempo)
    ck, ckd = ck_ckd(gen_key, ref_key)
    clap = None
    if scorer is not None and caption is not None:
        clap = float(scorer.score(gen_bytes, caption))
    return EvalRow(
        name=name,
        gen_tempo=gen_tempo,
        ref_tempo=ref_tempo,
        gen_key=gen_key,
        ref_key=ref_key,
        gen_cr=compression_ratio(gen_notes, gen_ppq) if compute_cr else None,
        ref_cr=compression_ratio(ref_notes, ref_ppq) if compute_cr else None,
        tb=tb, tbt=tbt, ck=ck, ckd=ckd, clap=clap,
    )


def _aggregate(rows: list[EvalRow]) -> dict:
    n = len(rows)

    def pct(flag):
        return 100.0 * sum(1 for r in rows if getattr(r, flag)) / n if n else None

    def mean(attr):
        values = [getattr(r, attr) for r in rows if getattr(r, attr) is not None]
        return sum(values) / len(values) if values else None

    return {
        "pairs": n,
        "CR": mean("gen_cr"),
        "CLAP": mean("clap"),
        "TB": pct("tb"),
        "TBT": pct("tbt"),
        "CK": pct("ck"),
        "CKD": pct("ckd"),
    }


def evaluate_corpus(generated_dir, reference_dir, scorer=None,
                    captions: dict[str, str] | None = None,
                    compute_cr: bool = True) -> CorpusResult:
    """Evaluate every same-named .mid pair across two directories.

    Missing partners and unreadable pairs are reported as warnings, never
    fatal; an unreadable *directory* raises. The per-pair scorer column is
    filled only when both a scorer and a caption for that name exist.
    """
    gen_dir, ref_dir = Path(generated_dir), Path(reference_dir)
    for d in (gen_dir, ref_dir):
        if not d.is_dir():
            raise NotADirectoryError(f"not a directory: {d}")

    gen_files = {p.name: p for p in sorted(gen_dir.iterdir()) if p.suffix == ".mid"}
    ref_files = {p.name: p for p in sorted(ref_dir.iterdir()) if p.suffix == ".mid"}
    warnings = []
    for name in sorted(set(gen_files) - set(ref_files)):
        warnings.append(f"no reference for {name}")
    for name in sorted(set(ref_files) - set(gen_files)):
        warnings.append(f"no generated file for {name}")
    shared = sorted(set(gen_files) & set(ref_files))
    if not shared:
        warnings.append("no filename pairs in common")

    rows = []
    for name in shared:
        caption = (captions or {}).get(name) or (captions or {}).get(Path(name).stem)
        try:
            rows.append(_evaluate_pair(
                name, gen_files[name].read_bytes(), ref_files[name].read_bytes(),
                compute_cr, scorer, caption))
        except (ValueError, OSError) as exc:
            warnings.append(f"skipped {name}: {exc}")
    for message in warnings:
        logger.warning("%s", message)
    return CorpusResult(rows=rows, aggregates=_aggregate(rows), warnings=warnings)


def rows_to_csv(rows: list[EvalRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in rows:
        writer.writerow([
            r.name, f"{r.gen_tempo:g}", f"{r.ref_tempo:g}", str(r.gen_key), str(r.ref_key),
            "" if r.gen_cr is None else f"{r.gen_cr:.6f}",
            "" if r.ref_cr is None else f"{r.ref_cr:.6f}",
            int(r.tb), int(r.tbt), int(r.ck), int(r.ckd),
            "" if r.clap is None else f"{r.clap:.6f}",
        ])
    return buf.getvalue()


def aggregates_to_json(aggregates: dict) -> str:
    doc = {col: aggregates.get(col) for col in AGGREGATE_COLUMNS}
    doc["pairs"] = aggregates.get("pairs")
    return json.dumps(doc, sort_keys=True, indent=2)
