"""Operator command line: generate, ablate, eval, serve.

Every flag can also come from an environment variable with the MIDIALIGN_
prefix (e.g. MIDIALIGN_SEED), or from a JSON manifest passed via --config;
explicit flags win over the manifest, the manifest wins over defaults. Only
the caption is truly required.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click

from midialign.backends import Backends
from midialign.evaluation import (
    aggregates_to_json,
    evaluate_corpus,
    rows_to_csv,
)
from midialign.midi.smf import notes_to_smf
from midialign.midi.tokens import first_tempo, tokens_to_notes
from midialign.rewards import MockScorer
from midialign.search import ConfigError, SearchConfig, run_inferalign
from midialign.seeding import derive_seed

logger = logging.getLogger(__name__)

ABLATION_METRICS = ("TB", "TBT", "CK", "CKD")

_CONFIG_FIELDS = ("m", "T", "Z", "tau", "k", "alpha", "beta", "max_tokens",
                  "seed", "retries")


def _fail(code: str, message: str, **extra) -> None:
    """Machine-readable error on stderr, then nonzero exit."""
    doc = {"error": code, "message": message}
    doc.update(extra)
    click.echo(json.dumps(doc, sort_keys=True), err=True)
    sys.exit(2)


def _load_manifest(path: str | None) -> dict:
    if not path:
        return {}
    try:
        manifest = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        _fail("bad_manifest", f"cannot read manifest {path}: {exc}")
    if not isinstance(manifest, dict):
        _fail("bad_manifest", f"manifest {path} must hold a JSON object")
    return manifest


def _build_config(manifest: dict, overrides: dict) -> SearchConfig:
    values = {}
    for name in _CONFIG_FIELDS:
        if name in manifest and manifest[name] is not None:
            values[name] = manifest[name]
        if overrides.get(name) is not None:
            values[name] = overrides[name]
    try:
        return SearchConfig(**values).validate()
    except TypeError as exc:
        _fail("bad_config", str(exc))
    except ConfigError as exc:
        _fail("bad_config", "invalid configuration", violations=exc.violations)


def _build_backends(manifest: dict, generator, mutator, scorer,
                    timeout: float, retries: int) -> Backends:
    endpoints = {
        "generator": generator or manifest.get("generator") or "builtin",
        "mutator": mutator or manifest.get("mutator") or "builtin",
        "scorer": scorer or manifest.get("scorer") or "builtin",
    }
    missing = [name for name, value in endpoints.items() if value == "none"]
    if missing:
        _fail("backend_missing", f"no backend configured for: {', '.join(missing)}",
              backends=missing)
    return Backends.from_endpoints(timeout=timeout, retries=retries, **endpoints)


def _report_doc(report) -> dict:
    """Report JSON is a deterministic artifact: wall time goes to the log,
    not the file."""
    doc = report.to_dict()
    doc.pop("wall_time")
    return doc


def _write_outputs(report, out_path: Path, report_path: Path) -> None:
    tokens = report.best_state.tokens
    notes = tokens_to_notes(tokens)
    bpm = first_tempo(tokens) or 120
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_bytes(notes_to_smf(notes, 480, bpm))
    report_path.parent.mkdir(parents=True, exist_ok=True)
    report_path.write_text(json.dumps(_report_doc(report), sort_keys=True, indent=2) + "\n")


def _search_options(fn):
    options = [
        click.option("--config", "config_path", type=click.Path(), default=None,
                     help="JSON manifest with defaults for every flag"),
        click.option("--seed", type=int, default=None, help="global random seed"),
        click.option("--m", type=int, default=None, help="replacement period in tokens"),
        click.option("--T", "T", type=int, default=None, help="caption mutations per cycle"),
        click.option("--Z", "Z", type=int, default=None, help="mutation cycles"),
        click.option("--tau", type=int, default=None, help="replacement cycles per mutation"),
        click.option("--k", type=int, default=None, help="beams preserved by replacement"),
        click.option("--alpha", type=float, default=None, help="text-audio reward weight"),
        click.option("--beta", type=float, default=None, help="harmonic reward weight"),
        click.option("--max-tokens", type=int, default=None, help="token budget per beam"),
        click.option("--retries", type=int, default=None, help="scorer retry count"),
        click.option("--generator", default=None,
                     help="builtin | none | http(s) URL | subprocess command"),
        click.option("--mutator", default=None,
                     help="builtin | none | http(s) URL | subprocess command"),
        click.option("--scorer", default=None,
                     help="builtin | none | http(s) URL | subprocess command"),
        click.option("--timeout", type=float, default=30.0, help="backend call timeout (s)"),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="debug logging")
def main(verbose: bool) -> None:
    """Reward-guided decode-time alignment for text-to-MIDI generation."""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.option("--caption", default=None, help="the instruction to align against")
@click.option("--out", "out_path", type=click.Path(), default="out.mid",
              help="winning sequence as a MIDI file")
@click.option("--report", "report_path", type=click.Path(), default="report.json",
              help="search report JSON")
@_search_options
def generate(caption, out_path, report_path, config_path, generator, mutator,
             scorer, timeout, **overrides):
    """Run the aligned search for one caption and write its winner."""
    manifest = _load_manifest(config_path)
    caption = caption or manifest.get("caption")
    if not caption:
        _fail("missing_caption", "a caption is required (--caption or manifest)")
    config = _build_config(manifest, overrides)
    backends = _build_backends(manifest, generator, mutator, scorer,
                               timeout, config.retries)
    try:
        report = run_inferalign(caption, config, backends)
    finally:
        backends.close()
    _write_outputs(report, Path(out_path), Path(report_path))
    logger.info("mode=%s best=%.4f wall=%.2fs", report.mode,
                report.best_state.reward.composite, report.wall_time)
    click.echo(f"{out_path} {report_path} mode={report.mode} "
               f"composite={report.best_state.reward.composite:.4f}")


def _run_cell(axis: str, value: int, captions: list[str], config: SearchConfig,
              backends: Backends, cell_dir: Path):
    """One ablation grid cell: a full search per caption."""
    cell_dir.mkdir(parents=True, exist_ok=True)
    failures = []
    for idx, caption in enumerate(captions):
        cell_seed = derive_seed(config.seed, "ablate", axis, value, idx)
        cell_config = dataclasses.replace(config, **{axis: value, "seed": cell_seed})
        try:
            report = run_inferalign(caption, cell_config, backends)
            tokens = report.best_state.tokens
            bpm = first_tempo(tokens) or 120
            (cell_dir / f"caption_{idx:02d}.mid").write_bytes(
                notes_to_smf(tokens_to_notes(tokens), 480, bpm))
        except Exception as exc:  # noqa: BLE001 - a cell failure must not kill the grid
            failures.append({"caption_index": idx, "error": str(exc)})
    return failures


def _ablation_table(axis_label: str, values: list[int], cells: dict) -> str:
    lines = [",".join([axis_label] + [str(v) for v in values])]
    for metric in ABLATION_METRICS:
        row = [metric]
        for v in values:
            agg = cells[v]["aggregates"]
            row.append("" if agg.get(metric) is None else f"{agg[metric]:.2f}")
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


@main.command()
@click.option("--captions-file", type=click.Path(exists=True), required=True,
              help="text file, one caption per line")
@click.option("--references", type=click.Path(exists=True), required=True,
              help="directory of reference .mid files named caption_NN.mid")
@click.option("--grid-m", default=None, help="comma-separated m values")
@click.option("--grid-T", "grid_t", default=None, help="comma-separated T values")
@click.option("--outdir", type=click.Path(), default="ablation",
              help="output directory for cells and tables")
@click.option("--jobs", type=int, default=1, help="parallel grid cells")
@_search_options
def ablate(captions_file, references, grid_m, grid_t, outdir, jobs, config_path,
           generator, mutator, scorer, timeout, **overrides):
    """Sweep the replacement period and/or mutation count over a caption set,
    then score each cell against the reference corpus."""
    manifest = _load_manifest(config_path)
    config = _build_config(manifest, overrides)
    captions = [line.strip() for line in Path(captions_file).read_text().splitlines()
                if line.strip()]
    if not captions:
        _fail("empty_captions", f"no captions in {captions_file}")

    grids: list[tuple[str, list[int]]] = []
    if grid_m:
        grids.append(("m", [int(v) for v in grid_m.split(",") if v.strip()]))
    if grid_t:
        grids.append(("T", [int(v) for v in grid_t.split(",") if v.strip()]))
    if not grids or any(not values for _, values in grids):
        _fail("empty_grid", "provide at least one non-empty --grid-m / --grid-T")

    backends = _build_backends(manifest, generator, mutator, scorer,
                               timeout, config.retries)
    out_root = Path(outdir)
    out_root.mkdir(parents=True, exist_ok=True)
    summary = {}
    wrote_all = True
    try:
        for axis, values in grids:
            cells = {}

            def run_one(value, axis=axis):
                cell_dir = out_root / f"{axis}_{value}"
                failures = _run_cell(axis, value, captions, config, backends, cell_dir)
                result = evaluate_corpus(cell_dir, references, compute_cr=False)
                return value, cell_dir, failures, result

            with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
                for value, cell_dir, failures, result in pool.map(run_one, values):
                    (cell_dir / "rows.csv").write_text(rows_to_csv(result.rows))
                    cells[value] = {
                        "aggregates": result.aggregates,
                        "failures": failures,
                        "warnings": result.warnings,
                    }
                    if failures:
                        wrote_all = False
            table = _ablation_table(axis, values, cells)
            (out_root / f"table_{axis}.csv").write_text(table)
            summary[axis] = {str(v): cells[v] for v in values}
            click.echo(table, nl=False)
    finally:
        backends.close()
    (out_root / "ablation.json").write_text(
        json.dumps(summary, sort_keys=True, indent=2) + "\n")
    sys.exit(0 if wrote_all else 1)


@main.command("eval")
@click.argument("generated_dir", type=click.Path(exists=True))
@click.argument("reference_dir", type=click.Path(exists=True))
@click.option("--with-scorer", "scorer_endpoint", default=None,
              help="fill the text-audio column: builtin | URL | command")
@click.option("--captions-file", type=click.Path(exists=True), default=None,
              help="JSON object mapping file name (or stem) to caption")
@click.option("--out-csv", type=click.Path(), default=None, help="per-pair rows CSV")
@click.option("--out-json", type=click.Path(), default=None, help="aggregate JSON")
@click.option("--no-cr", is_flag=True, help="skip compression-ratio columns")
def eval_command(generated_dir, reference_dir, scorer_endpoint, captions_file,
                 out_csv, out_json, no_cr):
    """Compare a generated corpus against references, pair by matching name."""
    scorer = None
    captions = None
    if scorer_endpoint:
        if scorer_endpoint == "builtin":
            scorer = MockScorer()
        else:
            from midialign.backends import RemoteScorer, make_transport

            scorer = RemoteScorer(make_transport(scorer_endpoint))
        if captions_file:
            captions = json.loads(Path(captions_file).read_text())
    result = evaluate_corpus(generated_dir, reference_dir, scorer=scorer,
                             captions=captions, compute_cr=not no_cr)
    if out_csv:
        Path(out_csv).write_text(rows_to_csv(result.rows))
    if out_json:
        Path(out_json).write_text(aggregates_to_json(result.aggregates) + "\n")
    click.echo(aggregates_to_json(result.aggregates))
    for warning in result.warnings:
        click.echo(f"warning: {warning}", err=True)
    sys.exit(0)


@main.command()
@click.option("--stdio", is_flag=True, help="serve on stdin/stdout")
@click.option("--port", type=int, default=None, help="serve HTTP on this port")
@click.option("--epsilon", type=float, default=0.15, help="toy generator off-key rate")
def serve(stdio, port, epsilon):
    """Expose the built-in backends over wire protocol v1."""
    from midialign import serve as serve_mod

    argv = []
    if stdio:
        argv.append("--stdio")
    if port is not None:
        argv.extend(["--port", str(port)])
    argv.extend(["--epsilon", str(epsilon)])
    sys.exit(serve_mod.main(argv))


def entry() -> None:
    main(auto_envvar_prefix="MIDIALIGN")


if __name__ == "__main__":
    entry()
