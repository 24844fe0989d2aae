"""Single entry-point command for batch work over annotated corpora.

Subcommands: validate, replay, stats, kappa, encode, split, serve. Flags
override values from an optional JSON config file (``--config``), which in
turn overrides built-in defaults. All output is deterministic for fixed
inputs and seed. Set ``GROUNDWORK_LOG`` to a level name for verbosity.
"""

from __future__ import annotations

import json
import logging
import os
import sys
from pathlib import Path

import click

from . import analytics, corpus_io, dataset, engine, service
from .engine import Severity
from .model import GroundingAct, GroundworkError

log = logging.getLogger("groundwork")

_CONFIG_KEYS = (
    "format",
    "seed",
    "threshold_factor",
    "special_token",
    "separator",
    "out",
    "port",
    "ratios",
    "data_dir",
    "static_dir",
)


def _setup_logging() -> None:
    level = os.environ.get("GROUNDWORK_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))


@click.group()
@click.option(
    "--config",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="JSON file with default values for the flags below.",
)
@click.pass_context
def main(ctx: click.Context, config: str | None) -> None:
    """Toolkit for grounding-act annotated dialog corpora."""
    _setup_logging()
    if config:
        with open(config, encoding="utf-8") as handle:
            values = json.load(handle)
        defaults = {k: v for k, v in values.items() if k in _CONFIG_KEYS}
        ctx.default_map = {name: defaults for name in main.commands}


def _read(path: str, fmt: str | None) -> corpus_io.CorpusFile:
    forced = corpus_io.FileFormat(fmt) if fmt else None
    try:
        return corpus_io.read_corpus(path, forced)
    except GroundworkError as exc:
        raise click.ClickException(str(exc)) from None


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)


@main.command()
@click.argument("input", type=click.Path(exists=True, dir_okay=False))
@click.option("--format", type=click.Choice(["jsonl", "tsv"]), default=None, help="Force the input format (default: by extension).")
@click.option("--threshold-factor", type=float, default=1.0, show_default=True)
def validate(input: str, format: str | None, threshold_factor: float) -> None:
    """Check a corpus against the coding rules; exit 1 on errors."""
    corpus = _read(input, format)
    errors = warnings = 0
    for dialog in corpus.dialogs:
        for finding in engine.validate(dialog, threshold_factor=threshold_factor):
            if finding.severity is Severity.ERROR:
                errors += 1
            else:
                warnings += 1
            where = f"{finding.dialog_id}:{finding.utterance_id}"
            click.echo(
                f"{finding.severity.value}: [{finding.code}] {where} {finding.message}"
            )
    click.echo(f"{errors} errors, {warnings} warnings")
    if errors:
        sys.exit(1)


@main.command()
@click.argument("input", type=click.Path(exists=True, dir_okay=False))
@click.option("--format", type=click.Choice(["jsonl", "tsv"]), default="jsonl", show_default=True, help="Output format: timeline rows (jsonl) or the annotation table (tsv).")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Output path (default: stdout).")
def replay(input: str, format: str, out: str | None) -> None:
    """Replay labels into per-utterance CGU state."""
    corpus = _read(input, None)
    try:
        if format == "tsv":
            text = corpus_io.dumps_tsv(corpus.dialogs)
        else:
            text = "".join(
                corpus_io.dumps_timeline_jsonl(engine.replay(dialog))
                for dialog in corpus.dialogs
            )
    except GroundworkError as exc:
        raise click.ClickException(str(exc)) from None
    _emit(text, out)


def _acts_table(histogram: analytics.ActHistogram) -> str:
    width = max(len(act.canonical_name) for act in analytics.COUNTABLE_ACTS)
    lines = [f"{'act':<{width}}  {'count':>7}  {'percent':>7}"]
    for act in analytics.COUNTABLE_ACTS:
        lines.append(
            f"{act.canonical_name:<{width}}  {histogram.counts[act]:>7}  "
            f"{histogram.percentages[act]:>7.2f}"
        )
    lines.append(f"{'total':<{width}}  {histogram.total_acts:>7}")
    lines.append("note: percentages divide by the sum of non-None act counts")
    return "\n".join(lines) + "\n"


def _trajectory_table(stats: analytics.TrajectoryStats) -> str:
    gaps = stats.revisit_gaps_seconds
    lines = [
        f"grounded in next utterance  {stats.grounded_in_next_count}",
        f"longest span (utterances)   {stats.max_span}",
        f"revisits after grounding    {stats.revisit_count}",
        f"revisit gaps > 10 s         {sum(1 for g in gaps if g > 10)}",
        f"longest revisit gap (s)     {max(gaps) if gaps else 0:g}",
        f"ambiguous groundings        {stats.ambiguous_count}",
    ]
    for flag, count in stats.flag_census.items():
        lines.append(f"{flag.value + ' flags':<28}{count}")
    return "\n".join(lines) + "\n"


@main.command()
@click.argument("input", type=click.Path(exists=True, dir_okay=False))
@click.option("--format", type=click.Choice(["jsonl", "tsv"]), default=None, help="Force the input format (default: by extension).")
@click.option("--table", type=click.Choice(["acts", "trajectory", "all"]), default="all", show_default=True)
@click.option("--json", "as_json", is_flag=True, help="Emit JSON instead of text tables.")
def stats(input: str, format: str | None, table: str, as_json: bool) -> None:
    """Corpus statistics: act histogram and grounding trajectories."""
    corpus = _read(input, format)
    try:
        histogram = analytics.act_histogram(corpus) if table in ("acts", "all") else None
        trajectory = (
            analytics.trajectory_stats(corpus) if table in ("trajectory", "all") else None
        )
    except GroundworkError as exc:
        raise click.ClickException(str(exc)) from None

    if as_json:
        payload: dict = {}
        if histogram:
            payload["acts"] = {
                "counts": {a.canonical_name: c for a, c in histogram.counts.items()},
                "total": histogram.total_acts,
                "percentages": {
                    a.canonical_name: p for a, p in histogram.percentages.items()
                },
            }
        if trajectory:
            payload["trajectory"] = {
                "grounded_in_next": trajectory.grounded_in_next_count,
                "max_span": trajectory.max_span,
                "revisits": trajectory.revisit_count,
                "revisit_gaps_seconds": trajectory.revisit_gaps_seconds,
                "ambiguous": trajectory.ambiguous_count,
                "span_histogram": {
                    str(k): v for k, v in trajectory.span_histogram.items()
                },
                "flags": {f.value: c for f, c in trajectory.flag_census.items()},
            }
        click.echo(json.dumps(payload, ensure_ascii=False, indent=2))
        return
    chunks = []
    if histogram:
        chunks.append(_acts_table(histogram))
    if trajectory:
        chunks.append(_trajectory_table(trajectory))
    click.echo("\n".join(chunks), nl=False)


@main.command()
@click.argument("file_a", type=click.Path(exists=True, dir_okay=False))
@click.argument("file_b", type=click.Path(exists=True, dir_okay=False))
def kappa(file_a: str, file_b: str) -> None:
    """Inter-rater agreement between two annotations of the same dialogs.

    Uses each utterance's primary (first-listed) act.
    """
    corpus_a = _read(file_a, None)
    corpus_b = _read(file_b, None)
    by_id = {d.dialog_id: d for d in corpus_b.dialogs}
    if set(by_id) != {d.dialog_id for d in corpus_a.dialogs}:
        raise click.ClickException("the two files annotate different dialogs")
    seq_a: list[str] = []
    seq_b: list[str] = []
    for dialog_a in corpus_a.dialogs:
        dialog_b = by_id[dialog_a.dialog_id]
        labels_a = dialog_a.labels_by_utterance()
        labels_b = dialog_b.labels_by_utterance()
        if len(dialog_a.utterances) != len(dialog_b.utterances):
            raise click.ClickException(
                f"dialog {dialog_a.dialog_id!r} differs in utterance count"
            )
        for utt in dialog_a.utterances:
            seq_a.append(_primary_act(labels_a.get(utt.id)))
            seq_b.append(_primary_act(labels_b.get(utt.id)))
    try:
        value = analytics.cohen_kappa(seq_a, seq_b)
    except GroundworkError as exc:
        raise click.ClickException(str(exc)) from None
    click.echo(f"kappa: {value:.4f} (n={len(seq_a)})")


def _primary_act(labels) -> str:
    if not labels:
        return GroundingAct.NONE.canonical_name
    return labels[0].act.canonical_name


@main.command()
@click.argument("input", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "-o", type=click.Path(dir_okay=False), default=None, help="Output path (default: stdout).")
@click.option("--special-token", default=dataset.SPECIAL_TOKEN, show_default=True)
@click.option("--separator", default=dataset.SEPARATOR, show_default=True)
@click.option("--max-history", type=int, default=None, help="Keep only the last N history utterances.")
def encode(
    input: str,
    out: str | None,
    special_token: str,
    separator: str,
    max_history: int | None,
) -> None:
    """Emit classifier instances, one JSON object per line."""
    corpus = _read(input, None)
    try:
        instances = dataset.build_instances(
            corpus,
            special_token=special_token,
            separator=separator,
            max_history=max_history,
        )
    except GroundworkError as exc:
        raise click.ClickException(str(exc)) from None
    text = "".join(
        json.dumps(
            {
                "input": inst.input_text,
                "label": inst.label.canonical_name if inst.label else None,
                "dialog_id": inst.dialog_id,
                "utt_id": inst.utt_id,
                "focal": inst.focal_cgu,
            },
            ensure_ascii=False,
        )
        + "\n"
        for inst in instances
    )
    _emit(text, out)


@main.command()
@click.argument("input", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(file_okay=False), required=True, help="Directory for train/dev/test files.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--ratios", default="70:15:15", show_default=True)
def split(input: str, out: str, seed: int, ratios: str) -> None:
    """Stratified split of an instance file, plus training class weights."""
    try:
        shares = [int(part) for part in ratios.split(":")]
    except ValueError:
        raise click.UsageError(f"bad ratios {ratios!r}; expected like 70:15:15")
    with open(input, encoding="utf-8") as handle:
        instances = [json.loads(line) for line in handle if line.strip()]
    try:
        train, dev, test = dataset.stratified_split(instances, shares, seed=seed)
        weights = dataset.class_weights(train)
    except (GroundworkError, ValueError) as exc:
        raise click.ClickException(str(exc)) from None
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, part in (("train", train), ("dev", dev), ("test", test)):
        (out_dir / f"{name}.jsonl").write_text(
            "".join(json.dumps(item, ensure_ascii=False) + "\n" for item in part),
            encoding="utf-8",
        )
    (out_dir / "class_weights.json").write_text(
        json.dumps({str(k): v for k, v in sorted(weights.items())}, indent=2) + "\n",
        encoding="utf-8",
    )
    click.echo(
        f"train {len(train)}, dev {len(dev)}, test {len(test)} -> {out_dir}"
    )


@main.command()
@click.option("--port", type=int, default=service.DEFAULT_PORT, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--data-dir", type=click.Path(file_okay=False), default="groundwork-data", show_default=True)
@click.option("--static-dir", type=click.Path(file_okay=False), default=None, help="Built annotation UI to host at /.")
def serve(port: int, host: str, data_dir: str, static_dir: str | None) -> None:
    """Run the live annotation service."""
    import uvicorn

    if static_dir is None:
        # source checkout layout: <root>/src/groundwork/cli.py, <root>/frontend/dist
        bundled = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        if bundled.is_dir():
            static_dir = str(bundled)
    app = service.create_app(data_dir, static_dir)
    level = os.environ.get("GROUNDWORK_LOG", "info").lower()
    uvicorn.run(app, host=host, port=port, log_level=level)


if __name__ == "__main__":
    main()
