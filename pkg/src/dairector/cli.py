"""Command-line entry points: train, story, console, serve, eval."""

from __future__ import annotations

import json
import random
import sys
from pathlib import Path

import click

from .artifacts import load_artifacts
from .corpus import load_trope_corpus, parse_plotto, validate_graph
from .embedding import (
    TrainingConfig,
    load_model,
    save_model,
    train_from_corpora,
)
from .engine import generate_story
from .evaluation import build_report, load_pairs
from .session import (
    KIND_ENDED,
    KIND_PLATFORM,
    KIND_TILT,
    SessionConfig,
    SessionStore,
    create_session,
    handle_request,
)

_ARTIFACT_OPTIONS = [
    click.option("--plot-corpus", "plot_corpus", required=True,
                 type=click.Path(exists=True, dir_okay=False),
                 help="Plot fragment corpus (DSL or JSON)."),
    click.option("--trope-corpus", "trope_corpus", required=True,
                 type=click.Path(exists=True, dir_okay=False),
                 help="Trope corpus JSON."),
    click.option("--model", "model_path", required=True,
                 type=click.Path(exists=True, dir_okay=False),
                 help="Trained embedding model file."),
    click.option("--names", "names_path", default=None,
                 type=click.Path(exists=True, dir_okay=False),
                 help="Character name map JSON (defaults built in)."),
]


def _with_artifact_options(command):
    for option in reversed(_ARTIFACT_OPTIONS):
        command = option(command)
    return command


@click.group()
def main() -> None:
    """Improv narrative co-direction engine."""


@main.command()
@click.option("--plot-corpus", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--trope-corpus", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--seed", default=1, show_default=True, type=int)
@click.option("--epochs", default=None, type=int,
              help="Training epochs (default from config: 40).")
def train(plot_corpus: str, trope_corpus: str, out_path: str, seed: int,
          epochs: int | None) -> None:
    """Train the paragraph-vector model over both corpora."""
    graph = parse_plotto(Path(plot_corpus).read_text(encoding="utf-8"))
    tropes = load_trope_corpus(Path(trope_corpus).read_text(encoding="utf-8"))
    report = validate_graph(graph)
    if report.warning_count:
        click.echo(f"note: {report.warning_count} vacuous substitution(s) "
                   "in plot corpus", err=True)
    config = TrainingConfig(seed=seed)
    if epochs is not None:
        config = TrainingConfig(seed=seed, epochs=epochs)
    model = train_from_corpora(graph, tropes, config)
    save_model(model, out_path)
    click.echo(f"trained {len(model.doc_ids)} docs, vocab {len(model.vocab)}, "
               f"dim {config.dim}, epochs {config.epochs} -> {out_path}")
    click.echo(f"loss: first epoch {model.loss_curve[0]:.4f}, "
               f"last epoch {model.loss_curve[-1]:.4f}")


@main.command()
@_with_artifact_options
@click.option("--seed", default=None, type=int, help="Walk RNG seed.")
@click.option("--length", default=5, show_default=True, type=int,
              help="Maximum beats per story.")
@click.option("--count", default=1, show_default=True, type=int,
              help="Number of stories to emit.")
def story(plot_corpus: str, trope_corpus: str, model_path: str,
          names_path: str | None, seed: int | None, length: int,
          count: int) -> None:
    """Sample complete stories as numbered beats."""
    artifacts = load_artifacts(plot_corpus, trope_corpus, model_path, names_path)
    rng = random.Random(seed)
    for story_index in range(count):
        if story_index:
            click.echo()
        beats = generate_story(artifacts.graph, artifacts.model,
                               artifacts.names, rng, length_limit=length)
        for number, beat in enumerate(beats, start=1):
            click.echo(f"{number}. {beat.text}")


CONSOLE_HELP = """Commands:
  platform            next story beat
  platform: <prompt>  next story beat steered by your prompt
  tilt                a trope to twist the scene
  tilt: <prompt>      a tilt steered by your prompt
  quit                leave the show"""


def _print_entry(entry) -> None:
    if entry.kind == KIND_PLATFORM:
        click.echo(f"[{entry.seq}] PLATFORM: {entry.text}")
    elif entry.kind == KIND_TILT:
        click.echo(f"[{entry.seq}] TILT: {entry.text}")
        for name, distance in entry.tilt.candidates:
            click.echo(f"      candidate: {name} ({distance:.4f})")
    else:
        click.echo(f"[{entry.seq}] {entry.text}")


@main.command()
@_with_artifact_options
@click.option("--seed", default=None, type=int)
@click.option("--root", default=None, help="Starting fragment id.")
@click.option("--max-depth", default=6, show_default=True, type=int)
@click.option("--store", "store_dir", default=None, envvar="DAIRECTOR_STORE",
              type=click.Path(file_okay=False),
              help="Session store directory (env: DAIRECTOR_STORE).")
def console(plot_corpus: str, trope_corpus: str, model_path: str,
            names_path: str | None, seed: int | None, root: str | None,
            max_depth: int, store_dir: str | None) -> None:
    """Run a show in the terminal."""
    artifacts = load_artifacts(plot_corpus, trope_corpus, model_path, names_path)
    store = SessionStore(store_dir) if store_dir else None
    session = create_session(
        artifacts.graph, artifacts.tropes, artifacts.model, artifacts.names,
        SessionConfig(max_depth=max_depth, seed=seed, root=root),
    )
    click.echo(f"session {session.id}")
    _print_entry(session.transcript[0])
    if store is not None:
        store.append_event(session.id, {
            "type": "created", "seed": seed, "root": root,
            "max_depth": max_depth,
        })
        store.save(session)

    interactive = sys.stdin.isatty()
    while True:
        if interactive:
            click.echo("> ", nl=False)
        line = sys.stdin.readline()
        if not line:
            break
        line = line.strip()
        if not line:
            continue
        if line == "quit":
            break
        kind, _, prompt = line.partition(":")
        kind = kind.strip()
        prompt = prompt.strip() or None
        if kind not in (KIND_PLATFORM, KIND_TILT):
            click.echo(CONSOLE_HELP)
            continue
        if kind == KIND_PLATFORM and session.ended:
            click.echo("the story has ended; only tilts remain")
            continue
        entry = handle_request(session, kind, prompt)
        if store is not None:
            store.append_event(session.id, {
                "type": "request", "request": kind, "prompt": prompt,
                "seq": entry.seq,
            })
            store.save(session)
        _print_entry(entry)
        if entry.kind == KIND_ENDED:
            break
    if store is not None:
        store.save(session)


@main.command()
@_with_artifact_options
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
@click.option("--store", "store_dir", default=None, envvar="DAIRECTOR_STORE",
              type=click.Path(file_okay=False),
              help="Session store directory (env: DAIRECTOR_STORE).")
def serve(plot_corpus: str, trope_corpus: str, model_path: str,
          names_path: str | None, host: str, port: int,
          store_dir: str | None) -> None:
    """Serve the HTTP API for the performer console."""
    import uvicorn

    from .service import create_app

    artifacts = load_artifacts(plot_corpus, trope_corpus, model_path, names_path)
    store = SessionStore(store_dir) if store_dir else None
    app = create_app(artifacts, store)
    uvicorn.run(app, host=host, port=port, log_level="warning")


@main.command(name="eval")
@click.option("--model", "model_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--tropes", "trope_corpus", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--pairs", "pairs_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--n", default=5, show_default=True, type=int)
@click.option("--report", "report_path", required=True,
              type=click.Path(dir_okay=False))
@click.option("--seed", default=1, show_default=True, type=int,
              help="Baseline sampling seed.")
@click.option("--baseline-samples", default=200, show_default=True, type=int)
@click.option("--subset", is_flag=True,
              help="Compute the baseline over plot tropes only.")
def eval_command(model_path: str, trope_corpus: str, pairs_path: str, n: int,
                 report_path: str, seed: int, baseline_samples: int,
                 subset: bool) -> None:
    """Score labelled fragment-trope pairs and write a JSON report."""
    tropes = load_trope_corpus(Path(trope_corpus).read_text(encoding="utf-8"))
    expected = tropes.content_hash()
    model = load_model(model_path)
    if model.trope_corpus_hash and model.trope_corpus_hash != expected:
        raise click.ClickException(
            "model was trained on different trope corpus content"
        )
    pairs = load_pairs(Path(pairs_path).read_text(encoding="utf-8"))
    report = build_report(model, tropes, pairs, n=n,
                          baseline_samples=baseline_samples, seed=seed,
                          plot_subset_only=subset)
    Path(report_path).write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    click.echo(f"pairs scored: {len(report.records)} "
               f"(rejected: {len(report.rejected)})")
    click.echo(f"top-1 error: {report.top1_error:.3f}")
    click.echo(f"top-{n} error: {report.top5_error:.3f}")
    if report.tilt_distance_stats is not None:
        stats = report.tilt_distance_stats
        click.echo(f"miss link distance: median {stats.median:.1f}, "
                   f"mean {stats.mean:.3f}, stddev {stats.stddev:.3f}")
    if report.baseline is not None:
        base = report.baseline
        click.echo(f"random-pair baseline: median {base.median:.1f}, "
                   f"mean {base.mean:.3f}, stddev {base.stddev:.3f}")
    click.echo(f"report -> {report_path}")


if __name__ == "__main__":
    main()
