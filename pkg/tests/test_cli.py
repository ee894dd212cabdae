"""End-to-end CLI runs through click's test runner."""
import json

import pytest
from click.testing import CliRunner

from dairector.cli import main
from dairector.embedding import load_model
from dairector.session import SessionStore

runner = CliRunner()


def _args(data_dir, model_file, *extra):
    return [
        "--plot-corpus", str(data_dir / "plotto_excerpt.plotto"),
        "--trope-corpus", str(data_dir / "tropes.json"),
        "--model", str(model_file),
        "--names", str(data_dir / "names.json"),
        *extra,
    ]


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

def test_train_writes_loadable_model(data_dir, tmp_path):
    out = tmp_path / "tiny.dvec"
    result = runner.invoke(main, [
        "train",
        "--plot-corpus", str(data_dir / "three_node.plotto"),
        "--trope-corpus", str(data_dir / "tropes.json"),
        "--out", str(out),
        "--seed", "3",
        "--epochs", "2",
    ])
    assert result.exit_code == 0, result.output
    assert "trained 50 docs" in result.output
    assert "epochs 2" in result.output
    model = load_model(out)
    assert model.config.seed == 3
    assert len(model.loss_curve) == 2


def test_train_notes_vacuous_substitutions(data_dir, tmp_path):
    result = runner.invoke(main, [
        "train",
        "--plot-corpus", str(data_dir / "plotto_excerpt.plotto"),
        "--trope-corpus", str(data_dir / "tropes.json"),
        "--out", str(tmp_path / "m.dvec"),
        "--epochs", "1",
    ])
    assert result.exit_code == 0, result.output
    assert "vacuous substitution" in result.output


# ---------------------------------------------------------------------------
# story
# ---------------------------------------------------------------------------

def test_story_prints_numbered_beats(data_dir, model_file):
    result = runner.invoke(main, ["story"] + _args(
        data_dir, model_file, "--seed", "5", "--length", "4"))
    assert result.exit_code == 0, result.output
    lines = [l for l in result.output.splitlines() if l]
    assert lines[0].startswith("1. ")
    assert 1 <= len(lines) <= 4


def test_story_deterministic_for_seed(data_dir, model_file):
    args = ["story"] + _args(data_dir, model_file,
                             "--seed", "5", "--count", "2")
    a = runner.invoke(main, args)
    b = runner.invoke(main, args)
    assert a.exit_code == 0, a.output
    assert a.output == b.output
    # two stories separated by a blank line
    assert "\n\n" in a.output


# ---------------------------------------------------------------------------
# console
# ---------------------------------------------------------------------------

def test_console_scripted_session(data_dir, model_file):
    result = runner.invoke(
        main,
        ["console"] + _args(data_dir, model_file,
                            "--seed", "7", "--root", "101"),
        input="platform\ntilt\ntilt: ghosts of the rigging\nquit\n",
    )
    assert result.exit_code == 0, result.output
    out = result.output
    assert out.startswith("session ")
    assert "[0] PLATFORM:" in out
    assert "[1] PLATFORM:" in out
    assert "[2] TILT:" in out
    assert "[3] TILT:" in out
    assert out.count("candidate:") == 10


def test_console_unknown_command_shows_help(data_dir, model_file):
    result = runner.invoke(
        main,
        ["console"] + _args(data_dir, model_file,
                            "--seed", "7", "--root", "101"),
        input="interpretive dance\nquit\n",
    )
    assert result.exit_code == 0
    assert "Commands:" in result.output


def test_console_persists_to_store(data_dir, model_file, tmp_path):
    result = runner.invoke(
        main,
        ["console"] + _args(data_dir, model_file,
                            "--seed", "7", "--root", "101",
                            "--store", str(tmp_path)),
        input="tilt\nquit\n",
    )
    assert result.exit_code == 0, result.output
    session_id = result.output.splitlines()[0].split()[1]
    store = SessionStore(tmp_path)
    assert store.list_ids() == [session_id]
    events = (tmp_path / "sessions" / session_id / "events.jsonl") \
        .read_text().splitlines()
    assert json.loads(events[0])["type"] == "created"
    assert json.loads(events[1]) == {
        "type": "request", "request": "tilt", "prompt": None, "seq": 1,
    }


def test_console_stops_at_the_end(data_dir, model_file):
    result = runner.invoke(
        main,
        ["console"] + _args(data_dir, model_file,
                            "--seed", "7", "--root", "113"),
        input="platform\nplatform\nplatform\n",
    )
    assert result.exit_code == 0, result.output
    assert "THE END" in result.output
    # the loop exits at the ended beat; later lines are never consumed
    assert result.output.count("PLATFORM:") == 1


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

def test_eval_writes_report(data_dir, model_file, tmp_path):
    report_path = tmp_path / "report.json"
    result = runner.invoke(main, [
        "eval",
        "--model", str(model_file),
        "--tropes", str(data_dir / "tropes.json"),
        "--pairs", str(data_dir / "pairs.jsonl"),
        "--report", str(report_path),
        "--baseline-samples", "50",
    ])
    assert result.exit_code == 0, result.output
    assert "top-1 error:" in result.output
    assert "top-5 error:" in result.output
    payload = json.loads(report_path.read_text())
    assert payload["version"] == 1
    assert payload["pair_count"] == 12


def test_eval_rejects_mismatched_tropes(data_dir, model_file, tmp_path):
    other = tmp_path / "other_tropes.json"
    other.write_text(json.dumps({"tropes": [
        {"name": "Alpha", "description": "first", "plot": True, "links": []},
        {"name": "Beta", "description": "second", "plot": True, "links": []},
    ]}))
    result = runner.invoke(main, [
        "eval",
        "--model", str(model_file),
        "--tropes", str(other),
        "--pairs", str(data_dir / "pairs.jsonl"),
        "--report", str(tmp_path / "r.json"),
    ])
    assert result.exit_code != 0
    assert "different trope corpus" in result.output


# ---------------------------------------------------------------------------
# serve (registration only; the HTTP behavior is covered via TestClient)
# ---------------------------------------------------------------------------

def test_serve_is_registered():
    result = runner.invoke(main, ["serve", "--help"])
    assert result.exit_code == 0
    assert "--port" in result.output
