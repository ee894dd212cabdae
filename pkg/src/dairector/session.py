"""Live-show sessions: a replayable state machine over the story engine.

A session is fully determined by (seed, request/prompt sequence). The RNG
is a `random.Random` whose state is serialized into every snapshot, so a
loaded session continues exactly like an uninterrupted one. Wall-clock
timestamps are recorded for operators but excluded from the canonical
transcript encoding that the replay tests compare byte-for-byte.
"""

from __future__ import annotations

import hashlib
import json
import random
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import PlotGraph, TropeCorpus
from .embedding import EmbeddingModel
from .engine import (
    PlotTreeNode,
    TiltResult,
    generate_plot_tree,
    next_platform,
    render_fragment,
    select_tilt,
    validate_name_map,
)

KIND_PLATFORM = "platform"
KIND_TILT = "tilt"
KIND_ENDED = "ended"

ENDED_TEXT = "THE END"

SNAPSHOT_VERSION = 1


class SessionError(Exception):
    """Invalid session request."""


class SessionNotFound(SessionError):
    """No stored session under the given id."""


class ArtifactMismatch(SessionError):
    """Stored session belongs to different corpus/model content."""


@dataclass(frozen=True)
class TranscriptEntry:
    seq: int
    kind: str
    text: str
    fragment_id: str | None = None
    tilt: TiltResult | None = None
    prompt_used: str | None = None
    timestamp: float = 0.0

    def to_dict(self, with_timestamp: bool = True) -> dict:
        payload: dict = {
            "seq": self.seq,
            "kind": self.kind,
            "text": self.text,
            "fragment_id": self.fragment_id,
            "prompt_used": self.prompt_used,
            "tilt": None,
        }
        if self.tilt is not None:
            payload["tilt"] = {
                "chosen": self.tilt.chosen,
                "candidates": [[n, d] for n, d in self.tilt.candidates],
                "filtered_out": [[n, list(w)] for n, w in self.tilt.filtered_out],
            }
        if with_timestamp:
            payload["timestamp"] = self.timestamp
        return payload

    @classmethod
    def from_dict(cls, data: dict) -> TranscriptEntry:
        tilt = None
        if data.get("tilt") is not None:
            raw = data["tilt"]
            tilt = TiltResult(
                chosen=raw["chosen"],
                candidates=tuple((n, d) for n, d in raw["candidates"]),
                filtered_out=tuple((n, tuple(w)) for n, w in raw["filtered_out"]),
            )
        return cls(
            seq=data["seq"],
            kind=data["kind"],
            text=data["text"],
            fragment_id=data.get("fragment_id"),
            tilt=tilt,
            prompt_used=data.get("prompt_used"),
            timestamp=data.get("timestamp", 0.0),
        )


def canonical_entry_dict(entry_dict: dict) -> dict:
    """Strip an entry dict down to its deterministic, replayable fields."""
    return {
        "seq": entry_dict["seq"],
        "kind": entry_dict["kind"],
        "text": entry_dict["text"],
        "fragment_id": entry_dict.get("fragment_id"),
        "prompt_used": entry_dict.get("prompt_used"),
        "tilt": entry_dict.get("tilt"),
    }


def canonical_transcript_bytes(entry_dicts: list[dict]) -> bytes:
    """Canonical encoding compared byte-for-byte across front-ends."""
    canon = [canonical_entry_dict(e) for e in entry_dicts]
    return json.dumps(canon, sort_keys=True, separators=(",", ":")).encode("utf-8")


@dataclass(frozen=True)
class SessionConfig:
    max_depth: int = 6
    seed: int | None = None
    root: str | None = None


@dataclass
class Session:
    id: str
    graph: PlotGraph
    tropes: TropeCorpus
    model: EmbeddingModel
    names: dict[str, str]
    config: SessionConfig
    tree: PlotTreeNode
    current: PlotTreeNode
    rng: random.Random
    transcript: list[TranscriptEntry] = field(default_factory=list)
    ended: bool = False
    created: float = 0.0
    updated: float = 0.0

    @property
    def root_id(self) -> str:
        return self.tree.fragment_id

    def current_path(self) -> list[str]:
        """Fragment ids of the platform beats, root first."""
        return [e.fragment_id for e in self.transcript
                if e.kind == KIND_PLATFORM and e.fragment_id is not None]

    def canonical_transcript(self) -> bytes:
        return canonical_transcript_bytes(
            [e.to_dict(with_timestamp=False) for e in self.transcript]
        )


def create_session(graph: PlotGraph, tropes: TropeCorpus,
                   model: EmbeddingModel, names: dict[str, str],
                   config: SessionConfig = SessionConfig()) -> Session:
    """Build the plot tree, take its root as the first beat."""
    validate_name_map(names)
    rng = random.Random(config.seed)
    tree = generate_plot_tree(graph, config.root, config.max_depth, rng)
    now = time.time()
    session = Session(
        id=uuid.uuid4().hex,
        graph=graph,
        tropes=tropes,
        model=model,
        names=names,
        config=config,
        tree=tree,
        current=tree,
        rng=rng,
        created=now,
        updated=now,
    )
    _append_platform_entry(session, tree, prompt=None)
    return session


def _append_platform_entry(session: Session, node: PlotTreeNode,
                           prompt: str | None) -> TranscriptEntry:
    fragment = session.graph.fragments[node.fragment_id]
    rendered = render_fragment(fragment, node.accumulated_subs, session.names)
    entry = TranscriptEntry(
        seq=len(session.transcript),
        kind=KIND_PLATFORM,
        text=rendered.text,
        fragment_id=node.fragment_id,
        prompt_used=prompt,
        timestamp=time.time(),
    )
    session.transcript.append(entry)
    session.current = node
    session.updated = entry.timestamp
    return entry


def _platform_text(session: Session) -> str:
    for entry in reversed(session.transcript):
        if entry.kind == KIND_PLATFORM:
            return entry.text
    raise SessionError("no platform beat in transcript")


def handle_request(session: Session, request: str,
                   prompt: str | None = None) -> TranscriptEntry:
    """Advance the show by one platform beat or one tilt.

    The context is the prompt when one is given, otherwise the current
    platform. Tilts never move the platform and stay available after the
    story has ended; platform requests on an ended story are an error.
    """
    if prompt is not None and not prompt.strip():
        prompt = None

    if request == KIND_PLATFORM:
        if session.ended:
            raise SessionError("story has ended; platform requests are closed")
        context_doc = None if prompt else f"frag:{session.current.fragment_id}"
        context = prompt if prompt else _platform_text(session)
        child = next_platform(session.model, session.current, context,
                              context_doc_id=context_doc)
        if child is None:
            entry = TranscriptEntry(
                seq=len(session.transcript),
                kind=KIND_ENDED,
                text=ENDED_TEXT,
                prompt_used=prompt,
                timestamp=time.time(),
            )
            session.transcript.append(entry)
            session.ended = True
            session.updated = entry.timestamp
            return entry
        return _append_platform_entry(session, child, prompt)

    if request == KIND_TILT:
        result = select_tilt(
            session.model,
            corpus=session.tropes,
            platform_text=_platform_text(session),
            rng=session.rng,
            prompt=prompt,
            context_doc_id=None if prompt else f"frag:{session.current.fragment_id}",
        )
        entry = TranscriptEntry(
            seq=len(session.transcript),
            kind=KIND_TILT,
            text=result.chosen,
            tilt=result,
            prompt_used=prompt,
            timestamp=time.time(),
        )
        session.transcript.append(entry)
        session.updated = entry.timestamp
        return entry

    raise SessionError(f"unknown request kind {request!r} "
                       f"(expected {KIND_PLATFORM!r} or {KIND_TILT!r})")


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def model_fingerprint(model: EmbeddingModel) -> str:
    """Content hash binding a session to the exact trained weights."""
    digest = hashlib.sha256()
    digest.update(json.dumps(model.config.to_dict(), sort_keys=True).encode())
    for array in (model.word_vectors, model.doc_vectors, model.output_weights):
        digest.update(array.tobytes())
    return digest.hexdigest()


def _encode_rng_state(state) -> list:
    version, internal, gauss = state
    return [version, list(internal), gauss]


def _decode_rng_state(data) -> tuple:
    version, internal, gauss = data
    return (version, tuple(internal), gauss)


class SessionStore:
    """Per-session directory of an append-only event log plus a snapshot.

    Layout: <root>/sessions/<id>/events.jsonl and snapshot.json. The
    snapshot alone is sufficient to resume; the event log is the audit
    trail of every request ever made.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)

    def _session_dir(self, session_id: str) -> Path:
        return self.root / "sessions" / session_id

    def list_ids(self) -> list[str]:
        base = self.root / "sessions"
        if not base.is_dir():
            return []
        return sorted(p.name for p in base.iterdir() if p.is_dir())

    def append_event(self, session_id: str, payload: dict) -> None:
        path = self._session_dir(session_id) / "events.jsonl"
        path.parent.mkdir(parents=True, exist_ok=True)
        line = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        with open(path, "a", encoding="utf-8") as fh:
            fh.write(line + "\n")

    def save(self, session: Session) -> None:
        snapshot = {
            "version": SNAPSHOT_VERSION,
            "id": session.id,
            "created": session.created,
            "updated": session.updated,
            "config": {
                "max_depth": session.config.max_depth,
                "seed": session.config.seed,
                "root": session.config.root,
            },
            "resolved_root": session.root_id,
            "current_path": session.current_path(),
            "ended": session.ended,
            "rng_state": _encode_rng_state(session.rng.getstate()),
            "names": session.names,
            "plot_corpus_hash": session.graph.content_hash(),
            "trope_corpus_hash": session.tropes.content_hash(),
            "model_fingerprint": model_fingerprint(session.model),
            "transcript": [e.to_dict() for e in session.transcript],
        }
        target = self._session_dir(session.id) / "snapshot.json"
        target.parent.mkdir(parents=True, exist_ok=True)
        tmp = target.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(snapshot, sort_keys=True, indent=1),
                       encoding="utf-8")
        tmp.replace(target)

    def load(self, session_id: str, graph: PlotGraph, tropes: TropeCorpus,
             model: EmbeddingModel) -> Session:
        """Resume a stored session against the same artifacts it was built on.

        Raises:
            SessionNotFound: no snapshot under that id.
            ArtifactMismatch: corpus or model content differs from the
                hashes recorded at save time.
        """
        path = self._session_dir(session_id) / "snapshot.json"
        if not path.is_file():
            raise SessionNotFound(f"no stored session {session_id!r}")
        snapshot = json.loads(path.read_text(encoding="utf-8"))
        if snapshot.get("version") != SNAPSHOT_VERSION:
            raise SessionError(
                f"unsupported snapshot version {snapshot.get('version')!r}"
            )
        if snapshot["plot_corpus_hash"] != graph.content_hash():
            raise ArtifactMismatch("plot corpus content changed since save")
        if snapshot["trope_corpus_hash"] != tropes.content_hash():
            raise ArtifactMismatch("trope corpus content changed since save")
        if snapshot["model_fingerprint"] != model_fingerprint(model):
            raise ArtifactMismatch("model weights changed since save")

        config = SessionConfig(
            max_depth=snapshot["config"]["max_depth"],
            seed=snapshot["config"]["seed"],
            root=snapshot["config"]["root"],
        )
        rng = random.Random()
        rng.setstate(_decode_rng_state(snapshot["rng_state"]))
        # root is pinned in the snapshot, so rebuilding consumes no rng draws
        tree = generate_plot_tree(graph, snapshot["resolved_root"],
                                  config.max_depth, rng)
        node = tree
        for fragment_id in snapshot["current_path"][1:]:
            node = next(c for c in node.children if c.fragment_id == fragment_id)

        session = Session(
            id=snapshot["id"],
            graph=graph,
            tropes=tropes,
            model=model,
            names=snapshot["names"],
            config=config,
            tree=tree,
            current=node,
            rng=rng,
            transcript=[TranscriptEntry.from_dict(e)
                        for e in snapshot["transcript"]],
            ended=snapshot["ended"],
            created=snapshot["created"],
            updated=snapshot["updated"],
        )
        return session
