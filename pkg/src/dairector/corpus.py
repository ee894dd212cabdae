"""Plot-fragment and trope corpora: parsing, validation, link graphs.

Two input formats are supported for plot corpora: a canonical JSON form
and a line-oriented DSL convenient for hand-authored fixtures::

    FRAG 746: B, thought to have supernatural powers, ...
    -> 1441a ch A to B
    -> 1373 ch A to B

Trope corpora are JSON only; cross-links are precomputed into the file
(no wiki-markup parsing happens here). Loaded corpora are immutable and
safe to share across any number of concurrent sessions.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from typing import IO, Iterable


class CorpusError(Exception):
    """Invalid corpus content (duplicate ids, dangling references, ...)."""


class PlottoParseError(CorpusError):
    """Syntax error in the plot-corpus DSL, with source position."""

    def __init__(self, message: str, line: int, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


# ---------------------------------------------------------------------------
# Character symbols
# ---------------------------------------------------------------------------

DEFAULT_SYMBOL_NAMES = ("A", "B", "AUX")
_GENERIC_CODE = r"[A-Z]{2,3}"


class SymbolAlphabet:
    """Character-symbol matcher: explicit names plus generic uppercase codes.

    Symbols match only as standalone tokens, delimited by non-alphanumeric
    characters, so the "A" in "About" never matches. The default alphabet
    is {A, B, AUX} plus any two-to-three-letter uppercase code.
    """

    def __init__(self, names: Iterable[str] = DEFAULT_SYMBOL_NAMES,
                 generic_code_pattern: str | None = _GENERIC_CODE):
        self.names = tuple(names)
        self.generic_code_pattern = generic_code_pattern
        parts = [re.escape(n) for n in sorted(self.names, key=len, reverse=True)]
        if generic_code_pattern:
            parts.append(generic_code_pattern)
        alternation = "|".join(parts)
        # (?<![0-9A-Za-z]) boundaries instead of \b: symbols end at any
        # non-alphanumeric character, including hyphens and apostrophes.
        self._rx = re.compile(
            rf"(?<![0-9A-Za-z])(?:{alternation})(?![0-9A-Za-z])"
        )

    def finditer(self, text: str):
        return self._rx.finditer(text)

    def extract(self, text: str) -> frozenset[str]:
        """All symbols occurring in text as standalone tokens."""
        return frozenset(m.group(0) for m in self._rx.finditer(text))

    def matches(self, token: str) -> bool:
        m = self._rx.fullmatch(token)
        return m is not None

    def substitute(self, text: str, repl) -> str:
        """Rewrite each symbol occurrence through repl(match)."""
        return self._rx.sub(repl, text)


DEFAULT_ALPHABET = SymbolAlphabet()


# ---------------------------------------------------------------------------
# Plot graph types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PlotFragment:
    """One abstract plot point; `symbols` are the character codes in `text`."""

    id: str
    text: str
    symbols: frozenset[str]


@dataclass(frozen=True)
class SubstitutionEdge:
    """Directed fragment connection carrying symbol-renaming instructions.

    `substitutions` is an ordered list of (old, new) pairs that apply to
    the destination fragment and everything after it. Pairs within one
    edge rename simultaneously, so ("A","B"),("B","A") is a swap.
    """

    from_id: str
    to_id: str
    substitutions: tuple[tuple[str, str], ...] = ()

    def substitution_map(self) -> dict[str, str]:
        return dict(self.substitutions)


@dataclass(frozen=True)
class PlotGraph:
    fragments: dict[str, PlotFragment]
    edges: tuple[SubstitutionEdge, ...]
    adjacency: dict[str, tuple[SubstitutionEdge, ...]] = field(default_factory=dict)

    def __post_init__(self):
        adjacency: dict[str, list[SubstitutionEdge]] = {fid: [] for fid in self.fragments}
        for edge in self.edges:
            adjacency[edge.from_id].append(edge)
        object.__setattr__(
            self, "adjacency", {fid: tuple(out) for fid, out in adjacency.items()}
        )

    def successors(self, fragment_id: str) -> tuple[SubstitutionEdge, ...]:
        return self.adjacency[fragment_id]

    def terminal_ids(self) -> list[str]:
        return [fid for fid, out in self.adjacency.items() if not out]

    def non_terminal_ids(self) -> list[str]:
        return [fid for fid, out in self.adjacency.items() if out]

    def to_json(self) -> str:
        """Canonical JSON form; parsing it back yields an equal graph."""
        payload = {
            "fragments": [
                {"id": f.id, "text": f.text} for f in self.fragments.values()
            ],
            "edges": [
                {
                    "from": e.from_id,
                    "to": e.to_id,
                    "subs": [{"old": o, "new": n} for o, n in e.substitutions],
                }
                for e in self.edges
            ],
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))

    def content_hash(self) -> str:
        return hashlib.sha256(self.to_json().encode("utf-8")).hexdigest()


def _build_graph(fragments: list[tuple[str, str]],
                 edges: list[SubstitutionEdge],
                 alphabet: SymbolAlphabet) -> PlotGraph:
    if not fragments:
        raise CorpusError("no fragments")
    frag_map: dict[str, PlotFragment] = {}
    for fid, text in fragments:
        if not fid:
            raise CorpusError("empty fragment id")
        if fid in frag_map:
            raise CorpusError(f"duplicate fragment id: {fid!r}")
        frag_map[fid] = PlotFragment(id=fid, text=text, symbols=alphabet.extract(text))
    for edge in edges:
        for endpoint in (edge.from_id, edge.to_id):
            if endpoint not in frag_map:
                raise CorpusError(
                    f"edge {edge.from_id!r} -> {edge.to_id!r} references "
                    f"unknown fragment id {endpoint!r}"
                )
        seen_old: set[str] = set()
        for old, _ in edge.substitutions:
            if old in seen_old:
                raise CorpusError(
                    f"edge {edge.from_id!r} -> {edge.to_id!r} substitutes "
                    f"{old!r} more than once"
                )
            seen_old.add(old)
    return PlotGraph(fragments=frag_map, edges=tuple(edges))


# ---------------------------------------------------------------------------
# Plot corpus parsing
# ---------------------------------------------------------------------------

_FRAG_RX = re.compile(r"^FRAG\s+(?P<id>\S+)\s*:\s*(?P<text>.*\S)\s*$")
_EDGE_RX = re.compile(r"^->\s*(?P<to>\S+)\s*(?P<label>.*)$")
_SUB_RX = re.compile(r"^ch\s+(?P<old>\S+)\s+to\s+(?P<new>\S+)$")


def _parse_edge_label(label: str, line_no: int, column: int) -> tuple[tuple[str, str], ...]:
    label = label.strip()
    if not label:
        return ()
    subs = []
    for part in label.split(","):
        m = _SUB_RX.match(part.strip())
        if m is None:
            raise PlottoParseError(
                f"unrecognized substitution label {part.strip()!r} "
                "(expected 'ch <OLD> to <NEW>')",
                line_no,
                column,
            )
        subs.append((m.group("old"), m.group("new")))
    return tuple(subs)


def parse_plotto(source: IO[str] | str,
                 alphabet: SymbolAlphabet = DEFAULT_ALPHABET) -> PlotGraph:
    """Parse a plot corpus from the DSL or canonical-JSON text.

    The format is sniffed: input whose first non-blank character is "{"
    is treated as JSON. Parsing is deterministic; fragment and edge order
    follow the source, and adjacency preserves edge order.

    Raises:
        PlottoParseError: malformed DSL, with line/column.
        CorpusError: duplicate ids, unknown edge endpoints, empty corpus.
    """
    text = source if isinstance(source, str) else source.read()
    if text.lstrip()[:1] == "{":
        return _parse_plotto_json(text, alphabet)

    fragments: list[tuple[str, str]] = []
    edges: list[SubstitutionEdge] = []
    current_id: str | None = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("FRAG"):
            m = _FRAG_RX.match(line)
            if m is None:
                raise PlottoParseError("malformed FRAG record", line_no)
            current_id = m.group("id")
            fragments.append((current_id, m.group("text")))
        elif line.startswith("->"):
            if current_id is None:
                raise PlottoParseError("edge before any FRAG record", line_no)
            m = _EDGE_RX.match(line)
            if m is None or not m.group("to"):
                raise PlottoParseError("malformed edge record", line_no)
            label_col = raw.index("->") + len(m.group(0)) - len(m.group("label"))
            subs = _parse_edge_label(m.group("label"), line_no, label_col + 1)
            edges.append(SubstitutionEdge(current_id, m.group("to"), subs))
        else:
            raise PlottoParseError(
                f"unrecognized record {line.split()[0]!r}", line_no
            )
    return _build_graph(fragments, edges, alphabet)


def _parse_plotto_json(text: str, alphabet: SymbolAlphabet) -> PlotGraph:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PlottoParseError(exc.msg, exc.lineno, exc.colno) from exc
    try:
        fragments = [(f["id"], f["text"]) for f in payload["fragments"]]
        edges = [
            SubstitutionEdge(
                e["from"],
                e["to"],
                tuple((s["old"], s["new"]) for s in e.get("subs", [])),
            )
            for e in payload.get("edges", [])
        ]
    except (KeyError, TypeError) as exc:
        raise CorpusError(f"malformed plot corpus JSON: {exc}") from exc
    return _build_graph(fragments, edges, alphabet)


# ---------------------------------------------------------------------------
# Graph validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ValidationReport:
    """Report-only graph diagnostics; nothing here blocks loading.

    `vacuous_substitutions` lists (from, to, old_symbol) for edges whose
    old_symbol does not occur in the destination fragment; those renames
    may still matter further down a walk, hence warnings, not errors.
    """

    terminal_fragments: tuple[str, ...]
    unreachable_from_roots: tuple[str, ...]
    vacuous_substitutions: tuple[tuple[str, str, str], ...]

    @property
    def warning_count(self) -> int:
        return len(self.vacuous_substitutions)


def validate_graph(graph: PlotGraph) -> ValidationReport:
    """Diagnose terminals, root-unreachable fragments, vacuous renames.

    Roots are fragments with no incoming edges; in a fully cyclic graph
    there are none and every fragment is reported unreachable-from-roots
    (informational: such graphs remain perfectly walkable).
    """
    in_degree = {fid: 0 for fid in graph.fragments}
    for edge in graph.edges:
        in_degree[edge.to_id] += 1
    roots = [fid for fid, deg in in_degree.items() if deg == 0]

    reached: set[str] = set()
    frontier = list(roots)
    while frontier:
        fid = frontier.pop()
        if fid in reached:
            continue
        reached.add(fid)
        frontier.extend(e.to_id for e in graph.adjacency[fid])
    unreachable = tuple(fid for fid in graph.fragments if fid not in reached)

    vacuous = tuple(
        (edge.from_id, edge.to_id, old)
        for edge in graph.edges
        for old, _ in edge.substitutions
        if old not in graph.fragments[edge.to_id].symbols
    )
    return ValidationReport(
        terminal_fragments=tuple(graph.terminal_ids()),
        unreachable_from_roots=unreachable,
        vacuous_substitutions=vacuous,
    )


# ---------------------------------------------------------------------------
# Trope corpus
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Trope:
    name: str
    description: str
    links: frozenset[str]
    is_plot_trope: bool


@dataclass(frozen=True)
class TropeLoadReport:
    """Dangling cross-links dropped while loading a trope corpus."""

    dropped_links: tuple[tuple[str, str], ...]

    @property
    def dropped_count(self) -> int:
        return len(self.dropped_links)


@dataclass(frozen=True)
class TropeCorpus:
    tropes: dict[str, Trope]
    link_graph: dict[str, tuple[str, ...]]
    load_report: TropeLoadReport

    def neighbors(self, name: str) -> tuple[str, ...]:
        return self.link_graph[name]

    def to_json(self) -> str:
        payload = {
            "tropes": [
                {
                    "name": t.name,
                    "description": t.description,
                    "links": sorted(t.links),
                    "plot": t.is_plot_trope,
                }
                for t in self.tropes.values()
            ]
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))

    def content_hash(self) -> str:
        return hashlib.sha256(self.to_json().encode("utf-8")).hexdigest()


def load_trope_corpus(source: IO[str] | str) -> TropeCorpus:
    """Load tropes and build the undirected link graph.

    An edge (u, v) exists iff v is in u's links or u is in v's links.
    Links to names absent from the corpus are dropped and tallied in the
    load report rather than failing the load.

    Raises:
        CorpusError: unparseable input, malformed record, duplicate name.
    """
    text = source if isinstance(source, str) else source.read()
    try:
        payload = json.loads(text)
        records = payload["tropes"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise CorpusError(f"malformed trope corpus: {exc}") from exc

    tropes: dict[str, Trope] = {}
    raw_links: dict[str, list[str]] = {}
    for record in records:
        try:
            name = record["name"]
            description = record["description"]
            links = list(record.get("links", []))
            is_plot = bool(record.get("plot", False))
        except (KeyError, TypeError) as exc:
            raise CorpusError(f"malformed trope record: {record!r}") from exc
        if not name:
            raise CorpusError("empty trope name")
        if name in tropes:
            raise CorpusError(f"duplicate trope name: {name!r}")
        # links resolved in a second pass, once all names are known
        tropes[name] = Trope(name, description, frozenset(), is_plot)
        raw_links[name] = links

    dropped: list[tuple[str, str]] = []
    adjacency: dict[str, set[str]] = {name: set() for name in tropes}
    for name, links in raw_links.items():
        kept = set()
        for target in links:
            if target in tropes:
                kept.add(target)
                if target != name:
                    adjacency[name].add(target)
                    adjacency[target].add(name)
            else:
                dropped.append((name, target))
        tropes[name] = Trope(
            name, tropes[name].description, frozenset(kept), tropes[name].is_plot_trope
        )

    return TropeCorpus(
        tropes=tropes,
        link_graph={name: tuple(sorted(nbrs)) for name, nbrs in adjacency.items()},
        load_report=TropeLoadReport(dropped_links=tuple(dropped)),
    )


def plot_trope_subset(corpus: TropeCorpus) -> set[str]:
    """Names of tropes flagged as plot tropes: the tilt candidate pool."""
    return {name for name, trope in corpus.tropes.items() if trope.is_plot_trope}
