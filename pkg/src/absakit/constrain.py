"""Scheme-guided constrained-decoding automaton over abstract token ids.

The automaton classifies a generated prefix into a small set of state classes
and returns the admissible next-token set for each: brackets and marker
letters are forced in sequence, element content is restricted to a per-marker
candidate collection, and end-of-sequence is admitted only after the last
marker's content. Marker structure is the three-token form ``[`` letter ``]``;
integrators choose the concrete ids via :class:`SpecialTokens`.

Content can be constrained as a bag (any admissible token, any order) or as a
trie of exact phrases. Bag mode is the default; trie mode is stricter.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .model import ALL_MARKERS

SEP_SYMBOL = ";"

BAG = "bag"
TRIE = "trie"


class InvalidSessionConfig(ValueError):
    """Session configuration violates an invariant (overlapping ids, etc.)."""


class IllFormedPrefix(ValueError):
    """The prefix could not have been produced under this session's constraints."""


class DeadEnd(RuntimeError):
    """No token is admissible; only reachable through a misconfigured session."""


@dataclass(frozen=True)
class SpecialTokens:
    """Ids of the structural tokens: brackets, marker letters, separator, eos."""

    open: int
    close: int
    sep: int
    eos: int
    letters: Mapping[str, int]

    def __post_init__(self) -> None:
        object.__setattr__(self, "letters", dict(self.letters))
        for marker in self.letters:
            if marker not in ALL_MARKERS:
                raise InvalidSessionConfig(f"unknown marker letter {marker!r}")
        ids = [self.open, self.close, self.sep, self.eos, *self.letters.values()]
        if len(set(ids)) != len(ids):
            raise InvalidSessionConfig(f"special token ids must be pairwise distinct: {ids}")

    def all_ids(self) -> frozenset[int]:
        return frozenset((self.open, self.close, self.sep, self.eos, *self.letters.values()))


class TrieNode:
    """One position inside a phrase trie; ``is_end`` marks a phrase boundary."""

    __slots__ = ("children", "is_end")

    def __init__(self) -> None:
        self.children: dict[int, TrieNode] = {}
        self.is_end = False


def build_trie(phrases: Iterable[Sequence[int]]) -> TrieNode:
    root = TrieNode()
    for phrase in phrases:
        if not phrase:
            raise InvalidSessionConfig("trie phrases must be non-empty")
        node = root
        for token in phrase:
            node = node.children.setdefault(token, TrieNode())
        node.is_end = True
    return root


@dataclass(frozen=True)
class CandidateSets:
    """Per-marker content constraint: token bags, or phrase tries.

    In bag mode only ``content`` is consulted; in trie mode the tries built
    from ``phrases`` are. Bags must be non-empty; phrases non-empty with no
    empty phrase.
    """

    mode: str = BAG
    content: Mapping[str, frozenset[int]] = field(default_factory=dict)
    phrases: Mapping[str, tuple[tuple[int, ...], ...]] = field(default_factory=dict)
    tries: Mapping[str, TrieNode] = field(default=None, compare=False, repr=False)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.mode not in (BAG, TRIE):
            raise InvalidSessionConfig(f"mode must be '{BAG}' or '{TRIE}': {self.mode!r}")
        object.__setattr__(
            self, "content", {m: frozenset(ids) for m, ids in self.content.items()}
        )
        object.__setattr__(
            self,
            "phrases",
            {m: tuple(tuple(p) for p in ps) for m, ps in self.phrases.items()},
        )
        if self.mode == BAG:
            for marker, ids in self.content.items():
                if not ids:
                    raise InvalidSessionConfig(f"empty content set for marker {marker!r}")
            object.__setattr__(self, "tries", {})
        else:
            for marker, ps in self.phrases.items():
                if not ps:
                    raise InvalidSessionConfig(f"no phrases for marker {marker!r}")
            object.__setattr__(
                self, "tries", {m: build_trie(ps) for m, ps in self.phrases.items()}
            )

    def markers(self) -> frozenset[str]:
        return frozenset(self.content if self.mode == BAG else self.phrases)

    def all_content_ids(self) -> frozenset[int]:
        if self.mode == BAG:
            return frozenset(t for ids in self.content.values() for t in ids)
        return frozenset(t for ps in self.phrases.values() for p in ps for t in p)


@dataclass(frozen=True)
class ConstraintSession:
    """Immutable configuration of the automaton for one input sentence/task."""

    marker_order: tuple[str, ...]
    specials: SpecialTokens
    candidates: CandidateSets
    allow_empty: bool = False
    max_len: int = 256

    def __post_init__(self) -> None:
        object.__setattr__(self, "marker_order", tuple(self.marker_order))
        if not self.marker_order:
            raise InvalidSessionConfig("marker_order must be non-empty")
        positions = [ALL_MARKERS.index(m) for m in self.marker_order if m in ALL_MARKERS]
        if len(positions) != len(self.marker_order) or positions != sorted(set(positions)):
            raise InvalidSessionConfig(
                f"marker_order must be an ordered subset of {ALL_MARKERS}: {self.marker_order}"
            )
        missing = set(self.marker_order) - set(self.specials.letters)
        if missing:
            raise InvalidSessionConfig(f"specials.letters missing markers: {sorted(missing)}")
        missing = set(self.marker_order) - self.candidates.markers()
        if missing:
            raise InvalidSessionConfig(f"candidate sets missing markers: {sorted(missing)}")
        overlap = self.candidates.all_content_ids() & self.specials.all_ids()
        if overlap:
            raise InvalidSessionConfig(f"content ids overlap special ids: {sorted(overlap)}")
        if self.max_len < 1:
            raise InvalidSessionConfig("max_len must be positive")

    @property
    def first_marker(self) -> str:
        return self.marker_order[0]

    @property
    def last_marker(self) -> str:
        return self.marker_order[-1]

    def next_symbol(self, marker: str) -> str:
        """The symbol expected after ``[`` once ``marker``'s content is done."""
        idx = self.marker_order.index(marker)
        return self.marker_order[idx + 1] if idx + 1 < len(self.marker_order) else SEP_SYMBOL


class StateClass(Enum):
    START = "start"
    AWAIT_LETTER = "await_letter"
    AWAIT_CLOSE = "await_close"
    CONTENT = "content"
    AFTER_SEP = "after_sep"
    DONE = "done"


@dataclass(frozen=True)
class DecodeState:
    """Classification of a token prefix.

    ``symbol`` is the expected letter (or ``;``) in AWAIT_LETTER, the letter
    just opened in AWAIT_CLOSE, and the active marker in CONTENT. ``node``
    tracks the phrase position in trie mode.
    """

    kind: StateClass
    symbol: str | None = None
    has_content: bool = False
    node: TrieNode | None = field(default=None, compare=False)

    def __repr__(self) -> str:
        extra = f", {self.symbol}" if self.symbol else ""
        content = ", has_content" if self.has_content else ""
        return f"DecodeState({self.kind.value}{extra}{content})"


START_STATE = DecodeState(StateClass.START)


def _content_allowed(state: DecodeState, session: ConstraintSession) -> frozenset[int]:
    marker = state.symbol
    assert marker is not None
    if session.candidates.mode == BAG:
        base = session.candidates.content[marker]
        at_boundary = state.has_content
    else:
        node = state.node
        assert node is not None
        base = frozenset(node.children)
        at_boundary = node.is_end
    if not at_boundary:
        return base
    extra = {session.specials.open}
    if marker == session.last_marker:
        extra.add(session.specials.eos)
    return base | extra


def allowed_for_state(state: DecodeState, session: ConstraintSession) -> frozenset[int]:
    """The admissible next-token set for an already classified state."""
    specials = session.specials
    if state.kind is StateClass.START:
        allowed = {specials.open}
        if session.allow_empty:
            allowed.add(specials.eos)
        return frozenset(allowed)
    if state.kind is StateClass.AWAIT_LETTER:
        symbol = state.symbol
        return frozenset(
            {specials.sep if symbol == SEP_SYMBOL else specials.letters[symbol]}
        )
    if state.kind is StateClass.AWAIT_CLOSE:
        return frozenset({specials.close})
    if state.kind is StateClass.CONTENT:
        return _content_allowed(state, session)
    if state.kind is StateClass.AFTER_SEP:
        return frozenset({specials.open})
    return frozenset()  # DONE


def step_state(state: DecodeState, token: int, session: ConstraintSession) -> DecodeState:
    """Advance one token; the token must already be admissible."""
    specials = session.specials
    if state.kind is StateClass.START:
        if token == specials.eos:
            return DecodeState(StateClass.DONE)
        return DecodeState(StateClass.AWAIT_LETTER, symbol=session.first_marker)
    if state.kind is StateClass.AWAIT_LETTER:
        return DecodeState(StateClass.AWAIT_CLOSE, symbol=state.symbol)
    if state.kind is StateClass.AWAIT_CLOSE:
        if state.symbol == SEP_SYMBOL:
            return DecodeState(StateClass.AFTER_SEP)
        node = session.candidates.tries.get(state.symbol) if session.candidates.mode == TRIE else None
        return DecodeState(StateClass.CONTENT, symbol=state.symbol, node=node)
    if state.kind is StateClass.CONTENT:
        if token == specials.eos:
            return DecodeState(StateClass.DONE)
        if token == specials.open:
            return DecodeState(StateClass.AWAIT_LETTER, symbol=session.next_symbol(state.symbol))
        node = state.node.children[token] if state.node is not None else None
        return DecodeState(StateClass.CONTENT, symbol=state.symbol, has_content=True, node=node)
    if state.kind is StateClass.AFTER_SEP:
        return DecodeState(StateClass.AWAIT_LETTER, symbol=session.first_marker)
    raise IllFormedPrefix("token after end of sequence")


class SessionCursor:
    """Incrementally tracked decode state, one automaton step per token."""

    def __init__(self, session: ConstraintSession) -> None:
        self.session = session
        self.state = START_STATE

    def allowed(self) -> frozenset[int]:
        return allowed_for_state(self.state, self.session)

    def advance(self, token: int) -> None:
        if token not in self.allowed():
            raise IllFormedPrefix(
                f"token {token} not admissible in state {self.state!r}"
            )
        self.state = step_state(self.state, token, self.session)

    @property
    def done(self) -> bool:
        return self.state.kind is StateClass.DONE


def classify_state(prefix: Sequence[int], session: ConstraintSession) -> DecodeState:
    """Classify a prefix by a left-to-right scan; rejects unreachable prefixes."""
    cursor = SessionCursor(session)
    for position, token in enumerate(prefix):
        try:
            cursor.advance(token)
        except IllFormedPrefix as exc:
            raise IllFormedPrefix(f"position {position}: {exc}") from None
    return cursor.state


def allowed_tokens(prefix: Sequence[int], session: ConstraintSession) -> frozenset[int]:
    """The admissible next-token set after ``prefix``."""
    return allowed_for_state(classify_state(prefix, session), session)


def accepts(sequence: Sequence[int], session: ConstraintSession) -> bool:
    """Whether ``sequence`` is a complete, eos-terminated constrained output."""
    if not sequence or sequence[-1] != session.specials.eos:
        return False
    try:
        return classify_state(sequence, session).kind is StateClass.DONE
    except IllFormedPrefix:
        return False
