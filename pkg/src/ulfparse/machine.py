"""The node-generative cache transition system.

State is a configuration of four structures: a stack, a two-slot cache,
a buffer cursor over the input words, and the partial graph under
construction.  Parsing proceeds through phases; each phase offers a small
menu of actions, and actions move between phases:

    GEN --WORDGEN--> WORDGEN --NAME/LEMMA/TOKEN--> {NAMEGEN,LEMMAGEN,TOKENGEN}
    {NAMEGEN,LEMMAGEN,TOKENGEN} --SUFFIX:e--> PUSH
    GEN --SYMGEN:s--> PUSH          GEN --SKIP / MERGEBUF--> GEN
    PUSH --PUSHIDX:i--> ARC
    ARC --ARC:0:d:l / NOARC--> PROMOTE
    PROMOTE --PROMOTE_SYM:s--> PROMOTEARC --PROMOTE_ARC:l--> ARC
    PROMOTE --NOPROMOTE--> POP
    POP --POP--> ARC                POP --NOPOP--> GEN

A parse terminates in GEN, after a NOPOP (or trailing SKIP), with the
buffer exhausted and the stack empty.  Graph vertices live in exactly one
of: the cache, the stack, the pending slot (generated but not yet
pushed), or retired (present only in the partial graph).

Action wire format, one action per line (bit-exact):

    WORDGEN | NAME | LEMMA | TOKEN | SUFFIX:<ext> | SYMGEN:<atom> |
    SKIP | MERGEBUF | PUSHIDX:<0|1> | ARC:0:<left|right>:<label> |
    NOARC | PROMOTE_SYM:<atom> | PROMOTE_ARC:<label> | NOPROMOTE |
    POP | NOPOP

where <label> carries its leading colon, e.g. ``ARC:0:left::ARG0`` and
``PROMOTE_ARC::ARG0``; ``SUFFIX:`` with an empty extension generates a
bare operator from the word.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

from .core import (
    Atom,
    NAME,
    OPERATOR,
    SUFFIXED,
    Sentence,
    UlfGraph,
    Vertex,
    graph_fragments,
    parse_atom,
)

# Phases
GEN = "GEN"
WORDGEN = "WORDGEN"
NAMEGEN = "NAMEGEN"
LEMMAGEN = "LEMMAGEN"
TOKENGEN = "TOKENGEN"
PUSH = "PUSH"
ARC = "ARC"
PROMOTE = "PROMOTE"
PROMOTEARC = "PROMOTEARC"
POP = "POP"

PHASES = (GEN, WORDGEN, NAMEGEN, LEMMAGEN, TOKENGEN, PUSH, ARC, PROMOTE, PROMOTEARC, POP)

CACHE_SIZE = 2  # fixed; only tree structures are parsed
DEFAULT_STEP_CAP = 800

# Canonical action-kind order, used for deterministic tie-breaking.
_KIND_ORDER = [
    "PUSHIDX", "ARC", "SUFFIX", "SYMGEN", "MERGEBUF", "PROMOTE_SYM",
    "PROMOTE_ARC", "NOARC", "NOPROMOTE", "POP", "NOPOP", "SKIP",
    "WORDGEN", "NAME", "LEMMA", "TOKEN",
]
_KIND_RANK = {k: i for i, k in enumerate(_KIND_ORDER)}


class IllegalAction(ValueError):
    pass


def action_kind(action: str) -> str:
    return action.split(":", 1)[0]


def action_sort_key(action: str):
    kind = action_kind(action)
    return (_KIND_RANK.get(kind, len(_KIND_ORDER)), action)


def parse_arc_action(action: str):
    """ARC:<i>:<dir>:<label> -> (i, dir, label)."""
    parts = action.split(":", 3)
    if len(parts) != 4 or parts[0] != "ARC":
        raise IllegalAction("malformed arc action %r" % action)
    return int(parts[1]), parts[2], parts[3]


def arc_action(i: int, direction: str, label: str) -> str:
    return "ARC:%d:%s:%s" % (i, direction, label)


def format_actions(actions) -> str:
    return "\n".join(actions) + "\n"


def parse_action_file(text: str):
    """Parse the oracle dump format: '# id: ...' headers start a record."""
    records = []
    cur_id, cur = None, []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("# id:"):
            if cur_id is not None or cur:
                records.append((cur_id, cur))
            cur_id, cur = line[5:].strip(), []
        elif line.startswith("#"):
            continue
        else:
            cur.append(line)
    if cur_id is not None or cur:
        records.append((cur_id, cur))
    return records


@dataclass(frozen=True)
class Config:
    """Immutable transition state; apply() returns a new value."""

    sentence: Sentence
    stack: tuple = ()           # (slot index, vertex id or None) entries
    cache: tuple = (None, None)
    cursor: int = 1             # 1-based index of the next word
    merged: int = 1             # how many words are fused at the front
    verts: tuple = ()           # Vertex, in creation order
    edges: tuple = ()           # (src vid, dst vid, label)
    phase: str = GEN
    pending: Optional[int] = None   # generated vertex awaiting PUSHIDX
    promoted: Optional[int] = None  # PROMOTE_SYM vertex awaiting PROMOTE_ARC
    last_action: Optional[str] = None
    steps: int = 0

    @property
    def buffer_empty(self) -> bool:
        return self.cursor > len(self.sentence)

    @property
    def words_left(self) -> int:
        return max(0, len(self.sentence) - self.cursor + 1)

    def front_tokens(self):
        """The merged word group at the front of the buffer."""
        return [self.sentence.token(self.cursor + k) for k in range(self.merged)]

    def parent_of(self, vid: int) -> Optional[int]:
        for src, dst, _ in self.edges:
            if dst == vid:
                return src
        return None

    def descendants(self, vid: int) -> set:
        out, todo = set(), [vid]
        while todo:
            v = todo.pop()
            for src, dst, _ in self.edges:
                if src == v and dst not in out:
                    out.add(dst)
                    todo.append(dst)
        return out


class Machine:
    """Applies actions to configurations.

    Vocabularies bound here: arc labels, suffix extensions, the SYMGEN
    symbol vocabulary (None = unrestricted), and the PROMOTE_SYM
    vocabulary.
    """

    def __init__(self, arc_labels=None, suffixes=None, symgen_vocab=None,
                 promote_syms=None, step_cap=DEFAULT_STEP_CAP):
        self.arc_labels = list(arc_labels) if arc_labels is not None else None
        self.suffixes = list(suffixes) if suffixes is not None else None
        self.symgen_vocab = list(symgen_vocab) if symgen_vocab is not None else None
        self.promote_syms = list(promote_syms) if promote_syms is not None else None
        self.step_cap = step_cap

    # -- lifecycle ---------------------------------------------------------

    def init(self, sentence: Sentence) -> Config:
        if len(sentence) == 0:
            raise ValueError("cannot initialize on an empty sentence")
        return Config(sentence=sentence)

    def is_terminal(self, c: Config) -> bool:
        return (
            c.phase == GEN
            and c.buffer_empty
            and not c.stack
            and c.last_action is not None
            and action_kind(c.last_action) in ("NOPOP", "SKIP")
        )

    def extract_result(self, c: Config) -> list[UlfGraph]:
        return graph_fragments(list(c.verts), list(c.edges))

    # -- legality ----------------------------------------------------------

    def legal_actions(self, c: Config) -> list[str]:
        """All actions permitted in c, in canonical order."""
        out = []
        if c.phase == GEN:
            if self.symgen_vocab is None:
                out.append("SYMGEN:*")  # open vocabulary marker
            else:
                out.extend("SYMGEN:%s" % s for s in self.symgen_vocab)
            if c.cursor + c.merged <= len(c.sentence):
                out.append("MERGEBUF")
            if not c.buffer_empty:
                out.append("SKIP")
                out.append("WORDGEN")
        elif c.phase == WORDGEN:
            out.extend(["NAME", "LEMMA", "TOKEN"])
        elif c.phase in (NAMEGEN, LEMMAGEN, TOKENGEN):
            if self.suffixes is None:
                out.append("SUFFIX:*")
            else:
                out.extend("SUFFIX:%s" % e for e in self.suffixes)
        elif c.phase == PUSH:
            if c.pending is not None:
                out.extend(["PUSHIDX:0", "PUSHIDX:1"])
        elif c.phase == ARC:
            l, r = c.cache
            if l is not None and r is not None:
                labels = self.arc_labels if self.arc_labels is not None else []
                for direction, src, dst in (("left", r, l), ("right", l, r)):
                    if self._arc_ok(c, src, dst):
                        for lab in labels:
                            out.append(arc_action(0, direction, lab))
                        if self.arc_labels is None:
                            out.append("ARC:0:%s:*" % direction)
            out.append("NOARC")
        elif c.phase == PROMOTE:
            r = c.cache[1]
            if r is not None and c.parent_of(r) is None:
                if self.promote_syms is None:
                    out.append("PROMOTE_SYM:*")
                else:
                    out.extend("PROMOTE_SYM:%s" % s for s in self.promote_syms)
            out.append("NOPROMOTE")
        elif c.phase == PROMOTEARC:
            if self.arc_labels is None:
                out.append("PROMOTE_ARC:*")
            else:
                out.extend("PROMOTE_ARC:%s" % lab for lab in self.arc_labels)
        elif c.phase == POP:
            if c.stack:
                out.append("POP")
            out.append("NOPOP")
        out.sort(key=action_sort_key)
        return out

    def _arc_ok(self, c: Config, src: int, dst: int) -> bool:
        # keep the partial graph a forest: one parent per vertex, no cycles
        if c.parent_of(dst) is not None:
            return False
        if src == dst or src in c.descendants(dst):
            return False
        return True

    def is_legal(self, c: Config, action: str) -> bool:
        kind = action_kind(action)
        legal = self.legal_actions(c)
        if action in legal:
            return True
        # open-vocabulary markers admit any concrete parameter
        if kind == "SYMGEN" and "SYMGEN:*" in legal:
            return True
        if kind == "SUFFIX" and "SUFFIX:*" in legal:
            return True
        if kind == "PROMOTE_SYM" and "PROMOTE_SYM:*" in legal:
            return True
        if kind == "PROMOTE_ARC" and "PROMOTE_ARC:*" in legal:
            return True
        if kind == "ARC":
            _, direction, _ = parse_arc_action(action)
            if "ARC:0:%s:*" % direction in legal:
                return True
        return False

    # -- application -------------------------------------------------------

    def apply(self, c: Config, action: str) -> Config:
        if not self.is_legal(c, action):
            raise IllegalAction("action %r illegal in phase %s" % (action, c.phase))
        kind = action_kind(action)
        nxt = dict(last_action=action, steps=c.steps + 1)

        if kind == "WORDGEN":
            return replace(c, phase=WORDGEN, **nxt)
        if kind == "NAME":
            return replace(c, phase=NAMEGEN, **nxt)
        if kind == "LEMMA":
            return replace(c, phase=LEMMAGEN, **nxt)
        if kind == "TOKEN":
            return replace(c, phase=TOKENGEN, **nxt)

        if kind == "SUFFIX":
            ext = action.split(":", 1)[1]
            atom = self.make_symbol(c, ext)
            verts = c.verts + (Vertex(atom, c.cursor),)
            return replace(
                c, verts=verts, pending=len(verts) - 1,
                cursor=c.cursor + c.merged, merged=1, phase=PUSH, **nxt)

        if kind == "SYMGEN":
            atom = parse_atom(action.split(":", 1)[1])
            verts = c.verts + (Vertex(atom, None),)
            return replace(c, verts=verts, pending=len(verts) - 1, phase=PUSH, **nxt)

        if kind == "SKIP":
            return replace(c, cursor=c.cursor + 1, merged=1, phase=GEN, **nxt)

        if kind == "MERGEBUF":
            return replace(c, merged=c.merged + 1, phase=GEN, **nxt)

        if kind == "PUSHIDX":
            i = int(action.split(":", 1)[1])
            stack = c.stack + ((i, c.cache[i]),)
            cache = (c.pending, c.cache[1]) if i == 0 else (c.cache[0], c.pending)
            return replace(c, stack=stack, cache=cache, pending=None, phase=ARC, **nxt)

        if kind == "ARC":
            _, direction, label = parse_arc_action(action)
            l, r = c.cache
            src, dst = (r, l) if direction == "left" else (l, r)
            return replace(c, edges=c.edges + ((src, dst, label),), phase=PROMOTE, **nxt)

        if kind == "NOARC":
            return replace(c, phase=PROMOTE, **nxt)

        if kind == "PROMOTE_SYM":
            atom = parse_atom(action.split(":", 1)[1])
            verts = c.verts + (Vertex(atom, None),)
            return replace(c, verts=verts, promoted=len(verts) - 1, phase=PROMOTEARC, **nxt)

        if kind == "PROMOTE_ARC":
            label = action.split(":", 1)[1]
            r = c.cache[1]
            edges = c.edges + ((c.promoted, r, label),)
            cache = (c.cache[0], c.promoted)  # old rightmost retires
            return replace(c, edges=edges, cache=cache, promoted=None, phase=ARC, **nxt)

        if kind == "NOPROMOTE":
            return replace(c, phase=POP, **nxt)

        if kind == "POP":
            i, v = c.stack[-1]
            stack = c.stack[:-1]
            # rightmost retires, restored entry lands at its slot, shifting right
            if i == 0:
                cache = (v, c.cache[0])
            else:
                cache = (c.cache[0], v)
            return replace(c, stack=stack, cache=cache, phase=ARC, **nxt)

        if kind == "NOPOP":
            return replace(c, phase=GEN, **nxt)

        raise IllegalAction("unknown action %r" % action)

    def make_symbol(self, c: Config, ext: str) -> Atom:
        toks = c.front_tokens()
        if c.phase == NAMEGEN:
            stem = " ".join(t.surface for t in toks)
            return Atom(stem, NAME, ext)
        if c.phase == TOKENGEN:
            stem = "_".join(t.surface.lower() for t in toks)
        else:  # LEMMAGEN
            stem = "_".join(t.lemma.lower() for t in toks)
        return Atom(stem, SUFFIXED, ext) if ext else Atom(stem, OPERATOR)

    def replay(self, sentence: Sentence, actions) -> Config:
        c = self.init(sentence)
        for a in actions:
            c = self.apply(c, a)
        return c
