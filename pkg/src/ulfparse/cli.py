"""Corpus handling and the command-line interface.

Corpus files are JSON lines, one record per line::

    {"id": "mc-001", "text": "I run .",
     "tokens": ["I", "run", "."], "lemmas": ["i", "run", "."],
     "pos": ["PRP", "VBP", "."], "ner": ["O", "O", "O"],
     "deps": [[2, "nsubj"], [0, "root"], [2, "punct"]],
     "ulf": "(i.pro ((pres run.v)))"}

``ner``, ``deps``, and ``ulf`` are optional (``ulf`` is required for
oracle extraction and training).  Dependency heads are 1-based word
indices with 0 for the root.  Annotations are inputs; nothing here runs
a tagger or parser.
"""

from __future__ import annotations

import argparse
import json
import statistics
import sys
from dataclasses import dataclass
from importlib import resources

from . import decode as dec
from . import machine as tm
from . import metrics, oracle
from .align import align
from .core import (
    Sentence,
    UlfGraph,
    emit_penman,
    graph_to_tree,
    graphs_equal,
    parse_penman,
    parse_sexpr,
    render_sexpr,
    tree_to_graph,
)
from .typesys import Lexicon, TypeGrammar

SPLIT_PATTERN = ("train", "dev", "test") + ("train",) * 7


class CorpusError(ValueError):
    pass


@dataclass
class CorpusRecord:
    id: str
    sentence: Sentence
    deps: tuple | None = None
    ulf: str | None = None

    @property
    def gold_tree(self):
        return parse_sexpr(self.ulf) if self.ulf else None

    @property
    def gold_graph(self) -> UlfGraph | None:
        t = self.gold_tree
        return tree_to_graph(t) if t is not None else None

    def to_json(self) -> str:
        obj = {
            "id": self.id,
            "text": self.sentence.raw,
            "tokens": [t.surface for t in self.sentence.tokens],
            "lemmas": [t.lemma for t in self.sentence.tokens],
            "pos": [t.pos for t in self.sentence.tokens],
            "ner": [t.ner for t in self.sentence.tokens],
        }
        if self.deps is not None:
            obj["deps"] = [list(d) for d in self.deps]
        if self.ulf is not None:
            obj["ulf"] = self.ulf
        return json.dumps(obj, sort_keys=True)


def record_from_obj(obj, lineno="?") -> CorpusRecord:
    def fail(msg):
        raise CorpusError("line %s: %s" % (lineno, msg))

    for key in ("id", "tokens", "lemmas", "pos"):
        if key not in obj:
            fail("missing %r field" % key)
    tokens = obj["tokens"]
    n = len(tokens)
    if n == 0:
        fail("empty token list")
    for key in ("lemmas", "pos"):
        if len(obj[key]) != n:
            fail("%r length %d != %d tokens" % (key, len(obj[key]), n))
    ner = obj.get("ner", ["O"] * n)
    if len(ner) != n:
        fail("'ner' length mismatch")
    deps = obj.get("deps")
    if deps is not None:
        if len(deps) != n:
            fail("'deps' length mismatch")
        deps = tuple((int(h), str(lab)) for h, lab in deps)
        for h, _ in deps:
            if not (0 <= h <= n):
                fail("dependency head %d out of range" % h)
    ulf = obj.get("ulf")
    if ulf is not None:
        try:
            parse_sexpr(ulf)
        except Exception as e:
            fail("unparseable gold ULF: %s" % e)
    sentence = Sentence.make(
        tokens, obj["lemmas"], obj["pos"], ner, raw=obj.get("text"))
    return CorpusRecord(str(obj["id"]), sentence, deps, ulf)


def ingest(path) -> list[CorpusRecord]:
    records = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise CorpusError("line %d: malformed JSON: %s" % (lineno, e))
            records.append(record_from_obj(obj, lineno))
    return records


def mini_corpus_path():
    return resources.files("ulfparse.data").joinpath("minicorpus.jsonl")


def load_mini_corpus() -> list[CorpusRecord]:
    records = []
    for lineno, line in enumerate(mini_corpus_path().read_text().splitlines(), 1):
        if line.strip():
            records.append(record_from_obj(json.loads(line), lineno))
    return records


def split_round_robin(records, chunk=10, pattern=SPLIT_PATTERN):
    """Assign consecutive chunks of `chunk` records to splits cyclically.

    pattern is the role sequence per chunk; the default gives the
    training set eight chunks per round of ten.  A final partial chunk
    takes the next role in pattern order.
    """
    if chunk < 1:
        raise ValueError("chunk must be >= 1")
    out = {"train": [], "dev": [], "test": []}
    for i in range(0, len(records), chunk):
        role = pattern[(i // chunk) % len(pattern)]
        out[role].extend(records[i : i + chunk])
    return out["train"], out["dev"], out["test"]


# ---------------------------------------------------------------------------
# Shared helpers


def _read_graph_file(path, fmt):
    """Read one graph per record: consecutive s-expressions (per line or
    blank-separated, possibly multi-line) for ULF, blank-separated blocks
    for penman.  Lines starting with '#' are comments."""
    with open(path) as fh:
        text = "\n".join(ln for ln in fh.read().splitlines()
                         if not ln.startswith("#"))
    if fmt == "penman":
        blocks = [b.strip() for b in text.split("\n\n") if b.strip()]
        return [parse_penman(b) for b in blocks]
    from .core import parse_sexpr_stream

    return [tree_to_graph(t) for t in parse_sexpr_stream(text)]


def _oracle_items(records, promote_syms, inseq, step_cap):
    """(record, actions) for each record, extracting with alignment."""
    out = []
    for rec in records:
        gold = rec.gold_graph
        if gold is None:
            raise CorpusError("record %s has no gold ULF" % rec.id)
        amap = align(rec.sentence, gold, never_align=frozenset(promote_syms))
        actions = oracle.extract(rec.sentence, gold, amap,
                                 promote_syms, inseq, step_cap)
        out.append((rec, actions))
    return out


def _scorer_for(name, model, oracle_actions=None, seed=0, external=None):
    if name == "perceptron":
        return dec.PerceptronScorer(model)
    if name == "random":
        return dec.RandomScorer(seed)
    if name == "oracle":
        return dec.OracleScorer(oracle_actions)
    if name == "external":
        return external
    raise ValueError("unknown scorer %r" % name)


# ---------------------------------------------------------------------------
# Subcommands


def cmd_convert(args):
    graphs = _read_graph_file(args.input, args.source)
    if args.plain_names:
        graphs = [_plain_names(g) for g in graphs]
    with _out(args.output) as fh:
        for g in graphs:
            if args.to == "penman":
                fh.write(emit_penman(g) + "\n\n")
            else:
                fh.write(render_sexpr(graph_to_tree(g)) + "\n")
    return 0


def _plain_names(g: UlfGraph) -> UlfGraph:
    """Export preprocessing for pipelines that cannot handle pipe-delimited
    labels: strips pipes and joins name-internal spaces with underscores.
    Off by default; names normally stay single pipe-delimited atoms."""
    from .core import Atom, Vertex

    verts = []
    for v in g.vertices:
        sym = v.symbol
        if sym.is_name:
            sym = Atom(sym.stem.replace(" ", "_"), "suffixed", sym.tag) \
                if sym.tag else Atom(sym.stem.replace(" ", "_"), "operator")
        verts.append(Vertex(sym, v.alignment))
    return UlfGraph(verts, list(g.edges), g.root)


def cmd_align(args):
    records = ingest(args.corpus)
    never = frozenset(args.promote_syms)
    with _out(args.output) as fh:
        for rec in records:
            gold = rec.gold_graph
            if gold is None:
                raise CorpusError("record %s has no gold ULF" % rec.id)
            amap = align(rec.sentence, gold, never_align=never)
            obj = {"id": rec.id,
                   "tokens": [t.surface for t in rec.sentence.tokens]}
            obj.update(amap.to_record())
            fh.write(json.dumps(obj, sort_keys=True) + "\n")
    return 0


def cmd_oracle(args):
    records = ingest(args.corpus)
    inseq = _harvest_inseq(records, args.promote_syms)
    failures = 0
    lengths = []
    with _out(args.output) as fh:
        for rec in records:
            gold = rec.gold_graph
            amap = align(rec.sentence, gold,
                         never_align=frozenset(args.promote_syms))
            try:
                actions = oracle.extract(rec.sentence, gold, amap,
                                         args.promote_syms, inseq, args.cap)
            except oracle.OracleError as e:
                failures += 1
                print("FAIL %s: %s" % (rec.id, e), file=sys.stderr)
                continue
            lengths.append(len(actions))
            fh.write("# id: %s\n" % rec.id)
            fh.write(tm.format_actions(actions))
            if args.verify:
                final = tm.Machine(step_cap=args.cap).replay(rec.sentence, actions)
                frags = tm.Machine().extract_result(final)
                if len(frags) != 1 or not graphs_equal(frags[0], gold):
                    failures += 1
                    div = _first_divergence(rec.sentence, actions, gold)
                    print("MISMATCH %s at action %s" % (rec.id, div),
                          file=sys.stderr)
    n = len(records)
    okpct = 100.0 * (n - failures) / n if n else 0.0
    if lengths:
        print("oracle actions: n=%d mean=%.1f max=%d" %
              (len(lengths), statistics.fmean(lengths), max(lengths)))
    print("round-trip %.0f%%" % okpct)
    return 0 if failures == 0 else 1


def _first_divergence(sentence, actions, gold):
    """Index and name of the first action after which replay can no longer
    reach the gold graph (best-effort diagnostic)."""
    m = tm.Machine()
    c = m.init(sentence)
    gold_edges = {(gold.label(s), gold.label(d), lab) for s, d, lab in gold.edges}
    for i, a in enumerate(actions):
        c = m.apply(c, a)
        got = {(c.verts[s].symbol.render(), c.verts[d].symbol.render(), lab)
               for s, d, lab in c.edges}
        if not got <= gold_edges:
            return "%d (%s)" % (i, a)
    return "%d (end)" % len(actions)


def cmd_replay(args):
    records = {r.id: r for r in ingest(args.corpus)}
    machine = tm.Machine(step_cap=args.cap)
    with open(args.actions) as fh:
        seqs = tm.parse_action_file(fh.read())
    with _out(args.output) as fh:
        for rid, actions in seqs:
            rec = records[rid]
            final = machine.replay(rec.sentence, actions)
            frags = machine.extract_result(final)
            fh.write("# id: %s fragments: %d\n" % (rid, len(frags)))
            for g in frags:
                fh.write(render_sexpr(graph_to_tree(g, strict=False)) + "\n")
            fh.write("\n")
    return 0


def cmd_train(args):
    records = ingest(args.corpus)
    inseq = _harvest_inseq(records, args.promote_syms)
    items = []
    for rec, actions in _oracle_items(records, args.promote_syms, inseq, args.cap):
        items.append((rec.sentence, rec.deps, actions))
    model, machine = dec.train_perceptron(items, epochs=args.epochs, seed=args.seed)
    with open(args.model, "w") as fh:
        fh.write(model.to_json() + "\n")
    print("trained on %d sentences, %d actions, %d updates" %
          (len(items), sum(len(a) for _, _, a in items), model.updates))
    return 0


def cmd_parse(args):
    records = ingest(args.corpus)
    lexicon = Lexicon.load(args.lexicon) if args.lexicon else None
    grammar = None
    if args.types:
        grammar = (TypeGrammar.load(args.grammar) if args.grammar
                   else TypeGrammar.default())
    model = None
    if args.model:
        with open(args.model) as fh:
            model = dec.PerceptronModel.from_json(fh.read())
    oracle_actions = None
    if args.scorer == "oracle":
        # replay mode needs gold graphs; the machine vocab comes from them
        inseq = _harvest_inseq(records, args.promote_syms)
        items = _oracle_items(records, args.promote_syms, inseq, args.cap)
        machine = dec.machine_from_actions([a for _, a in items])
        oracle_actions = {rec.id: a for rec, a in items}
    elif model is not None and model.vocab:
        machine = model.make_machine()
    elif args.train_corpus:
        train_records = ingest(args.train_corpus)
        inseq = _harvest_inseq(train_records, args.promote_syms)
        items = _oracle_items(train_records, args.promote_syms, inseq, args.cap)
        machine = dec.machine_from_actions([a for _, a in items])
    else:
        raise CorpusError(
            "decode vocabularies unavailable: supply --model or --train-corpus")
    machine.step_cap = args.cap
    external = (dec.ExternalScorer(args.external_cmd.split())
                if args.scorer == "external" else None)

    def decode_one(rec):
        scorer = _scorer_for(
            args.scorer, model,
            oracle_actions[rec.id] if oracle_actions else None,
            args.seed, external)
        return dec.beam_decode(
            rec.sentence, scorer, machine, beam_size=args.beam,
            lexicon=lexicon, grammar=grammar, cap=args.cap, dep=rec.deps)

    try:
        if external is not None:
            # the external process speaks a single serial pipe
            results = [decode_one(rec) for rec in records]
        else:
            results = _parallel_map(decode_one, records)
    finally:
        if external is not None:
            external.close()
    with _out(args.output) as fh:
        for rec, result in zip(records, results):
            fh.write("# id: %s fragments: %d score: %.4f\n"
                     % (rec.id, len(result.fragments), result.score))
            for g in result.fragments:
                fh.write(render_sexpr(graph_to_tree(g, strict=False)) + "\n")
            fh.write("\n")
    return 0


def _parallel_map(fn, items):
    """Map across records; ULFPARSE_THREADS > 1 enables a thread pool with
    ordered output assembly."""
    import os

    workers = int(os.environ.get("ULFPARSE_THREADS", "1"))
    if workers <= 1:
        return [fn(x) for x in items]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def cmd_eval(args):
    cands = _read_parse_file(args.candidate)
    golds = _read_graph_file(args.gold, args.format)
    if len(cands) != len(golds):
        raise CorpusError("candidate/gold length mismatch: %d vs %d"
                          % (len(cands), len(golds)))
    pairs = []
    for cand, gold in zip(cands, golds):
        if args.largest_fragment and len(cand) > 1:
            cand = [max(cand, key=lambda g: len(g.vertices))]
        pairs.append((cand, gold))
    report = metrics.corpus_eval(pairs, k=args.k, restarts=args.restarts,
                                 seed=args.seed)
    agg = report.aggregate
    if args.metric in ("sembleu", "both"):
        print("SemBLEU: %.4f" % agg["sembleu"])
    if args.metric in ("elsmatch", "both"):
        print("EL-Smatch F1: %.4f P: %.4f R: %.4f"
              % (agg["elsmatch_f1"], agg["elsmatch_p"], agg["elsmatch_r"]))
    print("fragments/sentence: %.2f" % agg["fragments"])
    if args.report:
        with open(args.report, "w") as fh:
            fh.write(report.to_json() if args.report.endswith(".json")
                     else report.to_tsv())
    return 0


def _read_parse_file(path):
    """Read parser output: '# id ...' blocks, each with >= 0 fragments."""
    with open(path) as fh:
        text = fh.read()
    blocks = [b for b in text.split("\n\n") if b.strip()]
    out = []
    for block in blocks:
        frags = []
        for line in block.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            frags.append(tree_to_graph(parse_sexpr(line)))
        out.append(frags)
    return out


def cmd_split(args):
    records = ingest(args.corpus)
    train, devs, test = split_round_robin(records, chunk=args.chunk)
    for name, chunk_records in (("train", train), ("dev", devs), ("test", test)):
        path = "%s.%s.jsonl" % (args.prefix, name)
        with open(path, "w") as fh:
            for rec in chunk_records:
                fh.write(rec.to_json() + "\n")
        print("%s: %d records -> %s" % (name, len(chunk_records), path))
    return 0


def cmd_stats(args):
    records = ingest(args.corpus)
    lens = [len(r.sentence) for r in records]
    print("sentences: %d" % len(records))
    print("length mean=%.3f median=%s min=%d max=%d"
          % (statistics.fmean(lens), statistics.median(lens), min(lens), max(lens)))
    if args.oracle:
        inseq = _harvest_inseq(records, args.promote_syms)
        lengths = []
        for rec, actions in _oracle_items(records, args.promote_syms, inseq, args.cap):
            lengths.append(len(actions))
        print("oracle actions mean=%.1f median=%s min=%d max=%d"
              % (statistics.fmean(lengths), statistics.median(lengths),
                 min(lengths), max(lengths)))
    return 0


def _harvest_inseq(records, promote_syms):
    pairs = []
    for rec in records:
        gold = rec.gold_graph
        if gold is not None:
            pairs.append((rec.sentence, gold))
    _, s_s = oracle.build_symbol_sets(pairs, promote_syms)
    return s_s


class _out:
    def __init__(self, path):
        self.path = path

    def __enter__(self):
        self.fh = open(self.path, "w") if self.path else sys.stdout
        return self.fh

    def __exit__(self, *exc):
        if self.path:
            self.fh.close()


# ---------------------------------------------------------------------------
# Argument parsing


def _add_common(p, cap=True, promote=True, seed=False):
    if cap:
        p.add_argument("--cap", type=int, default=tm.DEFAULT_STEP_CAP,
                       help="maximum action length")
    if promote:
        p.add_argument("--promote-syms", nargs="*",
                       default=list(oracle.DEFAULT_PROMOTE_SYMBOLS),
                       help="promotion operator vocabulary")
    if seed:
        p.add_argument("--seed", type=int, default=0)


def build_parser():
    ap = argparse.ArgumentParser(
        prog="ulfparse",
        description="Transition-based semantic parser for ULF")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="convert between ULF and penman")
    p.add_argument("input")
    p.add_argument("--source", choices=["ulf", "penman"], default="ulf")
    p.add_argument("--to", choices=["ulf", "penman"], default="penman")
    p.add_argument("--plain-names", action="store_true",
                   help="strip pipes and underscore-join name labels "
                        "(export preprocessing for external pipelines)")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("align", help="dump word/atom alignments")
    p.add_argument("corpus")
    p.add_argument("-o", "--output")
    _add_common(p, cap=False)
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("oracle", help="extract gold action sequences")
    p.add_argument("corpus")
    p.add_argument("-o", "--output")
    p.add_argument("--verify", action="store_true",
                   help="replay each sequence and require gold equality")
    _add_common(p)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("replay", help="replay action sequences into graphs")
    p.add_argument("corpus")
    p.add_argument("actions")
    p.add_argument("-o", "--output")
    _add_common(p, promote=False)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("train", help="train the perceptron scorer")
    p.add_argument("corpus")
    p.add_argument("model")
    p.add_argument("--epochs", type=int, default=5)
    _add_common(p, seed=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("parse", help="beam-decode sentences")
    p.add_argument("corpus")
    p.add_argument("-o", "--output")
    p.add_argument("--model", help="perceptron model file")
    p.add_argument("--scorer",
                   choices=["perceptron", "oracle", "random", "external"],
                   default="perceptron")
    p.add_argument("--external-cmd",
                   help="scorer subprocess command (--scorer external)")
    p.add_argument("--beam", type=int, default=3)
    p.add_argument("--lexicon", help="TSV lexicon file enabling the lexicon constraint")
    p.add_argument("--types", action="store_true",
                   help="enable the type-composition constraint")
    p.add_argument("--grammar", help="type grammar file (default: bundled)")
    p.add_argument("--train-corpus",
                   help="corpus supplying decode vocabularies (default: corpus)")
    _add_common(p, seed=True)
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("eval", help="score candidate parses against gold")
    p.add_argument("metric", choices=["sembleu", "elsmatch", "both"])
    p.add_argument("candidate", help="parse output file")
    p.add_argument("gold", help="gold graphs (ULF or penman)")
    p.add_argument("--format", choices=["ulf", "penman"], default="ulf")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--restarts", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--largest-fragment", action="store_true")
    p.add_argument("--report", help="write the full report (.json or .tsv)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("split", help="round-robin corpus split")
    p.add_argument("corpus")
    p.add_argument("prefix")
    p.add_argument("--chunk", type=int, default=10)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("stats", help="corpus statistics")
    p.add_argument("corpus")
    p.add_argument("--oracle", action="store_true",
                   help="also compute oracle action-length statistics")
    _add_common(p)
    p.set_defaults(func=cmd_stats)

    return ap


def _apply_config(argv):
    """Expand `--config FILE` into leading flags: the file holds
    `key = value` lines naming long options (e.g. `beam = 10`), which
    explicit command-line flags override."""
    argv = list(argv)
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    path = argv[i + 1]
    del argv[i : i + 2]
    flags = []
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, _, value = line.partition("=")
            flags.extend(["--%s" % key.strip(), value.strip()])
    # insert defaults right after the subcommand so later flags win
    for j, a in enumerate(argv):
        if not a.startswith("-"):
            return argv[: j + 1] + flags + argv[j + 1 :]
    return argv + flags


def main(argv=None):
    argv = _apply_config(argv if argv is not None else sys.argv[1:])
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CorpusError, oracle.OracleError, ValueError) as e:
        print("error: %s" % e, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
