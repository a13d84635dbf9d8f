"""Graph comparison metrics over penman-style triples and label n-grams.

EL-Smatch: precision/recall/F1 over instance and relation triples under
the best variable mapping found by hill-climbing with random restarts.
SemBLEU: BLEU over node- and edge-label n-grams extracted by following
edge direction through the graph.

Both metrics accept a single graph or a list of graph fragments; a
fragment list is treated as a multi-rooted triple set (EL-Smatch) and the
union of per-fragment n-grams (SemBLEU).
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .core import UlfGraph


def _as_fragments(g) -> list[UlfGraph]:
    if isinstance(g, UlfGraph):
        return [g]
    return list(g)


# ---------------------------------------------------------------------------
# Triples


@dataclass
class TripleSet:
    instances: list          # (var, label)
    relations: list          # (role, var, var)
    roots: list              # var designations, not scored

    @property
    def size(self) -> int:
        return len(self.instances) + len(self.relations)

    @classmethod
    def from_graph(cls, g, prefix="a") -> "TripleSet":
        instances, relations, roots = [], [], []
        for fi, frag in enumerate(_as_fragments(g)):
            var = lambda v: "%s%d_%d" % (prefix, fi, v)
            for vid, vert in enumerate(frag.vertices):
                instances.append((var(vid), vert.symbol.render()))
            for src, dst, lab in frag.edges:
                relations.append((lab, var(src), var(dst)))
            if frag.vertices:
                roots.append(var(frag.root))
        return cls(instances, relations, roots)


def _match_count(mapping, inst_w, rel_w):
    total = 0
    for i, j in enumerate(mapping):
        if j < 0:
            continue
        total += inst_w.get((i, j), 0)
        for (i2, j2), w in rel_w.get((i, j), {}).items():
            if i2 < len(mapping) and mapping[i2] == j2:
                total += w
    return total


def best_mapping(cand: TripleSet, gold: TripleSet, restarts=4, seed=0):
    """Best candidate-to-gold variable mapping via hill-climbing.

    Returns (matched triple count, mapping list).  Deterministic given
    the seed; restart 0 uses a label-greedy initialization and the rest
    are random over the candidate pools.
    """
    cvars = {v: i for i, (v, _) in enumerate(cand.instances)}
    gvars = {v: j for j, (v, _) in enumerate(gold.instances)}
    cn, gn = len(cand.instances), len(gold.instances)

    # candidate pools: gold nodes with equal instance labels, plus nodes
    # reachable through same-role relation triples (a mapping without an
    # instance match can still earn relation matches)
    pool_sets = [set() for _ in range(cn)]
    inst_w = {}
    for i, (_, cl) in enumerate(cand.instances):
        for j, (_, gl) in enumerate(gold.instances):
            if gl == cl:
                pool_sets[i].add(j)
                inst_w[(i, j)] = 1

    rel_w: dict = {}
    gold_rels: dict = {}
    for lab, gv1, gv2 in gold.relations:
        gold_rels.setdefault(lab, []).append((gvars[gv1], gvars[gv2]))
    for lab, cv1, cv2 in cand.relations:
        i1, i2 = cvars[cv1], cvars[cv2]
        for j1, j2 in gold_rels.get(lab, []):
            pool_sets[i1].add(j1)
            pool_sets[i2].add(j2)
            # relation triple matches when both endpoint mappings hold
            rel_w.setdefault((i1, j1), {})[(i2, j2)] = (
                rel_w.setdefault((i1, j1), {}).get((i2, j2), 0) + 1
            )
    pools = [sorted(s) for s in pool_sets]

    rng = np.random.default_rng(seed)
    best_num, best_map = -1, [-1] * cn
    for restart in range(max(1, restarts + 1)):
        mapping = [-1] * cn
        used = set()
        order = list(range(cn))
        if restart > 0:
            order = list(rng.permutation(cn))
        for i in order:
            choices = [j for j in pools[i] if j not in used]
            if not choices:
                continue
            j = choices[0] if restart == 0 else int(rng.choice(choices))
            mapping[i] = j
            used.add(j)
        num = _match_count(mapping, inst_w, rel_w)
        improved = True
        while improved:
            improved = False
            base = num
            best_move, best_gain = None, 0
            for i in range(cn):
                cur = mapping[i]
                for j in pools[i] + [-1]:
                    if j == cur or (j >= 0 and j in used and j != cur):
                        continue
                    trial = list(mapping)
                    trial[i] = j
                    gain = _match_count(trial, inst_w, rel_w) - base
                    if gain > best_gain:
                        best_gain, best_move = gain, ("set", i, j)
            for i in range(cn):
                for k in range(i + 1, cn):
                    if mapping[i] == mapping[k] == -1:
                        continue
                    trial = list(mapping)
                    trial[i], trial[k] = trial[k], trial[i]
                    gain = _match_count(trial, inst_w, rel_w) - base
                    if gain > best_gain:
                        best_gain, best_move = gain, ("swap", i, k)
            if best_move:
                kind, a, b = best_move
                if kind == "set":
                    if mapping[a] >= 0:
                        used.discard(mapping[a])
                    mapping[a] = b
                    if b >= 0:
                        used.add(b)
                else:
                    mapping[a], mapping[b] = mapping[b], mapping[a]
                num = base + best_gain
                improved = True
        if num > best_num:
            best_num, best_map = num, list(mapping)
    return best_num, best_map


def el_smatch(candidate, gold, restarts=4, seed=0):
    """(F1, precision, recall) over instance+relation triples."""
    cand_t = TripleSet.from_graph(candidate, "a")
    gold_t = TripleSet.from_graph(gold, "b")
    matched, _ = best_mapping(cand_t, gold_t, restarts, seed)
    matched = max(matched, 0)
    p = matched / cand_t.size if cand_t.size else 0.0
    r = matched / gold_t.size if gold_t.size else 0.0
    f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return f1, p, r


# ---------------------------------------------------------------------------
# SemBLEU


def graph_ngrams(g, k=3) -> Counter:
    """Multiset of label-path n-grams for n = 1..k.

    Unigrams are node labels; longer n-grams follow edge direction and
    interleave node and edge labels.
    """
    bag: Counter = Counter()
    for frag in _as_fragments(g):
        labels = [v.symbol.render() for v in frag.vertices]
        out = {}
        for src, dst, lab in frag.edges:
            out.setdefault(src, []).append((dst, lab))
        for start in range(len(labels)):
            stack = [(start, (labels[start],), 1)]
            bag[(labels[start],)] += 1
            while stack:
                v, gram, depth = stack.pop()
                if depth >= k:
                    continue
                for dst, lab in sorted(out.get(v, []), key=lambda e: (e[1], e[0])):
                    g2 = gram + (lab, labels[dst])
                    bag[g2] += 1
                    stack.append((dst, g2, depth + 1))
    return bag


def _ngram_stats(cand_bag: Counter, gold_bag: Counter, k=3):
    """Per-order (clipped match, candidate total) counts."""
    stats = []
    for n in range(1, k + 1):
        cn = {g: c for g, c in cand_bag.items() if (len(g) + 1) // 2 == n}
        gn = {g: c for g, c in gold_bag.items() if (len(g) + 1) // 2 == n}
        match = sum(min(c, gn.get(g, 0)) for g, c in cn.items())
        total = sum(cn.values())
        stats.append((match, total))
    return stats


def _bleu_from_stats(stats, cand_len, gold_len):
    if cand_len == 0:
        return 0.0
    logs = []
    for match, total in stats:
        if total == 0 or match == 0:
            return 0.0
        logs.append(math.log(match / total))
    bp = 1.0 if cand_len >= gold_len else math.exp(1.0 - gold_len / cand_len)
    return bp * math.exp(sum(logs) / len(logs))


def sembleu(candidate, gold, k=3) -> float:
    cand_bag = graph_ngrams(candidate, k)
    gold_bag = graph_ngrams(gold, k)
    cand_len = sum(c for g, c in cand_bag.items() if len(g) == 1)
    gold_len = sum(c for g, c in gold_bag.items() if len(g) == 1)
    return _bleu_from_stats(_ngram_stats(cand_bag, gold_bag, k), cand_len, gold_len)


# ---------------------------------------------------------------------------
# Corpus evaluation


@dataclass
class EvalReport:
    rows: list
    aggregate: dict
    config: dict

    def to_json(self) -> str:
        return json.dumps(
            {"config": self.config, "rows": self.rows, "aggregate": self.aggregate},
            sort_keys=True, indent=2) + "\n"

    def to_tsv(self) -> str:
        cols = ["id", "sembleu", "elsmatch_f1", "elsmatch_p", "elsmatch_r", "fragments"]
        lines = ["\t".join(cols)]
        for row in self.rows:
            lines.append("\t".join(_fmt(row.get(c)) for c in cols))
        agg = self.aggregate
        lines.append("\t".join(
            ["#corpus"] + [_fmt(agg.get(c)) for c in cols[1:]]))
        return "\n".join(lines) + "\n"


def _fmt(v):
    if v is None:
        return "-"
    if isinstance(v, float):
        return "%.6f" % v
    return str(v)


def corpus_eval(pairs, k=3, restarts=4, seed=0, ids=None) -> EvalReport:
    """Evaluate candidate/gold pairs.

    pairs: list of (candidate, gold) where each side is a UlfGraph or a
    list of fragments.  SemBLEU aggregates corpus-level with pooled
    n-gram counts; EL-Smatch pools triple counts.  Per-pair RNG is
    derived from (seed, pair index).
    """
    rows = []
    pooled_stats = [(0, 0)] * k
    pooled_clen = pooled_glen = 0
    pooled_match = pooled_cand = pooled_gold = 0
    frag_total = 0
    for i, (cand, gold) in enumerate(pairs):
        cand_t = TripleSet.from_graph(cand, "a")
        gold_t = TripleSet.from_graph(gold, "b")
        matched, _ = best_mapping(cand_t, gold_t, restarts, seed=hash((seed, i)) % (2**32))
        matched = max(matched, 0)
        p = matched / cand_t.size if cand_t.size else 0.0
        r = matched / gold_t.size if gold_t.size else 0.0
        f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
        cand_bag = graph_ngrams(cand, k)
        gold_bag = graph_ngrams(gold, k)
        stats = _ngram_stats(cand_bag, gold_bag, k)
        clen = sum(c for g, c in cand_bag.items() if len(g) == 1)
        glen = sum(c for g, c in gold_bag.items() if len(g) == 1)
        sb = _bleu_from_stats(stats, clen, glen)
        nfrag = len(_as_fragments(cand))
        rows.append({
            "id": ids[i] if ids else str(i),
            "sembleu": sb, "elsmatch_f1": f1, "elsmatch_p": p, "elsmatch_r": r,
            "fragments": nfrag,
        })
        pooled_stats = [(m + dm, t + dt) for (m, t), (dm, dt) in zip(pooled_stats, stats)]
        pooled_clen += clen
        pooled_glen += glen
        pooled_match += matched
        pooled_cand += cand_t.size
        pooled_gold += gold_t.size
        frag_total += nfrag
    n = len(rows)
    pp = pooled_match / pooled_cand if pooled_cand else 0.0
    pr = pooled_match / pooled_gold if pooled_gold else 0.0
    pf1 = 2 * pp * pr / (pp + pr) if pp + pr > 0 else 0.0
    aggregate = {
        "sembleu": _bleu_from_stats(pooled_stats, pooled_clen, pooled_glen),
        "elsmatch_f1": pf1, "elsmatch_p": pp, "elsmatch_r": pr,
        "fragments": frag_total / n if n else 0.0,
        "pairs": n,
    }
    config = {"k": k, "restarts": restarts, "seed": seed}
    return EvalReport(rows, aggregate, config)
