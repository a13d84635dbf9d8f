"""ulfparse: a transition-based semantic parser for Episodic Logic
Unscoped Logical Forms (ULF).

Submodules:

- core: atoms, s-expression trees, graphs, penman conversion
- align: heuristic word/atom alignment
- machine: the node-generative cache transition system
- oracle: gold action-sequence extraction
- typesys: semantic types, composition checks, lexicon filtering
- decode: transition-state features, perceptron training, beam search
- metrics: EL-Smatch and SemBLEU
- cli: corpus handling and the command-line interface
"""

from .core import (
    Atom,
    Sentence,
    Token,
    UlfGraph,
    Vertex,
    emit_penman,
    graph_to_tree,
    graphs_equal,
    parse_penman,
    parse_sexpr,
    render_sexpr,
    tree_to_graph,
)
from .align import AlignmentMap, align, olap, rl, sim
from .machine import Config, Machine
from .oracle import DEFAULT_PROMOTE_SYMBOLS, Oracle, build_symbol_sets, extract
from .metrics import corpus_eval, el_smatch, sembleu

__version__ = "0.1.0"
