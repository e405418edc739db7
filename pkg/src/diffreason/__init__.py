"""Differentiable semantic reasoning over graph-rewriting rules."""

from .chain import ChainConfig, PathPlan, enumerate_paths, infer, replay, structural_match
from .dsl import (
    DSLError,
    RuleText,
    compile_rule,
    parse_facts,
    parse_rule,
    parse_rules,
    serialize_graph,
    serialize_rule,
)
from .embeddings import Lexicon, VocabStore, cosine, load_toy_lexicon, load_word_vectors, nearest_word, random_embedding
from .graph import Binding, Rule, SemanticGraph, apply_rule, goal_satisfied, match_rule, match_subgraph
from .trainer import TrainConfig, TrainedPath, extract_rules, train_all, train_multi, train_path

__all__ = [
    "Binding",
    "ChainConfig",
    "DSLError",
    "Lexicon",
    "PathPlan",
    "Rule",
    "RuleText",
    "SemanticGraph",
    "TrainConfig",
    "TrainedPath",
    "VocabStore",
    "apply_rule",
    "compile_rule",
    "cosine",
    "enumerate_paths",
    "extract_rules",
    "goal_satisfied",
    "infer",
    "load_toy_lexicon",
    "load_word_vectors",
    "match_rule",
    "match_subgraph",
    "nearest_word",
    "parse_facts",
    "parse_rule",
    "parse_rules",
    "random_embedding",
    "replay",
    "serialize_graph",
    "serialize_rule",
    "structural_match",
    "train_all",
    "train_multi",
    "train_path",
]
