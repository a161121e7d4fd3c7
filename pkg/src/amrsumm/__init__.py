"""Abstractive multi-document summarization over AMR graphs.

Sentence AMRs are merged into a source graph, a budgeted subtree is decoded
under a learned linear model, and the result is written as PENMAN.
"""
from .amr import AmrGraph, Concept, ConceptKind, Relation, parse_penman, read_corpus, serialize_penman
from .decoder import CostMode, CostSpec, Model, Selection, decode, score
from .features import CorpusStats, FeatureVector, extract_features
from .graph_builder import SourceGraph, build_source_graph, collapse_entities, merge_key
from .trainer import TrainConfig, TrainingInstance, project_gold, train

__version__ = "0.1.0"

__all__ = [
    "AmrGraph", "Concept", "ConceptKind", "Relation", "parse_penman", "read_corpus", "serialize_penman",
    "CostMode", "CostSpec", "Model", "Selection", "decode", "score",
    "CorpusStats", "FeatureVector", "extract_features",
    "SourceGraph", "build_source_graph", "collapse_entities", "merge_key",
    "TrainConfig", "TrainingInstance", "project_gold", "train",
]
