"""Metagraph-guided random walks and skip-gram embeddings for typed networks."""
import warnings

from numba.core.errors import NumbaWarning

# numba probes TBB on first parallel launch; the old system TBB is harmless
warnings.filterwarnings("ignore", message="The TBB threading layer", category=NumbaWarning)

__version__ = "0.1.0"

from .errors import (EvaluationError, GraphError, HinEmbedError, MetagraphError,  # noqa: E402
                     SchemaError, TrainingError, WalkError)
from .graph import Schema, TypedGraph, load_graph, load_schema, parse_schema  # noqa: E402
from .metagraph import (MetaGraph, RecursiveLayerMap, allowed_transitions,  # noqa: E402
                        chain_from_metapath, parse_metagraph, validate)
from .synth import SynthConfig, generate_hin, sparsify_venues  # noqa: E402
from .trainer import EmbeddingModel, TrainConfig, count_pairs, train  # noqa: E402
from .walker import WalkCorpus, WalkState, generate_corpus, generate_walk  # noqa: E402

__all__ = [
    "EmbeddingModel", "EvaluationError", "GraphError", "HinEmbedError", "MetaGraph", "MetagraphError",
    "RecursiveLayerMap", "Schema", "SchemaError", "SynthConfig", "TrainConfig", "TrainingError",
    "TypedGraph", "WalkCorpus", "WalkError", "WalkState", "allowed_transitions", "chain_from_metapath",
    "count_pairs", "generate_corpus", "generate_hin", "generate_walk", "load_graph", "load_schema",
    "parse_metagraph", "parse_schema", "sparsify_venues", "train", "validate",
]
