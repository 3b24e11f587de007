"""Joint user/topic stance embeddings from signed topic graphs."""

from .contexts import ContextConfig, TrainingExample, build_examples, inferred_sign
from .edges import EdgeFeature, EdgeOp, edge_feature, edge_matrix, phi
from .evaluation import (
    EvalConfig,
    EvalReport,
    FoldSplit,
    balance_downsample,
    coldstart_subset,
    evaluate,
    make_folds,
)
from .graph import (
    Edge,
    GraphFormatError,
    SignedTopicGraph,
    TopicSubgraphView,
    aggregate_parallel_edges,
    load_edge_list,
    read_edge_list,
    topic_subgraph,
    write_edge_list,
)
from .metrics import auc
from .sgns import CombineMode, EmbeddingStore, TrainerConfig, combine_sigma, train
from .synthetic import SyntheticConfig, generate
from .walks import Walk, WalkConfig, WalkCorpus, generate_corpus, sample_next, sample_walk, transition_weights

__version__ = "0.1.0"
