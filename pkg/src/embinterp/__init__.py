"""Random-walk node embeddings, interpretability scores and downstream evaluation."""

__version__ = "0.1.0"

from .graph import (DataError, Graph, GraphStats, NodeGrouping, ParseError, graph_stats,
                    load_edge_list, load_labels, sample_non_edges)
from .walks import TransactionLog, WalkConfig, WalkCorpus, generate_cooccurrence_pairs, generate_walks
from .sgns import EmbeddingMatrix, TrainConfig, Vocab, build_vocab, sgns_loss_and_grads, train
from .louvain import CommunityAssignment, louvain, modularity
from .interpret import ISConfig, ISMatrix, aggregate, export_is_heatmap, interpretability, is_scores
from .evaluate import EvalConfig, EvalReport, auc, link_prediction_eval, micro_f1, run_task_suite
