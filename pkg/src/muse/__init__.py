"""Multi-sense word embeddings with reinforcement-learned sense selection.

The package splits the problem into a linear sense selection module
(`selection`) and a purely sense-level skip-gram representation module
(`representation`), trained jointly (`trainer`) by treating the collocation
estimate as the reward of a one-step decision process.
"""

from .config import Learner, TrainingConfig
from .corpus import (CollocationSample, ContextWindow, MergeReport,
                     UnigramTable, Vocabulary, build_negative_table,
                     build_vocabulary, keep_probability,
                     make_pseudoword_corpus, stream_samples)
from .errors import ConfigError, FormatError, MuseError, TrainingError
from .evaluation import (ScwsItem, SynonymQuestion, answer_synonym,
                         avg_sim_c, evaluate_scws, evaluate_synonyms,
                         knn_senses, load_scws, load_synonym_questions,
                         max_sim_c, spearman)
from .params import (ModelParams, SenseRef, export_text, init_params,
                     load_model, read_text_vectors, save_model)
from .representation import (RewardKind, reward_bernoulli, reward_exact,
                             sgns_update)
from .selection import (SelectionScores, Strategy, StrategyKind,
                        decode_sequence, encode_context, score_senses,
                        select_sense)
from .trainer import (DiagnosticTrace, Trainer, TrainStats,
                      policy_gradient_update, qlearning_update,
                      run_appendix_a_diagnostic)

__version__ = "0.1.0"
