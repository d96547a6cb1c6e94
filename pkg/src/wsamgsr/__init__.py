"""Gene-set guided feature selection with optional network-connectivity weights.

The selection screens gene sets by a permutation test on SAM statistics,
reduces each significant set to a core subset, and fits a calibrated
linear classifier on the union of cores.
"""

__version__ = "0.1.0"

from .connectivity import (ConnectivityGraph, WeightVector, build_graph, connectivity_weights,
                           normalize_weights, setcount_vs_connectivity)
from .data import (DataError, ExpressionDataset, FoldAssignment, GeneSetCollection,
                   drop_constant_genes, make_folds, restrict_collection, standardize)
from .metrics import (EvalReport, PosteriorMatrix, StabilityReport, aupr, belief_confusion,
                      error_rate, evaluate, generalized_brier, rand_index, stability)
from .permutation import (PermutationPlan, SetPValueTable, StatConfig, build_plan,
                          null_statistics, set_pvalues, subset_pvalue)
from .pipeline import (FittedPipeline, LinearClassifier, TuningResult, composite_four_class,
                       fit_classifier, predict, select_and_fit, tune_threshold)
from .reduction import (ConfigError, PreparedRun, ReductionTrace, SamgsrConfig, SamgsrResult,
                        Signature, reduce_set, run_samgsr, screen_sets)
from .sam import (S0Rule, SamStatistics, pooled_sd, sam_statistic, samgs_score,
                  weighted_sam_statistic)
from .simulation import (ReplicateSummary, SimConfig, StudySettings, replicate_study,
                         resimulate_from_real, simulate_dataset, synthetic_universe)
