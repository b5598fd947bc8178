"""Comment-volume prediction from early comment dynamics."""

__version__ = "0.1.0"

from .corpus import (
    Article,
    Comment,
    Corpus,
    FoldPlan,
    ReplyTree,
    build_reply_tree,
    compute_target,
    eligible,
    load_corpus,
    save_corpus,
    split_folds,
)
from .evaluation import (
    FitReport,
    SelectionTrace,
    ablation_suite,
    cross_validate,
    mae,
    r_squared,
    stepwise_forward_select,
)
from .features import (
    DesignMatrix,
    FeatureVector,
    assemble_matrix,
    complexity,
    extract_features,
    rate,
    tree_depth_width,
)
from .learn import (
    ForestModel,
    HyperGrid,
    LinearModel,
    ModelSpec,
    fit_mlp,
    fit_ols,
    fit_random_forest,
    fit_svr,
    grid_search,
)
from .ratemodel import (
    LineComparison,
    RateFit,
    compare_lines,
    fit_rate_line,
    qq_normal,
    rate_analysis,
)
from .synth import (
    SynthConfig,
    default_paper_config,
    generate_corpus,
    generate_provenance,
    overall_paper_config,
)
from .taxonomy import CATEGORY_LABELS, categorize_topic, propagate_categories

__all__ = [
    "Article",
    "CATEGORY_LABELS",
    "Comment",
    "Corpus",
    "DesignMatrix",
    "FeatureVector",
    "FitReport",
    "FoldPlan",
    "ForestModel",
    "HyperGrid",
    "LineComparison",
    "LinearModel",
    "ModelSpec",
    "RateFit",
    "ReplyTree",
    "SelectionTrace",
    "SynthConfig",
    "ablation_suite",
    "assemble_matrix",
    "build_reply_tree",
    "categorize_topic",
    "compare_lines",
    "complexity",
    "compute_target",
    "cross_validate",
    "default_paper_config",
    "eligible",
    "extract_features",
    "fit_mlp",
    "fit_ols",
    "fit_random_forest",
    "fit_rate_line",
    "fit_svr",
    "generate_corpus",
    "generate_provenance",
    "grid_search",
    "load_corpus",
    "mae",
    "overall_paper_config",
    "propagate_categories",
    "qq_normal",
    "r_squared",
    "rate",
    "rate_analysis",
    "save_corpus",
    "split_folds",
    "stepwise_forward_select",
    "tree_depth_width",
]
