from .analysis import AXIS_NAMES, QUANTILES, PCAResult, distance_error_stats, pca, spatial_correlation
from .metrics import (
    METRIC_NAMES,
    MetricsRecord,
    betainc_regularized,
    classification_metrics,
    paired_t_test,
    roc_auc,
    t_two_sided_p,
)
from .probe import LinearProbe, embed_dataset, kfold_cv, stratified_folds, summarize, train_linear_probe
from .report import (
    metrics_csv,
    read_metrics_csv,
    scatter_svg,
    ttest_rows,
    write_correlation_csv,
    write_metrics_csv,
    write_quantiles_csv,
    write_scatter_svg,
    write_ttest_csv,
)

__all__ = [
    "AXIS_NAMES",
    "QUANTILES",
    "PCAResult",
    "distance_error_stats",
    "pca",
    "spatial_correlation",
    "METRIC_NAMES",
    "MetricsRecord",
    "betainc_regularized",
    "classification_metrics",
    "paired_t_test",
    "roc_auc",
    "t_two_sided_p",
    "LinearProbe",
    "embed_dataset",
    "kfold_cv",
    "stratified_folds",
    "summarize",
    "train_linear_probe",
    "metrics_csv",
    "read_metrics_csv",
    "scatter_svg",
    "ttest_rows",
    "write_correlation_csv",
    "write_metrics_csv",
    "write_quantiles_csv",
    "write_scatter_svg",
    "write_ttest_csv",
]
