from .records import CSV_COLUMNS, MetricsCollector, RoundMetrics, best_round, make_round, rounds_to_accuracy
from .evaluate import evaluate_accuracy, predict_logits
from .estimate import (
    ClientBytes,
    CommEstimate,
    batch_sizes,
    combine_estimates,
    control_bytes,
    estimate_ensemble_bytes,
    estimate_fl_bytes,
    estimate_split_bytes,
)
from .export import export_metrics, metrics_path, read_metrics_json

__all__ = [
    'CSV_COLUMNS', 'MetricsCollector', 'RoundMetrics', 'best_round', 'make_round', 'rounds_to_accuracy',
    'evaluate_accuracy', 'predict_logits',
    'ClientBytes', 'CommEstimate', 'batch_sizes', 'combine_estimates', 'control_bytes',
    'estimate_ensemble_bytes', 'estimate_fl_bytes', 'estimate_split_bytes',
    'export_metrics', 'metrics_path', 'read_metrics_json',
]
