from .datasets import Dataset, class_templates, load_csv, synth_sequences, train_test_split
from .partition import (
    PartitionPlan,
    PartitionStats,
    imbalanced_sizes,
    load_plan,
    make_plan,
    partition_iid,
    partition_imbalanced,
    partition_noniid,
    partition_stats,
    save_plan,
)

__all__ = [
    'Dataset', 'class_templates', 'load_csv', 'synth_sequences', 'train_test_split',
    'PartitionPlan', 'PartitionStats', 'imbalanced_sizes', 'load_plan', 'make_plan',
    'partition_iid', 'partition_imbalanced', 'partition_noniid', 'partition_stats', 'save_plan',
]
