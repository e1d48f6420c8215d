"""Streaming ensemble anomaly detection: Loda, RS-Hash and xStream ensembles,
sliding-window count tables, score combiners, slot pipelines with hot swap,
Q16.16 fixed-point kernels and AUC / throughput evaluation.

Hot loops run as numba kernels; set ``SEAD_NUMBA=0`` to use the numpy ones.
"""

from .combiners import combine_labels, combine_scores, normalize, threshold_labels
from .core import DataStream, Q16, Sample, SeededRng, derive_seed
from .detectors import (CAPACITY, DetectorSpec, Loda, NotCalibratedError, RSHash, XStream,
                        make_detector, op_count)
from .evaluation import EvalReport, SweepResult, auc_roc, bench, combo_study, sweep_ensemble
from .hashing import SlidingCountTable, jenkins_hash
from .io import DatasetSpec, gen_synthetic, load_csv, write_csv
from .pipeline import (IDENTITY, CombinerSpec, Edge, Identity, Pipeline, PipelineError,
                       RoutingTable, Slot, load_config, parse_config)

__version__ = "0.1.0"
