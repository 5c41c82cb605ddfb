"""
Evaluation harness: metrics, reports, renderings and the full protocol
"""
from steerguard.evaluation.metrics import (DetectionRow, TransferCell, detection_curve, name_models,
                                           false_positive_rows, rate_of, rescore_sweep,
                                           run_attack, success_rate, threshold_sweep,
                                           transfer_matrix)
from steerguard.evaluation.protocol import ProtocolConfig, run_protocol
from steerguard.evaluation.render import (render_adversarial, render_comparison,
                                          render_steering_tracks)
from steerguard.evaluation.report import (EvaluationReport, emit_report, load_report,
                                          make_run_id)

__all__ = [
    'DetectionRow',
    'EvaluationReport',
    'ProtocolConfig',
    'TransferCell',
    'detection_curve',
    'emit_report',
    'false_positive_rows',
    'load_report',
    'make_run_id',
    'name_models',
    'rate_of',
    'render_adversarial',
    'render_comparison',
    'render_steering_tracks',
    'rescore_sweep',
    'run_attack',
    'run_protocol',
    'success_rate',
    'threshold_sweep',
    'transfer_matrix',
]
