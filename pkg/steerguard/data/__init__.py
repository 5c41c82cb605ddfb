"""
Datasets: synthetic road scenes, manifest ingestion, splitting
"""
from steerguard.data.dataset import TEST, TRAIN, Dataset, Sample, split
from steerguard.data.manifest import load_manifest, read_png, write_manifest, write_png
from steerguard.data.synthetic import generate_sample, generate_synthetic, steering_label

__all__ = [
    'TEST',
    'TRAIN',
    'Dataset',
    'Sample',
    'generate_sample',
    'generate_synthetic',
    'load_manifest',
    'read_png',
    'split',
    'steering_label',
    'write_manifest',
    'write_png',
]
