"""
Manifest ingestion: UTF-8 CSV with header `image,angle`, image paths relative
to the manifest, 8-bit RGB PNG images.
"""
import csv
import logging
import os

import numpy as np
from PIL import Image, UnidentifiedImageError

from steerguard.core.errors import ValidationError
from steerguard.data.dataset import TRAIN, Dataset, Sample

logger = logging.getLogger(__name__)

MANIFEST_HEADER = ['image', 'angle']
MANIFEST_FILE = 'manifest.csv'


def read_png(path: str) -> np.ndarray:
    """8-bit RGB file -> H x W x 3 float64 array in [0, 1] (exact /255 scaling)"""
    try:
        with Image.open(path) as img:
            rgb = np.asarray(img.convert('RGB'), dtype=np.uint8)
    except FileNotFoundError:
        raise ValidationError(f'image file not found: {path}')
    except (UnidentifiedImageError, OSError) as e:
        raise ValidationError(f'cannot read image {path}: {e}')
    return rgb.astype(np.float64) / 255.0


def write_png(image: np.ndarray, path: str):
    """[0, 1] float image -> 8-bit RGB PNG (round to nearest level)"""
    arr = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)
    pixels = np.floor(arr * 255.0 + 0.5).astype(np.uint8)
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    Image.fromarray(pixels).save(path, format='PNG')


def load_manifest(path: str, split_tag: str = TRAIN) -> Dataset:
    """Load a dataset in manifest row order; a directory means its manifest.csv"""
    if os.path.isdir(path):
        path = os.path.join(path, MANIFEST_FILE)
    if not os.path.exists(path):
        raise ValidationError(f'manifest not found: {path}')
    base = os.path.dirname(os.path.abspath(path))
    samples = []
    with open(path, encoding='utf-8', newline='') as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != MANIFEST_HEADER:
            raise ValidationError(f'{path}: header must be "image,angle", got {header}')
        for row_number, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 2:
                raise ValidationError(f'{path}: row {row_number} is malformed: {row}')
            rel_path, raw_angle = row[0].strip(), row[1].strip()
            try:
                angle = float(raw_angle)
            except ValueError:
                raise ValidationError(f'{path}: row {row_number} has a non-numeric angle {raw_angle!r}')
            if not np.isfinite(angle) or not -1.0 <= angle <= 1.0:
                raise ValidationError(f'{path}: row {row_number} angle {angle} outside [-1, 1]')
            image = read_png(os.path.join(base, rel_path))
            samples.append(Sample(image, angle, rel_path))
    if not samples:
        raise ValidationError(f'{path}: manifest has no rows')
    logger.info(f'Loaded {len(samples)} samples from {path}')
    return Dataset(tuple(samples), split_tag, 0)


def write_manifest(dataset: Dataset, out_dir: str, name: str = MANIFEST_FILE) -> str:
    """Write images/<id>.png plus a manifest; returns the manifest path"""
    os.makedirs(os.path.join(out_dir, 'images'), exist_ok=True)
    manifest_path = os.path.join(out_dir, name)
    with open(manifest_path, 'w', encoding='utf-8', newline='') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(MANIFEST_HEADER)
        for sample in dataset:
            rel_path = f'images/{sample.id}.png'
            write_png(sample.image, os.path.join(out_dir, rel_path))
            writer.writerow([rel_path, repr(float(sample.angle))])
    logger.info(f'Wrote {len(dataset)} samples to {manifest_path}')
    return manifest_path
