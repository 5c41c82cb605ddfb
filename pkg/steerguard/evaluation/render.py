"""
PNG renderings: adversarial triptychs, steering tracks and multi-attack strips.
"""
import logging
import os
from typing import Sequence

import numpy as np
from PIL import Image, ImageDraw

from steerguard.attacks.base import AdversarialExample
from steerguard.core.errors import ValidationError

logger = logging.getLogger(__name__)

PANEL_SIZE = 192
CAPTION_HEIGHT = 16
GAP = 4
BACKGROUND = (255, 255, 255)
TEXT = (0, 0, 0)
TRACK_COLORS = [(0, 200, 0), (255, 200, 0), (255, 120, 0), (230, 0, 0), (160, 0, 160), (0, 120, 255)]


def to_pil(image: np.ndarray, size: int = PANEL_SIZE) -> Image.Image:
    """[0, 1] float image -> 8-bit RGB, nearest-neighbour upscaled to size x size"""
    arr = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)
    pixels = np.floor(arr * 255.0 + 0.5).astype(np.uint8)
    img = Image.fromarray(pixels)
    if img.size != (size, size):
        img = img.resize((size, size), Image.Resampling.NEAREST)
    return img


def amplified(perturbation: np.ndarray, amplify: float) -> np.ndarray:
    """clip(0.5 + amplify * perturbation, 0, 1): zero perturbation renders mid-gray"""
    return np.clip(0.5 + amplify * np.asarray(perturbation, dtype=np.float64), 0.0, 1.0)


def _save(canvas: Image.Image, out_path: str) -> str:
    directory = os.path.dirname(os.path.abspath(out_path))
    try:
        os.makedirs(directory, exist_ok=True)
        canvas.save(out_path, format='PNG')
    except OSError as e:
        raise OSError(f'cannot write {out_path}: {e}') from e
    logger.info(f'Rendered {out_path}')
    return out_path


def _grid(rows: Sequence[Sequence[Image.Image]], captions: Sequence[Sequence[str]]) -> Image.Image:
    n_cols = max(len(r) for r in rows)
    cell_h = PANEL_SIZE + CAPTION_HEIGHT
    width = n_cols * PANEL_SIZE + (n_cols + 1) * GAP
    height = len(rows) * cell_h + (len(rows) + 1) * GAP
    canvas = Image.new('RGB', (width, height), BACKGROUND)
    draw = ImageDraw.Draw(canvas)
    for r, (panels, texts) in enumerate(zip(rows, captions)):
        top = GAP + r * (cell_h + GAP)
        for c, (panel, text) in enumerate(zip(panels, texts)):
            left = GAP + c * (PANEL_SIZE + GAP)
            canvas.paste(panel, (left, top))
            draw.text((left + 2, top + PANEL_SIZE + 2), text, fill=TEXT)
    return canvas


def render_adversarial(example: AdversarialExample, amplify: float = 5.0,
                       out_path: str = 'adversarial.png') -> str:
    """original | adversarial | amplified perturbation, annotated with both predictions"""
    if not amplify > 0:
        raise ValidationError(f'amplify must be > 0, got {amplify}')
    panels = [
        to_pil(example.original),
        to_pil(example.adversarial),
        to_pil(amplified(example.perturbation, amplify)),
    ]
    captions = [
        f'original {example.pred_original:+.4f}',
        f'{example.attack_id.value} {example.pred_adversarial:+.4f}',
        f'perturbation x{amplify:g}',
    ]
    return _save(_grid([panels], [captions]), out_path)


def track_points(angle: float, size: int, steps: int = 24):
    """
    Image-space polyline of the path a car would follow with a fixed steering
    angle: starts at the bottom centre, bends towards the steering side.
    """
    points = []
    horizon = 0.45 * size
    for i in range(steps + 1):
        t = i / steps
        y = size - 1 - t * horizon
        x = size / 2.0 + angle * 0.6 * size * t ** 2
        points.append((x, y))
    return points


def render_steering_tracks(image: np.ndarray, angle: float,
                           deviations: Sequence[float] = (0.0, 0.1, 0.2, 0.3),
                           out_path: str = 'tracks.png', size: int = PANEL_SIZE * 2) -> str:
    """One predicted track per angle + deviation, drawn over the upscaled scene"""
    if not deviations:
        raise ValidationError('need at least one deviation to draw')
    canvas = to_pil(image, size)
    draw = ImageDraw.Draw(canvas)
    for index, deviation in enumerate(deviations):
        steered = float(np.clip(angle + deviation, -1.0, 1.0))
        color = TRACK_COLORS[index % len(TRACK_COLORS)]
        draw.line(track_points(steered, size), fill=color, width=3)
        draw.text((4, 4 + 12 * index), f'{steered:+.2f} (+{deviation:g})', fill=color)
    return _save(canvas, out_path)


def render_comparison(examples: Sequence[AdversarialExample], amplify: float = 5.0,
                      out_path: str = 'comparison.png') -> str:
    """Adversarial images on top, amplified perturbations below, one column per attack"""
    if not examples:
        raise ValidationError('render_comparison needs at least one example')
    if not amplify > 0:
        raise ValidationError(f'amplify must be > 0, got {amplify}')
    top = [to_pil(e.adversarial) for e in examples]
    bottom = [to_pil(amplified(e.perturbation, amplify)) for e in examples]
    top_text = [f'{e.attack_id.value} {e.pred_adversarial:+.4f}' for e in examples]
    bottom_text = [f'orig {e.pred_original:+.4f} dev {e.deviation:.3f}' for e in examples]
    return _save(_grid([top, bottom], [top_text, bottom_text]), out_path)
