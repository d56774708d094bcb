"""Fixation records and the gaze-map pipeline.

Turns raw per-frame fixations into 49x49 training targets (binary map ->
Gaussian blur sigma=2 -> l1-normalize) and into full-resolution pairs for
saliency evaluation.
"""

import csv
from collections import defaultdict
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

from .errors import ConfigError, ContractError, DegenerateMapError, NoFixations

GRID = 49
TRAIN_SIGMA = 2.0
EVAL_GT_SIGMA = 19.0


@dataclass
class FixationRecord:
    frame: int
    subject: int
    x: float  # normalized, rightward in [0,1]
    y: float  # normalized, downward in [0,1]


def read_fixations(path):
    """Load a fixation CSV (header frame,subject,x,y) grouped by frame."""
    by_frame = defaultdict(list)
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        for row in reader:
            rec = FixationRecord(int(row["frame"]), int(row["subject"]),
                                 float(row["x"]), float(row["y"]))
            if not (0.0 <= rec.x <= 1.0 and 0.0 <= rec.y <= 1.0):
                raise ContractError("fixation out of [0,1]: %s in %s"
                                    % (rec, path))
            by_frame[rec.frame].append(rec)
    return dict(by_frame)


def write_fixations(path, records):
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["frame", "subject", "x", "y"])
        for r in records:
            writer.writerow([r.frame, r.subject, "%.6f" % r.x, "%.6f" % r.y])


def _bin(coord, n):
    return min(int(np.floor(coord * n)), n - 1)


def build_fixation_map(fixations, grid=GRID):
    """Binary grid with a 1 at each fixation's cell."""
    if not fixations:
        raise NoFixations("frame has no fixations")
    m = np.zeros((grid, grid))
    for rec in fixations:
        m[_bin(rec.y, grid), _bin(rec.x, grid)] = 1.0
    return m


def gaussian_kernel_1d(sigma):
    radius = int(np.ceil(3.0 * sigma))
    d = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-d * d / (2.0 * sigma * sigma))
    return k / k.sum()


def gaussian_blur(m, sigma):
    """Separable Gaussian blur, kernel truncated at ceil(3*sigma), zero pad."""
    if sigma < 0:
        raise ConfigError("sigma must be >= 0, got %g" % sigma)
    m = np.asarray(m, dtype=np.float64)
    if sigma == 0:
        return m.copy()
    k = gaussian_kernel_1d(sigma)
    out = correlate1d(m, k, axis=0, mode="constant", cval=0.0)
    return correlate1d(out, k, axis=1, mode="constant", cval=0.0)


def normalize_l1(m):
    m = np.asarray(m, dtype=np.float64)
    s = m.sum()
    if s <= 0:
        raise DegenerateMapError("cannot l1-normalize a map with sum %g" % s)
    return m / s


def normalize_minmax(m):
    m = np.asarray(m, dtype=np.float64)
    lo, hi = m.min(), m.max()
    if hi <= lo:
        raise DegenerateMapError("cannot min-max normalize a constant map")
    return (m - lo) / (hi - lo)


def make_training_target(fixations, grid=GRID, sigma=TRAIN_SIGMA):
    """Per-frame GT gaze map: binary fixations -> blur -> l1-normalize."""
    return normalize_l1(gaussian_blur(build_fixation_map(fixations, grid), sigma))


def bilinear_upsample(m, height, width):
    """Bilinear resize with half-pixel centers; edges clamped."""
    m = np.asarray(m, dtype=np.float64)
    h, w = m.shape
    ys = (np.arange(height) + 0.5) * (h / height) - 0.5
    xs = (np.arange(width) + 0.5) * (w / width) - 0.5
    y0 = np.clip(np.floor(ys).astype(int), 0, h - 1)
    x0 = np.clip(np.floor(xs).astype(int), 0, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = np.clip(ys - y0, 0.0, 1.0)[:, None]
    fx = np.clip(xs - x0, 0.0, 1.0)[None, :]
    top = m[np.ix_(y0, x0)] * (1 - fx) + m[np.ix_(y0, x1)] * fx
    bot = m[np.ix_(y1, x0)] * (1 - fx) + m[np.ix_(y1, x1)] * fx
    return top * (1 - fy) + bot * fy


def fixation_pixels(fixations, height, width):
    """Unique (row, col) pixel locations of the fixations."""
    seen = []
    for rec in fixations:
        p = (_bin(rec.y, height), _bin(rec.x, width))
        if p not in seen:
            seen.append(p)
    return seen


def pred_eval_map(pred, height, width):
    """Predicted 49x49 map -> blur sigma=2 -> bilinear upsample -> min-max."""
    return normalize_minmax(
        bilinear_upsample(gaussian_blur(pred, TRAIN_SIGMA), height, width))


def gt_eval_map(fixations, height, width):
    """Subject-averaged binary fixation maps -> blur sigma=19 -> min-max."""
    if not fixations:
        raise NoFixations("frame has no fixations")
    subjects = defaultdict(list)
    for rec in fixations:
        subjects[rec.subject].append(rec)
    acc = np.zeros((height, width))
    for recs in subjects.values():
        binary = np.zeros((height, width))
        for rec in recs:
            binary[_bin(rec.y, height), _bin(rec.x, width)] = 1.0
        acc += binary
    acc /= len(subjects)
    return normalize_minmax(gaussian_blur(acc, EVAL_GT_SIGMA))


def make_eval_pair(pred, fixations, height, width):
    """Build (pred_eval, gt_eval) full-resolution maps in [0,1]."""
    if height < GRID or width < GRID:
        raise ContractError("frame size must be >= %dx%d" % (GRID, GRID))
    return (pred_eval_map(pred, height, width),
            gt_eval_map(fixations, height, width))


def mirror_augment(features, targets):
    """Horizontally flip a (N,7,7,C) feature sequence and its gaze targets."""
    features = np.asarray(features)
    targets = np.asarray(targets)
    return features[:, :, ::-1, :].copy(), targets[:, :, ::-1].copy()
