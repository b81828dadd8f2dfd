"""Independent references for the acceptance checks.

Everything here is written with plain Python loops over scalars and does not
import the package under test, so a bug in the vectorised code cannot hide
in both sides of a comparison.
"""

import itertools
import math

EPS = 1e-7
SMOOTH = 1.0


def scalar_bce(p, t):
    p = min(max(p, EPS), 1.0 - EPS)
    return -(t * math.log(p) + (1.0 - t) * math.log(1.0 - p))


def scalar_pair_cost(gt, pred):
    """Mean clamped BCE plus 1 - (2 tp + 1) / (|pred| + |gt| + 1) for binary masks.

    Counts are accumulated pixel by pixel; the float expression over them is
    the fixed closed form, so equal counts give bit-equal costs.
    """
    tp = fp = fn = tn = 0
    for row_g, row_p in zip(gt, pred):
        for g, p in zip(row_g, row_p):
            if p and g:
                tp += 1
            elif p:
                fp += 1
            elif g:
                fn += 1
            else:
                tn += 1
    n = tp + fp + fn + tn
    ok = -math.log(1.0 - EPS)
    false_pos = -math.log(1.0 - (1.0 - EPS))
    false_neg = -math.log(EPS)
    bce = (ok * (tp + tn) + false_pos * fp + false_neg * fn) / n
    return bce + (1.0 - (2.0 * tp + SMOOTH) / ((tp + fp) + (tp + fn) + SMOOTH))


def brute_force_min_cost(preds, gts):
    """Minimum total cost over every permutation, after padding with all-zero masks."""
    ref = preds[0] if preds else gts[0]
    rows, cols = len(ref), len(ref[0])
    empty = [[0] * cols for _ in range(rows)]
    size = max(len(preds), len(gts))
    p = list(preds) + [empty] * (size - len(preds))
    g = list(gts) + [empty] * (size - len(gts))
    cost = [[scalar_pair_cost(g[i], p[k]) for k in range(size)] for i in range(size)]
    best = math.inf
    for perm in itertools.permutations(range(size)):
        total = math.fsum(cost[i][perm[i]] for i in range(size))
        best = min(best, total)
    return best


def refinement_loss_loop(preds, targets, alpha):
    """Weighted BCE mean over K x H x W with weight alpha where two or more
    thresholded predictions (p > 0.5) claim the pixel and 1 elsewhere."""
    k_count = len(preds)
    rows, cols = len(preds[0]), len(preds[0][0])
    total = 0.0
    for i in range(rows):
        for j in range(cols):
            claims = 0
            for k in range(k_count):
                if preds[k][i][j] > 0.5:
                    claims += 1
            weight = alpha if claims >= 2 else 1.0
            for k in range(k_count):
                total += weight * scalar_bce(preds[k][i][j], targets[k][i][j])
    return total / (k_count * rows * cols)


# Hand-worked metric fixtures.  Each entry: per-slot (intersection, union, score)
# plus the expected per-image IoU; values were computed by hand.
IMAGE_FIXTURES = [
    # P=2, one perfect slot and one fully wrong slot -> (1 + 0) / 2
    {"slots": [(4, 4, 1.0), (0, 4, 1.0)], "iou_img": 0.5},
    # a perfect mask whose score is 0.4 is gated to zero
    {"slots": [(4, 4, 0.4)], "iou_img": 0.0},
    # score exactly 0.5 is still gated (s <= 0.5)
    {"slots": [(4, 4, 0.5)], "iou_img": 0.0},
    # 2/4 and 3/6 -> 0.5 each; third slot gated -> (0.5 + 0.5 + 0) / 3
    {"slots": [(2, 4, 0.9), (3, 6, 0.6), (5, 5, 0.2)], "iou_img": 1.0 / 3.0},
]

# Split-level fixture: two few-target images and one many-target image.
#   image a (few):  slots (4/4, s=1), (0/4, s=1)          -> IoU_img 0.5
#   image b (few):  slot (2/8, s=0.7)                      -> IoU_img 0.25
#   image c (many): 4 slots (1/2, 1/2, 2/4 gated s=.3, 0/2) -> IoU_img (0.5+0.5+0+0)/4 = 0.25
# few:     gIoU = (0.5 + 0.25)/2 = 0.375 ; cIoU = (4+0+2)/(4+4+8) = 6/16 = 0.375
# many:    gIoU = 0.25                   ; cIoU = (1+1+0+0)/(2+2+4+2) = 2/10 = 0.2
# overall: gIoU = (0.5+0.25+0.25)/3 = 1/3 ; cIoU = 8/26
SPLIT_FIXTURE = {
    "images": {
        "a": ("few", [(4, 4, 1.0), (0, 4, 1.0)]),
        "b": ("few", [(2, 8, 0.7)]),
        "c": ("many", [(1, 2, 0.9), (1, 2, 0.8), (2, 4, 0.3), (0, 2, 1.0)]),
    },
    "expected": {
        "few": {"gIoU": 0.375, "cIoU": 0.375},
        "many": {"gIoU": 0.25, "cIoU": 0.2},
        "overall": {"gIoU": 1.0 / 3.0, "cIoU": 8.0 / 26.0},
    },
}


def masks_for_counts(inter, union, width=8):
    """A (pred, gt) pair on a 1 x width strip with the requested overlap counts."""
    assert union <= width and inter <= union
    gt = [[1 if j < union else 0 for j in range(width)]]
    pred = [[1 if j < inter else 0 for j in range(width)]]
    return pred, gt


def covers(kind, geometry, x, y):
    """Point-in-shape for a rectangle (x0, y0, x1, y1) or ellipse (cx, cy, rx, ry)."""
    if kind == "rectangle":
        x0, y0, x1, y1 = geometry
        return x0 <= x < x1 and y0 <= y < y1
    cx, cy, rx, ry = geometry
    dx, dy = (x - cx) / rx, (y - cy) / ry
    return dx * dx + dy * dy <= 1.0


def visible_pixels(shapes, height, width):
    """Per shape, the set of (row, col) whose centre it covers and no deeper-drawn shape hides."""
    owned = [set() for _ in shapes]
    for row in range(height):
        for col in range(width):
            best, best_depth = None, None
            for i, (kind, geometry, depth) in enumerate(shapes):
                if covers(kind, geometry, col + 0.5, row + 0.5) and (best is None or depth > best_depth):
                    best, best_depth = i, depth
            if best is not None:
                owned[best].add((row, col))
    return owned


def rle_counts(mask):
    """Column-major alternating runs beginning with zeros."""
    rows, cols = len(mask), len(mask[0])
    counts, current, run = [], 0, 0
    for c in range(cols):
        for r in range(rows):
            v = 1 if mask[r][c] else 0
            if v != current:
                counts.append(run)
                current, run = v, 0
            run += 1
    counts.append(run)
    return counts
