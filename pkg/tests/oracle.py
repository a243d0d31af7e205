"""Independent reference implementations used to cross-check the library.

Everything here is deliberately written from the definitions in plain
Python (lists, loops, fractions of integer counts), sharing no code with
the package under test. Slow is fine; these run on small inputs.
"""

from itertools import combinations


def dice_pixels(a, b) -> float:
    """Dice from two flat 0/1 sequences."""
    size_a = sum(1 for v in a if v)
    size_b = sum(1 for v in b if v)
    if size_a == 0 and size_b == 0:
        return 1.0
    inter = sum(1 for x, y in zip(a, b) if x and y)
    return 2.0 * inter / (size_a + size_b)


def iou_pixels(a, b) -> float:
    """IoU from two flat 0/1 sequences."""
    size_a = sum(1 for v in a if v)
    size_b = sum(1 for v in b if v)
    if size_a == 0 and size_b == 0:
        return 1.0
    inter = sum(1 for x, y in zip(a, b) if x and y)
    return inter / (size_a + size_b - inter)


def mean(values) -> float:
    total = 0.0
    for v in values:
        total += v
    return total / len(values)


def volume_dice(a, b) -> float:
    """Mean-over-classes Dice for two (C, H, W) nested 0/1 structures."""
    return mean(
        [dice_pixels(_flatten(pa), _flatten(pb)) for pa, pb in zip(a, b)]
    )


def _flatten(plane):
    return [v for row in plane for v in row]


def decode_rle(encoding: str, height: int, width: int):
    """Row-major 1-indexed run decoding into a flat 0/1 list."""
    flat = [0] * (height * width)
    tokens = encoding.split()
    for i in range(0, len(tokens), 2):
        start = int(tokens[i])
        length = int(tokens[i + 1])
        for p in range(start - 1, start - 1 + length):
            flat[p] = 1
    return flat


def greedy_trace(c, d, k: int, ablated: bool = False):
    """Re-derivation of the greedy selection, mechanically different from
    the library: candidates are ranked by an explicit sort key instead of
    a scan. Returns (members, steps); steps map candidate -> score."""
    n = len(d)
    members = [max(range(n), key=lambda i: (d[i], -i))]
    steps = []
    while len(members) < k:
        scores = {}
        for i in range(n):
            if i in members:
                continue
            if ablated:
                scores[i] = mean([c[i][j] for j in members])
            else:
                scores[i] = mean([(1.0 - d[i]) + c[i][j] for j in members])
        ranked = sorted(scores, key=lambda i: (scores[i], -d[i], i))
        members.append(ranked[0])
        steps.append(scores)
    return members, steps


def best_subset(n: int, k: int, fused_dice_of):
    """Exhaustive argmax over size-k subsets; first (lexicographically
    smallest) combination wins ties."""
    best = None
    best_dice = None
    for combo in combinations(range(n), k):
        score = fused_dice_of(combo)
        if best is None or score > best_dice:
            best, best_dice = combo, score
    return best, best_dice


def fuse_mean(volumes):
    """Pixel-wise mean of (C, H, W) nested float structures."""
    c = len(volumes[0])
    h = len(volumes[0][0])
    w = len(volumes[0][0][0])
    out = [[[0.0] * w for _ in range(h)] for _ in range(c)]
    for ci in range(c):
        for y in range(h):
            for x in range(w):
                out[ci][y][x] = mean([v[ci][y][x] for v in volumes])
    return out
