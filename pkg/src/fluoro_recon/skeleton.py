"""Mask skeletonization and backbone sampling.

Masks are boolean ``(height, width)`` arrays; pixel ``(row, col)`` sits at
image coordinate ``(u, v) = (col, row)``.
"""

from __future__ import annotations

import heapq
import math

import numpy as np
from scipy import ndimage

from .errors import EmptySkeleton, MultipleComponents, NoEndpoints, PathTooShort

EIGHT = ndimage.generate_binary_structure(2, 2)
_OFFSETS = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]


def as_mask(data) -> np.ndarray:
    m = np.asarray(data)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise ValueError(f"mask must be a non-empty 2D grid, got shape {m.shape}")
    return m != 0


def _neighbors(m):
    """Return x1..x8 as boolean planes: east first, counterclockwise."""
    p = np.pad(m, 1)
    h, w = m.shape

    def at(dr, dc):
        return p[1 + dr : 1 + dr + h, 1 + dc : 1 + dc + w]

    return (
        at(0, 1), at(-1, 1), at(-1, 0), at(-1, -1),
        at(0, -1), at(1, -1), at(1, 0), at(1, 1),
    )


def _guo_hall_deletable(m, first):
    x1, x2, x3, x4, x5, x6, x7, x8 = _neighbors(m)
    # crossing number: white 4-neighbor followed by a black pair, counterclockwise
    xh = (
        (~x1 & (x2 | x3)).astype(np.int8)
        + (~x3 & (x4 | x5))
        + (~x5 & (x6 | x7))
        + (~x7 & (x8 | x1))
    )
    n1 = (x1 | x2).astype(np.int8) + (x3 | x4) + (x5 | x6) + (x7 | x8)
    n2 = (x2 | x3).astype(np.int8) + (x4 | x5) + (x6 | x7) + (x8 | x1)
    n = np.minimum(n1, n2)
    if first:
        keep = (x2 | x3 | ~x8) & x1
    else:
        keep = (x6 | x7 | ~x4) & x5
    return m & (xh == 1) & (n >= 2) & (n <= 3) & ~keep


def thin(mask) -> np.ndarray:
    """Guo-Hall two-subiteration parallel thinning (8-connected skeleton)."""
    m = as_mask(mask).copy()
    while True:
        changed = False
        for first in (True, False):
            d = _guo_hall_deletable(m, first)
            if d.any():
                m &= ~d
                changed = True
        if not changed:
            return m


def neighbor_count(m) -> np.ndarray:
    m = as_mask(m)
    return ndimage.convolve(m.astype(np.int16), EIGHT.astype(np.int16), mode="constant") - m


def find_endpoints(skel) -> list[tuple[int, int]]:
    """Foreground pixels with exactly one foreground 8-neighbor, row-major order."""
    m = as_mask(skel)
    rows, cols = np.nonzero(m & (neighbor_count(m) == 1))
    return [(int(r), int(c)) for r, c in zip(rows, cols)]


def _dijkstra(m, source):
    """Geodesic distance and predecessor map over the 8-connected pixel graph."""
    h, w = m.shape
    dist = {source: 0.0}
    prev = {source: None}
    heap = [(0.0, source)]
    done = set()
    while heap:
        d, node = heapq.heappop(heap)
        if node in done:
            continue
        done.add(node)
        r, c = node
        for dr, dc in _OFFSETS:
            rr, cc = r + dr, c + dc
            if 0 <= rr < h and 0 <= cc < w and m[rr, cc]:
                nd = d + (math.sqrt(2.0) if dr and dc else 1.0)
                nb = (rr, cc)
                if nd < dist.get(nb, math.inf) - 1e-12:
                    dist[nb] = nd
                    prev[nb] = node
                    heapq.heappush(heap, (nd, nb))
    return dist, prev


def path_length(points) -> float:
    pts = np.asarray(points, dtype=np.float64)
    if len(pts) < 2:
        return 0.0
    return float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())


def longest_path(skel) -> list[tuple[int, int]]:
    """Longest endpoint-to-endpoint geodesic through a single-component skeleton.

    Distances use unit axial steps and sqrt(2) diagonal steps. Among equally
    long paths the one whose start pixel is lexicographically smallest wins;
    the path starts at that pixel.
    """
    m = as_mask(skel)
    if not m.any():
        raise EmptySkeleton("skeleton has no foreground pixels")
    _, ncomp = ndimage.label(m, structure=EIGHT)
    if ncomp > 1:
        raise MultipleComponents(f"skeleton has {ncomp} connected components")
    if m.sum() == 1:
        r, c = np.argwhere(m)[0]
        return [(int(r), int(c))]
    ends = find_endpoints(m)
    if not ends:
        raise NoEndpoints("skeleton has no endpoints (closed loop)")

    best = None
    for start in ends:  # row-major, so the first maximum has the smallest start
        dist, prev = _dijkstra(m, start)
        for end in ends:
            if end == start:
                continue
            d = dist[end]
            if best is None or d > best[0] + 1e-9:
                best = (d, start, end, prev)
    if best is None:
        raise NoEndpoints("skeleton has a single endpoint")
    _, start, end, prev = best
    path = [end]
    while path[-1] != start:
        path.append(prev[path[-1]])
    return path[::-1]


def orient_distal_first(path, image_shape, tip=None) -> list[tuple[int, int]]:
    """Order ``path`` so index 0 is the distal tip.

    With a ``tip`` hint ``(u, v)`` the path end nearer to it is distal.
    Otherwise the end farther from the image border is distal, since the
    proximal end enters the field of view at the insertion side.
    """
    path = list(path)
    if len(path) < 2:
        return path
    a, b = np.array(path[0], float), np.array(path[-1], float)
    if tip is not None:
        t = np.array([tip[1], tip[0]], dtype=np.float64)  # (u, v) -> (row, col)
        flip = np.linalg.norm(b - t) < np.linalg.norm(a - t)
    else:
        h, w = image_shape[:2]

        def border(p):
            return min(p[0], p[1], h - 1 - p[0], w - 1 - p[1])

        flip = border(b) > border(a)
    return path[::-1] if flip else path


def sample_backbone(path, n: int) -> np.ndarray:
    """``n`` points equally spaced in pixel arc length along ``path``.

    Returns an ``(n, 2)`` array of ``(u, v)`` coordinates; the first point is
    the path start and the last point the path end.
    """
    if n < 2:
        raise PathTooShort("need n >= 2 samples")
    rc = np.asarray(path, dtype=np.float64).reshape(-1, 2)
    if len(rc) < 2:
        raise PathTooShort(f"path has {len(rc)} pixel(s); at least 2 are required")
    uv = rc[:, ::-1]
    cum = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(uv, axis=0), axis=1))])
    targets = np.linspace(0.0, cum[-1], n)
    return np.column_stack([np.interp(targets, cum, uv[:, 0]), np.interp(targets, cum, uv[:, 1])])


def extract_backbone(mask, n: int, tip=None) -> np.ndarray:
    """Thin, trace and sample a view mask; returns ``(n, 2)`` distal-first pixels."""
    skel = thin(mask)
    path = longest_path(_largest_component(skel))
    path = orient_distal_first(path, skel.shape, tip)
    return sample_backbone(path, n)


def _largest_component(m):
    labels, ncomp = ndimage.label(m, structure=EIGHT)
    if ncomp <= 1:
        return m
    sizes = ndimage.sum(m, labels, index=np.arange(1, ncomp + 1))
    return labels == (int(np.argmax(sizes)) + 1)


def read_pgm(path) -> np.ndarray:
    """Read a binary (P5) 8-bit PGM; any nonzero pixel is foreground."""
    with open(path, "rb") as f:
        data = f.read()
    return parse_pgm(data)


def parse_pgm(data: bytes) -> np.ndarray:
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError("truncated PGM header")
        tokens.append(data[start:pos])
    if tokens[0] != b"P5":
        raise ValueError(f"not a binary PGM (magic {tokens[0]!r})")
    width, height, maxval = (int(t) for t in tokens[1:])
    if maxval > 255:
        raise ValueError("only 8-bit PGM is supported")
    pos += 1  # single whitespace after maxval
    pixels = np.frombuffer(data, dtype=np.uint8, count=width * height, offset=pos)
    return pixels.reshape(height, width) != 0


def encode_pgm(mask) -> bytes:
    m = as_mask(mask)
    h, w = m.shape
    return b"P5\n%d %d\n255\n" % (w, h) + (m.astype(np.uint8) * 255).tobytes()


def write_pgm(path, mask) -> None:
    with open(path, "wb") as f:
        f.write(encode_pgm(mask))
