"""Skeletonization and medial-axis handling.

The medial axis of a chromosome mask is obtained by iterative
two-subpass thinning, cleaned of short side branches, and extended at
both ends so it reaches the mask boundary (thinning erodes the tips).
Axes are ordered point lists on the integer pixel grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

NEIGHBOR_OFFSETS = (
    (-1, -1), (-1, 0), (-1, 1),
    (0, -1), (0, 1),
    (1, -1), (1, 0), (1, 1),
)


class SkeletonError(ValueError):
    """Raised when a skeleton cannot be reduced to an ordered axis."""


class BranchPruneError(SkeletonError):
    """Pruning could not reduce the skeleton to a simple path.

    Carries the offending branch report so callers can log which
    junctions survived.
    """

    def __init__(self, message: str, report: "BranchReport"):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class MedialAxis:
    """Ordered medial-axis points, (row, col) per entry.

    Consecutive points are 8-neighbors and no point repeats.
    """

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.int64)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError(f"expected (N, 2) points, got shape {pts.shape}")
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def arc_length(self) -> float:
        """Euclidean length of the polyline (diagonal steps count sqrt(2))."""
        if len(self.points) < 2:
            return 0.0
        steps = np.diff(self.points, axis=0)
        return float(np.hypot(steps[:, 0], steps[:, 1]).sum())

    @property
    def endpoints(self) -> tuple[tuple[int, int], tuple[int, int]]:
        return tuple(self.points[0]), tuple(self.points[-1])


@dataclass(frozen=True)
class Branch:
    """A dead-end run of skeleton pixels hanging off a junction."""

    pixels: tuple[tuple[int, int], ...]   # ordered from free end toward the junction
    junction: tuple[int, int]

    def __len__(self) -> int:
        return len(self.pixels)


@dataclass(frozen=True)
class BranchReport:
    junctions: tuple[tuple[int, int], ...]
    branches: tuple[Branch, ...] = field(default_factory=tuple)

    @property
    def branch_lengths(self) -> tuple[int, ...]:
        return tuple(len(b) for b in self.branches)


def zhang_suen_thin(mask: np.ndarray) -> np.ndarray:
    """Iterative two-subpass thinning down to a one-pixel-wide skeleton.

    Each subpass flags every deletable foreground pixel from the state
    at the start of the subpass, then deletes them all at once; the
    loop stops when a full two-subpass iteration deletes nothing.
    Deletion requires 2 <= B <= 6 neighbors, exactly one 0->1
    transition around the pixel, and the two directional products of
    the respective subpass to vanish.
    """
    img = np.asarray(mask, dtype=bool).astype(np.uint8)
    if img.ndim != 2:
        raise ValueError(f"expected a 2-D mask, got shape {img.shape}")

    while True:
        deleted = False
        for subpass in (0, 1):
            p = np.pad(img, 1)
            p2 = p[:-2, 1:-1]
            p3 = p[:-2, 2:]
            p4 = p[1:-1, 2:]
            p5 = p[2:, 2:]
            p6 = p[2:, 1:-1]
            p7 = p[2:, :-2]
            p8 = p[1:-1, :-2]
            p9 = p[:-2, :-2]
            ring = (p2, p3, p4, p5, p6, p7, p8, p9, p2)

            b = (p2.astype(np.int32) + p3 + p4 + p5 + p6 + p7 + p8 + p9)
            a = np.zeros_like(b)
            for k in range(8):
                a += (ring[k] == 0) & (ring[k + 1] == 1)

            if subpass == 0:
                prod1 = p2 * p4 * p6
                prod2 = p4 * p6 * p8
            else:
                prod1 = p2 * p4 * p8
                prod2 = p2 * p6 * p8

            remove = (
                (img == 1)
                & (b >= 2) & (b <= 6)
                & (a == 1)
                & (prod1 == 0) & (prod2 == 0)
            )
            if remove.any():
                img[remove] = 0
                deleted = True
        if not deleted:
            break
    return img.astype(bool)


def strip_redundant_pixels(skel: np.ndarray) -> np.ndarray:
    """Drop staircase corners the two-subpass thinning leaves behind.

    At an L-shaped corner the thinning can keep both the corner pixel
    and its diagonal, so mid-path pixels look like junctions.  A pixel
    whose neighbors stay mutually 8-connected without it carries no
    connectivity and is removed; endpoints (a single neighbor) and real
    junction centers (arms not interconnected) are untouched.
    """
    work = np.asarray(skel, dtype=bool).copy()
    h, w = work.shape
    changed = True
    while changed:
        changed = False
        for r, c in sorted(map(tuple, np.argwhere(work))):
            if not work[r, c]:
                continue
            nbrs = [(r + dr, c + dc) for dr, dc in NEIGHBOR_OFFSETS
                    if 0 <= r + dr < h and 0 <= c + dc < w and work[r + dr, c + dc]]
            if len(nbrs) < 2:
                continue
            seen = {nbrs[0]}
            stack = [nbrs[0]]
            while stack:
                pr, pc = stack.pop()
                for q in nbrs:
                    if q not in seen and abs(q[0] - pr) <= 1 and abs(q[1] - pc) <= 1:
                        seen.add(q)
                        stack.append(q)
            if len(seen) == len(nbrs):
                work[r, c] = False
                changed = True
    return work


def _adjacency(skel: np.ndarray) -> dict[tuple[int, int], list[tuple[int, int]]]:
    pixels = set(map(tuple, np.argwhere(skel)))
    return {
        p: [q for q in ((p[0] + dr, p[1] + dc) for dr, dc in NEIGHBOR_OFFSETS) if q in pixels]
        for p in pixels
    }


def _connected(adj: dict) -> bool:
    if not adj:
        return True
    start = next(iter(adj))
    seen = {start}
    stack = [start]
    while stack:
        for q in adj[stack.pop()]:
            if q not in seen:
                seen.add(q)
                stack.append(q)
    return len(seen) == len(adj)


def _branch_report(adj: dict) -> BranchReport:
    junctions = sorted(p for p, nbrs in adj.items() if len(nbrs) >= 3)
    jset = set(junctions)
    endpoints = [p for p, nbrs in adj.items() if len(nbrs) == 1 and p not in jset]

    branches = []
    for end in sorted(endpoints):
        # Walk from the free end until a pixel touching a junction; the
        # run up to (and excluding) the junction is one prunable branch.
        run = [end]
        prev = None
        cur = end
        while True:
            hit = sorted(q for q in adj[cur] if q in jset)
            if hit:
                branches.append(Branch(pixels=tuple(run), junction=hit[0]))
                break
            candidates = [q for q in adj[cur] if q != prev]
            if not candidates:
                break   # run ends at another endpoint: trunk, not a branch
            prev, cur = cur, candidates[0]
            run.append(cur)
    return BranchReport(junctions=tuple(junctions), branches=tuple(branches))


def trace_axis(skel: np.ndarray) -> MedialAxis | BranchReport:
    """Order a one-pixel skeleton into a single path end to end.

    Returns the ordered axis when the skeleton is a simple path, or a
    BranchReport (junction pixels plus dead-end branch runs) when side
    branches remain.  Disconnected and cyclic skeletons raise.
    """
    skel = np.asarray(skel, dtype=bool)
    adj = _adjacency(skel)
    if not adj:
        raise SkeletonError("empty skeleton")
    if not _connected(adj):
        raise SkeletonError("skeleton is disconnected")
    if len(adj) == 1:
        return MedialAxis(points=np.array(list(adj), dtype=np.int64))

    if any(len(nbrs) >= 3 for nbrs in adj.values()):
        return _branch_report(adj)

    endpoints = sorted(p for p, nbrs in adj.items() if len(nbrs) == 1)
    if not endpoints:
        raise SkeletonError("skeleton is cyclic (no endpoints)")
    # Connected, max degree 2, some endpoint: a simple path has exactly two.
    start = endpoints[0]
    path = [start]
    prev = None
    cur = start
    while True:
        nxt = [q for q in adj[cur] if q != prev]
        if not nxt:
            break
        prev, cur = cur, nxt[0]
        path.append(cur)
    if len(path) != len(adj):
        raise SkeletonError("skeleton is not a single path")
    return MedialAxis(points=np.array(path, dtype=np.int64))


def _main_path_pixels(adj: dict) -> set[tuple[int, int]]:
    """Pixels on the longest endpoint-to-endpoint route (hop metric)."""
    endpoints = sorted(p for p, nbrs in adj.items() if len(nbrs) == 1)
    if len(endpoints) < 2:
        return set()

    def bfs(src):
        dist = {src: 0}
        parent = {src: None}
        queue = [src]
        for cur in queue:
            for q in adj[cur]:
                if q not in dist:
                    dist[q] = dist[cur] + 1
                    parent[q] = cur
                    queue.append(q)
        return dist, parent

    best = None
    for src in endpoints:
        dist, parent = bfs(src)
        for dst in endpoints:
            if dst == src or dst not in dist:
                continue
            key = (dist[dst], src, dst)
            if best is None or key > (best[0], best[1], best[2]):
                best = (dist[dst], src, dst, parent)
    if best is None:
        return set()
    _, _, dst, parent = best
    path = set()
    cur = dst
    while cur is not None:
        path.add(cur)
        cur = parent[cur]
    return path


def prune_branches(skel: np.ndarray, prune_ratio: float = 0.1) -> np.ndarray:
    """Remove short dead-end branches until a simple path remains.

    A branch qualifies for removal when its pixel count is at most
    prune_ratio times the current total skeleton pixel count; the
    shortest qualifying branch goes first and the longest
    endpoint-to-endpoint route is never touched.  Removing a run can
    leave its junction pixel carrying no connectivity (a spur off a
    straight trunk fans into three trunk pixels), so redundant pixels
    are stripped after each removal.  If junctions remain and no branch
    qualifies, a BranchPruneError carries the report.
    """
    if not 0 <= prune_ratio <= 1:
        raise ValueError(f"prune_ratio must be in [0, 1], got {prune_ratio}")
    work = np.asarray(skel, dtype=bool).copy()

    while True:
        result = trace_axis(work)
        if isinstance(result, MedialAxis):
            return work
        report = result
        total = int(work.sum())
        adj = _adjacency(work)
        protected = _main_path_pixels(adj)
        limit = prune_ratio * total
        candidates = [
            b for b in report.branches
            if len(b) <= limit and not (set(b.pixels) & protected)
        ]
        if not candidates:
            raise BranchPruneError(
                f"{len(report.branches)} branch(es) remain above the prune "
                f"limit of {limit:.1f} pixels", report)
        victim = min(candidates, key=lambda b: (len(b), b.pixels[0]))
        for r, c in victim.pixels:
            work[r, c] = False
        work = strip_redundant_pixels(work)


def _principal_direction(window: np.ndarray, outward_ref: np.ndarray) -> np.ndarray:
    """Unit least-squares direction of a point run, oriented along the reference."""
    centered = window.astype(np.float64) - window.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    d = vt[0]
    norm = np.linalg.norm(d)
    if norm == 0:
        raise SkeletonError("degenerate direction window")
    d = d / norm
    if float(d @ outward_ref) < 0:
        d = -d
    return d


def _boundary_pixels(mask: np.ndarray) -> np.ndarray:
    """Foreground pixels with a 4-connected background (or off-image) side."""
    m = np.asarray(mask, dtype=bool)
    padded = np.pad(m, 1, constant_values=False)
    interior = (
        padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
    )
    return np.argwhere(m & ~interior)


def extend_axis(
    axis: MedialAxis,
    mask: np.ndarray,
    gap_threshold: float = 6.0,
    direction_window: int = 5,
) -> MedialAxis:
    """Grow the axis from each endpoint toward the mask boundary.

    An endpoint further than gap_threshold from the nearest boundary
    pixel is extended in unit steps along the least-squares direction
    of its last direction_window points, adding rounded grid points
    until the next step would leave the mask (or the image).  Points
    are only ever appended, never moved.
    """
    mask = np.asarray(mask, dtype=bool)
    pts = axis.points
    if len(pts) < 2:
        raise SkeletonError("axis too short to extend (need >= 2 points)")
    boundary = _boundary_pixels(mask)
    if len(boundary) == 0:
        raise SkeletonError("mask has no boundary (empty mask)")

    def extension(ordered: np.ndarray) -> list[tuple[int, int]]:
        """New points walking outward past ordered[-1]."""
        end = ordered[-1]
        gap = np.hypot(*(boundary - end).T).min()
        if gap <= gap_threshold:
            return []
        window = ordered[-direction_window:]
        ref = (end - window[0]).astype(np.float64)
        if not ref.any():
            ref = (end - ordered[-2]).astype(np.float64)
        d = _principal_direction(window, ref)

        existing = set(map(tuple, ordered))
        added: list[tuple[int, int]] = []
        pos = end.astype(np.float64)
        last = tuple(end)
        for _ in range(mask.shape[0] + mask.shape[1]):
            pos = pos + d
            px = (int(np.rint(pos[0])), int(np.rint(pos[1])))
            if px == last:
                continue
            if not (0 <= px[0] < mask.shape[0] and 0 <= px[1] < mask.shape[1]):
                break
            if not mask[px] or px in existing:
                break
            added.append(px)
            existing.add(px)
            last = px
        return added

    head = extension(pts[::-1])
    tail = extension(pts)
    new_points = np.concatenate([
        np.array(head[::-1], dtype=np.int64).reshape(-1, 2),
        pts,
        np.array(tail, dtype=np.int64).reshape(-1, 2),
    ])
    return MedialAxis(points=new_points)


def mask_axis(mask: np.ndarray, prune_ratio: float = 0.1,
              gap_threshold: float = 6.0) -> MedialAxis:
    """Full mask-to-axis chain: thin, prune if branched, extend to the tips."""
    skel = strip_redundant_pixels(zhang_suen_thin(mask))
    traced = trace_axis(skel)
    if isinstance(traced, BranchReport):
        skel = prune_branches(skel, prune_ratio)
        traced = trace_axis(skel)
        if not isinstance(traced, MedialAxis):
            raise SkeletonError("pruning left a branched skeleton")
    if len(traced) < 2:
        raise SkeletonError("skeleton reduced to fewer than two pixels")
    return extend_axis(traced, mask, gap_threshold=gap_threshold)
