"""Point-set geometry helpers: unions of axis boxes and weighted samples."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = ["BoxSet", "MeasuredSet"]


@dataclass
class BoxSet:
    """Union of closed axis-parallel boxes ``[lo, hi]`` (degenerate axes allowed)."""

    lows: np.ndarray
    highs: np.ndarray

    def __post_init__(self):
        self.lows = np.atleast_2d(np.asarray(self.lows, float))
        self.highs = np.atleast_2d(np.asarray(self.highs, float))
        if self.lows.shape != self.highs.shape:
            raise ValueError("box bounds have different shapes")
        if np.any(self.highs < self.lows):
            raise ValueError("box with hi < lo")

    @classmethod
    def from_boxes(cls, boxes: Iterable[tuple[Sequence[float], Sequence[float]]]) -> "BoxSet":
        boxes = list(boxes)
        return cls(np.array([b[0] for b in boxes], float), np.array([b[1] for b in boxes], float))

    @property
    def n(self) -> int:
        return self.lows.shape[1]

    def union(self, other: "BoxSet") -> "BoxSet":
        return BoxSet(np.vstack([self.lows, other.lows]), np.vstack([self.highs, other.highs]))

    def distance(self, P) -> np.ndarray:
        """Euclidean distance from each point to the set."""
        P = np.atleast_2d(np.asarray(P, float))
        best = np.full(len(P), np.inf)
        for lo, hi in zip(self.lows, self.highs):
            gap = np.maximum(np.maximum(lo - P, P - hi), 0.0)
            best = np.minimum(best, np.sqrt(np.sum(gap * gap, axis=1)))
        return best

    def contains(self, P, tol: float = 1e-12) -> np.ndarray:
        return self.distance(P) <= tol

    def box_dims(self) -> list[int]:
        return [int(np.sum(hi > lo)) for lo, hi in zip(self.lows, self.highs)]

    def measure(self, d: int) -> float:
        """Sum of d-dimensional box volumes (overlaps counted twice)."""
        total = 0.0
        for lo, hi in zip(self.lows, self.highs):
            ext = hi - lo
            if int(np.sum(ext > 0)) == d:
                total += float(np.prod(ext[ext > 0]))
        return total

    def lattice(self, h: float) -> np.ndarray:
        """Points of every box on a lattice of spacing at most ``h`` (box corners included)."""
        pts = []
        for lo, hi in zip(self.lows, self.highs):
            axes = []
            for a, b in zip(lo, hi):
                m = max(1, int(math.ceil((b - a) / h))) if b > a else 0
                axes.append(np.linspace(a, b, m + 1) if m else np.array([a]))
            grid = np.meshgrid(*axes, indexing="ij")
            pts.append(np.stack([g.ravel() for g in grid], axis=1))
        return np.unique(np.vstack(pts), axis=0) if pts else np.zeros((0, self.n))

    def measured(self, d: int, h: float) -> "MeasuredSet":
        """Midpoint-rule sample of H^d on the d-dimensional boxes."""
        pts, wts, frames = [], [], []
        for lo, hi in zip(self.lows, self.highs):
            ext = hi - lo
            live = np.flatnonzero(ext > 0)
            if len(live) != d:
                continue
            axes = []
            cell = 1.0
            for i in range(self.n):
                if ext[i] > 0:
                    m = max(1, int(math.ceil(ext[i] / h)))
                    step = ext[i] / m
                    axes.append(lo[i] + step * (np.arange(m) + 0.5))
                    cell *= step
                else:
                    axes.append(np.array([lo[i]]))
            grid = np.meshgrid(*axes, indexing="ij")
            P = np.stack([g.ravel() for g in grid], axis=1)
            frame = np.zeros((self.n, d))
            for c, i in enumerate(live):
                frame[i, c] = 1.0
            pts.append(P)
            wts.append(np.full(len(P), cell))
            frames.append(np.repeat(frame[None], len(P), axis=0))
        if not pts:
            return MeasuredSet(d, np.zeros((0, self.n)), np.zeros(0), np.zeros((0, self.n, d)))
        return MeasuredSet(d, np.vstack(pts), np.concatenate(wts), np.concatenate(frames))


@dataclass
class MeasuredSet:
    """Weighted point cloud approximating H^d restricted to a d-dimensional set.

    ``frames[i]`` is an ``n x d`` matrix with orthonormal columns spanning the
    approximate tangent plane at ``points[i]``. ``frames`` may be ``None`` for
    clouds without tangent data (usable only as unrectifiable sets).
    """

    d: int
    points: np.ndarray
    weights: np.ndarray
    frames: np.ndarray | None = field(repr=False)

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, float))
        self.weights = np.asarray(self.weights, float)
        if len(self.weights) != len(self.points):
            raise ValueError("weights and points differ in length")
        if np.any(self.weights < 0):
            raise ValueError("negative weight")

    @property
    def mass(self) -> float:
        return float(self.weights.sum())

    def subset(self, mask) -> "MeasuredSet":
        frames = None if self.frames is None else self.frames[mask]
        return MeasuredSet(self.d, self.points[mask], self.weights[mask], frames)

    def union(self, other: "MeasuredSet") -> "MeasuredSet":
        return MeasuredSet(
            self.d,
            np.vstack([self.points, other.points]),
            np.concatenate([self.weights, other.weights]),
            None if self.frames is None or other.frames is None else np.concatenate([self.frames, other.frames]),
        )

    @classmethod
    def segment(cls, a, b, m: int) -> "MeasuredSet":
        """Midpoint sample of the segment [a, b] with ``m`` pieces."""
        a, b = np.asarray(a, float), np.asarray(b, float)
        t = (np.arange(m) + 0.5) / m
        P = a + t[:, None] * (b - a)
        length = float(np.linalg.norm(b - a))
        u = (b - a) / length
        return cls(1, P, np.full(m, length / m), np.repeat(u[None, :, None], m, axis=0))
