"""Proper coverings of a ball by smaller balls."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..environment import RootedEnvironment, ball, distances


@dataclass(frozen=True, eq=False)
class BallCover:
    """r-balls around ``centers`` covering B_target(R).

    ``overlap`` is the largest number of the doubled balls B_y(2r) containing
    a single vertex, counted exactly.
    """

    target: int
    R: int
    radius: int
    centers: np.ndarray
    overlap: int

    @property
    def count(self) -> int:
        return int(self.centers.size)

    def balls(self, env: RootedEnvironment):
        return [ball(env, int(y), self.radius) for y in self.centers]


def proper_cover(env: RootedEnvironment, center: int, R: int, r: int) -> BallCover:
    """Greedy maximal family of disjoint floor(r/2)-balls centred in B_center(R).

    Maximality puts every vertex of B_center(R) within 2 floor(r/2) <= r of a
    centre, so the r-balls cover. Both the cover and the overlap of the 2r-balls
    are checked by direct counting.
    """
    if r < 1:
        raise ValueError("cover radius must be >= 1")
    target = ball(env, center, R)
    a = r // 2
    order = target.members[np.lexsort((target.members, target.distance))]
    blocked = np.zeros(env.n_vertices, dtype=bool)
    centers = []
    for v in order:
        if blocked[v]:
            continue
        centers.append(int(v))
        d = distances(env, int(v), 2 * a)
        blocked[d >= 0] = True
    centers = np.array(centers, dtype=np.int64)

    nearest = np.full(env.n_vertices, np.iinfo(np.int64).max)
    hits = np.zeros(env.n_vertices, dtype=np.int64)
    for y in centers:
        d = distances(env, int(y), 2 * r)
        reached = d >= 0
        nearest[reached] = np.minimum(nearest[reached], d[reached])
        hits += reached
    if np.any(nearest[target.members] > r):
        raise AssertionError("greedy family failed to cover the ball")
    return BallCover(int(center), int(R), int(r), centers, int(hits.max()))
