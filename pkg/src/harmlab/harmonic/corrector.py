"""Finite-volume corrector for lattice-embedded environments."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..environment import RootedEnvironment, ball
from .dirichlet import HarmonicField, dirichlet_solve


@dataclass(frozen=True, eq=False)
class CorrectorEstimate:
    field: HarmonicField  # x -> <v, x> + chi(x), harmonic inside B(R)
    chi: np.ndarray  # aligned with field.ball.members
    profile: dict  # r -> sup_{B(r)} |chi| / r


def dyadic_radii(R: int, r_min: int = 1) -> list[int]:
    out, r = [], max(1, r_min)
    while r <= R // 2:
        out.append(r)
        r *= 2
    return out


def estimate_corrector(env: RootedEnvironment, v, R: int, radii=None,
                       tol: float = 1e-10) -> CorrectorEstimate:
    """Dirichlet solve on B_root(R) with boundary data <v, x - x_root>; chi = h - <v, x>.

    Coordinates are taken relative to the root, so chi(root) is the value the
    harmonic extension assigns there.
    """
    if env.coords is None:
        raise ValueError("corrector needs a lattice-embedded environment")
    v = np.asarray(v, dtype=float)
    b = ball(env, env.root, R)
    lin = (env.coords - env.coords[env.root]) @ v
    h = dirichlet_solve(env, b, lin, tol=tol)
    chi = h.values - lin[b.members]
    radii = dyadic_radii(R) if radii is None else list(radii)
    profile = {}
    for r in radii:
        inside = b.distance <= r
        profile[int(r)] = float(np.max(np.abs(chi[inside])) / r)
    return CorrectorEstimate(h, chi, profile)
