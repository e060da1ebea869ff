"""Raindrop spawning, ballistic fall and the two-layer collision test.

Drops are stored structure-of-arrays in :class:`DropArray` for speed; a
scalar :class:`Raindrop` view exists for tests and debugging.  A drop that
reaches the water/ground surface deposits its full volume into the height
field cell below it and leaves an :class:`Impact` for splash rendering; a
drop that crosses the occlusion layer vanishes without a trace.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fields import ScalarField2D
from .swe import Deposit


@dataclass
class Raindrop:
    pos: np.ndarray      # world (x, y, z), m
    vel: np.ndarray      # m/s, z component < 0
    radius: float        # m


@dataclass
class Impact:
    """A ground/water hit, kept at full sub-cell precision for splashes."""

    pos: np.ndarray      # (x, y, eta) at the moment of impact
    vel: np.ndarray      # drop velocity at impact
    radius: float


@dataclass
class RainParams:
    spawn_rate: float = 60.0            # drops per second per m^2
    mean_radius: float = 0.002          # m, exponential-distribution mean
    r_min: float = 0.0005               # m
    r_max: float = 0.006                # m
    fall_velocity: tuple[float, float, float] = (0.0, 0.0, -8.0)  # m/s, incl. wind
    spawn_height: float = 2.0           # m above the domain's highest surface
    rng_seed: int = 0

    def __post_init__(self):
        if self.spawn_rate < 0.0:
            raise ValueError(f"spawn_rate must be >= 0, got {self.spawn_rate}")
        if not (0.0 < self.r_min <= self.mean_radius <= self.r_max):
            raise ValueError(
                f"need 0 < r_min <= mean_radius <= r_max, got "
                f"{self.r_min}, {self.mean_radius}, {self.r_max}"
            )
        if self.fall_velocity[2] >= 0.0:
            raise ValueError("fall velocity must point downward (z < 0)")


@dataclass
class DropArray:
    """Live raindrops, structure-of-arrays."""

    pos: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    vel: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    radius: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __len__(self) -> int:
        return self.pos.shape[0]

    def __getitem__(self, k: int) -> Raindrop:
        return Raindrop(self.pos[k].copy(), self.vel[k].copy(), float(self.radius[k]))

    def to_drops(self) -> list[Raindrop]:
        return [self[k] for k in range(len(self))]

    @classmethod
    def from_drops(cls, drops: list[Raindrop]) -> "DropArray":
        if not drops:
            return cls()
        return cls(
            pos=np.array([d.pos for d in drops], dtype=np.float64),
            vel=np.array([d.vel for d in drops], dtype=np.float64),
            radius=np.array([d.radius for d in drops], dtype=np.float64),
        )

    @classmethod
    def concat(cls, a: "DropArray", b: "DropArray") -> "DropArray":
        return cls(
            pos=np.concatenate([a.pos, b.pos]),
            vel=np.concatenate([a.vel, b.vel]),
            radius=np.concatenate([a.radius, b.radius]),
        )


def deposit_depth(radius: float, dx: float) -> float:
    """Depth increment a drop of `radius` adds to one cell of size `dx`."""
    return 4.0 * math.pi * radius**3 / (3.0 * dx * dx)


def clamped_exponential_mean(mean: float, lo: float, hi: float) -> float:
    """Analytic mean of an Exp(mean) sample clamped to [lo, hi]."""
    return lo + mean * (math.exp(-lo / mean) - math.exp(-hi / mean))


def spawn_raindrops(
    params: RainParams,
    domain_rect: tuple[float, float, float, float],
    spawn_z: float,
    dt: float,
    rng: np.random.Generator,
) -> DropArray:
    """Spawn a Poisson batch of drops uniformly over the domain rectangle.

    The count is Poisson(spawn_rate * area * dt); positions are uniform over
    `domain_rect` = (xmin, ymin, xmax, ymax) at height `spawn_z`; radii are
    exponential with the configured mean, clamped to [r_min, r_max].  The
    rng is consumed in a fixed order (count, positions, radii) so a seed
    fully determines the drop stream.
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    xmin, ymin, xmax, ymax = domain_rect
    area = (xmax - xmin) * (ymax - ymin)
    lam = params.spawn_rate * area * dt
    if lam == 0.0:
        return DropArray()
    n = int(rng.poisson(lam))
    if n == 0:
        return DropArray()
    xy = rng.uniform((xmin, ymin), (xmax, ymax), size=(n, 2))
    radii = np.clip(rng.exponential(params.mean_radius, size=n), params.r_min, params.r_max)
    pos = np.column_stack([xy, np.full(n, spawn_z)])
    vel = np.tile(np.asarray(params.fall_velocity, dtype=np.float64), (n, 1))
    return DropArray(pos=pos, vel=vel, radius=radii)


def spawn_ceiling(eta: ScalarField2D, Hocc: ScalarField2D, params: RainParams) -> float:
    """World z at which new drops appear: spawn_height above the tallest surface."""
    return params.spawn_height + max(float(eta.data.max()), float(Hocc.data.max()))


def advance_raindrops(
    drops: DropArray,
    eta: ScalarField2D,
    Hocc: ScalarField2D,
    dt: float,
) -> tuple[DropArray, list[Deposit], list[Impact]]:
    """Ballistic update plus collision against the water surface and occluder.

    Per drop, after ``pos += vel * dt``, using the cell under (x, y):

    * at or below the water surface (z <= eta) -> removed, deposits
      ``4*pi*r^3 / (3*dx^2)`` into that cell, records an Impact;
    * else crossed the occlusion layer this step (old z above, new z at
      or below) -> removed, no deposit.  Crossing, not just being under
      Hocc, so drops legitimately below an overhang keep falling;
    * outside the horizontal domain -> removed, no deposit;
    * otherwise it survives.

    Deposits are returned in drop order so summation is reproducible.
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    if len(drops) == 0:
        return drops, [], []

    old_z = drops.pos[:, 2].copy()
    pos = drops.pos + drops.vel * dt
    x, y, z = pos[:, 0], pos[:, 1], pos[:, 2]

    ix, iy = eta.cell_index(x, y)
    inside = (ix >= 0) & (ix < eta.nx) & (iy >= 0) & (iy < eta.ny)
    ixc = np.clip(ix, 0, eta.nx - 1)
    iyc = np.clip(iy, 0, eta.ny - 1)
    eta_below = eta.data[iyc, ixc]
    occ_below = Hocc.data[iyc, ixc]

    hit_ground = (z <= eta_below) & inside
    hit_occ = (old_z > occ_below) & (z <= occ_below) & inside & ~hit_ground
    survive = inside & ~hit_occ & ~hit_ground

    deposits: list[Deposit] = []
    impacts: list[Impact] = []
    for k in np.nonzero(hit_ground)[0]:
        r = float(drops.radius[k])
        deposits.append(((int(ix[k]), int(iy[k])), deposit_depth(r, eta.dx)))
        impacts.append(
            Impact(
                pos=np.array([x[k], y[k], eta_below[k]]),
                vel=drops.vel[k].copy(),
                radius=r,
            )
        )

    survivors = DropArray(
        pos=pos[survive], vel=drops.vel[survive], radius=drops.radius[survive]
    )
    return survivors, deposits, impacts
