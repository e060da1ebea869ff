"""Explicit shallow-water time stepping on a closed MAC grid.

One public :func:`step` advances the state through the six-stage pipeline:
semi-Lagrangian velocity advection and conservative upwind height advection,
a small-depth stability clamp, total-height construction, rain deposits,
a pressure (gravity) update, and velocity extrapolation into dry regions.
The domain boundary is a closed box: zero normal velocity, zero flux, so
water volume is conserved exactly up to the clamp rule.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .fields import ScalarField2D, StaggeredVelocityField

HEIGHT_CLAMP_THRESHOLD = 1e-6  # depths below this are zeroed for stability
CFL_SAFETY = 0.5
MAX_SUBSTEPS = 10_000

Deposit = tuple[tuple[int, int], float]  # ((ix, iy), depth increment in m)


@dataclass
class SweState:
    """Ground/occlusion heights, water depth, face velocities and sim clock."""

    H: ScalarField2D
    h: ScalarField2D
    vel: StaggeredVelocityField
    Hocc: ScalarField2D = None
    g: float = 9.81
    t: float = 0.0

    def __post_init__(self):
        if self.Hocc is None:
            # With Hocc == H the occlusion test can never trigger.
            self.Hocc = self.H.copy()
        shapes = {self.H.data.shape, self.h.data.shape, self.Hocc.data.shape}
        if len(shapes) != 1:
            raise ValueError(f"field shapes differ: {shapes}")
        if np.any(self.Hocc.data < self.H.data):
            raise ValueError("occlusion layer lies below the ground somewhere")
        if np.any(self.h.data < 0.0):
            raise ValueError("negative water depth in initial state")
        for name, fld in (("H", self.H), ("h", self.h), ("Hocc", self.Hocc)):
            if not np.all(np.isfinite(fld.data)):
                raise ValueError(f"{name} contains non-finite samples")

    def eta(self) -> ScalarField2D:
        return construct_eta(self.H, self.h)

    def total_volume(self) -> float:
        return float(self.h.data.sum()) * self.h.dx ** 2


@dataclass
class StepStats:
    """Bookkeeping for one :func:`step` call."""

    substeps: int = 0
    clamp_loss: float = 0.0       # water depth removed by the stability clamp (m, summed)
    deposit_total: float = 0.0    # rain depth added (m, summed over cells)
    max_cfl: float = 0.0          # max over substeps of max|u| * dt_sub / dx


def advect_velocity_semilagrangian(
    vel: StaggeredVelocityField, dt: float
) -> StaggeredVelocityField:
    """Backtrace every face by its full local velocity and resample.

    The off-component at a face is the average of its four neighboring
    faces (realized as a bilinear sample of the other component's grid at
    the face position).  Backtrace targets clamp to the grid; boundary
    faces are re-zeroed afterwards.
    """
    ux, uy = vel.u_face_positions()
    X, Y = np.meshgrid(ux, uy)
    bx = X - dt * vel.u
    by = Y - dt * vel.sample_v(X, Y)
    new_u = vel.sample_u(bx, by)

    vx, vy = vel.v_face_positions()
    X, Y = np.meshgrid(vx, vy)
    bx = X - dt * vel.sample_u(X, Y)
    by = Y - dt * vel.v
    new_v = vel.sample_v(bx, by)

    out = StaggeredVelocityField(vel.nx, vel.ny, vel.dx, vel.origin, new_u, new_v)
    out.close_boundary()
    return out


def advect_height_upwind(
    h: ScalarField2D, vel: StaggeredVelocityField, dt: float
) -> ScalarField2D:
    """Conservative first-order upwind transport of the depth field.

    Per interior face the flux is ``u_face * h_donor`` with the donor cell
    taken upwind.  A cell's total outgoing flux is scaled down if it would
    exceed the cell's current volume within ``dt``, so depths stay
    non-negative without breaking conservation (the scaled flux is still
    added to one cell and removed from the other).
    """
    hd = h.data
    dx = h.dx
    u = vel.u
    v = vel.v

    F = np.zeros_like(u)  # m^2/s through vertical faces
    F[:, 1:-1] = u[:, 1:-1] * np.where(u[:, 1:-1] > 0.0, hd[:, :-1], hd[:, 1:])
    G = np.zeros_like(v)
    G[1:-1, :] = v[1:-1, :] * np.where(v[1:-1, :] > 0.0, hd[:-1, :], hd[1:, :])

    out_rate = (
        np.maximum(F[:, 1:], 0.0)
        + np.maximum(-F[:, :-1], 0.0)
        + np.maximum(G[1:, :], 0.0)
        + np.maximum(-G[:-1, :], 0.0)
    )
    need = out_rate * dt
    avail = hd * dx
    scale = np.ones_like(hd)
    over = need > avail
    if np.any(over):
        scale[over] = avail[over] / need[over]
        su = np.where(u[:, 1:-1] > 0.0, scale[:, :-1], scale[:, 1:])
        F[:, 1:-1] *= su
        sv = np.where(v[1:-1, :] > 0.0, scale[:-1, :], scale[1:, :])
        G[1:-1, :] *= sv

    div = (F[:, 1:] - F[:, :-1] + G[1:, :] - G[:-1, :]) / dx
    return h.like(np.maximum(hd - dt * div, 0.0))


def clamp_height(h: ScalarField2D) -> ScalarField2D:
    """Zero every depth sample below the stability threshold."""
    d = h.data
    return h.like(np.where(d < HEIGHT_CLAMP_THRESHOLD, 0.0, d))


def construct_eta(H: ScalarField2D, h: ScalarField2D) -> ScalarField2D:
    """Total surface height eta = ground + water depth."""
    if H.data.shape != h.data.shape or H.dx != h.dx:
        raise ValueError(
            f"ground {H.data.shape}@{H.dx} and depth {h.data.shape}@{h.dx} "
            "live on different grids"
        )
    return H.like(H.data + h.data)


def apply_pressure(
    vel: StaggeredVelocityField, eta: ScalarField2D, dt: float, g: float
) -> StaggeredVelocityField:
    """Accelerate interior faces down the total-height gradient."""
    out = vel.copy()
    e = eta.data
    k = dt * g / eta.dx
    out.u[:, 1:-1] -= k * (e[:, 1:] - e[:, :-1])
    out.v[1:-1, :] -= k * (e[1:, :] - e[:-1, :])
    return out


def _extrapolate_component(vals: np.ndarray, source: np.ndarray) -> np.ndarray:
    """Fill non-source faces with the value of the nearest source face.

    Distance is breadth-first over the face grid's 4-neighborhood; ties go
    to the source with the smallest linear index.  Layered propagation of
    the minimum source index reproduces exactly that rule.
    """
    H, W = vals.shape
    big = np.iinfo(np.int64).max
    src_idx = np.where(source, np.arange(H * W, dtype=np.int64).reshape(H, W), big)
    assigned = source.copy()
    while not assigned.all():
        a = np.where(assigned, src_idx, big)
        nb = np.full((4, H, W), big, dtype=np.int64)
        nb[0, 1:, :] = a[:-1, :]
        nb[1, :-1, :] = a[1:, :]
        nb[2, :, 1:] = a[:, :-1]
        nb[3, :, :-1] = a[:, 1:]
        cand = nb.min(axis=0)
        new = ~assigned & (cand < big)
        src_idx[new] = cand[new]
        assigned |= new
    return vals.ravel()[src_idx]


def extrapolate_velocity(
    vel: StaggeredVelocityField, h: ScalarField2D
) -> StaggeredVelocityField:
    """Copy velocities from wet-adjacent faces into the dry region.

    A cell is wet iff h > 0; a face bordering at least one wet cell keeps
    its value and seeds the breadth-first fill.  With no wet cell at all,
    every face becomes zero.  Boundary faces are re-zeroed afterwards.
    """
    wet = h.data > 0.0
    out = vel.copy()
    if not wet.any():
        out.u[:] = 0.0
        out.v[:] = 0.0
        return out
    if wet.all():
        return out

    u_src = np.zeros_like(vel.u, dtype=bool)
    u_src[:, :-1] |= wet
    u_src[:, 1:] |= wet
    if not u_src.all():
        out.u = _extrapolate_component(vel.u, u_src)

    v_src = np.zeros_like(vel.v, dtype=bool)
    v_src[:-1, :] |= wet
    v_src[1:, :] |= wet
    if not v_src.all():
        out.v = _extrapolate_component(vel.v, v_src)

    out.close_boundary()
    return out


def cfl_dt(h: ScalarField2D, vel: StaggeredVelocityField, g: float) -> float:
    """Largest stable substep: half a cell per (advective + gravity-wave) speed."""
    speed = vel.max_speed() + np.sqrt(g * max(float(h.data.max()), 0.0))
    return CFL_SAFETY * h.dx / (speed + 1e-9)


def step(
    state: SweState, dt: float, deposits: list[Deposit] = ()
) -> tuple[SweState, StepStats]:
    """Advance the state by ``dt``, substepping under the CFL bound.

    Rain deposits are applied once, on the first substep, between the
    height construction and the pressure stage.  Returns the new state and
    per-step bookkeeping.
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    stats = StepStats()
    h = state.h
    vel = state.vel
    remaining = dt
    first = True
    while remaining > 0.0:
        if stats.substeps >= MAX_SUBSTEPS:
            raise RuntimeError(f"exceeded {MAX_SUBSTEPS} substeps; unstable state")
        dt_sub = min(remaining, cfl_dt(h, vel, state.g))

        new_vel = advect_velocity_semilagrangian(vel, dt_sub)
        h_star = advect_height_upwind(h, vel, dt_sub)

        below = h_star.data[(h_star.data > 0.0) & (h_star.data < HEIGHT_CLAMP_THRESHOLD)]
        stats.clamp_loss += float(below.sum())
        h_star = clamp_height(h_star)

        eta = construct_eta(state.H, h_star)

        if first:
            for (ix, iy), dh in deposits:
                if dh < 0.0:
                    raise ValueError(f"negative deposit {dh} at cell ({ix}, {iy})")
                h_star.data[iy, ix] += dh
                stats.deposit_total += dh
            first = False

        new_vel = apply_pressure(new_vel, eta, dt_sub, state.g)
        new_vel = extrapolate_velocity(new_vel, h_star)

        h = h_star
        vel = new_vel
        remaining -= dt_sub
        stats.substeps += 1
        stats.max_cfl = max(stats.max_cfl, vel.max_speed() * dt_sub / h.dx)

    return replace(state, h=h, vel=vel, t=state.t + dt), stats
