"""Uniform-grid scalar fields and staggered (MAC) velocity fields.

Scalar samples live at cell centers, velocity components at face midpoints.
Conventions used throughout the package:

* arrays are indexed ``[j, i]`` with ``i`` the x index and ``j`` the y index,
  so a ``ScalarField2D`` stores its data as an ``(ny, nx)`` array;
* cell ``(i, j)`` is centered at ``origin + (i*dx, j*dx)``;
* world positions, directions and colors are plain numpy arrays of shape
  ``(3,)`` (or ``(..., 3)`` for batches).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def normalize(v: np.ndarray, axis: int = -1) -> np.ndarray:
    """Unit vector(s) along `axis`; zero vectors are returned unchanged."""
    n = np.linalg.norm(v, axis=axis, keepdims=True)
    return v / np.where(n == 0.0, 1.0, n)


@dataclass
class ScalarField2D:
    """Cell-centered scalar samples on a uniform square-cell grid."""

    nx: int
    ny: int
    dx: float
    origin: tuple[float, float] = (0.0, 0.0)
    data: np.ndarray = field(default=None)  # (ny, nx) float64

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ValueError(f"grid must be at least 2x2, got {self.nx}x{self.ny}")
        if self.dx <= 0.0:
            raise ValueError(f"dx must be positive, got {self.dx}")
        if self.data is None:
            self.data = np.zeros((self.ny, self.nx), dtype=np.float64)
        else:
            self.data = np.asarray(self.data, dtype=np.float64)
            if self.data.shape != (self.ny, self.nx):
                raise ValueError(
                    f"data shape {self.data.shape} does not match grid "
                    f"({self.ny}, {self.nx})"
                )
        # +inf is tolerated so depth maps can mark sky; NaN never is.
        if np.isnan(self.data).any() or np.isneginf(self.data).any():
            raise ValueError("field data contains NaN or -inf samples")

    @classmethod
    def from_array(cls, data, dx: float, origin=(0.0, 0.0)) -> "ScalarField2D":
        data = np.asarray(data, dtype=np.float64)
        ny, nx = data.shape
        return cls(nx=nx, ny=ny, dx=dx, origin=tuple(origin), data=data)

    def copy(self) -> "ScalarField2D":
        return ScalarField2D(self.nx, self.ny, self.dx, self.origin, self.data.copy())

    def like(self, data: np.ndarray) -> "ScalarField2D":
        """New field on the same grid holding `data`."""
        return ScalarField2D(self.nx, self.ny, self.dx, self.origin, np.asarray(data, dtype=np.float64))

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """World x and y coordinates of cell centers, as 1D arrays."""
        ox, oy = self.origin
        return (ox + self.dx * np.arange(self.nx), oy + self.dx * np.arange(self.ny))

    def cell_index(self, x, y) -> tuple[np.ndarray, np.ndarray]:
        """Nearest-center cell index for world positions; may be out of range."""
        ox, oy = self.origin
        i = np.floor((np.asarray(x) - ox) / self.dx + 0.5).astype(np.int64)
        j = np.floor((np.asarray(y) - oy) / self.dx + 0.5).astype(np.int64)
        return i, j

    def domain_rect(self) -> tuple[float, float, float, float]:
        """(xmin, ymin, xmax, ymax) of the covered area, half a cell past centers."""
        ox, oy = self.origin
        return (
            ox - 0.5 * self.dx,
            oy - 0.5 * self.dx,
            ox + (self.nx - 0.5) * self.dx,
            oy + (self.ny - 0.5) * self.dx,
        )

    @property
    def area(self) -> float:
        return self.nx * self.ny * self.dx * self.dx


def _bilinear_on_array(data: np.ndarray, fx: np.ndarray, fy: np.ndarray) -> np.ndarray:
    """Bilinear interpolation of `data[(ny, nx)]` at fractional indices, clamped."""
    ny, nx = data.shape
    fx = np.clip(fx, 0.0, nx - 1.0)
    fy = np.clip(fy, 0.0, ny - 1.0)
    i0 = np.clip(np.floor(fx).astype(np.int64), 0, nx - 2)
    j0 = np.clip(np.floor(fy).astype(np.int64), 0, ny - 2)
    tx = fx - i0
    ty = fy - j0
    v00 = data[j0, i0]
    v10 = data[j0, i0 + 1]
    v01 = data[j0 + 1, i0]
    v11 = data[j0 + 1, i0 + 1]
    return (v00 * (1 - tx) + v10 * tx) * (1 - ty) + (v01 * (1 - tx) + v11 * tx) * ty


def sample_bilinear(fld: ScalarField2D, p) -> np.ndarray:
    """Bilinearly sample the field at world position(s) `p` = (..., 2).

    Positions are clamped to the rectangle spanned by the outermost cell
    centers before interpolation, so out-of-grid queries are well defined.
    """
    p = np.asarray(p, dtype=np.float64)
    ox, oy = fld.origin
    fx = (p[..., 0] - ox) / fld.dx
    fy = (p[..., 1] - oy) / fld.dx
    return _bilinear_on_array(fld.data, fx, fy)


def gradient_central(fld: ScalarField2D) -> tuple[ScalarField2D, ScalarField2D]:
    """Per-cell (d/dx, d/dy) via central differences, one-sided at boundaries."""
    dy, dx = np.gradient(fld.data, fld.dx, edge_order=1)
    return fld.like(dx), fld.like(dy)


def normal_from_height(eta: ScalarField2D) -> np.ndarray:
    """Per-cell unit surface normal of the height field, shape (ny, nx, 3).

    n = normalize(-d(eta)/dx, -d(eta)/dy, 1); the z component is strictly
    positive by construction.
    """
    gx, gy = gradient_central(eta)
    n = np.stack([-gx.data, -gy.data, np.ones_like(eta.data)], axis=-1)
    return normalize(n)


@dataclass
class StaggeredVelocityField:
    """MAC-layout velocity: u on vertical faces, v on horizontal faces.

    ``u`` has shape (ny, nx+1); ``u[j, i]`` sits at world
    ``(ox + (i-0.5)*dx, oy + j*dx)``.  ``v`` has shape (ny+1, nx); ``v[j, i]``
    sits at ``(ox + i*dx, oy + (j-0.5)*dx)``.  Under the closed-boundary
    condition the outermost faces are exactly zero.
    """

    nx: int
    ny: int
    dx: float
    origin: tuple[float, float] = (0.0, 0.0)
    u: np.ndarray = field(default=None)  # (ny, nx+1)
    v: np.ndarray = field(default=None)  # (ny+1, nx)

    def __post_init__(self):
        if self.u is None:
            self.u = np.zeros((self.ny, self.nx + 1), dtype=np.float64)
        else:
            self.u = np.asarray(self.u, dtype=np.float64)
        if self.v is None:
            self.v = np.zeros((self.ny + 1, self.nx), dtype=np.float64)
        else:
            self.v = np.asarray(self.v, dtype=np.float64)
        if self.u.shape != (self.ny, self.nx + 1) or self.v.shape != (self.ny + 1, self.nx):
            raise ValueError(
                f"face array shapes {self.u.shape}/{self.v.shape} do not match "
                f"grid {self.nx}x{self.ny}"
            )

    @classmethod
    def zeros_like(cls, fld: ScalarField2D) -> "StaggeredVelocityField":
        return cls(nx=fld.nx, ny=fld.ny, dx=fld.dx, origin=fld.origin)

    def copy(self) -> "StaggeredVelocityField":
        return StaggeredVelocityField(
            self.nx, self.ny, self.dx, self.origin, self.u.copy(), self.v.copy()
        )

    def close_boundary(self) -> None:
        """Zero the outermost faces (no normal flow through the domain walls)."""
        self.u[:, 0] = 0.0
        self.u[:, -1] = 0.0
        self.v[0, :] = 0.0
        self.v[-1, :] = 0.0

    def u_face_positions(self) -> tuple[np.ndarray, np.ndarray]:
        ox, oy = self.origin
        x = ox + self.dx * (np.arange(self.nx + 1) - 0.5)
        y = oy + self.dx * np.arange(self.ny)
        return x, y

    def v_face_positions(self) -> tuple[np.ndarray, np.ndarray]:
        ox, oy = self.origin
        x = ox + self.dx * np.arange(self.nx)
        y = oy + self.dx * (np.arange(self.ny + 1) - 0.5)
        return x, y

    def sample_u(self, x, y) -> np.ndarray:
        """Bilinear sample of the u component at world position(s)."""
        ox, oy = self.origin
        return _bilinear_on_array(
            self.u, (np.asarray(x) - ox) / self.dx + 0.5, (np.asarray(y) - oy) / self.dx
        )

    def sample_v(self, x, y) -> np.ndarray:
        """Bilinear sample of the v component at world position(s)."""
        ox, oy = self.origin
        return _bilinear_on_array(
            self.v, (np.asarray(x) - ox) / self.dx, (np.asarray(y) - oy) / self.dx + 0.5
        )

    def max_speed(self) -> float:
        mu = float(np.max(np.abs(self.u))) if self.u.size else 0.0
        mv = float(np.max(np.abs(self.v))) if self.v.size else 0.0
        return max(mu, mv)
