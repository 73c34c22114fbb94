"""Surface-vessel formation geometry and acoustic coverage checks.

ASVs are station-kept at the vertices of a regular N-gon of radius
``R_f = r_hf + delta_b`` centred on the survey origin.  For a single ASV the
formation degenerates to the origin.  The module also provides the
corner-to-nearest-ASV distance, the closed-form minimum formation radius for
corner coverage, and a brute-force grid oracle for the coverage fraction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class FormationConfig:
    """Geometry parameters for the surface-anchor ring."""

    n_asv: int
    L: float                     # survey side length, m
    r_hf: float = 50.0           # HF uplink range, m
    delta_b: float = 0.0         # clearance buffer added to the ring radius, m
    alpha0: float = 0.0          # formation angle, rad

    def __post_init__(self):
        self.validate()

    @property
    def radius(self) -> float:
        return self.r_hf + self.delta_b

    def validate(self):
        if self.n_asv < 1:
            raise ValueError(f"n_asv must be >= 1 (got {self.n_asv})")
        if self.r_hf <= 0:
            raise ValueError(f"r_hf must be > 0 (got {self.r_hf})")
        if self.delta_b < 0:
            raise ValueError(f"delta_b must be >= 0 (got {self.delta_b})")
        if self.L <= 0:
            raise ValueError(f"L must be > 0 (got {self.L})")


@dataclass
class AsvLayout:
    """Ordered 2D ASV positions (NED horizontal plane), shape (n, 2)."""

    positions: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.positions)


def asv_positions(cfg: FormationConfig) -> AsvLayout:
    """Place the ASVs on the regular N-gon (origin for a single ASV)."""
    cfg.validate()
    if cfg.n_asv == 1:
        return AsvLayout(np.zeros((1, 2)))
    j = np.arange(cfg.n_asv)
    ang = cfg.alpha0 + 2.0 * math.pi * j / cfg.n_asv
    pos = cfg.radius * np.stack([np.cos(ang), np.sin(ang)], axis=1)
    return AsvLayout(pos)


def corner_distance(layout: AsvLayout, L: float) -> float:
    """Worst-corner nearest-ASV distance.

    For each of the four survey corners (+-L/2, +-L/2) take the distance to
    the nearest ASV, then return the maximum over corners: the binding corner
    that any coverage argument has to beat.
    """
    if len(layout) == 0:
        raise ValueError("layout must contain at least one ASV")
    h = L / 2.0
    corners = np.array([[h, h], [h, -h], [-h, h], [-h, -h]])
    d = np.linalg.norm(corners[:, None, :] - layout.positions[None, :, :], axis=2)
    return float(d.min(axis=1).max())


def min_formation_radius(L: float, r_hf: float) -> float | None:
    """Closed-form ring radius from which an on-axis ASV reaches its near corners.

    Returns ``L/2 - sqrt(r_hf^2 - (L/2)^2)``, or None when ``r_hf < L/2`` and
    the closed form does not apply.  A non-positive value means any ring
    radius satisfies the corner constraint.
    """
    if L <= 0:
        raise ValueError(f"L must be > 0 (got {L})")
    if r_hf <= 0:
        raise ValueError(f"r_hf must be > 0 (got {r_hf})")
    half = L / 2.0
    if r_hf < half:
        return None
    return half - math.sqrt(r_hf * r_hf - half * half)


def coverage_fraction_grid(layout: AsvLayout, L: float, r_hf: float,
                           grid_step: float = 0.5) -> float:
    """Brute-force coverage oracle.

    Fraction of points on a boundary-inclusive grid over the survey square
    that lie within ``r_hf`` of at least one ASV.
    """
    if grid_step <= 0:
        raise ValueError(f"grid_step must be > 0 (got {grid_step})")
    n = int(math.ceil(L / grid_step - 1e-9)) + 1
    if n < 2:
        coords = np.array([0.0])
    else:
        coords = np.linspace(-L / 2.0, L / 2.0, n)
    gx, gy = np.meshgrid(coords, coords)
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    d2 = ((pts[:, None, :] - layout.positions[None, :, :]) ** 2).sum(axis=2)
    covered = (d2.min(axis=1) <= r_hf * r_hf)
    return float(covered.mean())
