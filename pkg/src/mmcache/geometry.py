"""Point-process sampling, UE pairing and closest-BS association.

Point sets are stored as ``(n, 2)`` float arrays in metres; :class:`Point2D`
is only used at the edges of the API where single points are passed around.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .config import SystemParams

TRUNCATION_RADIUS = 500.0  # [m] interference is summed at least this far out
ROLES = ("unpaired", "paired_A", "paired_B", "cellular-only")


class TopologyError(ValueError):
    """Raised when an operation needs points that are not there."""


@dataclass(frozen=True)
class Point2D:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite coordinates ({self.x}, {self.y})")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y])


def to_points(xy: np.ndarray) -> list[Point2D]:
    return [Point2D(float(x), float(y)) for x, y in np.asarray(xy).reshape(-1, 2)]


def _as_xy(points) -> np.ndarray:
    if isinstance(points, np.ndarray):
        return points.reshape(-1, 2).astype(float, copy=False)
    return np.array([[p.x, p.y] for p in points], dtype=float).reshape(-1, 2)


def window_half_width(params: SystemParams) -> float:
    """Half the side of the square simulation window centred on the target."""
    return max(10.0 * params.r_cell, 2.0 * TRUNCATION_RADIUS)


@dataclass
class NetworkDrop:
    """One realization of the network around a target UE at the origin.

    ``pairs_1[i]`` and ``pairs_2[i]`` are the two ends of pair ``i``. The
    target (and its peer, when paired) are not contained in the UE arrays.
    """

    bs: np.ndarray
    ue_unpaired: np.ndarray
    pairs_1: np.ndarray
    pairs_2: np.ndarray
    window_half_width: float
    target_role: str
    peer: np.ndarray | None = None

    @property
    def target(self) -> Point2D:
        return Point2D(0.0, 0.0)

    @property
    def ue_paired(self) -> list[tuple[Point2D, Point2D]]:
        return list(zip(to_points(self.pairs_1), to_points(self.pairs_2)))

    @property
    def is_paired(self) -> bool:
        return self.peer is not None

    def all_ues(self) -> np.ndarray:
        """Every non-target UE: unpaired, then pair ends 1, then pair ends 2."""
        parts = [self.ue_unpaired, self.pairs_1, self.pairs_2]
        if self.peer is not None:
            parts.append(self.peer[None, :])
        return np.concatenate(parts, axis=0)


def sample_ppp(lam: float, half_width: float, rng: np.random.Generator) -> np.ndarray:
    """Homogeneous PPP of intensity ``lam`` [1/m^2] in [-hw, hw]^2."""
    if not lam >= 0:
        raise ValueError(f"intensity must be >= 0, got {lam!r}")
    if not half_width > 0:
        raise ValueError(f"window half-width must be > 0, got {half_width!r}")
    n = rng.poisson(lam * (2.0 * half_width) ** 2)
    return rng.uniform(-half_width, half_width, size=(n, 2))


def sample_pair_displacement(r_max: float, rng: np.random.Generator, size=None):
    """Distance with pdf 2r/r_max^2 on [0, r_max] and a uniform angle."""
    r = r_max * np.sqrt(rng.random(size))
    phi = rng.uniform(0.0, 2.0 * math.pi, size)
    return r, phi


def _displace(p: np.ndarray, r_max: float, rng) -> np.ndarray:
    r, phi = sample_pair_displacement(r_max, rng, len(p))
    return p + np.column_stack([r * np.cos(phi), r * np.sin(phi)])


def build_drop(params: SystemParams, target_role: str, rng: np.random.Generator,
               half_width: float | None = None, with_peer: bool = False) -> NetworkDrop:
    """Sample BSs, unpaired UEs and pairs, with the target at the origin.

    Pair anchors form a PPP of intensity delta*lambda_ue/2; each anchor's
    partner is displaced by ``sample_pair_displacement``. Pairs whose partner
    falls outside the window are dropped so that all points stay inside.

    Paired roles always get a peer. A "cellular-only" target gets one when
    ``with_peer`` is set: it belongs to a pair but does not use the link.
    """
    if target_role not in ROLES:
        raise ValueError(f"unknown target role {target_role!r}")
    needs_peer = target_role.startswith("paired") or (with_peer and target_role == "cellular-only")
    if with_peer and target_role == "unpaired":
        raise ValueError("an unpaired target cannot have a peer")
    if needs_peer and params.delta <= 0:
        raise ValueError("a paired target needs delta > 0")
    hw = window_half_width(params) if half_width is None else half_width
    bs = sample_ppp(params.lambda_bs, hw, rng)
    ue_u = sample_ppp(params.lambda_u, hw, rng)
    p1 = sample_ppp(params.lambda_p, hw, rng)
    p2 = _displace(p1, params.r_d2d_max, rng)
    inside = np.all(np.abs(p2) <= hw, axis=1)
    p1, p2 = p1[inside], p2[inside]
    peer = None
    if needs_peer:
        r, phi = sample_pair_displacement(params.r_d2d_max, rng)
        peer = np.array([r * math.cos(phi), r * math.sin(phi)])
    return NetworkDrop(bs, ue_u, p1, p2, hw, target_role, peer)


def associate_closest_bs(p, bs) -> tuple[int, float]:
    """Index and distance of the closest BS; ties go to the lowest index."""
    xy = _as_xy(bs)
    if len(xy) == 0:
        raise TopologyError("no base stations to associate with")
    p = p.as_array() if isinstance(p, Point2D) else np.asarray(p, dtype=float)
    d = np.hypot(xy[:, 0] - p[0], xy[:, 1] - p[1])
    i = int(np.argmin(d))  # argmin returns the first minimum
    return i, float(d[i])


def target_cell_members(drop: NetworkDrop, active_flags, serving: int | None = None,
                        tree: cKDTree | None = None) -> int:
    """Active UEs sharing the target's closest BS, plus the target itself.

    ``active_flags`` is a boolean mask over :meth:`NetworkDrop.all_ues`.
    """
    if serving is None:
        serving, _ = associate_closest_bs(np.zeros(2), drop.bs)
    ues = drop.all_ues()
    flags = np.asarray(active_flags, dtype=bool)
    if flags.shape != (len(ues),):
        raise ValueError(f"expected {len(ues)} activity flags, got shape {flags.shape}")
    cand = ues[flags]
    if len(cand) == 0:
        return 1
    if tree is None:
        tree = cKDTree(drop.bs)
    _, idx = tree.query(cand)
    return 1 + int(np.count_nonzero(idx == serving))


def dump_drop_csv(drop: NetworkDrop, path: str | Path) -> None:
    """Write a drop as rows of kind, x_m, y_m, pair_id."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["kind", "x_m", "y_m", "pair_id"])
        for x, y in drop.bs:
            w.writerow(["bs", repr(x), repr(y), ""])
        for x, y in drop.ue_unpaired:
            w.writerow(["ue_u", repr(x), repr(y), ""])
        for i, ((x1, y1), (x2, y2)) in enumerate(zip(drop.pairs_1, drop.pairs_2)):
            w.writerow(["ue_pA", repr(x1), repr(y1), i])
            w.writerow(["ue_pB", repr(x2), repr(y2), i])
