"""Network geometry, macroscopic gains and Rayleigh fading.

Gains are stored linear and noise-normalized: the stored ``g[k, b]`` is the
channel power gain divided by the linear noise power, so that the received
SNR of user ``k`` at base ``b`` is ``P_mw[k] * g[k, b] * |H[k, b]|**2`` with
unit-variance receiver noise.  The sign convention is "gain" (received over
transmitted), i.e. the negative of path loss; conversion from the dB path
loss model happens once, in :func:`draw_macro`.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

import numpy as np

PLACEMENT_MAX_TRIES = 10_000


def dbm_to_mw(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0)


def db_to_lin(db) -> np.ndarray | float:
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def lin_to_db(lin) -> np.ndarray | float:
    return 10.0 * np.log10(lin)


def _per_base(value, n_b: int, name: str) -> tuple[float, ...]:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1:
        arr = np.repeat(arr, n_b)
    if arr.size != n_b:
        raise ValueError(f"{name} must be scalar or length {n_b}, got {arr.size}")
    return tuple(float(v) for v in arr)


@dataclass(frozen=True)
class ChannelParams:
    """Macroscopic channel model parameters.

    Bases sit on the x axis, ``base_spacing_m`` apart (default twice the
    cell radius, i.e. abutting cells).  ``psi`` and ``pl0_db`` accept a
    scalar or one value per base.
    """

    n_b: int = 2
    cell_radius_m: float = 1000.0
    psi: tuple[float, ...] = 3.6
    d0_m: float = 30.0
    pl0_db: tuple[float, ...] = 48.0
    shadow_sigma_db: float = 8.0
    min_dist_m: float = 30.0
    noise_dbm: float = -105.0
    base_spacing_m: float | None = None

    def __post_init__(self):
        if self.n_b < 1:
            raise ValueError("n_b must be >= 1")
        object.__setattr__(self, "psi", _per_base(self.psi, self.n_b, "psi"))
        object.__setattr__(self, "pl0_db", _per_base(self.pl0_db, self.n_b, "pl0_db"))
        if not (self.cell_radius_m > self.min_dist_m > 0):
            raise ValueError("need cell_radius_m > min_dist_m > 0")
        if self.shadow_sigma_db < 0:
            raise ValueError("shadow_sigma_db must be >= 0")
        if any(p <= 0 for p in self.psi):
            raise ValueError("path-loss exponents must be positive")
        if self.d0_m <= 0:
            raise ValueError("d0_m must be positive")

    @property
    def spacing_m(self) -> float:
        return 2.0 * self.cell_radius_m if self.base_spacing_m is None else self.base_spacing_m

    def base_positions(self) -> np.ndarray:
        x = np.arange(self.n_b, dtype=float) * self.spacing_m
        return np.column_stack([x, np.zeros(self.n_b)])

    @property
    def noise_mw(self) -> float:
        return dbm_to_mw(self.noise_dbm)


@dataclass
class NetworkScene:
    """One macroscopic network state: positions plus (optionally) gains."""

    base_pos: np.ndarray          # (n_b, 2) meters
    user_pos: np.ndarray          # (K, 2) meters
    gains: np.ndarray | None = None   # (K, n_b) linear, noise-normalized

    @property
    def n_users(self) -> int:
        return self.user_pos.shape[0]

    @property
    def n_b(self) -> int:
        return self.base_pos.shape[0]

    def distances(self) -> np.ndarray:
        """(K, n_b) user-to-base distances in meters."""
        diff = self.user_pos[:, None, :] - self.base_pos[None, :, :]
        return np.linalg.norm(diff, axis=2)

    def gains_db(self) -> np.ndarray:
        if self.gains is None:
            raise ValueError("scene has no gains; call draw_macro first")
        return lin_to_db(self.gains)


@dataclass
class FadingDraw:
    """Microscopic state: i.i.d. CN(0,1) coefficients, one per (user, base)."""

    h: np.ndarray  # (K, n_b) complex

    @property
    def power(self) -> np.ndarray:
        """|H|^2, unit-mean exponential entries."""
        return np.abs(self.h) ** 2


def place_users(params: ChannelParams, k: int, rng: np.random.Generator) -> NetworkScene:
    """Drop K users uniformly over the union of the cell disks.

    Sampling is by rejection: pick a disk uniformly, a point uniformly
    within it, accept with probability 1/(number of covering disks) so
    overlapping layouts stay uniform over the union, and re-draw points
    closer than ``min_dist_m`` to their nearest base.
    """
    if k < 1:
        raise ValueError("cannot place an empty scene (K >= 1 required)")
    base_pos = params.base_positions()
    r2 = params.cell_radius_m
    positions = np.empty((k, 2))
    for u in range(k):
        for _ in range(PLACEMENT_MAX_TRIES):
            b = int(rng.integers(params.n_b))
            rad = r2 * np.sqrt(rng.uniform())
            ang = rng.uniform(0.0, 2.0 * np.pi)
            pt = base_pos[b] + rad * np.array([np.cos(ang), np.sin(ang)])
            d = np.linalg.norm(base_pos - pt, axis=1)
            covering = int(np.sum(d <= r2))
            if covering > 1 and rng.uniform() >= 1.0 / covering:
                continue
            if d.min() < params.min_dist_m:
                continue
            positions[u] = pt
            break
        else:
            raise RuntimeError(
                f"user placement failed after {PLACEMENT_MAX_TRIES} tries; "
                "check min_dist_m against the cell geometry"
            )
    return NetworkScene(base_pos=base_pos, user_pos=positions)


def path_loss_db(params: ChannelParams, b: int, d) -> np.ndarray | float:
    """Deterministic path loss (dB, positive) at distance ``d`` from base ``b``."""
    d = np.asarray(d, dtype=float)
    if np.any(d < params.d0_m):
        raise ValueError(f"distance below reference d0={params.d0_m} m")
    out = params.pl0_db[b] + 10.0 * params.psi[b] * np.log10(d / params.d0_m)
    return float(out) if out.ndim == 0 else out


def draw_macro(scene: NetworkScene, params: ChannelParams,
               rng: np.random.Generator) -> NetworkScene:
    """Fill in noise-normalized linear gains: path loss plus shadowing.

    gain_dB = -(PL(d) + omega), omega ~ N(0, sigma^2) i.i.d. per (user, base);
    distances are clipped up to d0 so co-located corner cases stay defined.
    """
    if scene.user_pos is None or scene.user_pos.size == 0:
        raise ValueError("scene has no user positions")
    d = np.maximum(scene.distances(), params.d0_m)
    pl = np.empty_like(d)
    for b in range(scene.n_b):
        pl[:, b] = path_loss_db(params, b, d[:, b])
    omega = rng.normal(0.0, params.shadow_sigma_db, size=pl.shape)
    gain_db = -(pl + omega)
    gains = db_to_lin(gain_db) / params.noise_mw
    return NetworkScene(base_pos=scene.base_pos, user_pos=scene.user_pos, gains=gains)


def draw_fading(k: int, n_b: int, rng: np.random.Generator) -> FadingDraw:
    """i.i.d. CN(0,1) channel matrix; |H|^2 is unit-mean exponential."""
    if k < 1 or n_b < 1:
        raise ValueError("need K >= 1 and n_b >= 1")
    re = rng.standard_normal((k, n_b))
    im = rng.standard_normal((k, n_b))
    return FadingDraw(h=(re + 1j * im) / np.sqrt(2.0))


# ---------------------------------------------------------------------------
# Scene CSV export/import (reproducibility)
# ---------------------------------------------------------------------------

def save_scene(scene: NetworkScene, directory: str) -> None:
    """Write users.csv (user_id,x_m,y_m), gains.csv (user_id,base_id,gain_db)
    and bases.csv (base_id,x_m,y_m) under ``directory``.

    gain_db is the noise-normalized gain in dB (10*log10 of the stored value).
    """
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, "users.csv"), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["user_id", "x_m", "y_m"])
        for k, (x, y) in enumerate(scene.user_pos):
            w.writerow([k, repr(float(x)), repr(float(y))])
    with open(os.path.join(directory, "bases.csv"), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["base_id", "x_m", "y_m"])
        for b, (x, y) in enumerate(scene.base_pos):
            w.writerow([b, repr(float(x)), repr(float(y))])
    if scene.gains is not None:
        gdb = scene.gains_db()
        with open(os.path.join(directory, "gains.csv"), "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["user_id", "base_id", "gain_db"])
            for k in range(scene.n_users):
                for b in range(scene.n_b):
                    w.writerow([k, b, repr(float(gdb[k, b]))])


def load_scene(directory: str) -> NetworkScene:
    """Inverse of :func:`save_scene`."""
    def read(name):
        with open(os.path.join(directory, name), newline="") as f:
            return list(csv.DictReader(f))

    users = read("users.csv")
    bases = read("bases.csv")
    user_pos = np.array([[float(r["x_m"]), float(r["y_m"])] for r in users])
    base_pos = np.array([[float(r["x_m"]), float(r["y_m"])] for r in bases])
    gains = None
    gains_path = os.path.join(directory, "gains.csv")
    if os.path.exists(gains_path):
        rows = read("gains.csv")
        gains = np.zeros((len(users), len(bases)))
        for r in rows:
            gains[int(r["user_id"]), int(r["base_id"])] = db_to_lin(float(r["gain_db"]))
    return NetworkScene(base_pos=base_pos, user_pos=user_pos, gains=gains)
