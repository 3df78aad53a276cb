"""Centralized controller decisions per macroscopic state.

Given a scene with gains, the controller associates each user with its
strongest base, builds macro-diversity (MDiv) sets from a dB gap threshold,
solves per-user rates for a target outage, applies the on/off power rule,
and -- per fading realization -- orders each base's active users by
instantaneous receive SNR for SIC.

MDiv threshold semantics: base ``b`` joins ``B_k`` iff the serving-base gain
minus ``g[k, b]`` (both in dB) is at most the threshold.  ``None`` is the
explicit OFF sentinel (no MDiv, ``B_k = {serving}``); ``math.inf`` puts every
base in every ``B_k``.  Both readings exist because a small threshold admits
few users while some curve labels use "infinity" to mean "none"; the
configuration keeps them distinct.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import analysis
from .channel import NetworkScene, FadingDraw, lin_to_db

DEFAULT_RATE_FLOOR = 0.05  # bit/s/Hz below which a user is switched off


@dataclass
class Plan:
    """Per-macro-state decisions: association, MDiv sets, powers, rates."""

    serving: np.ndarray            # (K,) serving base index per user
    mdiv_mask: np.ndarray          # (K, n_b) bool, True iff base decodes user
    power_mw: np.ndarray           # (K,) in {0, p_max_mw}
    rates: np.ndarray              # (K,) bit/s/Hz
    p_max_mw: float

    def __post_init__(self):
        k, n_b = self.mdiv_mask.shape
        if self.serving.shape != (k,):
            raise ValueError("serving/mdiv_mask shape mismatch")
        if not np.all(self.mdiv_mask[np.arange(k), self.serving]):
            raise ValueError("every MDiv set must contain the serving base")

    @property
    def n_users(self) -> int:
        return self.serving.shape[0]

    @property
    def n_b(self) -> int:
        return self.mdiv_mask.shape[1]

    @property
    def active(self) -> np.ndarray:
        return self.power_mw > 0

    def assoc_sets(self) -> list[np.ndarray]:
        """A_b partition: users served by each base."""
        return [np.flatnonzero(self.serving == b) for b in range(self.n_b)]

    def mdiv_bases(self, k: int) -> np.ndarray:
        """B_k: bases that decode user k (always contains the serving base)."""
        return np.flatnonzero(self.mdiv_mask[k])

    def decode_users(self, b: int) -> np.ndarray:
        """Active users whose packets base b attempts to decode."""
        return np.flatnonzero(self.mdiv_mask[:, b] & self.active)


@dataclass
class DecodingOrder:
    """Permutation of one base's active users, first-decoded first."""

    base: int
    users: np.ndarray              # decode sequence of user indices

    def stage_of(self, k: int) -> int:
        """1-indexed decoding iteration of user k; raises if absent."""
        pos = np.flatnonzero(self.users == k)
        if pos.size == 0:
            raise KeyError(f"user {k} not decoded at base {self.base}")
        return int(pos[0]) + 1

    def __len__(self) -> int:
        return len(self.users)


def associate_users(scene: NetworkScene) -> np.ndarray:
    """Serving base per user: argmax gain, ties to the lowest base index."""
    if scene.gains is None:
        raise ValueError("scene has no gains")
    return np.argmax(scene.gains, axis=1)


def mdiv_assign(scene: NetworkScene, serving: np.ndarray,
                threshold_db: float | None) -> np.ndarray:
    """(K, n_b) mask of MDiv sets from the dB gap rule (see module docstring)."""
    k, n_b = scene.gains.shape
    mask = np.zeros((k, n_b), dtype=bool)
    mask[np.arange(k), serving] = True
    if threshold_db is None:
        return mask
    if threshold_db < 0:
        raise ValueError("MDiv threshold must be >= 0 dB (or None for off)")
    gdb = lin_to_db(scene.gains)
    gap = gdb[np.arange(k), serving][:, None] - gdb
    return mask | (gap <= threshold_db)


def decoding_order(plan: Plan, scene: NetworkScene, fading: FadingDraw,
                   b: int) -> DecodingOrder:
    """Order base b's active users by descending instantaneous receive SNR.

    gamma_k = P_k * g[k, b] * |H[k, b]|^2; ties break toward the lower user
    index (zero-probability event under continuous fading).  An empty active
    set yields an empty, valid order.
    """
    users = plan.decode_users(b)
    if users.size == 0:
        return DecodingOrder(base=b, users=users)
    gamma = plan.power_mw[users] * scene.gains[users, b] * fading.power[users, b]
    seq = users[np.argsort(-gamma, kind="stable")]
    return DecodingOrder(base=b, users=seq)


def onoff_power(scene: NetworkScene, plan: Plan, *, epsilon: float,
                rate_floor: float = DEFAULT_RATE_FLOOR,
                policy: "analysis.EnumerationPolicy | None" = None,
                rng: np.random.Generator | None = None) -> np.ndarray:
    """One pass of the on/off rule: full power unless the solved rate is tiny.

    Solves all active users' rates for the target outage ``epsilon`` and
    returns a power vector equal to ``p_max_mw`` everywhere except users
    whose solved rate fell below ``rate_floor``, which are set to 0.
    ``rate_floor=0`` keeps everyone on.
    """
    rates = analysis.solve_all_rates(plan, scene, epsilon, policy=policy, rng=rng)
    power = np.where(plan.active & (rates >= rate_floor), plan.p_max_mw, 0.0)
    return power


def build_plan(scene: NetworkScene, *, p_max_mw: float, epsilon: float,
               mdiv_threshold_db: float | None = None,
               rate_floor: float = DEFAULT_RATE_FLOOR,
               policy: "analysis.EnumerationPolicy | None" = None,
               rng: np.random.Generator | None = None) -> Plan:
    """Full controller pipeline for one macro state.

    Association, MDiv assignment, coupled rate solving, then the on/off
    rule, repeated until the active set stabilizes (each pass only removes
    users, so at most K passes).  Rates of switched-off users are zero.
    """
    serving = associate_users(scene)
    mask = mdiv_assign(scene, serving, mdiv_threshold_db)
    plan = Plan(serving=serving,
                mdiv_mask=mask,
                power_mw=np.full(scene.n_users, float(p_max_mw)),
                rates=np.zeros(scene.n_users),
                p_max_mw=float(p_max_mw))
    for _ in range(scene.n_users + 1):
        plan.rates = analysis.solve_all_rates(plan, scene, epsilon,
                                              policy=policy, rng=rng)
        power = np.where(plan.active & (plan.rates >= rate_floor), p_max_mw, 0.0)
        if np.array_equal(power, plan.power_mw):
            break
        plan.power_mw = power
    plan.rates[~plan.active] = 0.0
    return plan


def save_plan_csv(plan: Plan, path: str) -> None:
    """CSV: user_id, serving_base, mdiv_bases (';'-joined), power_mw, rate_bps_hz."""
    import csv

    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["user_id", "serving_base", "mdiv_bases", "power_mw", "rate_bps_hz"])
        for k in range(plan.n_users):
            bases = ";".join(str(b) for b in plan.mdiv_bases(k))
            w.writerow([k, int(plan.serving[k]), bases,
                        repr(float(plan.power_mw[k])), repr(float(plan.rates[k]))])
