"""Closed-form outage machinery for SIC with descending-SNR decoding.

Conditioned on the realized decode order at one base (user with the largest
instantaneous receive SNR first), the top-down spacings of the ordered SNRs
are independent exponentials: with ``lam_k = 1/(P_max * g_k)`` and the order
``o_1, .., o_mu``, the variables ``M_l = l * (gamma_(l) - gamma_(l+1))`` are
``Exp(beta_l)`` with ``beta_l = (lam_{o_1} + ... + lam_{o_l}) / l``.  The
stage-``j`` failure event (decode failure assuming every earlier stage
succeeded) becomes ``sum_{l=j..mu} ups_l M_l < theta`` with
``ups_l = (1 - (l - j) * theta) / l`` and ``theta = 2**r - 1``, whose CDF is
an exponential sum over the positive-coefficient poles:

    P = 1 - sum_{l: ups_l > 0} Psi_l * exp(-theta * beta_l / ups_l),
    Psi_l = prod_{i != l} a_l / (a_l - a_i),   a_i = ups_i / beta_i.

Everything here is validated against two independent oracles: the
phase-type (matrix exponential) CDF of the same linear combination and
conditioned Monte Carlo on raw exponential draws.  A legacy "rate-weighted"
variant that multiplies each term by ``beta_l / ups_l`` is retained behind a
flag for diagnostics only; it fails the single-stage exponential limit.

Probabilities are clamped to [0, 1] after evaluation; clamping and
near-coincident-pole perturbation events are counted and reported.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.linalg import expm

POLE_COINCIDENCE_RTOL = 1e-9
POLE_PERTURB_REL = 1e-6
RATE_CEILING = 64.0            # bit/s/Hz cap for the rate solver bracket
BISECT_TOL = 1e-9


def theta_of(rate) -> np.ndarray | float:
    """SINR threshold 2**r - 1 of a rate in bit/s/Hz."""
    return 2.0 ** np.asarray(rate, dtype=float) - 1.0


@dataclass
class EnumerationPolicy:
    """How per-base decode orders are marginalized.

    Bases with at most ``exact_cap`` active users enumerate all mu! orders
    exactly; larger ones estimate the same sum from ``n_order_samples``
    fading-realization draws (each sampled order weighted uniformly).
    """

    exact_cap: int = 7
    n_order_samples: int = 20_000


@dataclass
class Counters:
    """Numerical-diagnostic event counts."""

    clamps: int = 0
    pole_perturbations: int = 0

    def merge(self, other: "Counters") -> None:
        self.clamps += other.clamps
        self.pole_perturbations += other.pole_perturbations


@dataclass
class SpacingModel:
    """Spacing rates of one base's ordered active users.

    ``betas[l-1] = sum_{u<=l} 1/(P_max*g_(u)) / l`` for the conditioning
    decode order (descending SNR), ``order`` holding the user ids.
    """

    betas: np.ndarray
    order: np.ndarray
    mu: int


def spacing_betas(ordered_gains, p_max: float, order=None) -> SpacingModel:
    """Spacing model from gains listed in decode order (first decoded first)."""
    g = np.asarray(ordered_gains, dtype=float)
    if np.any(g <= 0) or not np.all(np.isfinite(g)):
        raise ValueError("gains must be positive and finite")
    if p_max <= 0:
        raise ValueError("p_max must be positive")
    lam = 1.0 / (p_max * g)
    mu = g.size
    betas = np.cumsum(lam) / np.arange(1, mu + 1)
    if order is None:
        order = np.arange(mu)
    return SpacingModel(betas=betas, order=np.asarray(order), mu=mu)


# ---------------------------------------------------------------------------
# Stage-failure probability kernel
# ---------------------------------------------------------------------------

def _perturb_coincident(a: np.ndarray, ups: np.ndarray,
                        counters: Counters | None) -> np.ndarray:
    """Separate near-equal positive poles (rare ties under continuous gains).

    Only positive-coefficient poles carry partial-fraction weights, so only
    positive/positive coincidences are perturbed (by 1e-6 relative steps).
    """
    a = a.copy()
    for row in range(a.shape[0]):
        pos = np.flatnonzero(ups[row] > 0)
        if pos.size < 2:
            continue
        vals = a[row, pos]
        scale = np.max(np.abs(vals))
        srt = np.argsort(vals)
        for prev, nxt in zip(srt[:-1], srt[1:]):
            if abs(vals[nxt] - vals[prev]) <= POLE_COINCIDENCE_RTOL * scale:
                vals[nxt] = vals[prev] * (1.0 + POLE_PERTURB_REL)
                if counters is not None:
                    counters.pole_perturbations += 1
        a[row, pos] = vals
    return a


def _stage_outage_batch(betas: np.ndarray, j: int, theta: np.ndarray,
                        rate_weighted: bool = False,
                        counters: Counters | None = None) -> np.ndarray:
    """P(stage-j failure | order) for a batch of conditioning orders.

    ``betas``: (n, mu) spacing rates per order; ``theta``: (n,) thresholds of
    the user decoded at stage ``j`` (1-indexed).  Vectorized over rows.
    """
    betas = np.atleast_2d(np.asarray(betas, dtype=float))
    n, mu = betas.shape
    if not 1 <= j <= mu:
        raise ValueError(f"stage j={j} outside 1..{mu}")
    theta = np.broadcast_to(np.asarray(theta, dtype=float), (n,))
    ls = np.arange(j, mu + 1, dtype=float)
    b = betas[:, j - 1:]
    ups = (1.0 - (ls - j) * theta[:, None]) / ls
    with np.errstate(divide="ignore"):
        a = ups / b
    pos = ups > 0.0

    near = _rows_with_coincident_poles(a, pos)
    if np.any(near):
        a[near] = _perturb_coincident(a[near], ups[near], counters)

    diff = a[:, :, None] - a[:, None, :]
    np.einsum("nll->nl", diff)[:] = 1.0           # neutralize the diagonal
    ratio = a[:, :, None] / diff
    np.einsum("nll->nl", ratio)[:] = 1.0
    psi = np.prod(ratio, axis=2)

    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        expo = np.where(pos, np.exp(np.where(pos, -theta[:, None] / np.where(a != 0, a, 1.0), 0.0)), 0.0)
        terms = psi * expo
        if rate_weighted:
            terms = np.where(pos, terms * b / np.where(ups != 0, ups, 1.0), 0.0)
    total = np.where(theta[:, None] > 0, np.where(pos, terms, 0.0), 0.0).sum(axis=1)
    p = np.where(theta > 0, 1.0 - total, 0.0)

    clipped = np.clip(p, 0.0, 1.0)
    if counters is not None:
        counters.clamps += int(np.sum((p < -1e-12) | (p > 1.0 + 1e-12)))
    return clipped


def _rows_with_coincident_poles(a: np.ndarray, pos: np.ndarray) -> np.ndarray:
    """Rows where two positive poles nearly coincide (need perturbation)."""
    a_pos = np.where(pos, a, np.nan)
    scale = np.nanmax(np.abs(a_pos), axis=1)
    srt = np.sort(np.where(pos, a, np.inf), axis=1)
    gaps = np.diff(srt, axis=1)
    finite = np.isfinite(gaps)
    tiny = finite & (gaps <= POLE_COINCIDENCE_RTOL * scale[:, None])
    return np.any(tiny, axis=1)


def conditional_outage(j: int, model: SpacingModel, r: float, *,
                       rate_weighted: bool = False,
                       counters: Counters | None = None) -> float:
    """Stage-``j`` conditional failure probability at rate ``r`` (bit/s/Hz).

    ``rate_weighted=True`` evaluates the legacy variant with an extra
    ``beta_l/ups_l`` factor per term; it is kept only so validation reports
    can quantify its disagreement with the numeric CDF oracle.
    """
    if r < 0:
        raise ValueError("rate must be nonnegative")
    out = _stage_outage_batch(model.betas[None, :], j, np.array([theta_of(r)]),
                              rate_weighted=rate_weighted, counters=counters)
    return float(out[0])


# ---------------------------------------------------------------------------
# Order probabilities
# ---------------------------------------------------------------------------

def order_probability(rates, order, *, descending: bool = False) -> float:
    """Probability that independent exponentials realize a given ranking.

    ``rates`` are the rate parameters of the unordered variables.  With the
    default ascending convention, ``order=[i1, i2, ...]`` is the event
    ``X_i1 < X_i2 < ...``; ``descending=True`` reads the order largest
    first (the decode-order convention).
    """
    lam = np.asarray(rates, dtype=float)
    if np.any(lam <= 0):
        raise ValueError("rate parameters must be positive")
    o = np.asarray(order, dtype=int)
    if sorted(o.tolist()) != list(range(lam.size)):
        raise ValueError("order must be a permutation of all variables")
    desc = o if descending else o[::-1]
    pref = np.cumsum(lam[desc])
    return float(np.prod(lam[desc] / pref))


def _order_weights(lam: np.ndarray, orders: np.ndarray) -> np.ndarray:
    """Vectorized descending-order probabilities for rows of ``orders``."""
    lam_seq = lam[orders]
    pref = np.cumsum(lam_seq, axis=1)
    return np.prod(lam_seq / pref, axis=1)


# ---------------------------------------------------------------------------
# Per-base order marginalization
# ---------------------------------------------------------------------------

@dataclass
class BaseOrderModel:
    """Decode-order marginalization state for one base."""

    base: int
    users: np.ndarray         # (mu,) user ids in the decode set
    lam: np.ndarray           # (mu,) exponential rates 1/(P_max g)
    orders: np.ndarray        # (n_orders, mu) positions into ``users``
    weights: np.ndarray       # (n_orders,) order probabilities / frequencies
    betas: np.ndarray         # (n_orders, mu) spacing rates per order
    stage_of: np.ndarray      # (n_orders, mu) 0-based stage of users[c]
    exact: bool
    n_samples: int = 0

    @property
    def mu(self) -> int:
        return self.users.size

    def user_column(self, k: int) -> int:
        col = np.flatnonzero(self.users == k)
        if col.size == 0:
            raise ValueError(f"user {k} not decoded at base {self.base}")
        return int(col[0])


def build_order_model(plan, scene, b: int, policy: EnumerationPolicy,
                      rng: np.random.Generator | None = None) -> BaseOrderModel | None:
    """Enumerate (mu <= cap) or sample the decode orders of base ``b``."""
    users = plan.decode_users(b)
    mu = users.size
    if mu == 0:
        return None
    g = scene.gains[users, b]
    if np.any(g <= 0):
        raise ValueError("gains must be positive")
    lam = 1.0 / (plan.p_max_mw * g)

    if mu <= policy.exact_cap:
        orders = np.array(list(itertools.permutations(range(mu))), dtype=int)
        weights = _order_weights(lam, orders)
        exact, n_samples = True, 0
    else:
        if rng is None:
            raise ValueError(
                f"base {b} has {mu} active users (> exact cap "
                f"{policy.exact_cap}); order sampling needs an rng")
        draws = rng.exponential(scale=1.0 / lam,
                                size=(policy.n_order_samples, mu))
        sampled = np.argsort(-draws, axis=1, kind="stable")
        orders, counts = np.unique(sampled, axis=0, return_counts=True)
        weights = counts / policy.n_order_samples
        exact, n_samples = False, policy.n_order_samples

    lam_seq = lam[orders]
    betas = np.cumsum(lam_seq, axis=1) / np.arange(1, mu + 1)
    stage_of = np.argsort(orders, axis=1)
    return BaseOrderModel(base=b, users=users, lam=lam, orders=orders,
                          weights=weights, betas=betas, stage_of=stage_of,
                          exact=exact, n_samples=n_samples)


def _stage_matrix(model: BaseOrderModel, rates: np.ndarray,
                  counters: Counters | None = None) -> np.ndarray:
    """Q[o, j-1] = P(stage-j failure | order o), using each stage user's rate."""
    n, mu = model.orders.shape
    q = np.empty((n, mu))
    for j in range(1, mu + 1):
        stage_users = model.users[model.orders[:, j - 1]]
        theta = theta_of(rates[stage_users])
        q[:, j - 1] = _stage_outage_batch(model.betas, j, theta,
                                          counters=counters)
    return q


def _cascade_weights(q: np.ndarray) -> np.ndarray:
    """C2[o, m] = sum_{i<=m} sum_{j<=i} Q[o, j] (0-based m)."""
    return np.cumsum(np.cumsum(q, axis=1), axis=1)


def _per_user_terms(model: BaseOrderModel, q: np.ndarray) -> np.ndarray:
    """Order-marginalized double-sum term per user column (unclamped)."""
    c2 = _cascade_weights(q)
    picked = np.take_along_axis(c2, model.stage_of, axis=1)
    return model.weights @ picked


def _per_user_terms_stderr(model: BaseOrderModel, q: np.ndarray) -> np.ndarray:
    """Sampling standard error of the per-user terms (zero in exact mode)."""
    mu = model.mu
    if model.exact or model.n_samples == 0:
        return np.zeros(mu)
    c2 = _cascade_weights(q)
    picked = np.take_along_axis(c2, model.stage_of, axis=1)
    mean = model.weights @ picked
    second = model.weights @ picked**2
    var = np.maximum(second - mean**2, 0.0) / model.n_samples
    return np.sqrt(var)


# ---------------------------------------------------------------------------
# Per-user bound, goodput lower bound, report
# ---------------------------------------------------------------------------

@dataclass
class OutageReport:
    """Analytical outputs for one plan: bounds, order details, diagnostics."""

    user_ids: np.ndarray
    rates: np.ndarray
    bounds: np.ndarray
    stderr: np.ndarray
    goodput_lb: float
    counters: Counters
    base_orders: dict = field(default_factory=dict)
    # base -> dict(orders=(n, mu) user ids, weights=(n,), stage_outage=Q)

    def enum_modes(self) -> dict:
        return {b: ("exact" if d["exact"] else "sampled")
                for b, d in self.base_orders.items()}

    def to_csv(self, path: str) -> None:
        import csv

        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["user_id", "rate", "outage_bound", "clamp_count", "enum_mode"])
            modes = self.enum_modes()
            for uid, r, bd in zip(self.user_ids, self.rates, self.bounds):
                mode = "+".join(sorted(modes[b] for b in modes)) if modes else "exact"
                w.writerow([int(uid), repr(float(r)), repr(float(bd)),
                            self.counters.clamps, mode])


def outage_report(plan, scene, policy: EnumerationPolicy | None = None,
                  rng: np.random.Generator | None = None) -> OutageReport:
    """Per-user outage bounds and the goodput lower bound for a whole plan.

    The bound of user k multiplies, over the bases in B_k, the
    order-marginalized double sum of stage-failure probabilities up to k's
    decode stage; per-base terms and the final product are clamped to [0, 1].
    """
    policy = policy or EnumerationPolicy()
    counters = Counters()
    active = np.flatnonzero(plan.active)
    bounds = np.ones(plan.n_users)
    rel_var = np.zeros(plan.n_users)
    details = {}
    for b in range(plan.n_b):
        model = build_order_model(plan, scene, b, policy, rng)
        if model is None:
            continue
        q = _stage_matrix(model, plan.rates, counters)
        terms = np.minimum(_per_user_terms(model, q), 1.0)
        errs = _per_user_terms_stderr(model, q)
        details[b] = {"orders": model.users[model.orders],
                      "weights": model.weights, "stage_outage": q,
                      "exact": model.exact}
        for col, k in enumerate(model.users):
            if plan.mdiv_mask[k, b]:
                bounds[k] *= terms[col]
                if terms[col] > 0:
                    rel_var[k] += (errs[col] / terms[col]) ** 2
    bounds = np.clip(bounds, 0.0, 1.0)
    stderr = bounds * np.sqrt(rel_var)
    rates = plan.rates[active]
    glb = float(np.sum(rates * np.maximum(0.0, 1.0 - bounds[active])))
    return OutageReport(user_ids=active, rates=rates, bounds=bounds[active],
                        stderr=stderr[active], goodput_lb=glb,
                        counters=counters, base_orders=details)


def per_user_outage_bound(k: int, plan, scene,
                          policy: EnumerationPolicy | None = None,
                          rng: np.random.Generator | None = None) -> float:
    """Union-bound per-user packet outage probability (clamped to [0, 1])."""
    if not plan.active[k]:
        raise ValueError(f"user {k} is inactive; the bound is undefined")
    policy = policy or EnumerationPolicy()
    bound = 1.0
    for b in plan.mdiv_bases(k):
        model = build_order_model(plan, scene, b, policy, rng)
        q = _stage_matrix(model, plan.rates)
        term = _per_user_terms(model, q)[model.user_column(k)]
        bound *= min(1.0, term)
    return float(min(1.0, max(0.0, bound)))


def goodput_lower_bound(plan, scene, policy: EnumerationPolicy | None = None,
                        rng: np.random.Generator | None = None) -> float:
    """sum_k r_k * (1 - bound_k), per-user terms floored at zero."""
    return outage_report(plan, scene, policy, rng).goodput_lb


# ---------------------------------------------------------------------------
# Rate solver
# ---------------------------------------------------------------------------

class _RateSolver:
    """Gauss-Seidel rate solving against the per-user outage bound.

    Holds, per base, the enumerated/sampled orders and the stage-failure
    matrix Q under the current rate vector.  Updating user k's rate only
    changes Q entries at k's own decode stage, so a bisection step costs one
    vectorized kernel pass over the orders grouped by k's stage.
    """

    def __init__(self, plan, scene, policy: EnumerationPolicy | None,
                 rng: np.random.Generator | None):
        self.plan = plan
        self.policy = policy or EnumerationPolicy()
        self.rates = plan.rates.astype(float).copy()
        self.rates[~plan.active] = 0.0
        self.counters = Counters()
        self.models: dict[int, BaseOrderModel] = {}
        self.q: dict[int, np.ndarray] = {}
        self.rows_by_stage: dict[int, list[list[np.ndarray]]] = {}
        for b in range(plan.n_b):
            model = build_order_model(plan, scene, b, self.policy, rng)
            if model is None:
                continue
            self.models[b] = model
            self.q[b] = _stage_matrix(model, self.rates, self.counters)
            self.rows_by_stage[b] = [
                [np.flatnonzero(model.stage_of[:, c] == j)
                 for j in range(model.mu)]
                for c in range(model.mu)
            ]

    def _bases_of(self, k: int) -> list[int]:
        return [b for b in self.plan.mdiv_bases(k) if b in self.models]

    def _consts(self, k: int) -> dict[int, float]:
        """Per-base contribution of all stages other than k's own."""
        consts = {}
        for b in self._bases_of(k):
            model, q = self.models[b], self.q[b]
            col = model.user_column(k)
            c2 = _cascade_weights(q)
            own_stage = model.stage_of[:, col]
            at_k = np.take_along_axis(c2, own_stage[:, None], axis=1)[:, 0]
            own_old = np.take_along_axis(q, own_stage[:, None], axis=1)[:, 0]
            consts[b] = float(model.weights @ (at_k - own_old))
        return consts

    def _own_term(self, k: int, b: int, theta: float) -> float:
        model = self.models[b]
        col = model.user_column(k)
        total = 0.0
        for j, rows in enumerate(self.rows_by_stage[b][col]):
            if rows.size == 0:
                continue
            vals = _stage_outage_batch(model.betas[rows], j + 1,
                                       np.full(rows.size, theta),
                                       counters=self.counters)
            total += float(self.models[b].weights[rows] @ vals)
        return total

    def bound_given_consts(self, k: int, r: float, consts: dict[int, float]) -> float:
        theta = float(theta_of(r))
        bound = 1.0
        for b, const in consts.items():
            bound *= min(1.0, const + self._own_term(k, b, theta))
        return min(1.0, max(0.0, bound))

    def solve_user(self, k: int, epsilon: float) -> float:
        consts = self._consts(k)
        if not consts:
            return 0.0
        if self.bound_given_consts(k, 0.0, consts) >= epsilon:
            return 0.0
        lo, hi = 0.0, 1.0
        while self.bound_given_consts(k, hi, consts) <= epsilon:
            lo = hi
            hi *= 2.0
            if hi > RATE_CEILING:
                if self.bound_given_consts(k, RATE_CEILING, consts) <= epsilon:
                    return RATE_CEILING
                hi = RATE_CEILING
                break
        while hi - lo > BISECT_TOL:
            mid = 0.5 * (lo + hi)
            if self.bound_given_consts(k, mid, consts) > epsilon:
                hi = mid
            else:
                lo = mid
        return 0.5 * (lo + hi)

    def update_user(self, k: int, r: float) -> None:
        self.rates[k] = r
        theta = float(theta_of(r))
        for b in self._bases_of(k):
            model = self.models[b]
            col = model.user_column(k)
            for j, rows in enumerate(self.rows_by_stage[b][col]):
                if rows.size == 0:
                    continue
                self.q[b][rows, j] = _stage_outage_batch(
                    model.betas[rows], j + 1, np.full(rows.size, theta),
                    counters=self.counters)


@dataclass
class SolveInfo:
    converged: bool
    sweeps: int
    max_delta: float
    counters: Counters


def solve_rate(k: int, epsilon: float, plan, scene,
               policy: EnumerationPolicy | None = None,
               rng: np.random.Generator | None = None) -> float:
    """Rate for user k meeting the outage bound target, others' rates fixed.

    Bisection on the monotone bound over (0, r_hi], with r_hi doubled until
    the bound exceeds ``epsilon`` (capped at 64 bit/s/Hz).  If even a
    vanishing rate cannot meet the target (earlier-stage failure terms from
    the other users already exceed it), returns 0 -- the user becomes an
    off-candidate.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    if not plan.active[k]:
        raise ValueError(f"user {k} is inactive")
    return _RateSolver(plan, scene, policy, rng).solve_user(k, epsilon)


def solve_all_rates(plan, scene, epsilon: float,
                    policy: EnumerationPolicy | None = None,
                    rng: np.random.Generator | None = None,
                    max_sweeps: int = 40, tol: float = 1e-6,
                    full_output: bool = False):
    """Simultaneous per-user rates with bound(r_k) = epsilon for every user.

    Gauss-Seidel: users are re-solved in index order holding the others
    fixed, until the largest rate change in a sweep drops below ``tol``.
    Inactive users keep rate 0.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    solver = _RateSolver(plan, scene, policy, rng)
    active = np.flatnonzero(plan.active)
    sweeps, delta = 0, np.inf
    for sweeps in range(1, max_sweeps + 1):
        delta = 0.0
        for k in active:
            r = solver.solve_user(int(k), epsilon)
            delta = max(delta, abs(r - solver.rates[k]))
            solver.update_user(int(k), r)
        if delta < tol:
            break
    rates = np.zeros(plan.n_users)
    rates[active] = solver.rates[active]
    info = SolveInfo(converged=delta < tol, sweeps=sweeps, max_delta=delta,
                     counters=solver.counters)
    return (rates, info) if full_output else rates


# ---------------------------------------------------------------------------
# Independent numeric oracles
# ---------------------------------------------------------------------------

def _phase_type(rates: np.ndarray):
    n = rates.size
    gen = np.diag(-rates)
    gen[np.arange(n - 1), np.arange(1, n)] = rates[:-1]
    start = np.zeros(n)
    start[0] = 1.0
    return gen, start


def _hypoexp_cdf(rates: np.ndarray, x: float) -> float:
    """CDF of a sum of independent exponentials via the matrix exponential."""
    if x <= 0:
        return 0.0
    gen, start = _phase_type(rates)
    return 1.0 - float(start @ expm(gen * x) @ np.ones(rates.size))


def _hypoexp_pdf(rates: np.ndarray, x: float) -> float:
    if x < 0:
        return 0.0
    gen, start = _phase_type(rates)
    exit_rates = -gen @ np.ones(rates.size)
    return float(start @ expm(gen * x) @ exit_rates)


def exp_combination_cdf(betas, coeffs, x: float) -> float:
    """P(sum_i coeffs[i] * M_i < x) for independent M_i ~ Exp(betas[i]).

    Phase-type evaluation (no partial fractions): positive- and
    negative-coefficient parts are each a hypoexponential, combined by a
    one-dimensional quadrature.  Serves as the independent numeric oracle
    for :func:`conditional_outage`.
    """
    betas = np.asarray(betas, dtype=float)
    coeffs = np.asarray(coeffs, dtype=float)
    if np.any(betas <= 0):
        raise ValueError("exponential rates must be positive")
    keep = coeffs != 0
    betas, coeffs = betas[keep], coeffs[keep]
    rp = betas[coeffs > 0] / coeffs[coeffs > 0]
    rn = betas[coeffs < 0] / -coeffs[coeffs < 0]
    if rn.size == 0:
        return _hypoexp_cdf(rp, x) if rp.size else float(x > 0)
    if rp.size == 0:
        return 1.0 - _hypoexp_cdf(rn, -x) if x < 0 else 1.0
    val, _ = quad(lambda s: _hypoexp_cdf(rp, x + s) * _hypoexp_pdf(rn, s),
                  max(0.0, -x), np.inf, limit=400)
    return float(np.clip(val, 0.0, 1.0))


def conditional_outage_numeric(j: int, model: SpacingModel, r: float) -> float:
    """Numeric-oracle twin of :func:`conditional_outage` (phase-type CDF)."""
    theta = float(theta_of(r))
    if theta <= 0:
        return 0.0
    mu = model.mu
    ls = np.arange(j, mu + 1, dtype=float)
    ups = (1.0 - (ls - j) * theta) / ls
    return exp_combination_cdf(model.betas[j - 1:], ups, theta)


def sample_ordered_snr(gains_desc, p_max: float, n_ordered: int,
                       rng: np.random.Generator,
                       batch: int = 200_000) -> np.ndarray:
    """Raw receive-SNR draws conditioned (by rejection) on the decode order.

    Returns (n_ordered, mu) draws of gamma_k = Exp(mean P_max*g_k) whose
    rows are strictly descending, i.e. realizations in which the decode
    order equals the listing order of ``gains_desc``.
    """
    g = np.asarray(gains_desc, dtype=float)
    kept = []
    have = 0
    while have < n_ordered:
        x = rng.exponential(scale=p_max * g, size=(batch, g.size))
        ok = np.all(np.diff(x, axis=1) < 0, axis=1)
        sel = x[ok]
        kept.append(sel)
        have += sel.shape[0]
    return np.concatenate(kept)[:n_ordered]


def stage_failure_frequency(ordered_draws: np.ndarray, j: int,
                            r: float) -> tuple[float, float]:
    """Monte Carlo stage-failure estimate on order-conditioned draws.

    Empirical probability of gamma_(j) - theta * sum_{l>j} gamma_(l) < theta
    plus its binomial standard error.
    """
    theta = float(theta_of(r))
    lhs = ordered_draws[:, j - 1] - theta * ordered_draws[:, j:].sum(axis=1)
    fails = lhs < theta
    n = ordered_draws.shape[0]
    p = float(np.mean(fails))
    return p, float(np.sqrt(max(p * (1 - p), 1e-12) / n))


def conditional_outage_mc(gains_desc, p_max: float, j: int, r: float,
                          n_ordered: int, rng: np.random.Generator) -> tuple[float, float]:
    """Conditioned-Monte-Carlo oracle for :func:`conditional_outage`."""
    draws = sample_ordered_snr(gains_desc, p_max, n_ordered, rng)
    return stage_failure_frequency(draws, j, r)
