"""Monte Carlo evaluation of stopping costs and spike-variation probes.

Paths follow the exact GBM transition X_{t+d} = X_t exp((b - sigma^2/2) d +
sigma sqrt(d) Z) on a time grid that is uniform at dt early (where the
spike perturbations live) and coarsens geometrically afterwards; the
running cost integral accumulates by trapezoid, threshold crossings inside
a step are resolved by the Brownian-bridge hitting probability, and decayed
paths are closed out with an analytic never-stop tail once their maximum
possible future contribution drops below a configured bound.

Randomness is counter-based (Philox4x32-10) with one stream per antithetic
pair derived from (seed, pair index): results are bit-identical for a given
(seed, config) regardless of thread count, and all spike perturbations of a
path share its trajectory exactly (common random numbers by construction).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit, prange

from .discounting import DivergentMomentError, WeightingDistribution
from .model import CostSpec, MarketModel
from .stopping import SimulationConfig, StoppingRule

__all__ = ["McEstimate", "mc_cost_estimate", "SpikeRow", "SpikeTrendReport",
           "mc_spike_probe"]

_MASK32 = np.uint64(0xFFFFFFFF)
_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_INV32 = 2.0 ** -32
_TWO_PI = 2.0 * math.pi


@njit(inline="always", cache=True)
def _philox(c0, c1, c2, c3, k0, k1):
    # Philox4x32-10; all inputs/outputs are 32-bit values held in uint64
    for _ in range(10):
        p0 = _M0 * c0
        p1 = _M1 * c2
        n0 = ((p1 >> np.uint64(32)) ^ c1 ^ k0) & _MASK32
        n1 = p1 & _MASK32
        n2 = ((p0 >> np.uint64(32)) ^ c3 ^ k1) & _MASK32
        n3 = p0 & _MASK32
        c0, c1, c2, c3 = n0, n1, n2, n3
        k0 = (k0 + _W0) & _MASK32
        k1 = (k1 + _W1) & _MASK32
    return c0, c1, c2, c3


@njit(inline="always", cache=True)
def _normal_pair(ctr, pair, k0, k1):
    x0, x1, _, _ = _philox(ctr & _MASK32, (ctr >> np.uint64(32)) & _MASK32,
                           np.uint64(0), pair & _MASK32, k0, k1)
    u1 = (np.float64(x0) + 0.5) * _INV32
    u2 = (np.float64(x1) + 0.5) * _INV32
    rad = math.sqrt(-2.0 * math.log(u1))
    return rad * math.cos(_TWO_PI * u2), rad * math.sin(_TWO_PI * u2)


@njit(inline="always", cache=True)
def _uniform(ctr, pair, k0, k1):
    x0, _, _, _ = _philox(ctr & _MASK32, (ctr >> np.uint64(32)) & _MASK32,
                          np.uint64(1), pair & _MASK32, k0, k1)
    return (np.float64(x0) + 0.5) * _INV32


@njit(inline="always", cache=True)
def _f_eval(code, fa, fb, tab_x, tab_y, lo_s, hi_s, x):
    if code == 0:
        return fa
    if code == 1:
        return x
    if code == 2:
        return fa * x + fb
    if code == 3:
        return fa * x**fb
    n = tab_x.shape[0]
    if x <= tab_x[0]:
        return tab_y[0] + lo_s * (x - tab_x[0])
    if x >= tab_x[n - 1]:
        return tab_y[n - 1] + hi_s * (x - tab_x[n - 1])
    lo = 0
    hi = n - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if tab_x[mid] <= x:
            lo = mid
        else:
            hi = mid
    t = (x - tab_x[lo]) / (tab_x[lo + 1] - tab_x[lo])
    return tab_y[lo] * (1.0 - t) + tab_y[lo + 1] * t


@njit(inline="always", cache=True)
def _in_stop(iv_lo, iv_hi, x):
    for j in range(iv_lo.shape[0]):
        if iv_lo[j] <= x <= iv_hi[j]:
            return True
    return False


@njit(parallel=True, cache=True)
def _simulate(seed, n_paths, antithetic, lx0, rule_kind, log_thr, f_thr,
              iv_lo, iv_hi, drift_log, sig, sig2,
              f_code, fa, fb, tab_x, tab_y, tab_lo_s, tab_hi_s, K,
              ts, hg, hm, eps_idx, kill_on, resc, tail_const, tail_lin,
              kill_tol, out_payoff, out_resid, out_status):
    n_steps = ts.shape[0] - 1
    n_var = eps_idx.shape[0]
    eps_max = 0
    for v in range(n_var):
        if eps_idx[v] > eps_max:
            eps_max = eps_idx[v]
    k0 = seed & _MASK32
    k1 = (seed >> np.uint64(32)) & _MASK32

    for p in prange(n_paths):
        pair = np.uint64(p >> 1) if antithetic else np.uint64(p)
        sgn = -1.0 if (antithetic and (p & 1) == 1) else 1.0
        nctr = np.uint64(0)
        uctr = np.uint64(0)
        z_next = 0.0
        have_z = False

        lx = lx0
        y = math.exp(lx)
        fv = _f_eval(f_code, fa, fb, tab_x, tab_y, tab_lo_s, tab_hi_s, y)
        running = 0.0
        done = np.zeros(n_var, np.bool_)
        pay = np.zeros(n_var, np.float64)
        n_done = 0
        status = np.int8(2)
        resid_out = 0.0

        for i in range(n_steps):
            for v in range(n_var):
                if (not done[v]) and eps_idx[v] == i:
                    if rule_kind == 0:
                        stop_now = lx >= log_thr
                    else:
                        stop_now = _in_stop(iv_lo, iv_hi, y)
                    if stop_now:
                        pay[v] = running + hg[i] * K
                        done[v] = True
                        n_done += 1
            if n_done == n_var:
                status = np.int8(0)
                break

            d = ts[i + 1] - ts[i]
            if have_z:
                z = z_next
                have_z = False
            else:
                z, z_next = _normal_pair(nctr, pair, k0, k1)
                nctr += np.uint64(1)
                have_z = True
            lx1 = lx + drift_log * d + sig * math.sqrt(d) * z * sgn
            y1 = math.exp(lx1)
            fv1 = _f_eval(f_code, fa, fb, tab_x, tab_y, tab_lo_s, tab_hi_s, y1)
            seg = 0.5 * d * (hg[i] * fv + hg[i + 1] * fv1)

            cross = 0  # 0 none, 1 at the grid end, 2 inside the step (bridge)
            if rule_kind == 0:
                if lx1 >= log_thr:
                    cross = 1
                elif lx < log_thr:
                    arg = 2.0 * (log_thr - lx) * (log_thr - lx1) / (sig2 * d)
                    if arg < 38.0:
                        u = _uniform(uctr, pair, k0, k1)
                        uctr += np.uint64(1)
                        if u < math.exp(-arg):
                            cross = 2
            else:
                if _in_stop(iv_lo, iv_hi, y1):
                    cross = 1

            if cross > 0:
                for v in range(n_var):
                    if (not done[v]) and eps_idx[v] <= i:
                        if cross == 1:
                            pay[v] = running + seg + hg[i + 1] * K
                        else:
                            pay[v] = (running
                                      + 0.25 * d * (hg[i] * fv + hm[i] * f_thr)
                                      + hm[i] * K)
                        done[v] = True
                        n_done += 1
                if n_done == n_var:
                    status = np.int8(0)
                    break

            running += seg
            lx = lx1
            y = y1
            fv = fv1

            if kill_on and i + 1 >= eps_max:
                resid = y * resc[i + 1]
                if resid <= kill_tol:
                    tail = tail_const[i + 1] + y * tail_lin[i + 1]
                    for v in range(n_var):
                        if not done[v]:
                            pay[v] = running + tail
                            done[v] = True
                            n_done += 1
                    resid_out = resid
                    status = np.int8(1)
                    break

        if n_done < n_var:
            if kill_on:
                tail = tail_const[n_steps] + y * tail_lin[n_steps]
                resid_out = y * resc[n_steps]
            else:
                tail = 0.0
                resid_out = K * hg[n_steps]
            for v in range(n_var):
                if not done[v]:
                    pay[v] = running + tail

        out_status[p] = status
        out_resid[p] = resid_out
        for v in range(n_var):
            out_payoff[p, v] = pay[v]


# ---------------------------------------------------------------------------
# Python-side assembly
# ---------------------------------------------------------------------------

_EMPTY = np.zeros(0, dtype=np.float64)
_F_CODES = {"const": 0, "linear": 1, "affine": 2, "power": 3, "table": 4}


def _f_kernel_params(f):
    if f.family not in _F_CODES:
        raise ValueError(
            f"Monte Carlo supports the const/linear/affine/power/table cost "
            f"families, not {f.family!r}; wrap custom costs as a table"
        )
    code = _F_CODES[f.family]
    fa = fb = 0.0
    tab_x = tab_y = _EMPTY
    lo_s = hi_s = 0.0
    if f.family == "const":
        fa = f.params[0]
    elif f.family == "affine":
        fa, fb = f.params
    elif f.family == "power":
        p, a = f.params
        fa, fb = a, p
    elif f.family == "table":
        xs, ys = f.params
        tab_x = np.asarray(xs, dtype=float)
        tab_y = np.asarray(ys, dtype=float)
        lo_s = (tab_y[1] - tab_y[0]) / (tab_x[1] - tab_x[0])
        hi_s = (tab_y[-1] - tab_y[-2]) / (tab_x[-1] - tab_x[-2])
    return code, fa, fb, tab_x, tab_y, lo_s, hi_s


def _grid_times(cfg: SimulationConfig, t_max: float) -> np.ndarray:
    ts = [0.0]
    t = 0.0
    while t < t_max:
        if cfg.coarsen_rate > 0.0 and t >= cfg.coarsen_after:
            d = min(max(cfg.dt, cfg.coarsen_rate * t), cfg.dt_max)
        else:
            d = cfg.dt
        t = min(t + d, t_max)
        ts.append(t)
    return np.asarray(ts, dtype=float)


def _auto_t_max(dist: WeightingDistribution, cost: CostSpec, rule: StoppingRule,
                cfg: SimulationConfig) -> float:
    target = 0.1 * cfg.target_se
    ref = rule.stop_region_infimum
    try:
        run_scale = float(cost.f(ref)) * float(dist.discount_tail_integral(0.0))
    except DivergentMomentError:
        run_scale = 10.0 * cost.K
    k_eff = cost.K + max(run_scale, 0.0)
    lo, hi = 1.0, 1.0
    while k_eff * float(dist.discount(hi)) > target and hi < 1e6:
        hi *= 2.0
    while k_eff * float(dist.discount(lo)) <= target and lo > 1e-3:
        lo /= 2.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if k_eff * float(dist.discount(mid)) > target:
            lo = mid
        else:
            hi = mid
    return max(hi, 10.0)


def _kill_arrays(dist, model, cost, rule, ts, hg):
    """Per-grid-time analytic tail coefficients for linear-family costs.

    tail(t, y) = f0*E[e^{-Rt}/R] + slope*y*E[e^{-Rt}/(R-b)] is the exact
    never-stop remainder; the residual stop-part bound per unit of y is
    resc(t) = (K*h(t) + slope*thr*I1b(t) + f0*H(t))/thr.
    """
    f = cost.f
    if rule.threshold is None or f.family not in ("const", "linear", "affine"):
        return False, _EMPTY, _EMPTY, _EMPTY
    slope = f.slope_inf
    f0 = f.f0
    try:
        H = np.asarray(dist.discount_tail_integral(ts), dtype=float)
    except DivergentMomentError:
        return False, _EMPTY, _EMPTY, _EMPTY
    if model.b == 0.0:
        i1b = H
    else:
        r, w = dist.nodes()
        if model.b >= dist.rate_floor and not dist.support_reaches_zero:
            return False, _EMPTY, _EMPTY, _EMPTY
        if dist.support_reaches_zero and model.b > 0.0:
            return False, _EMPTY, _EMPTY, _EMPTY
        i1b = (np.exp(-np.multiply.outer(ts, r)) / (r - model.b)) @ w
    thr = rule.threshold
    resc = (cost.K * hg + slope * thr * i1b + f0 * H) / thr
    tail_const = f0 * H
    tail_lin = slope * i1b
    return True, resc, tail_const, tail_lin


def _run_kernel(x0, rule, dist, model, cost, cfg, eps_list):
    t_max = cfg.t_max if cfg.t_max is not None else _auto_t_max(dist, cost, rule, cfg)
    for eps in eps_list:
        if eps > 0 and eps > cfg.coarsen_after:
            raise ValueError("spike epsilons must lie inside the uniform-dt phase")
    ts = _grid_times(cfg, t_max)
    hg = np.asarray(dist.discount(ts), dtype=float)
    hm = np.asarray(dist.discount(0.5 * (ts[:-1] + ts[1:])), dtype=float)
    eps_idx = np.zeros(len(eps_list), dtype=np.int64)
    for j, eps in enumerate(eps_list):
        idx = int(round(eps / cfg.dt))
        if abs(ts[min(idx, len(ts) - 1)] - eps) > 1e-9 * max(1.0, eps):
            raise ValueError(f"epsilon {eps} does not align with the dt grid")
        eps_idx[j] = idx
    kill_on, resc, tail_const, tail_lin = _kill_arrays(dist, model, cost, rule, ts, hg)
    if not kill_on:
        resc = np.zeros_like(ts)
        tail_const = np.zeros_like(ts)
        tail_lin = np.zeros_like(ts)

    if rule.threshold is not None:
        rule_kind, log_thr = 0, math.log(rule.threshold)
        f_thr = float(cost.f(rule.threshold))
        iv_lo = iv_hi = _EMPTY
    else:
        rule_kind, log_thr, f_thr = 1, 0.0, 0.0
        iv_lo = np.asarray([a for a, _ in rule.intervals], dtype=float)
        iv_hi = np.asarray([b for _, b in rule.intervals], dtype=float)

    code, fa, fb, tab_x, tab_y, lo_s, hi_s = _f_kernel_params(cost.f)
    n_var = len(eps_list)
    out_payoff = np.empty((cfg.paths, n_var), dtype=np.float64)
    out_resid = np.empty(cfg.paths, dtype=np.float64)
    out_status = np.empty(cfg.paths, dtype=np.int8)
    _simulate(np.uint64(cfg.seed), cfg.paths, cfg.antithetic, math.log(x0),
              rule_kind, log_thr, f_thr, iv_lo, iv_hi,
              model.b - 0.5 * model.sigma2, model.sigma, model.sigma2,
              code, fa, fb, tab_x, tab_y, lo_s, hi_s, cost.K,
              ts, hg, hm, eps_idx, kill_on, resc, tail_const, tail_lin,
              cfg.kill_tol, out_payoff, out_resid, out_status)
    return out_payoff, out_resid, out_status, t_max


def _fold(a: np.ndarray, antithetic: bool) -> np.ndarray:
    if antithetic and a.shape[0] >= 2:
        n = a.shape[0] - (a.shape[0] % 2)
        return 0.5 * (a[0:n:2] + a[1:n:2])
    return a


def _mean_se(a: np.ndarray) -> tuple[float, float]:
    est = float(np.mean(a))
    se = float(np.std(a, ddof=1) / math.sqrt(a.shape[0])) if a.shape[0] > 1 else 0.0
    return est, se


@dataclass(frozen=True)
class McEstimate:
    estimate: float
    std_error: float
    n_paths: int
    t_max: float
    tail_bound_mean: float
    tail_bound_max: float
    stopped_fraction: float
    killed_fraction: float
    truncated_fraction: float
    tail_warning: bool

    def to_json_dict(self):
        return {
            "estimate": self.estimate, "std_error": self.std_error,
            "n_paths": self.n_paths, "t_max": self.t_max,
            "tail_bound_mean": self.tail_bound_mean,
            "tail_bound_max": self.tail_bound_max,
            "stopped_fraction": self.stopped_fraction,
            "killed_fraction": self.killed_fraction,
            "truncated_fraction": self.truncated_fraction,
            "tail_warning": self.tail_warning,
        }


def mc_cost_estimate(x0: float, rule: StoppingRule, dist: WeightingDistribution,
                     model: MarketModel, cost: CostSpec,
                     cfg: SimulationConfig) -> McEstimate:
    """(estimate, standard error) of the stopping cost J(x0; rule).

    Starting inside the stopping region returns exactly K with zero
    variance.  Otherwise paths simulate on the configured grid; the
    reported tail bound aggregates the per-path closure bounds and a
    warning is attached when it is not small against the standard error.
    """
    if x0 <= 0:
        raise ValueError("start state must be positive")
    if rule(x0) == 1:
        return McEstimate(cost.K, 0.0, cfg.paths, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, False)
    payoff, resid, status, t_max = _run_kernel(x0, rule, dist, model, cost, cfg,
                                               eps_list=[0.0])
    est, se = _mean_se(_fold(payoff[:, 0], cfg.antithetic))
    tail_mean = float(np.mean(resid))
    return McEstimate(
        estimate=est, std_error=se, n_paths=cfg.paths, t_max=t_max,
        tail_bound_mean=tail_mean, tail_bound_max=float(np.max(resid)),
        stopped_fraction=float(np.mean(status == 0)),
        killed_fraction=float(np.mean(status == 1)),
        truncated_fraction=float(np.mean(status == 2)),
        tail_warning=bool(tail_mean > max(0.5 * se, 1e-12)),
    )


@dataclass(frozen=True)
class SpikeRow:
    """One (a, eps) probe.

    Sign orientation: a=1 rows report (J_hat(rule) - K)/eps, the stop-now
    deviation gain (negative in the continuation region is consistent with
    equilibrium); a=0 rows report (J_hat(delayed) - J_hat(rule))/eps, the
    same orientation as the analytic spike rate (negative means the delayed
    deviation gains, refuting equilibrium).
    """

    a: int
    eps: float
    value: float
    std_error: float
    sign: str  # negative / zero_within_noise / positive
    violation: bool
    analytic: float | None = None
    agrees_with_analytic: bool | None = None

    def to_json_dict(self):
        return {"a": self.a, "eps": self.eps, "value": self.value,
                "std_error": self.std_error, "sign": self.sign,
                "violation": self.violation, "analytic": self.analytic,
                "agrees_with_analytic": self.agrees_with_analytic}


@dataclass(frozen=True)
class SpikeTrendReport:
    """Finite-eps spike trends plus a linear-in-eps extrapolation.

    The a=0 rate at a fixed state has an O(eps) truncation term, so the
    limit is estimated by extrapolating the two smallest epsilons to 0;
    deep in a region that extrapolation lands on the analytic rate, while
    states within ~sigma*sqrt(eps) of the boundary keep a slow boundary-
    layer correction that no finite probe removes.
    """

    x: float
    rows: tuple[SpikeRow, ...]
    base_estimate: float
    base_std_error: float
    extrapolated_a0_rate: float | None = None
    extrapolated_a0_se: float | None = None

    @property
    def violation_found(self) -> bool:
        return any(r.violation for r in self.rows)

    def to_json_dict(self):
        return {"x": self.x, "base_estimate": self.base_estimate,
                "base_std_error": self.base_std_error,
                "violation_found": self.violation_found,
                "extrapolated_a0_rate": self.extrapolated_a0_rate,
                "extrapolated_a0_se": self.extrapolated_a0_se,
                "rows": [r.to_json_dict() for r in self.rows]}


def _sign_of(value: float, se: float) -> str:
    if value < -3.0 * se:
        return "negative"
    if value > 3.0 * se:
        return "positive"
    return "zero_within_noise"


def mc_spike_probe(x0: float, rule: StoppingRule, dist: WeightingDistribution,
                   model: MarketModel, cost: CostSpec, cfg: SimulationConfig,
                   epsilons=(0.1, 0.05, 0.02, 0.01),
                   analytic_a0: float | None = None,
                   closed_value: float | None = None) -> SpikeTrendReport:
    """Finite-eps spike-variation trends with common random numbers.

    One simulation serves the unperturbed rule and every delayed variant,
    so each a=0 difference is a paired estimate whose noise comes only from
    paths that actually behave differently.  a=1 needs no extra simulation
    (the forced stop pays exactly K).  Statistical power insufficient for a
    sign (|value| <= 3 SE) is reported as zero_within_noise, never
    extrapolated to a violation.
    """
    eps_sorted = tuple(sorted(set(float(e) for e in epsilons), reverse=True))
    if not eps_sorted or min(eps_sorted) <= 0:
        raise ValueError("epsilons must be positive")
    payoff, resid, status, t_max = _run_kernel(
        x0, rule, dist, model, cost, cfg, eps_list=[0.0, *eps_sorted])
    base = _fold(payoff[:, 0], cfg.antithetic)
    base_est, base_se = _mean_se(base)

    rows: list[SpikeRow] = []
    for j, eps in enumerate(eps_sorted, start=1):
        diff = _fold(payoff[:, j], cfg.antithetic) - base
        d_est, d_se = _mean_se(diff)
        value, se = d_est / eps, d_se / eps
        sign = _sign_of(value, se)
        agrees = None
        if analytic_a0 is not None:
            agrees = bool(abs(value - analytic_a0) <= 3.0 * se + 1e-9 * (1 + abs(analytic_a0)))
        rows.append(SpikeRow(a=0, eps=eps, value=value, std_error=se, sign=sign,
                             violation=(sign == "negative"), analytic=analytic_a0,
                             agrees_with_analytic=agrees))
    for eps in eps_sorted:
        value = (base_est - cost.K) / eps
        se = base_se / eps
        sign = _sign_of(value, se)
        analytic = None
        agrees = None
        if closed_value is not None:
            analytic = (closed_value - cost.K) / eps
            agrees = bool(abs(value - analytic) <= 3.0 * se + 1e-12)
        rows.append(SpikeRow(a=1, eps=eps, value=value, std_error=se, sign=sign,
                             violation=(sign == "positive"), analytic=analytic,
                             agrees_with_analytic=agrees))

    extrap = extrap_se = None
    a0 = sorted((r for r in rows if r.a == 0), key=lambda r: r.eps)
    if len(a0) >= 2:
        r1, r2 = a0[0], a0[1]  # two smallest epsilons
        t = r2.eps / (r2.eps - r1.eps)
        extrap = t * r1.value - (t - 1.0) * r2.value
        extrap_se = math.hypot(t * r1.std_error, (t - 1.0) * r2.std_error)
    return SpikeTrendReport(x=x0, rows=tuple(rows), base_estimate=base_est,
                            base_std_error=base_se,
                            extrapolated_a0_rate=extrap, extrapolated_a0_se=extrap_se)
