"""Damped nonlinear least squares and the named curve models built on it.

All fits funnel through :func:`lm_minimize`, a Levenberg-Marquardt loop with a
central-difference Jacobian.  Bounded parameters are never clipped; they are
mapped onto an unconstrained variable (``log``, ``1 + exp`` or a logistic) and
the covariance is pushed back through that map with the delta method.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import DegenerateData, NonConvergence, SingularJacobian

REL_STEP = 1e-6
XTOL = 1e-9
FTOL = 1e-12
MAX_ITER = 500


@dataclass
class FitResult:
    params: dict[str, float]
    stderr: dict[str, float]
    covariance: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool
    n_points: int = 0
    flags: list[str] = field(default_factory=list)
    cost_history: list[float] = field(default_factory=list)  # weighted cost after each accepted step

    @property
    def names(self) -> list[str]:
        return list(self.params)

    @property
    def rms_residual(self) -> float:
        return self.residual_norm / math.sqrt(max(self.n_points, 1))

    def __getitem__(self, name):
        return self.params[name]

    def to_text(self) -> str:
        lines = [f"{k}={v:.12g}±{self.stderr.get(k, 0.0):.6g}" for k, v in self.params.items()]
        lines.append(f"residual_norm={self.residual_norm:.12g}")
        lines.append(f"iterations={self.iterations}")
        lines.append(f"converged={str(self.converged).lower()}")
        if self.flags:
            lines.append("flags=" + ",".join(self.flags))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "FitResult":
        params, stderr, extra = {}, {}, {}
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            if "±" in value:
                v, _, s = value.partition("±")
                params[key] = float(v)
                stderr[key] = float(s)
            else:
                extra[key] = value
        n = len(params)
        cov = np.diag([stderr[k] ** 2 for k in params]) if n else np.zeros((0, 0))
        return cls(
            params=params,
            stderr=stderr,
            covariance=cov,
            residual_norm=float(extra.get("residual_norm", "nan")),
            iterations=int(extra.get("iterations", "0")),
            converged=extra.get("converged", "false") == "true",
            flags=[f for f in extra.get("flags", "").split(",") if f],
        )


# -- parameter transforms -------------------------------------------------

class _Identity:
    def to_internal(self, p):
        return p

    def to_external(self, u):
        return u

    def deriv(self, u):
        return 1.0


class _Positive:
    def to_internal(self, p):
        if p <= 0:
            raise ValueError("initial value must be positive")
        return math.log(p)

    def to_external(self, u):
        return math.exp(u)

    def deriv(self, u):
        return math.exp(u)


class _Lower:
    """p = lo + exp(u)."""

    def __init__(self, lo):
        self.lo = lo

    def to_internal(self, p):
        if p <= self.lo:
            raise ValueError(f"initial value must exceed {self.lo}")
        return math.log(p - self.lo)

    def to_external(self, u):
        return self.lo + math.exp(u)

    def deriv(self, u):
        return math.exp(u)


class _Interval:
    def __init__(self, lo, hi):
        self.lo, self.hi = lo, hi

    def to_internal(self, p):
        if not self.lo < p < self.hi:
            raise ValueError(f"initial value must lie in ({self.lo}, {self.hi})")
        s = (p - self.lo) / (self.hi - self.lo)
        return math.log(s / (1.0 - s))

    def to_external(self, u):
        return self.lo + (self.hi - self.lo) / (1.0 + math.exp(-u))

    def deriv(self, u):
        s = 1.0 / (1.0 + math.exp(-u))
        return (self.hi - self.lo) * s * (1.0 - s)


def _make_transform(bound):
    if bound is None:
        return _Identity()
    if bound == "positive":
        return _Positive()
    lo, hi = bound
    if hi is None or hi == math.inf:
        return _Positive() if lo == 0 else _Lower(lo)
    return _Interval(lo, hi)


def lm_minimize(
    model: Callable[[Mapping[str, float], np.ndarray], np.ndarray],
    x,
    y,
    init: Mapping[str, float],
    weights=None,
    bounds: Mapping[str, object] | None = None,
    fixed: Sequence[str] = (),
    max_iter: int = MAX_ITER,
    allow_singular: bool = False,
    absolute_sigma: bool = False,
    max_step: float | None = None,
) -> FitResult:
    """Minimise ``sum(w * (y - model(p, x))**2)`` over the free parameters.

    ``bounds`` maps a parameter name to ``"positive"``, ``(lo, None)`` or
    ``(lo, hi)``.  ``weights`` are inverse variances; when ``absolute_sigma`` is
    false the covariance is rescaled by the reduced chi-square.  ``max_step``
    caps each step in the internal (transformed) coordinates; longer steps
    are treated as rejected and the damping grows.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.ones_like(y) if weights is None else np.asarray(weights, dtype=float)
    sw = np.sqrt(w)
    bounds = dict(bounds or {})
    names = list(init)
    free = [n for n in names if n not in fixed]
    n_free = len(free)
    if y.size < n_free + 1:
        raise DegenerateData(f"need at least {n_free + 1} points, got {y.size}")
    if not all(math.isfinite(v) for v in init.values()):
        raise ValueError("initial parameters must be finite")

    transforms = {n: _make_transform(bounds.get(n)) for n in free}
    base = dict(init)
    u = np.array([transforms[n].to_internal(float(init[n])) for n in free])

    def external(uvec):
        p = dict(base)
        for n, ui in zip(free, uvec):
            p[n] = transforms[n].to_external(ui)
        return p

    def residual(uvec):
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                return sw * (y - np.asarray(model(external(uvec), x), dtype=float))
        except OverflowError:
            return np.full(y.shape, np.inf)

    def jacobian(uvec, r0):
        jac = np.empty((y.size, n_free))
        for k in range(n_free):
            h = REL_STEP * max(abs(uvec[k]), 1.0)
            up = uvec.copy()
            dn = uvec.copy()
            up[k] += h
            dn[k] -= h
            jac[:, k] = (residual(up) - residual(dn)) / (2.0 * h)
        return jac

    r = residual(u)
    if not np.all(np.isfinite(r)):
        raise ValueError("model is not finite at the initial parameters")
    cost = float(r @ r)
    history = [cost]
    scale = float((sw * y) @ (sw * y)) or 1.0
    lam = 1e-9
    iterations = 0
    converged = n_free == 0 or cost <= 1e-28 * scale
    jac = jacobian(u, r) if n_free else np.zeros((y.size, 0))
    if n_free and not allow_singular:
        zero_cols = np.all(jac == 0.0, axis=0)
        if zero_cols.any():
            bad = [free[i] for i in np.flatnonzero(zero_cols)]
            raise SingularJacobian(f"no sensitivity to {', '.join(bad)}")

    while not converged and iterations < max_iter:
        jtj = jac.T @ jac
        grad = jac.T @ r
        diag = np.diag(jtj).copy()
        diag[diag == 0.0] = 1.0
        accepted = False
        while lam < 1e16:
            a = jtj + lam * np.diag(diag)
            try:
                step = np.linalg.solve(a, grad)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            if max_step is not None and np.max(np.abs(step)) > max_step:
                lam *= 10.0
                continue
            u_new = u - step
            r_new = residual(u_new)
            if np.all(np.isfinite(r_new)):
                cost_new = float(r_new @ r_new)
                if cost_new <= cost:
                    accepted = True
                    break
            lam *= 10.0
        if not accepted:
            # no descent direction left at machine precision
            converged = True
            break
        iterations += 1
        dcost = cost - cost_new
        dx = np.max(np.abs(u_new - u) / np.maximum(np.abs(u), 1e-12 + np.abs(u_new)))
        u, r, cost = u_new, r_new, cost_new
        history.append(cost)
        lam = max(lam / 10.0, 1e-12)
        if cost <= 1e-28 * scale or dx < XTOL or dcost <= FTOL * max(cost + dcost, 1e-300):
            converged = True
            break
        jac = jacobian(u, r)

    if n_free:
        jac = jacobian(u, r)
    p_final = external(u)
    dof = max(y.size - n_free, 1)
    s2 = 1.0 if absolute_sigma else cost / dof
    cov_full = np.zeros((len(names), len(names)))
    flags: list[str] = []
    if n_free:
        cond, cov_u = math.inf, np.full((n_free, n_free), math.nan)
        if np.all(np.isfinite(jac)):
            try:
                # pinv(J^T J) = V S^-2 V^T, without squaring J first
                _, sv, vt = np.linalg.svd(jac, full_matrices=False)
                cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else math.inf
                keep = sv > sv[0] * 1e-15
                cov_u = (vt[keep].T / sv[keep] ** 2) @ vt[keep] * s2
            except np.linalg.LinAlgError:
                pass
        if cond > 1e12:
            flags.append("singular")
            if not allow_singular:
                raise SingularJacobian("Jacobian is rank deficient at the solution", cond)
        d = np.array([transforms[n].deriv(ui) for n, ui in zip(free, u)])
        cov_p = cov_u * np.outer(d, d)
        idx = [names.index(n) for n in free]
        cov_full[np.ix_(idx, idx)] = cov_p
    stderr = {n: float(math.sqrt(max(cov_full[i, i], 0.0))) for i, n in enumerate(names)}
    result = FitResult(
        params={n: float(p_final[n]) for n in names},
        stderr=stderr,
        covariance=cov_full,
        residual_norm=math.sqrt(cost),
        iterations=iterations,
        converged=converged,
        n_points=int(y.size),
        flags=flags,
        cost_history=history,
    )
    if not converged:
        raise NonConvergence(f"no convergence after {max_iter} iterations", result)
    return result


# -- named models ----------------------------------------------------------

def sigmoid(p, v):
    width = max(p["width"], 1e-300)
    z = np.clip((np.asarray(v, dtype=float) - p["center"]) / width, -700, 700)
    return p["offset"] + p["amplitude"] / (1.0 + np.exp(z))


def biexp(p, t):
    t = np.asarray(t, dtype=float)
    return p["offset"] + p["a1"] * np.exp(-t / p["tau1"]) + p["a2"] * np.exp(-t / p["tau2"])


def monoexp(p, t):
    t = np.asarray(t, dtype=float)
    return p["offset"] + p["a"] * np.exp(-t / p["tau"])


FOUR_LN2 = 4.0 * math.log(2.0)


def gauss_linear(p, e):
    e = np.asarray(e, dtype=float)
    return p["offset"] + p["slope"] * e + p["amplitude"] * np.exp(-FOUR_LN2 * (e - p["center"]) ** 2 / p["fwhm"] ** 2)


def _xy(data):
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 2 or arr.shape[1] < 2:
        raise ValueError("data must be a sequence of (x, y[, weight]) rows")
    order = np.argsort(arr[:, 0], kind="stable")
    arr = arr[order]
    w = arr[:, 2] if arr.shape[1] > 2 else None
    return arr[:, 0], arr[:, 1], w


def _flat(y, tol=1e-9):
    span = np.ptp(y)
    return span <= tol * max(np.max(np.abs(y)), 1e-300)


def fit_sigmoid(data) -> FitResult:
    """PL(V) = offset + amplitude / (1 + exp((V - center) / width)), width > 0.

    The fitted center is the conversion voltage.
    """
    v, y, w = _xy(data)
    if v.size < 6:
        raise DegenerateData("sigmoid fit needs at least 6 points")
    if _flat(y):
        return _flat_result(["center", "width", "amplitude", "offset"], y, v.size,
                            {"center": float(np.mean(v)), "width": float(np.ptp(v) / 10 or 1.0),
                             "amplitude": 0.0, "offset": float(np.mean(y))},
                            ["flat", "center_unidentifiable"])
    k = max(1, v.size // 10)
    lo_level = float(np.mean(y[:k]))
    hi_level = float(np.mean(y[-k:]))
    mid = 0.5 * (lo_level + hi_level)
    cross = np.flatnonzero(np.diff(np.sign(y - mid)) != 0)
    center0 = float(0.5 * (v[cross[0]] + v[cross[0] + 1])) if cross.size else float(np.mean(v))
    init = {"center": center0, "width": float(np.ptp(v) / 10.0),
            "amplitude": lo_level - hi_level, "offset": hi_level}
    res = lm_minimize(sigmoid, v, y, init, weights=w, bounds={"width": "positive"}, allow_singular=True)
    if abs(res.params["amplitude"]) <= 1e-6 * max(np.max(np.abs(y)), 1e-300) or "singular" in res.flags:
        res.flags.append("center_unidentifiable")
    return res


def _flat_result(names, y, n, params, flags):
    resid = y - params.get("offset", 0.0)
    return FitResult(params=params, stderr={k: 0.0 for k in names},
                     covariance=np.zeros((len(names), len(names))),
                     residual_norm=float(np.sqrt(resid @ resid)), iterations=0,
                     converged=True, n_points=n, flags=flags)


def _exp_grid(t, n=24):
    span = float(np.ptp(t))
    dt = float(np.min(np.diff(t))) if t.size > 1 else span
    return np.geomspace(max(dt, span * 1e-4) * 0.5, span * 3.0, n)


def _linear_ls(cols, y, w):
    a = np.column_stack(cols)
    if w is not None:
        sw = np.sqrt(w)
        coef, *_ = np.linalg.lstsq(a * sw[:, None], y * sw, rcond=None)
        r = (y - a @ coef) * sw
    else:
        coef, *_ = np.linalg.lstsq(a, y, rcond=None)
        r = y - a @ coef
    return coef, float(r @ r)


def fit_monoexp(data, offset: float | None = None) -> FitResult:
    """y = offset + a * exp(-t / tau).  ``offset`` fixes the baseline when given."""
    t, y, w = _xy(data)
    if t.size < 4:
        raise DegenerateData("mono-exponential fit needs at least 4 points")
    t0 = t[0]
    best = None
    for tau in _exp_grid(t):
        e = np.exp(-(t - t0) / tau)
        if offset is None:
            coef, c = _linear_ls([e, np.ones_like(t)], y, w)
            cand = {"a": coef[0] * math.exp(t0 / tau) if t0 / tau < 700 else coef[0], "tau": tau, "offset": coef[1]}
        else:
            coef, c = _linear_ls([e], y - offset, w)
            cand = {"a": coef[0] * math.exp(t0 / tau) if t0 / tau < 700 else coef[0], "tau": tau, "offset": offset}
        if best is None or c < best[0]:
            best = (c, cand)
    init = best[1]
    if abs(init["a"]) < 1e-12 * max(np.max(np.abs(y)), 1e-300):
        init["a"] = 1e-6 * (np.ptp(y) or 1.0)
    fixed = ("offset",) if offset is not None else ()
    res = lm_minimize(monoexp, t, y, init, weights=w, bounds={"tau": "positive"},
                      fixed=fixed, allow_singular=True)
    if abs(res.params["a"]) <= 1e-6 * max(np.max(np.abs(y)), 1e-300):
        res.flags.append("tau_unidentifiable")
    return res


def fit_biexp(data, offset: float | None = None) -> FitResult:
    """y = offset + a1 exp(-t/tau1) + a2 exp(-t/tau2) with tau1 < tau2 on output.

    Initial values come from a deterministic grid over (tau1, tau2) with the
    amplitudes solved linearly at each grid point.
    """
    t, y, w = _xy(data)
    if t.size < 12:
        raise DegenerateData("biexponential fit needs at least 12 points")
    if np.any(t < 0):
        raise ValueError("biexponential fit expects t >= 0")
    ymax = max(np.max(np.abs(y)), 1e-300)
    grid = _exp_grid(t)
    best = None
    for i, tau1 in enumerate(grid):
        e1 = np.exp(-t / tau1)
        for tau2 in grid[i + 2:]:
            e2 = np.exp(-t / tau2)
            cols = [e1, e2] + ([np.ones_like(t)] if offset is None else [])
            coef, c = _linear_ls(cols, y - (offset or 0.0), w)
            if best is None or c < best[0]:
                best = (c, tau1, tau2, coef)
    _, tau1, tau2, coef = best
    init = {"a1": coef[0], "tau1": tau1, "a2": coef[1], "tau2": tau2,
            "offset": coef[2] if offset is None else offset}
    for k in ("a1", "a2"):
        if abs(init[k]) < 1e-9 * ymax:
            init[k] = 1e-6 * (np.ptp(y) or 1.0)
    fixed = ("offset",) if offset is not None else ()
    flags = []
    # the amplitudes and offset are linear: settle the two time constants on
    # the projected problem first, then polish all parameters jointly
    base = 0.0 if offset is None else offset

    def projected(p, tt):
        cols = [np.exp(-tt / p["tau1"]), np.exp(-tt / p["tau2"])]
        if offset is None:
            cols.append(np.ones_like(tt))
        coef, _ = _linear_ls(cols, y - base, w)
        return base + np.column_stack(cols) @ coef

    try:
        vp = lm_minimize(projected, t, y, {"tau1": tau1, "tau2": tau2}, weights=w,
                         bounds={"tau1": "positive", "tau2": "positive"}, allow_singular=True)
        e1, e2 = np.exp(-t / vp["tau1"]), np.exp(-t / vp["tau2"])
        cols = [e1, e2] + ([np.ones_like(t)] if offset is None else [])
        coef, _ = _linear_ls(cols, y - base, w)
        init = {"a1": coef[0], "tau1": vp["tau1"], "a2": coef[1], "tau2": vp["tau2"],
                "offset": coef[2] if offset is None else offset}
        for k in ("a1", "a2"):
            if abs(init[k]) < 1e-9 * ymax:
                init[k] = 1e-6 * (np.ptp(y) or 1.0)
    except NonConvergence:
        pass
    try:
        res = lm_minimize(biexp, t, y, init, weights=w,
                          bounds={"tau1": "positive", "tau2": "positive"},
                          fixed=fixed, allow_singular=True)
    except NonConvergence as exc:
        if exc.result is None:
            raise
        raise NonConvergence("biexponential fit did not converge", exc.result) from exc
    p = res.params
    if p["tau1"] > p["tau2"]:
        res = _swap_biexp(res)
        p = res.params
    amp_scale = abs(p["a1"]) + abs(p["a2"])
    if amp_scale <= 1e-6 * ymax:
        res.flags.append("no_decay")
        res.flags.append("tau_collapse")
    elif abs(p["tau2"] - p["tau1"]) <= 0.05 * p["tau2"] or min(abs(p["a1"]), abs(p["a2"])) <= 1e-3 * amp_scale:
        res.flags.append("tau_collapse")
    res.flags.extend(flags)
    return res


def _swap_biexp(res: FitResult) -> FitResult:
    order = ["a2", "tau2", "a1", "tau1", "offset"]
    names = res.names
    perm = [names.index(n) for n in order]
    relabel = dict(zip(order, ["a1", "tau1", "a2", "tau2", "offset"]))
    params = {relabel[n]: res.params[n] for n in order}
    stderr = {relabel[n]: res.stderr[n] for n in order}
    cov = res.covariance[np.ix_(perm, perm)]
    params = {k: params[k] for k in ["a1", "tau1", "a2", "tau2", "offset"]}
    stderr = {k: stderr[k] for k in params}
    return FitResult(params, stderr, cov, res.residual_norm, res.iterations,
                     res.converged, res.n_points, list(res.flags), list(res.cost_history))


def fit_powerlaw(data) -> FitResult:
    """k = prefactor * P**exponent, by ordinary least squares in log-log space."""
    p, k, _ = _xy(data)
    if np.any(p <= 0) or np.any(k <= 0):
        raise DegenerateData("power-law fit needs strictly positive data")
    if p.size < 2:
        raise DegenerateData("power-law fit needs at least 2 points")
    lx, ly = np.log(p), np.log(k)
    a = np.column_stack([lx, np.ones_like(lx)])
    coef, *_ = np.linalg.lstsq(a, ly, rcond=None)
    r = ly - a @ coef
    dof = max(p.size - 2, 1)
    s2 = float(r @ r) / dof
    cov_log = np.linalg.inv(a.T @ a) * s2
    slope, icpt = float(coef[0]), float(coef[1])
    pref = math.exp(icpt)
    d = np.array([1.0, pref])
    cov = cov_log * np.outer(d, d)
    return FitResult(
        params={"exponent": slope, "prefactor": pref},
        stderr={"exponent": math.sqrt(cov[0, 0]), "prefactor": math.sqrt(cov[1, 1])},
        covariance=cov,
        residual_norm=math.sqrt(float(r @ r)),
        iterations=1,
        converged=True,
        n_points=int(p.size),
    )


def fit_gauss_linear(data) -> FitResult:
    """y = offset + slope*E + amplitude*exp(-4 ln2 (E-center)^2 / fwhm^2)."""
    e, y, w = _xy(data)
    if e.size < 8:
        raise DegenerateData("Gaussian fit needs at least 8 points")
    coef, _ = _linear_ls([e, np.ones_like(e)], y, w)
    line = coef[0] * e + coef[1]
    resid_line = y - line
    ymax = max(np.max(np.abs(y)), 1e-300)
    if np.max(np.abs(resid_line)) <= 1e-9 * ymax:
        res = _flat_result(["center", "fwhm", "amplitude", "slope", "offset"], resid_line, e.size,
                           {"center": float(np.mean(e)), "fwhm": float(np.ptp(e) / 4),
                            "amplitude": 0.0, "slope": float(coef[0]), "offset": float(coef[1])},
                           ["center_unidentifiable"])
        res.residual_norm = float(np.sqrt(resid_line @ resid_line))
        return res
    # endpoints define the background guess; the detrended peak gives center and width
    k = max(1, e.size // 10)
    s0 = (np.mean(y[-k:]) - np.mean(y[:k])) / (np.mean(e[-k:]) - np.mean(e[:k]))
    o0 = np.mean(y[:k]) - s0 * np.mean(e[:k])
    det = y - (s0 * e + o0)
    if abs(det.min()) > abs(det.max()):
        det = -det
    i = int(np.argmax(det))
    pos = np.clip(det, 0, None)
    if pos.sum() > 0:
        mean = float(np.sum(pos * e) / pos.sum())
        var = float(np.sum(pos * (e - mean) ** 2) / pos.sum())
    else:
        var = (np.ptp(e) / 8) ** 2
    spacing = float(np.min(np.diff(e)))
    fwhm0 = max(math.sqrt(max(var, 0.0)) * 2.3548, 2 * spacing)
    starts = [(float(e[i]), min(fwhm0, float(np.ptp(e))))]
    # a coarse (center, fwhm) grid with the linear parameters solved exactly
    # catches peaks the moment estimate misses under a steep background
    best = None
    for w0 in np.geomspace(2 * spacing, float(np.ptp(e)), 10):
        for c0 in e:
            _, cost = _linear_ls([np.exp(-FOUR_LN2 * (e - c0) ** 2 / w0**2), e, np.ones_like(e)], y, w)
            if best is None or cost < best[0]:
                best = (cost, float(c0), float(w0))
    starts.append(best[1:])

    def projected(p, ee):
        cols = [np.exp(-FOUR_LN2 * (ee - p["center"]) ** 2 / p["fwhm"] ** 2), ee, np.ones_like(ee)]
        coef, _ = _linear_ls(cols, y, w)
        return np.column_stack(cols) @ coef

    init, best_cost = None, math.inf
    for c0, w0 in starts:
        try:
            vp = lm_minimize(projected, e, y, {"center": c0, "fwhm": w0}, weights=w,
                             bounds={"fwhm": "positive"}, allow_singular=True)
        except NonConvergence as exc:
            vp = exc.result
        cols = [np.exp(-FOUR_LN2 * (e - vp["center"]) ** 2 / vp["fwhm"] ** 2), e, np.ones_like(e)]
        coef, cost = _linear_ls(cols, y, w)
        if cost < best_cost:
            best_cost = cost
            init = {"center": vp["center"], "fwhm": vp["fwhm"], "amplitude": float(coef[0]),
                    "slope": float(coef[1]), "offset": float(coef[2])}
    res = lm_minimize(gauss_linear, e, y, init, weights=w, bounds={"fwhm": "positive"}, allow_singular=True)
    c = res.params["center"]
    if not e[0] <= c <= e[-1]:
        res.flags.append("peak_outside_range")
    if abs(res.params["amplitude"]) <= 1e-6 * ymax:
        res.flags.append("center_unidentifiable")
    return res


FIT_MODELS = {
    "sigmoid": fit_sigmoid,
    "biexp": fit_biexp,
    "monoexp": fit_monoexp,
    "powerlaw": fit_powerlaw,
    "gauss_linear": fit_gauss_linear,
}
