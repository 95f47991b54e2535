"""Optimal regularization: sign analysis, closed forms, and search.

The headline quantity is the risk-minimizing regularization value, which
can be negative when strong eigendirections carry disproportionately
strong signal and noise is small.  The search machinery is derivative
based: the risk derivative factors into a positive prefactor times a sum
of two signed parts, so locating sign changes of that sum is both cheaper
and better conditioned than minimizing the risk directly.  A golden
section pass over the risk itself remains as the fallback when no sign
change is bracketed.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, RegimeError, SolverError
from .risk import asymptotic_risk, risk_derivative, weighted_model
from .spectra import JointSpectrum, ModelSpec, WeightedSpectrum
from .stieltjes import DEFAULT_CONFIG, SolverConfig, find_edge, solve_m

_GRID_POINTS = 512
_ZERO_ATOL = 1e-7
_TIE_RTOL = 1e-9


@dataclass(frozen=True)
class LambdaOptResult:
    """Outcome of an optimal-regularization computation.

    ``method`` records how the value was obtained (``closed_form``,
    ``derivative_root``, or ``golden_section``); ``sign_class`` is one of
    ``negative``, ``zero``, ``positive``, ``indeterminate``; ``domain`` is
    the half-open search interval that was considered admissible.
    """

    lambda_opt: float
    risk_at_opt: float
    method: str
    sign_class: str
    domain: tuple


@dataclass(frozen=True)
class TwoPointSpec:
    """Two-atom benchmark family: a unit base atom plus a spiked atom.

    Mass ``q`` sits on the spike ``(h1, g1)`` with ``h1, g1 > 1`` and the
    rest on ``(1, 1)``.  Used by the negative-regularization threshold
    analysis, which is sharp exactly for this family.
    """

    q: float
    h1: float
    g1: float
    gamma: float

    def __post_init__(self):
        if not (0.0 < self.q < 1.0):
            raise ValueError(f"q must lie in (0, 1), got {self.q!r}")
        if not (self.h1 > 1.0 and self.g1 > 1.0):
            raise ValueError("spike coordinates must exceed 1")
        if not self.gamma > 1.0:
            raise ValueError("threshold analysis needs gamma > 1")

    def spectrum(self) -> JointSpectrum:
        return JointSpectrum([(1.0, 1.0, 1.0 - self.q), (self.h1, self.g1, self.q)])

    def model(self, sigma2: float) -> ModelSpec:
        return ModelSpec(self.gamma, sigma2, self.spectrum())


# ---------------------------------------------------------------------------
# structure detection
# ---------------------------------------------------------------------------


def conditional_means(spectrum: JointSpectrum):
    """Group atoms by eigenvalue and average the signal energy per level.

    Returns ``(levels, means, masses)`` with levels ascending; eigenvalues
    within a relative 1e-12 of each other share a level.
    """
    order = np.argsort(spectrum.h, kind="stable")
    levels, means, masses = [], [], []
    for i in order:
        h, g, w = float(spectrum.h[i]), float(spectrum.g[i]), float(spectrum.w[i])
        if levels and abs(h - levels[-1]) <= 1e-12 * max(1.0, abs(h)):
            means[-1] += w * g
            masses[-1] += w
        else:
            levels.append(h)
            means.append(w * g)
            masses.append(w)
    means = [m / w for m, w in zip(means, masses)]
    return np.array(levels), np.array(means), np.array(masses)


def _monotonicity(means: np.ndarray) -> str:
    if means.size == 1:
        return "constant"
    scale = max(1.0, float(np.max(np.abs(means))))
    tol = 1e-12 * scale
    diffs = np.diff(means)
    if np.all(np.abs(diffs) <= tol):
        return "constant"
    if np.all(diffs >= -tol):
        return "increasing"
    if np.all(diffs <= tol):
        return "decreasing"
    return "non-monotone"


def classify_sign(model: ModelSpec) -> str:
    """Predict the sign of the optimal regularization from structure alone.

    The prediction covers the overparameterized regime, where negative
    values are admissible: increasing conditional signal profiles pull the
    optimum negative (strictly so when noiseless), decreasing ones push it
    positive, flat ones put it exactly at the noise-to-signal ratio.
    Mixed cases cannot be signed without solving and return
    ``indeterminate``.
    """
    _, means, _ = conditional_means(model.spectrum)
    shape = _monotonicity(means)
    noiseless = model.sigma2 == 0.0
    if shape == "constant":
        return "zero" if noiseless else "positive"
    if shape == "increasing":
        return "negative" if noiseless else "indeterminate"
    if shape == "decreasing":
        return "positive"
    return "indeterminate"


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------


def lambda_opt_closed_form(model: ModelSpec, config: SolverConfig = DEFAULT_CONFIG):
    """Exact optimum when the conditional signal profile is flat.

    Whenever ``E[g | h]`` does not depend on ``h`` (point-mass designs,
    point-mass signals, or any flat profile), the optimum is
    ``sigma2 / E[g]`` exactly.  Returns None when the profile is not flat;
    the noiseless flat case returns the boundary value 0.
    """
    _, means, masses = conditional_means(model.spectrum)
    if _monotonicity(means) != "constant":
        return None
    e_g = float(np.dot(masses, means))
    lam_opt = model.sigma2 / e_g
    try:
        domain = regime_guard(model, config)
    except RegimeError:
        domain = (lam_opt, lam_opt)
    if lam_opt == 0.0 and model.gamma == 1.0:
        # Noiseless interpolation at the critical ratio: risk vanishes in
        # the limit but the fixed point itself degenerates.
        risk_val = 0.0
    else:
        risk_val = asymptotic_risk(model, lam_opt, config).total
    sign = "zero" if lam_opt == 0.0 else "positive"
    return LambdaOptResult(
        lambda_opt=lam_opt,
        risk_at_opt=risk_val,
        method="closed_form",
        sign_class=sign,
        domain=domain,
    )


def regime_guard(model: ModelSpec, config: SolverConfig = DEFAULT_CONFIG) -> tuple:
    """Admissible search interval for the optimal regularization.

    Overparameterized problems may search a margin above the effective
    negative limit; underparameterized ones are restricted to
    nonnegative values (their optimum is never negative).  The critical
    ratio ``gamma = 1`` is rejected: the ridgeless endpoint degenerates
    and no finite search interval is trustworthy there.
    """
    if model.gamma == 1.0:
        raise RegimeError("aspect ratio exactly 1 is excluded from optimum searches")
    lam_max = 100.0 * (model.sigma2 + model.gamma * model.spectrum.e_gh())
    if model.gamma < 1.0:
        return (0.0, lam_max)
    edge = find_edge(model, config)
    lo = -edge.c0_effective * (1.0 - 1e-3)
    return (lo, lam_max)


# ---------------------------------------------------------------------------
# derivative-based search
# ---------------------------------------------------------------------------


def _search_grid(lo: float, hi: float) -> np.ndarray:
    """Sign-scan grid: geometric resolution toward 0 from both sides."""
    if lo < 0.0:
        neg = -np.geomspace(-lo, -lo * 1e-8, _GRID_POINTS - 342)
        pos = np.geomspace(hi * 1e-10, hi, 341)
        return np.concatenate([neg, [0.0], pos])
    return np.concatenate([[0.0], np.geomspace(hi * 1e-10, hi, _GRID_POINTS - 1)])


def _deriv_sum(model: ModelSpec, lam: float, config: SolverConfig) -> float:
    parts = risk_derivative(model, lam, config)
    return parts.part3 + parts.part4


def _refine_root(model: ModelSpec, la: float, lb: float, da: float, config: SolverConfig) -> float:
    for _ in range(config.max_iter):
        mid = 0.5 * (la + lb)
        dm = _deriv_sum(model, mid, config)
        if dm == 0.0:
            return mid
        if (dm < 0.0) == (da < 0.0):
            la, da = mid, dm
        else:
            lb = mid
        if lb - la <= config.tol * max(1.0, abs(mid)):
            break
    return 0.5 * (la + lb)


def _golden_min(f, a: float, b: float, config: SolverConfig) -> float:
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(3 * config.max_iter):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
        if b - a <= 1e-11 * max(1.0, abs(a) + abs(b)):
            break
    return 0.5 * (a + b)


def lambda_opt_search(model: ModelSpec, config: SolverConfig = DEFAULT_CONFIG) -> LambdaOptResult:
    """Locate the risk-minimizing regularization by derivative sign scan.

    Scans a 512-point grid with geometric resolution near zero, refines
    every derivative sign change by bisection, and takes the global risk
    argmin over the refined roots (plus the exact ridgeless endpoint in
    the underparameterized regime).  Falls back to golden section on the
    risk when no sign change is bracketed.  When a closed form applies,
    the search result is cross-checked against it and a disagreement
    beyond 1e-6 raises SolverError.
    """
    lo, hi = regime_guard(model, config)
    grid = _search_grid(lo, hi)
    underparam = model.gamma < 1.0

    derivs = np.full(grid.shape, np.nan)
    for i, lam in enumerate(grid):
        if underparam and lam == 0.0:
            continue  # fixed point degenerates at the ridgeless endpoint
        derivs[i] = _deriv_sum(model, float(lam), config)

    roots = []
    finite = ~np.isnan(derivs)
    idx = np.flatnonzero(finite)
    for a, b in zip(idx[:-1], idx[1:]):
        da, db = derivs[a], derivs[b]
        if da == 0.0:
            roots.append(float(grid[a]))
        elif da * db < 0.0:
            roots.append(_refine_root(model, float(grid[a]), float(grid[b]), da, config))
    if finite.size and derivs[idx[-1]] == 0.0:
        roots.append(float(grid[idx[-1]]))

    candidates = [(lam, asymptotic_risk(model, lam, config).total, "derivative_root") for lam in roots]
    if underparam:
        candidates.append((0.0, asymptotic_risk(model, 0.0, config).total, "golden_section"))
    if not roots:
        a = float(grid[1]) if underparam else lo
        lam_g = _golden_min(lambda t: asymptotic_risk(model, t, config).total, a, hi, config)
        candidates.append((lam_g, asymptotic_risk(model, lam_g, config).total, "golden_section"))

    candidates.sort(key=lambda c: c[1])
    lam_opt, risk_opt, method = candidates[0]

    tie = any(
        abs(c[1] - risk_opt) <= _TIE_RTOL * max(1.0, abs(risk_opt))
        and abs(c[0] - lam_opt) > max(_ZERO_ATOL, 1e-6 * abs(lam_opt))
        for c in candidates[1:]
    )
    if tie:
        sign = "indeterminate"
    elif abs(lam_opt) <= _ZERO_ATOL:
        sign = "zero"
    else:
        sign = "negative" if lam_opt < 0.0 else "positive"

    closed = lambda_opt_closed_form(model, config)
    if closed is not None and abs(closed.lambda_opt - lam_opt) > 1e-6 * max(1.0, abs(closed.lambda_opt)):
        raise SolverError(
            "search disagrees with the applicable closed form",
            {"search": lam_opt, "closed_form": closed.lambda_opt},
        )
    return LambdaOptResult(
        lambda_opt=lam_opt,
        risk_at_opt=risk_opt,
        method=method,
        sign_class=sign,
        domain=(lo, hi),
    )


# ---------------------------------------------------------------------------
# negative-regularization threshold for the two-point family
# ---------------------------------------------------------------------------


def negative_ridge_threshold(spec: TwoPointSpec) -> float:
    """Noise level below which the optimum goes negative.

    Closed-form sufficient threshold for the two-point family: for noise
    variances strictly below it the optimal regularization is negative,
    at or above it nonnegative.  The first branch of the inner maximum
    only exists when the spike alone keeps the problem overparameterized
    (``gamma q > 1``); otherwise only the second branch applies.
    """
    q, h1, g1, gamma = spec.q, spec.h1, spec.g1, spec.gamma
    gbar = gamma - 1.0
    pref = (h1 - 1.0) * (g1 - 1.0) * h1
    b2 = (
        gamma * q * (1.0 - q) * gbar**3
        / ((1.0 - q) * (h1 + gbar) ** 3 + q * h1**2 * gamma**3)
    )
    if gamma * q > 1.0:
        gq = gamma * q - 1.0
        b1 = (
            gq**3 * gbar**3 * (1.0 - q)
            / ((1.0 - q) * gamma**2 * (gbar**3 * q**2 + gq**3 * h1**2))
        )
        return pref * max(b1, b2)
    return pref * b2


# ---------------------------------------------------------------------------
# isotropic-signal sweep over the aspect ratio
# ---------------------------------------------------------------------------


def monotonicity_sweep(
    spectrum: JointSpectrum,
    sigma2: float,
    gamma_grid,
    config: SolverConfig = DEFAULT_CONFIG,
) -> list:
    """Optimally tuned risk as dimensions proliferate at fixed signal.

    The signal energy is held at the flat total ``c`` (the common value of
    ``g`` in the input spectrum) while the aspect ratio grows, so the
    per-direction energy scales like ``c / gamma`` and the optimum is
    ``gamma * sigma2 / c`` exactly.  Returns ``(gamma, lambda_opt, risk)``
    rows and checks the risk sequence is non-decreasing within 1e-10; a
    violation raises SolverError since it would falsify the closed form.
    """
    _, means, _ = conditional_means(spectrum)
    if _monotonicity(means) != "constant":
        raise DomainError("sweep requires a flat signal profile (g constant)")
    c = float(means[0])
    rows = []
    for gamma in gamma_grid:
        gamma = float(gamma)
        if sigma2 == 0.0:
            if gamma >= 1.0:
                raise DomainError(
                    "noiseless sweep is only defined for gamma < 1 (interpolation succeeds)"
                )
            rows.append((gamma, 0.0, 0.0))
            continue
        lam_opt = gamma * sigma2 / c
        m = solve_m(ModelSpec(gamma, sigma2, spectrum), lam_opt, config).m
        rows.append((gamma, lam_opt, sigma2 / (lam_opt * m)))
    risks = [r[2] for r in rows]
    for a, b in zip(risks[:-1], risks[1:]):
        if b < a - 1e-10 * max(1.0, abs(a)):
            raise SolverError("optimally tuned risk decreased along the sweep", {"rows": rows})
    return rows


# ---------------------------------------------------------------------------
# penalty selection
# ---------------------------------------------------------------------------

_WEIGHTING_MODES = ("ridgeless_bias", "ridgeless_variance", "optimal_lambda", "s_only_optimal")


def select_weighting(wspec: WeightedSpectrum, mode: str) -> np.ndarray:
    """Per-atom optimal penalty profile for the requested criterion.

    ``ridgeless_bias`` and ``optimal_lambda`` both return the product
    profile ``r = s v`` (optimal for the bias at the interpolation point
    and for the optimally tuned total risk).  ``ridgeless_variance``
    returns the flat profile ``r = 1`` (penalty proportional to the design
    covariance).  ``s_only_optimal`` is the best profile measurable from
    the design alone: ``r = E[v | s] * s``, grouping eigenvalues within a
    relative 1e-12.
    """
    if mode not in _WEIGHTING_MODES:
        raise DomainError(f"unknown weighting mode {mode!r}; expected one of {_WEIGHTING_MODES}")
    if mode in ("ridgeless_bias", "optimal_lambda"):
        return np.array(wspec.s * wspec.v)
    if mode == "ridgeless_variance":
        return np.ones_like(wspec.s)
    order = np.argsort(wspec.s, kind="stable")
    r = np.empty_like(wspec.s)
    i = 0
    svals, vvals, wvals = wspec.s[order], wspec.v[order], wspec.w[order]
    while i < order.size:
        j = i + 1
        while j < order.size and abs(svals[j] - svals[i]) <= 1e-12 * max(1.0, abs(svals[i])):
            j += 1
        mean_v = float(np.dot(wvals[i:j], vvals[i:j])) / float(np.sum(wvals[i:j]))
        r[order[i:j]] = svals[i:j] * mean_v
        i = j
    return r


def weighted_lambda_opt(
    wspec: WeightedSpectrum,
    gamma: float,
    sigma2: float,
    config: SolverConfig = DEFAULT_CONFIG,
) -> LambdaOptResult:
    """Optimal regularization for a generalized penalty via projection."""
    return lambda_opt_search(weighted_model(wspec, gamma, sigma2), config)
