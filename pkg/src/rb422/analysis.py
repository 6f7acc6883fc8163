"""Decay fitting, fidelity extraction and bootstrap intervals.

All fits are weighted least squares with the asymptote pinned at 1/4 (the
compiled-Pauli average). Weights are accepted-shot counts, or total shots
when rejected shots are scored as failures.

Phased runs carry a non-zero ``b`` term: after the closing basis change the
effective effect operator equals the rotated state, so ``B`` cannot vanish.
They are fitted jointly with the standard run, with the phased ``b``
amplitude tied to ``kappa`` times the standard amplitude, where ``kappa`` is
the noiseless ratio computed from the frame circuit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import least_squares

from . import code
from .protocol import SurvivalRecord, SurvivalSeries, estimate_survival, group_by_length

ASYMPTOTE = 0.25
MAX_NFEV = 200
BOUNDS_RATE = (-1.0, 1.0)
# q(0) = 1/4 + amplitude must stay inside [0, 1]
BOUNDS_AMPLITUDE = (-0.25, 0.75)


class FitError(RuntimeError):
    pass


class DegenerateDataError(FitError):
    pass


# --- model functions, batched over parameter rows ---------------------------

def _powers(rate: np.ndarray, m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``rate**m`` and its derivative for rate (R,) and integer m (N,)."""
    r = rate[:, None]
    pw = r ** m[None, :]
    dpw = m[None, :] * r ** np.maximum(m - 1, 0)[None, :]
    return pw, dpw


def _single_model(theta: np.ndarray, m: np.ndarray):
    amp, rate = theta[:, 0], theta[:, 1]
    pw, dpw = _powers(rate, m)
    f = ASYMPTOTE + amp[:, None] * pw
    jac = np.stack([pw, amp[:, None] * dpw], axis=-1)
    return f, jac


def _two_term(theta: np.ndarray, m: np.ndarray, kappa: float):
    """``1/4 + kappa B b^m + (D - kappa B) c^m`` for rows ``(B, b, D, c)``.

    ``D`` is the amplitude at ``m = 0``; bounding it keeps ``q(0) <= 1``.
    """
    b_amp, b, d_amp, c = theta.T
    c_amp = d_amp - kappa * b_amp
    pb, dpb = _powers(b, m)
    pc, dpc = _powers(c, m)
    f = ASYMPTOTE + kappa * b_amp[:, None] * pb + c_amp[:, None] * pc
    jac = np.stack([kappa * (pb - pc), kappa * b_amp[:, None] * dpb, pc, c_amp[:, None] * dpc], axis=-1)
    return f, jac


def _double_model(theta: np.ndarray, m: np.ndarray):
    return _two_term(theta, m, 1.0)


def _joint_model(theta: np.ndarray, m_std: np.ndarray, m_ph: np.ndarray, kappa: float):
    f_s, j_s = _single_model(theta[:, :2], m_std)
    j_s = np.concatenate([j_s, np.zeros_like(j_s)], axis=-1)
    f_p, j_p = _two_term(theta, m_ph, kappa)
    return np.concatenate([f_s, f_p], axis=1), np.concatenate([j_s, j_p], axis=1)


def _to_bc(theta: np.ndarray, cov: np.ndarray, kappa: float) -> tuple[np.ndarray, np.ndarray]:
    """Map ``(B, b, D, c)`` and its covariance to ``(B, b, C, c)``."""
    t = np.eye(4)
    t[2, 0] = -kappa
    return t @ theta, t @ cov @ t.T


# --- fit results ------------------------------------------------------------

@dataclass
class DecayFit:
    model: str
    params: dict[str, float]
    stderr: dict[str, float]
    m: np.ndarray
    q: np.ndarray
    weights: np.ndarray
    residuals: np.ndarray
    wsse: float
    nfev: int
    covariance: np.ndarray = field(repr=False, default=None)
    flags: tuple[str, ...] = ()

    def predict(self, m) -> np.ndarray:
        m = np.asarray(m, dtype=float)
        p = self.params
        if self.model == "reduced_b":
            return ASYMPTOTE + p["B"] * p["b"] ** m
        if self.model == "reduced_c":
            return ASYMPTOTE + p["C"] * p["c"] ** m
        return p.get("A", ASYMPTOTE) + p["B"] * p["b"] ** m + p["C"] * p["c"] ** m


@dataclass
class JointFit:
    """Standard + phased fit sharing ``b``; parameters B, b, C, c."""

    params: dict[str, float]
    stderr: dict[str, float]
    covariance: np.ndarray
    kappa: float
    wsse: float
    nfev: int
    standard: SurvivalSeries
    phased: SurvivalSeries

    def predict_standard(self, m) -> np.ndarray:
        return ASYMPTOTE + self.params["B"] * self.params["b"] ** np.asarray(m, float)

    def predict_phased(self, m) -> np.ndarray:
        m = np.asarray(m, float)
        p = self.params
        return ASYMPTOTE + self.kappa * p["B"] * p["b"] ** m + p["C"] * p["c"] ** m


def _series_arrays(series: SurvivalSeries, raw: bool) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if raw:
        return series.m.astype(float), series.q_raw, series.total.astype(float)
    return series.m.astype(float), series.q, series.accepted.astype(float)


def _check_series(m: np.ndarray, q: np.ndarray) -> None:
    if len(np.unique(m)) < 3:
        raise DegenerateDataError("need at least three distinct sequence lengths")
    if np.all(np.abs(q - ASYMPTOTE) < 1e-12):
        raise DegenerateDataError("survival sits at the asymptote everywhere; amplitude unidentifiable")


def _loglinear_init(m: np.ndarray, y: np.ndarray, w: np.ndarray) -> tuple[float, float]:
    """(amplitude, rate) from a weighted line through ``log|y|``."""
    sign = 1.0 if np.sum(w * y) >= 0 else -1.0
    ok = sign * y > 1e-9
    if ok.sum() < 2:
        return float(np.mean(y)) if len(y) else 0.0, 1.0
    ly = np.log(sign * y[ok])
    ww = w[ok] * y[ok] ** 2
    slope, icpt = np.polyfit(m[ok], ly, 1, w=np.sqrt(ww))
    rate = float(np.clip(np.exp(slope), 0.0, 1.0))
    amp = float(np.clip(sign * np.exp(icpt), *BOUNDS_AMPLITUDE))
    return amp, rate


def _solve(model_fn, theta0, q, w, lower, upper):
    sw = np.sqrt(w)

    def resid(t):
        f, _ = model_fn(t[None, :])
        return sw * (f[0] - q)

    def jac(t):
        _, j = model_fn(t[None, :])
        return sw[:, None] * j[0]

    theta0 = np.clip(theta0, lower, upper)
    res = least_squares(resid, theta0, jac=jac, bounds=(lower, upper), method="trf",
                        xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=MAX_NFEV)
    if res.status <= 0 and res.cost > 1e-20:
        raise FitError(f"fit did not converge: {res.message}")
    # trf keeps iterates strictly inside the box; snap to an active bound when that is no worse
    snapped = np.where(np.abs(res.x - upper) < 1e-8, upper, np.where(np.abs(res.x - lower) < 1e-8, lower, res.x))
    if np.any(snapped != res.x):
        r2 = resid(snapped)
        if r2 @ r2 <= 2 * res.cost + 1e-15 * max(1.0, 2 * res.cost):
            res.x, res.fun, res.cost, res.jac = snapped, r2, 0.5 * (r2 @ r2), jac(snapped)
    j = res.jac
    dof = max(len(q) - len(theta0), 1)
    s2 = 2 * res.cost / dof
    cov = np.linalg.pinv(j.T @ j) * s2
    return res.x, cov, res.fun / np.where(sw > 0, sw, 1), 2 * res.cost, res.nfev


def fit_decay(series: SurvivalSeries, model: str = "reduced_b", raw: bool = False,
              fix_asymptote: bool = True) -> DecayFit:
    """Fit ``q = 1/4 + B b^m`` (reduced_b / reduced_c) or ``1/4 + B b^m + C c^m`` (full)."""
    m, q, w = _series_arrays(series, raw)
    _check_series(m, q)
    if not fix_asymptote:
        raise NotImplementedError("the asymptote is always pinned at 1/4 by compiled-Pauli averaging")
    if model in ("reduced_b", "reduced_c"):
        theta0 = np.array(_loglinear_init(m, q - ASYMPTOTE, w))
        lower = np.array([BOUNDS_AMPLITUDE[0], BOUNDS_RATE[0]])
        upper = np.array([BOUNDS_AMPLITUDE[1], BOUNDS_RATE[1]])
        x, cov, resid, wsse, nfev = _solve(lambda t: _single_model(t, m), theta0, q, w, lower, upper)
        names = ("B", "b") if model == "reduced_b" else ("C", "c")
    elif model == "full":
        amp, rate = _loglinear_init(m, q - ASYMPTOTE, w)
        theta0 = np.array([amp / 2, rate, amp, rate * 0.9])
        lower = np.array([-1.0, BOUNDS_RATE[0], BOUNDS_AMPLITUDE[0], BOUNDS_RATE[0]])
        upper = np.array([1.0, BOUNDS_RATE[1], BOUNDS_AMPLITUDE[1], BOUNDS_RATE[1]])
        x, cov, resid, wsse, nfev = _solve(lambda t: _double_model(t, m), theta0, q, w, lower, upper)
        x, cov = _to_bc(x, cov, 1.0)
        names = ("B", "b", "C", "c")
    else:
        raise ValueError(f"unknown model {model!r}")
    se = np.sqrt(np.clip(np.diag(cov), 0, None))
    return DecayFit(model, dict(zip(names, map(float, x))), dict(zip(names, map(float, se))),
                    m, q, w, resid, wsse, nfev, cov)


@lru_cache(maxsize=None)
def phased_amplitude_ratio(platform: str) -> float:
    """Noiseless ratio of the phased-run ``B`` to the standard-run ``B``.

    Zero when the frame removes the ``b`` term, which turns the joint model
    into a plain ``1/4 + C c^m`` fit of the phased data.
    """
    _, b_phased, _ = code.phased_spam_constants(platform)
    e00 = np.zeros((4, 4))
    e00[0, 0] = 1
    _, b_std, _ = code.spam_constants(e00, e00)
    if abs(b_phased) < 1e-12:
        return 0.0
    return b_phased / b_std


def _joint_init(std: SurvivalSeries, ph: SurvivalSeries, kappa: float, raw: bool) -> np.ndarray:
    ms, qs, ws = _series_arrays(std, raw)
    mp, qp, wp = _series_arrays(ph, raw)
    b_amp, b = _loglinear_init(ms, qs - ASYMPTOTE, ws)
    c_amp, c = _loglinear_init(mp, qp - ASYMPTOTE - kappa * b_amp * b**mp, wp)
    return np.array([b_amp, b, kappa * b_amp + c_amp, c])


def fit_standard_phased(std: SurvivalSeries, ph: SurvivalSeries, kappa: Optional[float] = None,
                        platform: str = code.LOGICAL, raw: bool = False) -> JointFit:
    kappa = phased_amplitude_ratio(platform) if kappa is None else kappa
    ms, qs, ws = _series_arrays(std, raw)
    mp, qp, wp = _series_arrays(ph, raw)
    _check_series(ms, qs)
    _check_series(mp, qp)
    q = np.concatenate([qs, qp])
    w = np.concatenate([ws, wp])
    lower = np.array([BOUNDS_AMPLITUDE[0], BOUNDS_RATE[0]] * 2)
    upper = np.array([BOUNDS_AMPLITUDE[1], BOUNDS_RATE[1]] * 2)
    theta0 = _joint_init(std, ph, kappa, raw)
    x, cov, _, wsse, nfev = _solve(lambda t: _joint_model(t, ms, mp, kappa), theta0, q, w, lower, upper)
    x, cov = _to_bc(x, cov, kappa)
    names = ("B", "b", "C", "c")
    se = np.sqrt(np.clip(np.diag(cov), 0, None))
    return JointFit(dict(zip(names, map(float, x))), dict(zip(names, map(float, se))), cov, kappa,
                    wsse, nfev, std, ph)


# --- fidelity ---------------------------------------------------------------

def fidelity_from_params(b: float, c: float) -> float:
    """Two-qubit average fidelity ``(9b + 6c + 5) / 20``."""
    for v in (b, c):
        if not -1 - 1e-6 <= v <= 1 + 1e-6:
            raise ValueError(f"decay parameter {v} outside [-1, 1]")
    return (9 * b + 6 * c + 5) / 20


def fidelity_stderr(fit: JointFit) -> float:
    grad = np.array([0, 9 / 20, 0, 6 / 20])
    return float(np.sqrt(max(grad @ fit.covariance @ grad, 0.0)))


@dataclass
class FidelityEstimate:
    b: float
    c: float
    fidelity: float
    infidelity: float
    ci_low: Optional[float] = None
    ci_high: Optional[float] = None
    stderr: Optional[float] = None

    @classmethod
    def from_params(cls, b: float, c: float, **kw) -> "FidelityEstimate":
        f = fidelity_from_params(b, c)
        return cls(b, c, f, 1 - f, **kw)

    @property
    def ci_width(self) -> float:
        return self.ci_high - self.ci_low

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("b", "c", "fidelity", "infidelity", "ci_low", "ci_high", "stderr")}


# --- bootstrap --------------------------------------------------------------

def _batched_lm(model_fn, theta0: np.ndarray, q: np.ndarray, w: np.ndarray, lower: np.ndarray,
                upper: np.ndarray, max_iter: int = 200, tol: float = 1e-12) -> np.ndarray:
    """Projected Levenberg-Marquardt on many independent data sets at once.

    ``q`` and ``w`` are (R, N); returns the (R, k) fitted parameters.
    Parameters on a bound whose gradient points outward are held fixed for
    that step, so a pinned amplitude does not stall the free ones.
    """
    theta = np.clip(theta0.copy(), lower, upper)
    f, jac = model_fn(theta)
    r = q - f
    sse = np.sum(w * r * r, axis=1)
    lam = np.full(len(theta), 1e-3)
    k = theta.shape[1]
    eye = np.eye(k)
    for _ in range(max_iter):
        jw = jac * w[:, :, None]
        a = np.einsum("rnk,rnl->rkl", jw, jac)
        g = np.einsum("rnk,rn->rk", jw, r)
        pinned = ((theta <= lower) & (g < 0)) | ((theta >= upper) & (g > 0))
        free = ~pinned
        a = a * free[:, :, None] * free[:, None, :] + pinned[:, :, None] * eye
        g = np.where(pinned, 0.0, g)
        diag = np.einsum("rkk->rk", a)
        damp = a + lam[:, None, None] * (diag[:, :, None] * eye + 1e-12 * eye)
        step = np.linalg.solve(damp, g[:, :, None])[:, :, 0]
        trial = np.clip(theta + step, lower, upper)
        f_t, jac_t = model_fn(trial)
        r_t = q - f_t
        sse_t = np.sum(w * r_t * r_t, axis=1)
        better = sse_t <= sse
        theta[better] = trial[better]
        f[better], jac[better], r[better] = f_t[better], jac_t[better], r_t[better]
        moved = np.max(np.abs(step), axis=1)
        sse = np.where(better, sse_t, sse)
        lam = np.where(better, lam / 3, lam * 4)
        if np.all((moved < tol) | (lam > 1e12)):
            break
    return theta


def _sequence_table(records: Sequence[SurvivalRecord], raw: bool):
    """Per length, arrays of per-sequence (successes, denominators)."""
    grouped = group_by_length(records)
    ms, succ, den = [], [], []
    for m, recs in grouped.items():
        ms.append(m)
        succ.append(np.array([r.successes for r in recs], float))
        den.append(np.array([r.total_shots if raw else r.accepted_shots for r in recs], float))
    return np.array(ms, float), succ, den


def _resample(succ, den, n: int, rng: np.random.Generator):
    """Pooled (q, weight) arrays of shape (n, M) for one run."""
    qs = np.empty((n, len(succ)))
    ws = np.empty((n, len(succ)))
    for j, (s, d) in enumerate(zip(succ, den)):
        p_hat = np.divide(s, d, out=np.zeros_like(s), where=d > 0)
        idx = rng.integers(0, len(s), size=(n, len(s)))
        trials = d[idx].astype(np.int64)
        draws = rng.binomial(trials, p_hat[idx])
        tot = trials.sum(axis=1)
        qs[:, j] = np.divide(draws.sum(axis=1), tot, out=np.full(n, ASYMPTOTE), where=tot > 0)
        ws[:, j] = tot
    return qs, ws


def bootstrap_infidelities(std_records: Sequence[SurvivalRecord],
                           phased_records: Optional[Sequence[SurvivalRecord]] = None,
                           resamples: int = 9999, seed: int = 0, platform: str = code.LOGICAL,
                           raw: bool = False, kappa: Optional[float] = None, chunk: int = 2500) -> np.ndarray:
    """Infidelities of ``resamples`` non-parametric bootstrap data sets.

    Per length, sequences are drawn with replacement and each drawn
    sequence's survival is re-sampled as a binomial over its own accepted
    (or, with ``raw``, total) shot count. Without phased records ``c = b``.
    """
    if resamples < 1:
        raise ValueError("need at least one resample")
    kappa = phased_amplitude_ratio(platform) if kappa is None else kappa
    ms, s_succ, s_den = _sequence_table(std_records, raw)
    if any(len(s) < 2 for s in s_succ):
        raise ValueError("bootstrap needs at least two sequences per length")
    std_series = estimate_survival(std_records)
    ss = np.random.SeedSequence(seed)
    out = np.empty(resamples)
    if phased_records is None:
        point = fit_decay(std_series, "reduced_b", raw=raw)
        theta0 = np.array([point.params["B"], point.params["b"]])
        lower = np.array([BOUNDS_AMPLITUDE[0], BOUNDS_RATE[0]])
        upper = np.array([BOUNDS_AMPLITUDE[1], BOUNDS_RATE[1]])
    else:
        mp, p_succ, p_den = _sequence_table(phased_records, raw)
        if any(len(s) < 2 for s in p_succ):
            raise ValueError("bootstrap needs at least two sequences per length")
        point = fit_standard_phased(std_series, estimate_survival(phased_records), kappa, raw=raw)
        p = point.params
        theta0 = np.array([p["B"], p["b"], kappa * p["B"] + p["C"], p["c"]])
        lower = np.array([BOUNDS_AMPLITUDE[0], BOUNDS_RATE[0]] * 2)
        upper = np.array([BOUNDS_AMPLITUDE[1], BOUNDS_RATE[1]] * 2)
    for start in range(0, resamples, chunk):
        n = min(chunk, resamples - start)
        rng = np.random.default_rng(ss.spawn(1)[0])
        qs, ws = _resample(s_succ, s_den, n, rng)
        if phased_records is None:
            theta = _batched_lm(lambda t: _single_model(t, ms), np.tile(theta0, (n, 1)), qs, ws, lower, upper)
            b = c = theta[:, 1]
        else:
            qp, wp = _resample(p_succ, p_den, n, rng)
            theta = _batched_lm(lambda t: _joint_model(t, ms, mp, kappa), np.tile(theta0, (n, 1)),
                                np.hstack([qs, qp]), np.hstack([ws, wp]), lower, upper)
            b, c = theta[:, 1], theta[:, 3]
        out[start:start + n] = 1 - (9 * b + 6 * c + 5) / 20
    return out


def percentile_interval(samples: np.ndarray, level: float = 0.95) -> tuple[float, float]:
    """Order statistics at ranks ``(R+1)(1-level)/2`` and ``(R+1)(1+level)/2``.

    For 9,999 samples these are the 250th and 9,750th smallest values.
    """
    s = np.sort(np.asarray(samples))
    r = len(s)
    lo = int(round((r + 1) * (1 - level) / 2)) - 1
    hi = int(round((r + 1) * (1 + level) / 2)) - 1
    return float(s[max(lo, 0)]), float(s[min(hi, r - 1)])


def bootstrap_ci(std_records: Sequence[SurvivalRecord],
                 phased_records: Optional[Sequence[SurvivalRecord]] = None,
                 resamples: int = 9999, seed: int = 0, **kw) -> tuple[float, float]:
    """95% percentile interval of the infidelity."""
    return percentile_interval(bootstrap_infidelities(std_records, phased_records, resamples, seed, **kw))


def estimate_fidelity(std_records: Sequence[SurvivalRecord], phased_records: Sequence[SurvivalRecord],
                      platform: str = code.LOGICAL, resamples: int = 9999, seed: int = 0,
                      raw: bool = False) -> tuple[JointFit, FidelityEstimate]:
    fit = fit_standard_phased(estimate_survival(std_records), estimate_survival(phased_records),
                              platform=platform, raw=raw)
    b, c = fit.params["b"], fit.params["c"]
    est = FidelityEstimate.from_params(b, c, stderr=fidelity_stderr(fit))
    if resamples:
        est.ci_low, est.ci_high = bootstrap_ci(std_records, phased_records, resamples, seed,
                                               platform=platform, raw=raw)
    return fit, est


# --- post-selection comparison ----------------------------------------------

NAIVE_FIT_FLAGS = ("naive_fit", "leaky_subspace", "asymptote_pinned")


@dataclass
class NoPostselectionResult:
    fit: object
    estimate: FidelityEstimate
    flags: tuple[str, ...] = NAIVE_FIT_FLAGS


def no_postselection_analysis(std_records: Sequence[SurvivalRecord],
                              phased_records: Optional[Sequence[SurvivalRecord]] = None,
                              platform: str = code.LOGICAL, resamples: int = 0,
                              seed: int = 0) -> NoPostselectionResult:
    """Same fits with rejected shots scored as failures.

    This ignores leakage out of the code space and is only a rough
    comparison, hence the caveat flags on the result.
    """
    std = estimate_survival(std_records)
    if phased_records is None:
        fit = fit_decay(std, "reduced_b", raw=True)
        b = c = fit.params["b"]
        flags = NAIVE_FIT_FLAGS + ("c_assumed_equal_b",)
        est = FidelityEstimate.from_params(b, c)
    else:
        fit = fit_standard_phased(std, estimate_survival(phased_records), platform=platform, raw=True)
        flags = NAIVE_FIT_FLAGS
        est = FidelityEstimate.from_params(fit.params["b"], fit.params["c"], stderr=fidelity_stderr(fit))
    if resamples:
        est.ci_low, est.ci_high = bootstrap_ci(std_records, phased_records, resamples, seed,
                                               platform=platform, raw=True)
    return NoPostselectionResult(fit, est, flags)
