"""Derivative-free voltage optimization.

Gaussian-process surrogate (squared-exponential kernel with
per-dimension length scales) plus expected-improvement acquisition
over a box of admissible voltages.  Deterministic under a fixed seed:
Latin-hypercube initialization, candidate sampling, refinement, and
hyperparameter refits all draw from one seeded generator.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize as sp_optimize
from scipy.special import ndtr

from .errors import ConfigError, OptimizerError

__all__ = [
    "BoxDomain",
    "Observation",
    "GpConfig",
    "MinimizeResult",
    "gp_posterior",
    "expected_improvement",
    "minimize",
    "write_history_csv",
]

_NORM_PDF_COEF = 1.0 / np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class BoxDomain:
    """Axis-aligned voltage box, optionally with palindromic tying.

    With ``symmetric_mode`` the first/last and second/fourth
    coordinates are tied, so a 5-d box is searched in 3 reduced
    dimensions while every reported vector stays 5-d palindromic.
    """

    lower: np.ndarray
    upper: np.ndarray
    symmetric_mode: bool = False

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        if lower.shape != upper.shape or lower.ndim != 1:
            raise ConfigError("box bounds must be matching 1-d arrays")
        if not np.all(lower < upper):
            raise ConfigError("box requires lower < upper per dimension")
        if self.symmetric_mode:
            n = lower.shape[0]
            if n != 5:
                raise ConfigError("symmetric mode expects a 5-d voltage box")
            if not (
                np.allclose(lower, lower[::-1]) and np.allclose(upper, upper[::-1])
            ):
                raise ConfigError("symmetric mode requires a palindromic box")

    @property
    def n_dims(self) -> int:
        return self.lower.shape[0]

    @property
    def n_reduced(self) -> int:
        return 3 if self.symmetric_mode else self.n_dims

    def reduced_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        if self.symmetric_mode:
            return self.lower[:3].copy(), self.upper[:3].copy()
        return self.lower.copy(), self.upper.copy()

    def expand(self, reduced: np.ndarray) -> np.ndarray:
        """Map reduced coordinates back to a full voltage vector."""
        reduced = np.asarray(reduced, dtype=float)
        if not self.symmetric_mode:
            return reduced.copy()
        if reduced.ndim == 1:
            return np.array(
                [reduced[0], reduced[1], reduced[2], reduced[1], reduced[0]]
            )
        return np.column_stack(
            [reduced[:, 0], reduced[:, 1], reduced[:, 2], reduced[:, 1], reduced[:, 0]]
        )

    def contains(self, v: np.ndarray, atol: float = 1e-9) -> bool:
        v = np.asarray(v, dtype=float)
        return bool(
            np.all(v >= self.lower - atol) and np.all(v <= self.upper + atol)
        )


@dataclass(frozen=True)
class Observation:
    """One evaluated voltage vector and its loss."""

    v: np.ndarray
    loss: float


@dataclass(frozen=True)
class GpConfig:
    """Surrogate hyperparameters and their refit schedule."""

    lengthscales: np.ndarray | None = None  # per-dimension; None -> 0.3 * box width
    signal_variance: float = 1.0
    prior_mean: float = 0.0
    jitter: float = 1e-8
    refit_every: int = 10
    refit_multistart: int = 4
    seed: int | None = None

    def __post_init__(self):
        if self.jitter <= 0:
            raise ConfigError("jitter must be positive")
        if self.signal_variance <= 0:
            raise ConfigError("signal variance must be positive")
        if self.lengthscales is not None:
            ls = np.asarray(self.lengthscales, dtype=float)
            object.__setattr__(self, "lengthscales", ls)
            if np.any(ls <= 0):
                raise ConfigError("length scales must be positive")


@dataclass(frozen=True)
class MinimizeResult:
    best_v: np.ndarray
    best_loss: float
    history: list[Observation] = field(repr=False)


def _sq_exp_cross(x1: np.ndarray, x2: np.ndarray, ls: np.ndarray, var: float):
    a = x1 / ls
    b = x2 / ls
    d2 = (
        np.sum(a**2, axis=1)[:, None]
        + np.sum(b**2, axis=1)[None, :]
        - 2.0 * a @ b.T
    )
    np.maximum(d2, 0.0, out=d2)
    return var * np.exp(-0.5 * d2)


def gp_posterior(config: GpConfig, x_obs, y_obs, x_query):
    """GP conditional mean and variance at query points.

    ``x_obs`` is (n, d), ``y_obs`` (n,), ``x_query`` (m, d).  With no
    observations the prior (constant mean, kernel variance) is
    returned.  Raises :class:`OptimizerError` when the jittered kernel
    matrix cannot be factorized.
    """
    x_query = np.atleast_2d(np.asarray(x_query, dtype=float))
    m = x_query.shape[0]
    x_obs = np.asarray(x_obs, dtype=float).reshape(-1, x_query.shape[1])
    y_obs = np.asarray(y_obs, dtype=float).ravel()
    if config.lengthscales is None:
        raise ConfigError("gp_posterior needs explicit length scales")
    ls = config.lengthscales
    var = config.signal_variance

    if x_obs.shape[0] == 0:
        return (
            np.full(m, config.prior_mean),
            np.full(m, var),
        )

    k_xx = _sq_exp_cross(x_obs, x_obs, ls, var)
    k_xx[np.diag_indices_from(k_xx)] += config.jitter
    try:
        chol = np.linalg.cholesky(k_xx)
    except np.linalg.LinAlgError as exc:
        raise OptimizerError("kernel factorization failed") from exc
    resid = y_obs - config.prior_mean
    alpha = np.linalg.solve(chol.T, np.linalg.solve(chol, resid))
    k_star = _sq_exp_cross(x_query, x_obs, ls, var)
    mean = config.prior_mean + k_star @ alpha
    w = np.linalg.solve(chol, k_star.T)
    variance = var - np.sum(w**2, axis=0)
    np.maximum(variance, 0.0, out=variance)
    return mean, variance


def expected_improvement(mean, variance, best_so_far):
    """EI for minimization: E[max(best - f, 0)] under the posterior."""
    mean = np.asarray(mean, dtype=float)
    variance = np.asarray(variance, dtype=float)
    if np.any(variance < 0):
        raise ConfigError("variance must be nonnegative")
    sigma = np.sqrt(variance)
    improve = best_so_far - mean
    ei = np.where(improve > 0.0, improve, 0.0).astype(float)
    pos = sigma > 0.0
    if np.any(pos):
        z = improve[pos] / sigma[pos]
        pdf = _NORM_PDF_COEF * np.exp(-0.5 * z**2)
        ei_pos = improve[pos] * ndtr(z) + sigma[pos] * pdf
        ei = ei.copy()
        ei[pos] = ei_pos
    return ei if ei.ndim else float(ei)


def _latin_hypercube(rng: np.random.Generator, n: int, lo, hi) -> np.ndarray:
    d = lo.shape[0]
    u = (rng.random((n, d)) + np.stack([rng.permutation(n) for _ in range(d)], axis=1)) / n
    return lo + u * (hi - lo)


class _GpFit:
    """Cholesky-cached GP on standardized losses."""

    def __init__(self, cfg: GpConfig, x: np.ndarray, z: np.ndarray):
        self.cfg = cfg
        self.x = x
        self.z = z
        k = _sq_exp_cross(x, x, cfg.lengthscales, cfg.signal_variance)
        # Near-duplicate observations (warm starts, exploitation steps
        # revisiting the incumbent) can push the kernel matrix to the
        # edge of positive definiteness; escalate the diagonal until it
        # factors rather than abort the whole search.
        jitter, added = cfg.jitter, 0.0
        self.chol = None
        for _ in range(9):
            k[np.diag_indices_from(k)] += jitter - added
            added = jitter
            try:
                self.chol = np.linalg.cholesky(k)
                break
            except np.linalg.LinAlgError:
                jitter *= 10.0
        if self.chol is None:
            raise OptimizerError("kernel factorization failed")
        resid = z - cfg.prior_mean
        self.alpha = np.linalg.solve(self.chol.T, np.linalg.solve(self.chol, resid))

    def posterior(self, q: np.ndarray):
        k_star = _sq_exp_cross(q, self.x, self.cfg.lengthscales, self.cfg.signal_variance)
        mean = self.cfg.prior_mean + k_star @ self.alpha
        w = np.linalg.solve(self.chol, k_star.T)
        variance = self.cfg.signal_variance - np.sum(w**2, axis=0)
        np.maximum(variance, 0.0, out=variance)
        return mean, variance


def _nll_and_grad(theta, x, z, jitter):
    """Negative log marginal likelihood over log-params (ls..., var)."""
    n, d = x.shape
    ls = np.exp(theta[:d])
    var = np.exp(theta[d])
    e = _sq_exp_cross(x, x, ls, 1.0)
    k = var * e
    k[np.diag_indices_from(k)] += jitter
    try:
        chol = np.linalg.cholesky(k)
    except np.linalg.LinAlgError:
        return 1e12, np.zeros_like(theta)
    alpha = np.linalg.solve(chol.T, np.linalg.solve(chol, z))
    nll = (
        0.5 * z @ alpha
        + np.sum(np.log(np.diag(chol)))
        + 0.5 * n * np.log(2.0 * np.pi)
    )
    kinv = np.linalg.solve(chol.T, np.linalg.solve(chol, np.eye(n)))
    w = kinv - np.outer(alpha, alpha)
    grad = np.empty(d + 1)
    ke = var * e
    for j in range(d):
        diff = (x[:, j][:, None] - x[:, j][None, :]) / ls[j]
        grad[j] = 0.5 * np.sum(w * (ke * diff**2))
    grad[d] = 0.5 * np.sum(w * ke)
    return nll, grad


def _refit_hyperparams(cfg, x, z, widths, rng):
    d = x.shape[1]
    theta0 = np.concatenate([np.log(cfg.lengthscales), [np.log(cfg.signal_variance)]])
    bounds = [(np.log(0.01 * w), np.log(10.0 * w)) for w in widths]
    bounds.append((np.log(1e-3), np.log(1e3)))
    starts = [theta0]
    for _ in range(cfg.refit_multistart - 1):
        starts.append(theta0 + rng.normal(0.0, 0.5, size=d + 1))
    best = None
    for s in starts:
        s = np.clip(s, [b[0] for b in bounds], [b[1] for b in bounds])
        res = sp_optimize.minimize(
            _nll_and_grad,
            s,
            args=(x, z, cfg.jitter),
            jac=True,
            method="L-BFGS-B",
            bounds=bounds,
            options={"maxiter": 25},
        )
        if best is None or res.fun < best.fun:
            best = res
    ls = np.exp(best.x[:d])
    var = float(np.exp(best.x[d]))
    return replace(cfg, lengthscales=ls, signal_variance=var)


def _standardize(losses: np.ndarray):
    """Z-score of log-warped losses.

    Tracking losses are heavy-tailed — a handful of wild shapes or
    penalty-plateau hits sit orders of magnitude above the basin of
    interest, and a plain z-score lets them compress the basin into an
    unresolvable sliver.  Warping through log(loss − min + s), with s
    the lower-quartile gap above the incumbent, expands resolution
    where the minimum lives and bounds the outliers' leverage; the
    z-score then fixes the GP's working scale.
    """
    shifted = losses - losses.min()
    s = float(np.percentile(shifted, 25.0))
    if s <= 0.0:
        positive = shifted[shifted > 0.0]
        s = float(positive.min()) if positive.size else 1.0
    g = np.log(shifted + s)
    mu = float(np.mean(g))
    sd = float(np.std(g))
    if sd < 1e-12:
        sd = 1.0
    return (g - mu) / sd


def minimize(
    loss,
    domain: BoxDomain,
    budget: int,
    seed: int,
    init_samples: int = 10,
    gp_config: GpConfig | None = None,
    n_candidates: int = 1024,
    extra_inits: list[np.ndarray] | None = None,
) -> MinimizeResult:
    """Minimize a black-box loss over the box with GP + EI.

    Runs ``init_samples`` Latin-hypercube evaluations, then expected-
    improvement steps to ``budget``.  The acquisition is maximized over
    1024 random candidates followed by local coordinate refinement of
    the best 4.  Losses are z-scored before each GP fit; length scales
    and signal variance are refit by maximum likelihood every
    ``refit_every`` evaluations with multi-start L-BFGS-B.  The whole
    run is a deterministic function of (loss, domain, budget, seed).

    ``extra_inits`` are caller-supplied full voltage vectors (warm
    starts) evaluated right after the space-filling phase, clipped
    into the box and counted against the budget.
    """
    extra_inits = extra_inits or []
    if budget < init_samples + len(extra_inits):
        raise ConfigError("budget must cover the initial samples")
    rng = np.random.default_rng(seed)
    lo, hi = domain.reduced_bounds()
    widths = hi - lo
    d = lo.shape[0]

    cfg = gp_config or GpConfig()
    if cfg.lengthscales is None:
        cfg = replace(cfg, lengthscales=0.3 * widths)
    refit_rng = (
        np.random.default_rng(cfg.seed) if cfg.seed is not None else rng
    )

    x_red = np.empty((budget, d))
    raw = np.empty(budget)
    fit_vals = np.empty(budget)
    history: list[Observation] = []
    n_bad = 0
    n_eval = 0

    def evaluate(point: np.ndarray):
        nonlocal n_bad, n_eval
        v_full = domain.expand(point)
        val = float(loss(v_full))
        x_red[n_eval] = point
        raw[n_eval] = val
        if np.isfinite(val):
            fit_vals[n_eval] = val
        else:
            n_bad += 1
            finite = raw[:n_eval][np.isfinite(raw[:n_eval])]
            fit_vals[n_eval] = finite.max() if finite.size else 0.0
        history.append(Observation(v=v_full, loss=val))
        n_eval += 1
        if n_bad > budget // 2:
            raise OptimizerError(
                "loss returned non-finite values at more than half the evaluations"
            )

    for p in _latin_hypercube(rng, init_samples, lo, hi):
        evaluate(p)
    for warm in extra_inits:
        warm = np.asarray(warm, dtype=float)
        if domain.symmetric_mode:
            warm = np.array(
                [
                    0.5 * (warm[0] + warm[4]),
                    0.5 * (warm[1] + warm[3]),
                    warm[2],
                ]
            )
        evaluate(np.clip(warm, lo, hi))

    fit = None
    while n_eval < budget:
        if fit is None or n_eval % cfg.refit_every == 0:
            z = _standardize(fit_vals[:n_eval])
            if n_eval % cfg.refit_every == 0:
                cfg = _refit_hyperparams(cfg, x_red[:n_eval], z, widths, refit_rng)
            fit = _GpFit(cfg, x_red[:n_eval].copy(), z)
        best_z = fit.z.min()

        # Uniform candidates cover the box; two Gaussian clouds around
        # the incumbent (5% and 1% of each width) keep exploitation
        # represented, which uniform sampling alone cannot do once the
        # box is wide relative to the basin of the optimum.
        cand = lo + rng.random((n_candidates, d)) * widths
        inc = fit.x[int(np.argmin(fit.z))]
        n_local = max(1, n_candidates // 4)
        local = np.vstack(
            [
                inc + rng.standard_normal((n_local, d)) * (0.05 * widths),
                inc + rng.standard_normal((n_local, d)) * (0.01 * widths),
            ]
        )
        # Reflect at the box faces rather than clip: clipping piles
        # samples onto the face exactly, and a degenerate coordinate
        # column blinds the lengthscale fit to moves off that face.
        local = np.where(local > hi, 2.0 * hi - local, local)
        local = np.where(local < lo, 2.0 * lo - local, local)
        np.clip(local, lo, hi, out=local)
        cand = np.vstack([cand, local])

        # Every fourth acquisition is a pure-exploitation step on the
        # posterior mean; EI alone keeps paying for exploration in the
        # endgame and stalls short of the basin floor.
        greedy = (n_eval % 4) == 3

        def score_points(points):
            m, s2 = fit.posterior(points)
            if greedy:
                return -m
            return expected_improvement(m, s2, best_z)

        sc = score_points(cand)
        order = np.argsort(sc)[::-1]
        pool = cand[order[:4]].copy()
        pool_sc = sc[order[:4]].copy()
        for frac in (0.02, 0.005):
            for j in range(d):
                probes = []
                for delta in (-frac * widths[j], frac * widths[j]):
                    moved = pool.copy()
                    moved[:, j] = np.clip(moved[:, j] + delta, lo[j], hi[j])
                    probes.append(moved)
                s2 = score_points(np.vstack(probes))
                for b, idx in enumerate(np.argmax([pool_sc, s2[:4], s2[4:]], axis=0)):
                    if idx == 1:
                        pool[b] = probes[0][b]
                        pool_sc[b] = s2[b]
                    elif idx == 2:
                        pool[b] = probes[1][b]
                        pool_sc[b] = s2[4 + b]
        k = int(np.argmax(pool_sc))
        if greedy or pool_sc[k] > 0.0:
            nxt = pool[k]
        else:
            nxt = lo + rng.random(d) * widths
        evaluate(nxt)
        fit = None if n_eval % cfg.refit_every == 0 else fit
        if fit is not None:
            z = _standardize(fit_vals[:n_eval])
            fit = _GpFit(cfg, x_red[:n_eval].copy(), z)

    finite_mask = np.isfinite(raw[:n_eval])
    if not np.any(finite_mask):
        raise OptimizerError("no finite loss values observed")
    idx = np.flatnonzero(finite_mask)[np.argmin(raw[finite_mask])]
    return MinimizeResult(
        best_v=domain.expand(x_red[idx]),
        best_loss=float(raw[idx]),
        history=history,
    )


def write_history_csv(path, history: list[Observation]) -> None:
    """Serialize an evaluation history as eval_index,v1..v5,loss."""
    if not history:
        raise ConfigError("empty history")
    n_dims = history[0].v.shape[0]
    header = ["eval_index"] + [f"v{i + 1}" for i in range(n_dims)] + ["loss"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i, obs in enumerate(history):
            row = [str(i)] + [f"{x:.10g}" for x in obs.v] + [f"{obs.loss:.10g}"]
            writer.writerow(row)
