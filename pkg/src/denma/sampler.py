"""Adaptive random-walk Metropolis-within-Gibbs over a model's block structure.

The driver is generic: a model exposes ``layout`` (parameter names),
``log_posterior(theta)``, ``initial_state(rng, chain)``, plus two kinds of
update blocks:

* ``grouped_blocks()`` — batched sweeps over conditionally independent groups
  (one proposal scale per group, adapted from per-group acceptance);
* ``metropolis_blocks()`` — generic blocks updated by full log-posterior
  recomputation.  Blocks with ``positive_bounded`` set hold heterogeneity
  standard deviations: they are proposed on the log scale with the Jacobian
  correction and reflected below the log of the uniform prior's upper bound,
  so proposals never leave the support.

Proposal scales follow Robbins-Monro (gain (t+1)^-0.6, capped) toward 0.44
for scalar blocks and 0.234 for vector blocks, during burn-in only; they are
frozen at the burn-in boundary so retained draws target the exact posterior.

Chains use Philox substreams spawned from one seed: runs are bit-identical
for a given (model, config, backend) on one platform.  Chains share no
mutable state and are merged by chain index, so running them in separate
processes would give identical output; this driver executes them in order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InitializationFailure

_INIT_RETRIES = 50


@dataclass(frozen=True)
class SamplerConfig:
    chains: int = 3
    iterations: int = 10_000
    burn_in: int = 4_000
    thinning: int = 1
    seed: int = 0
    adapt_iterations: int | None = None  # defaults to burn_in
    target_scalar: float = 0.44
    target_vector: float = 0.234

    def __post_init__(self):
        if self.chains < 1:
            raise ValueError("need at least one chain")
        if not (0 <= self.burn_in < self.iterations):
            raise ValueError("burn_in must satisfy 0 <= burn_in < iterations")
        if self.thinning < 1:
            raise ValueError("thinning must be >= 1")
        if (self.iterations - self.burn_in) % self.thinning != 0:
            raise ValueError("(iterations - burn_in) must be a multiple of thinning")

    @property
    def retained_per_chain(self) -> int:
        return (self.iterations - self.burn_in) // self.thinning

    def to_dict(self) -> dict:
        return {
            "chains": self.chains,
            "iterations": self.iterations,
            "burn_in": self.burn_in,
            "thinning": self.thinning,
            "seed": self.seed,
            "adapt_iterations": self.adapt_iterations,
            "target_scalar": self.target_scalar,
            "target_vector": self.target_vector,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SamplerConfig":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


@dataclass
class MetropolisBlock:
    """A jointly proposed set of parameter indices.

    ``base_scale`` fixes relative step sizes across components (spline
    coefficients need steps inversely proportional to their design columns);
    a single adapted log-scale multiplies the whole block.
    """

    name: str
    idx: np.ndarray
    base_scale: np.ndarray
    target: float
    init_scale: float = 1.0
    positive_bounded: float | None = None


class GroupedBlock:
    """Batched update over conditionally independent groups."""

    def __init__(self, name: str, labels: tuple, target, init_scale: float):
        self.name = name
        self.labels = labels
        self.n_groups = len(labels)
        self.target = np.broadcast_to(np.asarray(target, dtype=float), (self.n_groups,))
        self.init_scale = init_scale

    def step(self, theta, lp, scales, rng):  # pragma: no cover - interface
        raise NotImplementedError


@dataclass
class PosteriorDraws:
    """Retained multi-chain sample plus the bookkeeping to re-analyse it."""

    chains: tuple  # per-chain (rows, n_params) arrays
    names: tuple
    log_posts: tuple  # per-chain (rows,) log-posterior values
    acceptance: dict
    seed: int
    config: SamplerConfig = field(repr=False)

    @property
    def n_chains(self) -> int:
        return len(self.chains)

    @property
    def n_retained(self) -> int:
        return sum(c.shape[0] for c in self.chains)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"no parameter named {name!r}") from None

    def matrix(self) -> np.ndarray:
        """All retained draws pooled across chains (chain-major)."""
        return np.vstack(self.chains)

    def per_chain(self, name: str) -> np.ndarray:
        """(n_chains, rows) draws of one parameter."""
        j = self.index(name)
        return np.stack([c[:, j] for c in self.chains])

    def pooled(self, name: str) -> np.ndarray:
        j = self.index(name)
        return np.concatenate([c[:, j] for c in self.chains])

    def credible_interval(self, name: str, level: float = 0.95):
        x = self.pooled(name)
        a = (1.0 - level) / 2.0
        return (
            float(np.quantile(x, 0.5)),
            float(np.quantile(x, a)),
            float(np.quantile(x, 1.0 - a)),
        )


def _generic_step(model, theta, lp, block, scale, rng):
    idx = block.idx
    z = rng.standard_normal(len(idx))
    step = scale * block.base_scale * z
    proposal = theta.copy()
    if block.positive_bounded is not None:
        ub = math.log(block.positive_bounded)
        y = np.log(theta[idx])
        y_star = y + step
        # reflect at the upper bound; the lower bound is -inf on the log scale
        for _ in range(64):
            over = y_star > ub
            if not np.any(over):
                break
            y_star[over] = 2.0 * ub - y_star[over]
        proposal[idx] = np.exp(y_star)
        log_jac = float(np.sum(y_star - y))
    else:
        proposal[idx] = theta[idx] + step
        log_jac = 0.0
    lp_star = model.log_posterior(proposal)
    log_alpha = lp_star - lp + log_jac
    prob = math.exp(min(log_alpha, 0.0)) if np.isfinite(log_alpha) else 0.0
    if rng.random() < prob:
        theta[:] = proposal
        return lp_star, prob
    return lp, prob


def _gain(t: int) -> float:
    return min(0.25, (t + 1.0) ** -0.6)


def _run_chain(model, config: SamplerConfig, chain: int, seed_seq):
    rng = np.random.Generator(np.random.Philox(seed_seq))
    theta = None
    for _ in range(_INIT_RETRIES):
        candidate = model.initial_state(rng, chain)
        lp = model.log_posterior(candidate)
        if np.isfinite(lp):
            theta = candidate
            break
    if theta is None:
        raise InitializationFailure(chain, _INIT_RETRIES)

    grouped = model.grouped_blocks()
    blocks = model.metropolis_blocks()
    g_log_scales = {gb.name: np.full(gb.n_groups, math.log(gb.init_scale)) for gb in grouped}
    b_log_scales = {b.name: math.log(b.init_scale) for b in blocks}
    adapt_end = config.adapt_iterations if config.adapt_iterations is not None else config.burn_in

    rows = config.retained_per_chain
    draws = np.empty((rows, model.layout.n_params))
    lps = np.empty(rows)
    acc_sum: dict[str, float] = {}
    acc_cnt: dict[str, int] = {}
    row = 0
    for it in range(config.iterations):
        lp = model.log_posterior(theta)  # refresh; avoids float drift in deltas
        adapting = it < adapt_end
        for gb in grouped:
            ls = g_log_scales[gb.name]
            lp, probs = gb.step(theta, lp, np.exp(ls), rng)
            if adapting:
                np.clip(ls + _gain(it) * (probs - gb.target), -15.0, 6.0, out=ls)
            else:
                for label, p in zip(gb.labels, probs):
                    acc_sum[label] = acc_sum.get(label, 0.0) + p
                    acc_cnt[label] = acc_cnt.get(label, 0) + 1
        for b in blocks:
            lp, prob = _generic_step(model, theta, lp, b, math.exp(b_log_scales[b.name]), rng)
            if adapting:
                b_log_scales[b.name] = float(
                    np.clip(b_log_scales[b.name] + _gain(it) * (prob - b.target), -15.0, 6.0)
                )
            else:
                acc_sum[b.name] = acc_sum.get(b.name, 0.0) + prob
                acc_cnt[b.name] = acc_cnt.get(b.name, 0) + 1
        if it >= config.burn_in and (it - config.burn_in) % config.thinning == 0:
            draws[row] = theta
            lps[row] = lp
            row += 1
    acceptance = {k: acc_sum[k] / acc_cnt[k] for k in acc_sum}
    return draws, lps, acceptance


def run(model, config: SamplerConfig | None = None) -> PosteriorDraws:
    """Draw from the model's posterior; deterministic given ``config.seed``."""
    config = config or SamplerConfig()
    children = np.random.SeedSequence(config.seed).spawn(config.chains)
    chains, lps, accs = [], [], []
    for c in range(config.chains):
        d, l, a = _run_chain(model, config, c, children[c])
        chains.append(d)
        lps.append(l)
        accs.append(a)
    acceptance = {}
    for key in accs[0]:
        acceptance[key] = float(np.mean([a[key] for a in accs]))
    return PosteriorDraws(
        chains=tuple(chains),
        names=tuple(model.layout.names),
        log_posts=tuple(lps),
        acceptance=acceptance,
        seed=config.seed,
        config=config,
    )
