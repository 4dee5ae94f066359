"""Pure-numpy implementations of the hot numerical kernels.

`denma._backend` prefers the compiled extension (`denma._kernels`) and falls
back to this module.  Both backends implement the same signatures and the
same arithmetic; they may differ in floating-point reduction order, so runs
are bit-reproducible per backend, not across backends.

Conventions shared by both backends:

* ``eta`` is the linear predictor on the logit scale, clamped to +/-35 before
  any use so probabilities never reach exactly 0 or 1.
* arm arrays are study-major and contiguous per study, so per-study sums use
  ``arm_start`` offsets; the trailing segment runs to the end of the array.
* the compound-symmetric multivariate normal over a study's relative effects
  has variance tau^2 and covariance tau^2/2.
"""

import numpy as np

BACKEND_NAME = "python"

ETA_CLAMP = 35.0
_LOG_2PI = float(np.log(2.0 * np.pi))


def binom_loglik(r, n, logc, eta):
    """Per-arm binomial log-pmf at logit-scale predictors (full density)."""
    eta = np.clip(eta, -ETA_CLAMP, ETA_CLAMP)
    return r * eta - n * np.logaddexp(0.0, eta) + logc


def binom_loglik_sum(r, n, logc, eta):
    eta = np.clip(eta, -ETA_CLAMP, ETA_CLAMP)
    return float(np.sum(r * eta - n * np.logaddexp(0.0, eta) + logc))


def expit_clamped(eta):
    """expit with the +/-35 clamp; never exactly 0 or 1."""
    eta = np.clip(eta, -ETA_CLAMP, ETA_CLAMP)
    out = np.empty_like(eta, dtype=float)
    pos = eta >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    ex = np.exp(eta[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def delta_means(X, XR, source, amap, rmap):
    """Dose-effect means per non-reference arm.

    ``source`` is the (rows+1, P) matrix of effective shape coefficients with
    a trailing all-zero row; ``amap``/``rmap`` index the arm's own row and its
    study reference's row (the zero row when the reference is placebo).
    """
    own = np.sum(X * source[amap], axis=1)
    ref = np.sum(XR * source[rmap], axis=1)
    return own - ref


def cs_mvn_terms(e, d_start, d_count, tau):
    """Per-study log-density of residuals under the compound-symmetric MVN."""
    if e.size == 0:
        return np.zeros(len(d_start))
    m = d_count.astype(float)
    se = np.add.reduceat(e, d_start)
    se2 = np.add.reduceat(e * e, d_start)
    q = se2 - se * se / (m + 1.0)
    t2 = tau * tau
    return -0.5 * m * _LOG_2PI - 0.5 * (m * np.log(t2 / 2.0) + np.log1p(m)) - q / t2


def cs_mvn_sum(e, d_start, d_count, tau):
    return float(np.sum(cs_mvn_terms(e, d_start, d_count, tau)))


def normal_terms(x, mean, var):
    return -0.5 * (_LOG_2PI + np.log(var)) - (x - mean) ** 2 / (2.0 * var)


def study_sweep(
    u,
    delta,
    dmean,
    off,
    r,
    n,
    logc,
    arm_study,
    arm_start,
    arm_dpos,
    d_study,
    d_start,
    d_count,
    tau,
    u_mean,
    u_var,
    scales,
    z_u,
    z_d,
    unif,
    accept_prob,
):
    """One batched Metropolis update of every study's local block.

    Each study's block is (baseline, its relative effects); the blocks are
    conditionally independent given the global parameters, so all studies are
    proposed and accepted/rejected simultaneously.  ``u`` and ``delta`` are
    mutated in place; returns the summed log-posterior change.
    """
    has_d = delta.size > 0
    u_prop = u + scales * z_u

    eta_cur = u[arm_study] + off
    eta_prop = u_prop[arm_study] + off
    if has_d:
        d_prop = delta + scales[d_study] * z_d
        live = arm_dpos >= 0
        pos = arm_dpos[live]
        eta_cur[live] += delta[pos]
        eta_prop[live] += d_prop[pos]

    ll_cur = np.add.reduceat(binom_loglik(r, n, logc, eta_cur), arm_start)
    ll_prop = np.add.reduceat(binom_loglik(r, n, logc, eta_prop), arm_start)

    term_cur = ll_cur + normal_terms(u, u_mean, u_var)
    term_prop = ll_prop + normal_terms(u_prop, u_mean, u_var)
    if has_d:
        term_cur += cs_mvn_terms(delta - dmean, d_start, d_count, tau)
        term_prop += cs_mvn_terms(d_prop - dmean, d_start, d_count, tau)

    log_alpha = term_prop - term_cur
    np.minimum(np.exp(np.minimum(log_alpha, 0.0)), 1.0, out=accept_prob)
    accept = unif < accept_prob
    u[accept] = u_prop[accept]
    if has_d:
        d_accept = accept[d_study]
        delta[d_accept] = d_prop[d_accept]
    return float(np.sum(log_alpha[accept]))


def scalar_conditional_sweep(
    q, r, n, logc, mean, var, scales, z, unif, accept_prob
):
    """Batched update of independent scalar logits with binomial likelihoods
    and a shared normal prior (the placebo-response latent layer)."""
    q_prop = q + scales * z
    term_cur = binom_loglik(r, n, logc, q) + normal_terms(q, mean, var)
    term_prop = binom_loglik(r, n, logc, q_prop) + normal_terms(q_prop, mean, var)
    log_alpha = term_prop - term_cur
    np.minimum(np.exp(np.minimum(log_alpha, 0.0)), 1.0, out=accept_prob)
    accept = unif < accept_prob
    q[accept] = q_prop[accept]
    return float(np.sum(log_alpha[accept]))
