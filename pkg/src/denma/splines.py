"""Restricted cubic spline basis and data-driven knot placement.

The dose-effect function is F(x) = c1*x + c2*f2(x) + ... + c_{K-1}*f_{K-1}(x)
on a strictly increasing knot vector t1 < ... < tK (K >= 3).  Each f_{m+1} is
a truncated-power cubic constrained to be linear below t1 and above tK, so the
basis vector at dose x is (x, f2(x), ..., f_{K-1}(x)) and F(0) = 0 whenever
all knots are positive: dose zero always maps to zero effect.

Everything here is a pure function of its arguments and safe to share across
threads/processes.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import MissingKnots, TooFewDistinctDoses

DEFAULT_PERCENTILES = (0.25, 0.50, 0.75)
SENSITIVITY_PERCENTILES = (0.10, 0.20, 0.30)


@dataclass(frozen=True)
class KnotSet:
    """Knot locations for one agent (or pooling group of agents)."""

    agent_id: str
    knots: tuple[float, ...]

    def __post_init__(self):
        if len(self.knots) < 3:
            raise ValueError(f"{self.agent_id}: need at least 3 knots, got {len(self.knots)}")
        ks = np.asarray(self.knots, dtype=float)
        if not np.all(np.diff(ks) > 0):
            raise ValueError(f"{self.agent_id}: knots must be strictly increasing: {self.knots}")
        if not np.all(np.isfinite(ks)):
            raise ValueError(f"{self.agent_id}: knots must be finite")

    @property
    def n_coefs(self) -> int:
        """Dimension of the basis (number of free shape coefficients)."""
        return len(self.knots) - 1


@dataclass(frozen=True)
class SplineDesign:
    """Per-arm basis rows for a dataset, in dataset arm order."""

    matrix: np.ndarray  # (n_arms, n_coefs)
    knots_by_agent: dict = field(repr=False)

    @property
    def n_coefs(self) -> int:
        return self.matrix.shape[1]


def place_knots(doses, percentiles=DEFAULT_PERCENTILES, agent_id="") -> KnotSet:
    """Place knots at empirical percentiles of the observed arm-dose multiset.

    Uses linear interpolation between order statistics (the "type 7"
    convention) on the multiset, duplicates kept.  If quantiles of a heavily
    tied multiset collide, the collided knots are nudged apart by the smallest
    gap that restores strict ordering (a millionth of the dose span), clipped
    to the observed range, with a warning.

    Raises TooFewDistinctDoses when fewer than 3 distinct doses are observed.
    """
    doses = np.asarray(sorted(doses), dtype=float)
    ps = np.asarray(percentiles, dtype=float)
    if len(ps) < 3:
        raise ValueError("need at least 3 percentiles (3 knots)")
    if not np.all(np.diff(ps) > 0) or ps[0] <= 0 or ps[-1] >= 1:
        raise ValueError(f"percentiles must be strictly increasing within (0,1): {percentiles}")
    n_distinct = len(np.unique(doses))
    if n_distinct < 3:
        raise TooFewDistinctDoses(agent_id, n_distinct)

    knots = np.quantile(doses, ps)  # numpy default = linear interpolation (type 7)
    if np.any(np.diff(knots) <= 0):
        lo, hi = doses[0], doses[-1]
        eps = (hi - lo) * 1e-6
        fixed = knots.copy()
        for j in range(1, len(fixed)):
            if fixed[j] <= fixed[j - 1]:
                fixed[j] = fixed[j - 1] + eps
        # keep within the observed range; push down from the top if needed
        if fixed[-1] > hi:
            fixed[-1] = hi
            for j in range(len(fixed) - 2, -1, -1):
                if fixed[j] >= fixed[j + 1]:
                    fixed[j] = fixed[j + 1] - eps
        warnings.warn(
            f"knot collision for {agent_id or 'agent'} at percentiles {tuple(ps)}; "
            f"nudged {tuple(knots)} -> {tuple(fixed)}",
            stacklevel=2,
        )
        knots = fixed
    return KnotSet(agent_id=agent_id, knots=tuple(float(k) for k in knots))


def rcs_basis(x, knots) -> np.ndarray:
    """Evaluate the restricted-cubic-spline basis at dose(s) ``x``.

    Returns shape (n_coefs,) for scalar input, else (len(x), n_coefs).
    Column 0 is the dose itself; column m is f_{m+1}(x), the truncated-power
    combination that is identically zero below t1 and linear above tK.
    """
    ks = np.asarray(knots.knots if isinstance(knots, KnotSet) else knots, dtype=float)
    xs = np.asarray(x, dtype=float)
    scalar = xs.ndim == 0
    xs = np.atleast_1d(xs)
    K = len(ks)
    out = np.empty((len(xs), K - 1), dtype=float)
    out[:, 0] = xs
    t_last, t_pen = ks[-1], ks[-2]
    denom = t_last - t_pen
    cube_pen = np.maximum(xs - t_pen, 0.0) ** 3
    cube_last = np.maximum(xs - t_last, 0.0) ** 3
    for m in range(1, K - 1):
        t_m = ks[m - 1]
        out[:, m] = (
            np.maximum(xs - t_m, 0.0) ** 3
            - ((t_last - t_m) / denom) * cube_pen
            + ((t_pen - t_m) / denom) * cube_last
        )
    return out[0] if scalar else out


def dose_effect(x, knots, coefs) -> np.ndarray | float:
    """F(x) = sum_p coefs[p] * basis_p(x); zero at x = 0 for positive knots."""
    basis = rcs_basis(x, knots)
    return basis @ np.asarray(coefs, dtype=float)


def build_design(dataset, knots_by_agent) -> SplineDesign:
    """Basis rows for every arm of ``dataset``, placebo arms as zero rows.

    ``knots_by_agent`` maps agent id -> KnotSet; agents may share one KnotSet
    object (class or fully pooled models).  All knot sets must have the same
    number of knots so coefficients share a dimension.
    """
    dims = {ks.n_coefs for ks in knots_by_agent.values()}
    if len(dims) > 1:
        raise ValueError(f"knot sets disagree on basis dimension: {sorted(dims)}")
    n_coefs = dims.pop() if dims else 2
    rows = []
    for study in dataset.studies:
        for arm in study.arms:
            if arm.is_placebo:
                rows.append(np.zeros(n_coefs))
                continue
            if arm.agent_id not in knots_by_agent:
                raise MissingKnots(arm.agent_id)
            rows.append(rcs_basis(arm.dose, knots_by_agent[arm.agent_id]))
    matrix = np.vstack(rows) if rows else np.zeros((0, n_coefs))
    if not np.all(np.isfinite(matrix)):
        raise ValueError("non-finite basis value; check knots and doses")
    return SplineDesign(matrix=matrix, knots_by_agent=dict(knots_by_agent))


def export_knots(knots_by_agent, path) -> None:
    """Write knot placements as delimited text ``agent, t1, t2, ...`` for audit."""
    with open(path, "w", encoding="utf-8") as fh:
        n = max(ks.n_coefs + 1 for ks in knots_by_agent.values())
        fh.write("agent," + ",".join(f"t{i+1}" for i in range(n)) + "\n")
        for agent in sorted(knots_by_agent):
            ks = knots_by_agent[agent]
            fh.write(agent + "," + ",".join(repr(t) for t in ks.knots) + "\n")
