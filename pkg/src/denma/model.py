"""Model assembly: the assumption lattice, parameter layout and log-posterior.

A model configuration chooses, independently:

* how relative effects pool across studies (``delta_pooling``:
  exchangeable around the dose-effect mean with heterogeneity tau, or common);
* how shape coefficients pool across studies (``study_shape_pooling``:
  common, or exchangeable with heterogeneity sigma_study);
* how shape coefficients pool across agents (``agent_shape_pooling``:
  independent, exchangeable, common, class_exchangeable or class_common);
* an optional study-covariate interaction with the dose (linear or spline
  form, with its own pooling across studies and across agents).

The named presets M1-M5 cover the standard configurations: M1 is the plain
dose-effect NMA (exchangeable effects, common shapes per agent), M2-M4 add a
common linear dose-covariate interaction (risk of bias, publication year
centred at 2010, and the variance of the log odds ratio), and M5 pools shapes
within pharmacological classes on a harmonized dose scale.

Within a study the reference arm's predictor is the study baseline; every
other arm adds its relative effect, which under common pooling is the
difference of dose-effect curves between the arm's agent and the study's
reference agent (zero for a placebo reference).  Multi-arm studies share the
baseline, and their relative effects are jointly normal with compound
symmetry (variance tau^2, covariance tau^2/2).

``DoseEffectModel.log_posterior`` is a pure function of the parameter vector
against immutable preprocessed arrays; concurrent evaluation is safe.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import gammaln

from . import sampler as _sampler
from ._backend import kernels
from .data import (
    PLACEBO,
    Dataset,
    EquivalenceTable,
    center_covariate,
    harmonize_doses,
    select_reference_arm,
    validate_network,
)
from .errors import (
    DimensionMismatch,
    DisconnectedNetwork,
    SpecDatasetMismatch,
)
from .splines import KnotSet, place_knots, rcs_basis

DELTA_POOLINGS = ("exchangeable", "common")
STUDY_SHAPE_POOLINGS = ("common", "exchangeable")
AGENT_SHAPE_POOLINGS = (
    "independent",
    "exchangeable",
    "common",
    "class_exchangeable",
    "class_common",
)
INTER_AGENT_POOLINGS = ("independent", "exchangeable", "common")
INTER_STUDY_POOLINGS = ("common", "exchangeable")
_CLASS_POOLINGS = ("class_exchangeable", "class_common")
_POOLED = "pooled"


@dataclass(frozen=True)
class PriorSet:
    """Normal (mean, variance) and uniform upper-bound hyperparameters.

    Defaults are the minimally informative choices: N(0, 1000) for location
    parameters and Unif(0, 5) for every heterogeneity standard deviation.
    """

    baseline_mean: float = 0.0
    baseline_var: float = 1000.0
    coef_mean: float = 0.0
    coef_var: float = 1000.0
    pool_mean: float = 0.0
    pool_var: float = 1000.0
    interaction_mean: float = 0.0
    interaction_var: float = 1000.0
    placebo_mean: float = 0.0
    placebo_var: float = 1000.0
    tau_bound: float = 5.0
    sigma_study_bound: float = 5.0
    sigma_agent_bound: float = 5.0
    sigma_placebo_bound: float = 5.0
    tau_inter_study_bound: float = 5.0
    tau_inter_agent_bound: float = 5.0

    def __post_init__(self):
        for name in ("baseline_var", "coef_var", "pool_var", "interaction_var", "placebo_var"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        for name in (
            "tau_bound",
            "sigma_study_bound",
            "sigma_agent_bound",
            "sigma_placebo_bound",
            "tau_inter_study_bound",
            "tau_inter_agent_bound",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")


@dataclass(frozen=True)
class CovariateSpec:
    """Dose-covariate interaction: which covariate, its centring value, the
    functional form of the interaction and how it pools."""

    name: str
    center: float = 0.0
    form: str = "linear"  # "linear" or "rcs"
    agent_pooling: str = "common"
    study_pooling: str = "common"

    def __post_init__(self):
        if self.form not in ("linear", "rcs"):
            raise ValueError(f"unknown interaction form {self.form!r}")
        if self.agent_pooling not in INTER_AGENT_POOLINGS:
            raise ValueError(f"unknown interaction agent pooling {self.agent_pooling!r}")
        if self.study_pooling not in INTER_STUDY_POOLINGS:
            raise ValueError(f"unknown interaction study pooling {self.study_pooling!r}")


@dataclass(frozen=True)
class ModelSpec:
    delta_pooling: str = "exchangeable"
    study_shape_pooling: str = "common"
    agent_shape_pooling: str = "independent"
    shared_sigma_study: bool = True
    shared_sigma_agent: bool = True
    covariate: CovariateSpec | None = None
    class_map: dict | None = None
    priors: PriorSet = field(default_factory=PriorSet)
    knot_percentiles: tuple = (0.25, 0.50, 0.75)
    sampler: "_sampler.SamplerConfig" = field(default_factory=lambda: _sampler.SamplerConfig())

    def __post_init__(self):
        if self.delta_pooling not in DELTA_POOLINGS:
            raise ValueError(f"unknown delta pooling {self.delta_pooling!r}")
        if self.study_shape_pooling not in STUDY_SHAPE_POOLINGS:
            raise ValueError(f"unknown study shape pooling {self.study_shape_pooling!r}")
        if self.agent_shape_pooling not in AGENT_SHAPE_POOLINGS:
            raise ValueError(f"unknown agent shape pooling {self.agent_shape_pooling!r}")
        if self.agent_shape_pooling in _CLASS_POOLINGS and not self.class_map:
            raise SpecDatasetMismatch(
                f"{self.agent_shape_pooling} pooling requires a class_map"
            )
        ps = tuple(float(p) for p in self.knot_percentiles)
        if len(ps) < 3 or any(b <= a for a, b in zip(ps, ps[1:])) or ps[0] <= 0 or ps[-1] >= 1:
            raise ValueError(f"knot percentiles must be >=3, strictly increasing in (0,1): {ps}")
        object.__setattr__(self, "knot_percentiles", ps)

    # -- serialization ---------------------------------------------------
    def to_dict(self) -> dict:
        d = {
            "delta_pooling": self.delta_pooling,
            "study_shape_pooling": self.study_shape_pooling,
            "agent_shape_pooling": self.agent_shape_pooling,
            "shared_sigma_study": self.shared_sigma_study,
            "shared_sigma_agent": self.shared_sigma_agent,
            "covariate": None
            if self.covariate is None
            else {
                "name": self.covariate.name,
                "center": self.covariate.center,
                "form": self.covariate.form,
                "agent_pooling": self.covariate.agent_pooling,
                "study_pooling": self.covariate.study_pooling,
            },
            "class_map": dict(sorted(self.class_map.items())) if self.class_map else None,
            "priors": {k: getattr(self.priors, k) for k in PriorSet.__dataclass_fields__},
            "knot_percentiles": list(self.knot_percentiles),
            "sampler": self.sampler.to_dict(),
        }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        cov = d.get("covariate")
        return cls(
            delta_pooling=d.get("delta_pooling", "exchangeable"),
            study_shape_pooling=d.get("study_shape_pooling", "common"),
            agent_shape_pooling=d.get("agent_shape_pooling", "independent"),
            shared_sigma_study=d.get("shared_sigma_study", True),
            shared_sigma_agent=d.get("shared_sigma_agent", True),
            covariate=None if cov is None else CovariateSpec(**cov),
            class_map=d.get("class_map"),
            priors=PriorSet(**d["priors"]) if "priors" in d else PriorSet(),
            knot_percentiles=tuple(d.get("knot_percentiles", (0.25, 0.5, 0.75))),
            sampler=_sampler.SamplerConfig.from_dict(d.get("sampler", {})),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ModelSpec":
        return cls.from_dict(json.loads(text))

    def digest(self) -> str:
        return hashlib.sha256(
            json.dumps(self.to_dict(), sort_keys=True).encode("utf-8")
        ).hexdigest()


PRESET_NAMES = ("M1", "M2", "M3", "M4", "M5")


def preset(name: str, *, class_map=None, covariate=None, knot_percentiles=None, sampler=None) -> ModelSpec:
    """Named model configurations.

    M1: exchangeable effects, per-agent common shapes (the primary model).
    M2: M1 + common linear interaction with risk of bias (column ``rob``).
    M3: M1 + interaction with publication year centred at 2010 (``year``).
    M4: M1 + interaction with the variance of the log odds ratio.
    M5: class-pooled shapes on a harmonized dose scale (needs class_map and
        an equivalence table).
    """
    key = name.strip().upper()
    kwargs = {}
    if key == "M1":
        pass
    elif key == "M2":
        kwargs["covariate"] = CovariateSpec(name="rob")
    elif key == "M3":
        kwargs["covariate"] = CovariateSpec(name="year", center=2010.0)
    elif key == "M4":
        kwargs["covariate"] = CovariateSpec(name="var_logor")
    elif key == "M5":
        kwargs["agent_shape_pooling"] = "class_common"
        kwargs["class_map"] = class_map or {}
        if not kwargs["class_map"]:
            raise SpecDatasetMismatch("preset M5 needs a class map (agent -> class)")
    else:
        raise ValueError(f"unknown preset {name!r}; choose one of {PRESET_NAMES}")
    spec = ModelSpec(**kwargs)
    if covariate is not None:
        spec = replace(spec, covariate=covariate)
    if class_map is not None and key != "M5":
        spec = replace(spec, class_map=class_map)
    if knot_percentiles is not None:
        spec = replace(spec, knot_percentiles=tuple(knot_percentiles))
    if sampler is not None:
        spec = replace(spec, sampler=sampler)
    return spec


# ---------------------------------------------------------------------------
# parameter layout


@dataclass
class ParameterState:
    """Named view of one point in parameter space (arrays share no storage
    with the flat vector; use layout.pack to go back)."""

    baseline: np.ndarray
    delta: np.ndarray | None = None
    study_coefs: np.ndarray | None = None  # (n_pairs, P)
    coefs: np.ndarray | None = None  # (n_shape_rows, P)
    pool_coefs: np.ndarray | None = None  # (P,) or (n_classes, P)
    tau: float | None = None
    sigma_study: np.ndarray | None = None
    sigma_agent: np.ndarray | None = None
    inter_study: np.ndarray | None = None  # (n_pairs, M)
    inter_agent: np.ndarray | None = None  # (n_agents, M)
    inter_pool: np.ndarray | None = None  # (M,)
    tau_inter_study: float | None = None
    tau_inter_agent: float | None = None


class ParameterLayout:
    """Deterministic ordering of all free scalars.

    Component order (components absent under a given configuration are
    skipped): baseline per study (input order); relative effects per
    non-reference arm (study-major, file order); per-study shape coefficients
    (study, then agent id); shape rows (agent id order, class id order, or the
    single pooled row), coefficient-major within a row; pooled shape means;
    tau; sigma_study; sigma_agent; per-study interactions; per-agent
    interactions; pooled interaction; interaction heterogeneities.  The
    ordering depends only on (spec, dataset), never on run state.
    """

    def __init__(self):
        self.names: list[str] = []
        self._spans: dict[str, tuple[int, int, tuple]] = {}

    def add(self, key: str, names: list[str], shape: tuple):
        start = len(self.names)
        self.names.extend(names)
        self._spans[key] = (start, len(self.names), shape)

    def has(self, key: str) -> bool:
        return key in self._spans

    def span(self, key: str) -> tuple[int, int]:
        start, stop, _ = self._spans[key]
        return start, stop

    def view(self, theta: np.ndarray, key: str):
        start, stop, shape = self._spans[key]
        v = theta[start:stop]
        return v.reshape(shape) if len(shape) > 1 else v

    def indices(self, key: str) -> np.ndarray:
        start, stop, _ = self._spans[key]
        return np.arange(start, stop)

    @property
    def n_params(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"no parameter named {name!r}") from None

    def unpack(self, theta: np.ndarray) -> ParameterState:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.n_params,):
            raise DimensionMismatch(
                f"state has {theta.shape} entries, layout expects ({self.n_params},)"
            )
        def get(key, scalar=False):
            if not self.has(key):
                return None
            v = self.view(theta, key)
            return float(v[0]) if scalar else v
        return ParameterState(
            baseline=self.view(theta, "baseline"),
            delta=get("delta"),
            study_coefs=get("study_coef"),
            coefs=get("coef"),
            pool_coefs=get("pool_coef"),
            tau=get("tau", scalar=True),
            sigma_study=get("sigma_study"),
            sigma_agent=get("sigma_agent"),
            inter_study=get("inter_study"),
            inter_agent=get("inter_agent"),
            inter_pool=get("inter_pool"),
            tau_inter_study=get("tau_inter_study", scalar=True),
            tau_inter_agent=get("tau_inter_agent", scalar=True),
        )

    def pack(self, state: ParameterState) -> np.ndarray:
        theta = np.zeros(self.n_params)
        mapping = {
            "baseline": state.baseline,
            "delta": state.delta,
            "study_coef": state.study_coefs,
            "coef": state.coefs,
            "pool_coef": state.pool_coefs,
            "tau": state.tau,
            "sigma_study": state.sigma_study,
            "sigma_agent": state.sigma_agent,
            "inter_study": state.inter_study,
            "inter_agent": state.inter_agent,
            "inter_pool": state.inter_pool,
            "tau_inter_study": state.tau_inter_study,
            "tau_inter_agent": state.tau_inter_agent,
        }
        for key, value in mapping.items():
            if not self.has(key):
                if value is not None and np.size(value) > 0:
                    raise DimensionMismatch(f"state carries {key!r} but the layout has none")
                continue
            if value is None:
                raise DimensionMismatch(f"state is missing {key!r}")
            start, stop, _ = self._spans[key]
            arr = np.asarray(value, dtype=float).reshape(-1)
            if len(arr) != stop - start:
                raise DimensionMismatch(
                    f"{key!r} has {len(arr)} entries, layout expects {stop - start}"
                )
            theta[start:stop] = arr
        return theta


def _fmt_dose(x: float) -> str:
    return f"{x:g}"


# ---------------------------------------------------------------------------
# preprocessed arrays


@dataclass
class ModelData:
    """Immutable flat-array view of (dataset, spec): everything the sampler
    and log-posterior touch per evaluation."""

    n_arms: int
    n_studies: int
    n_nonref: int
    n_coefs: int
    r: np.ndarray
    n: np.ndarray
    logc: np.ndarray
    arm_study: np.ndarray
    arm_start: np.ndarray
    arm_dpos: np.ndarray
    nonref_idx: np.ndarray
    d_study: np.ndarray
    d_start: np.ndarray
    d_count: np.ndarray
    ref_arm: np.ndarray  # per study, global arm index
    placebo_ref: np.ndarray  # per study, bool
    X: np.ndarray  # (n_nonref, P) basis of the arm dose on its own knots
    XR: np.ndarray  # (n_nonref, P) basis of the reference dose on its knots
    amap: np.ndarray
    rmap: np.ndarray
    shape_labels: tuple
    shape_row_of_agent: dict
    pool_labels: tuple = ()
    class_of_row: np.ndarray | None = None
    pairs: tuple = ()
    pair_index: dict = field(default_factory=dict)
    pair_agent_row: np.ndarray | None = None
    Z: np.ndarray | None = None  # per non-ref arm, centred covariate
    XI: np.ndarray | None = None
    XIR: np.ndarray | None = None
    gamap: np.ndarray | None = None
    grmap: np.ndarray | None = None
    inter_labels: tuple = ()
    inter_row_of_agent: dict = field(default_factory=dict)
    n_inter_cols: int = 0
    coef_scale: np.ndarray | None = None  # (n_shape_rows, P) proposal base scales
    pair_scale: np.ndarray | None = None
    inter_scale: np.ndarray | None = None
    knots_by_agent: dict = field(default_factory=dict)
    knots_by_target: dict = field(default_factory=dict)
    max_dose: dict = field(default_factory=dict)
    harmonized: bool = False
    study_ids: tuple = ()
    agent_ids: tuple = ()
    class_ids: tuple = ()


def _knot_groups(dataset: Dataset, spec: ModelSpec, harmonized: bool):
    """Map each active agent to a knot-placement group key."""
    pooling = spec.agent_shape_pooling
    if pooling in _CLASS_POOLINGS:
        groups = {}
        for agent in dataset.active_agents:
            cls = spec.class_map.get(agent)
            if cls is None:
                raise SpecDatasetMismatch(f"agent {agent!r} missing from class_map")
            groups[agent] = f"class:{cls}"
        return groups
    if pooling == "common" or (pooling == "exchangeable" and harmonized):
        return {agent: _POOLED for agent in dataset.active_agents}
    return {agent: agent for agent in dataset.active_agents}


def build_model_data(dataset: Dataset, spec: ModelSpec, equivalence: EquivalenceTable | None):
    """Validate, harmonize if required, place knots and flatten to arrays.

    Returns (possibly harmonized dataset, ModelData)."""
    pooling = spec.agent_shape_pooling
    needs_harmonized = pooling in ("common",) + _CLASS_POOLINGS
    if needs_harmonized and equivalence is None:
        raise SpecDatasetMismatch(
            f"{pooling} across-agent pooling requires an equivalence table "
            "(doses must share one scale)"
        )
    if pooling in _CLASS_POOLINGS:
        for agent in dataset.active_agents:
            if agent not in (spec.class_map or {}):
                raise SpecDatasetMismatch(f"agent {agent!r} missing from class_map")
    if pooling == "exchangeable" and equivalence is None and len(dataset.active_agents) > 1:
        warnings.warn(
            "exchangeable shapes across agents without an equivalence table: "
            "agents keep native dose scales, pooling assumes they are comparable",
            stacklevel=2,
        )

    harmonized = equivalence is not None and (needs_harmonized or pooling == "exchangeable")
    working = harmonize_doses(dataset, equivalence) if harmonized else dataset

    report = validate_network(working)
    if not report.connected:
        if pooling in ("exchangeable", "common"):
            warnings.warn(
                f"comparison network has {len(report.components)} components; "
                f"proceeding under {pooling} across-agent shapes",
                stacklevel=2,
            )
        else:
            raise DisconnectedNetwork(len(report.components))

    # knots per group, on the (possibly harmonized) arm-dose multisets
    agent_group = _knot_groups(working, spec, harmonized)
    group_doses: dict[str, list] = {}
    for arm in working.arms():
        if not arm.is_placebo:
            group_doses.setdefault(agent_group[arm.agent_id], []).append(arm.dose)
    knots_by_target = {
        g: place_knots(doses, spec.knot_percentiles, agent_id=g)
        for g, doses in sorted(group_doses.items())
    }
    knots_by_agent = {agent: knots_by_target[g] for agent, g in agent_group.items()}
    n_coefs = len(spec.knot_percentiles) - 1

    # reference arms; selection uses equivalent doses whenever a table exists
    sel_table = None if harmonized else equivalence
    studies = working.studies
    ref_of_study = [select_reference_arm(s, sel_table) for s in studies]

    # flat arm arrays (study-major, file order within study)
    r, n, arm_study, arm_start = [], [], [], []
    nonref_idx, d_study = [], []
    arm_dpos = []
    ref_arm, placebo_ref = [], []
    pos = 0
    for i, study in enumerate(studies):
        arm_start.append(pos)
        ref_local = ref_of_study[i]
        ref_arm.append(pos + ref_local)
        placebo_ref.append(study.arms[ref_local].is_placebo)
        for j, arm in enumerate(study.arms):
            r.append(float(arm.events))
            n.append(float(arm.sample_size))
            arm_study.append(i)
            if j == ref_local:
                arm_dpos.append(-1)
            else:
                arm_dpos.append(len(nonref_idx))
                nonref_idx.append(pos + j)
                d_study.append(i)
        pos += len(study.arms)
    r = np.asarray(r)
    n = np.asarray(n)
    logc = gammaln(n + 1) - gammaln(r + 1) - gammaln(n - r + 1)
    arm_study = np.asarray(arm_study, dtype=np.int64)
    arm_start = np.asarray(arm_start, dtype=np.int64)
    arm_dpos = np.asarray(arm_dpos, dtype=np.int64)
    nonref_idx = np.asarray(nonref_idx, dtype=np.int64)
    d_study = np.asarray(d_study, dtype=np.int64)
    d_count = np.bincount(d_study, minlength=len(studies)).astype(np.int64)
    d_start = np.concatenate(([0], np.cumsum(d_count)[:-1])).astype(np.int64)

    # shape rows
    agent_ids = working.active_agents
    if pooling in ("independent", "exchangeable", "class_exchangeable"):
        shape_labels = agent_ids
        shape_row_of_agent = {a: i for i, a in enumerate(agent_ids)}
    elif pooling == "common":
        shape_labels = (_POOLED,)
        shape_row_of_agent = {a: 0 for a in agent_ids}
    else:  # class_common
        class_ids = tuple(sorted({spec.class_map[a] for a in agent_ids}))
        shape_labels = tuple(f"class:{c}" for c in class_ids)
        row_of_class = {c: i for i, c in enumerate(class_ids)}
        shape_row_of_agent = {a: row_of_class[spec.class_map[a]] for a in agent_ids}
    class_ids = tuple(sorted({spec.class_map[a] for a in agent_ids})) if spec.class_map else ()
    class_of_row = None
    pool_labels = ()
    if pooling == "exchangeable":
        pool_labels = (_POOLED,)
    elif pooling == "class_exchangeable":
        pool_labels = tuple(f"class:{c}" for c in class_ids)
        row_of_class = {c: i for i, c in enumerate(class_ids)}
        class_of_row = np.asarray([row_of_class[spec.class_map[a]] for a in agent_ids], dtype=np.int64)

    # bases for non-reference arms and their study references
    flat_arms = [arm for s in studies for arm in s.arms]
    D = len(nonref_idx)
    X = np.zeros((D, n_coefs))
    XR = np.zeros((D, n_coefs))
    amap = np.zeros(D, dtype=np.int64)
    rmap = np.zeros(D, dtype=np.int64)
    none_row = len(shape_labels)
    for d, a_idx in enumerate(nonref_idx):
        arm = flat_arms[a_idx]
        study_i = arm_study[a_idx]
        ref = flat_arms[ref_arm[study_i]]
        if not arm.is_placebo:
            X[d] = rcs_basis(arm.dose, knots_by_agent[arm.agent_id])
            amap[d] = shape_row_of_agent[arm.agent_id]
        else:
            amap[d] = none_row
        if ref.is_placebo:
            rmap[d] = none_row
        else:
            XR[d] = rcs_basis(ref.dose, knots_by_agent[ref.agent_id])
            rmap[d] = shape_row_of_agent[ref.agent_id]

    # per-study (study, agent) pairs (study-exchangeable shape/interaction layers)
    pairs = []
    for i, study in enumerate(studies):
        for agent in sorted({a.agent_id for a in study.arms if not a.is_placebo}):
            pairs.append((i, agent))
    pairs = tuple(pairs)
    pair_index = {p: k for k, p in enumerate(pairs)}
    pair_agent_row = np.asarray(
        [shape_row_of_agent[a] for (_, a) in pairs], dtype=np.int64
    ) if pairs else None

    # interaction design
    cov = spec.covariate
    Z = XI = XIR = gamap = grmap = None
    inter_labels = ()
    inter_row_of_agent = {}
    n_inter_cols = 0
    if cov is not None:
        z_study = center_covariate(working, cov.name, cov.center)
        Z = z_study[d_study]
        n_inter_cols = 1 if cov.form == "linear" else n_coefs
        if cov.form == "linear":
            XI = np.zeros((D, 1))
            XIR = np.zeros((D, 1))
            for d, a_idx in enumerate(nonref_idx):
                arm = flat_arms[a_idx]
                ref = flat_arms[ref_arm[arm_study[a_idx]]]
                XI[d, 0] = 0.0 if arm.is_placebo else arm.dose
                XIR[d, 0] = 0.0 if ref.is_placebo else ref.dose
        else:
            XI = X.copy()
            XIR = XR.copy()
        if cov.agent_pooling == "common":
            inter_labels = (_POOLED,)
            inter_row_of_agent = {a: 0 for a in agent_ids}
        else:
            inter_labels = agent_ids
            inter_row_of_agent = {a: i for i, a in enumerate(agent_ids)}
        g_none = len(inter_labels) if cov.study_pooling == "common" else len(pairs)
        gamap = np.zeros(D, dtype=np.int64)
        grmap = np.zeros(D, dtype=np.int64)
        for d, a_idx in enumerate(nonref_idx):
            arm = flat_arms[a_idx]
            study_i = int(arm_study[a_idx])
            ref = flat_arms[ref_arm[study_i]]
            if cov.study_pooling == "common":
                gamap[d] = g_none if arm.is_placebo else inter_row_of_agent[arm.agent_id]
                grmap[d] = g_none if ref.is_placebo else inter_row_of_agent[ref.agent_id]
            else:
                gamap[d] = g_none if arm.is_placebo else pair_index[(study_i, arm.agent_id)]
                grmap[d] = g_none if ref.is_placebo else pair_index[(study_i, ref.agent_id)]

    # proposal base scales: reciprocal of the largest design magnitude a
    # coefficient multiplies, so random-walk steps move predictors O(scale)
    def _column_scales(rows, cols, a_idx_map, r_idx_map, Xa, Xr):
        scale = np.ones((rows, cols))
        mag = np.zeros((rows + 1, cols))
        for d in range(D):
            np.maximum(mag[a_idx_map[d]], np.abs(Xa[d]), out=mag[a_idx_map[d]])
            np.maximum(mag[r_idx_map[d]], np.abs(Xr[d]), out=mag[r_idx_map[d]])
        live = mag[:rows] > 0
        scale[live] = 1.0 / mag[:rows][live]
        return scale

    coef_scale = _column_scales(len(shape_labels), n_coefs, amap, rmap, X, XR)
    pair_scale = None
    if spec.study_shape_pooling == "exchangeable" and pairs:
        pamap = np.asarray(
            [pair_index[(int(arm_study[a]), flat_arms[a].agent_id)] for a in nonref_idx],
            dtype=np.int64,
        )
        prmap = np.asarray(
            [
                pair_index[(int(arm_study[a]), flat_arms[ref_arm[arm_study[a]]].agent_id)]
                if not flat_arms[ref_arm[arm_study[a]]].is_placebo
                else len(pairs)
                for a in nonref_idx
            ],
            dtype=np.int64,
        )
        pair_scale = _column_scales(len(pairs), n_coefs, pamap, prmap, X, XR)
    inter_scale = None
    if cov is not None:
        rows = len(pairs) if cov.study_pooling == "exchangeable" else len(inter_labels)
        inter_scale = _column_scales(
            rows, n_inter_cols, gamap, grmap, Z[:, None] * XI, Z[:, None] * XIR
        )

    max_dose = {}
    for arm in working.arms():
        if arm.is_placebo:
            continue
        max_dose[arm.agent_id] = max(max_dose.get(arm.agent_id, 0.0), arm.dose)
        g = agent_group[arm.agent_id]
        if g != arm.agent_id:
            max_dose[g] = max(max_dose.get(g, 0.0), arm.dose)

    data = ModelData(
        n_arms=len(flat_arms),
        n_studies=len(studies),
        n_nonref=D,
        n_coefs=n_coefs,
        r=r,
        n=n,
        logc=logc,
        arm_study=arm_study,
        arm_start=arm_start,
        arm_dpos=arm_dpos,
        nonref_idx=nonref_idx,
        d_study=d_study,
        d_start=d_start,
        d_count=d_count,
        ref_arm=np.asarray(ref_arm, dtype=np.int64),
        placebo_ref=np.asarray(placebo_ref, dtype=bool),
        X=X,
        XR=XR,
        amap=amap,
        rmap=rmap,
        shape_labels=tuple(shape_labels),
        shape_row_of_agent=shape_row_of_agent,
        pool_labels=pool_labels,
        class_of_row=class_of_row,
        pairs=pairs,
        pair_index=pair_index,
        pair_agent_row=pair_agent_row,
        Z=Z,
        XI=XI,
        XIR=XIR,
        gamap=gamap,
        grmap=grmap,
        inter_labels=tuple(inter_labels),
        inter_row_of_agent=inter_row_of_agent,
        n_inter_cols=n_inter_cols,
        coef_scale=coef_scale,
        pair_scale=pair_scale,
        inter_scale=inter_scale,
        knots_by_agent=knots_by_agent,
        knots_by_target=knots_by_target,
        max_dose=max_dose,
        harmonized=harmonized,
        study_ids=tuple(s.study_id for s in studies),
        agent_ids=agent_ids,
        class_ids=class_ids,
    )
    return working, data


def build_layout(dataset: Dataset, spec: ModelSpec, data: ModelData) -> ParameterLayout:
    layout = ParameterLayout()
    P = data.n_coefs
    layout.add(
        "baseline", [f"baseline[{sid}]" for sid in data.study_ids], (data.n_studies,)
    )
    if spec.delta_pooling == "exchangeable":
        names = []
        flat_arms = [arm for s in dataset.studies for arm in s.arms]
        for a_idx in data.nonref_idx:
            arm = flat_arms[a_idx]
            names.append(f"delta[{arm.study_id}/{arm.agent_id}@{_fmt_dose(arm.dose)}]")
        layout.add("delta", names, (data.n_nonref,))
    if spec.study_shape_pooling == "exchangeable":
        names = [
            f"coef{p+1}[{data.study_ids[i]}/{agent}]"
            for (i, agent) in data.pairs
            for p in range(P)
        ]
        layout.add("study_coef", names, (len(data.pairs), P))
    layout.add(
        "coef",
        [f"coef{p+1}[{lab}]" for lab in data.shape_labels for p in range(P)],
        (len(data.shape_labels), P),
    )
    if spec.agent_shape_pooling == "exchangeable":
        layout.add("pool_coef", [f"pool_coef{p+1}" for p in range(P)], (1, P))
    elif spec.agent_shape_pooling == "class_exchangeable":
        layout.add(
            "pool_coef",
            [f"pool_coef{p+1}[{lab}]" for lab in data.pool_labels for p in range(P)],
            (len(data.pool_labels), P),
        )
    if spec.delta_pooling == "exchangeable":
        layout.add("tau", ["tau"], (1,))
    if spec.study_shape_pooling == "exchangeable":
        if spec.shared_sigma_study:
            layout.add("sigma_study", ["sigma_study"], (1,))
        else:
            layout.add("sigma_study", [f"sigma_study{p+1}" for p in range(P)], (P,))
    if spec.agent_shape_pooling in ("exchangeable", "class_exchangeable"):
        if spec.shared_sigma_agent:
            layout.add("sigma_agent", ["sigma_agent"], (1,))
        else:
            layout.add("sigma_agent", [f"sigma_agent{p+1}" for p in range(P)], (P,))
    cov = spec.covariate
    if cov is not None:
        M = data.n_inter_cols
        if cov.study_pooling == "exchangeable":
            names = [
                f"inter{m+1}[{data.study_ids[i]}/{agent}]"
                for (i, agent) in data.pairs
                for m in range(M)
            ]
            layout.add("inter_study", names, (len(data.pairs), M))
        if cov.agent_pooling in ("independent", "exchangeable"):
            layout.add(
                "inter_agent",
                [f"inter{m+1}[{a}]" for a in data.agent_ids for m in range(M)],
                (len(data.agent_ids), M),
            )
        if cov.agent_pooling in ("exchangeable", "common"):
            layout.add("inter_pool", [f"inter{m+1}" for m in range(M)], (M,))
        if cov.study_pooling == "exchangeable":
            layout.add("tau_inter_study", ["tau_inter_study"], (1,))
        if cov.agent_pooling == "exchangeable":
            layout.add("tau_inter_agent", ["tau_inter_agent"], (1,))
    return layout


def parameter_layout(spec: ModelSpec, dataset: Dataset, equivalence=None) -> ParameterLayout:
    """Deterministic index map of every free scalar for (spec, dataset)."""
    working, data = build_model_data(dataset, spec, equivalence)
    return build_layout(working, spec, data)


_LOG_2PI = float(np.log(2.0 * np.pi))


def _normal_logpdf_sum(x, mean, var) -> float:
    x = np.asarray(x, dtype=float)
    terms = -0.5 * (_LOG_2PI + np.log(var)) - (x - mean) ** 2 / (2.0 * np.asarray(var, dtype=float))
    return float(np.sum(terms))


class DoseEffectModel:
    """A fully assembled model: spec + dataset flattened into arrays, with the
    log-posterior, layout, and sampler block structure."""

    def __init__(self, dataset: Dataset, spec: ModelSpec, equivalence: EquivalenceTable | None = None):
        self.spec = spec
        self.equivalence = equivalence
        self.dataset, self.data = build_model_data(dataset, spec, equivalence)
        self.layout = build_layout(self.dataset, spec, self.data)
        self._zero_extra = np.zeros(self.data.n_arms)

    # -- parameter plumbing ----------------------------------------------
    def _theta(self, state) -> np.ndarray:
        if isinstance(state, ParameterState):
            return self.layout.pack(state)
        theta = np.asarray(state, dtype=float)
        if theta.shape != (self.layout.n_params,):
            raise DimensionMismatch(
                f"state has shape {theta.shape}, expected ({self.layout.n_params},)"
            )
        return theta

    def _predictor_source(self, theta):
        """Shape-coefficient rows the predictor indexes (with zero row)."""
        key = "study_coef" if self.spec.study_shape_pooling == "exchangeable" else "coef"
        rows = self.layout.view(theta, key)
        return np.vstack([rows, np.zeros((1, self.data.n_coefs))])

    def _interaction_source(self, theta):
        cov = self.spec.covariate
        if cov.study_pooling == "exchangeable":
            rows = self.layout.view(theta, "inter_study")
        elif cov.agent_pooling == "common":
            rows = self.layout.view(theta, "inter_pool").reshape(1, -1)
        else:
            rows = self.layout.view(theta, "inter_agent")
        return np.vstack([rows, np.zeros((1, self.data.n_inter_cols))])

    def delta_means(self, state) -> np.ndarray:
        """Dose-effect means per non-reference arm (difference of curves for
        non-placebo references)."""
        theta = self._theta(state)
        return self._delta_means(theta)

    def _delta_means(self, theta) -> np.ndarray:
        d = self.data
        if d.n_nonref == 0:
            return np.zeros(0)
        return kernels.delta_means(d.X, d.XR, self._predictor_source(theta), d.amap, d.rmap)

    def _arm_extra(self, theta) -> np.ndarray:
        """Per-arm predictor terms beyond baseline and free relative effects:
        the plugged-in dose-effect means under common pooling, plus any
        covariate interaction."""
        d = self.data
        if self.spec.covariate is None and self.spec.delta_pooling == "exchangeable":
            return self._zero_extra
        extra = np.zeros(d.n_nonref)
        if self.spec.delta_pooling == "common":
            extra += self._delta_means(theta)
        if self.spec.covariate is not None:
            gsrc = self._interaction_source(theta)
            extra += d.Z * kernels.delta_means(d.XI, d.XIR, gsrc, d.gamap, d.grmap)
        out = np.zeros(d.n_arms)
        out[d.nonref_idx] = extra
        return out

    def linear_predictors(self, state) -> np.ndarray:
        """Logit-scale predictor for every arm (reference arms: the baseline)."""
        theta = self._theta(state)
        d = self.data
        eta = self.layout.view(theta, "baseline")[d.arm_study] + self._arm_extra(theta)
        if self.layout.has("delta"):
            eta = eta.copy()
            eta[d.nonref_idx] += self.layout.view(theta, "delta")
        return eta

    def linear_predictor(self, state, study_index: int, arm_index: int) -> float:
        """Predictor of one arm (position within its study)."""
        d = self.data
        return float(self.linear_predictors(state)[d.arm_start[study_index] + arm_index])

    # -- log-posterior ----------------------------------------------------
    def log_likelihood(self, state) -> float:
        theta = self._theta(state)
        eta = self.linear_predictors(theta)
        if not np.all(np.isfinite(eta)):
            return -np.inf
        d = self.data
        return kernels.binom_loglik_sum(d.r, d.n, d.logc, eta)

    def log_prior(self, state) -> float:
        theta = self._theta(state)
        spec, d, pr = self.spec, self.data, self.spec.priors
        st = self.layout.unpack(theta)
        lp = _normal_logpdf_sum(st.baseline, pr.baseline_mean, pr.baseline_var)

        if st.tau is not None:
            if not (0.0 < st.tau <= pr.tau_bound):
                return -np.inf
            lp += -np.log(pr.tau_bound)
            e = st.delta - self._delta_means(theta)
            lp += kernels.cs_mvn_sum(e, d.d_start, d.d_count, st.tau)

        if st.sigma_study is not None:
            if np.any(st.sigma_study <= 0) or np.any(st.sigma_study > pr.sigma_study_bound):
                return -np.inf
            lp += -len(st.sigma_study) * np.log(pr.sigma_study_bound)
            sig = st.sigma_study if len(st.sigma_study) > 1 else st.sigma_study[0]
            means = st.coefs[d.pair_agent_row]
            lp += _normal_logpdf_sum(st.study_coefs, means, np.square(sig))

        pooling = spec.agent_shape_pooling
        if pooling == "independent":
            lp += _normal_logpdf_sum(st.coefs, pr.coef_mean, pr.coef_var)
        elif pooling in ("common", "class_common"):
            lp += _normal_logpdf_sum(st.coefs, pr.pool_mean, pr.pool_var)
        else:
            if np.any(st.sigma_agent <= 0) or np.any(st.sigma_agent > pr.sigma_agent_bound):
                return -np.inf
            lp += -len(st.sigma_agent) * np.log(pr.sigma_agent_bound)
            sig = st.sigma_agent if len(st.sigma_agent) > 1 else st.sigma_agent[0]
            if pooling == "exchangeable":
                means = np.broadcast_to(st.pool_coefs[0], st.coefs.shape)
            else:  # class_exchangeable
                means = st.pool_coefs[d.class_of_row]
            lp += _normal_logpdf_sum(st.coefs, means, np.square(sig))
            lp += _normal_logpdf_sum(st.pool_coefs, pr.pool_mean, pr.pool_var)

        cov = spec.covariate
        if cov is not None:
            if cov.study_pooling == "exchangeable":
                if not (0.0 < st.tau_inter_study <= pr.tau_inter_study_bound):
                    return -np.inf
                lp += -np.log(pr.tau_inter_study_bound)
                if cov.agent_pooling == "common":
                    means = np.broadcast_to(st.inter_pool, st.inter_study.shape)
                else:
                    pair_rows = np.asarray(
                        [d.inter_row_of_agent[a] for (_, a) in d.pairs], dtype=np.int64
                    )
                    means = st.inter_agent[pair_rows]
                lp += _normal_logpdf_sum(st.inter_study, means, st.tau_inter_study**2)
            if cov.agent_pooling == "independent":
                lp += _normal_logpdf_sum(st.inter_agent, pr.interaction_mean, pr.interaction_var)
            elif cov.agent_pooling == "exchangeable":
                if not (0.0 < st.tau_inter_agent <= pr.tau_inter_agent_bound):
                    return -np.inf
                lp += -np.log(pr.tau_inter_agent_bound)
                means = np.broadcast_to(st.inter_pool, st.inter_agent.shape)
                lp += _normal_logpdf_sum(st.inter_agent, means, st.tau_inter_agent**2)
                lp += _normal_logpdf_sum(st.inter_pool, pr.interaction_mean, pr.interaction_var)
            else:  # common
                lp += _normal_logpdf_sum(st.inter_pool, pr.interaction_mean, pr.interaction_var)
        return float(lp)

    def log_posterior(self, state) -> float:
        theta = self._theta(state)
        lp = self.log_prior(theta)
        if lp == -np.inf:
            return -np.inf
        return lp + self.log_likelihood(theta)

    # -- sampling support ---------------------------------------------------
    def initial_state(self, rng: np.random.Generator, chain: int) -> np.ndarray:
        """Overdispersed start: jittered empirical logits for baselines and
        relative effects, small jitter on shapes, heterogeneities ~ U(.05,.5)."""
        d, spec = self.data, self.spec
        theta = np.zeros(self.layout.n_params)
        emp = np.log((d.r + 0.5) / (d.n - d.r + 0.5))
        base = self.layout.view(theta, "baseline")
        base[:] = emp[d.ref_arm] + 0.2 * rng.standard_normal(d.n_studies)
        if self.layout.has("delta"):
            delta = self.layout.view(theta, "delta")
            delta[:] = (
                emp[d.nonref_idx]
                - emp[d.ref_arm][d.d_study]
                + 0.2 * rng.standard_normal(d.n_nonref)
            )
        for key, scale in (
            ("coef", d.coef_scale),
            ("study_coef", d.pair_scale),
        ):
            if self.layout.has(key):
                rows = self.layout.view(theta, key)
                rows[:] = 0.1 * scale * rng.standard_normal(rows.shape)
        if self.layout.has("pool_coef"):
            rows = self.layout.view(theta, "pool_coef")
            rows[:] = 0.1 * rng.standard_normal(rows.shape) * np.mean(d.coef_scale, axis=0)
        for key in ("tau", "sigma_study", "sigma_agent", "tau_inter_study", "tau_inter_agent"):
            if self.layout.has(key):
                v = self.layout.view(theta, key)
                v[:] = rng.uniform(0.05, 0.5, size=v.shape)
        if spec.covariate is not None:
            for key in ("inter_study", "inter_agent", "inter_pool"):
                if self.layout.has(key):
                    v = self.layout.view(theta, key)
                    v[:] = 0.01 * rng.standard_normal(v.shape)
        return theta

    def grouped_blocks(self):
        if self.spec.study_shape_pooling == "exchangeable":
            return []
        return [_StudySweep(self)]

    def metropolis_blocks(self):
        blocks = []
        d, spec, pr = self.data, self.spec, self.spec.priors
        lay = self.layout

        if spec.study_shape_pooling == "exchangeable":
            # per-study joint blocks: baseline, relative effects, local shapes
            delta_idx = lay.indices("delta") if lay.has("delta") else np.zeros(0, dtype=int)
            coef_start, _ = lay.span("study_coef")
            P = d.n_coefs
            inter_start = lay.span("inter_study")[0] if lay.has("inter_study") else None
            M = d.n_inter_cols
            for i, sid in enumerate(d.study_ids):
                idx = [lay.span("baseline")[0] + i]
                scales = [1.0]
                if lay.has("delta"):
                    sl = slice(d.d_start[i], d.d_start[i] + d.d_count[i])
                    idx.extend(delta_idx[sl])
                    scales.extend([1.0] * int(d.d_count[i]))
                for k, (si, agent) in enumerate(d.pairs):
                    if si != i:
                        continue
                    idx.extend(range(coef_start + k * P, coef_start + (k + 1) * P))
                    scales.extend(d.pair_scale[k])
                    if inter_start is not None:
                        idx.extend(range(inter_start + k * M, inter_start + (k + 1) * M))
                        scales.extend(d.inter_scale[k])
                blocks.append(
                    _sampler.MetropolisBlock(
                        name=f"study[{sid}]",
                        idx=np.asarray(idx, dtype=np.int64),
                        base_scale=np.asarray(scales),
                        target=0.234,
                        init_scale=0.3,
                    )
                )

        coef_start, _ = lay.span("coef")
        P = d.n_coefs
        for g, label in enumerate(d.shape_labels):
            blocks.append(
                _sampler.MetropolisBlock(
                    name=f"coef[{label}]",
                    idx=np.arange(coef_start + g * P, coef_start + (g + 1) * P),
                    base_scale=d.coef_scale[g].copy(),
                    target=0.234 if P > 1 else 0.44,
                    init_scale=0.5,
                )
            )
        if lay.has("pool_coef"):
            start, stop = lay.span("pool_coef")
            n_rows = (stop - start) // P
            pool_scale = np.mean(d.coef_scale, axis=0)
            for g in range(n_rows):
                label = d.pool_labels[g] if d.pool_labels else _POOLED
                blocks.append(
                    _sampler.MetropolisBlock(
                        name=f"pool_coef[{label}]",
                        idx=np.arange(start + g * P, start + (g + 1) * P),
                        base_scale=pool_scale.copy(),
                        target=0.234 if P > 1 else 0.44,
                        init_scale=0.5,
                    )
                )
        for key, bound in (
            ("tau", pr.tau_bound),
            ("sigma_study", pr.sigma_study_bound),
            ("sigma_agent", pr.sigma_agent_bound),
        ):
            if lay.has(key):
                idx = lay.indices(key)
                blocks.append(
                    _sampler.MetropolisBlock(
                        name=key,
                        idx=idx,
                        base_scale=np.ones(len(idx)),
                        target=0.44 if len(idx) == 1 else 0.234,
                        init_scale=0.5,
                        positive_bounded=bound,
                    )
                )
        cov = spec.covariate
        if cov is not None:
            M = d.n_inter_cols
            if lay.has("inter_agent"):
                start, _ = lay.span("inter_agent")
                for k, agent in enumerate(d.agent_ids):
                    row = d.inter_row_of_agent[agent]
                    scale = (
                        d.inter_scale[row]
                        if cov.study_pooling == "common"
                        else np.ones(M)
                    )
                    blocks.append(
                        _sampler.MetropolisBlock(
                            name=f"inter[{agent}]",
                            idx=np.arange(start + k * M, start + (k + 1) * M),
                            base_scale=np.asarray(scale, dtype=float),
                            target=0.44 if M == 1 else 0.234,
                            init_scale=0.5,
                        )
                    )
            if lay.has("inter_pool"):
                start, stop = lay.span("inter_pool")
                if cov.agent_pooling == "common" and cov.study_pooling == "common":
                    scale = d.inter_scale[0]
                else:
                    scale = np.mean(d.inter_scale, axis=0)
                blocks.append(
                    _sampler.MetropolisBlock(
                        name="inter_pool",
                        idx=np.arange(start, stop),
                        base_scale=np.asarray(scale, dtype=float),
                        target=0.44 if M == 1 else 0.234,
                        init_scale=0.5,
                    )
                )
            for key, bound in (
                ("tau_inter_study", pr.tau_inter_study_bound),
                ("tau_inter_agent", pr.tau_inter_agent_bound),
            ):
                if lay.has(key):
                    blocks.append(
                        _sampler.MetropolisBlock(
                            name=key,
                            idx=lay.indices(key),
                            base_scale=np.ones(1),
                            target=0.44,
                            init_scale=0.5,
                            positive_bounded=bound,
                        )
                    )
        return blocks

    # -- posterior post-processing ------------------------------------------
    def predictor_draws(self, thetas: np.ndarray, chunk: int = 512) -> np.ndarray:
        """(n_draws, n_arms) linear predictors, evaluated in chunks."""
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        out = np.empty((thetas.shape[0], self.data.n_arms))
        for lo in range(0, thetas.shape[0], chunk):
            hi = min(lo + chunk, thetas.shape[0])
            for k, row in enumerate(thetas[lo:hi]):
                out[lo + k] = self.linear_predictors(row)
        return out

    def shape_targets(self) -> tuple:
        """Identifiers accepted by coefficient/curve queries: every active
        agent plus the pooled/class row labels."""
        extra = tuple(lab for lab in self.data.shape_labels if lab not in self.data.agent_ids)
        return self.data.agent_ids + extra

    def _target_row(self, target: str) -> int:
        d = self.data
        if target in d.shape_row_of_agent:
            return d.shape_row_of_agent[target]
        if target in d.shape_labels:
            return d.shape_labels.index(target)
        from .errors import UnknownAgent

        raise UnknownAgent(target)

    def coef_draws(self, thetas: np.ndarray, target: str) -> np.ndarray:
        """(n_draws, P) shape-coefficient draws for an agent or group label."""
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        start, _ = self.layout.span("coef")
        P = self.data.n_coefs
        row = self._target_row(target)
        return thetas[:, start + row * P : start + (row + 1) * P]

    def interaction_draws(self, thetas: np.ndarray, target: str) -> np.ndarray | None:
        """(n_draws, M) population-level interaction draws for an agent."""
        cov = self.spec.covariate
        if cov is None:
            return None
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        M = self.data.n_inter_cols
        if cov.agent_pooling == "common":
            start, stop = self.layout.span("inter_pool")
            return thetas[:, start:stop]
        if target not in self.data.inter_row_of_agent:
            from .errors import UnknownAgent

            raise UnknownAgent(target)
        row = self.data.inter_row_of_agent[target]
        start, _ = self.layout.span("inter_agent")
        return thetas[:, start + row * M : start + (row + 1) * M]

    def knots_for_target(self, target: str) -> KnotSet:
        d = self.data
        if target in d.knots_by_agent:
            return d.knots_by_agent[target]
        if target in d.knots_by_target:
            return d.knots_by_target[target]
        from .errors import UnknownAgent

        raise UnknownAgent(target)

    def max_dose(self, target: str) -> float:
        if target not in self.data.max_dose:
            from .errors import UnknownAgent

            raise UnknownAgent(target)
        return self.data.max_dose[target]

    def curve_logor_draws(
        self, thetas: np.ndarray, target: str, doses, covariate_value: float | None = None
    ) -> np.ndarray:
        """(n_draws, len(doses)) log-OR vs placebo along a dose grid, optionally
        at a raw covariate value (centred internally)."""
        doses = np.atleast_1d(np.asarray(doses, dtype=float))
        basis = rcs_basis(doses, self.knots_for_target(target))
        coefs = self.coef_draws(thetas, target)
        logor = coefs @ basis.T
        cov = self.spec.covariate
        if cov is not None and covariate_value is not None:
            z = covariate_value - cov.center
            gdraws = self.interaction_draws(thetas, target)
            ibasis = doses[:, None] if cov.form == "linear" else basis
            logor = logor + z * (gdraws @ ibasis.T)
        return logor


class _StudySweep(_sampler.GroupedBlock):
    """Batched per-study (baseline, relative effects) Metropolis update."""

    def __init__(self, model: DoseEffectModel):
        d = model.data
        dims = 1 + (d.d_count if model.layout.has("delta") else np.zeros(d.n_studies, dtype=int))
        super().__init__(
            name="study",
            labels=tuple(f"study[{sid}]" for sid in d.study_ids),
            target=np.where(dims == 1, 0.44, 0.234),
            init_scale=0.3,
        )
        self.model = model

    def step(self, theta, lp, scales, rng):
        model = self.model
        d = model.data
        lay = model.layout
        u = lay.view(theta, "baseline")
        delta = lay.view(theta, "delta") if lay.has("delta") else np.zeros(0)
        dmean = model._delta_means(theta) if lay.has("delta") else np.zeros(0)
        off = model._arm_extra(theta)
        tau = float(lay.view(theta, "tau")[0]) if lay.has("tau") else 1.0
        z = rng.standard_normal(d.n_studies + delta.size)
        unif = rng.random(d.n_studies)
        probs = np.empty(d.n_studies)
        dlp = kernels.study_sweep(
            u,
            delta,
            dmean,
            off,
            d.r,
            d.n,
            d.logc,
            d.arm_study,
            d.arm_start,
            d.arm_dpos,
            d.d_study,
            d.d_start,
            d.d_count,
            tau,
            model.spec.priors.baseline_mean,
            model.spec.priors.baseline_var,
            scales,
            z[: d.n_studies],
            z[d.n_studies :],
            unif,
            probs,
        )
        return lp + dlp, probs
