"""Campaign matching, recall metrics, synthetic data, and the p sweep.

A campaign is a conjunction of per-dimension minimum weights.  A user is an
audience member when their own vector satisfies every criterion; a cohort is
matched when its identity vector (the member mean) reaches a ``tau``-scaled
fraction of every criterion.  Recall is then counted per campaign:

* macro_recall pools counts: sum(TP) / (sum(TP) + sum(FN))
* micro_recall averages per-campaign TP / (TP + FN)

(Note the prefixes: macro pools and micro averages, the reverse of the
scikit-learn convention.)  Campaigns matching no user at all (TP + FN = 0)
are excluded from both aggregates and reported separately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .cohorts import CohortAssignment, build_ccws
from .errors import ConfigError, DatasetFormatError, PartitionError
from .vectors import Dataset, SparseVector

# Standard normal 25th-percentile, for the weight-law quantile below.
_Z25 = -0.6744897501960817


@dataclass(frozen=True)
class Campaign:
    """Conjunctive targeting predicate: weight at dim >= min_weight, for all."""

    campaign_id: str
    criteria: tuple[tuple[int, float], ...]

    def __post_init__(self):
        if not self.criteria:
            raise ValueError("campaign needs at least one criterion")
        dims = [dim for dim, _ in self.criteria]
        if len(set(dims)) != len(dims):
            raise ValueError("criterion dimensions must be distinct")
        if any(dim < 0 for dim in dims) or any(w <= 0 for _, w in self.criteria):
            raise ValueError("criteria need dim >= 0 and min_weight > 0")
        object.__setattr__(self, "criteria", tuple(sorted(self.criteria)))


@dataclass(frozen=True)
class CampaignCounts:
    campaign_id: str
    tp: int
    fp: int
    fn: int

    @property
    def matched_users(self) -> int:
        return self.tp + self.fn

    @property
    def recall(self) -> float:
        return self.tp / self.matched_users if self.matched_users else math.nan


@dataclass(frozen=True)
class RecallReport:
    per_campaign: tuple[CampaignCounts, ...]
    macro_recall: float
    micro_recall: float
    campaigns_excluded: int


def user_matches(u: SparseVector, campaign: Campaign) -> bool:
    """True iff the user meets every (dimension, min weight) criterion."""
    return all(u.get(dim) >= w for dim, w in campaign.criteria)


def cohort_matches(identity: SparseVector, campaign: Campaign, tau: float = 0.5) -> bool:
    """True iff the identity reaches tau * min_weight on every criterion."""
    if not 0 < tau <= 1:
        raise ValueError("tau must be in (0, 1]")
    return all(identity.get(dim) >= tau * w for dim, w in campaign.criteria)


def evaluate(assignment: CohortAssignment, dataset: Dataset,
             campaigns: Sequence[Campaign], tau: float = 0.5) -> RecallReport:
    """Campaign-level TP/FP/FN counts and the recall aggregates.

    The assignment must partition the dataset's users; each campaign's
    audience is every user whose cohort identity matches it.
    """
    if not 0 < tau <= 1:
        raise ValueError("tau must be in (0, 1]")
    n = dataset.n
    cohort_of = np.full(n, -1, dtype=np.int64)
    sizes = np.zeros(len(assignment.cohorts), dtype=np.int64)
    for ci, cohort in enumerate(assignment.cohorts):
        sizes[ci] = cohort.size
        for uid in cohort.members:
            try:
                row = dataset.index_of(uid)
            except KeyError:
                raise PartitionError(f"cohort member {uid!r} is not in the dataset") from None
            if cohort_of[row] != -1:
                raise PartitionError(f"user {uid!r} appears in more than one cohort")
            cohort_of[row] = ci
    if np.any(cohort_of == -1):
        uid = dataset.user_ids[int(np.argmax(cohort_of == -1))]
        raise PartitionError(f"user {uid!r} belongs to no cohort")

    for campaign in campaigns:
        if any(dim >= dataset.d for dim, _ in campaign.criteria):
            raise ValueError(f"campaign {campaign.campaign_id!r} targets a dimension >= d")

    # Column view of the CSR block: entries sorted by dimension.
    entry_rows = np.repeat(np.arange(n, dtype=np.int64), dataset.row_sizes())
    col_order = np.argsort(dataset.indices, kind="stable")
    col_dims = dataset.indices[col_order]
    col_rows = entry_rows[col_order]
    col_weights = dataset.weights[col_order]

    n_cohorts = len(assignment.cohorts)
    results = []
    for campaign in campaigns:
        users_ok = np.ones(n, dtype=bool)
        cohorts_ok = np.ones(n_cohorts, dtype=bool)
        for dim, min_w in campaign.criteria:
            lo = np.searchsorted(col_dims, dim, side="left")
            hi = np.searchsorted(col_dims, dim, side="right")
            rows_d = col_rows[lo:hi]
            w_d = col_weights[lo:hi]
            present = np.zeros(n, dtype=bool)
            present[rows_d[w_d >= min_w]] = True
            users_ok &= present
            identity_at_dim = np.bincount(cohort_of[rows_d], weights=w_d,
                                          minlength=n_cohorts) / sizes
            cohorts_ok &= identity_at_dim >= tau * min_w
        user_cohort_ok = cohorts_ok[cohort_of]
        tp = int(np.count_nonzero(users_ok & user_cohort_ok))
        fn = int(np.count_nonzero(users_ok & ~user_cohort_ok))
        fp = int(np.count_nonzero(~users_ok & user_cohort_ok))
        results.append(CampaignCounts(campaign.campaign_id, tp, fp, fn))

    included = [r for r in results if r.matched_users > 0]
    excluded = len(results) - len(included)
    if included:
        total_tp = sum(r.tp for r in included)
        total_fn = sum(r.fn for r in included)
        macro = total_tp / (total_tp + total_fn)
        micro = sum(r.recall for r in included) / len(included)
    else:
        macro = micro = 0.0
    return RecallReport(per_campaign=tuple(results), macro_recall=macro,
                        micro_recall=micro, campaigns_excluded=excluded)


# --- synthetic data ----------------------------------------------------------


@dataclass(frozen=True)
class SyntheticConfig:
    """Planted-cluster generator settings.

    Each cluster owns a characteristic support; users keep each of their
    cluster's features independently and pick up a little off-support noise.
    Weights follow a log-normal law composed of a per-dimension base scale
    (features have intrinsic magnitudes) and per-user jitter, so the marginal
    is log-normal with sigma = hypot(base_sigma, jitter_sigma).
    """

    n: int = 10_000
    d: int = 10_000
    clusters: int = 50
    support_size: int = 40
    noise_rate: float = 0.1
    weight_mu: float = 0.0
    weight_base_sigma: float = 1.0
    weight_jitter_sigma: float = 0.5
    campaigns_per_cluster: int = 2
    campaign_min_criteria: int = 3
    campaign_max_criteria: int = 8
    seed: int = 42

    @property
    def weight_sigma(self) -> float:
        return math.hypot(self.weight_base_sigma, self.weight_jitter_sigma)

    @property
    def weight_quantile_25(self) -> float:
        return math.exp(self.weight_mu + _Z25 * self.weight_sigma)

    def validate(self) -> None:
        if self.n < 1 or self.d < 1:
            raise ConfigError("n and d must be positive")
        if not 1 <= self.clusters <= self.n:
            raise ConfigError("need 1 <= clusters <= n")
        if self.support_size < 1 or self.clusters * self.support_size > self.d:
            raise ConfigError("need clusters * support_size <= d")
        if not 0 <= self.noise_rate < 1:
            raise ConfigError("noise_rate must be in [0, 1)")
        if self.campaigns_per_cluster < 0:
            raise ConfigError("campaigns_per_cluster must be >= 0")
        if not 1 <= self.campaign_min_criteria <= self.campaign_max_criteria <= self.support_size:
            raise ConfigError("campaign criteria range must fit the support size")
        if self.weight_base_sigma < 0 or self.weight_jitter_sigma < 0:
            raise ConfigError("weight sigmas must be >= 0")


def generate_synthetic(config: SyntheticConfig) -> tuple[Dataset, list[Campaign], np.ndarray]:
    """Planted-cluster dataset, its campaigns, and ground-truth labels.

    Fully deterministic for a given config.  Campaign min weights sit at the
    25th percentile of the marginal weight law; every campaign targets a
    random subset of one cluster's characteristic features.
    """
    config.validate()
    gen = np.random.default_rng(config.seed)
    n, d, G, s = config.n, config.d, config.clusters, config.support_size

    supports = np.array([gen.choice(d, size=s, replace=False) for _ in range(G)])
    in_support = np.zeros((G, d), dtype=bool)
    for g in range(G):
        in_support[g, supports[g]] = True
    base = gen.lognormal(config.weight_mu, config.weight_base_sigma, size=d) \
        if config.weight_base_sigma > 0 else np.full(d, math.exp(config.weight_mu))
    labels = gen.integers(0, G, size=n)

    keep = gen.random((n, s)) < (1.0 - config.noise_rate)
    kept_dims = supports[labels][keep]
    kept_users = np.repeat(np.arange(n, dtype=np.int64), keep.sum(axis=1))

    noise_counts = gen.poisson(config.noise_rate * s, size=n)
    noise_users = np.repeat(np.arange(n, dtype=np.int64), noise_counts)
    noise_dims = gen.integers(0, d, size=int(noise_counts.sum()))
    off_support = ~in_support[labels[noise_users], noise_dims]
    noise_users = noise_users[off_support]
    noise_dims = noise_dims[off_support]

    users = np.concatenate([kept_users, noise_users])
    dims = np.concatenate([kept_dims, noise_dims])
    # Guarantee nonempty vectors: a user who lost everything keeps the first
    # characteristic feature of their cluster.
    present = np.zeros(n, dtype=bool)
    present[users] = True
    if not present.all():
        missing = np.flatnonzero(~present)
        users = np.concatenate([users, missing])
        dims = np.concatenate([dims, supports[labels[missing], 0]])

    composite = np.unique(users * np.int64(d) + dims)
    users = composite // d
    dims = composite % d
    jitter = gen.lognormal(0.0, config.weight_jitter_sigma, size=composite.size) \
        if config.weight_jitter_sigma > 0 else np.ones(composite.size)
    weights = base[dims] * jitter

    counts = np.bincount(users, minlength=n)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    width = max(6, len(str(max(n - 1, 1))))
    user_ids = [f"u{i:0{width}d}" for i in range(n)]
    dataset = Dataset(user_ids, indptr, dims.astype(np.int64), weights, d)

    min_weight = config.weight_quantile_25
    campaigns: list[Campaign] = []
    for g in range(G):
        for j in range(config.campaigns_per_cluster):
            k = int(gen.integers(config.campaign_min_criteria,
                                 config.campaign_max_criteria + 1))
            targeted = np.sort(gen.choice(supports[g], size=k, replace=False))
            criteria = tuple((int(dim), min_weight) for dim in targeted)
            campaigns.append(Campaign(f"c{g:03d}_{j}", criteria))
    return dataset, campaigns, labels


# --- the p sweep --------------------------------------------------------------


@dataclass(frozen=True)
class SweepPoint:
    p: float
    macro_recall: float
    micro_recall: float


def default_p_grid() -> list[float]:
    return [round(0.5 + 0.1 * i, 1) for i in range(11)]


def sweep_p(dataset: Dataset, campaigns: Sequence[Campaign], p_grid: Sequence[float],
            K: int = 20, T: int = 1000, experiment_seed: int = 42,
            tau: float = 0.5) -> list[SweepPoint]:
    """One cohort build and evaluation per grid point, p ascending."""
    if not p_grid:
        raise ValueError("p grid must be nonempty")
    if any(p <= 0 for p in p_grid):
        raise ValueError("all p values must be positive")
    points = []
    for p in sorted(p_grid):
        assignment = build_ccws(dataset, p=p, T=T, K=K, experiment_seed=experiment_seed)
        report = evaluate(assignment, dataset, campaigns, tau=tau)
        points.append(SweepPoint(p=p, macro_recall=report.macro_recall,
                                 micro_recall=report.micro_recall))
    return points


# --- file formats --------------------------------------------------------------


def store_campaigns(campaigns: Iterable[Campaign], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for campaign in campaigns:
            entries = " ".join(f"{dim}:{repr(float(w))}" for dim, w in campaign.criteria)
            fh.write(f"{campaign.campaign_id}\t{entries}\n")


def load_campaigns(path: str | Path) -> list[Campaign]:
    """Parse ``campaign_id<TAB>idx:min_weight ...`` lines."""
    campaigns: list[Campaign] = []
    seen: set[str] = set()
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            cid, sep, rest = line.partition("\t")
            cid = cid.strip()
            if not sep or not cid:
                raise DatasetFormatError("expected 'campaign_id<TAB>criteria'", lineno)
            if cid in seen:
                raise DatasetFormatError(f"duplicate campaign_id {cid!r}", lineno)
            seen.add(cid)
            criteria = []
            for token in rest.split():
                idx_str, sep2, w_str = token.partition(":")
                if not sep2:
                    raise DatasetFormatError(f"malformed criterion {token!r}", lineno)
                try:
                    dim = int(idx_str)
                    w = float(w_str)
                except ValueError:
                    raise DatasetFormatError(f"bad criterion {token!r}", lineno) from None
                if dim < 0 or not np.isfinite(w) or w <= 0:
                    raise DatasetFormatError(f"bad criterion {token!r}", lineno)
                criteria.append((dim, w))
            if not criteria:
                raise DatasetFormatError("campaign has no criteria", lineno)
            try:
                campaigns.append(Campaign(cid, tuple(criteria)))
            except ValueError as exc:
                raise DatasetFormatError(str(exc), lineno) from None
    return campaigns


def write_recall_report(report: RecallReport, path: str | Path) -> None:
    """CSV of per-campaign counts plus a trailing summary block."""
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write("campaign_id,tp,fp,fn,recall\n")
        for row in report.per_campaign:
            recall = f"{row.recall:.6f}" if row.matched_users else ""
            fh.write(f"{row.campaign_id},{row.tp},{row.fp},{row.fn},{recall}\n")
        fh.write(f"# macro_recall={report.macro_recall:.6f}\n")
        fh.write(f"# micro_recall={report.micro_recall:.6f}\n")
        fh.write(f"# campaigns_excluded={report.campaigns_excluded}\n")


def write_sweep_csv(points: Sequence[SweepPoint], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write("p,macro_recall,micro_recall\n")
        for pt in points:
            fh.write(f"{pt.p:g},{pt.macro_recall:.6f},{pt.micro_recall:.6f}\n")


def write_size_cdf_csv(distribution: Sequence[tuple[int, int, float]], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write("size,count,cum_fraction\n")
        for size, count, frac in distribution:
            fh.write(f"{size},{count},{frac:.6f}\n")


def write_labels(user_ids: Sequence[str], labels: np.ndarray, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for uid, label in zip(user_ids, labels):
            fh.write(f"{uid}\t{int(label)}\n")
