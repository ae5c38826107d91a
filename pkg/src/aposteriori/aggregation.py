"""Representative-day aggregation.

Days are clustered with agglomerative (Ward) clustering on normalised
daily vectors; each cluster is replaced by its mean or medoid day. The
resulting :class:`Aggregation` keeps the day -> representative mapping so
planning models can replay representatives in their original order.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data_io import HOURS_PER_DAY, PeriodMatrix, daily_vectors, normalize_features

logger = logging.getLogger(__name__)

LINKAGES = ("ward", "average", "complete", "single")
# Merge costs within this relative distance of the minimum count as ties.
TIE_RTOL = 1e-10
# Costs below this fraction of the mean squared row norm are rounding noise.
TIE_ATOL_SCALE = 1e-12

REGULAR, EXTREME = "regular", "extreme"


class AggregationError(ValueError):
    pass


# -- clustering -----------------------------------------------------------------


def _ward_costs(c_a, n_a, centroids, sizes):
    diff = centroids - c_a
    return (n_a * sizes / (n_a + sizes)) * np.einsum("ij,ij->i", diff, diff)


def linkage_merges(vectors, linkage: str = "ward", n_merges: int | None = None) -> list[tuple[int, int, float]]:
    """Agglomerative merge sequence as (cluster_a, cluster_b, cost) triples.

    A cluster is identified by the smallest row index among its members,
    and ``cluster_a < cluster_b``. The Ward cost of a merge is the increase
    in within-cluster sum of squares, ``n_a n_b / (n_a + n_b) |c_a - c_b|^2``.
    Among (near-)equal costs the lexicographically smallest pair merges.
    """
    if linkage not in LINKAGES:
        raise ValueError(f"unknown linkage {linkage!r}; expected one of {LINKAGES}")
    x = np.asarray(vectors, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    n_merges = n - 1 if n_merges is None else n_merges
    atol = TIE_ATOL_SCALE * float(np.mean(np.einsum("ij,ij->i", x, x))) if n else 0.0
    upper = np.triu(np.ones((n, n), dtype=bool), k=1)

    sizes = np.ones(n)
    active = np.ones(n, dtype=bool)
    if linkage == "ward":
        centroids = x.copy()
        dist = np.array([_ward_costs(x[i], 1.0, x, sizes) for i in range(n)]).reshape(n, n)
    else:
        diff = x[:, None, :] - x[None, :, :]
        dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    cost = np.where(upper, dist, np.inf)

    merges = []
    for _ in range(n_merges):
        best = cost.min()
        if not np.isfinite(best):
            break
        thresh = best + max(TIE_RTOL * abs(best), atol)
        flat = int(np.flatnonzero(cost.ravel() <= thresh)[0])
        a, b = divmod(flat, n)
        merges.append((a, b, float(cost[a, b])))

        others = np.flatnonzero(active)
        others = others[(others != a) & (others != b)]
        if linkage == "ward":
            centroids[a] = (sizes[a] * centroids[a] + sizes[b] * centroids[b]) / (sizes[a] + sizes[b])
            new = _ward_costs(centroids[a], sizes[a] + sizes[b], centroids[others], sizes[others])
        else:
            da = np.minimum(cost[a, others], cost[others, a])
            db = np.minimum(cost[b, others], cost[others, b])
            if linkage == "single":
                new = np.minimum(da, db)
            elif linkage == "complete":
                new = np.maximum(da, db)
            else:
                new = (sizes[a] * da + sizes[b] * db) / (sizes[a] + sizes[b])
        sizes[a] += sizes[b]
        active[b] = False
        cost[b, :] = np.inf
        cost[:, b] = np.inf
        lo = others < a
        cost[others[lo], a] = new[lo]
        cost[a, others[~lo]] = new[~lo]
    return merges


def labels_from_merges(n: int, merges) -> np.ndarray:
    """Cluster labels 0..k-1, numbered in order of each cluster's first row."""
    parent = np.arange(n)
    for a, b, _ in merges:
        parent[parent == b] = a
    _, labels = np.unique(parent, return_inverse=True)
    return labels


def ward_cluster(vectors, k: int, linkage: str = "ward") -> np.ndarray:
    """Cut the agglomerative tree at ``k`` clusters; deterministic labels."""
    x = np.asarray(vectors, dtype=float)
    n = x.shape[0]
    if not 1 <= k <= n:
        raise AggregationError(f"cannot form {k} clusters from {n} rows")
    return labels_from_merges(n, linkage_merges(x, linkage, n_merges=n - k))


# -- representatives ----------------------------------------------------------------


def _closest_to(points: np.ndarray, target: np.ndarray) -> int:
    d = np.einsum("ij,ij->i", points - target, points - target)
    best = d.min()
    atol = TIE_ATOL_SCALE * float(np.mean(np.einsum("ij,ij->i", points, points)))
    return int(np.flatnonzero(d <= best + max(TIE_RTOL * best, atol))[0])


def representatives(vectors, labels, kind: str = "medoid", raw=None):
    """Representative vector and source day for each cluster label.

    Clusters are compared in ``vectors`` space; the returned vectors come
    from ``raw`` (defaults to ``vectors``), e.g. unnormalised features.
    A medoid is the member nearest the cluster centroid, lowest index on
    ties; means have no source day.
    """
    if kind not in ("mean", "medoid"):
        raise ValueError(f"unknown representative kind {kind!r}")
    x = np.asarray(vectors, dtype=float)
    raw = x if raw is None else np.asarray(raw, dtype=float)
    labels = np.asarray(labels)
    reps, source = {}, {}
    for lab in np.unique(labels):
        members = np.flatnonzero(labels == lab)
        if members.size == 0:
            raise AggregationError(f"empty cluster {lab}")
        if kind == "mean":
            reps[int(lab)] = raw[members].mean(axis=0)
            source[int(lab)] = None
        else:
            centroid = x[members].mean(axis=0)
            day = int(members[_closest_to(x[members], centroid)])
            reps[int(lab)] = raw[day].copy()
            source[int(lab)] = day
    return reps, source


# -- aggregation container -------------------------------------------------------------


@dataclass
class Aggregation:
    mapping: np.ndarray
    representatives: dict[int, np.ndarray]
    column_labels: tuple[tuple[str, int], ...]
    ordered: bool = True
    stratum: dict[int, str] = field(default_factory=dict)
    provenance: dict[int, int | None] = field(default_factory=dict)
    weights: dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        self.mapping = np.asarray(self.mapping, dtype=int)
        self.column_labels = tuple((str(s), int(h)) for s, h in self.column_labels)
        ids, counts = np.unique(self.mapping, return_counts=True)
        computed = {int(i): int(c) for i, c in zip(ids, counts)}
        if self.weights and self.weights != computed:
            raise AggregationError("weights disagree with mapping occurrence counts")
        self.weights = computed

    @property
    def n_periods(self) -> int:
        return len(self.mapping)

    @property
    def rep_ids(self) -> list[int]:
        return sorted(self.representatives)

    def representative_matrix(self) -> np.ndarray:
        return np.array([self.representatives[i] for i in self.rep_ids])

    def expanded(self) -> np.ndarray:
        """Representative vectors laid out in original day order."""
        return np.array([self.representatives[int(i)] for i in self.mapping])

    def validate(self) -> None:
        missing = set(self.weights) - set(self.representatives)
        if missing:
            raise AggregationError(f"mapping uses ids without representatives: {sorted(missing)}")
        unused = set(self.representatives) - set(self.weights)
        if unused:
            raise AggregationError(f"representatives never used: {sorted(unused)}")
        if sum(self.weights.values()) != self.n_periods:
            raise AggregationError("weights do not sum to the number of periods")
        width = len(self.column_labels)
        for rid, vec in self.representatives.items():
            if np.shape(vec) != (width,):
                raise AggregationError(f"representative {rid} has wrong length")
        if self.stratum:
            if set(self.stratum) != set(self.representatives):
                raise AggregationError("stratum labels must cover every representative")

    def to_dict(self) -> dict:
        return {
            "ordered": bool(self.ordered),
            "mapping": [int(i) for i in self.mapping],
            "column_labels": [[s, h] for s, h in self.column_labels],
            "representatives": {str(i): [float(v) for v in self.representatives[i]] for i in self.rep_ids},
            "weights": {str(i): self.weights[i] for i in self.rep_ids},
            "stratum": {str(i): s for i, s in sorted(self.stratum.items())},
            "provenance": {str(i): p for i, p in sorted(self.provenance.items())},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Aggregation":
        return cls(
            mapping=np.array(data["mapping"], dtype=int),
            representatives={int(k): np.array(v, dtype=float) for k, v in data["representatives"].items()},
            column_labels=tuple(tuple(c) for c in data["column_labels"]),
            ordered=data.get("ordered", True),
            stratum={int(k): v for k, v in data.get("stratum", {}).items()},
            provenance={int(k): v for k, v in data.get("provenance", {}).items()},
            weights={int(k): int(v) for k, v in data.get("weights", {}).items()},
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def load(cls, path: str | Path) -> "Aggregation":
        return cls.from_dict(json.loads(Path(path).read_text()))


def identity_aggregation(pm: PeriodMatrix, ordered: bool = True) -> Aggregation:
    n = pm.n_periods
    return Aggregation(
        mapping=np.arange(n),
        representatives={t: pm.features[t].copy() for t in range(n)},
        column_labels=pm.column_labels,
        ordered=ordered,
        stratum={t: REGULAR for t in range(n)},
        provenance={t: t for t in range(n)},
    )


def _assemble(groups, raw: np.ndarray, column_labels, n_days: int, ordered: bool) -> Aggregation:
    """Build an Aggregation from (day indices, labels, reps, sources, stratum) groups.

    Representative ids are numbered by first appearance in the chronology.
    """
    owner = np.full(n_days, -1)
    found = []  # (representative, source day, stratum) per cluster
    for days, labels, reps, sources, stratum in groups:
        local = {lab: len(found) + k for k, lab in enumerate(sorted(set(int(x) for x in labels)))}
        found += [(reps[lab], sources[lab], stratum) for lab in local]
        owner[days] = [local[int(x)] for x in labels]
    if np.any(owner < 0):
        raise AggregationError("some days were not assigned to a cluster")
    renumber = {}
    for o in owner:
        renumber.setdefault(int(o), len(renumber))
    mapping = np.array([renumber[int(o)] for o in owner])
    reps, strata, prov = {}, {}, {}
    for old, new in renumber.items():
        rep, src, stratum = found[old]
        reps[new], strata[new], prov[new] = np.array(rep), stratum, src
    return Aggregation(mapping, reps, column_labels, ordered, strata, prov)


def _cluster_group(space, raw, days, k, kind, linkage):
    labels = ward_cluster(space[days], k, linkage)
    reps, sources = representatives(space[days], labels, kind, raw=raw[days])
    # sources are positions within the group; map back to day indices
    sources = {lab: (int(days[s]) if s is not None else None) for lab, s in sources.items()}
    return labels, reps, sources


# -- a priori ----------------------------------------------------------------------


def extreme_days(pm: PeriodMatrix) -> list[int]:
    """Maximum-total-demand day per demand series and minimum-total-wind day per wind series."""
    days = []
    for name in pm.series_names:
        totals = pm.series_block(name).sum(axis=1)
        if name.startswith("demand_"):
            days.append(int(np.flatnonzero(totals == totals.max())[0]))
        elif name.startswith("wind_"):
            days.append(int(np.flatnonzero(totals == totals.min())[0]))
    return sorted(set(days))


def aggregate_a_priori(
    pm: PeriodMatrix,
    n_A: int,
    kind: str = "medoid",
    heuristic: str = "none",
    *,
    normalization: str = "series",
    linkage: str = "ward",
    ordered: bool = True,
) -> Aggregation:
    """Cluster days on normalised inputs (methods A, B; C with the heuristic)."""
    n = pm.n_periods
    if not 1 <= n_A <= n:
        raise AggregationError(f"n_A={n_A} must lie in [1, {n}]")
    if heuristic not in ("none", "max_demand_min_wind"):
        raise ValueError(f"unknown heuristic {heuristic!r}")
    space = normalize_features(pm, normalization).features
    raw = pm.features

    forced = extreme_days(pm) if heuristic != "none" else []
    rest = np.setdiff1d(np.arange(n), forced)
    budget = n_A - len(forced)
    if forced and (budget < 0 or (budget == 0 and rest.size)):
        raise AggregationError(f"{len(forced)} forced extreme days leave no room in n_A={n_A}")

    groups = []
    if rest.size:
        labels, reps, sources = _cluster_group(space, raw, rest, min(budget, rest.size), kind, linkage)
        groups.append((rest, labels, reps, sources, REGULAR))
    for day in forced:
        groups.append((np.array([day]), np.array([0]), {0: raw[day].copy()}, {0: day}, EXTREME))
    return _assemble(groups, raw, pm.column_labels, n, ordered)


# -- importance stratification -------------------------------------------------------


def n_extreme(n_periods: int, p_e: float) -> int:
    # small epsilon guards products such as 0.29 * 100 = 28.999999999999996
    return max(1, int(math.floor(p_e * n_periods + 1e-9)))


def importance_partition(imp, p_e: float) -> tuple[np.ndarray, np.ndarray]:
    """Split days into the ``floor(p_e n)`` most important (at least one) and the rest.

    Ties at the threshold favour earlier days. Both index arrays are sorted.
    """
    if not 0.0 < p_e < 1.0:
        raise ValueError("p_e must lie strictly between 0 and 1")
    imp = np.asarray(imp, dtype=float)
    n = imp.size
    order = np.lexsort((np.arange(n), -imp))
    k = min(n_extreme(n, p_e), n)
    extreme = np.sort(order[:k])
    regular = np.sort(order[k:])
    return extreme, regular


def storage_matrix(charge: np.ndarray, regions) -> PeriodMatrix:
    """Daily vectors of hourly signed storage charging, one series per region."""
    charge = np.atleast_2d(np.asarray(charge, dtype=float))
    feats = daily_vectors(charge)
    labels = tuple((f"charge_r{r}", h) for r in regions for h in range(1, HOURS_PER_DAY + 1))
    return PeriodMatrix(features=feats, column_labels=labels, day_index=np.arange(feats.shape[0]))


def aggregate_stratified(
    pm: PeriodMatrix,
    partition: tuple[np.ndarray, np.ndarray],
    n_A: int,
    kind: str = "medoid",
    storage_features: PeriodMatrix | np.ndarray | None = None,
    *,
    normalization: str = "series",
    linkage: str = "ward",
) -> Aggregation:
    """Cluster extreme and regular days separately, ``n_A / 2`` representatives each.

    A stratum with fewer days than its budget keeps one representative per
    day; the surplus is not handed to the other stratum. With
    ``storage_features`` the clustering vector of each day is its
    normalised inputs followed by its normalised storage charging, while
    representatives carry the inputs only.
    """
    if n_A % 2:
        raise AggregationError(f"n_A={n_A} must be even for stratified aggregation")
    extreme, regular = (np.asarray(p, dtype=int) for p in partition)
    n = pm.n_periods
    if extreme.size + regular.size != n or np.union1d(extreme, regular).size != n:
        raise AggregationError("partition must cover every day exactly once")
    if extreme.size == 0 and regular.size == 0:
        raise AggregationError("both strata are empty")

    space = normalize_features(pm, normalization).features
    if storage_features is not None:
        if not isinstance(storage_features, PeriodMatrix):
            sf = np.asarray(storage_features, dtype=float)
            if sf.ndim != 2 or sf.shape[1] % HOURS_PER_DAY:
                raise AggregationError("storage features must be days x (regions * 24)")
            storage_features = PeriodMatrix(
                features=sf,
                column_labels=tuple(
                    (f"charge_{k}", h) for k in range(sf.shape[1] // HOURS_PER_DAY) for h in range(1, HOURS_PER_DAY + 1)
                ),
                day_index=np.arange(sf.shape[0]),
            )
        if storage_features.n_periods != n:
            raise AggregationError(
                f"storage features have {storage_features.n_periods} rows, expected {n}"
            )
        space = np.hstack([space, normalize_features(storage_features, normalization).features])
    logger.debug("stratified clustering in %d dimensions", space.shape[1])

    half = n_A // 2
    groups = []
    for days, stratum in ((regular, REGULAR), (extreme, EXTREME)):
        if days.size == 0:
            continue
        labels, reps, sources = _cluster_group(space, pm.features, days, min(half, days.size), kind, linkage)
        groups.append((days, labels, reps, sources, stratum))
    return _assemble(groups, pm.features, pm.column_labels, n, ordered=True)
