"""PCMCI+ causal discovery over lagged and contemporaneous links.

Three phases compose into :func:`run_pcmci_plus`:

1. Per-variable lagged condition selection (:func:`pc1_condition_selection`)
   iteratively prunes the candidate set {(variable, lag) : lag in
   1..max_lag}, at each round conditioning every survivor on the q
   strongest other survivors.
2. Momentary conditional independence (:func:`mci_test`) re-tests every
   surviving lagged candidate conditioned on both endpoints' discovered
   parent sets, the source's set shifted back by the link lag.
3. A contemporaneous phase prunes same-timestep adjacencies conditioned
   on both endpoints' lagged parents plus growing subsets of other
   contemporaneous neighbors, then orients what the unshielded-collider
   rule and Meek rule 1 can fix; the rest stays unoriented.

All ordering is deterministic: candidate ties break by (variable index,
lag), so a fixed dataset, max_lag, and alpha reproduce the graph exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import TimeSeriesDataset
from .errors import InsufficientHistory, InvalidArgument
from .granger import FeatureMethod, FeatureSet
from .stats import CITestResult, partial_correlation

# Daily-scale runs keep at most this many most recent timesteps unless
# the caller overrides; discovery cost grows superlinearly with T.
DEFAULT_MAX_SAMPLES = 8000


@dataclass(frozen=True)
class Candidate:
    """A lagged parent candidate (variable at t - lag) for some target."""

    variable: str
    lag: int
    statistic: float
    p_value: float


@dataclass(frozen=True)
class CausalLink:
    source: str
    target: str
    lag: int
    statistic: float
    p_value: float
    oriented: bool = True

    def __post_init__(self):
        if self.lag < 0:
            raise InvalidArgument(f"negative lag {self.lag}")
        if self.lag >= 1 and not self.oriented:
            raise InvalidArgument("lagged links are always oriented by time order")
        if self.lag == 0 and self.source == self.target:
            raise InvalidArgument("no self-links at lag 0")

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "target": self.target,
            "lag": self.lag,
            "stat": self.statistic,
            "p": self.p_value,
            "oriented": self.oriented,
        }


@dataclass(frozen=True)
class CausalGraph:
    variables: tuple[str, ...]
    max_lag: int
    links: tuple[CausalLink, ...]
    alpha: float

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "links", tuple(self.links))
        seen = set()
        for link in self.links:
            if link.p_value > self.alpha:
                raise InvalidArgument(
                    f"link {link.source}->{link.target} (lag {link.lag}) has "
                    f"p = {link.p_value} > alpha = {self.alpha}"
                )
            key = (link.source, link.target, link.lag)
            if key in seen:
                raise InvalidArgument(f"duplicate link {key}")
            seen.add(key)

    def parents_of(self, variable: str) -> list[CausalLink]:
        """Links into ``variable``; unoriented lag-0 adjacency qualifies."""
        out = []
        for link in self.links:
            if link.target == variable:
                out.append(link)
            elif not link.oriented and link.lag == 0 and link.source == variable:
                out.append(link)
        return out

    def to_dict(self) -> dict:
        return {
            "method": "pcmci+",
            "variables": list(self.variables),
            "max_lag": self.max_lag,
            "alpha": self.alpha,
            "links": [l.to_dict() for l in self.links],
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def from_dict(cls, d: dict) -> "CausalGraph":
        return cls(
            variables=tuple(d["variables"]),
            max_lag=int(d["max_lag"]),
            links=tuple(
                CausalLink(
                    source=l["source"],
                    target=l["target"],
                    lag=int(l["lag"]),
                    statistic=float(l["stat"]),
                    p_value=float(l["p"]),
                    oriented=bool(l.get("oriented", True)),
                )
                for l in d["links"]
            ),
            alpha=float(d["alpha"]),
        )

    @classmethod
    def load(cls, path) -> "CausalGraph":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dot(self) -> str:
        """Graphviz digraph with lag-labeled edges; unoriented lag-0
        links are rendered without an arrowhead."""
        lines = ["digraph causal {", "  rankdir=LR;"]
        for v in self.variables:
            lines.append(f'  "{v}";')
        for link in self.links:
            attrs = [f'label="lag {link.lag}"']
            if not link.oriented:
                attrs.append("dir=none")
            lines.append(
                f'  "{link.source}" -> "{link.target}" [{", ".join(attrs)}];'
            )
        lines.append("}")
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# phase 1: lagged condition selection
# ---------------------------------------------------------------------------

def pc1_condition_selection(
    dataset: TimeSeriesDataset,
    target_var: str,
    max_lag: int,
    pc_alpha: float = 0.05,
) -> list[Candidate]:
    """Iteratively prune lagged parent candidates of one variable.

    Round q tests each surviving candidate against the target at time t,
    conditioned on the q strongest *other* survivors (ranked by absolute
    statistic from the previous round, ties by variable index then lag).
    Candidates with p > pc_alpha after a full sweep are removed; rounds
    stop once q exceeds the number of remaining other candidates.
    Returns survivors sorted by |statistic| descending.
    """
    if max_lag < 1:
        raise InvalidArgument(f"max_lag must be >= 1, got {max_lag}")
    values = dataset.values
    T, N = values.shape
    if T <= max_lag + 4:
        raise InsufficientHistory(
            f"T = {T} leaves no testable samples at max_lag = {max_lag}"
        )
    j = dataset.variable_names.index(target_var)
    target = values[max_lag:, j]

    # column for candidate (i, lag): values at t - lag, rows t = max_lag..T-1
    def col(i: int, lag: int) -> np.ndarray:
        return values[max_lag - lag : T - lag, i]

    survivors: list[tuple[int, int]] = [
        (i, lag) for i in range(N) for lag in range(1, max_lag + 1)
    ]
    stat: dict[tuple[int, int], float] = {}
    pval: dict[tuple[int, int], float] = {}

    q = 0
    while q <= len(survivors) - 1:
        order = _rank(survivors, stat)
        removals = []
        for cand in survivors:
            conds = [c for c in order if c != cand][:q]
            z = (
                np.column_stack([col(i, lag) for i, lag in conds])
                if conds
                else None
            )
            res = partial_correlation(col(*cand), target, z)
            stat[cand] = res.statistic
            pval[cand] = res.p_value
            if res.p_value > pc_alpha:
                removals.append(cand)
        if removals:
            gone = set(removals)
            survivors = [c for c in survivors if c not in gone]
        q += 1

    return [
        Candidate(
            variable=dataset.variable_names[i],
            lag=lag,
            statistic=stat[(i, lag)],
            p_value=pval[(i, lag)],
        )
        for i, lag in _rank(survivors, stat)
    ]


def _rank(
    candidates: list[tuple[int, int]], stat: dict[tuple[int, int], float]
) -> list[tuple[int, int]]:
    return sorted(candidates, key=lambda c: (-abs(stat.get(c, np.inf)), c[0], c[1]))


# ---------------------------------------------------------------------------
# phase 2: momentary conditional independence
# ---------------------------------------------------------------------------

def mci_test(
    dataset: TimeSeriesDataset,
    link: tuple[str, int, str],
    parents_of_target: list[Candidate],
    parents_of_source: list[Candidate],
    max_lag: int,
) -> CITestResult:
    """MCI test of (source at t - lag) vs (target at t).

    Conditions on the target's parents minus the tested link, plus the
    source's parents shifted back by the link lag; samples align over
    t = max_lag + lag .. T-1 so every conditioning node is observable.
    """
    source, lag, target = link
    if lag < 0 or lag > max_lag:
        raise InvalidArgument(f"link lag {lag} outside 0..{max_lag}")
    values = dataset.values
    T = values.shape[0]
    names = dataset.variable_names
    i, j = names.index(source), names.index(target)

    conds: list[tuple[int, int]] = []
    for cand in parents_of_target:
        node = (names.index(cand.variable), cand.lag)
        if node != (i, lag) and node not in conds:
            conds.append(node)
    for cand in parents_of_source:
        node = (names.index(cand.variable), cand.lag + lag)
        if node not in conds:
            conds.append(node)

    t0 = max_lag + lag
    if T <= t0 + len(conds) + 3:
        raise InsufficientHistory(
            f"T = {T} cannot support an MCI test at lag {lag} with "
            f"{len(conds)} conditions"
        )
    x = values[t0 - lag : T - lag, i]
    y = values[t0:, j]
    z = (
        np.column_stack([values[t0 - l : T - l, k] for k, l in conds])
        if conds
        else None
    )
    return partial_correlation(x, y, z)


# ---------------------------------------------------------------------------
# phase 3: contemporaneous skeleton and orientation
# ---------------------------------------------------------------------------

def contemporaneous_phase(
    dataset: TimeSeriesDataset,
    lagged_parents: dict[str, list[Candidate]],
    pc_alpha: float = 0.05,
    max_lag: int | None = None,
) -> list[CausalLink]:
    """Discover and (partially) orient same-timestep links.

    Every pair starts adjacent.  Round q tests each surviving pair
    conditioned on both endpoints' full lagged parent sets plus the q
    strongest other contemporaneous neighbors; pairs with p > pc_alpha
    drop out, remembering that neighbor subset as their separating set.
    Surviving links are oriented by unshielded colliders and Meek rule 1
    where possible.
    """
    names = dataset.variable_names
    N = len(names)
    if N < 2:
        return []
    if max_lag is None:
        max_lag = max(
            (c.lag for cands in lagged_parents.values() for c in cands),
            default=1,
        )
    values = dataset.values
    T = values.shape[0]
    if T <= max_lag + 4:
        raise InsufficientHistory(
            f"T = {T} leaves no testable samples at max_lag = {max_lag}"
        )

    def col(i: int, lag: int) -> np.ndarray:
        return values[max_lag - lag : T - lag, i]

    parent_nodes: dict[int, list[tuple[int, int]]] = {}
    for i, name in enumerate(names):
        parent_nodes[i] = [
            (names.index(c.variable), c.lag) for c in lagged_parents.get(name, [])
        ]

    adjacent: set[tuple[int, int]] = {(i, j) for i in range(N) for j in range(i + 1, N)}
    strength: dict[tuple[int, int], float] = {}
    p_max: dict[tuple[int, int], float] = {}
    last_stat: dict[tuple[int, int], float] = {}
    sepset: dict[tuple[int, int], frozenset[int]] = {}

    q = 0
    while True:
        pairs = sorted(adjacent)
        neighbors = {i: set() for i in range(N)}
        for a, b in pairs:
            neighbors[a].add(b)
            neighbors[b].add(a)
        tested_any = False
        removals = []
        for a, b in pairs:
            others = sorted(
                (neighbors[a] | neighbors[b]) - {a, b},
                key=lambda k: (-strength.get(_pair(k, a), 0.0)
                               - strength.get(_pair(k, b), 0.0), k),
            )
            if q > len(others):
                continue
            tested_any = True
            subset = others[:q]
            conds: list[tuple[int, int]] = []
            for node in parent_nodes[a] + parent_nodes[b]:
                if node not in conds:
                    conds.append(node)
            conds.extend((k, 0) for k in subset if (k, 0) not in conds)
            z = (
                np.column_stack([col(k, l) for k, l in conds]) if conds else None
            )
            res = partial_correlation(col(a, 0), col(b, 0), z)
            strength[(a, b)] = abs(res.statistic)
            last_stat[(a, b)] = res.statistic
            p_max[(a, b)] = max(p_max.get((a, b), 0.0), res.p_value)
            if res.p_value > pc_alpha:
                removals.append((a, b))
                sepset[(a, b)] = frozenset(subset)
        for pair in removals:
            adjacent.discard(pair)
        if not tested_any:
            break
        q += 1

    orientation = _orient(sorted(adjacent), sepset, N)
    links = []
    for a, b in sorted(adjacent):
        direction = orientation.get((a, b))
        src, dst = (a, b) if direction is None or direction == (a, b) else (b, a)
        links.append(
            CausalLink(
                source=names[src],
                target=names[dst],
                lag=0,
                statistic=last_stat[(a, b)],
                p_value=p_max[(a, b)],
                oriented=direction is not None,
            )
        )
    return links


def _pair(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


def _orient(
    pairs: list[tuple[int, int]],
    sepset: dict[tuple[int, int], frozenset[int]],
    n_vars: int,
) -> dict[tuple[int, int], tuple[int, int] | None]:
    """Unshielded-collider rule then Meek rule 1; conflicts stay unoriented.

    Returns {undirected pair: (source, target)} with None for pairs no
    rule could fix.
    """
    adjacent = set(pairs)
    oriented: dict[tuple[int, int], tuple[int, int]] = {}
    conflicted: set[tuple[int, int]] = set()

    def propose(src: int, dst: int) -> None:
        key = _pair(src, dst)
        if key in conflicted:
            return
        if key in oriented and oriented[key] != (src, dst):
            del oriented[key]
            conflicted.add(key)
            return
        oriented[key] = (src, dst)

    # unshielded colliders a -> k <- b for non-adjacent {a, b}
    for k in range(n_vars):
        partners = sorted(
            x for x in range(n_vars) if x != k and _pair(x, k) in adjacent
        )
        for ai in range(len(partners)):
            for bi in range(ai + 1, len(partners)):
                a, b = partners[ai], partners[bi]
                if _pair(a, b) in adjacent:
                    continue
                if k not in sepset.get(_pair(a, b), frozenset()):
                    propose(a, k)
                    propose(b, k)

    # Meek rule 1: a -> k and k - b with a, b non-adjacent gives k -> b
    changed = True
    while changed:
        changed = False
        for key in sorted(adjacent):
            if key in oriented or key in conflicted:
                continue
            k_candidates = [key, (key[1], key[0])]
            for k, b in k_candidates:
                hit = False
                for a in range(n_vars):
                    if a in (k, b):
                        continue
                    if oriented.get(_pair(a, k)) == (a, k) and _pair(a, b) not in adjacent:
                        hit = True
                        break
                if hit:
                    propose(k, b)
                    if key in oriented or key in conflicted:
                        changed = True
                    break

    return {key: oriented.get(key) for key in adjacent}


# ---------------------------------------------------------------------------
# full composition
# ---------------------------------------------------------------------------

def run_pcmci_plus(
    dataset: TimeSeriesDataset,
    max_lag: int = 21,
    pc_alpha: float = 0.05,
    max_samples: int | None = DEFAULT_MAX_SAMPLES,
) -> CausalGraph:
    """PC1 per variable, MCI over surviving lagged candidates, then the
    contemporaneous phase; keeps links with p <= pc_alpha."""
    work = _truncate(dataset, max_samples)
    parents = {
        var: pc1_condition_selection(work, var, max_lag, pc_alpha)
        for var in work.variable_names
    }

    links: list[CausalLink] = []
    for target in work.variable_names:
        for cand in parents[target]:
            res = mci_test(
                work,
                (cand.variable, cand.lag, target),
                parents_of_target=parents[target],
                parents_of_source=parents[cand.variable],
                max_lag=max_lag,
            )
            if res.p_value <= pc_alpha:
                links.append(
                    CausalLink(
                        source=cand.variable,
                        target=target,
                        lag=cand.lag,
                        statistic=res.statistic,
                        p_value=res.p_value,
                        oriented=True,
                    )
                )

    links.extend(contemporaneous_phase(work, parents, pc_alpha, max_lag=max_lag))
    return CausalGraph(
        variables=work.variable_names,
        max_lag=max_lag,
        links=tuple(links),
        alpha=pc_alpha,
    )


def select_features_pcmci(graph: CausalGraph, target: str) -> FeatureSet:
    """Target plus the source of every link into it (any lag, including
    unoriented lag-0 adjacency), in dataset column order."""
    chosen = {target}
    for link in graph.parents_of(target):
        chosen.add(link.source if link.target == target else link.target)
    return FeatureSet(
        method=FeatureMethod.PCMCI_PLUS,
        features=tuple(v for v in graph.variables if v in chosen),
    )


def _truncate(dataset: TimeSeriesDataset, max_samples: int | None) -> TimeSeriesDataset:
    if max_samples is None or dataset.n_timesteps <= max_samples:
        return dataset
    keep = dataset.n_timesteps - max_samples
    return TimeSeriesDataset(
        variable_names=dataset.variable_names,
        timestamps=dataset.timestamps[keep:],
        values=dataset.values[keep:],
        frequency=dataset.frequency,
        target_name=dataset.target_name,
    )
