"""Ensemble-construction strategies.

The central routine is the diversity-promoting greedy selection: seed the
ensemble with the individually best model, then repeatedly add the
candidate whose average score -- Dice error plus correlation to each
current member -- is lowest. Penalizing correlation alone (the ablated
variant), ranking by individual accuracy alone (top-k), taking everything
(all), and brute-force search (exhaustive) are provided as baselines and
as an oracle for testing the greedy results.

All comparisons are exact float comparisons, no epsilon: scores are
deterministic functions of the same inputs, so equality is meaningful,
and fuzzy ties would break the prefix property of the greedy order.
Ties on the minimum score go to the higher individual Dice; residual
ties go to the lowest model index (candidates are scanned in ascending
index order, so first-seen wins at full equality).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from .errors import DipeError
from .metrics import DEFAULT_THRESHOLD
from .parallel import ordered_map, ordered_sum
from .tensor_io import Manifest

STRATEGIES = ("dipe", "dipe_ablated", "topk", "all", "exhaustive")

EXHAUSTIVE_MAX_MODELS = 12


@dataclass(frozen=True)
class SelectionScore:
    """One candidate's average score against the current ensemble."""

    candidate: int
    value: float


@dataclass(frozen=True)
class EnsembleSelection:
    """A chosen ensemble: member indices in addition order, plus an audit trace."""

    strategy: str
    k: int
    members: tuple[int, ...]
    trace: tuple = field(default=())

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if not self.members:
            raise ValueError("selection must have at least one member")
        if len(set(self.members)) != len(self.members):
            raise ValueError(f"members contain duplicates: {self.members}")


def _matrix_values(c) -> np.ndarray:
    values = getattr(c, "values", c)
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DipeError(f"correlation matrix must be square, got shape {arr.shape}")
    return arr


def _check_pool(values: np.ndarray, d) -> int:
    n = values.shape[0]
    if len(d) != n:
        raise DipeError(f"{len(d)} model scores for a {n}x{n} correlation matrix")
    for i, di in enumerate(d):
        if not 0.0 <= di <= 1.0:
            raise DipeError(f"model score d[{i}] = {di!r} outside [0, 1]")
    return n


def _check_budget(k: int, n: int) -> None:
    if not 1 <= k <= n:
        raise DipeError(f"k out of range: need 1 <= k <= {n}, got {k}")


def _argmax_lowest(d) -> int:
    best = 0
    for i in range(1, len(d)):
        if d[i] > d[best]:
            best = i
    return best


def avg_score(i: int, ensemble, c, d) -> SelectionScore:
    """Average score for adding candidate i to the ensemble.

    mean over members j of ((1 - d[i]) + C[i][j]); algebraically equal to
    (1 - d[i]) + mean_j C[i][j]. Folded in member-addition order.
    """
    if i in ensemble:
        raise ValueError(f"candidate {i} is already an ensemble member")
    if not len(ensemble):
        raise ValueError("ensemble must be non-empty")
    values = _matrix_values(c)
    terms = [(1.0 - d[i]) + float(values[i, j]) for j in ensemble]
    return SelectionScore(candidate=i, value=ordered_sum(terms) / len(terms))


def _ablated_score(i: int, ensemble, c, d) -> SelectionScore:
    if i in ensemble:
        raise ValueError(f"candidate {i} is already an ensemble member")
    values = _matrix_values(c)
    terms = [float(values[i, j]) for j in ensemble]
    return SelectionScore(candidate=i, value=ordered_sum(terms) / len(terms))


def _greedy(c, d, k: int, strategy: str, score_fn) -> EnsembleSelection:
    values = _matrix_values(c)
    n = _check_pool(values, d)
    _check_budget(k, n)

    members = [_argmax_lowest(d)]
    trace = []
    while len(members) < k:
        best: SelectionScore | None = None
        scores = []
        for i in range(n):
            if i in members:
                continue
            score = score_fn(i, members, values, d)
            scores.append(score)
            if (
                best is None
                or score.value < best.value
                or (score.value == best.value and d[i] > d[best.candidate])
            ):
                best = score
        members.append(best.candidate)
        trace.append({"scores": tuple(scores), "chosen": best.candidate})
    return EnsembleSelection(strategy=strategy, k=k, members=tuple(members), trace=tuple(trace))


def select_dipe(c, d, k: int) -> EnsembleSelection:
    """Greedy diversity-promoting selection of k of the n models.

    The first member is the argmax of d (ties to the lowest index); each
    later member minimizes avg_score against the members so far.
    """
    return _greedy(c, d, k, "dipe", avg_score)


def select_dipe_ablated(c, d, k: int) -> EnsembleSelection:
    """Greedy selection scoring by mean correlation only (no Dice-error term).

    Same initialization and tie rules as select_dipe; isolates the
    contribution of the accuracy term for ablation comparisons.
    """
    return _greedy(c, d, k, "dipe_ablated", _ablated_score)


def select_topk(d, k: int) -> EnsembleSelection:
    """The k individually best models, in descending-Dice order (ties to lowest index)."""
    n = len(d)
    _check_budget(k, n)
    for i, di in enumerate(d):
        if not 0.0 <= di <= 1.0:
            raise DipeError(f"model score d[{i}] = {di!r} outside [0, 1]")
    ranked = sorted(range(n), key=lambda i: (-d[i], i))
    members = tuple(ranked[:k])
    trace = tuple({"chosen": i, "score": d[i]} for i in members)
    return EnsembleSelection(strategy="topk", k=k, members=members, trace=trace)


def select_all(n: int) -> EnsembleSelection:
    """Every model in pool order: the no-budget upper-bound ensemble."""
    if n < 1:
        raise DipeError("model pool is empty")
    return EnsembleSelection(strategy="all", k=n, members=tuple(range(n)), trace=())


def select_exhaustive(
    manifest: Manifest,
    k: int,
    threshold_value: float = DEFAULT_THRESHOLD,
    threads: int = 1,
) -> EnsembleSelection:
    """Brute-force oracle: the size-k subset with maximal fused Dice.

    Ties resolve to the lexicographically smallest index set. Refuses
    pools larger than 12 models; use the greedy strategies there.
    """
    n = manifest.n_models
    if n > EXHAUSTIVE_MAX_MODELS:
        raise DipeError(
            f"exhaustive search over {n} models is refused (limit "
            f"{EXHAUSTIVE_MAX_MODELS}); use the dipe or topk strategies"
        )
    _check_budget(k, n)
    if not manifest.slices:
        raise DipeError("manifest has no included slices")

    cache = {
        (i, rec.slice_id): manifest.load_prediction(i, rec.slice_id)
        for i in range(n)
        for rec in manifest.slices
    }

    def cached_load(model_index: int, slice_id: str):
        return cache[(model_index, slice_id)]

    subsets = list(itertools.combinations(range(n), k))
    worker = partial(_fused_dice_for, manifest, threshold_value, cached_load)
    dices = list(ordered_map(worker, subsets, threads=threads))

    best_idx = 0
    for idx in range(1, len(subsets)):
        if dices[idx] > dices[best_idx]:
            best_idx = idx
    trace = tuple(
        {"members": subset, "dice": dice} for subset, dice in zip(subsets, dices)
    )
    return EnsembleSelection(
        strategy="exhaustive", k=k, members=subsets[best_idx], trace=trace
    )


def _fused_dice_for(manifest, threshold_value, load, members) -> float:
    from . import fusion

    dice, _ = fusion.evaluate_members(
        manifest, members, threshold_value=threshold_value, load=load
    )
    return dice


# ---------------------------------------------------------------------------
# Selection JSON
# ---------------------------------------------------------------------------

def selection_to_dict(selection: EnsembleSelection, model_ids) -> dict:
    """Render a selection with model ids substituted for indices."""

    def mid(i: int) -> str:
        return model_ids[i]

    trace = []
    for step in selection.trace:
        if "scores" in step:
            trace.append(
                {
                    "scores": [
                        {"model": mid(s.candidate), "score": s.value}
                        for s in step["scores"]
                    ],
                    "chosen": mid(step["chosen"]),
                }
            )
        elif "members" in step:
            trace.append(
                {"members": [mid(i) for i in step["members"]], "dice": step["dice"]}
            )
        else:
            trace.append({"chosen": mid(step["chosen"]), "score": step["score"]})
    return {
        "strategy": selection.strategy,
        "k": selection.k,
        "members": [mid(i) for i in selection.members],
        "trace": trace,
    }


def selection_from_dict(doc: dict, model_ids) -> EnsembleSelection:
    """Rebuild a selection (members and strategy; trace is not reloaded)."""
    index_of = {m: i for i, m in enumerate(model_ids)}
    try:
        strategy = doc["strategy"]
        k = int(doc["k"])
        member_ids = doc["members"]
    except (KeyError, TypeError, ValueError) as exc:
        raise DipeError(f"malformed selection document: {exc}") from exc
    members = []
    for m in member_ids:
        if m not in index_of:
            raise DipeError(f"selection names unknown model {m!r}")
        members.append(index_of[m])
    try:
        return EnsembleSelection(strategy=strategy, k=k, members=tuple(members))
    except ValueError as exc:
        raise DipeError(f"malformed selection document: {exc}") from exc
