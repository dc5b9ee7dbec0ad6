"""Evaluation metrics: driving score, MPI, decision accuracy/F1, BLEU-4, CIDEr."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

from .decisions import DecisionPair, PathDecision, SpeedDecision

METERS_PER_MILE_INV = 0.000621371  # meters -> miles

DEFAULT_PENALTIES = {
    "collision_pedestrian": 0.50,
    "collision_vehicle": 0.60,
    "collision_static": 0.65,
    "red_light": 0.70,
    "stop_sign": 0.80,
    "double_solid_crossing": 0.80,
    "failed_yield_emergency": 0.80,
}


class MetricsError(ValueError):
    pass


@dataclass
class RouteResult:
    route_id: str
    length: float
    completed: float
    infractions: list = field(default_factory=list)  # Infraction or kind strings
    takeovers: int = 0
    terminated_early: bool = False

    def __post_init__(self):
        if not 0.0 <= self.completed <= self.length + 1e-9:
            raise MetricsError("completed must lie in [0, length]")
        if self.takeovers < 0:
            raise MetricsError("takeovers must be >= 0")

    def infraction_kinds(self) -> list[str]:
        return [i if isinstance(i, str) else i.kind for i in self.infractions]


class PenaltyTable:
    def __init__(self, coefficients: dict | None = None):
        coeff = dict(DEFAULT_PENALTIES)
        if coefficients:
            coeff.update(coefficients)
        missing = set(DEFAULT_PENALTIES) - set(coeff)
        if missing:
            raise MetricsError(f"penalty table missing kinds: {sorted(missing)}")
        for kind, c in coeff.items():
            if not 0.0 < c <= 1.0:
                raise MetricsError(f"penalty for {kind} must be in (0, 1]")
        self.coefficients = coeff

    def __getitem__(self, kind: str) -> float:
        if kind not in self.coefficients:
            raise MetricsError(f"no penalty coefficient for {kind!r}")
        return self.coefficients[kind]


@dataclass
class EpisodeMetrics:
    driving_score: float
    route_completion: float
    infraction_score: float
    mpi: float | None
    no_intervention: bool
    per_route: list

    def to_dict(self) -> dict:
        return {
            "driving_score": self.driving_score,
            "route_completion": self.route_completion,
            "infraction_score": self.infraction_score,
            "mpi": self.mpi,
            "no_intervention": self.no_intervention,
            "per_route": self.per_route,
        }


def route_completion(result: RouteResult) -> float:
    """Percent of route arc-length completed."""
    if result.length <= 0:
        raise MetricsError("zero-length route")
    return 100.0 * result.completed / result.length


def infraction_score(infractions, table: PenaltyTable) -> float:
    """Product of per-infraction penalty coefficients; 1.0 when clean."""
    score = 1.0
    for inf in infractions:
        kind = inf if isinstance(inf, str) else inf.kind
        score *= table[kind]
    return score


def driving_score(results: list[RouteResult], table: PenaltyTable | None = None) -> EpisodeMetrics:
    """Per-route DS_i = RC_i * IS_i; episode values are means over routes."""
    if not results:
        raise MetricsError("need at least one route")
    table = table or PenaltyTable()
    per_route = []
    for r in results:
        rc = route_completion(r)
        is_ = infraction_score(r.infractions, table)
        per_route.append({
            "route_id": r.route_id,
            "length_m": r.length,
            "completed_m": r.completed,
            "route_completion": rc,
            "infraction_score": is_,
            "driving_score": rc * is_,
            "infractions": r.infraction_kinds(),
            "takeovers": r.takeovers,
            "terminated_early": r.terminated_early,
        })
    n = len(per_route)
    ds = sum(p["driving_score"] for p in per_route) / n
    rc = sum(p["route_completion"] for p in per_route) / n
    is_ = sum(p["infraction_score"] for p in per_route) / n
    total_miles = sum(r.completed for r in results) * METERS_PER_MILE_INV
    takeovers = sum(r.takeovers for r in results)
    if takeovers == 0:
        mpi_val, no_int = total_miles, True
    else:
        mpi_val, no_int = total_miles / takeovers, False
    return EpisodeMetrics(ds, rc, is_, mpi_val, no_int, per_route)


def mpi(results: list[RouteResult]) -> tuple[float, bool]:
    """Total miles per takeover; (total_miles, True) when takeover-free."""
    if not results:
        raise MetricsError("need at least one route")
    total_miles = sum(r.completed for r in results) * METERS_PER_MILE_INV
    takeovers = sum(r.takeovers for r in results)
    if takeovers == 0:
        return total_miles, True
    return total_miles / takeovers, False


# --- open-loop decision metrics ---------------------------------------------

PATH_CLASSES = tuple(p.value for p in PathDecision)
SPEED_CLASSES = tuple(s.value for s in SpeedDecision)
MERGED_PATH = {
    "FOLLOW_LANE": "follow",
    "LEFT_LANE_CHANGE": "change",
    "RIGHT_LANE_CHANGE": "change",
    "LEFT_LANE_BORROW": "borrow",
    "RIGHT_LANE_BORROW": "borrow",
}


def _f1_counts(preds, gts, classes):
    """Per-class one-vs-rest F1; absent classes map to None (undefined)."""
    out = {}
    for cls in classes:
        tp = sum(1 for p, g in zip(preds, gts) if p == cls and g == cls)
        fp = sum(1 for p, g in zip(preds, gts) if p == cls and g != cls)
        fn = sum(1 for p, g in zip(preds, gts) if p != cls and g == cls)
        if tp + fp + fn == 0:
            out[cls] = None
        else:
            out[cls] = 2.0 * tp / (2.0 * tp + fp + fn)
    return out


def decision_metrics(predictions: list[DecisionPair], ground_truth: list[DecisionPair]) -> dict:
    """Pair accuracy plus per-class and merged (L/R pooled) F1 scores."""
    if len(predictions) != len(ground_truth):
        raise MetricsError("prediction/ground-truth length mismatch")
    if not predictions:
        raise MetricsError("empty sequences")
    n = len(predictions)
    acc = sum(1 for p, g in zip(predictions, ground_truth)
              if p.path == g.path and p.speed == g.speed) / n
    path_p = [p.path.value for p in predictions]
    path_g = [g.path.value for g in ground_truth]
    speed_p = [p.speed.value for p in predictions]
    speed_g = [g.speed.value for g in ground_truth]
    merged_p = [MERGED_PATH[v] for v in path_p]
    merged_g = [MERGED_PATH[v] for v in path_g]
    return {
        "accuracy": acc,
        "path_f1": _f1_counts(path_p, path_g, PATH_CLASSES),
        "speed_f1": _f1_counts(speed_p, speed_g, SPEED_CLASSES),
        "merged_path_f1": _f1_counts(merged_p, merged_g, ("follow", "change", "borrow")),
    }


# --- text metrics -----------------------------------------------------------

def _tokenize(text: str) -> list[str]:
    return text.lower().split()


def _ngrams(tokens, n) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


BLEU_EPS = 1e-9


def bleu4(candidates, references) -> float:
    """Corpus BLEU-4, uniform weights, add-epsilon smoothing on zero counts.

    candidates: list of sentences (or one sentence string);
    references: parallel list of reference lists (or one list of strings).
    """
    if isinstance(candidates, str):
        candidates = [candidates]
        references = [list(references)]
    if len(candidates) != len(references):
        raise MetricsError("candidate/reference length mismatch")
    cand_toks = [_tokenize(c) for c in candidates]
    if all(len(t) == 0 for t in cand_toks):
        return 0.0
    ref_toks = [[_tokenize(r) for r in refs] for refs in references]
    if any(not refs for refs in ref_toks):
        raise MetricsError("every candidate needs at least one reference")

    log_ps = []
    for n in range(1, 5):
        match, total = 0, 0
        for cand, refs in zip(cand_toks, ref_toks):
            counts = _ngrams(cand, n)
            max_ref = Counter()
            for ref in refs:
                rc = _ngrams(ref, n)
                for g, c in rc.items():
                    max_ref[g] = max(max_ref[g], c)
            match += sum(min(c, max_ref[g]) for g, c in counts.items())
            total += max(len(cand) - n + 1, 0)
        if total == 0:
            continue  # candidate too short for this order; reweight over the rest
        p_n = match / total
        log_ps.append(math.log(p_n if p_n > 0.0 else BLEU_EPS))
    log_p_sum = sum(log_ps) / len(log_ps) if log_ps else math.log(BLEU_EPS)

    c_len = sum(len(t) for t in cand_toks)
    r_len = 0
    for cand, refs in zip(cand_toks, ref_toks):
        # closest reference length, ties to the shorter
        r_len += min((len(r) for r in refs), key=lambda L: (abs(L - len(cand)), L))
    if c_len == 0:
        return 0.0
    bp = 1.0 if c_len > r_len else math.exp(1.0 - r_len / c_len)
    return bp * math.exp(log_p_sum)


def cider(candidates: list[str], references: list[list[str]]) -> float:
    """CIDEr: TF-IDF weighted n-gram (1..4) cosine similarity, averaged, x10."""
    if len(candidates) != len(references):
        raise MetricsError("candidate/reference length mismatch")
    all_refs = [r for refs in references for r in refs]
    if len(set(all_refs)) < 2:
        raise MetricsError("corpus needs >= 2 distinct references for TF-IDF")
    num_docs = len(references)

    doc_freq = [Counter() for _ in range(4)]
    ref_ngrams = []
    for refs in references:
        per_ref = [[_ngrams(_tokenize(r), n + 1) for n in range(4)] for r in refs]
        ref_ngrams.append(per_ref)
        for n in range(4):
            seen = set()
            for counts in (p[n] for p in per_ref):
                seen.update(counts)
            for g in seen:
                doc_freq[n][g] += 1

    def tfidf_vec(counts: Counter, n: int) -> dict:
        total = sum(counts.values())
        vec = {}
        for g, c in counts.items():
            df = max(doc_freq[n][g], 1)
            vec[g] = (c / total) * math.log(num_docs / df) if total > 0 else 0.0
        return vec

    def cosine(u: dict, v: dict) -> float:
        dot = sum(u[g] * v[g] for g in u if g in v)
        nu = math.sqrt(sum(x * x for x in u.values()))
        nv = math.sqrt(sum(x * x for x in v.values()))
        if nu == 0.0 or nv == 0.0:
            return 0.0
        return dot / (nu * nv)

    total_score = 0.0
    for cand, per_ref in zip(candidates, ref_ngrams):
        toks = _tokenize(cand)
        score = 0.0
        for n in range(4):
            cv = tfidf_vec(_ngrams(toks, n + 1), n)
            sims = [cosine(cv, tfidf_vec(rn[n], n)) for rn in per_ref]
            score += sum(sims) / len(sims) / 4.0
        total_score += score
    return 10.0 * total_score / num_docs
