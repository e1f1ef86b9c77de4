"""Topic segmentation of meetings.

Two segmenters share the Segment output type: a lexical-cohesion segmenter
that scores inter-utterance gaps by cosine similarity between weighted term
chains active on either side, and a Bayesian segmenter that maximizes the
sum of Dirichlet-compound-multinomial log marginals over segment word counts
with an exact dynamic program.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

from sklearn.base import BaseEstimator

from .corpus import Meeting, Segment, check_partition
from .errors import ValidationError


@dataclass(frozen=True)
class Chain:
    """A run of occurrences of one term with no gap larger than the hiatus."""

    term: str
    first: int
    last: int
    freq: int
    weight: float


def lexical_chains(meeting: Meeting, hiatus: int = 11) -> list[Chain]:
    """Split each content term's occurrences into chains and weight them.

    A chain breaks where consecutive occurrences are more than `hiatus`
    utterances apart. Chains with fewer than two occurrences are dropped.
    Weight is freq * ln(n_utterances / span), so a term confined to a narrow
    span scores high and one spread over the whole meeting scores zero.
    """
    if hiatus < 1:
        raise ValidationError("hiatus must be >= 1")
    n = len(meeting.utterances)
    positions: dict[str, list[int]] = {}
    for utt in meeting.utterances:
        for tok in utt.tokens:
            if tok.is_content and not tok.is_filler:
                positions.setdefault(tok.norm, []).append(utt.position)

    chains: list[Chain] = []
    for term in sorted(positions):
        occ = positions[term]
        run_start = 0
        for i in range(1, len(occ) + 1):
            if i == len(occ) or occ[i] - occ[i - 1] > hiatus:
                run = occ[run_start:i]
                if len(run) >= 2:
                    span = run[-1] - run[0] + 1
                    weight = len(run) * math.log(n / span)
                    chains.append(Chain(term, run[0], run[-1], len(run), weight))
                run_start = i
    return chains


def _gap_similarities(chains: list[Chain], n: int, window: int) -> list[float]:
    """Cosine similarity across each gap between utterance i and i+1.

    The vectors have one component per chain, set to the chain weight when the
    chain's span overlaps the window on that side. Empty windows give 0.
    """
    sims: list[float] = []
    for gap in range(n - 1):
        lo = max(0, gap + 1 - window)
        hi = min(n, gap + 1 + window)
        dot = left_sq = right_sq = 0.0
        for c in chains:
            in_left = c.first < gap + 1 and c.last >= lo
            in_right = c.first < hi and c.last >= gap + 1
            w2 = c.weight * c.weight
            if in_left:
                left_sq += w2
            if in_right:
                right_sq += w2
            if in_left and in_right:
                dot += w2
        if left_sq == 0.0 or right_sq == 0.0:
            sims.append(0.0)
        else:
            sims.append(dot / math.sqrt(left_sq * right_sq))
    return sims


def _depth_scores(sims: list[float]) -> list[float]:
    """Valley depth of each gap: mean drop from the nearest peaks on both sides."""
    depths = []
    for g in range(len(sims)):
        left = g
        while left > 0 and sims[left - 1] >= sims[left]:
            left -= 1
        right = g
        while right < len(sims) - 1 and sims[right + 1] >= sims[right]:
            right += 1
        peak_l = max(sims[left:g + 1], default=sims[g])
        peak_r = max(sims[g:right + 1], default=sims[g])
        depths.append((peak_l + peak_r - 2.0 * sims[g]) / 2.0)
    return depths


def _boundaries_to_segments(boundaries: list[int], n: int) -> list[Segment]:
    cuts = [0] + sorted(boundaries) + [n]
    return [Segment(i, cuts[i], cuts[i + 1]) for i in range(len(cuts) - 1)]


class LexicalCohesionSegmenter(BaseEstimator):
    """Gap-similarity segmenter over weighted term chains.

    n_segments > 1 picks the n_segments - 1 deepest gaps (ties break toward
    the earlier gap). n_segments == 1 returns the whole meeting. n_segments
    == 0 switches to automatic mode: boundaries are the local similarity
    minima whose depth exceeds mean - stddev of all positive depths.
    """

    def __init__(self, n_segments: int = 14, hiatus: int = 11, window: int = 15):
        self.n_segments = n_segments
        self.hiatus = hiatus
        self.window = window

    def segment(self, meeting: Meeting) -> list[Segment]:
        n = len(meeting.utterances)
        k = self.n_segments
        if n == 0:
            raise ValidationError("cannot segment an empty meeting")
        if k < 0 or k > n:
            raise ValidationError(
                f"n_segments must be in [0, {n}] for this meeting, got {k}")
        if self.window < 1:
            raise ValidationError("window must be >= 1")
        if k == 1 or n == 1:
            segments = [Segment(0, 0, n)]
            check_partition(segments, n)
            return segments

        chains = lexical_chains(meeting, self.hiatus)
        sims = _gap_similarities(chains, n, self.window)
        depths = _depth_scores(sims)

        if k == 0:
            last = len(sims) - 1
            candidates = [
                g for g, d in enumerate(depths)
                if d > 0.0
                and (g == 0 or sims[g] <= sims[g - 1])
                and (g == last or sims[g] <= sims[g + 1])
            ]
            if not candidates:
                boundaries: list[int] = []
            else:
                values = [depths[g] for g in candidates]
                mean = sum(values) / len(values)
                std = math.sqrt(sum((v - mean) ** 2 for v in values) / len(values))
                boundaries = [g + 1 for g in candidates if depths[g] > mean - std]
        else:
            ranked = sorted(range(len(depths)), key=lambda g: (-depths[g], g))
            boundaries = [g + 1 for g in ranked[:k - 1]]

        segments = _boundaries_to_segments(boundaries, n)
        check_partition(segments, n)
        return segments


def dcm_log_marginal(counts: dict[str, int], vocab_size: int,
                     alpha: float) -> float:
    """Log marginal likelihood of a bag of counts under a symmetric Dirichlet.

    ln[ Gamma(V*a) / Gamma(V*a + n) * prod_w Gamma(a + c_w) / Gamma(a) ]
    """
    if alpha <= 0:
        raise ValidationError("alpha must be positive")
    if vocab_size < 1:
        raise ValidationError("vocab_size must be >= 1")
    if any(c < 0 for c in counts.values()):
        raise ValidationError("counts must be non-negative")
    if vocab_size < sum(1 for c in counts.values() if c > 0):
        raise ValidationError("vocab_size smaller than the number of distinct words")
    n = sum(counts.values())
    va = vocab_size * alpha
    value = math.lgamma(va) - math.lgamma(va + n)
    for c in counts.values():
        if c > 0:
            value += math.lgamma(alpha + c) - math.lgamma(alpha)
    return value


class BayesianSegmenter(BaseEstimator):
    """Exact DP segmenter maximizing the total DCM log marginal.

    Counts are over content-word norms; the vocabulary is the set of distinct
    content words in the meeting. Ties between partitions with equal score
    resolve toward the earliest boundaries.
    """

    def __init__(self, n_segments: int = 14, alpha: float = 0.2):
        self.n_segments = n_segments
        self.alpha = alpha

    def segment(self, meeting: Meeting) -> list[Segment]:
        n = len(meeting.utterances)
        k = self.n_segments
        if n == 0:
            raise ValidationError("cannot segment an empty meeting")
        if k < 1 or k > n:
            raise ValidationError(
                f"n_segments must be in [1, {n}] for this meeting, got {k}")
        if self.alpha <= 0:
            raise ValidationError("alpha must be positive")

        bags = []
        vocab: set[str] = set()
        for utt in meeting.utterances:
            bag = Counter(t.norm for t in utt.tokens
                          if t.is_content and not t.is_filler)
            bags.append(bag)
            vocab.update(bag)
        v = max(len(vocab), 1)
        alpha = self.alpha

        # score[i][j] = DCM log marginal of utterances [i, j); built by
        # extending each row one utterance at a time so every token costs O(1).
        score = [[0.0] * (n + 1) for _ in range(n)]
        for i in range(n):
            counts: Counter = Counter()
            total = 0
            value = 0.0
            for j in range(i, n):
                for w, c in bags[j].items():
                    for _ in range(c):
                        value += math.log(alpha + counts[w]) - math.log(v * alpha + total)
                        counts[w] += 1
                        total += 1
                score[i][j + 1] = value

        NEG = float("-inf")
        # suffix[s][i]: best score splitting utterances [i, n) into s segments
        suffix = [[NEG] * (n + 1) for _ in range(k + 1)]
        choice = [[-1] * (n + 1) for _ in range(k + 1)]
        suffix[0][n] = 0.0
        for s in range(1, k + 1):
            for i in range(n - 1, -1, -1):
                best = NEG
                best_e = -1
                # strict improvement keeps the earliest end on ties
                for e in range(i + 1, n - (s - 1) + 1):
                    if suffix[s - 1][e] == NEG:
                        continue
                    cand = score[i][e] + suffix[s - 1][e]
                    if cand > best:
                        best = cand
                        best_e = e
                suffix[s][i] = best
                choice[s][i] = best_e

        if suffix[k][0] == NEG:
            raise ValidationError("no valid segmentation found")
        boundaries = []
        i, s = 0, k
        while s > 1:
            e = choice[s][i]
            boundaries.append(e)
            i, s = e, s - 1
        segments = _boundaries_to_segments(boundaries, n)
        check_partition(segments, n)
        return segments
