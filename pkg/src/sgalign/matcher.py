"""Pairwise matching scores between two node-embedding sets.

Raw cosine similarities are turned into a probability-like matrix P in
[0, 1] with an explicit dustbin channel for non-matches, either by a plain
affine rescale ("raw") or by a dustbin-augmented dual softmax
("dual_softmax", the default).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, NumericError

# Floor keeps -log(P) bounded (~20.7), so flow costs stay interpretable
# against the default unmatched cost of 2.0.
P_FLOOR = 1e-9

MODE_RAW = "raw"
MODE_DUAL_SOFTMAX = "dual_softmax"


@dataclass(frozen=True)
class MatcherParams:
    # Temperature 0.07 keeps both halves of an under-segmented object above
    # the candidate threshold under dual-softmax column competition.
    dustbin_logit: float = 0.0
    temperature: float = 0.07
    mode: str = MODE_DUAL_SOFTMAX

    def __post_init__(self):
        if self.temperature <= 0:
            raise InvalidInputError(f"temperature must be > 0, got {self.temperature}")
        if self.mode not in (MODE_RAW, MODE_DUAL_SOFTMAX):
            raise InvalidInputError(f"unknown matcher mode {self.mode!r}")


@dataclass
class ScoreMatrix:
    """P in [0,1]^(I x J) plus the dustbin masses.

    dustbin_col[i] is the non-match mass of A-row i; dustbin_row[j] the
    non-match mass of B-column j.
    """

    P: np.ndarray
    dustbin_row: np.ndarray
    dustbin_col: np.ndarray
    mode: str

    @property
    def shape(self) -> tuple[int, int]:
        return self.P.shape


def cosine_scores(emb_a: np.ndarray, emb_b: np.ndarray) -> np.ndarray:
    """S[i, j] = <e_i, e_j> on defensively re-normalized embeddings."""
    emb_a = np.asarray(emb_a, dtype=float)
    emb_b = np.asarray(emb_b, dtype=float)
    if emb_a.size == 0 or emb_b.size == 0:
        return np.zeros((len(emb_a), len(emb_b)))
    out = []
    for name, emb in (("a", emb_a), ("b", emb_b)):
        norms = np.linalg.norm(emb, axis=1)
        zero = np.where(norms == 0)[0]
        if zero.size:
            raise NumericError(f"cosine_scores: zero-norm embedding {name}[{zero[0]}]")
        out.append(emb / norms[:, None])
    return out[0] @ out[1].T


def _softmax(x: np.ndarray, axis: int) -> np.ndarray:
    ex = np.exp(x - x.max(axis=axis, keepdims=True))
    return ex / ex.sum(axis=axis, keepdims=True)


def score_matrix(S: np.ndarray, params: MatcherParams = MatcherParams()) -> ScoreMatrix:
    """Convert raw similarities into the [0,1] score matrix with dustbin."""
    S = np.asarray(S, dtype=float)
    if not np.all(np.isfinite(S)):
        raise InvalidInputError("score_matrix: non-finite similarities")
    n_a, n_b = S.shape

    if params.mode == MODE_RAW:
        P = np.clip((S + 1.0) / 2.0, P_FLOOR, 1.0)
        bin_mass = 1.0 / (1.0 + np.exp(-params.dustbin_logit))
        return ScoreMatrix(
            P=P,
            dustbin_row=np.full(n_b, bin_mass),
            dustbin_col=np.full(n_a, bin_mass),
            mode=params.mode,
        )

    if n_a == 0 or n_b == 0:
        # Degenerate sides: every row/column softmax collapses onto the dustbin.
        return ScoreMatrix(
            P=np.zeros((n_a, n_b)),
            dustbin_row=np.ones(n_b),
            dustbin_col=np.ones(n_a),
            mode=params.mode,
        )

    logits = S / params.temperature
    bin_logit = params.dustbin_logit / params.temperature
    # Row softmax over J real columns plus the dustbin column.
    aug_rows = np.concatenate([logits, np.full((n_a, 1), bin_logit)], axis=1)
    r = _softmax(aug_rows, axis=1)
    # Column softmax over I real rows plus the dustbin row.
    aug_cols = np.concatenate([logits, np.full((1, n_b), bin_logit)], axis=0)
    c = _softmax(aug_cols, axis=0)
    P = np.maximum(r[:, :n_b] * c[:n_a, :], P_FLOOR)
    return ScoreMatrix(
        P=P,
        dustbin_row=c[n_a, :].copy(),
        dustbin_col=r[:, n_b].copy(),
        mode=params.mode,
    )
