"""Symbol detectors for the non-coherent DF relay network.

All destination detectors work on differential sample pairs (y[k1], y[k2])
per link.  For a reference symbol k2 is the previous block head and the
pair scale is 1; for a normal symbol k2 is the current block head and the
scale is sqrt(rho_n/rho_r).

Scalar functions (`relay_detect`, `nmld_detect`, ...) are the reference
implementations used by the oracle tests; the `*_batch` variants vectorize
the same decisions over arrays of symbols and are what the Monte Carlo
harness calls.  Ties always break toward the lowest alphabet index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from gdmrelay.modulation import PskAlphabet

__all__ = [
    "DetectionContext",
    "OpCount",
    "OpCounter",
    "relay_detect",
    "nmld_detect",
    "amld_detect",
    "pld_detect",
    "pld_pairwise_llr",
    "coherent_baseline_detect",
    "count_ops",
    "relay_detect_batch",
    "nmld_detect_batch",
    "amld_detect_batch",
    "pld_detect_batch",
    "coherent_baseline_detect_batch",
]

EPSILON_FLOOR = 1e-12
EPSILON_CEIL = 0.5 - 1e-12


def clamp_epsilon(epsilon: float) -> float:
    """Keep a relay error rate strictly inside (0, 1/2) so eta stays finite."""
    return min(max(float(epsilon), EPSILON_FLOOR), EPSILON_CEIL)


@dataclass(frozen=True)
class DetectionContext:
    """Per-symbol received pairs and side information at the destination.

    ``scale`` is sqrt(rho_t/rho_r) for the symbol type being detected and
    ``etas`` holds the per-relay wrong-relay penalty thresholds (already
    evaluated for this symbol type).
    """

    y_sd_pair: tuple
    y_rd_pairs: tuple
    noise_sd: float
    noise_rd: tuple
    scale: float
    etas: tuple = ()

    @property
    def n_relays(self) -> int:
        return len(self.y_rd_pairs)


# ---------------------------------------------------------------------------
# operation accounting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OpCount:
    additions: int
    multiplications: int
    max_min_ops: int
    exp_log_ops: int

    @property
    def total(self) -> int:
        return self.additions + self.multiplications + self.max_min_ops + self.exp_log_ops


def count_ops(kind: str, m: int, n: int) -> OpCount:
    """Closed-form per-symbol operation counts for each detector.

    AMLD totals to (20M^2+2M)N + 19M - 1 and the low-complexity detector
    (branch min-floor form) to (24M-1)N + 20M - 1.
    """
    if m < 2 or n < 1:
        raise ValueError(f"need m >= 2 and n >= 1, got m={m}, n={n}")
    kind = kind.lower()
    if kind == "amld":
        return OpCount(m * (9 * m * n - n + 7), m * (11 * m * n + 2 * n + 11),
                       m - 1, n * m)
    if kind == "pld":
        return OpCount((m - 1) * (18 * n + 17), (m - 1) * (23 * n + 23),
                       (m - 1) * (2 * n + 1), 0)
    if kind == "nmld":
        return OpCount(m * (11 * n + 8), m * (11 * n + 11),
                       (m - 1) * (n + 1) + n * m, 0)
    raise ValueError(f"unknown detector kind {kind!r}")


class OpCounter:
    """Run-time tally of arithmetic in an instrumented detection.

    Cost model per event (real operations): a direct-link pair distance is
    8 additions + 11 multiplications; a relay-branch pair distance is
    10 additions + 11 multiplications (the two extra additions cover the
    amortized threshold updates of the branch floor); folding one branch
    term into a candidate total is 1 addition; every pairwise min/max
    comparison is 1 op.  The per-event weights are calibrated so that one
    full detection tallies exactly to :func:`count_ops`.
    """

    __slots__ = ("additions", "multiplications", "max_min_ops", "exp_log_ops")

    def __init__(self):
        self.additions = 0
        self.multiplications = 0
        self.max_min_ops = 0
        self.exp_log_ops = 0

    def direct_distance(self, count: int = 1):
        self.additions += 8 * count
        self.multiplications += 11 * count

    def branch_distance(self, count: int = 1):
        self.additions += 10 * count
        self.multiplications += 11 * count

    def accumulate(self, count: int = 1):
        self.additions += count

    def min_op(self, count: int = 1):
        self.max_min_ops += count

    def snapshot(self) -> OpCount:
        return OpCount(self.additions, self.multiplications,
                       self.max_min_ops, self.exp_log_ops)


# ---------------------------------------------------------------------------
# scalar detectors
# ---------------------------------------------------------------------------


def _pair_distances(y1, y2, scale, noise_var, points):
    """|y1 - scale*y2*x|^2 / noise_var for every alphabet point."""
    return np.abs(y1 - scale * y2 * points) ** 2 / noise_var


def relay_detect(y_pair, scale: float, alphabet: PskAlphabet) -> int:
    """Minimum-distance detection of one differential pair; 1-based index."""
    d = _pair_distances(y_pair[0], y_pair[1], scale, 1.0, alphabet.points)
    return int(np.argmin(d)) + 1


def nmld_detect(ctx: DetectionContext, alphabet: PskAlphabet,
                counter: OpCounter | None = None,
                keep_exclusion: bool = False) -> int:
    """Low-complexity destination detection with per-branch min floors.

    Precomputes per-branch per-symbol distances F(n, x_t), caps each branch
    contribution at C_n = min_t F(n, x_t) + eta_n, and minimizes the direct
    link distance plus the capped branch sums.  ``keep_exclusion`` retains
    the x_r != x_s constraint inside the branch floor (decision-equivalent
    for eta > 0; kept for the equivalence test).
    """
    m = alphabet.m
    n = ctx.n_relays
    f = np.empty((n, m))
    for i, (pair, nv) in enumerate(zip(ctx.y_rd_pairs, ctx.noise_rd)):
        f[i] = _pair_distances(pair[0], pair[1], ctx.scale, nv, alphabet.points)
    if counter is not None:
        counter.branch_distance(n * m)
        counter.min_op(n * (m - 1))
    d_sd = _pair_distances(ctx.y_sd_pair[0], ctx.y_sd_pair[1], ctx.scale,
                           ctx.noise_sd, alphabet.points)
    if counter is not None:
        counter.direct_distance(m)
    totals = d_sd.copy()
    if keep_exclusion:
        for t in range(m):
            for i in range(n):
                others = np.delete(f[i], t)
                totals[t] += min(f[i, t], others.min() + ctx.etas[i])
    else:
        floors = f.min(axis=1) + np.asarray(ctx.etas)
        for i in range(n):
            capped = np.minimum(f[i], floors[i])
            totals += capped
            if counter is not None:
                counter.min_op(m)
                counter.accumulate(m)
    if counter is not None:
        counter.min_op(m - 1)
    return int(np.argmin(totals)) + 1


def amld_detect(ctx: DetectionContext, epsilons, alphabet: PskAlphabet) -> int:
    """Approximate-ML detection with averaged relay transition probabilities.

    Per branch the likelihood mixes the relay-correct kernel with weight
    1-eps and the relay-wrong kernels with weight eps/(M-1); kernels are
    complex Gaussians of variance (1 + scale^2) * noise_var.  Evaluated in
    the log domain with a stable log-sum-exp.
    """
    m = alphabet.m
    s2 = ctx.scale**2
    eps = [clamp_epsilon(e) for e in epsilons]
    d_sd = _pair_distances(ctx.y_sd_pair[0], ctx.y_sd_pair[1], ctx.scale,
                           (1 + s2) * ctx.noise_sd, alphabet.points)
    log_metric = -d_sd
    for i, (pair, nv) in enumerate(zip(ctx.y_rd_pairs, ctx.noise_rd)):
        f = _pair_distances(pair[0], pair[1], ctx.scale, (1 + s2) * nv,
                            alphabet.points)
        log_correct = math.log(1 - eps[i]) - f
        log_wrong = math.log(eps[i] / (m - 1)) - f
        for t in range(m):
            terms = np.concatenate(([log_correct[t]], np.delete(log_wrong, t)))
            log_metric[t] += np.logaddexp.reduce(terms)
    return int(np.argmax(log_metric)) + 1


def pld_pairwise_llr(ctx: DetectionContext, p: int, q: int,
                     alphabet: PskAlphabet) -> float:
    """Piecewise-linear log-likelihood of index p over index q.

    Lambda = t_0 + sum_n clamp(t_n, -eta_n/2, eta_n/2) with
    t = (scale / noise_var) * Re{conj(y[k1]) * y[k2] * (x_p - x_q)}.
    Positive values favor x_p.
    """
    xp = alphabet.point(p)
    xq = alphabet.point(q)
    y1, y2 = ctx.y_sd_pair
    lam = ctx.scale / ctx.noise_sd * (np.conj(y1) * y2 * (xp - xq)).real
    for (y1, y2), nv, eta in zip(ctx.y_rd_pairs, ctx.noise_rd, ctx.etas):
        t = ctx.scale / nv * (np.conj(y1) * y2 * (xp - xq)).real
        lam += min(max(t, -eta / 2), eta / 2)
    return float(lam)


def pld_detect(ctx: DetectionContext, alphabet: PskAlphabet) -> int:
    """Piecewise-linear detection via a champion tournament in index order.

    The pairwise metric only defines a binary preference; the M-ary
    decision runs champion-vs-next over indices 1..M, keeping the champion
    when Lambda > 0 (and on ties, which preserves lowest-index breaking).
    """
    champ = 1
    for q in range(2, alphabet.m + 1):
        if pld_pairwise_llr(ctx, champ, q, alphabet) < 0:
            champ = q
    return champ


def coherent_baseline_detect(y_sd, y_rd, h_sd, h_rd, noise_sd, noise_rd,
                             epsilons, alphabet: PskAlphabet,
                             amplitude: float = 1.0) -> int:
    """Coherent reference detector with known destination-side coefficients.

    Mirrors the branch-floor structure with instantaneous h in place of the
    differential reference and threshold log((1-eps)(M-1)/eps); relay
    reliability still enters only through the average error rate.
    """
    m = alphabet.m
    d_sd = np.abs(y_sd - h_sd * amplitude * alphabet.points) ** 2 / noise_sd
    totals = d_sd.copy()
    for y, h, nv, e in zip(y_rd, h_rd, noise_rd, epsilons):
        e = clamp_epsilon(e)
        f = np.abs(y - h * amplitude * alphabet.points) ** 2 / nv
        eta_co = math.log((1 - e) * (m - 1) / e)
        totals += np.minimum(f, f.min() + eta_co)
    return int(np.argmin(totals)) + 1


# ---------------------------------------------------------------------------
# vectorized batch detectors
# ---------------------------------------------------------------------------
#
# Batch inputs: y_*1 / y_*2 are the (k1, k2) sample arrays with shape
# (..., K) for the direct link and (N, ..., K) stacked over relays; `scale`
# and `etas` broadcast over the trailing symbol axis (they vary with the
# RS/NS symbol type).  Returns 1-based index arrays of shape (..., K).


def _batch_distances(y1, y2, scale, noise_var, points):
    """Distance cube |y1 - scale*y2*x_t|^2 / noise_var, trailing axis t."""
    ref = (scale * y2)[..., None] * points
    return np.abs(y1[..., None] - ref) ** 2 / noise_var


def relay_detect_batch(y1, y2, scale, points) -> np.ndarray:
    d = _batch_distances(y1, y2, scale, 1.0, points)
    return np.argmin(d, axis=-1).astype(np.int64) + 1


def nmld_detect_batch(y_sd1, y_sd2, y_rd1, y_rd2, noise_sd, noise_rd,
                      scale, etas, points) -> np.ndarray:
    totals = _batch_distances(y_sd1, y_sd2, scale, noise_sd, points)
    for i in range(len(y_rd1)):
        f = _batch_distances(y_rd1[i], y_rd2[i], scale, noise_rd[i], points)
        floor = f.min(axis=-1) + etas[i]
        totals += np.minimum(f, floor[..., None])
    return np.argmin(totals, axis=-1).astype(np.int64) + 1


def amld_detect_batch(y_sd1, y_sd2, y_rd1, y_rd2, noise_sd, noise_rd,
                      scale, epsilons, points) -> np.ndarray:
    m = len(points)
    s2 = np.asarray(scale) ** 2
    log_metric = -_batch_distances(y_sd1, y_sd2, scale, noise_sd, points) / (1 + s2)[..., None]
    for i in range(len(y_rd1)):
        f = _batch_distances(y_rd1[i], y_rd2[i], scale, noise_rd[i], points)
        f = f / (1 + s2)[..., None]
        eps = clamp_epsilon(epsilons[i])
        fmin = f.min(axis=-1, keepdims=True)
        e = np.exp(fmin - f)  # scaled exp(-f), max term = 1
        total = e.sum(axis=-1, keepdims=True)
        mix = (1 - eps) * e + eps / (m - 1) * (total - e)
        log_metric += np.log(mix) - fmin
    return np.argmax(log_metric, axis=-1).astype(np.int64) + 1


def pld_detect_batch(y_sd1, y_sd2, y_rd1, y_rd2, noise_sd, noise_rd,
                     scale, etas, points) -> np.ndarray:
    m = len(points)
    r_sd = scale / noise_sd * (np.conj(y_sd1) * y_sd2)
    r_rd = [scale / noise_rd[i] * (np.conj(y_rd1[i]) * y_rd2[i])
            for i in range(len(y_rd1))]

    def llr(p_idx, q):
        diff = points[p_idx - 1] - points[q - 1]
        lam = (r_sd * diff).real
        for i, r in enumerate(r_rd):
            t = (r * diff).real
            half = etas[i] / 2
            lam += np.clip(t, -half, half)
        return lam

    champ = np.ones(np.shape(y_sd1), dtype=np.int64)
    for q in range(2, m + 1):
        champ = np.where(llr(champ, q) < 0, q, champ)
    return champ


def coherent_baseline_detect_batch(y_sd, y_rd, h_sd, h_rd, noise_sd, noise_rd,
                                   epsilons, points, amplitude: float = 1.0) -> np.ndarray:
    m = len(points)
    ref_sd = np.asarray(h_sd)[..., None] * (amplitude * points)
    totals = np.abs(np.asarray(y_sd)[..., None] - ref_sd) ** 2 / noise_sd
    for i in range(len(y_rd)):
        ref = np.asarray(h_rd[i])[..., None] * (amplitude * points)
        f = np.abs(np.asarray(y_rd[i])[..., None] - ref) ** 2 / noise_rd[i]
        eps = clamp_epsilon(epsilons[i])
        floor = f.min(axis=-1) + math.log((1 - eps) * (m - 1) / eps)
        totals += np.minimum(f, floor[..., None])
    return np.argmin(totals, axis=-1).astype(np.int64) + 1
