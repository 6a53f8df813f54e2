"""M-PSK alphabet and generalized differential frame encoding.

A frame of K information symbols (plus one initialization symbol) is split
into blocks of length L.  The first symbol of each block is a reference
symbol (RS): it is differentially chained to the previous block's RS and
transmitted with power ``rho_r``.  The remaining L-1 normal symbols (NS)
are chained to their own block head and transmitted with power ``rho_n``.
Block length L=1 with equal powers reduces to classical differential PSK.

Symbols are kept as alphabet indices (1..M); complex values are derived on
demand so that differential products never accumulate floating-point phase
error over long frames.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "PskAlphabet",
    "PowerAllocation",
    "GdmFrameConfig",
    "EncodedFrame",
    "make_alphabet",
    "gdm_encode",
    "noiseless_decode",
]

_POWER_TOL = 1e-9


@dataclass(frozen=True)
class PskAlphabet:
    """The M points ``exp(j*2*pi*(t-1)/M)``, t = 1..M, in index order."""

    m: int
    points: np.ndarray

    def point(self, index: int) -> complex:
        """Complex value of 1-based alphabet index."""
        return complex(self.points[index - 1])


def make_alphabet(m: int) -> PskAlphabet:
    """Build the M-PSK alphabet (M-th roots of unity).

    Raises ValueError for m < 2.
    """
    if not isinstance(m, (int, np.integer)) or m < 2:
        raise ValueError(f"modulation order must be an integer >= 2, got {m!r}")
    points = np.exp(2j * np.pi * np.arange(m) / m)
    points[0] = 1.0 + 0.0j
    points.setflags(write=False)
    return PskAlphabet(m=int(m), points=points)


@dataclass(frozen=True)
class PowerAllocation:
    """Per-symbol-type transmit powers (linear scale).

    ``rho_r`` is the reference-symbol power, ``rho_n`` the normal-symbol
    power and ``p_s`` the frame-average power.  The constraint
    ``rho_r + (L-1)*rho_n == L*p_s`` is checked by the owning frame config
    since it depends on L.
    """

    rho_r: float
    rho_n: float
    p_s: float

    def __post_init__(self):
        for name in ("rho_r", "rho_n", "p_s"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")

    @property
    def ns_scale(self) -> float:
        """Amplitude ratio sqrt(rho_n / rho_r) applied to normal symbols."""
        return float(np.sqrt(self.rho_n / self.rho_r))


def equal_power(p_s: float = 1.0) -> PowerAllocation:
    """All symbols at the average power (the classical-DM allocation)."""
    return PowerAllocation(rho_r=p_s, rho_n=p_s, p_s=p_s)


@dataclass(frozen=True)
class GdmFrameConfig:
    """Shape of one transmission frame: K info symbols, block length L, order M."""

    k_frame: int
    l_block: int
    m: int
    power: PowerAllocation

    def __post_init__(self):
        if self.l_block < 1:
            raise ValueError(f"block length must be >= 1, got {self.l_block}")
        if self.k_frame < 1:
            raise ValueError(f"frame length must be >= 1, got {self.k_frame}")
        if self.m < 2:
            raise ValueError(f"modulation order must be >= 2, got {self.m}")
        if (self.k_frame + 1) % self.l_block != 0:
            raise ValueError(
                f"(K+1) must be a multiple of L: K={self.k_frame}, L={self.l_block}"
            )
        p = self.power
        if abs(p.rho_r + (self.l_block - 1) * p.rho_n - self.l_block * p.p_s) > _POWER_TOL:
            raise ValueError(
                "power allocation violates rho_r + (L-1)*rho_n = L*p_s: "
                f"rho_r={p.rho_r}, rho_n={p.rho_n}, L={self.l_block}, p_s={p.p_s}"
            )

    @property
    def n_blocks(self) -> int:
        return (self.k_frame + 1) // self.l_block

    def ref_mask(self) -> np.ndarray:
        """Boolean mask over positions 0..K, True at block heads."""
        mask = np.zeros(self.k_frame + 1, dtype=bool)
        mask[:: self.l_block] = True
        return mask


@dataclass(frozen=True)
class EncodedFrame:
    """One encoded frame: K+1 transmitted samples plus the info indices."""

    u: np.ndarray
    info: np.ndarray
    ref_mask: np.ndarray


def _phase_indices(info: np.ndarray, cfg: GdmFrameConfig) -> np.ndarray:
    """Cumulative 0-based phase index of every transmitted sample.

    Position 0 carries phase 0.  Block heads accumulate their own offsets
    across blocks; in-block symbols add their offset to the head phase.
    """
    k, l, m = cfg.k_frame, cfg.l_block, cfg.m
    offsets = np.asarray(info, dtype=np.int64) - 1
    phase = np.empty(k + 1, dtype=np.int64)
    phase[0] = 0
    if l == 1:
        phase[1:] = np.cumsum(offsets) % m
        return phase
    head_pos = np.arange(l, k + 1, l)
    head_phase = np.concatenate(([0], np.cumsum(offsets[head_pos - 1]) % m))
    blocks = np.arange(k + 1) // l
    phase = head_phase[blocks].copy()
    ns = ~cfg.ref_mask()
    phase[ns] = (phase[ns] + offsets[np.flatnonzero(ns) - 1]) % m
    return phase


def gdm_encode(info, cfg: GdmFrameConfig) -> EncodedFrame:
    """Differentially encode K information indices into K+1 samples.

    ``info`` holds 1-based alphabet indices for positions 1..K.  The sample
    at position 0 is the fixed initialization reference sqrt(rho_r).
    """
    info = np.asarray(info, dtype=np.int64)
    if info.shape != (cfg.k_frame,):
        raise ValueError(f"expected {cfg.k_frame} info symbols, got shape {info.shape}")
    if info.min(initial=cfg.m) < 1 or info.max(initial=1) > cfg.m:
        raise ValueError("info indices must lie in [1, M]")
    alphabet = make_alphabet(cfg.m)
    phase = _phase_indices(info, cfg)
    mask = cfg.ref_mask()
    amp = np.where(mask, np.sqrt(cfg.power.rho_r), np.sqrt(cfg.power.rho_n))
    u = amp * alphabet.points[phase]
    return EncodedFrame(u=u, info=info.copy(), ref_mask=mask)


def noiseless_decode(frame: EncodedFrame, cfg: GdmFrameConfig) -> np.ndarray:
    """Exact inverse of :func:`gdm_encode` on a clean frame."""
    m, l, k = cfg.m, cfg.l_block, cfg.k_frame
    phase = np.rint(np.angle(frame.u) * m / (2 * np.pi)).astype(np.int64) % m
    blocks = np.arange(k + 1) // l
    info = np.empty(k, dtype=np.int64)
    if l == 1:
        info = (phase[1:] - phase[:-1]) % m + 1
        return info
    head_phase = phase[:: l]
    # block-head info symbols (blocks 1..B-1)
    heads = np.arange(l, k + 1, l)
    info[heads - 1] = (head_phase[1:] - head_phase[:-1]) % m + 1
    ns = np.flatnonzero(~frame.ref_mask)
    info[ns - 1] = (phase[ns] - head_phase[blocks[ns]]) % m + 1
    return info
