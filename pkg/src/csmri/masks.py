"""Cartesian undersampling masks and per-epoch subset splits.

Masks select full vertical readout lines; density along the horizontal
phase-encode axis falls off as 1 / (1 + decay * |k| / k_max) around the
DC column, and a centered block of `acs_size` lines is always fully
sampled. Subset splits share the central ACS square and partition the
remaining sampled points at random.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class SamplingMask:
    """Boolean k-space sampling pattern (True = sampled) plus the size of
    the centered, fully-sampled ACS block."""

    sampled: np.ndarray
    acs: tuple[int, int] = (0, 0)
    m: int = field(init=False)

    def __post_init__(self):
        arr = np.asarray(self.sampled, dtype=bool)
        if arr.ndim != 2:
            raise ValueError("mask must be 2D")
        object.__setattr__(self, "sampled", arr)
        object.__setattr__(self, "m", int(arr.sum()))
        ah, aw = self.acs
        if ah < 0 or aw < 0 or ah > arr.shape[0] or aw > arr.shape[1]:
            raise ValueError(f"ACS block {self.acs} does not fit in {arr.shape}")
        if ah and aw and not arr[acs_slices(arr.shape, (ah, aw))].all():
            raise ValueError("ACS block is not fully sampled")

    @property
    def shape(self) -> tuple[int, int]:
        return self.sampled.shape

    @classmethod
    def full(cls, height: int, width: int) -> "SamplingMask":
        return cls(np.ones((height, width), dtype=bool),
                   acs=(height, width))


def acs_slices(shape: tuple[int, int], acs: tuple[int, int]) -> tuple[slice, slice]:
    """Row/column slices of the centered ACS block (DC at H//2, W//2)."""
    h, w = shape
    ah, aw = acs
    r0 = h // 2 - ah // 2
    c0 = w // 2 - aw // 2
    return slice(r0, r0 + ah), slice(c0, c0 + aw)


@dataclass(frozen=True)
class MaskSpec:
    """Parameters for line-mask generation."""

    height: int
    width: int
    reduction: float
    acs_size: int = 20
    density_decay: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise ValueError("mask dimensions must be positive")
        if self.reduction < 1:
            raise ValueError(f"reduction must be >= 1, got {self.reduction}")
        if self.acs_size > min(self.height, self.width):
            raise ValueError("acs_size exceeds the mask extent")
        if self.density_decay <= 0:
            raise ValueError("density_decay must be positive")


@dataclass(frozen=True)
class SubsetPair:
    """A split of one sampling mask into a network-input subset and a
    held-out loss subset. Both contain the ACS square; their union is the
    original mask."""

    train: SamplingMask
    loss: SamplingMask


def generate_cartesian_mask(spec: MaskSpec) -> SamplingMask:
    """Draw a 1D Cartesian variable-density line mask.

    The number of sampled lines is round(width / reduction); the centered
    acs_size lines are always included and the rest are drawn without
    replacement with probability proportional to
    1 / (1 + density_decay * |k| / k_max). Deterministic given spec.seed.
    """
    h, w = spec.height, spec.width
    n_lines = int(round(w / spec.reduction))
    if n_lines < spec.acs_size:
        raise ValueError(
            f"reduction {spec.reduction} leaves {n_lines} lines, fewer than "
            f"the {spec.acs_size} ACS lines")

    center = w // 2
    c0 = center - spec.acs_size // 2
    acs_cols = np.arange(c0, c0 + spec.acs_size)
    chosen = set(acs_cols.tolist())

    n_extra = n_lines - spec.acs_size
    if n_extra > 0:
        cand = np.array([c for c in range(w) if c not in chosen])
        k_max = max(w // 2, 1)
        dist = np.abs(cand - center) / k_max
        p = 1.0 / (1.0 + spec.density_decay * dist)
        p /= p.sum()
        rng = np.random.default_rng(spec.seed)
        extra = rng.choice(cand, size=n_extra, replace=False, p=p)
        chosen.update(int(c) for c in extra)

    sampled = np.zeros((h, w), dtype=bool)
    sampled[:, sorted(chosen)] = True
    acs = (min(spec.acs_size, h), spec.acs_size)
    return SamplingMask(sampled, acs=acs)


def split_subsets(mask: SamplingMask, fraction: float, acs_size: int,
                  seed: int, by_lines: bool = False) -> SubsetPair:
    """Split a mask's sampled points into overlapping train/loss subsets.

    The central acs_size x acs_size square goes to both subsets; of the
    remaining sampled points a random `fraction` share joins the train
    subset and the complement joins the loss subset. With by_lines=True
    whole readout lines are assigned instead (the full central acs_size
    lines are then shared). Deterministic given seed.
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must be in (0, 1), got {fraction}")
    sampled = mask.sampled
    h, w = sampled.shape
    acs = (min(acs_size, h), min(acs_size, w))
    sl = acs_slices((h, w), acs)
    if not sampled[sl].all():
        raise ValueError("mask does not contain the requested ACS square")

    shared = np.zeros_like(sampled)
    rng = np.random.default_rng(seed)

    if by_lines:
        shared[:, sl[1]] = sampled[:, sl[1]]
        rest_cols = np.flatnonzero(sampled.any(axis=0) & ~shared.any(axis=0))
        perm = rng.permutation(rest_cols)
        n_train = int(round(fraction * len(rest_cols)))
        train = shared.copy()
        train[:, perm[:n_train]] = sampled[:, perm[:n_train]]
        loss = shared.copy()
        loss[:, perm[n_train:]] = sampled[:, perm[n_train:]]
    else:
        shared[sl] = True
        rest = np.flatnonzero(sampled.ravel() & ~shared.ravel())
        perm = rng.permutation(rest)
        n_train = int(round(fraction * len(rest)))
        train = shared.copy()
        train.ravel()[perm[:n_train]] = True
        loss = shared.copy()
        loss.ravel()[perm[n_train:]] = True

    return SubsetPair(train=SamplingMask(train, acs=acs),
                      loss=SamplingMask(loss, acs=acs))
