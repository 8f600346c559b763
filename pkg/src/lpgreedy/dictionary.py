"""Finite symmetric dictionaries, weak greedy selection, target generation.

A dictionary stores one representative per symmetric pair {g, -g}; selection
always scans both signs, encoded as a signed 1-based index (+i picks g_i,
-i picks -g_i).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .space import (DualFunctional, Element, LpSpace, pnorm, pnorm_rows)

DICTIONARY_KINDS = ("canonical", "random_gauss", "trig_grid", "coherent")


@dataclass
class Dictionary:
    """Ordered set of unit-norm atoms spanning the whole space.

    ``matrix`` stacks the atom coordinates row-wise for vectorized scans;
    treat instances as immutable after construction.
    """

    space: LpSpace
    elements: list
    kind_tag: str
    seed: int
    matrix: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.matrix is None:
            self.matrix = np.array([e.coords for e in self.elements])

    def __len__(self) -> int:
        return len(self.elements)

    def atom(self, signed_index: int) -> np.ndarray:
        """Atom for a signed 1-based index; the sign selects g or -g."""
        if signed_index == 0 or abs(signed_index) > len(self.elements):
            raise IndexError(f"signed index {signed_index} out of range")
        v = self.matrix[abs(signed_index) - 1]
        return v if signed_index > 0 else -v

    def spec_string(self) -> str:
        return f"dict:{self.kind_tag},N={len(self.elements)},seed={self.seed}"


@dataclass(frozen=True)
class TargetSpec:
    """How to generate a target: inside the hull, or near it with noise."""

    mode: str  # a1_sparse | a1_dense | general_plus_noise
    k: int = 1
    eps: float = 0.0
    seed: int = 0
    a_eps: float = 1.0

    def __post_init__(self):
        if self.mode not in ("a1_sparse", "a1_dense", "general_plus_noise"):
            raise ValueError(f"unknown target mode {self.mode!r}")
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")


@dataclass(frozen=True)
class Target:
    """Generated target with its certificate metadata."""

    f: Element
    spec: TargetSpec
    certificate: Optional[tuple] = None  # ((signed_index, weight), ...)
    f_clean: Optional[Element] = None    # the in-hull element for noisy mode
    in_hull: bool = True

    @property
    def eps(self) -> float:
        return self.spec.eps

    @property
    def a_eps(self) -> float:
        return self.spec.a_eps


def build_dictionary(space: LpSpace, kind: str, size: int, seed: int = 0) -> Dictionary:
    """Deterministically build a unit-norm, full-rank dictionary.

    Kinds: "canonical" (standard basis, cycled if size > n), "random_gauss"
    (normalized Gaussian draws), "trig_grid" (sampled cosine profiles),
    "coherent" (a chain of highly correlated atoms).
    """
    n = space.n
    if kind not in DICTIONARY_KINDS:
        raise ValueError(f"unknown dictionary kind {kind!r}")
    if size < n:
        raise ValueError(f"dictionary does not span: size {size} < dimension {n}")
    rng = np.random.default_rng(seed)

    if kind == "canonical":
        rows = np.eye(n)[np.arange(size) % n]
    elif kind == "random_gauss":
        rows = rng.standard_normal((size, n))
    elif kind == "trig_grid":
        i = np.arange(n)
        rows = np.array([np.cos(np.pi * j * (i + 0.5) / n) if j > 0 else np.ones(n)
                         for j in range(size)])
    else:  # coherent
        mix, noise_amp = 0.95, np.sqrt(1.0 - 0.95 ** 2)
        g = rng.standard_normal(n)
        g /= np.linalg.norm(g)
        rows = [g]
        for _ in range(size - 1):
            w = rng.standard_normal(n)
            w /= np.linalg.norm(w)
            g = mix * rows[-1] + noise_amp * w
            g /= np.linalg.norm(g)
            rows.append(g)
        rows = np.array(rows)

    rows = rows / pnorm_rows(space.p, rows)[:, None]
    if np.linalg.matrix_rank(rows) < n:
        raise ValueError("dictionary does not span the space")
    elements = [Element(coords=r, space=space) for r in rows]
    return Dictionary(space=space, elements=elements, kind_tag=kind, seed=seed,
                      matrix=rows)


def greedy_select(F: DualFunctional, D: Dictionary, t: float,
                  rule: str = "exact_argmax") -> tuple:
    """Pick a signed atom with F(phi) >= t * max_g F(g).

    "exact_argmax" returns the maximizer (smallest index on ties, positive
    sign preferred); "threshold_first" returns the first atom in scan order
    clearing the threshold, which is what actually exercises t < 1.
    """
    if len(D.elements) == 0:
        raise ValueError("empty dictionary")
    if not (0.0 <= t <= 1.0):
        raise ValueError("t must lie in [0, 1]")
    vals = D.matrix @ F.coords
    if rule == "exact_argmax":
        i = int(np.argmax(np.abs(vals)))
        sign = 1 if vals[i] >= 0 else -1
        return sign * (i + 1), float(abs(vals[i]))
    if rule == "threshold_first":
        thr = t * float(np.max(np.abs(vals)))
        ok = (vals >= thr) | (-vals >= thr)
        i = int(np.argmax(ok))  # first True; the argmax atom always qualifies
        sign = 1 if vals[i] >= thr else -1
        return sign * (i + 1), float(sign * vals[i])
    raise ValueError(f"unknown selection rule {rule!r}")


def sample_a1_target(D: Dictionary, spec: TargetSpec) -> tuple:
    """Strict convex combination of signed atoms, with its certificate.

    Weights are drawn uniformly in [0.1, 1] and normalized, so every atom in
    the certificate carries mass bounded away from zero.
    """
    if spec.mode not in ("a1_sparse", "a1_dense"):
        raise ValueError("sample_a1_target requires an a1 mode")
    size = len(D.elements)
    k = size if spec.mode == "a1_dense" else spec.k
    if not (1 <= k <= size):
        raise ValueError(f"sparsity k={k} out of range for dictionary of size {size}")
    rng = np.random.default_rng(spec.seed)
    idx = rng.choice(size, size=k, replace=False)
    signs = rng.integers(0, 2, size=k) * 2 - 1
    w = rng.uniform(0.1, 1.0, size=k)
    w = w / w.sum()
    coords = (w[:, None] * signs[:, None] * D.matrix[idx]).sum(axis=0)
    cert = tuple((int(s * (i + 1)), float(wi)) for i, s, wi in zip(idx, signs, w))
    return Element(coords=coords, space=D.space), cert


def perturb_target(f_eps: Element, eps: float, seed: int = 0) -> Element:
    """Add noise of norm at most eps (magnitude uniform in [0, eps])."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if eps == 0:
        return f_eps
    space = f_eps.space
    rng = np.random.default_rng(seed)
    d = rng.standard_normal(space.n)
    d = d / pnorm(space.p, d)
    mag = rng.uniform(0.0, eps)
    return Element(coords=f_eps.coords + mag * d, space=space)


def make_target(D: Dictionary, spec: TargetSpec) -> Target:
    """Generate the target an experiment runs on, certificate included."""
    if spec.mode in ("a1_sparse", "a1_dense"):
        f, cert = sample_a1_target(D, spec)
        return Target(f=f, spec=spec, certificate=cert, f_clean=f, in_hull=True)
    clean_spec = TargetSpec(mode="a1_sparse", k=spec.k, seed=spec.seed)
    f_clean, cert = sample_a1_target(D, clean_spec)
    f = perturb_target(f_clean, spec.eps, seed=spec.seed + 1)
    return Target(f=f, spec=spec, certificate=cert, f_clean=f_clean, in_hull=False)
