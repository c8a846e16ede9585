"""Shared representation for several RKHS elements driven by one input stream.

Each element is ``sum_a p_a K(t_a, .) + sum_i q_i K(x_i, .)`` where ``t`` are
fixed anchor points (quadrature nodes, target centers, ...) and ``x_i`` are
the stream inputs seen so far. Besides the coefficients, every element keeps
the values of its sample part at all samples (``u``) and at all anchors
(``w``), which makes the rank-one step update and the norm O(k + n) instead
of O(k^2). All arrays carry a leading axis over independent runs.
"""

from __future__ import annotations

from typing import List, Optional

import numpy as np

from .kernel import Kernel


class SharedBasis:
    def __init__(self, kernel: Kernel, anchors, horizon: int, runs: int = 1):
        self.kernel = kernel
        self.anchors = np.asarray(anchors, dtype=float).reshape(-1)
        self.gram_aa = kernel.matrix(self.anchors, self.anchors)
        self.runs = runs
        self.horizon = horizon
        self.samples = np.zeros((runs, horizon))
        self.k = 0
        self.krow: Optional[np.ndarray] = None
        self.karow: Optional[np.ndarray] = None
        self._elements: List["BasisElement"] = []

    def element(self, anchor_coef=None) -> "BasisElement":
        e = BasisElement(self)
        if anchor_coef is not None:
            e.p += np.asarray(anchor_coef, dtype=float)
        self._elements.append(e)
        return e

    def advance(self, x) -> None:
        """Append ``x_k`` (one point per run) as the next sample center."""
        k = self.k
        if k >= self.horizon:
            raise IndexError("basis horizon exhausted")
        x = np.broadcast_to(np.asarray(x, dtype=float), (self.runs,))
        self.samples[:, k] = x
        self.krow = self.kernel(x[:, None], self.samples[:, :k + 1])
        self.karow = self.kernel(x[:, None], self.anchors[None, :])
        for e in self._elements:
            e.u[:, k] = np.einsum("rj,rj->r", e.q[:, :k], self.krow[:, :k])
        self.k = k + 1


class BasisElement:
    def __init__(self, basis: SharedBasis):
        r, n, T = basis.runs, basis.anchors.size, basis.horizon
        self.basis = basis
        self.p = np.zeros((r, n))
        self.q = np.zeros((r, T))
        self.u = np.zeros((r, T))
        self.w = np.zeros((r, n))

    def copy(self) -> "BasisElement":
        e = self.basis.element()
        e.p[:], e.q[:], e.u[:], e.w[:] = self.p, self.q, self.u, self.w
        return e

    def value_at_current(self) -> np.ndarray:
        """Value at the most recently advanced sample ``x_{k-1}``."""
        b = self.basis
        return np.einsum("ra,ra->r", self.p, b.karow) + self.u[:, b.k - 1]

    def scale(self, c) -> None:
        k = self.basis.k
        c = np.asarray(c, dtype=float).reshape(-1, 1)
        self.p *= c
        self.q[:, :k] *= c
        self.u[:, :k] *= c
        self.w *= c

    def add_current(self, beta) -> None:
        """Add ``beta * K(x_{k-1}, .)``."""
        b = self.basis
        k = b.k
        beta = np.broadcast_to(np.asarray(beta, dtype=float), (b.runs,))
        self.q[:, k - 1] += beta
        self.u[:, :k] += beta[:, None] * b.krow
        self.w += beta[:, None] * b.karow

    def add_anchor(self, coef) -> None:
        self.p += coef

    def add(self, other: "BasisElement", t: float = 1.0) -> None:
        self.p += t * other.p
        self.q += t * other.q
        self.u += t * other.u
        self.w += t * other.w

    def step(self, a: float, lam: float) -> None:
        """Apply ``I - a (K_x (x) K_x + lam I)`` at the current sample."""
        fx = self.value_at_current()
        self.scale(1.0 - a * lam)
        self.add_current(-a * fx)

    def inner(self, other: "BasisElement") -> np.ndarray:
        b = self.basis
        k = b.k
        pp = np.einsum("ra,ab,rb->r", self.p, b.gram_aa, other.p)
        cross = np.einsum("ra,ra->r", self.p, other.w) + np.einsum("ra,ra->r", other.p, self.w)
        qq = np.einsum("rj,rj->r", self.q[:, :k], other.u[:, :k])
        return pp + cross + qq

    def sqnorm(self) -> np.ndarray:
        return np.maximum(self.inner(self), 0.0)

    def norm(self) -> np.ndarray:
        return np.sqrt(self.sqnorm())

    def difference_norm(self, *others: "BasisElement", signs=None) -> np.ndarray:
        """``|| self - sum_i s_i others_i ||`` with default signs all +1."""
        signs = signs or [1.0] * len(others)
        tmp = BasisElement(self.basis)
        tmp.add(self)
        for s, o in zip(signs, others):
            tmp.add(o, -s)
        return tmp.norm()

    def to_expansions(self):
        from .rkhs import KernelExpansion
        b = self.basis
        out = []
        for r in range(b.runs):
            centers = np.concatenate([b.anchors, b.samples[r, :b.k]])
            coefs = np.concatenate([self.p[r], self.q[r, :b.k]])
            out.append(KernelExpansion(b.kernel, centers, coefs))
        return out
