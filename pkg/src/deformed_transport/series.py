"""Order-3 truncated polynomial maps ``R^n -> R^m`` without constant term.

``P(u) = c1 u + c2 u u + c3 u u u`` with ``c2`` and ``c3`` symmetric in
their input slots.  Composition and reversion are exact polynomial algebra
on the coefficients, truncated after the cubic term.  Leading batch axes on
the coefficients are carried through every operation.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

__all__ = ["PolyMap", "symmetrize"]


def symmetrize(T: np.ndarray, k: int) -> np.ndarray:
    """Average over all permutations of the last `k` axes."""
    if k < 2:
        return T
    lead = T.ndim - k
    perms = list(itertools.permutations(range(k)))
    acc = np.zeros_like(T)
    for p in perms:
        acc = acc + np.transpose(T, tuple(range(lead)) + tuple(lead + i for i in p))
    return acc / len(perms)


@dataclass(frozen=True)
class PolyMap:
    c1: np.ndarray  # (..., m, n)
    c2: np.ndarray  # (..., m, n, n)
    c3: np.ndarray  # (..., m, n, n, n)

    @classmethod
    def identity(cls, n: int) -> "PolyMap":
        return cls(np.eye(n), np.zeros((n, n, n)), np.zeros((n, n, n, n)))

    @property
    def out_dim(self) -> int:
        return self.c1.shape[-2]

    def __call__(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return (
            np.einsum("...ma,...a->...m", self.c1, u)
            + np.einsum("...mab,...a,...b->...m", self.c2, u, u)
            + np.einsum("...mabc,...a,...b,...c->...m", self.c3, u, u, u)
        )

    def jacobian(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return (
            self.c1
            + 2.0 * np.einsum("...mab,...b->...ma", self.c2, u)
            + 3.0 * np.einsum("...mabc,...b,...c->...ma", self.c3, u, u)
        )

    def compose(self, inner: "PolyMap") -> "PolyMap":
        """Coefficients of ``self(inner(u))`` through third order."""
        A1, A2, A3 = self.c1, self.c2, self.c3
        B1, B2, B3 = inner.c1, inner.c2, inner.c3
        c1 = np.einsum("...ma,...ai->...mi", A1, B1)
        c2 = np.einsum("...ma,...aij->...mij", A1, B2) + np.einsum("...mab,...ai,...bj->...mij", A2, B1, B1)
        c3 = (
            np.einsum("...ma,...aijk->...mijk", A1, B3)
            + 2.0 * np.einsum("...mab,...ai,...bjk->...mijk", A2, B1, B2)
            + np.einsum("...mabc,...ai,...bj,...ck->...mijk", A3, B1, B1, B1)
        )
        return PolyMap(c1, symmetrize(c2, 2), symmetrize(c3, 3))

    def inverse(self) -> "PolyMap":
        """Series reversion: ``self.compose(inv)`` is the identity through third order."""
        Q1 = np.linalg.inv(self.c1)
        Q2 = -np.einsum("...ma,...abc,...bi,...cj->...mij", Q1, self.c2, Q1, Q1)
        Q2 = symmetrize(Q2, 2)
        inner3 = 2.0 * np.einsum("...abc,...bi,...cjk->...aijk", self.c2, Q1, Q2) + np.einsum(
            "...abcd,...bi,...cj,...dk->...aijk", self.c3, Q1, Q1, Q1
        )
        Q3 = -np.einsum("...ma,...aijk->...mijk", Q1, inner3)
        return PolyMap(Q1, Q2, symmetrize(Q3, 3))

    def __sub__(self, other: "PolyMap") -> "PolyMap":
        return PolyMap(self.c1 - other.c1, self.c2 - other.c2, self.c3 - other.c3)

    def max_abs(self) -> float:
        return float(max(np.max(np.abs(self.c1)), np.max(np.abs(self.c2)), np.max(np.abs(self.c3))))
