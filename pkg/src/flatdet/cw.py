"""Twisted cochain complexes from CW data and combinatorial torsion.

Boundary words are integer combinations of group elements (exponent tuples
over the listed generators); a unitary character turns them into complex
boundary matrices, whose transposes give the twisted coboundary d.  The
combinatorial torsion is taken operationally as sdet(Delta|_L)^{1/2} for the
Gram Laplacian of that complex, which makes it directly comparable to the
spectral circle torsion without classical basis/ordering conventions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AcyclicityError, ShapeError
from .graded import GradedMap, acyclicity_check, graded_commutator, sdet_restricted, \
    split_complement
from .hodge import adjoint_codifferential


@dataclass
class TwistedCWData:
    """Cells per dimension, boundary words, and a unitary character.

    ``boundaries[d]`` describes the boundary of each d-cell as a matrix of
    group-ring elements: ``boundaries[d][i][j]`` is a list of
    ``(coefficient, exponents)`` pairs giving the coefficient of the i-th
    (d-1)-cell in the boundary of the j-th d-cell, with ``exponents`` a tuple
    of integer powers, one per generator.  ``character`` assigns each
    generator a unit-modulus complex number.
    """

    cells: list
    boundaries: dict
    generators: list
    character: dict

    def __post_init__(self):
        for g in self.generators:
            if g not in self.character:
                raise ShapeError(f"character misses generator {g!r}")
        for g, val in self.character.items():
            if abs(abs(complex(val)) - 1.0) > 1e-12:
                raise ShapeError(f"character value for {g!r} is not unimodular")

    def _apply_character(self, word):
        total = 0.0 + 0.0j
        for coeff, exponents in word:
            rho = 1.0 + 0.0j
            for g, e in zip(self.generators, exponents):
                rho *= complex(self.character[g]) ** int(e)
            total += coeff * rho
        return total

    def boundary_matrix(self, dim):
        """Complex boundary matrix of the d-cells after the character."""
        rows, cols = self.cells[dim - 1], self.cells[dim]
        words = self.boundaries.get(dim, [])
        mat = np.zeros((rows, cols), dtype=complex)
        for i in range(rows):
            for j in range(cols):
                word = words[i][j] if i < len(words) and j < len(words[i]) else []
                mat[i, j] = self._apply_character(word)
        return mat

    def to_json(self):
        return {
            "cells": list(self.cells),
            "generators": list(self.generators),
            "character": {g: [complex(v).real, complex(v).imag]
                          for g, v in self.character.items()},
            "boundaries": {
                str(d): [[[[int(c), list(map(int, e))] for c, e in entry]
                          for entry in row] for row in words]
                for d, words in self.boundaries.items()
            },
        }

    @classmethod
    def from_json(cls, data):
        character = {g: v[0] + 1j * v[1] for g, v in data["character"].items()}
        boundaries = {
            int(d): [[[(c, tuple(e)) for c, e in entry] for entry in row]
                     for row in words]
            for d, words in data["boundaries"].items()
        }
        return cls(list(data["cells"]), boundaries, list(data["generators"]), character)


def circle_cw(theta: float) -> TwistedCWData:
    """One 0-cell, one 1-cell, boundary word g - 1, character g -> e^{i theta}."""
    return TwistedCWData(
        cells=[1, 1],
        boundaries={1: [[[(1, (1,)), (-1, (0,))]]]},
        generators=["g"],
        character={"g": np.exp(1j * theta)},
    )


def lens_cw(p: int, q: int, k: int) -> TwistedCWData:
    """Standard one-cell-per-dimension CW structure of the lens space L(p, q).

    Boundary words: g - 1, then 1 + g + ... + g^{p-1}, then g^{q'} - 1 with
    q' the inverse of q mod p; character g -> e^{2 pi i k / p}.
    """
    if np.gcd(p, q) != 1:
        raise ShapeError("lens space parameters must be coprime")
    q_inv = pow(q, -1, p)
    full_sum = [(1, (j,)) for j in range(p)]
    return TwistedCWData(
        cells=[1, 1, 1, 1],
        boundaries={
            1: [[[(1, (1,)), (-1, (0,))]]],
            2: [[full_sum]],
            3: [[[(1, (q_inv,)), (-1, (0,))]]],
        },
        generators=["g"],
        character={"g": np.exp(2j * np.pi * k / p)},
    )


def build_twisted_cochain(data: TwistedCWData, tol: float = 1e-12) -> GradedMap:
    """Twisted coboundary d with blocks the character-applied boundary transposes."""
    dims = tuple(data.cells)
    n = len(dims) - 1
    boundary = [None] + [data.boundary_matrix(d) for d in range(1, n + 1)]
    for d in range(2, n + 1):
        prod = boundary[d - 1] @ boundary[d]
        if prod.size and np.abs(prod).max() > tol:
            raise ShapeError(f"boundary squared is nonzero between dims {d} and {d - 2}")
    blocks = [boundary[k + 1].T if k < n else None for k in range(n + 1)]
    d_map = GradedMap(dims, +1, blocks)
    if d_map.compose(d_map).norm() > tol:
        raise ShapeError("coboundary squared is nonzero")
    return d_map


def combinatorial_torsion(d: GradedMap, grams=None) -> float:
    """Torsion sdet([delta_G, d]|_L)^{1/2} with delta_G the Gram adjoint.

    Defaults to the identity Gram in the cell basis.  Requires the twisted
    complex to be acyclic.
    """
    acyclic, _ = acyclicity_check(d)
    if not acyclic:
        raise AcyclicityError("twisted complex is not acyclic; torsion undefined")
    if grams is None:
        grams = [np.eye(dim, dtype=complex) for dim in d.dims]
    delta = adjoint_codifferential(d, grams)
    laplace = graded_commutator(delta, d)
    split = split_complement(delta)
    val = sdet_restricted(laplace, split)
    return float(np.sqrt(val.real))
