"""Finite-dimensional graded complexes and restricted superdeterminants.

A graded vector space is a list of dimensions indexed by degree; a graded map
of shift ``s`` sends degree ``k`` to degree ``k + s`` and is stored as one
complex block per source degree.  The central objects are a nilpotent degree
``-1`` map ``delta`` (a codifferential), the degree-preserving characteristic
operator ``D = delta d + d delta`` built from it, and the splitting of each
degree into ``L = im(delta)`` and a complement, on which restricted
supertraces and superdeterminants are evaluated.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AcyclicityError, RegularityError, ShapeError

RANK_RTOL = 1e-10  # singular values below RANK_RTOL * sigma_max count as zero


@dataclass(frozen=True)
class GradedVectorSpace:
    """Dimensions of the degree components, indexed by degree 0..n."""

    dims: tuple

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) < 2:
            raise ShapeError("need at least two degrees")
        if any(d < 0 for d in dims):
            raise ShapeError("degree dimensions must be nonnegative")
        object.__setattr__(self, "dims", dims)

    @property
    def top(self):
        return len(self.dims) - 1


class GradedMap:
    """Degree-homogeneous linear map on a graded vector space.

    ``blocks[k]`` is the matrix of the component mapping degree ``k`` into
    degree ``k + shift`` and has shape ``(dims[k+shift], dims[k])``.  Blocks
    whose target degree falls outside ``0..n`` are stored with zero rows.
    """

    def __init__(self, dims, shift, blocks):
        self.dims = tuple(int(d) for d in dims)
        self.shift = int(shift)
        n = len(self.dims) - 1
        fixed = []
        for k in range(n + 1):
            tgt = k + self.shift
            rows = self.dims[tgt] if 0 <= tgt <= n else 0
            blk = blocks[k] if k < len(blocks) and blocks[k] is not None else None
            if blk is None:
                blk = np.zeros((rows, self.dims[k]), dtype=complex)
            blk = np.asarray(blk, dtype=complex)
            if blk.shape != (rows, self.dims[k]):
                raise ShapeError(
                    f"block at degree {k} has shape {blk.shape}, "
                    f"expected {(rows, self.dims[k])}"
                )
            fixed.append(blk)
        self.blocks = fixed

    @classmethod
    def zero(cls, dims, shift):
        return cls(dims, shift, [None] * len(dims))

    @property
    def top(self):
        return len(self.dims) - 1

    def block(self, k):
        """Component out of degree k; zero-shaped outside the range."""
        if 0 <= k <= self.top:
            return self.blocks[k]
        rows = self.dims[k + self.shift] if 0 <= k + self.shift <= self.top else 0
        cols = self.dims[k] if 0 <= k <= self.top else 0
        return np.zeros((rows, cols), dtype=complex)

    def compose(self, other):
        """self o other, applied right to left."""
        if self.dims != other.dims:
            raise ShapeError("graded maps live on different spaces")
        shift = self.shift + other.shift
        blocks = []
        for k in range(self.top + 1):
            blocks.append(self.block(k + other.shift) @ other.block(k))
        return GradedMap(self.dims, shift, blocks)

    def __add__(self, other):
        if self.dims != other.dims or self.shift != other.shift:
            raise ShapeError("can only add graded maps of equal shift and dims")
        return GradedMap(
            self.dims, self.shift, [a + b for a, b in zip(self.blocks, other.blocks)]
        )

    def __sub__(self, other):
        return self + (other * (-1.0))

    def __mul__(self, scalar):
        return GradedMap(self.dims, self.shift, [b * scalar for b in self.blocks])

    __rmul__ = __mul__

    def norm(self):
        """Largest entry magnitude over all blocks."""
        return max((np.abs(b).max() if b.size else 0.0) for b in self.blocks)

    def copy(self):
        return GradedMap(self.dims, self.shift, [b.copy() for b in self.blocks])


def graded_commutator(delta: GradedMap, d: GradedMap) -> GradedMap:
    """Characteristic operator D = delta d + d delta (degree-preserving).

    ``delta`` has shift -1 and ``d`` shift +1; the degree-k block is
    ``delta[k+1] @ d[k] + d[k-1] @ delta[k]``.
    """
    if delta.shift != -1 or d.shift != +1:
        raise ShapeError("expected shifts -1 and +1")
    if delta.dims != d.dims:
        raise ShapeError("maps live on different graded spaces")
    blocks = []
    for k in range(d.top + 1):
        blocks.append(delta.block(k + 1) @ d.block(k) + d.block(k - 1) @ delta.block(k))
    return GradedMap(d.dims, 0, blocks)


@dataclass(frozen=True)
class PairingForm:
    """Nondegenerate bilinear pairing of degree k against degree n-k.

    ``gram[k]`` has shape ``(dims[k], dims[n-k])`` and evaluates
    ``B(x, y) = x^T gram[k] y`` for ``x`` of degree k, ``y`` of degree n-k.
    ``sign`` fixes the expected degree sign of graded symmetry:
    ``"even"`` means (-1)^k, ``"odd"`` means (-1)^{k+1}, and ``"auto"``
    lets the diagnostic pick the better sign per degree.
    """

    gram: tuple
    sign: str = "auto"

    def __post_init__(self):
        object.__setattr__(
            self, "gram", tuple(np.asarray(g, dtype=complex) for g in self.gram)
        )
        for g in self.gram:
            if g.size and np.linalg.matrix_rank(g) < min(g.shape):
                raise ShapeError("pairing block is degenerate")

    def evaluate(self, k, x, y):
        return np.asarray(x, dtype=complex) @ self.gram[k] @ np.asarray(y, dtype=complex)


def check_codifferential(delta: GradedMap, d: GradedMap, pairing: PairingForm | None = None,
                         tol: float = 1e-10) -> dict:
    """Diagnostic record for a candidate codifferential.

    Reports the nilpotency defects of delta and d and, when a pairing is
    supplied, the degreewise graded-symmetry defect of delta
    (``B(delta x, y) = eps_k B(x, delta y)`` with a degree-dependent sign).
    """
    nil_delta = delta.compose(delta).norm()
    nil_d = d.compose(d).norm()
    record = {
        "nilpotency_delta": nil_delta,
        "nilpotency_d": nil_d,
        "tolerance": tol,
    }
    if pairing is not None:
        n = delta.top
        defects, signs = [], []
        for k in range(n + 1):
            # x in degree n-k+1, y in degree k; both sides land in the
            # (n-k, k) pairing after one application of delta.
            lhs = delta.block(n - k + 1).T @ pairing.gram[n - k]
            rhs = pairing.gram[n - k + 1] @ delta.block(k) if n - k + 1 <= n else None
            if rhs is None or lhs.shape != rhs.shape or lhs.size == 0:
                continue
            scale = max(np.abs(lhs).max(), np.abs(rhs).max(), 1.0)
            cand = {+1: np.abs(lhs - rhs).max() / scale,
                    -1: np.abs(lhs + rhs).max() / scale}
            if pairing.sign == "even":
                eps = 1 if k % 2 == 0 else -1
            elif pairing.sign == "odd":
                eps = -1 if k % 2 == 0 else 1
            else:
                eps = min(cand, key=cand.get)
            defects.append(cand[eps])
            signs.append((k, eps))
        record["symmetry_defect"] = max(defects) if defects else 0.0
        record["symmetry_signs"] = signs
    worst = max(nil_delta, nil_d, record.get("symmetry_defect", 0.0))
    record["passed"] = bool(worst <= tol)
    return record


def _rank(block, threshold):
    if block.size == 0:
        return 0
    sv = np.linalg.svd(block, compute_uv=False)
    return int(np.sum(sv > threshold))


def acyclicity_check(gmap: GradedMap, tol: float = 1e-10):
    """Exactness of the complex defined by a nilpotent graded map.

    Returns ``(acyclic, per_degree)`` where each entry of ``per_degree`` is
    ``(rank_in, rank_out, dim)``; the complex is acyclic iff
    ``rank_in + rank_out == dim`` in every degree.  Ranks use singular values
    thresholded relative to the largest singular value over all blocks.
    """
    if gmap.compose(gmap).norm() > max(tol, RANK_RTOL) * max(gmap.norm(), 1.0):
        raise ShapeError("input map is not nilpotent; acyclicity is undefined")
    sigma_max = 0.0
    for b in gmap.blocks:
        if b.size:
            sigma_max = max(sigma_max, np.linalg.norm(b, 2))
    threshold = RANK_RTOL * max(sigma_max, 1e-300)
    per_degree = []
    acyclic = True
    for k in range(gmap.top + 1):
        rank_in = _rank(gmap.block(k - gmap.shift), threshold)
        rank_out = _rank(gmap.block(k), threshold)
        per_degree.append((rank_in, rank_out, gmap.dims[k]))
        if rank_in + rank_out != gmap.dims[k]:
            acyclic = False
    return acyclic, per_degree


@dataclass
class Splitting:
    """Orthogonal splitting V_k = L_k (+) C_k with L = im(delta).

    ``basis_L[k]`` and ``basis_C[k]`` hold orthonormal column bases;
    ``projector_L[k]`` is the orthogonal projector onto L_k.  ``cond_bijection``
    records the condition number of delta restricted to the complement, which
    the acyclicity of delta makes a bijection onto L one degree down.
    """

    dims: tuple
    basis_L: list
    basis_C: list
    cond_bijection: list = field(default_factory=list)

    @property
    def projector_L(self):
        return [U @ U.conj().T for U in self.basis_L]

    @property
    def projector_C(self):
        return [W @ W.conj().T for W in self.basis_C]

    def dim_L(self, k):
        return self.basis_L[k].shape[1]


def split_complement(delta: GradedMap, tol: float = 1e-10) -> Splitting:
    """Split each degree into im(delta) and its orthogonal complement.

    Requires delta nilpotent and acyclic; otherwise the restriction of delta
    to the complement fails to be a bijection onto the image one degree down
    and no split complement is produced.
    """
    acyclic, _ = acyclicity_check(delta, tol)
    if not acyclic:
        raise AcyclicityError("no isotropically-split complement computed: "
                              "the codifferential complex is not acyclic")
    n = delta.top
    sigma_max = max((np.linalg.norm(b, 2) for b in delta.blocks if b.size), default=0.0)
    threshold = RANK_RTOL * max(sigma_max, 1e-300)
    basis_L, basis_C = [], []
    for k in range(n + 1):
        into_k = delta.block(k + 1)  # maps degree k+1 -> k, image is L_k
        if into_k.size == 0:
            basis_L.append(np.zeros((delta.dims[k], 0), dtype=complex))
            basis_C.append(np.eye(delta.dims[k], dtype=complex))
            continue
        u, sv, _ = np.linalg.svd(into_k, full_matrices=True)
        r = int(np.sum(sv > threshold))
        basis_L.append(u[:, :r])
        basis_C.append(u[:, r:])
    split = Splitting(delta.dims, basis_L, basis_C)
    # Bijectivity of delta from C_{k+1} onto L_k, with conditioning.
    for k in range(n):
        m = basis_L[k].conj().T @ delta.block(k + 1) @ basis_C[k + 1]
        if m.shape[0] != m.shape[1]:
            raise AcyclicityError("no isotropically-split complement computed: "
                                  f"delta|_C is not square at degree {k + 1}")
        if m.size:
            sv = np.linalg.svd(m, compute_uv=False)
            if sv[-1] <= threshold:
                raise AcyclicityError("no isotropically-split complement computed: "
                                      f"delta|_C is singular at degree {k + 1}")
            split.cond_bijection.append(float(sv[0] / sv[-1]))
        else:
            split.cond_bijection.append(1.0)
    return split


def _restriction(block, basis):
    """Matrix of an invariant-subspace restriction in an orthonormal basis."""
    return basis.conj().T @ block @ basis


def _det_by_eigenvalues(mat):
    if mat.size == 0:
        return 1.0 + 0.0j
    return complex(np.prod(np.linalg.eigvals(mat)))


def sdet_restricted(D: GradedMap, split: Splitting, tol: float = 1e-10,
                    crosscheck_rtol: float = 1e-9) -> complex:
    """Superdeterminant of D restricted to L: prod_k det(D_k|_L)^((-1)^k).

    D must leave L invariant.  The value is cross-checked against the
    unrestricted form prod_k det(D_k)^((-1)^{k+1} k}, which agrees exactly
    because delta conjugates the action on each complement onto the action
    on L one degree down.
    """
    if D.shift != 0:
        raise ShapeError("characteristic operator must preserve degree")
    leak = 0.0
    primary = 1.0 + 0.0j
    for k in range(D.top + 1):
        U = split.basis_L[k]
        W = split.basis_C[k]
        blk = D.block(k)
        if U.shape[1] and W.shape[1]:
            leak = max(leak, np.abs(W.conj().T @ blk @ U).max() / max(1.0, np.abs(blk).max()))
        restr = _restriction(blk, U)
        det = _det_by_eigenvalues(restr)
        if abs(det) < 1e-300:
            raise RegularityError(f"non-regular codifferential: D|_L singular at degree {k}")
        primary *= det if k % 2 == 0 else 1.0 / det
    if leak > tol:
        raise RegularityError(f"D does not leave L invariant (leak {leak:.2e})")
    alternative = 1.0 + 0.0j
    for k in range(D.top + 1):
        det = _det_by_eigenvalues(D.block(k))
        if k % 2 == 1:
            alternative *= det ** k
        elif k:
            alternative /= det ** k
    if abs(primary - alternative) > crosscheck_rtol * abs(primary):
        raise RegularityError(
            "restricted and unrestricted superdeterminant formulas disagree: "
            f"{primary} vs {alternative}")
    return primary


def restricted_supertrace(D: GradedMap, split: Splitting, t: float,
                          tol: float = 1e-10) -> complex:
    """Supertrace of exp(-tD) on L, evaluated two ways.

    Returns sum_k (-1)^k tr(exp(-t D_k)|_L) and asserts equality with the
    unrestricted form sum_k (-1)^{k+1} k tr(exp(-t D_k)).
    """
    from scipy.linalg import expm

    if t <= 0:
        raise ValueError("t must be positive")
    restricted = 0.0 + 0.0j
    unrestricted = 0.0 + 0.0j
    for k in range(D.top + 1):
        blk = D.block(k)
        if blk.size:
            full = expm(-t * blk)
            unrestricted += (-1.0) ** (k + 1) * k * np.trace(full)
            U = split.basis_L[k]
            if U.shape[1]:
                restricted += (-1.0) ** k * np.trace(expm(-t * _restriction(blk, U)))
    scale = max(abs(restricted), abs(unrestricted), 1.0)
    if abs(restricted - unrestricted) > tol * scale:
        raise RegularityError(
            "restricted-supertrace identity violated: "
            f"{restricted} vs {unrestricted}")
    return restricted


def supertrace(gmap: GradedMap) -> complex:
    """Alternating-sign trace sum_k (-1)^k tr over degrees (shift-0 maps)."""
    if gmap.shift != 0:
        raise ShapeError("supertrace needs a degree-preserving map")
    return complex(sum((-1.0) ** k * np.trace(gmap.block(k)) for k in range(gmap.top + 1)))


# ---------------------------------------------------------------------------
# Random acyclic complexes and JSON serialization
# ---------------------------------------------------------------------------

def random_acyclic_map(dims, shift, seed=None, rng=None, cond_cap=1e4):
    """Random nilpotent, acyclic graded map of shift +-1 on given dims.

    The map is a staircase complex conjugated by random invertible
    degree-preserving changes of basis, so exactness holds by construction.
    Requires dims to admit an acyclic complex (ranks r_k with
    dims[k] = r_{k-1} + r_k must exist).
    """
    if shift not in (-1, +1):
        raise ShapeError("acyclic generators exist for shifts -1 and +1 only")
    dims = tuple(int(d) for d in dims)
    n = len(dims) - 1
    ranks = [0]
    for k in range(n):
        r = dims[k] - ranks[-1]
        if r < 0:
            raise ShapeError(f"dims {dims} admit no acyclic complex (degree {k})")
        ranks.append(r)
    if ranks[-1] != dims[n]:
        raise ShapeError(f"dims {dims} admit no acyclic complex (top degree)")
    rng = rng if rng is not None else np.random.default_rng(seed)
    gl = []
    for k in range(n + 1):
        while True:
            g = rng.standard_normal((dims[k], dims[k])) + 1j * rng.standard_normal(
                (dims[k], dims[k]))
            if dims[k] == 0:
                break
            sv = np.linalg.svd(g, compute_uv=False)
            if sv[-1] > 0 and sv[0] / sv[-1] < cond_cap:
                break
        gl.append(g)
    blocks = [None] * (n + 1)
    if shift == +1:
        # Degree k coordinates: first ranks[k] slots carry im(d) from below,
        # the remaining ranks[k+1] slots map isomorphically one degree up.
        for k in range(n):
            d0 = np.zeros((dims[k + 1], dims[k]), dtype=complex)
            d0[:ranks[k + 1], ranks[k]:] = np.eye(ranks[k + 1])
            blocks[k] = gl[k + 1] @ d0 @ np.linalg.inv(gl[k])
    else:
        # Degree k coordinates: first ranks[k+1] slots carry im(delta) from
        # above, the remaining ranks[k] slots map isomorphically one degree
        # down onto the image slots there.
        for k in range(1, n + 1):
            d0 = np.zeros((dims[k - 1], dims[k]), dtype=complex)
            d0[:ranks[k], ranks[k + 1] if k < n else 0:] = np.eye(ranks[k])
            blocks[k] = gl[k - 1] @ d0 @ np.linalg.inv(gl[k])
    return GradedMap(dims, shift, blocks)


def random_graded_map(dims, shift, seed=None, rng=None):
    """Dense random graded map of any shift (no structure imposed)."""
    rng = rng if rng is not None else np.random.default_rng(seed)
    dims = tuple(int(d) for d in dims)
    n = len(dims) - 1
    blocks = []
    for k in range(n + 1):
        tgt = k + shift
        rows = dims[tgt] if 0 <= tgt <= n else 0
        blocks.append(rng.standard_normal((rows, dims[k]))
                      + 1j * rng.standard_normal((rows, dims[k])))
    return GradedMap(dims, shift, blocks)


def _block_to_json(block):
    return [[[float(z.real), float(z.imag)] for z in row] for row in block]


def _block_from_json(data, rows, cols):
    blk = np.zeros((rows, cols), dtype=complex)
    for i, row in enumerate(data):
        for j, (re, im) in enumerate(row):
            blk[i, j] = re + 1j * im
    return blk


def complex_to_json(dims, maps: dict) -> dict:
    """Serialize a graded complex as {dims, maps: {name: {shift, blocks}}}."""
    return {
        "dims": list(dims),
        "maps": {
            name: {"shift": m.shift, "blocks": [_block_to_json(b) for b in m.blocks]}
            for name, m in maps.items()
        },
    }


def complex_from_json(data) -> tuple:
    """Inverse of :func:`complex_to_json`; returns (dims, {name: GradedMap})."""
    dims = tuple(int(d) for d in data["dims"])
    n = len(dims) - 1
    maps = {}
    for name, entry in data["maps"].items():
        shift = int(entry["shift"])
        blocks = []
        for k in range(n + 1):
            tgt = k + shift
            rows = dims[tgt] if 0 <= tgt <= n else 0
            raw = entry["blocks"][k] if k < len(entry["blocks"]) else []
            blocks.append(_block_from_json(raw, rows, dims[k]))
        maps[name] = GradedMap(dims, shift, blocks)
    return dims, maps
