"""Closed-orbit catalogs and dynamical zeta functions for toy hyperbolic flows.

Two exactly enumerable models: the constant-roof suspension of a hyperbolic
toral automorphism (orbit data from the trace recursion and Moebius
inversion), and the suspension of a subshift of finite type with a locally
constant roof (orbits as necklace classes of admissible words).  On these the
trace comb, the truncated Dirichlet/Euler-product sums, and the closed-form
analytic continuations can all be cross-checked against each other, and the
value at zero of the zeta function is locally constant in the roof because
the transfer matrix at lambda = 0 forgets the roof entirely.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .errors import AbscissaError, ShapeError

ABSCISSA_MARGIN = 0.3


def mobius(n: int) -> int:
    if n < 1:
        raise ShapeError("Moebius function needs a positive integer")
    result, m, p = 1, n, 2
    while p * p <= m:
        if m % p == 0:
            m //= p
            if m % p == 0:
                return 0
            result = -result
        p += 1
    if m > 1:
        result = -result
    return result


def divisors(n: int):
    return [d for d in range(1, n + 1) if n % d == 0]


@dataclass(frozen=True)
class ClosedOrbit:
    """One class of closed orbits sharing period data.

    ``count`` is the number of distinct orbits in the class; ``holonomy`` is
    the character trace along one traversal; ``poincare`` holds the
    eigenvalues of the linearized return map or None when the model carries
    no transverse linearization.
    """

    period: float
    primitive_period: float
    count: int
    holonomy: complex
    poincare: tuple | None = None
    word_length: int = 0

    def __post_init__(self):
        if self.period <= 0 or self.primitive_period <= 0:
            raise ShapeError("orbit periods must be positive")
        reps = self.period / self.primitive_period
        if abs(reps - round(reps)) > 1e-9:
            raise ShapeError("period must be an integer multiple of the "
                             "primitive period")
        if self.poincare is not None:
            for mu in self.poincare:
                if abs(abs(mu) - 1.0) < 1e-12:
                    raise ShapeError("Poincare eigenvalue on the unit circle "
                                     "breaks hyperbolicity")


@dataclass
class OrbitCatalog:
    """All closed-orbit classes up to a period cutoff, plus generator data."""

    orbits: list
    t_max: float
    alpha: float
    expansion_rate: float  # log of the largest multiplier per unit period
    meta: dict = field(default_factory=dict)

    def min_period(self):
        return min(o.primitive_period for o in self.orbits)

    def require_abscissa(self, lam):
        required = self.expansion_rate + ABSCISSA_MARGIN
        if complex(lam).real <= required:
            raise AbscissaError(
                f"Re(lambda) = {complex(lam).real:.3f} is below the enforced "
                f"abscissa {required:.3f}",
                required_re_lambda=required)

    def tail_bound(self, lam):
        """Geometric bound on the dropped orbit sum beyond t_max."""
        gap = complex(lam).real - self.expansion_rate
        return float(np.exp(-gap * self.t_max) / max(gap, 1e-12))


def cat_map_catalog(A, n_max: int, alpha: float = 0.0) -> OrbitCatalog:
    """Orbit classes of the constant-roof suspension of a hyperbolic A.

    Fixed-point counts N_n = tr(A^n) - 2 come from the integer recursion
    t_n = tr(A) t_{n-1} - t_{n-2}; primitive counts by Moebius inversion
    p_n = (1/n) sum_{d|n} mu(n/d) N_d.  Orbit classes carry period j*n for
    each iterate j, holonomy e^{i alpha T}, and Poincare eigenvalues
    (mu^T, mu^{-T}).
    """
    A = np.asarray(A, dtype=np.int64)
    if A.shape != (2, 2):
        raise ShapeError("expected a 2x2 integer matrix")
    det = int(round(np.linalg.det(A)))
    tr = int(A[0, 0] + A[1, 1])
    if det != 1 or abs(tr) <= 2:
        raise ShapeError("matrix must lie in SL(2, Z) with |trace| > 2")
    n_max = int(n_max)
    traces = [2, tr]
    for _ in range(2, n_max + 1):
        traces.append(tr * traces[-1] - traces[-2])
    fixed = [None] + [traces[n] - 2 for n in range(1, n_max + 1)]
    primitive = [None]
    for n in range(1, n_max + 1):
        acc = sum(mobius(n // d) * fixed[d] for d in divisors(n))
        if acc % n != 0:
            raise ShapeError("Moebius inversion produced a non-integer count")
        primitive.append(acc // n)
    mu = (tr + np.sqrt(tr * tr - 4.0)) / 2.0
    orbits = []
    for n_prim in range(1, n_max + 1):
        if primitive[n_prim] == 0:
            continue
        j = 1
        while j * n_prim <= n_max:
            T = float(j * n_prim)
            orbits.append(ClosedOrbit(
                period=T,
                primitive_period=float(n_prim),
                count=primitive[n_prim],
                holonomy=np.exp(1j * alpha * T),
                poincare=(mu ** T, mu ** (-T)),
                word_length=j * n_prim,
            ))
            j += 1
    catalog = OrbitCatalog(orbits, float(n_max), alpha, float(np.log(mu)),
                           meta={"model": "cat_map", "matrix": A.tolist(),
                                 "trace": tr, "fixed_counts": fixed[1:],
                                 "primitive_counts": primitive[1:]})
    return catalog


def _necklaces(adjacency, length):
    """Aperiodic necklace representatives of admissible periodic words."""
    n_states = adjacency.shape[0]
    seen = set()
    reps = []
    for word in product(range(n_states), repeat=length):
        if any(adjacency[word[i], word[(i + 1) % length]] == 0
               for i in range(length)):
            continue
        # aperiodicity: no strictly smaller rotation period
        periodic = False
        for p in divisors(length)[:-1]:
            if all(word[i] == word[(i + p) % length] for i in range(length)):
                periodic = True
                break
        if periodic:
            continue
        canon = min(tuple(word[i:] + word[:i]) for i in range(length))
        if canon in seen:
            continue
        seen.add(canon)
        reps.append(canon)
    return reps


MAX_ENUMERATION_LENGTH = 14


def subshift_catalog(M, roof, n_max: int, alpha: float = 0.0) -> OrbitCatalog:
    """Orbit classes of a roofed subshift of finite type.

    Periodic words are enumerated directly and grouped into necklace
    classes; the period is the Birkhoff sum of the roof along the word and
    the holonomy couples to the word length, e^{i alpha n}.  Poincare data
    is not defined for this model and stays None.  Enumeration is capped at
    word length 14; use subshift_log_zeta_truncated for longer truncations.
    """
    import warnings

    M = np.asarray(M, dtype=np.int64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ShapeError("transition matrix must be square")
    roof = np.asarray(roof, dtype=float)
    if roof.shape != (M.shape[0],):
        raise ShapeError("one roof value per state required")
    if np.any(roof <= 0):
        raise ShapeError("roof values must be positive")
    power = np.linalg.matrix_power(M, max(1, M.shape[0] ** 2))
    primitive_matrix = bool(np.all(power > 0))
    if not primitive_matrix:
        warnings.warn("transition matrix is not primitive; the zeta function "
                      "is still defined", stacklevel=2)
    n_max = int(n_max)
    if n_max > MAX_ENUMERATION_LENGTH:
        raise ShapeError(f"word enumeration capped at length "
                         f"{MAX_ENUMERATION_LENGTH}; use the transfer-trace "
                         f"truncation for longer sums")
    classes = {}
    for length in range(1, n_max + 1):
        for word in _necklaces(M, length):
            roof_sum = float(np.sum(roof[list(word)]))
            key = (length, round(roof_sum, 12))
            classes[key] = classes.get(key, 0) + 1
    orbits = []
    for (length, roof_sum), count in sorted(classes.items()):
        j = 1
        while j * length <= n_max:
            orbits.append(ClosedOrbit(
                period=j * roof_sum,
                primitive_period=roof_sum,
                count=count,
                holonomy=np.exp(1j * alpha * j * length),
                poincare=None,
                word_length=j * length,
            ))
            j += 1
    growth = float(np.log(max(np.abs(np.linalg.eigvals(M.astype(float))))))
    rate = growth / float(np.min(roof))
    catalog = OrbitCatalog(orbits, float(n_max), alpha, rate,
                           meta={"model": "subshift", "matrix": M.tolist(),
                                 "roof": roof.tolist(),
                                 "primitive": primitive_matrix})
    return catalog


def guillemin_comb(catalog: OrbitCatalog, k: int):
    """Atoms (T, weight) of the degree-k flat-trace comb.

    weight = count * T# * tr(wedge^k P) * holonomy / |det(I - P)| per class;
    needs Poincare data on every orbit.
    """
    atoms = []
    for orbit in catalog.orbits:
        if orbit.poincare is None:
            raise ShapeError("orbit catalog carries no Poincare data")
        weight = (orbit.count * orbit.primitive_period * orbit.holonomy
                  * _wedge_trace(orbit.poincare, k) / _det_one_minus(orbit.poincare))
        atoms.append((orbit.period, complex(weight)))
    return atoms


def _wedge_trace(eigenvalues, k):
    """Elementary symmetric function e_k of the Poincare eigenvalues."""
    if k == 0:
        return 1.0 + 0.0j
    es = np.zeros(k + 1, dtype=complex)
    es[0] = 1.0
    for mu in eigenvalues:
        for j in range(min(k, len(eigenvalues)), 0, -1):
            es[j] = es[j] + mu * es[j - 1]
    return complex(es[k]) if k <= len(eigenvalues) else 0.0 + 0.0j


def _det_one_minus(eigenvalues):
    """|det(I - P)| for the linearized return map."""
    det = 1.0 + 0.0j
    for mu in eigenvalues:
        det *= 1.0 - mu
    return abs(det)


def orbit_log_sdet(catalog: OrbitCatalog, lam) -> complex:
    """Truncated log sdet((D + lambda)|_L) from the alternating orbit comb.

    -sum_gamma (T#/T) sum_k (-1)^k tr(wedge^k P) holonomy e^{-lambda T}
    / |det(I - P)|; the inner alternating sum collapses to -1 for the
    symplectic two-eigenvalue model, making this (-1)^m log zeta with m = 1.
    """
    catalog.require_abscissa(lam)
    lam = complex(lam)
    total = 0.0 + 0.0j
    for orbit in catalog.orbits:
        if orbit.poincare is None:
            raise ShapeError("orbit catalog carries no Poincare data")
        collapse = sum((-1.0) ** k * _wedge_trace(orbit.poincare, k)
                       for k in range(len(orbit.poincare) + 1))
        collapse /= _det_one_minus(orbit.poincare)
        ratio = orbit.primitive_period / orbit.period
        total -= (orbit.count * ratio * collapse * orbit.holonomy
                  * np.exp(-lam * orbit.period))
    return complex(total)


def _log1p_complex(w):
    if abs(w) < 1e-4:
        # series keeps precision where 1 + w rounds away the information,
        # which matters under the huge class counts of long orbits
        return w * (1.0 - w * (0.5 - w / 3.0))
    return np.log(1.0 + w)


def ruelle_zeta_truncated(catalog: OrbitCatalog, lam) -> complex:
    """Euler product over primitive orbit classes up to the cutoff.

    Accumulated in log space: the factor of a class is (1 - rho e^{-lam T})
    raised to the class count, which can exceed 1e20 for long orbits.
    """
    catalog.require_abscissa(lam)
    lam = complex(lam)
    log_value = 0.0 + 0.0j
    for orbit in catalog.orbits:
        if orbit.period != orbit.primitive_period:
            continue  # primitive classes only
        w = -orbit.holonomy * np.exp(-lam * orbit.period)
        log_value += orbit.count * _log1p_complex(w)
    return complex(np.exp(log_value))


def orbit_log_zeta_sum(catalog: OrbitCatalog, lam) -> complex:
    """log zeta as the orbit sum -sum (1/j) holonomy e^{-lambda T} over classes."""
    catalog.require_abscissa(lam)
    lam = complex(lam)
    total = 0.0 + 0.0j
    for orbit in catalog.orbits:
        j = orbit.period / orbit.primitive_period
        total -= orbit.count / j * orbit.holonomy * np.exp(-lam * orbit.period)
    return complex(total)


def zeta_closed_form_cat(A, alpha: float, lam) -> complex:
    """Rational continuation (1 - mu z)(1 - z/mu) / (1 - z)^2, z = e^{i alpha - lambda}.

    Valid wherever z avoids {1, mu, 1/mu}; at such points the truncated
    product converges to this value for Re(lambda) above the abscissa.
    """
    A = np.asarray(A, dtype=np.int64)
    tr = int(A[0, 0] + A[1, 1])
    det = int(round(np.linalg.det(A)))
    if det != 1 or abs(tr) <= 2:
        raise ShapeError("matrix must lie in SL(2, Z) with |trace| > 2")
    z = np.exp(1j * alpha - complex(lam))
    numerator = 1.0 - tr * z + z * z
    denominator = (1.0 - z) ** 2
    if abs(denominator) < 1e-12 or abs(numerator) < 1e-12:
        raise AbscissaError(
            "zeta value sits on a zero or pole of the continuation "
            "(non-regular parameter)", required_re_lambda=None)
    return complex(numerator / denominator)


def subshift_log_zeta_truncated(M, roof, alpha: float, lam, n_max: int) -> complex:
    """log zeta by the transfer-trace sum -sum_n e^{i alpha n} tr(T(lam)^n)/n.

    The trace of T(lam)^n equals the Birkhoff-weighted periodic-word sum at
    length n exactly, so this reaches truncations far beyond what word
    enumeration supports.
    """
    M = np.asarray(M, dtype=float)
    roof = np.asarray(roof, dtype=float)
    transfer = M * np.exp(-complex(lam) * roof)[None, :]
    total = 0.0 + 0.0j
    power = np.eye(M.shape[0], dtype=complex)
    for n in range(1, int(n_max) + 1):
        power = power @ transfer
        total -= np.exp(1j * alpha * n) * np.trace(power) / n
    return complex(total)


def zeta_transfer_determinant(M, roof, alpha: float, lam) -> complex:
    """det(I - e^{i alpha} T(lambda)) with T(lambda)_{ij} = M_{ij} e^{-lambda roof_j}.

    Rational in e^{-lambda}; at lambda = 0 the roof drops out exactly, which
    is the local-constancy mechanism for the value at zero.
    """
    M = np.asarray(M, dtype=float)
    roof = np.asarray(roof, dtype=float)
    weights = np.exp(-complex(lam) * roof)
    transfer = M * weights[None, :]
    return complex(np.linalg.det(np.eye(M.shape[0]) - np.exp(1j * alpha) * transfer))


def orbit_dirichlet(catalog: OrbitCatalog, k: int, lam, s) -> complex:
    """Degree-k Dirichlet series F^k(lambda, s) of the trace comb.

    Gamma(s)^{-1} sum count T# tr(wedge^k P) holonomy T^{s-1} e^{-lambda T}
    / |det(I - P)|.
    """
    from scipy.special import gamma as gamma_fn

    catalog.require_abscissa(lam)
    lam = complex(lam)
    s = complex(s)
    total = 0.0 + 0.0j
    for T, weight in guillemin_comb(catalog, k):
        total += weight * T ** (s - 1.0) * np.exp(-lam * T)
    return complex(total / gamma_fn(s))


def sdet_zeta_identity_defect(catalog: OrbitCatalog, lam, m: int = 1) -> float:
    """|exp(log sdet) - zeta^((-1)^m)| at lambda, from truncated data."""
    lhs = np.exp(orbit_log_sdet(catalog, lam))
    zeta = np.exp(orbit_log_zeta_sum(catalog, lam))
    rhs = zeta if m % 2 == 0 else 1.0 / zeta
    return float(abs(lhs - rhs))
