"""Heat-kernel parametrix for D = -d^2/dx^2 + v(x) on the circle.

Symbols are finite sums of terms c(x) xi^a (xi^2 - lambda)^{-b} with c a
trigonometric polynomial kept in exact rational arithmetic; a term is
homogeneous of order a - 2b under (xi, lambda) -> (t xi, t^2 lambda).  The
parametrix recursion solves

    (xi^2 - lambda) q + v q - 2 i xi dq/dx - d^2q/dx^2 = 1 + r

order by order, with q_0 = (xi^2 - lambda)^{-1} and each q_M exactly
homogeneous of order -2 - M.  The lambda-contour integral of e^{-t lambda}
(xi^2 - lambda)^{-b} is evaluated by its residue t^{b-1} e^{-t xi^2}/(b-1)!,
and the remaining xi-integrals are Gaussians with Hermite-moment closed
forms, so kernels and heat coefficients come out in closed form; the trace
coefficients B_k are exact rationals times sqrt(pi).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import ShapeError

MAX_RECURSION_ORDER = 8
DEFAULT_MAX_FOURIER_DEGREE = 16

_QC_ZERO = (Fraction(0), Fraction(0))


def _qc_add(x, y):
    return (x[0] + y[0], x[1] + y[1])


def _qc_mul(x, y):
    return (x[0] * y[0] - x[1] * y[1], x[0] * y[1] + x[1] * y[0])


def _qc_scale_i(x, m):
    """Multiply by i*m for integer m (used by d/dx on Fourier modes)."""
    return (-m * x[1], m * x[0])


class FourierPoly:
    """Trigonometric polynomial with exact rational-complex coefficients.

    Coefficients are stored per Fourier mode m as (Fraction, Fraction) pairs
    encoding re + i*im of the coefficient of e^{imx}.  Degrees above
    ``max_degree`` are dropped on multiplication, with the L1 mass of the
    dropped modes tracked in ``truncated_l1``.
    """

    __slots__ = ("coeffs", "max_degree", "truncated_l1")

    def __init__(self, coeffs=None, max_degree=DEFAULT_MAX_FOURIER_DEGREE):
        self.max_degree = max_degree
        self.truncated_l1 = 0.0
        self.coeffs = {}
        if coeffs:
            for m, val in coeffs.items():
                if val != _QC_ZERO:
                    self.coeffs[int(m)] = val

    @classmethod
    def constant(cls, value, max_degree=DEFAULT_MAX_FOURIER_DEGREE):
        value = Fraction(value)
        return cls({0: (value, Fraction(0))}, max_degree)

    @classmethod
    def harmonic(cls, kind, k=1, amplitude=1, max_degree=DEFAULT_MAX_FOURIER_DEGREE):
        """cos(kx) or sin(kx) with rational amplitude."""
        amp = Fraction(amplitude)
        if kind == "cos":
            half = (amp / 2, Fraction(0))
            return cls({k: half, -k: half}, max_degree)
        if kind == "sin":
            return cls({k: (Fraction(0), -amp / 2), -k: (Fraction(0), amp / 2)},
                       max_degree)
        raise ShapeError(f"unknown harmonic {kind!r}")

    def is_zero(self):
        return not self.coeffs

    def __add__(self, other):
        out = dict(self.coeffs)
        for m, val in other.coeffs.items():
            out[m] = _qc_add(out.get(m, _QC_ZERO), val)
        res = FourierPoly(out, self.max_degree)
        res.truncated_l1 = self.truncated_l1 + other.truncated_l1
        return res

    def scale(self, re, im=0):
        factor = (Fraction(re), Fraction(im))
        res = FourierPoly({m: _qc_mul(v, factor) for m, v in self.coeffs.items()},
                          self.max_degree)
        res.truncated_l1 = self.truncated_l1
        return res

    def __mul__(self, other):
        out = {}
        dropped = 0.0
        for m1, v1 in self.coeffs.items():
            for m2, v2 in other.coeffs.items():
                m = m1 + m2
                prod = _qc_mul(v1, v2)
                if abs(m) > self.max_degree:
                    dropped += abs(float(prod[0])) + abs(float(prod[1]))
                    continue
                out[m] = _qc_add(out.get(m, _QC_ZERO), prod)
        res = FourierPoly(out, self.max_degree)
        res.truncated_l1 = self.truncated_l1 + other.truncated_l1 + dropped
        return res

    def dx(self):
        res = FourierPoly({m: _qc_scale_i(v, m) for m, v in self.coeffs.items()},
                          self.max_degree)
        res.truncated_l1 = self.truncated_l1
        return res

    def mean(self):
        """Zero-mode coefficient, i.e. (1/2pi) integral over the circle."""
        return self.coeffs.get(0, _QC_ZERO)

    def degree(self):
        return max((abs(m) for m in self.coeffs), default=0)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape, dtype=complex)
        for m, (re, im) in self.coeffs.items():
            out += (float(re) + 1j * float(im)) * np.exp(1j * m * x)
        return out

    def __eq__(self, other):
        return isinstance(other, FourierPoly) and self.coeffs == other.coeffs

    def __repr__(self):
        return f"FourierPoly({self.coeffs!r})"


_TERM_RE = re.compile(r"^\s*(?:(\d+)\s*\*?\s*)?(1|sin|cos)\s*(?:\(\s*(\d*)\s*x?\s*\))?\s*$")


def parse_potential(text: str, max_degree=DEFAULT_MAX_FOURIER_DEGREE) -> FourierPoly:
    """Parse potentials like "0", "sin", "1+sin", "2*cos(3x)" exactly."""
    text = text.strip()
    if text in ("0", ""):
        return FourierPoly(max_degree=max_degree)
    total = FourierPoly(max_degree=max_degree)
    pieces = re.split(r"(?=[+-])", text.replace(" ", ""))
    for piece in pieces:
        sign = 1
        if piece.startswith("+"):
            piece = piece[1:]
        elif piece.startswith("-"):
            sign, piece = -1, piece[1:]
        if not piece:
            continue
        m = _TERM_RE.match(piece)
        if not m:
            raise ShapeError(f"cannot parse potential term {piece!r}")
        coeff = int(m.group(1)) * sign if m.group(1) else sign
        name = m.group(2)
        freq = int(m.group(3)) if m.group(3) else 1
        if name == "1":
            total = total + FourierPoly.constant(coeff, max_degree)
        else:
            total = total + FourierPoly.harmonic(name, freq, coeff, max_degree)
    return total


@dataclass
class LaurentSymbol:
    """Finite sum of terms c(x) xi^a (xi^2 - lambda)^{-b} with b >= 0.

    ``terms`` maps (a, b) to the coefficient function; a term is homogeneous
    of order a - 2b (lambda of weight 2).  Terms with b = 0 are polynomial in
    xi and carry no lambda-pole, so their heat contour vanishes.
    """

    terms: dict = field(default_factory=dict)

    def put(self, a, b, poly):
        if poly.is_zero():
            self.terms.pop((a, b), None)
            return
        if (a, b) in self.terms:
            merged = self.terms[(a, b)] + poly
            if merged.is_zero():
                del self.terms[(a, b)]
            else:
                self.terms[(a, b)] = merged
        else:
            self.terms[(a, b)] = poly

    def __add__(self, other):
        out = LaurentSymbol(dict(self.terms))
        for (a, b), poly in other.terms.items():
            out.put(a, b, poly)
        return out

    def scale(self, re, im=0):
        out = LaurentSymbol()
        for (a, b), poly in self.terms.items():
            out.put(a, b, poly.scale(re, im))
        return out

    def is_zero(self):
        return not self.terms

    def orders(self):
        return sorted({a - 2 * b for a, b in self.terms})

    def order(self):
        """Largest homogeneity order over the terms (None when empty)."""
        os = self.orders()
        return os[-1] if os else None

    def is_homogeneous(self, k=None):
        os = self.orders()
        if not os:
            return True
        return len(os) == 1 and (k is None or os[0] == k)

    def mul_resolvent(self):
        """Multiply by (xi^2 - lambda)^{-1}: b -> b + 1."""
        return LaurentSymbol({(a, b + 1): poly for (a, b), poly in self.terms.items()})

    def mul_base(self):
        """Multiply by (xi^2 - lambda): b -> b - 1, requires b >= 1."""
        out = LaurentSymbol()
        for (a, b), poly in self.terms.items():
            if b < 1:
                raise ShapeError("cannot multiply a polynomial term by the base")
            out.put(a, b - 1, poly)
        return out

    def mul_xi(self, power=1):
        return LaurentSymbol({(a + power, b): poly for (a, b), poly in self.terms.items()})

    def mul_poly(self, v):
        out = LaurentSymbol()
        for (a, b), poly in self.terms.items():
            out.put(a, b, poly * v)
        return out

    def dx(self):
        out = LaurentSymbol()
        for (a, b), poly in self.terms.items():
            out.put(a, b, poly.dx())
        return out

    def dxi(self):
        """d/dxi: a xi^{a-1} - 2 b xi^{a+1} (xi^2-lambda)^{-(b+1)} per term."""
        out = LaurentSymbol()
        for (a, b), poly in self.terms.items():
            if a >= 1:
                out.put(a - 1, b, poly.scale(a))
            if b >= 1:
                out.put(a + 1, b + 1, poly.scale(-2 * b))
        return out

    def truncation_l1(self):
        return sum(poly.truncated_l1 for poly in self.terms.values())

    def term_count(self):
        return sum(len(poly.coeffs) for poly in self.terms.values())


def _compose_with_operator(v: FourierPoly, sym: LaurentSymbol) -> LaurentSymbol:
    """Full symbol of (D - lambda) Op(sym) for D = -d^2/dx^2 + v.

    (xi^2 - lambda) q + v q - 2 i xi q_x - q_xx, exact in the term algebra.
    """
    out = sym.mul_base()
    out = out + sym.mul_poly(v)
    out = out + sym.dx().mul_xi().scale(0, -2)
    out = out + sym.dx().dx().scale(-1)
    return out


def parametrix_symbols(v: FourierPoly, N: int) -> list:
    """Symbols q_0 .. q_{N+1}, q_M exactly homogeneous of order -2 - M.

    q_0 = (xi^2 - lambda)^{-1} and
    q_M = q_0 [2 i xi (q_{M-1})_x + (q_{M-2})_xx - v q_{M-2}].
    """
    if N > MAX_RECURSION_ORDER:
        raise ShapeError(f"term budget exceeded: N = {N} > {MAX_RECURSION_ORDER}")
    if N < 0:
        raise ShapeError("N must be nonnegative")
    one = FourierPoly.constant(1, v.max_degree)
    q = [LaurentSymbol({(0, 1): one})]
    for M in range(1, N + 2):
        rhs = q[M - 1].dx().mul_xi().scale(0, 2)
        if M >= 2:
            rhs = rhs + q[M - 2].dx().dx()
            rhs = rhs + q[M - 2].mul_poly(v).scale(-1)
        q.append(rhs.mul_resolvent())
    for M, sym in enumerate(q):
        if not sym.is_homogeneous() or (not sym.is_zero() and sym.order() != -2 - M):
            raise ShapeError(f"recursion produced inhomogeneous symbol at order {M}")
    return q


def remainder_symbol(v: FourierPoly, symbols: list) -> LaurentSymbol:
    """r^N with (D - lambda) o Op(q^N) = 1 + r^N, exact in the term algebra."""
    total = LaurentSymbol()
    for sym in symbols:
        total = total + _compose_with_operator(v, sym)
    one = LaurentSymbol({(0, 0): FourierPoly.constant(1, v.max_degree)})
    return total + one.scale(-1)


# ---------------------------------------------------------------------------
# Kernel evaluation: residues in lambda, Gaussian moments in xi
# ---------------------------------------------------------------------------

def _hermite_values(a_max, u):
    """Physicists' Hermite polynomials H_0..H_{a_max} on the array u."""
    vals = [np.ones_like(u)]
    if a_max >= 1:
        vals.append(2.0 * u)
    for a in range(1, a_max):
        vals.append(2.0 * u * vals[a] - 2.0 * a * vals[a - 1])
    return vals


def _factorial(n):
    out = 1
    for i in range(2, n + 1):
        out *= i
    return out


def kernel_from_symbol(sym: LaurentSymbol, t, x, y, wraps: int = 2):
    """Heat-contour kernel of a symbol on the circle.

    Each term contributes c(x) (2 pi)^{-1} t^{b-1}/(b-1)! I_a(x - y + 2 pi w)
    summed over covering translates w, with the xi-integral
    I_a(z) = sqrt(pi/t) (i/(2 sqrt t))^a H_a(z/(2 sqrt t)) e^{-z^2/(4t)}.
    Terms with b = 0 have no lambda-pole and vanish.  Broadcasts over x, y.
    """
    if t <= 0:
        raise ValueError("kernel evaluation needs t > 0")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    z0 = x - y
    out = np.zeros(np.broadcast(x, y).shape, dtype=complex)
    if sym.is_zero():
        return out if out.shape else complex(out)
    a_max = max(a for a, b in sym.terms)
    root_t = np.sqrt(t)
    for w in range(-wraps, wraps + 1):
        z = z0 + 2.0 * np.pi * w
        u = z / (2.0 * root_t)
        gauss = np.sqrt(np.pi / t) * np.exp(-z * z / (4.0 * t))
        herm = _hermite_values(a_max, u)
        for (a, b), poly in sym.terms.items():
            if b == 0:
                continue
            pref = (1j / (2.0 * root_t)) ** a * t ** (b - 1) / _factorial(b - 1)
            out = out + poly(x) * (0.5 / np.pi) * pref * herm[a] * gauss
    return out if out.shape else complex(out)


@dataclass
class HeatParametrix:
    """Approximate heat kernel K_N and remainder S_N = (d/dt + D) K_N.

    ``symbols`` holds q_0..q_{N+1}; the remainder symbol has homogeneity
    orders {-2-N, -3-N} exactly, so sup |S_N(t, x, x)| = O(t^{(N-1)/2}).
    """

    v: FourierPoly
    N: int
    symbols: list = field(init=False)
    r_symbol: LaurentSymbol = field(init=False)

    def __post_init__(self):
        self.symbols = parametrix_symbols(self.v, self.N)
        self.r_symbol = remainder_symbol(self.v, self.symbols)

    def kernel(self, t, x, y, wraps: int = 2):
        total = None
        for sym in self.symbols:
            val = kernel_from_symbol(sym, t, x, y, wraps)
            total = val if total is None else total + val
        return total

    def remainder(self, t, x, y, wraps: int = 2):
        return kernel_from_symbol(self.r_symbol, t, x, y, wraps)

    def truncation_l1(self):
        return sum(sym.truncation_l1() for sym in self.symbols)


def heat_coefficients(v: FourierPoly, N: int, theta=None):
    """Exact trace coefficients B_k of integral_circle K_N(t, x, x) dx.

    The diagonal of each homogeneous term integrates to an exact rational
    multiple of sqrt(pi) times t^{(2b - a - 3)/2}; collecting powers gives
    sum_k t^{(k - l - 1)/2} B_k with l the order of the optional composed
    differential operator theta (a list of Fourier coefficients per
    derivative order).  Returns {k: (re, im)} of B_k / sqrt(pi) as exact
    Fractions; odd-xi-parity terms vanish identically, which forces
    B_k = 0 for k + l odd.
    """
    symbols = parametrix_symbols(v, N)
    l = len(theta) - 1 if theta is not None else 0
    coeffs = {}
    for M, sym in enumerate(symbols):
        if M > N:
            break
        composed = _apply_diff_operator(theta, sym, v.max_degree) if theta else sym
        for (a, b), poly in composed.terms.items():
            if b == 0 or a % 2 == 1:
                continue
            # exact diagonal factor: H_a(0) (i/2)^a = a! / ((a/2)! 2^a)
            diag = Fraction(_factorial(a), _factorial(a // 2) * 2 ** a)
            weight = diag / _factorial(b - 1)
            mean = poly.mean()
            power = Fraction(2 * b - a - 3, 2)
            k2 = 2 * power + l + 1  # index in the t^{(k - l - 1)/2} ladder
            if k2.denominator != 1:
                raise ShapeError("non-integer heat-coefficient index")
            k = int(k2)
            prev = coeffs.get(k, _QC_ZERO)
            coeffs[k] = _qc_add(prev, (mean[0] * weight, mean[1] * weight))
    return {k: val for k, val in sorted(coeffs.items())}


def heat_coefficient_floats(v: FourierPoly, N: int, theta=None):
    """B_k as floats (the exact rationals times sqrt(pi))."""
    return {k: complex(float(re) * np.sqrt(np.pi), float(im) * np.sqrt(np.pi))
            for k, (re, im) in heat_coefficients(v, N, theta).items()}


def _apply_diff_operator(theta, sym: LaurentSymbol, max_degree) -> LaurentSymbol:
    """Full symbol of theta o Op(sym) for theta = sum_j a_j(x) (d/dx)^j.

    theta's symbol is sum_j a_j(x) (i xi)^j; the composition adds
    sum_alpha (1/alpha!) (d/dxi)^alpha theta_sym (-i d/dx)^alpha sym.
    """
    out = LaurentSymbol()
    l = len(theta) - 1
    for j, coeff in enumerate(theta):
        if isinstance(coeff, (int, Fraction)):
            coeff = FourierPoly.constant(coeff, max_degree)
        if coeff.is_zero():
            continue
        # (i xi)^j = i^j xi^j; i^j cycles through (1, i, -1, -i)
        i_pow = [(Fraction(1), Fraction(0)), (Fraction(0), Fraction(1)),
                 (Fraction(-1), Fraction(0)), (Fraction(0), Fraction(-1))][j % 4]
        for alpha in range(j + 1):
            # d/dxi^alpha of xi^j = j!/(j-alpha)! xi^{j-alpha}
            fall = Fraction(_factorial(j), _factorial(j - alpha))
            dsym = sym
            for _ in range(alpha):
                dsym = dsym.dx().scale(0, -1)  # -i d/dx
            inv_fact = Fraction(1, _factorial(alpha))
            piece = dsym.mul_xi(j - alpha).mul_poly(coeff)
            piece = piece.scale(i_pow[0] * fall * inv_fact, i_pow[1] * fall * inv_fact)
            out = out + piece
    return out


# ---------------------------------------------------------------------------
# Spectral oracle and Volterra correction
# ---------------------------------------------------------------------------

def spectral_heat_oracle(v: FourierPoly, t, x, y, modes: int = 64):
    """Reference heat kernel by Fourier pseudospectral eigendecomposition.

    Builds H_{kl} = k^2 delta_{kl} + v_hat(k - l) on 2*modes+1 modes and sums
    e^{-t lambda_j} phi_j(x) conj(phi_j(y)).  Returns (value, last_mode_error)
    with the error estimate from the top-mode contribution.
    """
    if modes < 8:
        raise ShapeError("need at least 8 modes for the oracle")
    if t <= 0:
        raise ValueError("oracle needs t > 0")
    ks = np.arange(-modes, modes + 1)
    H = np.diag(ks.astype(float) ** 2).astype(complex)
    for m, (re, im) in v.coeffs.items():
        c = float(re) + 1j * float(im)
        idx = np.arange(len(ks))
        rows = idx[(idx - m >= 0) & (idx - m < len(ks))]
        H[rows, rows - m] += c
    evals, evecs = np.linalg.eigh(H)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ex = np.exp(1j * np.outer(x.ravel() if x.shape else [x], ks)) / np.sqrt(2.0 * np.pi)
    ey = np.exp(1j * np.outer(y.ravel() if y.shape else [y], ks)) / np.sqrt(2.0 * np.pi)
    phix = ex @ evecs
    phiy = ey @ evecs
    weights = np.exp(-t * evals)
    vals = (phix * weights) @ phiy.conj().T
    err = float(np.abs(weights[np.argmax(evals)]) / (2.0 * np.pi) * len(evals))
    if x.shape == () and y.shape == ():
        return complex(vals[0, 0]), err
    return vals.reshape(x.shape + y.shape), err


def _gauss_nodes(n, a, b):
    nodes, weights = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * (nodes + 1.0) + a, 0.5 * (b - a) * weights


class VolterraCorrector:
    """Iterated convolution corrections K = sum_k (-1)^k K_N * S_N^{*k}.

    Convolutions are over simplex times (tensor-product Gauss-Legendre via
    iterated one-dimensional integrals) and over the circle (trapezoid on a
    uniform grid, spectrally accurate for smooth periodic kernels).
    """

    def __init__(self, v: FourierPoly, N: int, n_time: int = 16, n_space: int = 32):
        self.par = HeatParametrix(v, N)
        self.n_time = n_time
        self.n_space = n_space
        self.zs = np.linspace(0.0, 2.0 * np.pi, n_space, endpoint=False)
        self.dz = 2.0 * np.pi / n_space

    def _matrix(self, kernel_fn, t):
        return kernel_fn(t, self.zs[:, None], self.zs[None, :])

    def _s_power(self, k, t):
        """Matrix of S_N^{*k} at time t on the spatial grid."""
        if k == 1:
            return self._matrix(self.par.remainder, t)
        nodes, weights = _gauss_nodes(self.n_time, 0.0, t)
        acc = np.zeros((self.n_space, self.n_space), dtype=complex)
        for u, w in zip(nodes, weights):
            left = self._matrix(self.par.remainder, t - u)
            right = self._s_power(k - 1, u)
            acc += w * (left @ right) * self.dz
        return acc

    def corrections(self, t, k_max: int = 2):
        """Partial sums [K_N, K_N - K_N*S, ...] on the grid, plus terms."""
        if k_max > 3:
            raise ShapeError("k_max above 3 is not supported (cost)")
        terms = [self._matrix(self.par.kernel, t)]
        for k in range(1, k_max + 1):
            nodes, weights = _gauss_nodes(self.n_time, 0.0, t)
            acc = np.zeros((self.n_space, self.n_space), dtype=complex)
            for u, w in zip(nodes, weights):
                left = self._matrix(self.par.kernel, t - u)
                right = self._s_power(k, u)
                acc += w * (left @ right) * self.dz
            terms.append((-1.0) ** k * acc)
        partials = [terms[0]]
        for term in terms[1:]:
            partials.append(partials[-1] + term)
        return partials, terms

    def diag_errors_vs_oracle(self, t, k_max: int = 2, modes: int = 64):
        """Sup over grid of |partial sum - spectral oracle| on the diagonal."""
        partials, _ = self.corrections(t, k_max)
        oracle, _ = spectral_heat_oracle(self.par.v, t, self.zs, self.zs, modes)
        diag_oracle = np.diag(oracle)
        return [float(np.abs(np.diag(p) - diag_oracle).max()) for p in partials]


def fit_power_law(ts, values):
    """Least-squares slope of log|values| against log t."""
    ts = np.asarray(ts, dtype=float)
    vals = np.abs(np.asarray(values, dtype=float))
    if np.any(vals <= 0):
        raise ValueError("power-law fit needs positive values")
    slope, intercept = np.polyfit(np.log(ts), np.log(vals), 1)
    return float(slope), float(np.exp(intercept))


def remainder_scaling(v: FourierPoly, N: int, ts, n_space: int = 64):
    """Fitted exponent and prefactor of sup_x |S_N(t, x, x)| over ts."""
    par = HeatParametrix(v, N)
    xs = np.linspace(0.0, 2.0 * np.pi, n_space, endpoint=False)
    sups = [float(np.abs(par.remainder(t, xs, xs)).max()) for t in ts]
    slope, prefactor = fit_power_law(ts, sups)
    return slope, prefactor, sups
