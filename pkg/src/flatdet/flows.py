"""Inner variations of codifferentials and constancy of the superdeterminant.

An inner variation is a path of codifferentials driven by a degree-preserving
generator, d(delta_tau)/dtau = [theta_tau, delta_tau]; the integrable case is
conjugation delta_tau = beta_tau delta_0 beta_tau^{-1}.  For matrix complexes
the restricted superdeterminant then obeys the exact anomaly law

    log sdet(D_tau|_L_tau) - log sdet(D_0|_L_0) = int_0^tau str(theta_s) ds,

so the superdeterminant is constant precisely along supertraceless variations.
The anomaly law is a matrix-level fact derived from the commutator structure;
it is verified by brute force in the test-suite before anything relies on it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from .errors import RegularityError, ShapeError
from .graded import GradedMap, graded_commutator, sdet_restricted, split_complement, supertrace

_RICHARDSON_STEP = 1e-5


def _central_derivative(family, tau, h=_RICHARDSON_STEP):
    """Richardson-extrapolated central difference of a GradedMap family."""
    def diff(step):
        hi, lo = family(tau + step), family(tau - step)
        return (hi - lo) * (1.0 / (2.0 * step))

    d1, d2 = diff(h), diff(h / 2.0)
    return d2 * (4.0 / 3.0) - d1 * (1.0 / 3.0)


@dataclass
class InnerVariation:
    """A one-parameter variation, either by generator or by conjugator.

    ``family(tau)`` returns the degree-preserving generator theta_tau
    (mode ``"generator"``) or the invertible conjugator beta_tau
    (mode ``"conjugator"``, with beta_0 = identity).  ``dfamily`` supplies the
    analytic tau-derivative of the family; when absent it is replaced by a
    Richardson central difference with step 1e-5.
    """

    mode: str
    family: Callable[[float], GradedMap]
    dfamily: Optional[Callable[[float], GradedMap]] = None

    def __post_init__(self):
        if self.mode not in ("generator", "conjugator"):
            raise ValueError(f"unknown variation mode {self.mode!r}")

    @classmethod
    def constant_generator(cls, theta: GradedMap):
        zero = GradedMap.zero(theta.dims, 0)
        return cls("generator", lambda tau: theta, lambda tau: zero)

    @classmethod
    def affine_generator(cls, theta0: GradedMap, theta1: GradedMap):
        return cls("generator",
                   lambda tau: theta0 + tau * theta1,
                   lambda tau: theta1)

    @classmethod
    def exp_conjugator(cls, theta: GradedMap):
        """beta_tau = exp(tau theta), whose generator is the constant theta."""
        def beta(tau):
            return GradedMap(theta.dims, 0, [expm(tau * b) for b in theta.blocks])

        def dbeta(tau):
            return GradedMap(theta.dims, 0,
                             [b @ expm(tau * b) for b in theta.blocks])

        return cls("conjugator", beta, dbeta)

    def theta(self, tau: float) -> GradedMap:
        """Generator of the variation at tau (beta' beta^{-1} when conjugating)."""
        if self.mode == "generator":
            return self.family(tau)
        beta = self.family(tau)
        dbeta = self.dfamily(tau) if self.dfamily else _central_derivative(self.family, tau)
        blocks = []
        for db, b in zip(dbeta.blocks, beta.blocks):
            if b.size == 0:
                blocks.append(b.copy())
                continue
            if abs(np.linalg.det(b)) < 1e-300:
                raise RegularityError("conjugator is singular")
            blocks.append(db @ np.linalg.inv(b))
        return GradedMap(beta.dims, 0, blocks)


def _pack(gmap):
    parts = [b.reshape(-1) for b in gmap.blocks]
    vec = np.concatenate(parts) if parts else np.zeros(0, dtype=complex)
    return np.concatenate([vec.real, vec.imag])


def _unpack(vec, template):
    half = vec.size // 2
    cvec = vec[:half] + 1j * vec[half:]
    blocks, pos = [], 0
    for b in template.blocks:
        blocks.append(cvec[pos:pos + b.size].reshape(b.shape))
        pos += b.size
    return GradedMap(template.dims, template.shift, blocks)


def inner_variation_path(delta0: GradedMap, variation: InnerVariation, tau: float,
                         rtol: float = 1e-12, atol: float = 1e-12) -> GradedMap:
    """Transport delta_0 along the variation to parameter tau.

    Conjugator mode returns beta_tau delta_0 beta_tau^{-1} exactly; generator
    mode integrates the commutator flow d(delta)/dtau = [theta, delta] with
    adaptive RK45 stepping, which preserves nilpotency to integration
    accuracy.
    """
    if delta0.shift != -1:
        raise ShapeError("expected a shift -1 codifferential")
    if variation.mode == "conjugator":
        beta = variation.family(tau)
        for k in range(beta.top + 1):
            b = beta.block(k)
            if b.size and abs(np.linalg.det(b)) < 1e-300:
                raise RegularityError(f"conjugator is singular at degree {k}")
        blocks = []
        for k in range(delta0.top + 1):
            blk = delta0.block(k)
            if blk.size == 0:
                blocks.append(blk.copy())
                continue
            blocks.append(beta.block(k - 1) @ blk @ np.linalg.inv(beta.block(k)))
        return GradedMap(delta0.dims, -1, blocks)

    def rhs(s, y):
        delta = _unpack(y, delta0)
        theta = variation.theta(s)
        comm = theta.compose(delta) - delta.compose(theta)
        return _pack(comm)

    if tau == 0.0:
        return delta0.copy()
    sol = solve_ivp(rhs, (0.0, tau), _pack(delta0), method="RK45",
                    rtol=rtol, atol=atol, dense_output=False)
    if not sol.success:
        raise RegularityError(f"commutator flow failed: {sol.message}")
    return _unpack(sol.y[:, -1], delta0)


def duhamel_derivative(D_family: Callable[[float], GradedMap], tau: float, t: float,
                       order: int = 32,
                       dD: Optional[Callable[[float], GradedMap]] = None) -> GradedMap:
    """tau-derivative of exp(-t D_tau) as a time-ordered perturbation integral.

    Evaluates -int_0^t exp(-(t-u) D) D' exp(-u D) du by Gauss-Legendre
    quadrature with the given node count; D' is the supplied analytic
    derivative or a Richardson central difference of the family.
    """
    D = D_family(tau)
    Ddot = dD(tau) if dD is not None else _central_derivative(D_family, tau)
    nodes, weights = np.polynomial.legendre.leggauss(order)
    u = 0.5 * t * (nodes + 1.0)
    w = 0.5 * t * weights
    blocks = []
    for k in range(D.top + 1):
        blk = D.block(k)
        if blk.size == 0:
            blocks.append(blk.copy())
            continue
        acc = np.zeros_like(blk)
        for ui, wi in zip(u, w):
            acc += wi * (expm(-(t - ui) * blk) @ Ddot.block(k) @ expm(-ui * blk))
        blocks.append(-acc)
    return GradedMap(D.dims, 0, blocks)


def constancy_report(delta0: GradedMap, d: GradedMap, variation: InnerVariation,
                     tau_grid, exact_tol: float = 1e-9, anomaly_tol: float = 1e-8) -> dict:
    """Sweep the superdeterminant along a variation and test the anomaly law.

    For each grid point the restricted superdeterminant of D_tau = [delta_tau, d]
    is compared with the prediction sdet_0 * exp(int_0^tau str theta), the
    integral taken by the trapezoid rule on the grid.  When str(theta) vanishes
    identically on the grid the report additionally asserts exact constancy.
    """
    tau_grid = [float(t) for t in tau_grid]
    if not tau_grid or tau_grid[0] != 0.0:
        tau_grid = [0.0] + tau_grid
    rows = []
    str_values = []
    sdet0 = None
    failed = False
    for tau in tau_grid:
        row = {"tau": tau}
        try:
            delta_tau = inner_variation_path(delta0, variation, tau)
            D_tau = graded_commutator(delta_tau, d)
            split = split_complement(delta_tau)
            sdet = sdet_restricted(D_tau, split)
            theta = variation.theta(tau)
            row["sdet"] = sdet
            row["str_theta"] = supertrace(theta)
            str_values.append(row["str_theta"])
            if sdet0 is None:
                sdet0 = sdet
        except (RegularityError, ShapeError, ValueError) as exc:
            row["failed"] = str(exc)
            failed = True
            str_values.append(None)
        rows.append(row)
    # trapezoid accumulation of the anomaly integral along the grid
    integral = 0.0 + 0.0j
    max_rel_dev = 0.0
    max_anomaly_dev = 0.0
    for i, row in enumerate(rows):
        if "failed" in row:
            continue
        if i > 0 and "failed" not in rows[i - 1]:
            dt = rows[i]["tau"] - rows[i - 1]["tau"]
            integral += 0.5 * dt * (rows[i]["str_theta"] + rows[i - 1]["str_theta"])
        predicted = sdet0 * np.exp(integral)
        row["predicted"] = predicted
        row["anomaly_integral"] = integral
        rel = abs(row["sdet"] - sdet0) / abs(sdet0)
        # principal log of the ratio to the prediction; branch-safe since the
        # accepted deviation is far below 2*pi
        dev = abs(np.log(row["sdet"] / predicted))
        row["rel_dev_from_sdet0"] = rel
        row["anomaly_dev"] = dev
        max_rel_dev = max(max_rel_dev, rel)
        max_anomaly_dev = max(max_anomaly_dev, dev)
    supertraceless = all(v is not None and abs(v) <= 1e-12 for v in str_values)
    report = {
        "rows": rows,
        "supertraceless": supertraceless,
        "max_rel_dev": max_rel_dev,
        "max_anomaly_dev": max_anomaly_dev,
        "failed": failed,
        "anomaly_pass": bool(max_anomaly_dev <= anomaly_tol) and not failed,
    }
    if supertraceless:
        report["constancy_pass"] = bool(max_rel_dev <= exact_tol) and not failed
    return report
