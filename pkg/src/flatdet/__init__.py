"""Flat superdeterminants of graded complexes at desk scale.

Exact finite-dimensional engine for codifferentials and their characteristic
operators, spectral zeta regularization with Hurwitz continuation, twisted CW
torsion, Gram-metric anomaly ledgers, a one-dimensional heat-kernel
parametrix, and periodic-orbit zeta functions for toy hyperbolic systems.
"""

from .errors import (
    AbscissaError,
    AcyclicityError,
    ConvergenceError,
    MetricError,
    RegularityError,
    ShapeError,
)
from .graded import (
    GradedMap,
    GradedVectorSpace,
    PairingForm,
    Splitting,
    acyclicity_check,
    check_codifferential,
    graded_commutator,
    random_acyclic_map,
    restricted_supertrace,
    sdet_restricted,
    split_complement,
    supertrace,
)
from .flows import InnerVariation, constancy_report, duhamel_derivative, \
    inner_variation_path
from .hodge import MetricFamily, adjoint_codifferential, metric_inner_variation, \
    supervolume_normalize, torsion_anomaly_experiment
from .zeta import (
    CutoffSequence,
    SpectrumByDegree,
    circle_torsion,
    heat_trace,
    hurwitz_zeta,
    log_sdet_via_zeta,
    mellin_f_closed,
    mellin_f_numeric,
    spectral_zeta,
)
from .cw import TwistedCWData, build_twisted_cochain, combinatorial_torsion
from .parametrix import (
    FourierPoly,
    HeatParametrix,
    heat_coefficients,
    kernel_from_symbol,
    parametrix_symbols,
    parse_potential,
    spectral_heat_oracle,
)
from .orbits import (
    OrbitCatalog,
    cat_map_catalog,
    guillemin_comb,
    orbit_log_sdet,
    ruelle_zeta_truncated,
    subshift_catalog,
    zeta_closed_form_cat,
    zeta_transfer_determinant,
)

__version__ = "0.1.0"
