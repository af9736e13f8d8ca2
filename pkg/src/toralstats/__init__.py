"""Statistics of random compositions of hyperbolic toral automorphisms.

Two integer matrices act on the torus; a Bernoulli coin picks one at each
step.  This package computes the ergodic-theoretic quantities of that
random system along two complementary routes:

* exactly, through the transfer-operator action on sparse Fourier
  coefficients (correlations, the CLT variance and its dependence on the
  Bernoulli parameter, periodic-orbit coboundary obstructions, cone and
  norm constants);
* statistically, through Monte Carlo over bit-exact fixed-point
  trajectories (characteristic functions, empirical variances, normality
  distances, large-deviation tails).

The two routes overlap on purpose: every exact anchor value doubles as a
calibration target for the sampled estimators, and the test suite holds
them against each other.
"""

from .lattice import (CompositionOverflowError, ConeConstants, GeneratorPair,
                      IntMatrix, MapWord, ProductClass, TorusPoint, apply_map,
                      classify_conjugate_product, compose_word,
                      conjugate_product, default_pair,
                      hyperbolicity_constants, validate_generator)
from .montecarlo import (CharFnEstimate, Environment, PairedMomentEstimate,
                         SampleStats, TailEstimate, annealed_char_fn,
                         annealed_samples, birkhoff_sum, correlation_mc,
                         empirical_variance_annealed,
                         empirical_variance_quenched, ks_distance_to_normal,
                         large_deviation_tail, mann_kendall_z,
                         no_increasing_trend, paired_second_moment,
                         quenched_char_fn, quenched_char_fn_ladder,
                         quenched_samples, sample_environment, wilson_interval)
from .observable import (LagrangianDirection, PqNormValue, TrigPoly,
                         cr_norm_upper, evaluate, inner_product, multiply,
                         pq_norm, r_seminorm, random_real_polynomial)
from .rigidity import (CoboundaryReport, CoboundaryVerdict,
                       EnumerationBudgetError, ObstructionWitness, OrbitSum,
                       PeriodicOrbit, coboundary_obstruction, fixed_points,
                       orbit_sums, smith_normal_form)
from .rng import CounterStream
from .transfer import (CorrelationSeries, CorrelationValue, apply_averaged,
                       apply_markov, apply_transfer, compose_observable,
                       correlation, doubled_correlation, lasota_yorke_report)
from .variance import (VariancePolynomial, VarianceResult, annealed_variance,
                       finite_horizon_variance, variance_polynomial,
                       variance_sweep)

__version__ = "0.1.0"

__all__ = [
    "CharFnEstimate",
    "CoboundaryReport",
    "CoboundaryVerdict",
    "CompositionOverflowError",
    "ConeConstants",
    "CorrelationSeries",
    "CorrelationValue",
    "CounterStream",
    "EnumerationBudgetError",
    "Environment",
    "GeneratorPair",
    "IntMatrix",
    "LagrangianDirection",
    "MapWord",
    "ObstructionWitness",
    "OrbitSum",
    "PairedMomentEstimate",
    "PeriodicOrbit",
    "PqNormValue",
    "ProductClass",
    "SampleStats",
    "TailEstimate",
    "TorusPoint",
    "TrigPoly",
    "VariancePolynomial",
    "VarianceResult",
    "annealed_char_fn",
    "annealed_samples",
    "annealed_variance",
    "apply_averaged",
    "apply_map",
    "apply_markov",
    "apply_transfer",
    "birkhoff_sum",
    "classify_conjugate_product",
    "coboundary_obstruction",
    "compose_observable",
    "compose_word",
    "conjugate_product",
    "correlation",
    "correlation_mc",
    "cr_norm_upper",
    "default_pair",
    "doubled_correlation",
    "empirical_variance_annealed",
    "empirical_variance_quenched",
    "evaluate",
    "finite_horizon_variance",
    "fixed_points",
    "hyperbolicity_constants",
    "inner_product",
    "ks_distance_to_normal",
    "large_deviation_tail",
    "lasota_yorke_report",
    "mann_kendall_z",
    "multiply",
    "no_increasing_trend",
    "orbit_sums",
    "paired_second_moment",
    "pq_norm",
    "quenched_char_fn",
    "quenched_char_fn_ladder",
    "quenched_samples",
    "r_seminorm",
    "random_real_polynomial",
    "sample_environment",
    "smith_normal_form",
    "validate_generator",
    "variance_polynomial",
    "variance_sweep",
    "wilson_interval",
]
