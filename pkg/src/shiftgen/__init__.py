"""Simulation and Monte Carlo verification for shift-generated classes of random fields."""

from .core import FieldConfig, NormKind, PathSample, PointSet, Sample, Window, norm_value, shift_points, union_sites
from .errors import (ConfigurationError, ConstructionError, ContractError, DegenerateTiltingError,
                     NumericalError, PositivityError, ShiftgenError)
from .estimate import MCEstimate, welch
from .functionals import (HomogeneousFunctional, QuadratureRule, ShiftDensity, builtin_functional,
                          integral_S, mc_integral, sojourn_B)
from .gaussian import GaussianSampler, VariogramModel, cov_from_variogram, sample_gaussian
from .maxstable import (DeHaanConfig, ExponentQuery, dehaan_batch, dehaan_sample, exponent_estimate,
                        fidi_cdf, stationarity_check)
from .representors import (BrownResnick, ClusterProfile, ConstantRepresentor, Profile, ScaledRepresentor,
                           SignedSplitRepresentor, br_sample, cluster_sample, signed_split,
                           validate_representor)
from .rng import derive_rng_stream, run_chunks
from .transforms import (ParetoMultiplier, ShiftTransform, TailSampler, TiltedSampler, sample_tail_Y,
                         sample_theta, transform_zn)
from .verify import IdentityReport, IdentitySpec, verify, verify_boll, verify_boll22, verify_do20, verify_tyy

__version__ = "0.1.0"
