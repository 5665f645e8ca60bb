"""Inference on the modal location of weak directional signals on the sphere."""

from .errors import (ConfigError, DegenerateDenominator, DegenerateMean,
                     DomainError, NoConvergence, NormalizationError,
                     ParseError, SphereModeError, TargetUnreachable,
                     UnsupportedDimension, UnsupportedRegime, ZeroVector)
from .geom import (TangentNormalParts, frame_to, normalize, project_tangent,
                   reconstruct, sphere_grid, tangent_normal)
from .limits import (ChiSquare, NoncentralChiSquare, ProjectedNormal,
                     QuantileCache, UniformSphere, WaldMixture,
                     asymptotic_power, critical_value, mc_critical_value,
                     sample_law, spherical_mean_limit, watson_noncentrality)
from .model import (Moments, RadialFunction, Regime, RegimeSpec, RotSymModel,
                    calibrate_kappa, check_spherical_constraint,
                    classify_rate, local_alternative, locality_from_kappa,
                    marginal_u_density, mean_cosine, moments,
                    normalizing_constant, radial_function)
from .sampling import (DEFAULT_MASTER_SEED, RngStream, derive_stream,
                       sample_fvml, sample_rotsym, sample_uniform)
from .stats import (Sample, TestOutcome, decide, fvml_log_likelihood_ratio,
                    lan_central_sequence, oracle_statistic, q_bc_statistic,
                    spherical_mean, wald_statistic, watson_statistic)
from .zones import (ConfidenceZone, connected_components, invert_test,
                    preferred_component, zone_area_fraction, write_zone_csv)

__version__ = "0.1.0"
