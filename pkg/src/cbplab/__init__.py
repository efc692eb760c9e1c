"""cbplab: sections, Fourier transforms of norm powers, and volume
comparisons for convex bodies invariant under blockwise rotations."""

from .bodies import (ComplexLqBall, ConvexityReport, EuclideanBall,
                     MollifiedBody, RadialPerturbation, ScaledBody, StarBody,
                     block_moduli, convexity_probe, mollify, norm_eval,
                     radial_eval, radial_metric, scale)
from .busemann_petty import (BpReport, ConstructionFailedError,
                             ConstructionImpossibleError, HarmonicBump,
                             bp_construct, bp_verify, holder_chain_check)
from .embedding import EmbeddingVerdict, embedding_interval, scan
from .fourier import (CalibrationError, FtSample, MultiplierTable,
                      UnsupportedRouteError, classical_ft_constant,
                      classical_multiplier,
                      ft_derivative_route, ft_fractional_route,
                      ft_multiplier_route, ft_value, multiplier_table,
                      pairing_oracle, parseval_check, section_profile,
                      sph_identity_check)
from .frames import ComplexFrame, DirectionGrid, make_frame, make_grid, perp
from .harmonics import (HarmonicAtom, build_invariant_harmonics,
                        symmetric_harmonic_atoms)
from .quadrature import (Estimate, PoisonedEstimateError, SphereRule,
                         fractional_radial, integrate_sphere, kahan_reduce,
                         sphere_area)
from .sections import (NoisyEstimateError, RootBracketError,
                       laplacian_at_zero, parallel_section, section_volume,
                       volume)
from .specs import SpecError, parse_body, parse_grid, parse_rule

__version__ = "0.1.0"
