"""Information extraction on the unit hypercube.

Quantile-normalize the columns of a table, model joint densities with an
orthonormal polynomial basis, and remove from a variable the information
carried by others through invertible conditional-CDF transforms. On top of
that: decoupling into independent components, direct mutual information and
multi-feature Granger delay analysis.
"""
__version__ = "0.1.0"

from .errors import (CapacityExceeded, FormatError, InfoExtractError, InvalidInput,
                     NumericalFailure, ParseError, RefusedOverwrite, Unsupported)
from .table import SampleTable
from .normalization import (QuantileMap, denormalize_table, fit_quantile_map, forward_quantile,
                            inverse_quantile, normalize_table)
from .hcr import (CalibratedDensity1D, HcrBasis, JointDensityModel, MomentRegressionModel,
                  calibrate, conditional_slice, fit_joint, fit_moment_regression,
                  legendre_matrix)
from .extraction import (ExtractionLayer, apply_extraction, fit_extraction, invert_extraction,
                         invert_layers, iterate_extraction)
from .decoupling import (DecoupledDataset, DependenceReport, decouple, dependence_report,
                         reconstruct, symmetric_extract)
from .infoflow import (MiEstimate, conditional_mi_reference, direct_mutual_information,
                       mutual_information_binned, mutual_information_hcr)
from .granger import (DelayCoefficientField, DelayFeatureDecomposition, DelayProfile,
                      analyze_pair, delay_coefficients, delay_profile, delay_spectrum,
                      fit_residues, multivariate_granger, pca_reduce)
from .datasets import GeneratorSpec, generate, load_csv, synth, write_csv
from .svg import emit_svg_lineplot, render_svg
