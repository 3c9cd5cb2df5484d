"""Numerical experiments for singular integral operators with semi-almost
periodic symbols on variable Lebesgue spaces."""

from .exponents import (VariableExponent, constant, lerner_exponent, decay_exponent,
                        sum_exponents, clamp_exponent, scale_exponent, dual, parse_exponent,
                        parse_number, oscillation, so_diagnostic)
from .functions import FunctionHandle, function_from_spec
from .modular import (modular_derivative, luxemburg_norm, luxemburg_norm_report,
                      vector_norm, implicit_sequence_solve, ModularCurve,
                      RootFindingError, NonMonotoneError)
from .quadrature import QuadratureSpec
from .shifts import Translation
from .symbols import (APPolynomial, SAPSymbol, BudgetExhausted, evaluate_ap, evaluate_sap,
                      wiener_norm, shift_defect, kronecker_translations, symbol_from_dict,
                      symbol_to_dict)
from .sio import (cauchy_apply, apply_P, apply_Q, CauchyTransform, GridSpec,
                  assemble_finite_section, identity_residuals, involution_residual, sigma_min,
                  sigma_min_sweep, s_norm_formula)
from .limits import (TranslationPlan, PlanError, key_lemma_experiment, tld_decomposition,
                     limit_symbol_sequence, extract_convergent_subsequence,
                     apriori_estimate_experiment, segment_exploration)

__version__ = "0.1.0"
