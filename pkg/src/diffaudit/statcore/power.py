"""Closed-form planning for balanced discriminative tests (m = n = N/2)."""
import math

from scipy.special import ndtr, ndtri

from ..errors import InvalidInputError


def normal_cdf(x):
    return float(ndtr(x))


def normal_quantile(p):
    if not 0.0 < p < 1.0:
        raise InvalidInputError(f"quantile level must be in (0, 1), got {p}")
    return float(ndtri(p))


def _check_n(N):
    if int(N) != N or N < 4 or N % 2:
        raise InvalidInputError(f"N must be an even integer >= 4, got {N}")


def _check_alpha(alpha):
    if not 0.0 < alpha <= 0.5:
        raise InvalidInputError(f"alpha must be in (0, 0.5], got {alpha}")


def null_auc_se(N):
    """Standard error of AUC under the null for a balanced design."""
    return math.sqrt((N + 1) / (3.0 * N * N))


def min_significant_auc(N, alpha):
    _check_n(N)
    _check_alpha(alpha)
    return 0.5 + normal_quantile(1.0 - alpha) * null_auc_se(N)


def min_detectable_auc(N, alpha, beta):
    _check_n(N)
    _check_alpha(alpha)
    if not 0.0 < beta < 1.0:
        raise InvalidInputError(f"beta must be in (0, 1), got {beta}")
    return 0.5 + (normal_quantile(1.0 - alpha) + normal_quantile(1.0 - beta)) * null_auc_se(N)


def required_judgments(delta, alpha, beta):
    """Smallest even N detecting an AUC gap ``delta`` at level alpha with power 1 - beta."""
    if not 0.0 < delta < 0.5:
        raise InvalidInputError(f"delta must be in (0, 0.5), got {delta}")
    _check_alpha(alpha)
    if not 0.0 < beta < 1.0:
        raise InvalidInputError(f"beta must be in (0, 1), got {beta}")
    z = normal_quantile(1.0 - alpha) + normal_quantile(1.0 - beta)
    n = math.ceil(z * z / (3.0 * delta * delta))
    return n + (n % 2)
