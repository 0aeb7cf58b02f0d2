"""Exception hierarchy.

Three branches map onto the CLI exit codes: ConfigError (2), DataError (3),
NumericalError (4). Anything else escaping a command is a genuine bug and is
not caught.
"""

from __future__ import annotations


class DynallocError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(DynallocError):
    """Invalid run configuration: unknown command/strategy, bad flag, missing file."""


class DataError(DynallocError):
    """Input data violates a documented precondition."""


class NumericalError(DynallocError):
    """A numerical procedure failed: no convergence, singular/indefinite matrix."""


# -- config errors -----------------------------------------------------------

class UnknownStrategy(ConfigError):
    """Strategy name not in the registry."""


class BadConfigValue(ConfigError):
    """A configuration field is out of its documented range."""


class UnknownConfigKey(ConfigError):
    """A config-file key is not one the tools recognize."""


class MissingInputFile(ConfigError):
    """A referenced input file does not exist."""


# -- data errors -------------------------------------------------------------

class MissingValue(DataError):
    """Empty or non-numeric cell in an input table."""


class NonMonotonicDates(DataError):
    """Dates are not strictly increasing."""


class NonPositivePrice(DataError):
    """Price level <= 0 where prices were expected."""


class ImplausibleReturn(DataError):
    """A daily return with |r| >= 1; almost certainly a data fault."""


class EmptyPanel(DataError):
    """Operation requires at least one row."""


class WeightSumError(DataError):
    """Composite weights do not sum to 1."""


class UnknownAsset(DataError):
    """Asset identifier not present in the panel."""


class ZeroVariance(DataError):
    """Series is constant where variation is required."""


class SeriesTooShort(DataError):
    """Series shorter than the documented minimum length."""


class ConstantColumn(DataError):
    """A matrix column is constant; ranks are undefined."""


class OutOfRangeInput(DataError):
    """Value outside its documented domain, e.g. a pseudo-observation at 0 or 1."""


class BadTailLevel(DataError):
    """Tail level q outside (0, 0.5)."""


class BadAlpha(DataError):
    """Confidence level outside (0, 1)."""


class SampleTooSmall(DataError):
    """Too few observations for a tail estimate."""


class DegenerateWeights(DataError):
    """Weighted-pairwise denominator is zero (fewer than two active assets)."""


class InsufficientHistory(DataError):
    """Window does not contain the required number of observations."""


class InsufficientWindow(DataError):
    """Trailing window extends before the start of the data."""


class CollinearRegressors(DataError):
    """Regression design matrix is rank deficient."""


class TooFewAssets(DataError):
    """Cross-sectional statistic needs at least three assets."""


class NoEligibleGroups(DataError):
    """Every group fell below the minimum size for quintile construction."""


class LengthMismatch(DataError):
    """Aligned inputs have inconsistent lengths."""


class NoOverlap(DataError):
    """Label series and data share no dates."""


class ZeroVol(DataError):
    """Volatility is zero where a ratio requires it to be positive."""


class ResultTooShort(DataError):
    """Backtest result too short for the requested metric."""


class TooFewStrategies(DataError):
    """Clustering needs at least two strategies."""


# -- numerical errors --------------------------------------------------------

class NonConvergence(NumericalError):
    """Optimizer exhausted its multi-start/iteration budget without a usable optimum."""


class InvalidParams(NumericalError):
    """Parameter bundle violates its invariants."""


class InvalidModel(NumericalError):
    """A fitted model object is internally inconsistent."""


class SingularCorrelation(NumericalError):
    """Correlation matrix undefined or numerically singular."""


class NotPSD(NumericalError):
    """Matrix is indefinite beyond the repair tolerance."""


class NotPD(NumericalError):
    """Matrix is not positive definite where the algorithm requires it."""


class InfeasibleLP(NumericalError):
    """LP reported infeasible. Cannot occur with simplex constraints; a bug if seen."""


class NumericalUnderflow(NumericalError):
    """Probability recursion underflowed. Mitigated by log-space scaling; a bug if seen."""
