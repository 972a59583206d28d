"""Power-regime classification and the coupling-penalty diagnostic.

An estimate v of a signal x sits in exactly one of three power regimes,
decided by comparing the estimate's mean power ev2 = E[v²] to the signal's
mean power ex2 = E[x²]:

    power_dominant      ev2 > ex2   (the estimate carries excess power)
    power_conservative  ev2 < ex2
    power_balance       ev2 = ex2

On empirical moments the coupling E[v·e] between the estimate and its error
e = v - x decomposes exactly as

    coupling = mse/2 + (ev2 - ex2)/2,

so a power-dominant estimate with any nonzero coupling must exceed half its
own mean squared error: coupling > mse/2.  That is the penalty this module
checks.  Conversely, in the conservative and balance regimes the coupling is
capped at mse/2.  A lower bound of zero is sometimes assumed alongside the
cap but does not follow from the decomposition; negative coupling is
therefore reported verbatim and only flagged informationally.

Exact equality of powers has measure zero on real data, so the balance label
is granted inside a relative tolerance band around ev2 = ex2 (default 1e-6).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .errors import ZeroSignalPower
from .moments import MomentStats
from .textio import dumps_stable

# Relative half-width of the band around ev2 = ex2 that counts as balance.
BALANCE_TOL = 1e-6
# Couplings within tol * max(1, mse) of zero are degenerate: the strict
# penalty bound is not asserted for them.
DEGENERACY_TOL = 1e-9


class RegimeLabel(str, Enum):
    POWER_DOMINANT = "power_dominant"
    POWER_CONSERVATIVE = "power_conservative"
    POWER_BALANCE = "power_balance"


@dataclass(frozen=True)
class CouplingDecomposition:
    """The two halves of the coupling: half the mse plus half the power gap."""

    coupling: float
    half_mse: float
    half_power_gap: float
    residual: float


@dataclass(frozen=True)
class PenaltyVerdict:
    """Outcome of checking the regime-appropriate coupling bound.

    In the dominant regime the law is coupling > bound (strict) unless the
    coupling is degenerate; in the conservative/balance regimes it is
    coupling <= bound.  ``negative_coupling`` is informational only.
    """

    regime: RegimeLabel
    coupling: float
    bound: float
    satisfied: bool
    degenerate: bool
    negative_coupling: bool


@dataclass(frozen=True)
class TriadReport:
    """Bias, error variance and power ratio of an estimate, with verdict."""

    bias: float
    error_variance: float
    power_ratio: float
    mse: float
    coupling: float
    regime: RegimeLabel
    verdict: PenaltyVerdict


def classify_powers(ex2: float, ev2: float, balance_tol: float = BALANCE_TOL) -> RegimeLabel:
    """Classify from the two mean powers alone.

    Requires ex2 > 0: with a zero-power signal every ratio and regime is
    undefined.  balance_tol = 0 degrades to the exact trichotomy.
    """
    if balance_tol < 0.0:
        raise ValueError("balance_tol must be non-negative")
    if ex2 <= 0.0:
        raise ZeroSignalPower("signal mean power is zero; regimes are undefined")
    gap = ev2 - ex2
    band = balance_tol * ex2
    if abs(gap) <= band:
        return RegimeLabel.POWER_BALANCE
    if gap > band:
        return RegimeLabel.POWER_DOMINANT
    return RegimeLabel.POWER_CONSERVATIVE


def classify_regime(stats: MomentStats, balance_tol: float = BALANCE_TOL) -> RegimeLabel:
    return classify_powers(stats.ex2, stats.ev2, balance_tol)


def decompose_coupling(stats: MomentStats) -> CouplingDecomposition:
    """Split the coupling into half_mse + half_power_gap and report the residual.

    The residual is pure rounding noise; on exact arithmetic it is zero.
    """
    half_mse = 0.5 * stats.mse
    half_power_gap = 0.5 * (stats.ev2 - stats.ex2)
    residual = stats.coupling - half_mse - half_power_gap
    return CouplingDecomposition(
        coupling=stats.coupling,
        half_mse=half_mse,
        half_power_gap=half_power_gap,
        residual=residual,
    )


def check_penalty(
    stats: MomentStats,
    tol: float = DEGENERACY_TOL,
    balance_tol: float = BALANCE_TOL,
) -> PenaltyVerdict:
    """Check the regime-appropriate coupling bound against mse/2.

    ``tol`` plays two roles: couplings within tol * max(1, mse) of zero are
    marked degenerate (excluded from the strict dominant-regime claim), and
    the conservative/balance cap is allowed tol of absolute slack.
    A degenerate dominant coupling satisfies the verdict vacuously.
    """
    if tol < 0.0:
        raise ValueError("tol must be non-negative")
    regime = classify_regime(stats, balance_tol)
    bound = 0.5 * stats.mse
    degenerate = abs(stats.coupling) <= tol * max(1.0, stats.mse)
    if regime is RegimeLabel.POWER_DOMINANT:
        satisfied = True if degenerate else stats.coupling > bound
    else:
        satisfied = stats.coupling <= bound + tol
    return PenaltyVerdict(
        regime=regime,
        coupling=stats.coupling,
        bound=bound,
        satisfied=satisfied,
        degenerate=degenerate,
        negative_coupling=stats.coupling < 0.0,
    )


def triad_report(
    stats: MomentStats,
    balance_tol: float = BALANCE_TOL,
    tol: float = DEGENERACY_TOL,
) -> TriadReport:
    """Assemble the full diagnostic for one estimate.

    error_variance is derived as mse - bias², so the decomposition
    mse = bias² + error_variance holds exactly by construction.
    """
    regime = classify_regime(stats, balance_tol)
    verdict = check_penalty(stats, tol=tol, balance_tol=balance_tol)
    bias = stats.mean_e
    error_variance = stats.mse - bias * bias
    return TriadReport(
        bias=bias,
        error_variance=error_variance,
        power_ratio=stats.ev2 / stats.ex2,
        mse=stats.mse,
        coupling=stats.coupling,
        regime=regime,
        verdict=verdict,
    )


def verdict_as_dict(verdict: PenaltyVerdict) -> dict:
    return {
        "regime": verdict.regime.value,
        "coupling": verdict.coupling,
        "bound": verdict.bound,
        "satisfied": verdict.satisfied,
        "degenerate": verdict.degenerate,
        "negative_coupling": verdict.negative_coupling,
    }


def report_as_dict(report: TriadReport) -> dict:
    # Key order is part of the output contract; golden files diff against it.
    return {
        "bias": report.bias,
        "error_variance": report.error_variance,
        "power_ratio": report.power_ratio,
        "mse": report.mse,
        "coupling": report.coupling,
        "regime": report.regime.value,
        "verdict": verdict_as_dict(report.verdict),
    }


def report_to_json(report: TriadReport) -> str:
    """Single-record JSON document with stable key order."""
    return dumps_stable(report_as_dict(report))
