"""Single-best (K = 1) optimal thresholds, exactly.

The optimal policy with J selection quotas releases quota j at time
t_j = exp(-theta_j), where the theta_j are rational numbers produced by an
O(J^3) recursion over polynomials in ln x:

    theta_1 = 1,   q_1(x) = 1 + ln x            on [t_1, 1]
    theta_{j+1} = 1 + int_{t_j}^1 q_j(y)/y dy
    q_{j+1}(x) = 1 + ln x + int_{max(x, t_j)}^1 q_j(y)/y dy   on [t_{j+1}, 1]

Each q_j is a polynomial in ln x with rational coefficients between
successive thresholds, so the whole construction runs in exact arithmetic;
q_j doubles as an optimality certificate (q_j(t_j) = 0, q_j(1) = 1, and the
piecewise data witnesses the complementary-slackness equalities).  Floats
appear only in the reporting helpers.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal, localcontext
from fractions import Fraction

from .exact import (
    DEFAULT_PRECISION_BITS,
    IntervalPiece,
    LogPolynomial,
    Rational,
    antiderivative_over_x,
    antiderivative_plain,
    definite_integral_over_x,
    eval_at_theta,
    exp_neg,
    rational_to_decimal,
    working_context,
)

# Bit growth of the rationals is super-linear in J; past this point a run
# needs an explicit opt-in.
DEFAULT_MAX_J = 16


@dataclass(frozen=True)
class ThetaSequence:
    """theta_1 < theta_2 < ... < theta_J, all rational, theta_1 = 1."""

    thetas: tuple[Rational, ...]

    @property
    def J(self) -> int:
        return len(self.thetas)

    def theta(self, j: int) -> Rational:
        """theta_j with the convention theta_0 = 0."""
        return Fraction(0) if j == 0 else self.thetas[j - 1]


@dataclass(frozen=True)
class DualCertificateK1:
    """Exact dual functions q_1..q_J.

    pieces[j-1][k-1] covers x in [t_k, t_(k-1)] (theta in
    [theta_(k-1), theta_k]); q_j is zero below t_j.
    """

    thetas: ThetaSequence
    pieces: tuple[tuple[IntervalPiece, ...], ...]

    @property
    def J(self) -> int:
        return self.thetas.J

    def q_at_theta(self, j: int, theta: Rational) -> Rational:
        """Exact q_j evaluated at x = exp(-theta); zero for theta > theta_j."""
        if j == 0:
            return Fraction(0)
        if theta > self.thetas.theta(j):
            return Fraction(0)
        for piece in self.pieces[j - 1]:
            if piece.theta_lo <= theta <= piece.theta_hi:
                return eval_at_theta(piece.poly, theta)
        raise ValueError(f"theta {theta} outside [0, theta_{j}]")


def _generate(J: int) -> tuple[list[Rational], list[list[LogPolynomial]]]:
    """Run the rational recursion; rows[j-1][k-1] is q_j on [t_k, t_(k-1)]."""
    thetas: list[Rational] = [Fraction(1)]
    rows: list[list[LogPolynomial]] = [[LogPolynomial.from_coeffs([1, 1])]]
    one_plus_ln = LogPolynomial.from_coeffs([1, 1])
    for j in range(1, J):
        prev = rows[-1]
        new_row: list[LogPolynomial] = []
        # Running sum of int q_j(y)/y dy over the whole segments above the
        # current one; by segment j it equals int_{t_j}^1 q_j(y)/y dy.
        acc = Fraction(0)
        for k in range(1, j + 1):
            theta_km1 = Fraction(0) if k == 1 else thetas[k - 2]
            if k > 1:
                theta_km2 = Fraction(0) if k == 2 else thetas[k - 3]
                acc += definite_integral_over_x(prev[k - 2], theta_km2, theta_km1)
            anti = antiderivative_over_x(prev[k - 1], max_len=J + 1)
            # q_{j+1} = 1 + ln x + [A(-theta_{k-1}) - A(ln x)] + acc on this segment
            const = eval_at_theta(anti, theta_km1) + acc
            poly = one_plus_ln - anti + LogPolynomial.from_coeffs([const])
            new_row.append(poly)
        acc += definite_integral_over_x(
            prev[j - 1], Fraction(0) if j == 1 else thetas[j - 2], thetas[j - 1]
        )
        theta_next = 1 + acc
        new_row.append(LogPolynomial.from_coeffs([theta_next, 1]))
        thetas.append(theta_next)
        rows.append(new_row)
    return thetas, rows


def generate_thetas(J: int, max_j: int = DEFAULT_MAX_J) -> ThetaSequence:
    """Exact theta_1..theta_J.  O(J^3) rational operations."""
    if J < 1:
        raise ValueError("J must be >= 1")
    if J > max_j:
        raise ValueError(f"J={J} exceeds the cap {max_j}; raise max_j to override")
    thetas, _ = _generate(J)
    return ThetaSequence(tuple(thetas))


def thresholds(
    ts: ThetaSequence, bits: int = DEFAULT_PRECISION_BITS
) -> list[float]:
    """t_j = exp(-theta_j), rounded once from the working precision."""
    return [float(exp_neg(t, bits)) for t in ts.thetas]


def payoff_k1(ts: ThetaSequence, bits: int = DEFAULT_PRECISION_BITS) -> float:
    """Optimal expected number of best-item selections: sum of t_j."""
    return float(payoff_k1_decimal(ts, bits))


def payoff_k1_decimal(
    ts: ThetaSequence, bits: int = DEFAULT_PRECISION_BITS
) -> Decimal:
    with localcontext(working_context(bits)):
        total = Decimal(0)
        for t in ts.thetas:
            total += exp_neg(t, bits)
        return total


def build_dual_certificate(ts: ThetaSequence) -> DualCertificateK1:
    """Dual functions matching ts; regenerated to keep the data exact."""
    thetas, rows = _generate(ts.J)
    if tuple(thetas) != ts.thetas:
        raise ValueError("theta sequence was not produced by generate_thetas")
    all_pieces = []
    for j in range(1, ts.J + 1):
        row = []
        for k in range(1, j + 1):
            lo = Fraction(0) if k == 1 else thetas[k - 2]
            row.append(IntervalPiece(lo, thetas[k - 1], rows[j - 1][k - 1]))
        all_pieces.append(tuple(row))
    return DualCertificateK1(ThetaSequence(tuple(thetas)), tuple(all_pieces))


def integral_q_from(
    cert: DualCertificateK1,
    j: int,
    theta_from: Rational,
    bits: int = DEFAULT_PRECISION_BITS,
    weight_over_x: bool = False,
) -> Decimal:
    """int q_j(y) dy (or q_j(y)/y dy) for y from exp(-theta_from) to 1.

    The per-piece antiderivatives are exact; only the exp(-theta) endpoint
    values carry rounding, at the working precision.
    """
    if j == 0:
        return Decimal(0)
    theta_from = min(theta_from, cert.thetas.theta(j))
    with localcontext(working_context(bits)):
        total = Decimal(0)
        for piece in cert.pieces[j - 1]:
            if piece.theta_lo >= theta_from:
                break
            hi_theta = min(piece.theta_hi, theta_from)
            if weight_over_x:
                val = definite_integral_over_x(piece.poly, piece.theta_lo, hi_theta)
                total += rational_to_decimal(val, bits)
            else:
                b = antiderivative_plain(piece.poly)
                upper = rational_to_decimal(
                    eval_at_theta(b, piece.theta_lo), bits
                ) * exp_neg(piece.theta_lo, bits)
                lower = rational_to_decimal(
                    eval_at_theta(b, hi_theta), bits
                ) * exp_neg(hi_theta, bits)
                total += upper - lower
        return total


def dual_objective_k1(
    cert: DualCertificateK1, bits: int = DEFAULT_PRECISION_BITS
) -> float:
    """int_0^1 q_J(y) dy; must equal payoff_k1 up to final rounding."""
    return float(integral_q_from(cert, cert.J, cert.thetas.theta(cert.J), bits))


def constraint_lhs_k1(
    cert: DualCertificateK1,
    j: int,
    theta: Rational,
    bits: int = DEFAULT_PRECISION_BITS,
) -> Decimal:
    """q_j(x) + (1/x) int_x^1 [q_j - q_(j-1)] dy at x = exp(-theta).

    Equals 1 on [t_j, 1] and strictly exceeds 1 below t_j; used by the
    exact certificate checks.
    """
    with localcontext(working_context(bits)):
        q_here = rational_to_decimal(cert.q_at_theta(j, theta), bits)
        tail = integral_q_from(cert, j, theta, bits) - integral_q_from(
            cert, j - 1, theta, bits
        )
        return q_here + tail / exp_neg(theta, bits)
