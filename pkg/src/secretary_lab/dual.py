"""General (J,K) threshold construction with dual certificates.

For J selection quotas and payoff counted over the K overall-best items,
the optimal policy is a threshold matrix tau[j][k]: quota j may take a
k-potential (k-th best seen so far) from time tau[j][k] on, and the unused
quota with the largest index is consumed first.  The thresholds come out
of an inductive construction: for each quota row j, working from k = K
down to 1, the next dual function candidate solves the integral equation

    f(x) + (N/x) int_x^b [f(y) - g(y)] dy + c/x = gamma(x)

(whose closed form is implemented in solve_integral_equation), and
tau[j][k] is the largest zero of the induced candidate below the previous
thresholds.  The resulting functions q[j][k] certify optimality: they
satisfy the complementary-slackness equalities above each threshold, the
dual inequalities below it, and their total integral equals the payoff

    J - sum_j (1 - tau[j][1])**K.

K = 1 routes to the exact rational machinery in theta.py; everything here
is double precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from math import comb
from typing import NamedTuple

from . import theta as theta_mod
from .piecewise import (
    LogLinComb,
    PiecewiseFunction,
    find_largest_root,
)

BRANCH_POINT = -math.exp(-1.0)

# Floor for piecewise supports; far below any reachable threshold (the
# smallest thresholds for J <= 16 sit above 1e-4).
X_FLOOR = 1e-9


class ConvergenceError(RuntimeError):
    """An iterative solver failed its convergence guard."""


class MonotonicityError(ValueError):
    """A threshold matrix violates the required row/column ordering."""


# -- alpha / gamma ---------------------------------------------------------


def alpha(k: int, K: int, x: float) -> float:
    """sum_{l=k}^{K} C(l-1, k-1) (1-x)^(l-k) x^(k-1), with 0**0 = 1."""
    if not 1 <= k <= K:
        raise ValueError(f"need 1 <= k <= K, got k={k}, K={K}")
    total = 0.0
    for el in range(k, K + 1):
        total += comb(el - 1, k - 1) * (1.0 - x) ** (el - k)
    return total * x ** (k - 1)


def gamma(k: int, K: int, x: float) -> float:
    """Partial sum alpha_1 + ... + alpha_k; identically K when k = K."""
    return sum(alpha(el, K, x) for el in range(1, k + 1))


def alpha_poly(k: int, K: int) -> LogLinComb:
    """alpha_k as a polynomial in x (coefficients are exact small integers)."""
    coeffs = [0.0] * K
    for el in range(k, K + 1):
        base = comb(el - 1, k - 1)
        for u in range(el - k + 1):
            coeffs[k - 1 + u] += base * comb(el - k, u) * (-1.0) ** u
    return LogLinComb.from_x_poly(coeffs)


def gamma_poly(k: int, K: int) -> LogLinComb:
    out = LogLinComb.zero()
    for el in range(1, k + 1):
        out = out + alpha_poly(el, K)
    return out


# -- Lambert W -------------------------------------------------------------


def lambert_w_principal(z: float) -> float:
    """Principal-branch W(z) for z in [-1/e, 0], so W(z) in [-1, 0].

    Series initialization (branch-point series near -1/e, Maclaurin series
    near 0) followed by Halley iteration; the result satisfies
    |W exp(W) - z| <= 1e-14.
    """
    if not BRANCH_POINT - 1e-12 <= z <= 0.0:
        raise ValueError(f"z={z} outside the domain [-1/e, 0]")
    z = max(z, BRANCH_POINT)
    if z == 0.0:
        return 0.0
    if z == BRANCH_POINT:
        return -1.0
    p = math.sqrt(2.0 * (1.0 + math.e * z))
    if p < 0.5:
        w = -1.0 + p * (1.0 + p * (-1.0 / 3.0 + p * 11.0 / 72.0))
    else:
        w = z * (1.0 - z + 1.5 * z * z)
    for _ in range(100):
        ew = math.exp(w)
        f = w * ew - z
        wp1 = w + 1.0
        if wp1 == 0.0:
            break
        step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
        w -= step
        if abs(step) <= 1e-16 * (2.0 + abs(w)):
            break
    if abs(w * math.exp(w) - z) > 1e-14:
        raise ConvergenceError(f"Lambert W did not converge for z={z}")
    return min(max(w, -1.0), 0.0)


# -- threshold matrix ------------------------------------------------------


@dataclass(frozen=True)
class ThresholdMatrix:
    """tau[j-1][k-1] = tau_{j,k}; rows ordered j = 1..J (later quotas lower)."""

    J: int
    K: int
    tau: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        if len(self.tau) != self.J or any(len(r) != self.K for r in self.tau):
            raise ValueError("threshold matrix shape mismatch")
        eps = 1e-12
        for j in range(self.J):
            for k in range(self.K):
                t = self.tau[j][k]
                if not 0.0 < t <= 1.0:
                    raise MonotonicityError(f"tau[{j+1}][{k+1}]={t} not in (0, 1]")
                if k + 1 < self.K and t > self.tau[j][k + 1] + eps:
                    raise MonotonicityError(
                        f"row {j+1} not increasing in k at k={k+1}"
                    )
                if j + 1 < self.J and self.tau[j + 1][k] > t + eps:
                    raise MonotonicityError(
                        f"column {k+1} not decreasing in j at j={j+1}"
                    )

    def threshold(self, j: int, k: int) -> float:
        """1-based accessor for tau_{j,k}."""
        return self.tau[j - 1][k - 1]


def payoff_jk(tau: ThresholdMatrix) -> float:
    """Optimal expected payoff J - sum_j (1 - tau_{j,1})^K."""
    return tau.J - sum((1.0 - row[0]) ** tau.K for row in tau.tau)


# -- integral-equation solver (closed form) --------------------------------


def solve_integral_equation(
    b: float,
    c: float,
    N: int,
    g: PiecewiseFunction,
    gamma_fn: LogLinComb,
    x_floor: float = X_FLOOR,
) -> PiecewiseFunction:
    """Continuous f on (x_floor, b] solving
    f(x) + (N/x) int_x^b [f(y) - g(y)] dy + c/x = gamma(x).

    The solution is
        f(x) = x^(N-1) [ (b g(b) - c)/b^N - int_x^b ((y gamma)' - N g(y)) / y^N dy ]
    evaluated segment by segment with exact antiderivatives; g's breakpoints
    inside (x_floor, b) become breakpoints of f.
    """
    if not 0.0 < b <= 1.0:
        raise ValueError(f"b={b} outside (0, 1]")
    if N < 1:
        raise ValueError("N must be a positive integer")
    if x_floor >= b:
        raise ValueError("x_floor must lie below b")
    a_const = (b * gamma_fn(b) - c) / b**N
    dpoly = gamma_fn.shift_xpow(1).derivative()  # (y*gamma(y))'
    cuts = sorted(
        {x_floor, b} | {p for p in g.breakpoints if x_floor < p < b}
    )
    antis: list[LogLinComb] = []
    for lo, hi in zip(cuts, cuts[1:]):
        g_seg = g.segment_at(0.5 * (lo + hi))
        integrand = dpoly if g_seg is None else dpoly - g_seg.scale(N)
        antis.append(integrand.shift_xpow(-N).antiderivative())
    # tail constants: C_i = int_{hi_i}^{b} h(y) dy accumulated from the top
    segs: list[LogLinComb] = []
    tail_above = 0.0
    for i in range(len(antis) - 1, -1, -1):
        lo, hi = cuts[i], cuts[i + 1]
        # int_x^b h = tail_above + H_i(hi) - H_i(x)
        const = a_const - tail_above - antis[i](hi)
        segs.append((antis[i] + LogLinComb.const(const)).shift_xpow(N - 1))
        tail_above += antis[i](hi) - antis[i](lo)
    segs.reverse()
    return PiecewiseFunction(cuts, segs)


# -- certificate construction ----------------------------------------------


@dataclass(frozen=True)
class DualCertificateJK:
    """Thresholds plus the dual functions that certify their optimality.

    q[j-1][k-1] is the dual function for (quota j, potential rank k),
    supported on [tau_{j,k}, 1]; r[j-1][k-1] is the running sum
    q_{j|1} + ... + q_{j|k}.
    """

    tau: ThresholdMatrix
    q: tuple[tuple[PiecewiseFunction, ...], ...]
    r: tuple[tuple[PiecewiseFunction, ...], ...]

    @property
    def J(self) -> int:
        return self.tau.J

    @property
    def K(self) -> int:
        return self.tau.K

    def r_top(self, j: int) -> PiecewiseFunction:
        """r_{j|K}, with r_{0|K} identically zero."""
        if j == 0:
            return PiecewiseFunction.zero()
        return self.r[j - 1][self.K - 1]


def _certificate_k1(J: int) -> DualCertificateJK:
    """Exact-route certificate for K = 1, converted to float piecewise form."""
    ts = theta_mod.generate_thetas(J)
    cert = theta_mod.build_dual_certificate(ts)
    tvals = theta_mod.thresholds(ts)  # t_1 > t_2 > ... > t_J
    tau = ThresholdMatrix(J, 1, tuple((tvals[j],) for j in range(J)))
    q_rows = []
    for j in range(1, J + 1):
        # ascending x: pieces k = j (lowest interval) down to k = 1
        bps = [tvals[k - 1] for k in range(j, 0, -1)] + [1.0]
        segs = [
            LogLinComb.from_ln_poly([float(c) for c in piece.poly.coeffs])
            for piece in reversed(cert.pieces[j - 1])
        ]
        fn = PiecewiseFunction(bps, segs)
        q_rows.append((fn,))
    return DualCertificateJK(tau, tuple(q_rows), tuple(q_rows))


def construct_dual(
    J: int,
    K: int,
    *,
    scan_step: float = 1e-3,
    root_tol: float = 1e-13,
    x_floor: float = X_FLOOR,
    use_exact_k1: bool = True,
) -> DualCertificateJK:
    """Build thresholds and dual functions for the (J,K) problem.

    Induction over quota rows j = 1..J, inner loop k = K..1.  On each step
    the candidate below tau_{j,k+1} is

        q(x) = (r(x) - gamma_k(x))/k + alpha_k(x)

    with r from solve_integral_equation against the previous row's top
    running sum; tau_{j,k} is the largest zero of q below
    min(tau_{j,k+1}, tau_{j-1,k}).  A missing bracket is a numerical
    failure (the construction guarantees existence) and raises
    RootBracketError.
    """
    if J < 1 or K < 1:
        raise ValueError("J and K must be positive")
    if K == 1 and use_exact_k1:
        return _certificate_k1(J)

    tau_rows: list[list[float]] = []
    q_rows: list[tuple[PiecewiseFunction, ...]] = []
    r_rows: list[tuple[PiecewiseFunction, ...]] = []
    r_prev = PiecewiseFunction.zero()  # r_{j-1|K}
    for j in range(1, J + 1):
        taus = [0.0] * K
        pieces: list[list[PiecewiseFunction]] = [[] for _ in range(K)]
        r_pieces: list[PiecewiseFunction] = []
        b = 1.0
        for k in range(K, 0, -1):
            gpoly = gamma_poly(k, K)
            cval = 0.0 if k == K else k * b * alpha(k + 1, K, b)
            r_cand = solve_integral_equation(b, cval, k, r_prev, gpoly, x_floor)
            shift_k = alpha_poly(k, K) - gpoly.scale(1.0 / k)
            q_cand = r_cand.map_segments(
                lambda s, sh=shift_k: s.scale(1.0 / k) + sh
            )
            hat = b if j == 1 else min(b, tau_rows[j - 2][k - 1])
            root = find_largest_root(
                q_cand.value, hat, lo=x_floor, scan_step=scan_step, tol=root_tol
            )
            taus[k - 1] = root
            for el in range(1, k + 1):
                shift_el = alpha_poly(el, K) - gpoly.scale(1.0 / k)
                q_el = r_cand.map_segments(
                    lambda s, sh=shift_el: s.scale(1.0 / k) + sh
                )
                pieces[el - 1].append(q_el.restrict(root, b))
            r_pieces.append(r_cand.restrict(root, b))
            b = root
        q_row = []
        for el in range(K):
            fn = PiecewiseFunction.zero()
            for part in pieces[el]:
                fn = fn.combine(part)
            q_row.append(fn)
        r_row = []
        running = PiecewiseFunction.zero()
        for el in range(K):
            running = running.combine(q_row[el])
            r_row.append(running)
        # r_{j|K} assembled straight from the solver output (identical to
        # running by construction, but without accumulated combine noise)
        r_top = PiecewiseFunction.zero()
        for part in r_pieces:
            r_top = r_top.combine(part)
        r_row[K - 1] = r_top
        tau_rows.append(taus)
        q_rows.append(tuple(q_row))
        r_rows.append(tuple(r_row))
        r_prev = r_top
    tau = ThresholdMatrix(J, K, tuple(tuple(r) for r in tau_rows))
    return DualCertificateJK(tau, tuple(q_rows), tuple(r_rows))


# -- closed forms for K = 2 ------------------------------------------------


class ClosedForm12(NamedTuple):
    tau11: float
    tau12: float
    payoff: float


class ClosedForm22(NamedTuple):
    tau11: float
    tau12: float
    tau21: float
    tau22: float
    c: float
    payoff: float


def closed_form_12() -> ClosedForm12:
    """One quota, two best: tau12 = 2/3, tau11 = -W(-2/(3e))."""
    tau12 = 2.0 / 3.0
    tau11 = -lambert_w_principal(-2.0 / (3.0 * math.e))
    return ClosedForm12(tau11, tau12, 2.0 * tau11 - tau11**2)


def closed_form_22() -> ClosedForm22:
    """Two quotas, two best, via the explicit transcendental equations."""
    base = closed_form_12()
    big_l = math.log(2.0 / 3.0)

    def f22(x: float) -> float:
        return x * math.log(x) + math.log(x) - (2.0 + 3.0 * big_l) * x + 1.0 - big_l

    tau22 = find_largest_root(f22, 1.0, lo=1e-6, scan_step=1e-3, tol=1e-14)
    lt1 = math.log(base.tau11)
    lt2 = math.log(tau22)
    c = (
        -(lt1**2)
        + 2.0 * big_l * lt1
        + lt2**2
        - 2.0 * big_l * lt2
        - 2.0 * tau22
        + 4.0
        - 2.0 * big_l
    )
    tau21 = -lambert_w_principal(-math.exp(-c / 2.0))
    payoff = (2.0 * base.tau11 - base.tau11**2) + (2.0 * tau21 - tau21**2)
    return ClosedForm22(base.tau11, base.tau12, tau21, tau22, c, payoff)


# -- certificate verification ----------------------------------------------


@dataclass(frozen=True)
class CertificateReport:
    J: int
    K: int
    ok: bool
    tolerance: float
    grid_points: int
    max_equality_residual: float
    min_inequality_slack: float
    max_threshold_residual: float
    min_q_value: float
    dual_objective: float
    payoff: float
    objective_gap: float
    first_violation: str | None


def verify_certificate(
    cert: DualCertificateJK,
    grid_points: int = 2000,
    tol: float = 1e-8,
    objective_tol: float = 1e-6,
) -> CertificateReport:
    """Check the slackness system, feasibility and the objective identity.

    For every (j, k) and every grid x the constraint left-hand side
    q_{j|k}(x) + (1/x) int_x^1 [r_{j|K} - r_{j-1|K}] must equal alpha_k(x)
    on [tau_{j,k}, 1] (residual <= tol) and weakly exceed it below
    (slack >= -tol); q_{j|k} must vanish at its threshold and stay
    non-negative; the dual objective must match the payoff formula.
    """
    J, K = cert.J, cert.K
    max_eq = 0.0
    min_slack = math.inf
    max_root = 0.0
    min_q = math.inf
    violation: str | None = None

    def note(msg: str):
        nonlocal violation
        if violation is None:
            violation = msg

    base_grid = [i / grid_points for i in range(1, grid_points + 1)]
    for j in range(1, J + 1):
        diff = cert.r_top(j).combine(cert.r_top(j - 1), 1.0, -1.0)
        xs = sorted(set(base_grid) | set(diff.breakpoints))
        for k in range(1, K + 1):
            qf = cert.q[j - 1][k - 1]
            t_jk = cert.tau.threshold(j, k)
            root_res = abs(qf.value(t_jk))
            max_root = max(max_root, root_res)
            if root_res > tol:
                note(f"q[{j}][{k}] at its threshold: |q|={root_res:.3e}")
            for x in xs:
                lhs = qf.value(x) + diff.tail_integral(x) / x
                rhs = alpha(k, K, x)
                if x >= t_jk:
                    res = abs(lhs - rhs)
                    if res > max_eq:
                        max_eq = res
                        if res > tol:
                            note(
                                f"slackness equality (j={j}, k={k}, x={x:.6f}): "
                                f"residual {res:.3e}"
                            )
                    qv = qf.value(x)
                    if qv < min_q:
                        min_q = qv
                        if qv < -tol:
                            note(f"q[{j}][{k}]({x:.6f}) = {qv:.3e} < 0")
                else:
                    slack = lhs - rhs
                    if slack < min_slack:
                        min_slack = slack
                        if slack < -tol:
                            note(
                                f"dual feasibility (j={j}, k={k}, x={x:.6f}): "
                                f"slack {slack:.3e}"
                            )
    objective = cert.r_top(J).integral(0.0, 1.0)
    payoff = payoff_jk(cert.tau)
    gap = abs(objective - payoff)
    if gap > objective_tol:
        note(f"dual objective {objective} vs payoff {payoff}")
    ok = (
        max_eq <= tol
        and min_slack >= -tol
        and max_root <= tol
        and min_q >= -tol
        and gap <= objective_tol
    )
    return CertificateReport(
        J=J,
        K=K,
        ok=ok,
        tolerance=tol,
        grid_points=grid_points,
        max_equality_residual=max_eq,
        min_inequality_slack=min_slack,
        max_threshold_residual=max_root,
        min_q_value=min_q,
        dual_objective=objective,
        payoff=payoff,
        objective_gap=gap,
        first_violation=violation,
    )


def perturbed(cert: DualCertificateJK, j: int, k: int, delta: float) -> DualCertificateJK:
    """Copy of cert with tau_{j,k} shifted by delta (functions untouched).

    Deliberately breaks the certificate; used to exercise the failure path
    of verify_certificate.
    """
    rows = [list(r) for r in cert.tau.tau]
    rows[j - 1][k - 1] += delta
    tau = ThresholdMatrix(cert.J, cert.K, tuple(tuple(r) for r in rows))
    return DualCertificateJK(tau, cert.q, cert.r)


def certificate_to_dict(
    cert: DualCertificateJK, report: CertificateReport | None = None, samples: int = 50
) -> dict:
    """JSON-ready dump: thresholds, breakpoints and sampled dual values."""
    out: dict = {
        "J": cert.J,
        "K": cert.K,
        "tau": [list(row) for row in cert.tau.tau],
        "payoff": payoff_jk(cert.tau),
        "q": [],
    }
    for j in range(1, cert.J + 1):
        for k in range(1, cert.K + 1):
            qf = cert.q[j - 1][k - 1]
            xs = qf.grid(max(1, samples // max(1, len(qf.segments))))
            out["q"].append(
                {
                    "j": j,
                    "k": k,
                    "breakpoints": list(qf.breakpoints),
                    "samples": [[x, qf.value(x)] for x in xs],
                }
            )
    if report is not None:
        out["verification"] = {
            "ok": report.ok,
            "max_equality_residual": report.max_equality_residual,
            "min_inequality_slack": report.min_inequality_slack,
            "max_threshold_residual": report.max_threshold_residual,
            "dual_objective": report.dual_objective,
            "objective_gap": report.objective_gap,
        }
    return out
