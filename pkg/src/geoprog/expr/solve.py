"""Root finding for theorem equations.

solve_single handles one unknown with three strategies, tried in order:
exact isolation when the unknown occurs once, closed-form polynomials up
to degree two, and a sign-change scan with bisection.  solve_system runs
a fixed-point sweep of single-unknown equations with branching over
multiple roots, then damped Newton with seeded restarts for whatever
coupled residual remains.

Work is measured in residual evaluations so budgets are reproducible.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from ..errors import ArityMismatch, BudgetExceeded, MathDomain, UnboundVariable
from .ast import (
    Add,
    Assignment,
    Cos,
    Div,
    Equation,
    Expr,
    Mul,
    Neg,
    Num,
    Pi,
    Pow,
    Sin,
    Sub,
    Tan,
    Var,
    VarId,
    eval_expr,
    free_vars,
)

DEFAULT_BUDGET = 10**6
_SCAN_SAMPLES = 4096
_SCAN_CLIP = 1e6          # finite window substituted for infinite bounds
_ROOT_DEDUP_TOL = 1e-9
_RESIDUAL_RTOL = 1e-8
_NEWTON_RESTARTS = 32
_MAX_BRANCH_ROOTS = 16    # cap on per-equation branching in system search


@dataclass(frozen=True)
class Interval:
    lo: float = -math.inf
    hi: float = math.inf

    def contains(self, x: float) -> bool:
        return self.lo < x < self.hi

    def intersect(self, other: "Interval") -> "Interval":
        return Interval(max(self.lo, other.lo), min(self.hi, other.hi))

    def clipped(self) -> tuple[float, float]:
        return (max(self.lo, -_SCAN_CLIP), min(self.hi, _SCAN_CLIP))


FULL_LINE = Interval()
POSITIVE = Interval(0.0, _SCAN_CLIP)
DEGREES_TURN = Interval(0.0, 360.0)


class EvalCounter:
    """Counts residual evaluations against a budget."""

    def __init__(self, limit: Optional[int] = None):
        self.limit = limit
        self.count = 0

    def spend(self, n: int = 1) -> None:
        self.count += n
        if self.limit is not None and self.count > self.limit:
            raise BudgetExceeded(f"evaluation budget of {self.limit} exhausted")


def _count_occurrences(e: Expr, var: VarId) -> int:
    if isinstance(e, Var):
        return 1 if e.var == var else 0
    if isinstance(e, (Neg, Sin, Cos, Tan)):
        return _count_occurrences(e.operand, var)
    if isinstance(e, (Add, Sub, Mul, Div)):
        return _count_occurrences(e.left, var) + _count_occurrences(e.right, var)
    if isinstance(e, Pow):
        return _count_occurrences(e.base, var) + _count_occurrences(e.exponent, var)
    return 0


def _eval_const(e: Expr, counter: Optional[EvalCounter]) -> Optional[float]:
    """Evaluate an unknown-free subexpression, None if it has no value."""
    if counter is not None:
        counter.spend()
    try:
        return eval_expr(e)
    except (MathDomain, UnboundVariable):
        return None


def _trig_preimages(kind: type, value: float) -> list[float]:
    """All angles in [0, 360) whose sine/cosine/tangent equals value."""
    if kind in (Sin, Cos) and abs(value) > 1.0:
        return []
    if kind is Sin:
        theta = math.degrees(math.asin(value))
        cands = {theta % 360.0, (180.0 - theta) % 360.0}
    elif kind is Cos:
        theta = math.degrees(math.acos(value))
        cands = {theta % 360.0, (360.0 - theta) % 360.0}
    else:
        theta = math.degrees(math.atan(value)) % 180.0
        cands = {theta, theta + 180.0}
    return sorted(cands)


def _isolate(expr_side: Expr, target: float, unknown: VarId,
              counter: Optional[EvalCounter]) -> list[float]:
    """Invert the operation path down to the unique occurrence of unknown."""
    results: list[float] = []
    work = [(expr_side, target)]
    while work:
        e, t = work.pop()
        if isinstance(e, Var):
            if e.var == unknown:
                results.append(t)
            continue
        if isinstance(e, Neg):
            work.append((e.operand, -t))
            continue
        if isinstance(e, Add):
            inner, other = (e.left, e.right) if _count_occurrences(e.left, unknown) else (e.right, e.left)
            c = _eval_const(other, counter)
            if c is not None:
                work.append((inner, t - c))
            continue
        if isinstance(e, Sub):
            if _count_occurrences(e.left, unknown):
                c = _eval_const(e.right, counter)
                if c is not None:
                    work.append((e.left, t + c))
            else:
                c = _eval_const(e.left, counter)
                if c is not None:
                    work.append((e.right, c - t))
            continue
        if isinstance(e, Mul):
            inner, other = (e.left, e.right) if _count_occurrences(e.left, unknown) else (e.right, e.left)
            c = _eval_const(other, counter)
            if c is not None and c != 0.0:
                work.append((inner, t / c))
            continue
        if isinstance(e, Div):
            if _count_occurrences(e.left, unknown):
                c = _eval_const(e.right, counter)
                if c is not None and c != 0.0:
                    work.append((e.left, t * c))
            else:
                c = _eval_const(e.left, counter)
                if c is not None and t != 0.0:
                    work.append((e.right, c / t))
            continue
        if isinstance(e, Pow):
            if _count_occurrences(e.base, unknown):
                p = _eval_const(e.exponent, counter)
                if p is None or p == 0.0:
                    continue
                if abs(p - round(p)) < 1e-9:  # integer exponent
                    p_int = round(p)
                    if p_int % 2 == 0:
                        if t < 0.0:
                            continue
                        root = t ** (1.0 / p_int)
                        work.append((e.base, root))
                        if t > 0.0:
                            work.append((e.base, -root))
                    else:
                        work.append((e.base, math.copysign(abs(t) ** (1.0 / p_int), t)))
                else:
                    if t < 0.0:
                        continue
                    work.append((e.base, t ** (1.0 / p)))
            else:
                c = _eval_const(e.base, counter)
                if c is not None and c > 0.0 and c != 1.0 and t > 0.0:
                    work.append((e.exponent, math.log(t) / math.log(c)))
            continue
        if isinstance(e, (Sin, Cos, Tan)):
            for angle in _trig_preimages(type(e), t):
                if 0.0 < angle < 360.0:
                    work.append((e.operand, angle))
            continue
        # Num/Pi containing no unknown: nothing to do
    return results


def _poly_coeffs(e: Expr, unknown: VarId, counter: Optional[EvalCounter],
                 max_degree: int = 8) -> Optional[dict[int, float]]:
    """Coefficients of e as a polynomial in unknown, None if not polynomial."""

    def merge(a, b, sign=1.0):
        out = dict(a)
        for k, v in b.items():
            out[k] = out.get(k, 0.0) + sign * v
        return out

    def convolve(a, b):
        out: dict[int, float] = {}
        for i, u in a.items():
            for j, v in b.items():
                if i + j > max_degree:
                    return None
                out[i + j] = out.get(i + j, 0.0) + u * v
        return out

    def go(node: Expr) -> Optional[dict[int, float]]:
        if isinstance(node, Num):
            return {0: node.value}
        if isinstance(node, Pi):
            return {0: math.pi}
        if isinstance(node, Var):
            return {1: 1.0} if node.var == unknown else None
        if isinstance(node, Neg):
            inner = go(node.operand)
            return None if inner is None else {k: -v for k, v in inner.items()}
        if isinstance(node, (Add, Sub)):
            left, right = go(node.left), go(node.right)
            if left is None or right is None:
                return None
            return merge(left, right, 1.0 if isinstance(node, Add) else -1.0)
        if isinstance(node, Mul):
            left, right = go(node.left), go(node.right)
            if left is None or right is None:
                return None
            return convolve(left, right)
        if isinstance(node, Div):
            left, right = go(node.left), go(node.right)
            if left is None or right is None:
                return None
            if set(right) - {0} or right.get(0, 0.0) == 0.0:
                return None
            c = right[0]
            return {k: v / c for k, v in left.items()}
        if isinstance(node, Pow):
            exp = go(node.exponent)
            if exp is None or set(exp) - {0}:
                return None
            p = exp.get(0, 0.0)
            base = go(node.base)
            if base is None:
                return None
            if set(base) - {0}:
                if abs(p - round(p)) > 1e-9 or not 0 <= round(p) <= max_degree:
                    return None
                out = {0: 1.0}
                for _ in range(round(p)):
                    out = convolve(out, base)
                    if out is None:
                        return None
                return out
            c = base.get(0, 0.0)
            if counter is not None:
                counter.spend()
            try:
                return {0: eval_expr(Pow(Num(c), Num(p)))}
            except MathDomain:
                return None
        if isinstance(node, (Sin, Cos, Tan)):
            inner = go(node.operand)
            if inner is None or set(inner) - {0}:
                return None
            if counter is not None:
                counter.spend()
            return {0: eval_expr(type(node)(Num(inner.get(0, 0.0))))}
        return None

    return go(e)


def _solve_poly(coeffs: dict[int, float]) -> Optional[list[float]]:
    """Closed-form roots for degree <= 2, None if degree is higher."""
    cleaned = {k: v for k, v in coeffs.items() if v != 0.0}
    if cleaned:
        top = max(abs(v) for v in cleaned.values())
        cleaned = {k: v for k, v in cleaned.items() if abs(v) > 1e-12 * top}
    degree = max(cleaned, default=0)
    if degree > 2:
        return None
    if degree == 0:
        return []  # constant residual: no isolated roots
    if degree == 1:
        return [-cleaned.get(0, 0.0) / cleaned[1]]
    a, b, c = cleaned[2], cleaned.get(1, 0.0), cleaned.get(0, 0.0)
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        return []
    sq = math.sqrt(disc)
    return [(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)]


def _residual_fn(eq: Equation, unknown: VarId, counter: Optional[EvalCounter]):
    def f(x: float) -> Optional[float]:
        if counter is not None:
            counter.spend()
        try:
            return eval_expr(Sub(eq.lhs, eq.rhs), {unknown: x})
        except MathDomain:
            return None
    return f


def _scan_roots(eq: Equation, unknown: VarId, domain: Interval,
                counter: Optional[EvalCounter]) -> list[float]:
    lo, hi = domain.clipped()
    if not lo < hi:
        return []
    f = _residual_fn(eq, unknown, counter)
    xs = [lo + (hi - lo) * i / (_SCAN_SAMPLES - 1) for i in range(_SCAN_SAMPLES)]
    ys = [f(x) for x in xs]
    roots: list[float] = []
    exact_hits = [x for x, y in zip(xs, ys) if y == 0.0]
    if len(exact_hits) > 32:
        return []  # identically-zero residual: no isolated roots
    roots.extend(exact_hits)
    for i in range(_SCAN_SAMPLES - 1):
        ya, yb = ys[i], ys[i + 1]
        if ya is None or yb is None or ya == 0.0 or yb == 0.0:
            continue
        if (ya < 0) == (yb < 0):
            continue
        a, b, fa = xs[i], xs[i + 1], ya
        for _ in range(200):
            mid = 0.5 * (a + b)
            if (b - a) <= 1e-12 * max(1.0, abs(mid)):
                break
            fm = f(mid)
            if fm is None:
                break
            if fm == 0.0:
                a = b = mid
                break
            if (fm < 0) == (fa < 0):
                a, fa = mid, fm
            else:
                b = mid
        roots.append(0.5 * (a + b))
    return roots


def solve_single(eq: Equation, unknown: VarId, domain: Interval = FULL_LINE,
                 rng_seed: int = 0, counter: Optional[EvalCounter] = None) -> list[float]:
    """All real roots of eq for `unknown` inside domain, ascending.

    The rng_seed parameter is part of the solver interface for parity with
    solve_system; the three strategies used here are all deterministic.
    """
    unknowns = eq.free_vars()
    if unknowns != {unknown}:
        raise ArityMismatch(
            f"expected {unknown} as the only unknown, found {sorted(v.label for v in unknowns)}"
        )
    occurrences = _count_occurrences(eq.lhs, unknown) + _count_occurrences(eq.rhs, unknown)
    if occurrences == 1:
        if _count_occurrences(eq.lhs, unknown):
            side, other = eq.lhs, eq.rhs
        else:
            side, other = eq.rhs, eq.lhs
        target = _eval_const(other, counter)
        candidates = [] if target is None else _isolate(side, target, unknown, counter)
    else:
        coeffs = _poly_coeffs(Sub(eq.lhs, eq.rhs), unknown, counter)
        poly_roots = _solve_poly(coeffs) if coeffs is not None else None
        if poly_roots is not None:
            candidates = poly_roots
        else:
            candidates = _scan_roots(eq, unknown, domain, counter)

    f = _residual_fn(eq, unknown, counter)
    valid: list[float] = []
    for r in sorted(c for c in candidates if domain.contains(c)):
        res = f(r)
        if res is None:
            continue
        try:
            scale = max(1.0, abs(eval_expr(eq.rhs, {unknown: r})))
        except MathDomain:
            scale = 1.0
        if abs(res) >= _RESIDUAL_RTOL * scale:
            continue
        if valid and abs(r - valid[-1]) <= _ROOT_DEDUP_TOL * max(1.0, abs(r)):
            continue
        valid.append(r)
    return valid


class SystemStatus(Enum):
    SOLVED = "solved"
    INDETERMINATE = "indeterminate"
    UNSOLVED = "unsolved"


@dataclass
class SystemResult:
    status: SystemStatus
    assignment: Optional[Assignment] = None


def _residual_vector(eqs: list[Equation], env: Assignment,
                     counter: Optional[EvalCounter]) -> Optional[list[float]]:
    out = []
    for eq in eqs:
        if counter is not None:
            counter.spend()
        try:
            out.append(eq.residual(env))
        except (MathDomain, UnboundVariable):
            return None
    return out


def _residual_ok(eqs: list[Equation], env: Assignment,
                 counter: Optional[EvalCounter]) -> bool:
    for eq in eqs:
        if counter is not None:
            counter.spend()
        try:
            scale = max(1.0, abs(eval_expr(eq.rhs, env)))
            if abs(eq.residual(env)) >= _RESIDUAL_RTOL * scale:
                return False
        except (MathDomain, UnboundVariable):
            return False
    return True


def _solve_linear(mat: list[list[float]], vec: list[float]) -> Optional[list[float]]:
    """Gaussian elimination with partial pivoting for tiny systems."""
    n = len(vec)
    a = [row[:] + [vec[i]] for i, row in enumerate(mat)]
    for col in range(n):
        pivot = max(range(col, n), key=lambda r: abs(a[r][col]))
        if abs(a[pivot][col]) < 1e-14:
            return None
        a[col], a[pivot] = a[pivot], a[col]
        for r in range(n):
            if r != col and a[r][col] != 0.0:
                factor = a[r][col] / a[col][col]
                for c in range(col, n + 1):
                    a[r][c] -= factor * a[col][c]
    return [a[i][n] / a[i][i] for i in range(n)]


def _newton_solutions(eqs: list[Equation], unknowns: list[VarId],
                      domains: dict[VarId, Interval], base_env: Assignment,
                      rng: random.Random, counter: Optional[EvalCounter]) -> list[Assignment]:
    if len(eqs) < len(unknowns):
        return []  # underdetermined: nothing to pin down
    boxes = [domains.get(u, FULL_LINE).clipped() for u in unknowns]
    found: list[Assignment] = []
    for _ in range(_NEWTON_RESTARTS):
        x = [rng.uniform(lo, hi) for lo, hi in boxes]
        for _ in range(60):
            env = dict(base_env)
            env.update(zip(unknowns, x))
            fx = _residual_vector(eqs, env, counter)
            if fx is None:
                break
            norm = sum(v * v for v in fx)
            # numeric Jacobian by central differences
            jac: list[list[float]] = [[0.0] * len(unknowns) for _ in eqs]
            failed = False
            for j, u in enumerate(unknowns):
                h = 1e-6 * max(1.0, abs(x[j]))
                env[u] = x[j] + h
                fp = _residual_vector(eqs, env, counter)
                env[u] = x[j] - h
                fm = _residual_vector(eqs, env, counter)
                env[u] = x[j]
                if fp is None or fm is None:
                    failed = True
                    break
                for i in range(len(eqs)):
                    jac[i][j] = (fp[i] - fm[i]) / (2.0 * h)
            if failed:
                break
            if len(eqs) == len(unknowns):
                step = _solve_linear(jac, [-v for v in fx])
            else:
                # overdetermined: normal equations J^T J dx = -J^T F
                m = len(unknowns)
                jtj = [[sum(jac[k][i] * jac[k][j] for k in range(len(eqs))) for j in range(m)]
                       for i in range(m)]
                jtf = [sum(jac[k][i] * fx[k] for k in range(len(eqs))) for i in range(m)]
                step = _solve_linear(jtj, [-v for v in jtf])
            if step is None:
                break
            lam, improved = 1.0, False
            for _ in range(20):
                trial = [min(max(x[j] + lam * step[j], boxes[j][0]), boxes[j][1])
                         for j in range(len(unknowns))]
                env = dict(base_env)
                env.update(zip(unknowns, trial))
                ft = _residual_vector(eqs, env, counter)
                if ft is not None and sum(v * v for v in ft) < norm:
                    x, improved = trial, True
                    break
                lam *= 0.5
            if not improved:
                break
            env = dict(base_env)
            env.update(zip(unknowns, x))
            if _residual_ok(eqs, env, counter):
                found.append({u: env[u] for u in unknowns})
                break
    return found


def _dedup_assignments(solutions: list[Assignment], unknowns: list[VarId]) -> list[Assignment]:
    kept: list[Assignment] = []
    for sol in solutions:
        is_new = True
        for prev in kept:
            if all(abs(sol[u] - prev[u]) <= 1e-6 * max(1.0, abs(sol[u])) for u in unknowns):
                is_new = False
                break
        if is_new:
            kept.append(sol)
    return kept


def solve_system(eqs: list[Equation], unknowns: set[VarId],
                 budget: int = DEFAULT_BUDGET, rng_seed: int = 0,
                 domains: Optional[dict[VarId, Interval]] = None) -> SystemResult:
    """Solve for up to three unknowns across the given equations.

    Raises BudgetExceeded once `budget` residual evaluations are spent.
    """
    if len(unknowns) > 3:
        raise ArityMismatch(f"at most 3 unknowns supported, got {len(unknowns)}")
    appearing = set()
    for eq in eqs:
        appearing |= eq.free_vars()
    missing = unknowns - appearing
    if missing:
        raise ArityMismatch(
            f"unknowns absent from every equation: {sorted(v.label for v in missing)}"
        )
    domains = domains or {}
    counter = EvalCounter(budget)
    rng = random.Random(rng_seed)
    ordered = sorted(unknowns, key=lambda v: v.sort_key())
    solutions: list[Assignment] = []

    def extend(env: Assignment) -> None:
        pending = [eq for eq in eqs if eq.free_vars() - set(env)]
        single = None
        for eq in pending:
            free = sorted(eq.free_vars() - set(env), key=lambda v: v.sort_key())
            if len(free) == 1:
                single = (eq, free[0])
                break
        if single is not None:
            eq, u = single
            roots = solve_single(eq.substitute(env), u, domains.get(u, FULL_LINE),
                                 rng_seed, counter)
            for root in roots[:_MAX_BRANCH_ROOTS]:
                child = dict(env)
                child[u] = root
                extend(child)
            return
        free_left = [u for u in ordered if u not in env]
        if not free_left:
            if _residual_ok(eqs, env, counter):
                solutions.append({u: env[u] for u in ordered})
            return
        coupled = [eq for eq in pending]
        if not coupled:
            return  # unknowns left but no equations mention them
        for sol in _newton_solutions(coupled, free_left, domains, env, rng, counter):
            candidate = dict(env)
            candidate.update(sol)
            if _residual_ok(eqs, candidate, counter):
                solutions.append({u: candidate[u] for u in ordered})

    extend({})
    unique = _dedup_assignments(solutions, ordered)
    if not unique:
        return SystemResult(SystemStatus.UNSOLVED)
    if len(unique) > 1:
        return SystemResult(SystemStatus.INDETERMINATE)
    return SystemResult(SystemStatus.SOLVED, unique[0])
