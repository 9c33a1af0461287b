"""
Exact rational toy convex-integration scheme on [0, 1].

    u_{k+1} = u_k + (1 - u_k^2)/2 * s(λ_k x)

with s the 1-periodic square wave, +1 on (0, 1/2] and -1 on (1/2, 1].
States are piecewise constant with rational breakpoints and values; no
floating point enters the core.  Internally breakpoints and values are kept
as integer numerators over one common denominator each, which keeps the
arithmetic on plain Python integers.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from math import lcm


class AlignmentError(ValueError):
    pass


class DomainError(ValueError):
    pass


class PiecewiseConstantFn:
    """Piecewise constant function on [0, 1] with rational data.

    `bp_num / bp_den` are the breakpoints (0 first, 1 last) and
    `val_num / val_den` the value on each interval.
    """

    def __init__(self, bp_num, bp_den, val_num, val_den):
        bp_num, val_num = tuple(bp_num), tuple(val_num)
        if bp_den <= 0 or val_den <= 0:
            raise ValueError("denominators must be positive")
        if len(bp_num) < 2 or bp_num[0] != 0 or bp_num[-1] != bp_den:
            raise ValueError("breakpoints must start at 0 and end at 1")
        if any(b >= c for b, c in zip(bp_num, bp_num[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if len(val_num) != len(bp_num) - 1:
            raise ValueError("need one value per interval")
        self.bp_num, self.bp_den = bp_num, bp_den
        self.val_num, self.val_den = val_num, val_den

    @classmethod
    def from_fractions(cls, breakpoints, values):
        bp = [Fraction(b) for b in breakpoints]
        vals = [Fraction(v) for v in values]
        bd = lcm(*(b.denominator for b in bp))
        vd = lcm(*(v.denominator for v in vals))
        return cls([b.numerator * (bd // b.denominator) for b in bp], bd,
                   [v.numerator * (vd // v.denominator) for v in vals], vd)

    @classmethod
    def constant(cls, c):
        c = Fraction(c)
        return cls((0, 1), 1, (c.numerator,), c.denominator)

    @cached_property
    def breakpoints(self):
        return tuple(Fraction(b, self.bp_den) for b in self.bp_num)

    @cached_property
    def values(self):
        return tuple(Fraction(v, self.val_den) for v in self.val_num)

    def __len__(self):
        return len(self.val_num)

    def __eq__(self, other):
        return (isinstance(other, PiecewiseConstantFn)
                and self.breakpoints == other.breakpoints
                and self.values == other.values)

    def __repr__(self):
        return f"PiecewiseConstantFn({len(self)} pieces)"

    def pieces(self):
        return zip(self.breakpoints, self.breakpoints[1:], self.values)

    def sup_abs(self):
        return Fraction(max(abs(v) for v in self.val_num), self.val_den)

    def defect(self):
        """∫_0^1 (1 - u^2) dx."""
        d2 = self.val_den ** 2
        total = 0
        for a, b, v in zip(self.bp_num, self.bp_num[1:], self.val_num):
            total += (b - a) * (d2 - v * v)
        return Fraction(total, self.bp_den * d2)

    def __call__(self, x):
        """Value at x, with intervals taken half-open on the left."""
        x = Fraction(x)
        for a, b, v in self.pieces():
            if a < x <= b:
                return v
        return self.values[0]


@dataclass
class ToyTrajectory:
    states: list
    lambdas: list
    defects: list = field(default_factory=list)


def toy_step(u, lam):
    """One step with the square wave s(λx); every piece splits into half periods."""
    lam = int(lam)
    if lam < 1:
        raise AlignmentError("frequency must be a positive integer")
    D = u.val_den
    if max(abs(v) for v in u.val_num) >= D:
        raise DomainError("toy scheme needs sup|u| < 1")
    if any((b * lam) % u.bp_den for b in u.bp_num):
        raise AlignmentError(f"breakpoints not aligned with frequency {lam}")
    # new breakpoints live on multiples of 1/(2λ); values over 2 D^2
    nd = 2 * lam
    D2 = D * D
    bps = [0]
    vals = []
    for a, b, v in zip(u.bp_num, u.bp_num[1:], u.val_num):
        lo = a * nd // u.bp_den
        hi = b * nd // u.bp_den
        base = 2 * v * D
        inc = D2 - v * v
        for j in range(lo, hi):
            bps.append(j + 1)
            vals.append(base + inc if (j - lo) % 2 == 0 else base - inc)
    return PiecewiseConstantFn(bps, nd, vals, 2 * D2)


def dyadic_schedule(steps, offset=0):
    """λ_k = 2^(k + offset), k = 0, 1, ..."""
    return [2 ** (k + offset) for k in range(steps)]


def toy_run(u0, schedule=None, steps=None):
    if schedule is None:
        schedule = dyadic_schedule(steps if steps is not None else 12)
    schedule = list(schedule)
    if steps is not None:
        schedule = schedule[:steps]
    states = [u0]
    for lam in schedule:
        states.append(toy_step(states[-1], lam))
    return ToyTrajectory(states=states, lambdas=schedule,
                         defects=[s.defect() for s in states])


def _difference(fine, coarse):
    """(length, fine - coarse) numerators on the pieces of fine.

    Lengths are over fine.bp_den, differences over lcm of the value
    denominators; both denominators are returned as well.
    """
    vd = lcm(fine.val_den, coarse.val_den)
    fs, cs = vd // fine.val_den, vd // coarse.val_den
    ratio = fine.bp_den // coarse.bp_den if fine.bp_den % coarse.bp_den == 0 else None
    out = []
    j = 0
    cb = coarse.bp_num
    for lo, hi, fv in zip(fine.bp_num, fine.bp_num[1:], fine.val_num):
        if ratio is not None:
            while hi > cb[j + 1] * ratio:
                j += 1
        else:
            while Fraction(hi, fine.bp_den) > Fraction(cb[j + 1], coarse.bp_den):
                j += 1
        out.append((hi - lo, fv * fs - coarse.val_num[j] * cs))
    return out, fine.bp_den, vd


def increment_norms(traj):
    """Rows (k, L^1 norm, non-periodic TV) of u_{k+1} - u_k, exact."""
    if len(traj.states) < 2:
        raise ValueError("need at least two states")
    rows = []
    for k in range(len(traj.states) - 1):
        diff, bd, vd = _difference(traj.states[k + 1], traj.states[k])
        l1 = sum(ln * abs(d) for ln, d in diff)
        tv = sum(abs(d2 - d1) for (_, d1), (_, d2) in zip(diff, diff[1:]))
        rows.append((k, Fraction(l1, bd * vd), Fraction(tv, vd)))
    return rows


def averaged_defect_recursion_check(traj):
    """Exact check of mean(1 - u_{k+1}^2) = E(1 - E/4) on every parent piece.

    With E = 1 - u_k^2 this reads, after clearing denominators,
    4 d^4 ∫(1 - u_{k+1}^2) = (d^2 - n^2)(3 d^2 + n^2) |piece| for u_k = n/d.
    """
    for k in range(len(traj.states) - 1):
        fine, coarse = traj.states[k + 1], traj.states[k]
        fd, cd = fine.bp_den, coarse.bp_den
        fd2 = fine.val_den ** 2
        vd2 = coarse.val_den ** 2
        fb = fine.bp_num
        i = 0
        for an, bn, vn in zip(coarse.bp_num, coarse.bp_num[1:], coarse.val_num):
            acc = 0
            while i < len(fine) and fb[i] * cd < bn * fd:
                acc += (fb[i + 1] - fb[i]) * (fd2 - fine.val_num[i] ** 2)
                i += 1
            lhs = 4 * vd2 * vd2 * acc * cd
            rhs = (vd2 - vn * vn) * (3 * vd2 + vn * vn) * fd * fd2 * (bn - an)
            if lhs != rhs:
                return False
    return True
