"""Trace map, spectral band covering, gaps and Chebyshev interval families.

Energies are gmpy2 ``mpfr`` values at a per-tree working precision.  The
trace map acts on ``(y, x, z) = (tr M_{k-1}, tr M_k, tr M_{k-1} M_k)``
together with E-derivatives.  With ``S_p`` the Chebyshev polynomials
``S_0 = 0, S_1 = 1, S_{p+1} = x S_p - S_{p-1}``, the generating polynomials
are ``h_(k,p) = S_p(x) z - S_{p-1}(x) y`` and one step with digit ``a``
sends ``(y, x, z)`` to ``(x, h_(k,a), h_(k,a+1))``.

A band of order ``n`` has type 1 (``|z_n| <= 2``, handle ``(n, 1)``) or
type 2/3 (``|x_n| <= 2``, handle ``(n+1, 0)``).  Children are located in
two ways:

* window: for coupling at least 24 each child of a type 2/3 parent sits in
  a Chebyshev window of the parent's monotone polynomial, where the child
  polynomial crosses -2 and +2 exactly once;
* scan: grid sign changes of ``g -+ 2`` on the parent, refined and counted
  against the known child count (doubling the grid on mismatch).

Either way the child count and type pattern are checked against the
coding rules, so a missed root is an error and never a silent skip.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Sequence

import gmpy2
from gmpy2 import mpfr

from .cf import Frequency
from .coding import Letter, Word, count_vector, successors

__all__ = [
    "BracketingFailure",
    "VerificationFailure",
    "TransferState",
    "Band",
    "BandTree",
    "Gap",
    "GapStats",
    "ChebyshevFamily",
    "cheb_S",
    "trace_eval",
    "sturmian_value",
    "build_band_tree",
    "band_length",
    "length_envelope",
    "gaps_of_order",
    "gap_ratio_check",
    "chebyshev_family",
    "epsilon_pl",
    "sigma_bands",
    "tree_bits",
]

WINDOW_MIN_LAMBDA = 24


class BracketingFailure(RuntimeError):
    """The required number of sign changes was not found."""


class VerificationFailure(AssertionError):
    """A proven bound failed numerically."""


# ---------------------------------------------------------------------------
# Chebyshev polynomials


def cheb_S(p: int, x):
    """``S_p(x)`` for ``p >= -1`` in the arithmetic of ``x``."""
    if p == -1:
        return -1 + 0 * x
    u0, u1 = 0 * x, 1 + 0 * x
    for _ in range(p):
        u0, u1 = u1, x * u1 - u0
    return u0


def _cheb(x, dx, a: int):
    """``S_{a-1}, S_a, S_{a+1}`` at ``x`` and their derivatives (``x' = dx``)."""
    if a <= 48:
        u0, u1, d0, d1 = -1, 0, 0, 0
        for _ in range(a):
            u0, u1, d0, d1 = u1, x * u1 - u0, d1, dx * u1 + x * d1 - d0
        return u0, u1, x * u1 - u0, d0, d1, dx * u1 + x * d1 - d0
    # doubling on (S_k, S_{k+1}):
    #   S_{2k} = S_k (S_{k+1} - S_{k-1}),  S_{2k+1} = S_{k+1}^2 - S_k^2
    uk, uk1, dk, dk1 = 0, 1, 0, 0
    for bit in bin(a)[2:]:
        ukm1 = x * uk - uk1
        dkm1 = dx * uk + x * dk - dk1
        s = uk1 - ukm1
        ds = dk1 - dkm1
        u2k = uk * s
        d2k = dk * s + uk * ds
        u2k1 = uk1 * uk1 - uk * uk
        d2k1 = 2 * (uk1 * dk1 - uk * dk)
        if bit == "1":
            u2k2 = x * u2k1 - u2k
            d2k2 = dx * u2k1 + x * d2k1 - d2k
            uk, uk1, dk, dk1 = u2k1, u2k2, d2k1, d2k2
        else:
            uk, uk1, dk, dk1 = u2k, u2k1, d2k, d2k1
    return x * uk - uk1, uk, uk1, dx * uk + x * dk - dk1, dk, dk1


# ---------------------------------------------------------------------------
# trace map


class _Evaluator:
    """Trace-map evaluation with E-derivatives for a fixed digit prefix."""

    __slots__ = ("digits", "lam")

    def __init__(self, digits: Sequence[int], lam):
        self.digits = tuple(digits)
        self.lam = mpfr(lam)

    def state(self, E, n: int):
        if n > len(self.digits):
            raise ValueError(f"state at depth {n} needs {n} digits, have {len(self.digits)}")
        y, x, z = mpfr(2), E, E - self.lam
        dy, dx, dz = 0, 1, 1
        for a in self.digits[:n]:
            um1, u, up1, dum1, du, dup1 = _cheb(x, dx, a)
            y, x, z, dy, dx, dz = (
                x,
                u * z - um1 * y,
                up1 * z - u * y,
                dx,
                du * z + u * dz - dum1 * y - um1 * dy,
                dup1 * z + up1 * dz - du * y - u * dy,
            )
        return y, x, z, dy, dx, dz

    def handle(self, E, n: int, p: int):
        """``h_(n,p)`` and its derivative at ``E``."""
        y, x, z, dy, dx, dz = self.state(E, n)
        um1, u, up1, dum1, du, dup1 = _cheb(x, dx, p)
        return u * z - um1 * y, du * z + u * dz - dum1 * y - um1 * dy

    def band_poly(self, order: int, band_type: int) -> Callable:
        if band_type == 1:
            return lambda E: self.handle(E, order, 1)
        return lambda E: self.trace(E, order)

    def trace(self, E, n: int):
        """``x_n = h_(n+1,0)`` and its derivative; needs only ``n`` digits."""
        _, x, _, _, dx, _ = self.state(E, n)
        return x, dx


@dataclass
class TransferState:
    """Transfer matrices ``M_{n-1}, M_n`` and their traces at one energy."""

    M_prev: tuple
    M_curr: tuple
    t_prev: object
    t_curr: object
    t_mixed: object
    depth: int
    precision_bits: int | None
    digits: tuple[int, ...]
    lam: object

    def h(self, p: int):
        """``h_(n,p) = tr(M_{n-1} M_n^p)`` from the traces."""
        return cheb_S(p, self.t_curr) * self.t_mixed - cheb_S(p - 1, self.t_curr) * self.t_prev

    def fricke_vogt(self):
        """``X^2 + Y^2 + Z^2 - 2XYZ - 1 - lambda^2/4`` on half traces (zero in exact arithmetic)."""
        X, Y, Z = self.t_curr / 2, self.t_prev / 2, self.t_mixed / 2
        return X * X + Y * Y + Z * Z - 2 * X * Y * Z - 1 - self.lam * self.lam / 4

    def determinants(self):
        return tuple(m[0][0] * m[1][1] - m[0][1] * m[1][0] for m in (self.M_prev, self.M_curr))


def _mm(A, B):
    return (
        (A[0][0] * B[0][0] + A[0][1] * B[1][0], A[0][0] * B[0][1] + A[0][1] * B[1][1]),
        (A[1][0] * B[0][0] + A[1][1] * B[1][0], A[1][0] * B[0][1] + A[1][1] * B[1][1]),
    )


def _mpow(A, k: int):
    one, zero = A[0][0] * 0 + 1, A[0][0] * 0
    R = ((one, zero), (zero, one))
    while k:
        if k & 1:
            R = _mm(R, A)
        A = _mm(A, A)
        k >>= 1
    return R


def trace_eval(f: Frequency | Sequence[int], lam, E, n: int, bits: int | None = 128) -> TransferState:
    """Matrices ``M_{n-1}, M_n`` by ``M_{k+1} = M_{k-1} M_k^{a_{k+1}}``.

    ``E`` and ``lam`` given as ``Fraction``/int with ``bits=None`` run in
    exact rational arithmetic; otherwise mpfr at ``bits``.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    digits = tuple(f.prefix(n)) if isinstance(f, Frequency) else tuple(f)[:n]
    if len(digits) < n:
        raise ValueError("not enough digits")

    def run():
        if bits is None:
            e, l = Fraction(E), Fraction(lam)
        else:
            e, l = mpfr(E), mpfr(lam)
        one, zero = e * 0 + 1, e * 0
        Mp = ((one, -l), (zero, one))
        Mc = ((e, -one), (one, zero))
        for a in digits:
            Mp, Mc = Mc, _mm(Mp, _mpow(Mc, a))
        tr = lambda m: m[0][0] + m[1][1]
        return TransferState(Mp, Mc, tr(Mp), tr(Mc), tr(_mm(Mp, Mc)), n, bits, digits, l)

    if bits is None:
        return run()
    with gmpy2.context(precision=bits):
        return run()


def sturmian_value(f: Frequency, k: int) -> int:
    """``S_k = floor((k+1) alpha) - floor(k alpha)``, exact from a digit prefix."""
    from .cf import digits_for_sites, sturmian_word

    if k < 1:
        raise ValueError("site index must be >= 1")
    return sturmian_word(digits_for_sites(f, k), k)[k - 1]


# ---------------------------------------------------------------------------
# root finding


class _NoBracket(Exception):
    pass


def _rtsafe(fn, a, b, target, tol, maxit: int = 500):
    """Root of ``fn(E)[0] = target`` on ``[a, b]`` by safeguarded Newton."""
    fa = fn(a)[0] - target
    fb = fn(b)[0] - target
    if fa == 0:
        return a
    if fb == 0:
        return b
    if (fa > 0) == (fb > 0):
        raise _NoBracket
    xl, xh = (a, b) if fa < 0 else (b, a)
    x = (a + b) / 2
    dxold = abs(b - a)
    dx = dxold
    f, df = fn(x)
    f -= target
    for _ in range(maxit):
        if ((x - xh) * df - f) * ((x - xl) * df - f) > 0 or abs(2 * f) > abs(dxold * df):
            dxold = dx
            dx = (xh - xl) / 2
            x = xl + dx
        else:
            dxold = dx
            dx = f / df
            x = x - dx
        if abs(dx) < tol or abs(xh - xl) < tol:
            return x
        f, df = fn(x)
        f -= target
        if f == 0:
            return x
        if f < 0:
            xl = x
        else:
            xh = x
    raise _NoBracket


# ---------------------------------------------------------------------------
# bands


class Band:
    """Closed spectral generating band with its code and tree links."""

    __slots__ = ("lo", "hi", "order", "band_type", "code", "genpoly", "parent", "children", "err", "_log")

    def __init__(self, lo, hi, order: int, band_type: int | None, code: Word, parent: "Band | None" = None, err=0):
        self.lo = lo
        self.hi = hi
        self.order = order
        self.band_type = band_type
        self.code = code
        if band_type == 1:
            self.genpoly = (order, 1)
        elif band_type in (2, 3):
            self.genpoly = (order + 1, 0)
        else:
            self.genpoly = None
        self.parent = parent
        self.children: list[Band] | None = None
        self.err = err
        self._log = None

    @property
    def length(self):
        return self.hi - self.lo

    @property
    def length_log(self) -> float:
        if self._log is None:
            self._log = float(gmpy2.log(self.hi - self.lo))
        return self._log

    @property
    def mid(self):
        return (self.lo + self.hi) / 2

    def __repr__(self) -> str:
        return f"Band({self.code}, order={self.order}, type={self.band_type}, [{float(self.lo):.12g}, {float(self.hi):.12g}])"

    def contains(self, other: "Band") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi

    def to_dict(self) -> dict:
        parent = self.parent.code if self.parent is not None and self.parent.order >= 0 else None
        # enough significant digits to resolve the band and its error
        digits = 20 + max(0, math.ceil((math.log(abs(float(self.hi)) + 1) - self.length_log) / math.log(10)))
        return {
            "order": self.order,
            "type": self.band_type,
            "code": str(self.code),
            "lo": format(self.lo, f".{digits}g"),
            "hi": format(self.hi, f".{digits}g"),
            "log_len": self.length_log,
            "parent_code": None if parent is None else str(parent),
        }


def tree_bits(lam, digits: Sequence[int]) -> int:
    """Working precision covering the smallest band length allowed at this depth."""
    lam = float(lam)
    tau2 = 2.0 * (lam + 5.0)
    lg = math.log2(tau2)
    need = math.log2(lam + 4.0)
    for a in digits:
        need += lg + 3.0 * math.log2(a) + max(0, a - 2) * lg
    return 96 + int(math.ceil(need))


def length_envelope(lam, word: Word) -> tuple[float, float]:
    """Natural-log lower/upper length bounds for the band coded by ``word``."""
    lam = float(lam)
    tau1 = (lam - 8.0) / 3.0
    tau2 = 2.0 * (lam + 5.0)
    n = word.order
    lo = -n * math.log(tau2)
    hi = math.log(4.0) - n * math.log(tau1)
    for e in word.letters:
        lo -= 3.0 * math.log(e.level)
        if e.band_type == 2:
            lo += (2 - e.level) * math.log(tau2)
            hi += (2 - e.level) * math.log(tau1)
    # the 2^(2-n) cap fails at n = 1 when a_1 = 1: the type-2 band is all of [lam-2, lam+2]
    if n >= 2:
        hi = min(hi, (2 - n) * math.log(2.0))
    return lo, hi


class BandTree:
    """Nested band covering for one frequency and coupling.

    Children are computed on demand; ``expand(depth)`` materializes every
    order up to ``depth``.  ``method`` is ``"window"``, ``"scan"`` or
    ``"auto"`` (window when the coupling allows it, scan otherwise).
    """

    def __init__(self, f: Frequency | Sequence[int], lam, depth: int, *, bits: int | None = None, method: str = "auto"):
        if not isinstance(f, Frequency):
            f = Frequency.explicit(f)
        lam_q = Fraction(lam) if not isinstance(lam, float) else Fraction(*lam.as_integer_ratio())
        if lam_q <= 4:
            raise ValueError("coupling must exceed 4")
        self.frequency = f
        self.lam = float(lam)
        self.depth = depth
        self.digits = tuple(f.prefix(depth + 1)) if f.available() > depth else tuple(f.prefix(depth))
        self.bits = bits or tree_bits(lam, self.digits[:depth])
        if method == "auto":
            method = "window" if self.lam >= WINDOW_MIN_LAMBDA else "scan"
        if method not in ("window", "scan"):
            raise ValueError(f"unknown method {method!r}")
        self.method = method
        self._lam_str = str(lam)
        with self.context():
            self.ev = _Evaluator(self.digits, mpfr(self._lam_str))
            L = mpfr(self._lam_str)
            self.root = Band(mpfr(-2), L + 2, -1, None, Word((), None))
            b3 = Band(mpfr(-2), mpfr(2), 0, 3, Word((), 3), self.root)
            b1 = Band(L - 2, L + 2, 0, 1, Word((), 1), self.root)
        self.root.children = [b3, b1]
        self.index: dict[Word, Band] = {b3.code: b3, b1.code: b1}
        self.stats = {"window": 0, "scan": 0, "retries": 0}

    def context(self):
        return gmpy2.context(precision=self.bits)

    # structure ----------------------------------------------------------

    def digit(self, i: int) -> int:
        return self.digits[i - 1]

    def order0(self) -> list[Band]:
        return list(self.root.children)

    def children(self, band: Band) -> list[Band]:
        if band.children is None:
            if band.order >= self.depth:
                raise ValueError(f"order {band.order + 1} exceeds the tree depth {self.depth}")
            band.children = self._compute_children(band)
            for c in band.children:
                self.index[c.code] = c
        return band.children

    def expand(self, depth: int | None = None) -> "BandTree":
        depth = self.depth if depth is None else depth
        frontier = self.order0()
        for _ in range(depth):
            nxt = []
            for b in frontier:
                nxt.extend(self.children(b))
            frontier = nxt
        return self

    def level(self, n: int) -> list[Band]:
        """All bands of order ``n`` in increasing energy (expands as needed)."""
        if n == -1:
            return [self.root]
        out = self.order0()
        for _ in range(n):
            out = [c for b in out for c in self.children(b)]
        return out

    def band(self, w: Word) -> Band:
        """Band coded by ``w`` (computing only the path to it)."""
        hit = self.index.get(w)
        if hit is not None:
            return hit
        if w.boundary not in (1, 3):
            raise KeyError(f"{w} is not a band word")
        b = self.index[Word((), w.boundary)]
        for i, e in enumerate(w.letters):
            code = Word(w.letters[: i + 1], w.boundary)
            nb = self.index.get(code)
            if nb is None:
                if b.children is None and self.method == "window" and b.band_type in (2, 3):
                    nb = self._single_child(b, e)
                    if nb is None:
                        self.children(b)
                        nb = self.index.get(code)
                        if nb is None:
                            raise KeyError(f"{w} is not admissible for this frequency")
                    else:
                        self.index[code] = nb
                else:
                    kids = self.children(b)
                    nb = self.index.get(code)
                    if nb is None:
                        raise KeyError(f"{w} is not admissible for this frequency")
            b = nb
        return b

    def walk(self) -> Iterator[Band]:
        stack = list(reversed(self.order0()))
        while stack:
            b = stack.pop()
            yield b
            if b.children:
                stack.extend(reversed(b.children))

    # child finding ------------------------------------------------------

    def _expected(self, band: Band) -> list[Letter]:
        return successors(band.band_type, self.digit(band.order + 1))

    def _compute_children(self, band: Band) -> list[Band]:
        last = None
        for attempt in range(3):
            try:
                with self.context():
                    if self.method == "window":
                        kids = self._children_window(band)
                        self.stats["window"] += 1
                    else:
                        kids = self._children_scan(band)
                        self.stats["scan"] += 1
                self._check_children(band, kids)
                return kids
            except (BracketingFailure, _NoBracket, VerificationFailure, ZeroDivisionError) as exc:
                last = exc
                self.stats["retries"] += 1
                self.bits *= 2
                with self.context():
                    self.ev = _Evaluator(self.digits, mpfr(self._lam_str))
        try:
            with self.context():
                kids = self._children_scan(band)
            self._check_children(band, kids)
            self.stats["scan"] += 1
            return kids
        except (_NoBracket, ZeroDivisionError) as exc:
            raise BracketingFailure(f"children of {band.code}: {exc or last}") from exc

    def _check_children(self, band: Band, kids: list[Band]):
        want = self._expected(band)
        got = [c.code.letters[-1] for c in kids]
        if got != want:
            raise VerificationFailure(f"children of {band.code}: {got} != {want}")
        prev = band.lo
        for c in kids:
            if not (c.lo < c.hi):
                raise VerificationFailure(f"degenerate band {c.code}")
            if c.lo < prev or c.hi > band.hi:
                raise VerificationFailure(f"band {c.code} escapes its parent or overlaps a sibling")
            prev = c.hi

    def _make(self, parent: Band, e: Letter, lo, hi, err) -> Band:
        return Band(lo, hi, parent.order + 1, e.band_type, parent.code.extend(e), parent, err)

    def _edges(self, g, lo, hi, scale):
        """Solve ``g = -2`` and ``g = +2`` on ``[lo, hi]``; returns the sorted pair."""
        tol = scale * mpfr(2) ** (-56)
        e1 = _rtsafe(g, lo, hi, -2, tol)
        e2 = _rtsafe(g, lo, hi, 2, tol)
        return (e1, e2, tol) if e1 < e2 else (e2, e1, tol)

    def _type1_child(self, band: Band) -> Band:
        n = band.order
        a = self.digit(n + 1)
        ev = self.ev
        if a == 1:
            # x_{n+1} = z_n: the child band is the parent interval itself
            return self._make(band, Letter(2, 1, 1), band.lo, band.hi, band.err)

        def F(E):
            y, x, z, dy, dx, dz = ev.state(E, n)
            um1, u, up1, dum1, du, dup1 = _cheb(x, dx, a)
            r = um1 / u
            dr = (dum1 * u - um1 * du) / (u * u)
            return z - y * r, dz - dy * r - y * dr

        width = band.hi - band.lo
        E0 = _rtsafe(F, band.lo, band.hi, 0, width * mpfr(2) ** (-40))
        g = lambda E: ev.handle(E, n, a)
        gd = abs(g(E0)[1])
        scale = 4 / gd if gd > 0 else width
        if scale < width * mpfr(2) ** (-32):
            # the child is far narrower than the parent: pin the centre to its scale
            E0 = _rtsafe(F, band.lo, band.hi, 0, scale * mpfr(2) ** (-16))
        tol = scale * mpfr(2) ** (-56)
        lo = _rtsafe(g, *self._near(g, E0, band.lo, scale), tol)
        hi = _rtsafe(g, *self._near(g, E0, band.hi, scale), tol)
        return self._make(band, Letter(2, 1, a), lo, hi, tol)

    @staticmethod
    def _near(g, E0, end, scale):
        """Bracket for the ``+-2`` crossing of ``g`` between ``E0`` and ``end``.

        Grows geometrically from ``E0`` so a child much narrower than its
        parent costs a few Newton steps rather than a long bisection.
        """
        target = -2 if g(end)[0] < 0 else 2
        s0 = g(E0)[0] - target
        step = scale if end > E0 else -scale
        while True:
            E = E0 + step
            if (E >= end) if end > E0 else (E <= end):
                E = end
            if (g(E)[0] - target > 0) != (s0 > 0) or E == end:
                return (E0, E, target) if end > E0 else (E, E0, target)
            step *= 4

    def _family(self, band: Band, e: Letter) -> tuple[int, int]:
        a = e.level
        pg = a + 1 if e.band_type == 1 else a
        pw = pg + 1 if band.band_type == 2 else pg
        return pg, pw

    def _single_child(self, band: Band, e: Letter) -> Band | None:
        """One child of a type 2/3 parent by the window method (``None`` if unverified)."""
        if e not in self._expected(band):
            raise KeyError(f"{e} cannot follow {band.code}")
        try:
            with self.context():
                P = self.ev.band_poly(band.order, band.band_type)
                decreasing = P(band.mid)[1] < 0
                c = self._window_child(band, e, P, decreasing)
        except (_NoBracket, ZeroDivisionError):
            return None
        if not (band.lo <= c.lo < c.hi <= band.hi):
            return None
        return c

    def _window_child(self, band: Band, e: Letter, P, decreasing: bool) -> Band:
        n = band.order
        pg, pw = self._family(band, e)
        l = e.index if decreasing else pw - e.index
        eps = epsilon_pl(pw, l)
        c_hi = 2 * gmpy2.cos(mpfr(l - eps) * gmpy2.const_pi() / pw)
        c_lo = 2 * gmpy2.cos(mpfr(l + eps) * gmpy2.const_pi() / pw)
        ptol = (band.hi - band.lo) * mpfr(2) ** (-30)
        w1 = _rtsafe(P, band.lo, band.hi, c_lo, ptol)
        w2 = _rtsafe(P, band.lo, band.hi, c_hi, ptol)
        wl, wr = (w1, w2) if w1 < w2 else (w2, w1)
        g = lambda E: self.ev.handle(E, n, pg)
        lo, hi, tol = self._edges(g, wl, wr, wr - wl)
        return self._make(band, e, lo, hi, tol)

    def _children_window(self, band: Band) -> list[Band]:
        if band.band_type == 1:
            return [self._type1_child(band)]
        P = self.ev.band_poly(band.order, band.band_type)
        decreasing = P(band.mid)[1] < 0
        return [self._window_child(band, e, P, decreasing) for e in self._expected(band)]

    def _children_scan(self, band: Band, grid: int | None = None, max_grid: int = 1 << 16) -> list[Band]:
        n = band.order
        a = self.digit(n + 1)
        if band.band_type == 1 and a == 1:
            return [self._type1_child(band)]
        want = self._expected(band)
        fams = []
        for t in (1, 2, 3):
            k = sum(1 for e in want if e.band_type == t)
            if k:
                pg = a if t in (2, 3) else a + 1
                fams.append((t, pg, k))
        found: list[tuple] = []
        for t, pg, k in fams:
            g = lambda E, pg=pg: self.ev.handle(E, n, pg)
            N = grid or 16 * (k + 1)
            while True:
                res = _scan_bands(g, band.lo, band.hi, N)
                if res is not None and len(res) == k:
                    break
                if N >= max_grid:
                    got = "?" if res is None else len(res)
                    raise BracketingFailure(f"scan of {band.code}: {got} bands of type {t}, expected {k}")
                N *= 2
            for i, (lo, hi, tol) in enumerate(res):
                found.append((lo, hi, tol, t))
        found.sort(key=lambda r: r[0])
        kids = []
        idx = {1: 0, 2: 0, 3: 0}
        for lo, hi, tol, t in found:
            idx[t] += 1
            kids.append(self._make(band, Letter(t, idx[t], a), lo, hi, tol))
        return kids

    # export ---------------------------------------------------------------

    def to_jsonl(self) -> str:
        return "\n".join(json.dumps(b.to_dict()) for b in self.walk()) + "\n"


def _scan_bands(g, lo, hi, N: int):
    """Components of ``|g| <= 2`` inside ``[lo, hi]`` from an ``N``-cell grid."""
    h = (hi - lo) / N
    xs = [lo + h * i for i in range(N)] + [hi]
    vs = [g(x)[0] for x in xs]
    if abs(vs[0]) <= 2 or abs(vs[-1]) <= 2:
        return None
    cross = []
    tol = h * mpfr(2) ** (-60)
    for i in range(N):
        v0, v1 = vs[i], vs[i + 1]
        for target in (-2, 2):
            if (v0 - target > 0) != (v1 - target > 0):
                try:
                    r = _rtsafe(g, xs[i], xs[i + 1], target, tol)
                except _NoBracket:
                    return None
                cross.append((r, target, i))
    cross.sort(key=lambda c: c[0])
    bands = []
    j = 0
    while j < len(cross):
        if j + 1 < len(cross) and cross[j][1] != cross[j + 1][1]:
            r0, r1 = cross[j][0], cross[j + 1][0]
            m = g((r0 + r1) / 2)[0]
            if abs(m) <= 2:
                w = r1 - r0
                bands.append((r0, r1, w * mpfr(2) ** (-56)))
                j += 2
                continue
        j += 1
    # a cell with two crossings of the same level hides structure
    per_cell: dict[int, int] = {}
    for r, t, i in cross:
        per_cell[(i, t)] = per_cell.get((i, t), 0) + 1
    if any(v > 1 for v in per_cell.values()):
        return None
    return bands


def build_band_tree(f: Frequency | Sequence[int], lam, depth: int, *, bits: int | None = None, method: str = "auto") -> BandTree:
    """Full coded covering of orders ``0..depth``."""
    return BandTree(f, lam, depth, bits=bits, method=method).expand()


def band_length(tree: BandTree, w: Word, *, proxy: bool = False) -> tuple[float, float, bool]:
    """``(length, log length, flagged)`` of the band coded by ``w``.

    With ``proxy`` the log length comes from ``4/|h'(midpoint)|`` and the
    flag is set.
    """
    b = tree.band(w)
    if not proxy:
        return float(b.length), b.length_log, False
    with tree.context():
        h = tree.ev.band_poly(b.order, b.band_type) if b.order >= 0 else None
        d = abs(h(b.mid)[1])
        lg = float(gmpy2.log(4 / d))
    return math.exp(lg), lg, True


# ---------------------------------------------------------------------------
# gaps


@dataclass
class Gap:
    lo: object
    hi: object
    parent: Band
    order: int
    inner_lo: object = None
    inner_hi: object = None

    @property
    def length(self):
        return self.hi - self.lo

    def ratio(self) -> float:
        return float((self.hi - self.lo) / self.parent.length)


def _extreme(tree: BandTree, b: Band, side: int, depth: int) -> Band:
    while b.order < depth:
        kids = tree.children(b)
        b = kids[-1] if side > 0 else kids[0]
    return b


def gaps_of_order(tree: BandTree, n: int, refine_to: int | None = None) -> list[Gap]:
    """Gaps of order ``n``: between consecutive children of each order-``n`` band.

    Edges are pushed out to the extreme descendants at order ``refine_to``
    (default: the tree depth), so the slivers next to a band's boundary are
    absorbed into the lower-order gap they belong to.
    """
    depth = tree.depth if refine_to is None else refine_to
    if n + 1 > depth:
        raise ValueError(f"gaps of order {n} need depth >= {n + 1}")
    out = []
    for b in tree.level(n):
        kids = tree.children(b) if b.order >= 0 else b.children
        for left, right in zip(kids, kids[1:]):
            lo = _extreme(tree, left, +1, depth).hi
            hi = _extreme(tree, right, -1, depth).lo
            out.append(Gap(lo, hi, b, n, left.hi, right.lo))
    return out


@dataclass
class GapStats:
    per_order: dict
    global_min: float
    depth: int

    def rows(self):
        for n, (mn, cnt) in sorted(self.per_order.items()):
            yield n, mn, cnt


def gap_ratio_check(tree: BandTree, max_order: int) -> GapStats:
    """Min over gaps of ``|G|/|B_G| * a_{n+1}^3`` per order and overall."""
    if tree.lam < WINDOW_MIN_LAMBDA:
        raise ValueError("the gap bound needs coupling >= 24")
    per = {}
    for n in range(-1, max_order + 1):
        gaps = gaps_of_order(tree, n)
        a3 = 1 if n < 0 else tree.digit(n + 1) ** 3
        vals = [g.ratio() * a3 for g in gaps]
        per[n] = (min(vals) if vals else math.inf, len(vals))
    gm = min(v for v, c in per.values() if c)
    return GapStats(per, gm, tree.depth)


def sigma_bands(tree: BandTree, n: int, grid: int = 4096) -> list[tuple]:
    """Components of ``|x_n| <= 2`` on ``[-2, lam+2]`` found directly by scanning."""
    with tree.context():
        g = lambda E: tree.ev.trace(E, n)
        N = grid
        expect = sum(count_vector("boundary", tree.digits[:n])[1:]) if n > 0 else 1
        while True:
            lo = tree.root.lo - mpfr(1) / 7
            res = _scan_bands(g, lo, tree.root.hi + mpfr(1) / 7, N)
            if res is not None and len(res) == expect:
                return res
            if N > 1 << 20:
                raise BracketingFailure(f"direct scan found {None if res is None else len(res)} of {expect}")
            N *= 2


# ---------------------------------------------------------------------------
# Chebyshev interval families


def epsilon_pl(p: int, l: int) -> float:
    """Fattening parameter of the window around ``2 cos(l pi / p)``."""
    if p <= 4:
        return 0.1
    return min(0.1, (l + 0.1) / (3.92 * p), (p - l + 0.1) / (3.92 * p))


@dataclass
class ChebyshevFamily:
    p: int
    intervals_I: list  # [(key, lo, hi)], key = (p', l)
    intervals_J: list
    eps: dict
    r: float
    d: float
    checks: dict

    @property
    def ok(self) -> bool:
        return all(self.checks.values())


def _I_interval(p: int, l: int) -> tuple[float, float]:
    """``{2cos t : |t - l pi/p| <= 0.1 pi/p, |S_p(2cos t)| <= 1/4}`` as an x-interval."""
    from scipy.optimize import brentq

    c = l * math.pi / p
    w = 0.1 * math.pi / p
    f = lambda t: abs(math.sin(p * t) / math.sin(t)) - 0.25
    t_hi = brentq(f, c, c + w, xtol=1e-15, rtol=8.9e-16)
    t_lo = brentq(f, c - w, c, xtol=1e-15, rtol=8.9e-16)
    # widen by a few ulps in theta so the enclosure is conservative
    pad = 1e-13
    return 2 * math.cos(t_hi + pad), 2 * math.cos(t_lo - pad)


def _J_interval(p: int, l: int) -> tuple[float, float]:
    e = epsilon_pl(p, l)
    return 2 * math.cos((l + e) * math.pi / p), 2 * math.cos((l - e) * math.pi / p)


def chebyshev_family(p: int) -> ChebyshevFamily:
    """I and J intervals of family ``p`` and the three structural checks."""
    if p < 2:
        raise ValueError("p must be >= 2")
    keys = [(p, l) for l in range(1, p)] + [(p + 1, s) for s in range(1, p + 1)]
    I = {k: _I_interval(*k) for k in keys}
    J = {k: _J_interval(*k) for k in keys}
    eps = {k: epsilon_pl(*k) for k in keys}
    contain = all(J[k][0] <= I[k][0] and I[k][1] <= J[k][1] for k in keys)
    # left-to-right: (p+1,p), (p,p-1), (p+1,p-1), ..., (p,1), (p+1,1)
    order = [(p + 1, p)]
    for l in range(p - 1, 0, -1):
        order += [(p, l), (p + 1, l)]
    ordered = all(J[u][1] < J[v][0] for u, v in zip(order, order[1:]))
    rs, ds = [], []
    for u, v in zip(order, order[1:]):
        d = J[v][0] - J[u][1]
        D = J[v][1] - J[u][0]
        ds.append(d)
        rs.append(D / d if d > 0 else math.inf)
    r = max(rs)
    d = min(ds)
    checks = {
        "I_in_J": contain,
        "ordering": ordered,
        "r_le_40": r <= 40,
        "d_ge_1/(20p^3)": d >= 1.0 / (20 * p**3),
    }
    return ChebyshevFamily(
        p,
        [(k, *I[k]) for k in order],
        [(k, *J[k]) for k in order],
        eps,
        r,
        d,
        checks,
    )
