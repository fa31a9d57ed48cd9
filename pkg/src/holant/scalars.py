"""Scalar backends: exact Gaussian rationals and tolerance-compared complex floats."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

import numpy as np
from gmpy2 import is_square, isqrt, mpq, mpz

from .errors import BackendMismatch, InexactError


def _q(x) -> mpq:
    if isinstance(x, mpq):
        return x
    if isinstance(x, float):
        return mpq(Fraction(x))
    if isinstance(x, str):
        return mpq(Fraction(x))
    return mpq(x)


class GaussQ:
    """Element of Q[i], stored as a pair of gmpy2 rationals."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        object.__setattr__(self, "re", _q(re))
        object.__setattr__(self, "im", _q(im))

    def __setattr__(self, name, value):
        raise AttributeError("GaussQ is immutable")

    @staticmethod
    def coerce(x) -> "GaussQ":
        if isinstance(x, GaussQ):
            return x
        if isinstance(x, complex):
            return GaussQ(Fraction(x.real), Fraction(x.imag))
        return GaussQ(x, 0)

    def __add__(self, o):
        if not isinstance(o, GaussQ):
            if isinstance(o, (int, mpq, mpz, Fraction)):
                return GaussQ(self.re + o, self.im)
            return NotImplemented
        return GaussQ(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __sub__(self, o):
        if not isinstance(o, GaussQ):
            if isinstance(o, (int, mpq, mpz, Fraction)):
                return GaussQ(self.re - o, self.im)
            return NotImplemented
        return GaussQ(self.re - o.re, self.im - o.im)

    def __rsub__(self, o):
        return GaussQ.coerce(o) - self

    def __mul__(self, o):
        if not isinstance(o, GaussQ):
            if isinstance(o, (int, mpq, mpz, Fraction)):
                return GaussQ(self.re * o, self.im * o)
            return NotImplemented
        a, b, c, d = self.re, self.im, o.re, o.im
        return GaussQ(a * c - b * d, a * d + b * c)

    __rmul__ = __mul__

    def __neg__(self):
        return GaussQ(-self.re, -self.im)

    def __pos__(self):
        return self

    def conjugate(self) -> "GaussQ":
        return GaussQ(self.re, -self.im)

    def norm(self) -> mpq:
        return self.re * self.re + self.im * self.im

    def inverse(self) -> "GaussQ":
        n = self.norm()
        if n == 0:
            raise ZeroDivisionError("division by exact zero")
        return GaussQ(self.re / n, -self.im / n)

    def __truediv__(self, o):
        if not isinstance(o, GaussQ):
            if isinstance(o, (int, mpq, mpz, Fraction)):
                if o == 0:
                    raise ZeroDivisionError("division by exact zero")
                return GaussQ(self.re / o, self.im / o)
            return NotImplemented
        return self * o.inverse()

    def __rtruediv__(self, o):
        return GaussQ.coerce(o) * self.inverse()

    def __pow__(self, k: int):
        if not isinstance(k, int):
            return NotImplemented
        if k < 0:
            return self.inverse() ** (-k)
        out = GaussQ(1)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def __eq__(self, o):
        if isinstance(o, GaussQ):
            return self.re == o.re and self.im == o.im
        if isinstance(o, (int, mpq, mpz, Fraction)):
            return self.im == 0 and self.re == o
        if isinstance(o, complex):
            return complex(self) == o
        return NotImplemented

    def __hash__(self):
        if self.im == 0:
            return hash(self.re)
        return hash((self.re, self.im))

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __abs__(self):
        return math.sqrt(float(self.norm()))

    def __repr__(self):
        return f"GaussQ({format_scalar(self)!r})"

    def __str__(self):
        return format_scalar(self)


I = GaussQ(0, 1)


def _rational_sqrt(q: mpq):
    if q < 0:
        return None
    n, d = q.numerator, q.denominator
    if not (is_square(n) and is_square(d)):
        return None
    return mpq(isqrt(n), isqrt(d))


def gauss_sqrt(z: GaussQ):
    """Exact square root in Q[i], or None when z is not a square there."""
    if not z:
        return GaussQ(0)
    a, b = z.re, z.im
    r = _rational_sqrt(a * a + b * b)
    if r is None:
        return None
    x = _rational_sqrt((a + r) / 2)
    if x is None:
        return None
    if x == 0:
        y = _rational_sqrt((r - a) / 2)
        if y is None:
            return None
        return GaussQ(0, y if b >= 0 else -y)
    return GaussQ(x, b / (2 * x))


# --- scalar strings -------------------------------------------------------

_NUM = r"(?:\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)(?:/\d+)?"
_COMPLEX_RE = re.compile(
    rf"^\s*(?P<re>[+-]?{_NUM})?\s*(?:(?P<sign>[+-])?\s*(?P<im>{_NUM})?\s*(?P<i>i))?\s*$"
)


def _num_to_fraction(tok: str) -> Fraction:
    if "/" in tok:
        p, q = tok.split("/")
        return Fraction(Fraction(p), Fraction(q))
    return Fraction(tok)


def parse_scalar(text: str, exact: bool = True):
    """Parse 'a+bi' style text into a GaussQ (exact) or complex."""
    s = str(text).strip().replace(" ", "")
    m = _COMPLEX_RE.match(s)
    if not m or s == "" or (m.group("re") is None and m.group("i") is None):
        raise ValueError(f"bad scalar literal {text!r}")
    re_tok, sign, im_tok, i_tok = m.group("re", "sign", "im", "i")
    re_v = Fraction(0)
    im_v = Fraction(0)
    if i_tok is None:
        re_v = _num_to_fraction(re_tok)
    elif sign is None and re_tok is not None:
        # forms like '3i' or '-2/3i': the matched "real" part is the imaginary coefficient
        if im_tok is not None:
            raise ValueError(f"bad scalar literal {text!r}")
        im_v = _num_to_fraction(re_tok)
    else:
        if re_tok is not None:
            re_v = _num_to_fraction(re_tok)
        mag = _num_to_fraction(im_tok) if im_tok is not None else Fraction(1)
        im_v = -mag if sign == "-" else mag
    if exact:
        return GaussQ(re_v, im_v)
    return complex(float(re_v), float(im_v))


def _fmt_q(q) -> str:
    q = mpq(q)
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


def _fmt_f(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def format_scalar(z) -> str:
    if isinstance(z, GaussQ):
        a, b = z.re, z.im
        fa, fb = _fmt_q, _fmt_q
    else:
        z = complex(z)
        a, b = z.real, z.imag
        fa, fb = _fmt_f, _fmt_f
    if b == 0:
        return fa(a)
    mag = "" if abs(b) == 1 else fb(abs(b))
    sign = "-" if b < 0 else "+"
    if a == 0:
        return f"{'-' if b < 0 else ''}{mag}i"
    return f"{fa(a)}{sign}{mag}i"


# --- backends -------------------------------------------------------------

@dataclass(frozen=True)
class Backend:
    """Scalar arithmetic policy shared by every signature in a computation."""

    name: str
    eps: float = 1e-9

    @property
    def exact(self) -> bool:
        return self.name == "exact"

    @property
    def dtype(self):
        return object if self.exact else np.complex128

    def scalar(self, x):
        if self.exact:
            if isinstance(x, float) or (isinstance(x, complex) and not isinstance(x, GaussQ)):
                raise BackendMismatch(f"float value {x!r} given to the exact backend")
            if isinstance(x, str):
                return parse_scalar(x, True)
            return GaussQ.coerce(x)
        if isinstance(x, str):
            return parse_scalar(x, False)
        if isinstance(x, GaussQ):
            raise BackendMismatch(f"exact value {x} given to the float backend")
        return complex(x)

    @property
    def zero(self):
        return GaussQ(0) if self.exact else 0j

    @property
    def one(self):
        return GaussQ(1) if self.exact else 1 + 0j

    @property
    def i(self):
        return GaussQ(0, 1) if self.exact else 1j

    def array(self, values: Iterable, shape=None) -> np.ndarray:
        vals = [self.scalar(v) for v in np.asarray(values, dtype=object).ravel()]
        out = np.empty(len(vals), dtype=self.dtype)
        out[:] = vals
        if shape is not None:
            out = out.reshape(shape)
        return out

    def convert(self, arr: np.ndarray) -> np.ndarray:
        """Coerce an array produced by this backend's own arithmetic."""
        arr = np.asarray(arr)
        if self.exact:
            if arr.dtype != object:
                if arr.dtype.kind in "iub":
                    return self.array(arr.ravel().tolist(), arr.shape)
                raise BackendMismatch("float array on the exact backend")
            if all(type(z) is GaussQ for z in arr.flat):
                return arr
            return self.array(arr.ravel().tolist(), arr.shape)
        if arr.dtype == object:
            return self.array(arr.ravel().tolist(), arr.shape)
        return np.asarray(arr, dtype=np.complex128)

    def zeros(self, shape) -> np.ndarray:
        if self.exact:
            out = np.empty(shape, dtype=object)
            out.fill(GaussQ(0))
            return out
        return np.zeros(shape, dtype=np.complex128)

    def eq(self, a, b) -> bool:
        if self.exact:
            return GaussQ.coerce(a) == GaussQ.coerce(b)
        a, b = complex(a), complex(b)
        return abs(a - b) <= self.eps * max(1.0, abs(a), abs(b))

    def is_zero(self, a) -> bool:
        if self.exact:
            return not a
        return abs(complex(a)) <= self.eps

    def allclose(self, x: np.ndarray, y: np.ndarray) -> bool:
        x = np.asarray(x)
        y = np.asarray(y)
        if x.shape != y.shape:
            return False
        if self.exact:
            return all(GaussQ.coerce(a) == GaussQ.coerce(b) for a, b in zip(x.flat, y.flat))
        xa = np.asarray(x, dtype=np.complex128)
        ya = np.asarray(y, dtype=np.complex128)
        scale = max(1.0, float(np.max(np.abs(xa), initial=0.0)), float(np.max(np.abs(ya), initial=0.0)))
        return bool(np.all(np.abs(xa - ya) <= self.eps * scale))

    def support(self, arr: np.ndarray) -> np.ndarray:
        """Boolean mask of entries that count as nonzero.

        On floats the threshold is relative to the largest entry, so a
        uniformly rescaled signature keeps the same support.
        """
        if self.exact:
            return np.fromiter((bool(z) for z in arr.flat), dtype=bool, count=arr.size).reshape(arr.shape)
        mag = np.abs(np.asarray(arr, dtype=np.complex128))
        top = float(mag.max(initial=0.0))
        if top == 0.0:
            return np.zeros(arr.shape, dtype=bool)
        return mag > self.eps * top

    def sqrt(self, z):
        if self.exact:
            r = gauss_sqrt(GaussQ.coerce(z))
            if r is None:
                raise InexactError(f"{z} has no square root in Q[i]")
            return r
        return complex(np.sqrt(complex(z)))

    def to_float(self, z) -> complex:
        return complex(z)

    def parse(self, text: str):
        return parse_scalar(text, self.exact)

    def format(self, z) -> str:
        return format_scalar(z)

    def check(self, other: "Backend") -> None:
        if other.name != self.name:
            raise BackendMismatch(f"cannot mix {self.name} and {other.name} backends")


EXACT = Backend("exact")
FLOAT = Backend("float")


def get_backend(name: str | Backend | None = None, eps: float | None = None) -> Backend:
    if isinstance(name, Backend):
        return name if eps is None else Backend(name.name, eps)
    if name is None:
        name = "exact"
    if name not in ("exact", "float"):
        raise ValueError(f"unknown backend {name!r}")
    return Backend(name, 1e-9 if eps is None else eps)
