"""Exact arithmetic in GF(p^r) with a designated field involution x -> x^(p^s).

Elements are residues of F_p[t] modulo a monic irreducible polynomial of
degree r.  Internally an element is a single int that encodes the coefficient
vector (c_0, ..., c_{r-1}) in base p with the constant term as the least
significant digit:

    val = c_0 + c_1 * p + ... + c_{r-1} * p^(r-1).

Comparing encoded ints compares coefficient vectors lexicographically from
the top coefficient down; this is the enumeration and tie-breaking order
used throughout the package.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from .errors import DivisionByZero, FieldMismatch

TABLE_LIMIT = 512  # build full add/mul tables up to this field size


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    d = 2
    while d * d <= n:
        if n % d == 0:
            return False
        d += 1
    return True


# ---------------------------------------------------------------------------
# polynomial helpers over F_p; coefficient lists are constant-term first


def _ptrim(a):
    while a and a[-1] == 0:
        a = a[:-1]
    return a


def _pmul(a, b, p):
    if not a or not b:
        return ()
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] = (out[i + j] + x * y) % p
    return _ptrim(tuple(out))


def _pmod(a, m, p):
    a = list(a)
    dm = len(m) - 1
    inv_lead = pow(m[-1], p - 2, p)
    while len(_ptrim(tuple(a))) - 1 >= dm:
        a = list(_ptrim(tuple(a)))
        shift = len(a) - 1 - dm
        c = (a[-1] * inv_lead) % p
        for i, mi in enumerate(m):
            a[shift + i] = (a[shift + i] - c * mi) % p
    return _ptrim(tuple(a))


def _monic_polys(p, deg):
    for val in range(p**deg):
        coeffs = []
        v = val
        for _ in range(deg):
            coeffs.append(v % p)
            v //= p
        yield tuple(coeffs) + (1,)


def is_irreducible(modulus, p) -> bool:
    """Exhaustive trial-division irreducibility test (desk scale)."""
    m = _ptrim(tuple(c % p for c in modulus))
    deg = len(m) - 1
    if deg < 1:
        return False
    for d in range(1, deg // 2 + 1):
        for f in _monic_polys(p, d):
            # f divides m iff m mod f == 0
            if not _pmod(m, f, p):
                return False
    return True


@lru_cache(maxsize=None)
def default_modulus(p: int, r: int) -> tuple:
    """Lexicographically least monic irreducible of degree r over F_p."""
    if r == 1:
        return (0, 1)
    for f in _monic_polys(p, r):
        if is_irreducible(f, p):
            return f
    raise ValueError(f"no irreducible polynomial of degree {r} over F_{p}")


# ---------------------------------------------------------------------------


class GF:
    """The field F_{p^r} together with the involution sigma(x) = x^(p^s).

    The invariant 2s = 0 mod r forces s = 0 (identity involution) or, for
    even r, s = r/2 (the unique involutory power of Frobenius).
    """

    def __init__(self, p: int, r: int = 1, modulus=None, s: int = 0):
        if not is_prime(p):
            raise ValueError(f"p = {p} is not prime")
        if r < 1:
            raise ValueError("extension degree must be >= 1")
        if modulus is None:
            modulus = default_modulus(p, r)
        modulus = _ptrim(tuple(c % p for c in modulus))
        if len(modulus) - 1 != r or modulus[-1] != 1:
            raise ValueError("modulus must be monic of degree r")
        if not is_irreducible(modulus, p):
            raise ValueError(f"modulus {modulus} is reducible over F_{p}")
        if (2 * s) % r != 0 or not 0 <= s < max(r, 1):
            raise ValueError("involution exponent must satisfy 2s = 0 mod r, 0 <= s < r")
        self.p = p
        self.r = r
        self.q = p**r
        self.modulus = modulus
        self.s = s
        self.zero = 0
        self.one = 1
        self._build_tables()

    # -- encoding ----------------------------------------------------------

    def encode(self, coeffs) -> int:
        val = 0
        for c in reversed(tuple(coeffs)):
            val = val * self.p + (c % self.p)
        return val

    def decode(self, val: int) -> tuple:
        out = []
        for _ in range(self.r):
            out.append(val % self.p)
            val //= self.p
        return tuple(out)

    # -- raw arithmetic on encoded values ----------------------------------

    def _slow_add(self, a, b):
        ca, cb = self.decode(a), self.decode(b)
        return self.encode((x + y) % self.p for x, y in zip(ca, cb))

    def _slow_neg(self, a):
        return self.encode((-x) % self.p for x in self.decode(a))

    def _slow_mul(self, a, b):
        prod = _pmod(_pmul(self.decode(a), self.decode(b), self.p), self.modulus, self.p)
        return self.encode(prod + (0,) * (self.r - len(prod)))

    def _pow(self, a, e):
        out, base = self.one, a
        while e:
            if e & 1:
                out = self.mul(out, base)
            base = self.mul(base, base)
            e >>= 1
        return out

    def _build_tables(self):
        if self.q > TABLE_LIMIT:
            self.add_table = self.mul_table = None
            self._inv_table = self._neg_table = self._conj_table = None
            self.add = self._slow_add
            self.mul = self._slow_mul
            self.neg = self._slow_neg
            self.inv = self._slow_inv
            self.conj = self._slow_conj
        else:
            q = self.q
            self.add = self._slow_add
            self.mul = self._slow_mul
            self.add_table = [[self._slow_add(a, b) for b in range(q)] for a in range(q)]
            self.mul_table = [[self._slow_mul(a, b) for b in range(q)] for a in range(q)]
            self._neg_table = [self._slow_neg(a) for a in range(q)]
            self._inv_table = [0] + [self._pow(a, self.q - 2) for a in range(1, q)]
            self._conj_table = [self._pow(a, self.p**self.s) for a in range(q)]
            at, mt = self.add_table, self.mul_table
            self.add = lambda a, b: at[a][b]
            self.mul = lambda a, b: mt[a][b]
            self.neg = lambda a: self._neg_table[a]
            self.inv = self._table_inv
            self.conj = lambda a: self._conj_table[a]

    def _table_inv(self, a):
        if a == 0:
            raise DivisionByZero("inverse of zero")
        return self._inv_table[a]

    def _slow_inv(self, a):
        if a == 0:
            raise DivisionByZero("inverse of zero")
        return self._pow(a, self.q - 2)

    def _slow_conj(self, a):
        return self._pow(a, self.p**self.s)

    def sub(self, a, b):
        return self.add(a, self.neg(b))

    def dot_sigma(self, u, v):
        """sum_i sigma(u_i) * v_i for encoded vectors u, v."""
        add, mul, conj = self.add, self.mul, self.conj
        acc = 0
        for x, y in zip(u, v):
            acc = add(acc, mul(conj(x), y))
        return acc

    # -- public API --------------------------------------------------------

    @property
    def has_involution(self) -> bool:
        return self.s != 0

    def element(self, value) -> "FieldElement":
        """Element from an integer constant (value * 1) or a coefficient iterable."""
        if isinstance(value, FieldElement):
            if value.field != self:
                raise FieldMismatch("element from a different field")
            return value
        if isinstance(value, int):
            return FieldElement(self, self.encode((value % self.p,) + (0,) * (self.r - 1)))
        return FieldElement(self, self.encode(tuple(value)))

    def from_coeffs(self, coeffs) -> "FieldElement":
        return FieldElement(self, self.encode(tuple(coeffs)))

    def elements(self):
        """All q elements in lexicographic coefficient order."""
        return [FieldElement(self, v) for v in range(self.q)]

    def element_values(self):
        return range(self.q)

    def literal(self) -> str:
        mod = ",".join(str(c) for c in self.modulus)
        return f"{self.p}^{self.r}:{mod}:{self.s}"

    def __eq__(self, other):
        return (
            isinstance(other, GF)
            and (self.p, self.r, self.modulus, self.s) == (other.p, other.r, other.modulus, other.s)
        )

    def __hash__(self):
        return hash((self.p, self.r, self.modulus, self.s))

    def __repr__(self):
        inv = f", s={self.s}" if self.s else ""
        return f"GF({self.p}^{self.r}{inv})"


@lru_cache(maxsize=None)
def gf(p: int, r: int = 1, modulus=None, s: int = 0) -> GF:
    """Cached field constructor; same arguments give the identical object."""
    return GF(p, r, modulus, s)


def parse_field(literal: str) -> GF:
    """Parse "p^r:modulus-coeffs:s" (modulus and s optional, e.g. "2^2:1,1,1:1")."""
    parts = literal.split(":")
    head = parts[0]
    if "^" in head:
        p_str, r_str = head.split("^")
        p, r = int(p_str), int(r_str)
    else:
        p, r = int(head), 1
    modulus = None
    if len(parts) >= 2 and parts[1]:
        modulus = tuple(int(c) for c in parts[1].split(","))
    s = int(parts[2]) if len(parts) >= 3 and parts[2] else 0
    return gf(p, r, modulus, s)


class FieldElement:
    """Immutable element of a GF; equality is coefficient equality."""

    __slots__ = ("field", "val")

    def __init__(self, field: GF, val: int):
        self.field = field
        self.val = val

    @property
    def coeffs(self) -> tuple:
        return self.field.decode(self.val)

    def _coerce(self, other) -> int:
        if isinstance(other, FieldElement):
            if other.field != self.field:
                raise FieldMismatch("operands from different fields")
            return other.val
        if isinstance(other, int):
            return self.field.element(other).val
        return NotImplemented

    def __add__(self, other):
        v = self._coerce(other)
        return FieldElement(self.field, self.field.add(self.val, v))

    __radd__ = __add__

    def __sub__(self, other):
        v = self._coerce(other)
        return FieldElement(self.field, self.field.sub(self.val, v))

    def __rsub__(self, other):
        v = self._coerce(other)
        return FieldElement(self.field, self.field.sub(v, self.val))

    def __mul__(self, other):
        v = self._coerce(other)
        return FieldElement(self.field, self.field.mul(self.val, v))

    __rmul__ = __mul__

    def __truediv__(self, other):
        v = self._coerce(other)
        return FieldElement(self.field, self.field.mul(self.val, self.field.inv(v)))

    def __neg__(self):
        return FieldElement(self.field, self.field.neg(self.val))

    def __pow__(self, e: int):
        if e < 0:
            return FieldElement(self.field, self.field._pow(self.field.inv(self.val), -e))
        return FieldElement(self.field, self.field._pow(self.val, e))

    def inverse(self):
        return FieldElement(self.field, self.field.inv(self.val))

    def conj(self):
        """Apply the field involution sigma."""
        return FieldElement(self.field, self.field.conj(self.val))

    def norm(self):
        """sigma(a) * a, landing in the fixed field."""
        return self.conj() * self

    def is_zero(self) -> bool:
        return self.val == 0

    def __bool__(self):
        return self.val != 0

    def __eq__(self, other):
        if isinstance(other, FieldElement):
            return self.field == other.field and self.val == other.val
        if isinstance(other, int):
            return self.val == self.field.element(other).val
        return NotImplemented

    def __hash__(self):
        return hash((self.field, self.val))

    def serialize(self) -> str:
        return ",".join(str(c) for c in self.coeffs)

    def __repr__(self):
        if self.field.r == 1:
            return str(self.val)
        return f"[{self.serialize()}]"


def parse_element(field: GF, text: str) -> FieldElement:
    return field.from_coeffs(int(c) for c in text.split(","))


# ---------------------------------------------------------------------------
# solvers for the norm equations behind the sign-flip isometries


@dataclass(frozen=True)
class PropertyWitness:
    """Witness that sigma(a)a = -1 (kind "A") or sigma(a)a + sigma(b)b = -1 (kind "B")."""

    kind: str  # "A" or "B"
    a: FieldElement
    b: FieldElement | None = None

    def check(self) -> bool:
        field = self.a.field
        minus_one = FieldElement(field, field.neg(field.one))
        if self.kind == "A":
            return self.a.norm() == minus_one
        return self.a.norm() + self.b.norm() == minus_one


def solve_minus_one(field: GF) -> PropertyWitness | None:
    """Exhaustive scan for a witness, preferring the single-element form."""
    minus_one = field.neg(field.one)
    for a in field.element_values():
        if field.mul(field.conj(a), a) == minus_one:
            return PropertyWitness("A", FieldElement(field, a))
    norms = [field.mul(field.conj(a), a) for a in field.element_values()]
    for a, na in enumerate(norms):
        for b, nb in enumerate(norms):
            if field.add(na, nb) == minus_one:
                return PropertyWitness("B", FieldElement(field, a), FieldElement(field, b))
    return None
