"""Exact dense linear algebra over GF(q): matrices, echelon forms, subspaces.

Vectors are tuples of encoded field values (see gf.py); a Subspace is stored
as its reduced row-echelon basis, which is unique, so subspaces can be hashed
and compared by value.
"""

from __future__ import annotations

import itertools
from functools import reduce

from .errors import AmbientMismatch, CapExceeded, FieldMismatch
from .gf import GF, FieldElement


def _coerce_val(field: GF, x) -> int:
    """Matrix entries: FieldElement, or a plain int taken as the encoded value.

    For prime fields the encoded value is the residue itself (reduced mod p
    here for convenience); for extension fields ints must already be encoded.
    """
    if isinstance(x, FieldElement):
        if x.field != field:
            raise FieldMismatch("entry from a different field")
        return x.val
    x = int(x)
    if field.r == 1:
        return x % field.p
    if not 0 <= x < field.q:
        raise ValueError(f"entry {x} is not an encoded value of {field}")
    return x


def all_vectors(field: GF, n: int):
    """All q^n coordinate vectors in lexicographic order."""
    return itertools.product(field.element_values(), repeat=n)


def gaussian_binomial(n: int, k: int, q: int) -> int:
    if k < 0 or k > n:
        return 0
    num = den = 1
    for i in range(k):
        num *= q ** (n - i) - 1
        den *= q ** (i + 1) - 1
    assert num % den == 0
    return num // den


class MatrixGF:
    """Immutable matrix over a GF, stored row-major as encoded ints."""

    __slots__ = ("field", "rows", "cols", "data")

    def __init__(self, field: GF, rows: int, cols: int, data):
        self.field = field
        self.rows = rows
        self.cols = cols
        self.data = tuple(data)
        assert len(self.data) == rows * cols

    @classmethod
    def from_rows(cls, field: GF, rows) -> "MatrixGF":
        rows = [list(r) for r in rows]
        r = len(rows)
        c = len(rows[0]) if rows else 0
        data = [_coerce_val(field, x) for row in rows for x in row]
        return cls(field, r, c, data)

    @classmethod
    def identity(cls, field: GF, n: int) -> "MatrixGF":
        one = field.one
        return cls(field, n, n, [one if i == j else 0 for i in range(n) for j in range(n)])

    @classmethod
    def zero(cls, field: GF, rows: int, cols: int) -> "MatrixGF":
        return cls(field, rows, cols, [0] * (rows * cols))

    def __getitem__(self, ij):
        i, j = ij
        return self.data[i * self.cols + j]

    def row(self, i) -> tuple:
        return self.data[i * self.cols : (i + 1) * self.cols]

    def col(self, j) -> tuple:
        return self.data[j :: self.cols]

    def row_list(self):
        return [list(self.row(i)) for i in range(self.rows)]

    def __mul__(self, other: "MatrixGF") -> "MatrixGF":
        if self.field != other.field:
            raise FieldMismatch("matrix product over different fields")
        if self.cols != other.rows:
            raise ValueError("inner dimensions do not match")
        f = self.field
        add, mul = f.add, f.mul
        n, m, k = self.rows, other.cols, self.cols
        a, b = self.data, other.data
        out = []
        for i in range(n):
            arow = a[i * k : (i + 1) * k]
            for j in range(m):
                acc = 0
                for t in range(k):
                    x = arow[t]
                    if x:
                        acc = add(acc, mul(x, b[t * m + j]))
                out.append(acc)
        return MatrixGF(f, n, m, out)

    def __add__(self, other: "MatrixGF") -> "MatrixGF":
        add = self.field.add
        return MatrixGF(self.field, self.rows, self.cols,
                        [add(x, y) for x, y in zip(self.data, other.data)])

    def __sub__(self, other: "MatrixGF") -> "MatrixGF":
        f = self.field
        return MatrixGF(f, self.rows, self.cols,
                        [f.sub(x, y) for x, y in zip(self.data, other.data)])

    def __neg__(self) -> "MatrixGF":
        neg = self.field.neg
        return MatrixGF(self.field, self.rows, self.cols, [neg(x) for x in self.data])

    def scale(self, c) -> "MatrixGF":
        c = _coerce_val(self.field, c)
        mul = self.field.mul
        return MatrixGF(self.field, self.rows, self.cols, [mul(c, x) for x in self.data])

    def transpose(self) -> "MatrixGF":
        data = [self.data[i * self.cols + j] for j in range(self.cols) for i in range(self.rows)]
        return MatrixGF(self.field, self.cols, self.rows, data)

    def conj(self) -> "MatrixGF":
        """Entrywise field involution."""
        c = self.field.conj
        return MatrixGF(self.field, self.rows, self.cols, [c(x) for x in self.data])

    def conj_transpose(self) -> "MatrixGF":
        return self.conj().transpose()

    def apply(self, v) -> tuple:
        """Matrix times column vector."""
        f = self.field
        add, mul = f.add, f.mul
        out = []
        for i in range(self.rows):
            acc = 0
            row = self.data[i * self.cols : (i + 1) * self.cols]
            for x, y in zip(row, v):
                if x and y:
                    acc = add(acc, mul(x, y))
            out.append(acc)
        return tuple(out)

    def rref(self) -> "MatrixGF":
        rows, _ = rref_rows(self.field, self.row_list())
        data = [x for r in rows for x in r]
        return MatrixGF(self.field, self.rows, self.cols, data)

    def rank(self) -> int:
        _, pivots = rref_rows(self.field, self.row_list())
        return len(pivots)

    def is_invertible(self) -> bool:
        return self.rows == self.cols and self.rank() == self.rows

    def inverse(self) -> "MatrixGF":
        if self.rows != self.cols:
            raise ValueError("inverse of a non-square matrix")
        f = self.field
        n = self.rows
        aug = [list(self.row(i)) + [f.one if i == j else 0 for j in range(n)] for i in range(n)]
        rows, pivots = rref_rows(f, aug)
        if pivots != list(range(n)):
            raise ValueError("matrix is singular")
        return MatrixGF(f, n, n, [x for r in rows for x in r[n:]])

    def right_kernel(self) -> list:
        """Basis (list of vectors) of {x : Mx = 0}, echelonized."""
        f = self.field
        rows, pivots = rref_rows(f, self.row_list())
        n = self.cols
        free = [j for j in range(n) if j not in pivots]
        basis = []
        for j in free:
            v = [0] * n
            v[j] = f.one
            for i, pj in enumerate(pivots):
                v[pj] = f.neg(rows[i][j])
            basis.append(tuple(v))
        return basis

    def solve(self, b) -> tuple | None:
        """One solution x of Mx = b, or None if inconsistent."""
        f = self.field
        aug = [list(self.row(i)) + [b[i]] for i in range(self.rows)]
        rows, pivots = rref_rows(f, aug)
        if self.cols in pivots:
            return None
        x = [0] * self.cols
        for i, pj in enumerate(pivots):
            x[pj] = rows[i][self.cols]
        return tuple(x)

    def serialize(self):
        e = self.field
        return [[FieldElement(e, x).serialize() for x in self.row(i)] for i in range(self.rows)]

    def __eq__(self, other):
        return (
            isinstance(other, MatrixGF)
            and self.field == other.field
            and (self.rows, self.cols, self.data) == (other.rows, other.cols, other.data)
        )

    def __hash__(self):
        return hash((self.rows, self.cols, self.data))

    def __repr__(self):
        body = "; ".join(" ".join(str(x) for x in self.row(i)) for i in range(self.rows))
        return f"MatrixGF({self.rows}x{self.cols} over {self.field}: {body})"


def rref_rows(field: GF, rows: list) -> tuple:
    """In-place reduced row echelon form; returns (rows, pivot column list)."""
    add, mul, neg, inv = field.add, field.mul, field.neg, field.inv
    m = len(rows)
    n = len(rows[0]) if m else 0
    pivots = []
    pr = 0
    for j in range(n):
        pivot = None
        for i in range(pr, m):
            if rows[i][j]:
                pivot = i
                break
        if pivot is None:
            continue
        rows[pr], rows[pivot] = rows[pivot], rows[pr]
        c = inv(rows[pr][j])
        if c != field.one:
            rows[pr] = [mul(c, x) for x in rows[pr]]
        for i in range(m):
            if i != pr and rows[i][j]:
                factor = neg(rows[i][j])
                ri, rp = rows[i], rows[pr]
                rows[i] = [add(x, mul(factor, y)) for x, y in zip(ri, rp)]
        pivots.append(j)
        pr += 1
        if pr == m:
            break
    return rows, pivots


def block_diag(*mats: MatrixGF) -> MatrixGF:
    field = mats[0].field
    rows = sum(m.rows for m in mats)
    cols = sum(m.cols for m in mats)
    data = [[0] * cols for _ in range(rows)]
    r0 = c0 = 0
    for m in mats:
        for i in range(m.rows):
            data[r0 + i][c0 : c0 + m.cols] = m.row(i)
        r0 += m.rows
        c0 += m.cols
    return MatrixGF(field, rows, cols, [x for row in data for x in row])


def stack_rows(*mats: MatrixGF) -> MatrixGF:
    field = mats[0].field
    cols = mats[0].cols
    data = []
    for m in mats:
        assert m.cols == cols
        data.extend(m.data)
    return MatrixGF(field, sum(m.rows for m in mats), cols, data)


class Subspace:
    """Subspace of F^n held as its unique reduced echelon basis."""

    __slots__ = ("field", "ambient_dim", "basis", "pivots")

    def __init__(self, field: GF, ambient_dim: int, basis, pivots):
        self.field = field
        self.ambient_dim = ambient_dim
        self.basis = tuple(tuple(r) for r in basis)
        self.pivots = tuple(pivots)

    @classmethod
    def from_vectors(cls, field: GF, ambient_dim: int, vectors) -> "Subspace":
        vecs = [list(v) for v in vectors]
        for v in vecs:
            if len(v) != ambient_dim:
                raise AmbientMismatch("vector length differs from ambient dimension")
        if not vecs:
            return cls(field, ambient_dim, (), ())
        rows, pivots = rref_rows(field, vecs)
        return cls(field, ambient_dim, rows[: len(pivots)], pivots)

    @classmethod
    def from_matrix(cls, mat: MatrixGF) -> "Subspace":
        return cls.from_vectors(mat.field, mat.cols, mat.row_list())

    @classmethod
    def zero(cls, field: GF, ambient_dim: int) -> "Subspace":
        return cls(field, ambient_dim, (), ())

    @classmethod
    def full(cls, field: GF, ambient_dim: int) -> "Subspace":
        eye = MatrixGF.identity(field, ambient_dim)
        return cls(field, ambient_dim, eye.row_list(), range(ambient_dim))

    @classmethod
    def span_of(cls, field: GF, *vectors) -> "Subspace":
        vectors = [tuple(v) for v in vectors]
        return cls.from_vectors(field, len(vectors[0]), vectors)

    @property
    def dim(self) -> int:
        return len(self.basis)

    def matrix(self) -> MatrixGF:
        return MatrixGF(self.field, self.dim, self.ambient_dim,
                        [x for r in self.basis for x in r])

    def _check_compatible(self, other: "Subspace"):
        if self.field != other.field or self.ambient_dim != other.ambient_dim:
            raise AmbientMismatch("subspaces of different ambient spaces")

    def reduce_vector(self, v) -> tuple:
        """Residue of v after eliminating this subspace's pivot coordinates."""
        f = self.field
        v = list(v)
        for row, pj in zip(self.basis, self.pivots):
            c = v[pj]
            if c:
                c = f.neg(c)
                v = [f.add(x, f.mul(c, y)) for x, y in zip(v, row)]
        return tuple(v)

    def contains_vector(self, v) -> bool:
        return not any(self.reduce_vector(v))

    def __le__(self, other: "Subspace") -> bool:
        self._check_compatible(other)
        return all(other.contains_vector(b) for b in self.basis)

    def __lt__(self, other: "Subspace") -> bool:
        return self.dim < other.dim and self <= other

    def contains(self, other: "Subspace") -> bool:
        return other <= self

    def __add__(self, other: "Subspace") -> "Subspace":
        self._check_compatible(other)
        return Subspace.from_vectors(self.field, self.ambient_dim,
                                     list(self.basis) + list(other.basis))

    def __and__(self, other: "Subspace") -> "Subspace":
        """Intersection, via the kernel of the concatenated system."""
        self._check_compatible(other)
        f = self.field
        if self.dim == 0 or other.dim == 0:
            return Subspace.zero(f, self.ambient_dim)
        # columns of M are the basis vectors of self and -(basis of other)
        a, b = self.dim, other.dim
        n = self.ambient_dim
        data = []
        for i in range(n):
            data.extend([self.basis[t][i] for t in range(a)])
            data.extend([f.neg(other.basis[t][i]) for t in range(b)])
        m = MatrixGF(f, n, a + b, data)
        vecs = []
        for x in m.right_kernel():
            add, mul = f.add, f.mul
            v = [0] * n
            for t in range(a):
                if x[t]:
                    v = [add(vi, mul(x[t], bi)) for vi, bi in zip(v, self.basis[t])]
            vecs.append(tuple(v))
        return Subspace.from_vectors(f, n, vecs)

    def vectors(self):
        """All q^dim vectors of the subspace, in lexicographic coefficient order."""
        f = self.field
        add, mul = f.add, f.mul
        for coeffs in all_vectors(f, self.dim):
            v = [0] * self.ambient_dim
            for c, row in zip(coeffs, self.basis):
                if c:
                    v = [add(x, mul(c, y)) for x, y in zip(v, row)]
            yield tuple(v)

    def nonzero_vectors(self):
        it = self.vectors()
        next(it)
        return it

    def apply(self, g: MatrixGF) -> "Subspace":
        """Image subspace g . W (vectors mapped as columns), re-canonicalized."""
        return Subspace.from_vectors(self.field, g.rows,
                                     [g.apply(b) for b in self.basis])

    def coordinates_of(self, v) -> tuple | None:
        """Coefficients of v in this basis, or None if v is outside."""
        return self.matrix().transpose().solve(tuple(v))

    def annihilator(self) -> "Subspace":
        """Functionals vanishing on this subspace, as row vectors of F^n."""
        if self.dim == 0:
            return Subspace.full(self.field, self.ambient_dim)
        return Subspace.from_vectors(self.field, self.ambient_dim,
                                     self.matrix().right_kernel())

    def complement(self) -> "Subspace":
        """The coordinate complement spanned by non-pivot unit vectors."""
        f = self.field
        free = [j for j in range(self.ambient_dim) if j not in self.pivots]
        eye = MatrixGF.identity(f, self.ambient_dim)
        return Subspace.from_vectors(f, self.ambient_dim, [eye.row(j) for j in free])

    def serialize(self):
        return self.matrix().serialize()

    def __eq__(self, other):
        return (
            isinstance(other, Subspace)
            and self.field == other.field
            and self.ambient_dim == other.ambient_dim
            and self.basis == other.basis
        )

    def __hash__(self):
        return hash((self.ambient_dim, self.basis))

    def __repr__(self):
        return f"Subspace(dim {self.dim} of F^{self.ambient_dim}; basis {self.basis})"


def subspace_lattice(a: Subspace, b: Subspace, op: str):
    if op == "sum":
        return a + b
    if op == "intersect":
        return a & b
    if op == "contains":
        return b <= a
    raise ValueError(f"unknown lattice operation {op!r}")


def quotient_coordinates(z: Subspace) -> tuple:
    """Projection F^n -> F^m with kernel exactly Z, plus a right inverse.

    The projection reads off the non-pivot coordinates after reducing by Z;
    the section sends them back to the coordinate complement of Z.
    """
    f = z.field
    n = z.ambient_dim
    free = [j for j in range(n) if j not in z.pivots]
    m = len(free)
    eye = MatrixGF.identity(f, n)
    proj_rows = []
    for j in range(n):
        reduced = z.reduce_vector(eye.row(j))
        proj_rows.append([reduced[t] for t in free])
    proj = MatrixGF(f, n, m, [x for r in proj_rows for x in r]).transpose()
    sect = MatrixGF(f, m, n, [x for j in free for x in eye.row(j)]).transpose()
    return proj, sect


def enumerate_subspaces(field: GF, n: int, k: int, cap: int = 200_000) -> list:
    """All k-dimensional subspaces of F^n, sorted by echelon basis matrix."""
    if not 0 <= k <= n:
        raise ValueError("need 0 <= k <= n")
    count = gaussian_binomial(n, k, field.q)
    if count > cap:
        raise CapExceeded(f"{count} subspaces of dim {k} in F^{n} exceeds cap {cap}")
    if k == 0:
        return [Subspace.zero(field, n)]
    out = []
    one = field.one
    for pivots in itertools.combinations(range(n), k):
        free_positions = [
            (i, j)
            for i in range(k)
            for j in range(pivots[i] + 1, n)
            if j not in pivots
        ]
        for vals in itertools.product(field.element_values(), repeat=len(free_positions)):
            rows = [[0] * n for _ in range(k)]
            for i in range(k):
                rows[i][pivots[i]] = one
            for (i, j), v in zip(free_positions, vals):
                rows[i][j] = v
            out.append(Subspace(field, n, rows, pivots))
    assert len(out) == count
    out.sort(key=lambda s: s.basis)
    return out


def all_subspaces(field: GF, n: int, cap: int = 200_000) -> list:
    return list(
        itertools.chain.from_iterable(
            enumerate_subspaces(field, n, k, cap) for k in range(n + 1)
        )
    )


def intersect_all(spaces) -> Subspace:
    return reduce(lambda a, b: a & b, spaces)
