"""Formed spaces over GF(q): quadratic/hermitian/alternating forms modulo X.

A form on F^n is a sesquilinear form q(v, w) = sigma(v)^T M w taken modulo
the subgroup X of sesquilinear forms f with f(v,v) in Lambda and
f(w,v) = -eps * sigma(f(v,w)).  Derived data:

    Omega = M + eps * sigma(M)^T          (the eps-skew sesquilinear form)
    Q(v)  = q(v,v) reduced mod Lambda     (the quadratic refinement)

Both are invariants of the class of M.  All operations work for degenerate
spaces; only the ones that say so require a trivial kernel.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

from .errors import (
    BadAlpha,
    BadZ0,
    CapExceeded,
    Degenerate,
    FieldMismatch,
    NotIsotropic,
    ParameterMismatch,
    RadicalNotSubspace,
    WitnessMismatch,
)
from .gf import GF, FieldElement, PropertyWitness, gf
from .linalg import MatrixGF, Subspace, block_diag, rref_rows, stack_rows


class LambdaSpace:
    """An F_p-subspace of F = GF(p^r), with canonical reduction mod itself."""

    __slots__ = ("field", "basis_vals", "_pivots", "_prime_basis", "_reduce_table")

    def __init__(self, field: GF, generator_vals):
        self.field = field
        p = field.p
        fp = gf(p)
        rows = [list(field.decode(v)) for v in generator_vals]
        if rows:
            rows, pivots = rref_rows(fp, rows)
            rows = rows[: len(pivots)]
        else:
            pivots = []
        self._prime_basis = tuple(tuple(r) for r in rows)
        self._pivots = tuple(pivots)
        self.basis_vals = tuple(field.encode(r) for r in rows)
        self._reduce_table = tuple(self._reduce(v) for v in range(field.q))

    def _reduce(self, val: int) -> int:
        p = self.field.p
        coeffs = list(self.field.decode(val))
        for row, pj in zip(self._prime_basis, self._pivots):
            c = coeffs[pj]
            if c:
                coeffs = [(x - c * y) % p for x, y in zip(coeffs, row)]
        return self.field.encode(coeffs)

    def reduce(self, val: int) -> int:
        return self._reduce_table[val]

    def contains(self, val: int) -> bool:
        return self._reduce_table[val] == 0

    @property
    def dim_over_prime(self) -> int:
        return len(self.basis_vals)

    def values(self):
        """All elements of Lambda (F_p-span of the basis)."""
        out = {0}
        for b in self.basis_vals:
            new = set()
            for x in out:
                acc = x
                for _ in range(self.field.p - 1):
                    acc = self.field.add(acc, b)
                    new.add(acc)
            out |= new
        return sorted(out)

    def __eq__(self, other):
        return (
            isinstance(other, LambdaSpace)
            and self.field == other.field
            and self.basis_vals == other.basis_vals
        )

    def __le__(self, other: "LambdaSpace") -> bool:
        return all(other.contains(v) for v in self.basis_vals)

    def __hash__(self):
        return hash((self.field, self.basis_vals))

    def __repr__(self):
        return f"LambdaSpace({[FieldElement(self.field, v) for v in self.basis_vals]})"


def lambda_min(field: GF, eps_val: int) -> LambdaSpace:
    """The image of a -> a - eps*sigma(a)."""
    gens = [field.sub(a, field.mul(eps_val, field.conj(a))) for a in field.element_values()]
    return LambdaSpace(field, gens)


def lambda_max(field: GF, eps_val: int) -> LambdaSpace:
    """The kernel of a -> a + eps*sigma(a), as an F_p-subspace."""
    fp = gf(field.p)
    cols = []
    for i in range(field.r):
        basis_elt = field.encode(tuple(1 if j == i else 0 for j in range(field.r)))
        img = field.add(basis_elt, field.mul(eps_val, field.conj(basis_elt)))
        cols.append(field.decode(img))
    mat = MatrixGF.from_rows(fp, cols).transpose()
    kernel = mat.right_kernel()
    return LambdaSpace(field, [field.encode(v) for v in kernel])


class FormParameters:
    """The triple (sigma, eps, Lambda); sigma is carried by the field."""

    __slots__ = ("field", "eps", "lam", "name")

    def __init__(self, field: GF, epsilon, lam, name: str = "custom", validate: bool = True):
        self.field = field
        self.eps = epsilon.val if isinstance(epsilon, FieldElement) else field.element(epsilon).val
        if isinstance(lam, LambdaSpace):
            self.lam = lam
        else:
            self.lam = LambdaSpace(field, [_lam_val(field, x) for x in lam])
        self.name = name
        if validate:
            self._validate()

    def _validate(self):
        f = self.field
        if f.mul(self.eps, f.conj(self.eps)) != f.one:
            raise ParameterMismatch("epsilon * sigma(epsilon) must be 1")
        lmin = lambda_min(f, self.eps)
        lmax = lambda_max(f, self.eps)
        if not (lmin <= self.lam and self.lam <= lmax):
            raise ParameterMismatch("Lambda must sit between Lambda_min and Lambda_max")
        if f.q <= 512:
            for c in f.element_values():
                sc = f.conj(c)
                for b in self.lam.basis_vals:
                    if not self.lam.contains(f.mul(f.mul(sc, b), c)):
                        raise ParameterMismatch("Lambda is not stable under a -> sigma(c) a c")

    @property
    def epsilon(self) -> FieldElement:
        return FieldElement(self.field, self.eps)

    def lambda_min(self) -> LambdaSpace:
        return lambda_min(self.field, self.eps)

    def lambda_max(self) -> LambdaSpace:
        return lambda_max(self.field, self.eps)

    def __eq__(self, other):
        return (
            isinstance(other, FormParameters)
            and self.field == other.field
            and self.eps == other.eps
            and self.lam == other.lam
        )

    def __hash__(self):
        return hash((self.field, self.eps, self.lam))

    def __repr__(self):
        return f"FormParameters({self.name}, eps={self.epsilon!r}, dim_p(Lambda)={self.lam.dim_over_prime})"

    def serialize(self):
        return {
            "field": self.field.literal(),
            "epsilon": self.epsilon.serialize(),
            "lambda_basis": [FieldElement(self.field, v).serialize() for v in self.lam.basis_vals],
            "name": self.name,
        }


def _lam_val(field: GF, x) -> int:
    if isinstance(x, FieldElement):
        return x.val
    return field.element(x).val


def classical_parameters(field: GF, preset: str) -> FormParameters:
    """The standard symplectic / unitary / orthogonal parameter triples.

    For the unitary preset, Lambda is the forced subgroup Lambda_min
    (= Lambda_max); over a field of characteristic 2 this is the fixed
    field of sigma.
    """
    if preset == "symplectic":
        if field.has_involution:
            raise ParameterMismatch("symplectic preset needs the identity involution")
        eps = field.neg(field.one)
        lam = LambdaSpace(field, list(field.element_values()))
        return FormParameters(field, FieldElement(field, eps), lam, name="symplectic")
    if preset == "orthogonal":
        if field.has_involution:
            raise ParameterMismatch("orthogonal preset needs the identity involution")
        return FormParameters(field, FieldElement(field, field.one), LambdaSpace(field, []),
                              name="orthogonal")
    if preset == "unitary":
        if not field.has_involution:
            raise ParameterMismatch("unitary preset needs a nontrivial involution")
        eps = FieldElement(field, field.one)
        return FormParameters(field, eps, lambda_min(field, field.one), name="unitary")
    raise ValueError(f"unknown preset {preset!r}")


@dataclass(frozen=True)
class FormValue:
    """An element of F/Lambda, held by its canonical reduced representative."""

    params: FormParameters
    rep: int

    def is_zero(self) -> bool:
        return self.rep == 0

    def element(self) -> FieldElement:
        return FieldElement(self.params.field, self.rep)

    def __repr__(self):
        return f"[{self.element()!r} mod Lambda]"


class FormedSpace:
    """F^n carrying a form class, represented by one Gram matrix."""

    def __init__(self, params: FormParameters, gram: MatrixGF):
        if gram.rows != gram.cols:
            raise ValueError("Gram matrix must be square")
        if gram.field != params.field:
            raise FieldMismatch("Gram matrix over the wrong field")
        self.params = params
        self.field = params.field
        self.n = gram.rows
        self.gram = gram

    @cached_property
    def omega_matrix(self) -> MatrixGF:
        eps = self.params.eps
        return self.gram + self.gram.conj_transpose().scale(eps)

    # -- evaluation ---------------------------------------------------------

    def q_value(self, v, w) -> FieldElement:
        v, w = _vec(self, v), _vec(self, w)
        return FieldElement(self.field, self.field.dot_sigma(v, self.gram.apply(w)))

    def omega_value(self, v, w) -> FieldElement:
        v, w = _vec(self, v), _vec(self, w)
        return FieldElement(self.field, self.field.dot_sigma(v, self.omega_matrix.apply(w)))

    def Q_value(self, v) -> FormValue:
        v = _vec(self, v)
        raw = self.field.dot_sigma(v, self.gram.apply(v))
        return FormValue(self.params, self.params.lam.reduce(raw))

    # -- kernel, radical, complements ----------------------------------------

    def kernel(self) -> Subspace:
        return Subspace.from_vectors(self.field, self.n, self.omega_matrix.right_kernel())

    def is_nondegenerate(self) -> bool:
        return self.kernel().dim == 0

    def radical(self) -> Subspace:
        """Vectors of the kernel where Q also vanishes.

        In odd characteristic this is the kernel itself; in characteristic 2
        it is the kernel of the additive map Q restricted to the kernel,
        computed F_2-linearly and then certified to be F-stable.
        """
        k = self.kernel()
        if self.field.p != 2:
            return k
        f = self.field
        f2 = gf(2)
        lam = self.params.lam
        free = [j for j in range(f.r) if j not in lam._pivots]
        if not free or k.dim == 0:
            return k  # F/Lambda = 0: Q vanishes identically on the kernel
        gens = []  # F_2-basis of K given by t^j * (basis of K over F)
        cols = []
        for kb in k.basis:
            for j in range(f.r):
                c = f.encode(tuple(1 if i == j else 0 for i in range(f.r)))
                vec = tuple(f.mul(c, x) for x in kb)
                gens.append(vec)
                qv = lam.reduce(f.dot_sigma(vec, self.gram.apply(vec)))
                cols.append([f.decode(qv)[t] for t in free])
        mat = MatrixGF.from_rows(f2, cols).transpose()
        kernel2 = mat.right_kernel()
        vecs = []
        for x in kernel2:
            v = tuple(0 for _ in range(self.n))
            for c, g in zip(x, gens):
                if c:
                    v = tuple(f.add(a, b) for a, b in zip(v, g))
            vecs.append(v)
        rad = Subspace.from_vectors(f, self.n, vecs)
        if len(kernel2) != f.r * rad.dim:
            raise RadicalNotSubspace("F_2-kernel of Q on the kernel is not F-stable")
        for b in rad.basis:
            if not (k.contains_vector(b) and self.Q_value(b).is_zero()):
                raise RadicalNotSubspace("radical candidate is not isotropic")
        return rad

    def perp(self, a: Subspace) -> Subspace:
        """Orthogonal complement {v : omega(v, a) = 0 for all a in A}."""
        conj = self.field.conj
        rows = [[conj(x) for x in self.omega_matrix.apply(b)] for b in a.basis]
        if not rows:
            return Subspace.full(self.field, self.n)
        m = MatrixGF.from_rows(self.field, rows)
        return Subspace.from_vectors(self.field, self.n, m.right_kernel())

    # -- isotropy and genus ---------------------------------------------------

    def is_isotropic_vector(self, v) -> bool:
        return self.Q_value(v).is_zero()

    def is_isotropic(self, u: Subspace) -> bool:
        """q vanishes on U: omega vanishes on a basis and Q on basis vectors.

        With Lambda stable under a -> sigma(c) a c, vanishing on a basis
        forces Q = 0 on all of U, via Q(v+w) - Q(v) - Q(w) = omega(v,w).
        """
        for i, b in enumerate(u.basis):
            if not self.Q_value(b).is_zero():
                return False
            for c in u.basis[i:]:
                if self.omega_value(b, c):
                    return False
        return True

    def genus(self, cap: int = 1_000_000) -> tuple:
        """(genus, witness maximal isotropic subspace), by greedy extension."""
        u = self.radical()
        rad_dim = u.dim
        while True:
            p = self.perp(u)
            if self.field.q ** p.dim > cap:
                raise CapExceeded(f"genus scan over {self.field.q}^{p.dim} vectors exceeds cap")
            found = None
            for v in p.nonzero_vectors():
                if not u.contains_vector(v) and self.Q_value(v).is_zero():
                    found = v
                    break
            if found is None:
                return u.dim - rad_dim, u
            u = u + Subspace.span_of(self.field, found)

    # -- derived spaces --------------------------------------------------------

    def restrict(self, w) -> "FormedSpace":
        """The restricted formed space on the rows of w (Subspace or matrix)."""
        b = w.matrix() if isinstance(w, Subspace) else w
        gram = b.conj() * self.gram * b.transpose()
        return FormedSpace(self.params, gram)

    def negate(self) -> "FormedSpace":
        return FormedSpace(self.params, -self.gram)

    def serialize(self):
        out = self.params.serialize()
        out["gram"] = self.gram.serialize()
        return out

    def __eq__(self, other):
        """Strict representative equality; use forms_equal for equality mod X."""
        return (
            isinstance(other, FormedSpace)
            and self.params == other.params
            and self.gram == other.gram
        )

    def __hash__(self):
        return hash((self.params, self.gram))

    def __repr__(self):
        return f"FormedSpace(dim {self.n}, {self.params.name} over {self.field})"


def _vec(space: FormedSpace, v) -> tuple:
    v = tuple(x.val if isinstance(x, FieldElement) else x for x in v)
    if len(v) != space.n:
        raise ValueError("vector length differs from the space dimension")
    return v


# -- membership in X and form equality ---------------------------------------


def in_X(d: MatrixGF, params: FormParameters) -> bool:
    """Whether sigma(v)^T D w lies in the subgroup X(E, sigma, eps, Lambda).

    This holds iff D = -eps * sigma(D)^T and every diagonal entry lies in
    Lambda; off-diagonal contributions to f(v,v) then land in Lambda_min.
    """
    if d.rows != d.cols:
        raise ValueError("in_X needs a square matrix")
    f = params.field
    skew = d.conj_transpose().scale(params.eps)
    for i in range(d.rows):
        for j in range(d.cols):
            if d[i, j] != f.neg(skew[i, j]):
                return False
    return all(params.lam.contains(d[i, i]) for i in range(d.rows))


def forms_equal(e1: FormedSpace, e2: FormedSpace) -> bool:
    if e1.params != e2.params or e1.n != e2.n:
        raise ParameterMismatch("forms live over different parameters or dimensions")
    return in_X(e1.gram - e2.gram, e1.params)


# -- isometries ---------------------------------------------------------------


@dataclass(frozen=True)
class Isometry:
    """A linear map source -> target intended to preserve the forms."""

    source: FormedSpace
    target: FormedSpace
    matrix: MatrixGF

    def is_isometry(self) -> bool:
        f = self.matrix
        if f.rows != self.target.n or f.cols != self.source.n:
            return False
        pulled = f.conj_transpose() * self.target.gram * f
        return in_X(pulled - self.source.gram, self.source.params)

    def is_bijective(self) -> bool:
        return self.matrix.rows == self.matrix.cols and self.matrix.is_invertible()

    def apply(self, v) -> tuple:
        return self.matrix.apply(_vec(self.source, v))

    def compose(self, other: "Isometry") -> "Isometry":
        """self after other (other's target must be self's source)."""
        return Isometry(other.source, self.target, self.matrix * other.matrix)

    def inverse(self) -> "Isometry":
        return Isometry(self.target, self.source, self.matrix.inverse())


def is_isometry(f: Isometry) -> bool:
    return f.is_isometry()


# -- standard spaces -----------------------------------------------------------


def hyperbolic_space(params: FormParameters, n: int = 1) -> FormedSpace:
    """H^(+n): orthogonal sum of n hyperbolic planes with Gram [[0,1],[0,0]]."""
    f = params.field
    blocks = [MatrixGF.from_rows(f, [[0, 1], [0, 0]]) for _ in range(n)]
    gram = block_diag(*blocks) if blocks else MatrixGF.zero(f, 0, 0)
    return FormedSpace(params, gram)


def euclidean_space(params: FormParameters, n: int = 1) -> FormedSpace:
    """The form with an orthonormal basis: identity Gram matrix."""
    return FormedSpace(params, MatrixGF.identity(params.field, n))


def zero_space(params: FormParameters, n: int) -> FormedSpace:
    return FormedSpace(params, MatrixGF.zero(params.field, n, n))


def standard_space(kind: str, n: int, params: FormParameters) -> FormedSpace:
    if kind == "hyperbolic":
        return hyperbolic_space(params, n)
    if kind == "euclidean":
        return euclidean_space(params, n)
    if kind == "zero":
        return zero_space(params, n)
    raise ValueError(f"unknown standard space {kind!r}")


def direct_sum(*spaces: FormedSpace) -> FormedSpace:
    params = spaces[0].params
    for e in spaces[1:]:
        if e.params != params:
            raise ParameterMismatch("direct sum needs matching form parameters")
    return FormedSpace(params, block_diag(*[e.gram for e in spaces]))


def embed_vector(spaces, index: int, v) -> tuple:
    """Include a vector of spaces[index] into the direct sum coordinates."""
    pre = sum(e.n for e in spaces[:index])
    post = sum(e.n for e in spaces[index + 1 :])
    return (0,) * pre + tuple(v) + (0,) * post


# -- basis extension helper ------------------------------------------------------


def extend_basis(inner: Subspace, outer: Subspace) -> Subspace:
    """A complement of inner in outer, grown greedily from outer's basis."""
    f = inner.field
    current = inner
    picked = []
    for b in outer.basis:
        if not current.contains_vector(b):
            picked.append(b)
            current = current + Subspace.span_of(f, b)
    return Subspace.from_vectors(f, inner.ambient_dim, picked)


# -- quotients by isotropic subspaces ---------------------------------------------


class QuotientForm:
    """The induced form on Z^perp / Z for an isotropic Z."""

    def __init__(self, ambient, z, perp, restriction, space, projection, section):
        self.ambient = ambient
        self.z = z
        self.perp = perp                  # Z^perp inside the ambient space
        self.restriction = restriction    # form restricted to Z^perp, perp-basis coords
        self.space = space                # the quotient formed space on F^m
        self.projection = projection      # Isometry: restriction -> space
        self.section = section            # right inverse of the projection matrix

    def project_vector(self, v) -> tuple:
        """Image in quotient coordinates of a vector of Z^perp."""
        coords = self.perp.coordinates_of(v)
        if coords is None:
            raise ValueError("vector is not in Z^perp")
        return self.projection.matrix.apply(coords)

    def project_subspace(self, w: Subspace) -> Subspace:
        return Subspace.from_vectors(self.space.field, self.space.n,
                                     [self.project_vector(b) for b in w.basis])

    def lift_vector(self, y) -> tuple:
        """A preimage in Z^perp (ambient coordinates) of a quotient vector."""
        coords = self.section.apply(tuple(y))
        f = self.ambient.field
        v = [0] * self.ambient.n
        for c, row in zip(coords, self.perp.basis):
            if c:
                v = [f.add(x, f.mul(c, yv)) for x, yv in zip(v, row)]
        return tuple(v)

    def lift_subspace(self, w: Subspace) -> Subspace:
        """Full preimage of a quotient subspace (contains Z)."""
        vecs = [self.lift_vector(b) for b in w.basis] + list(self.z.basis)
        return Subspace.from_vectors(self.ambient.field, self.ambient.n, vecs)


def induced_quotient_form(e: FormedSpace, z: Subspace) -> QuotientForm:
    """The unique form on Z^perp/Z making the projection an isometry."""
    from .linalg import quotient_coordinates

    if not e.is_isotropic(z):
        raise NotIsotropic("quotient needs an isotropic subspace")
    perp = e.perp(z)
    restriction = e.restrict(perp)
    z_in_perp = Subspace.from_vectors(
        e.field, perp.dim, [perp.coordinates_of(b) for b in z.basis]
    )
    proj, sect = quotient_coordinates(z_in_perp)
    gram = sect.conj_transpose() * restriction.gram * sect
    space = FormedSpace(e.params, gram)
    iso = Isometry(restriction, space, proj)
    assert iso.is_isometry(), "projection failed to be an isometry"
    return QuotientForm(e, z, perp, restriction, space, iso, sect)


# -- isotropic complements (constructive) -------------------------------------------


def isotropic_complement(e: FormedSpace, u: Subspace, z0: Subspace | None = None) -> Subspace:
    """An isotropic Z with E = U^perp + Z (direct), containing z0 if given.

    Follows the dual-basis construction: pick any linear complement C of
    U^perp containing z0, with basis x_1..x_m starting with z0's; find w_j
    in U with omega(x_i, w_j) = delta_ij; then correct

        y_j = x_j - c_j w_j - sum_{k<j} omega(x_k, x_j) w_k,

    where Q(x_j) = [c_j], and take Z spanned by the y_j.
    """
    f = e.field
    if not e.is_isotropic(u):
        raise NotIsotropic("U must be isotropic")
    uperp = e.perp(u)
    if z0 is not None:
        if not e.is_isotropic(z0):
            raise BadZ0("z0 must be isotropic")
        if (z0 & uperp).dim != 0:
            raise BadZ0("z0 must intersect U^perp trivially")
    rad = e.radical()
    u_eff = extend_basis(rad & u, u)
    m = e.n - uperp.dim
    assert u_eff.dim == m, "effective part of U should match codim of U^perp"
    # complement C of U^perp containing z0
    xs = list(z0.basis) if z0 is not None else []
    span = uperp + Subspace.from_vectors(f, e.n, xs) if xs else uperp
    eye = MatrixGF.identity(f, e.n)
    for j in range(e.n):
        if len(xs) == m:
            break
        cand = eye.row(j)
        if not span.contains_vector(cand):
            xs.append(cand)
            span = span + Subspace.span_of(f, cand)
    assert len(xs) == m
    if m == 0:
        return Subspace.zero(f, e.n)
    # dual family w_j in u_eff with omega(x_i, w_j) = delta_ij
    gmat = MatrixGF.from_rows(
        f, [[e.omega_value(x, ub).val for ub in u_eff.basis] for x in xs]
    )
    ginv = gmat.inverse()
    ws = []
    for j in range(m):
        coeffs = ginv.col(j)
        v = [0] * e.n
        for c, ub in zip(coeffs, u_eff.basis):
            if c:
                v = [f.add(a, f.mul(c, b)) for a, b in zip(v, ub)]
        ws.append(tuple(v))
    ys = []
    for j in range(m):
        y = list(xs[j])
        cj = e.Q_value(xs[j]).rep
        corrections = [(cj, ws[j])]
        for k in range(j):
            corrections.append((e.omega_value(xs[k], xs[j]).val, ws[k]))
        for c, w in corrections:
            if c:
                c = f.neg(c)
                y = [f.add(a, f.mul(c, b)) for a, b in zip(y, w)]
        ys.append(tuple(y))
    z = Subspace.from_vectors(f, e.n, ys)
    assert z.dim == m and e.is_isotropic(z)
    assert (z & uperp).dim == 0
    assert (z & rad).dim == 0
    if z0 is not None:
        assert z0 <= z
    return z


def orthogonal_decomposition(e: FormedSpace, w: Subspace, c: Subspace) -> Subspace:
    """E' with E = W + C + E', W^perp = W + E', E' orthogonal to W + C.

    Here W is isotropic and C is any linear complement of W^perp.
    """
    wc_perp = e.perp(w + c)
    eprime = extend_basis(e.radical() & wc_perp, wc_perp)
    assert (w + c + eprime).dim == e.n
    assert (w + eprime) == e.perp(w)
    for x in eprime.basis:
        for y in (w + c).basis:
            assert not e.omega_value(x, y)
    return eprime


# -- Witt decomposition ----------------------------------------------------------


@dataclass(frozen=True)
class WittDecomposition:
    radical: Subspace
    genus: int
    pairs: tuple            # ((v_1, w_1), ..., (v_g, w_g)) hyperbolic pairs in E
    anisotropic: FormedSpace
    anisotropic_basis: Subspace
    model: FormedSpace      # zero ^ dim R  +  H^g  +  anisotropic
    witness: Isometry       # model -> E


def witt_decompose(e: FormedSpace, cap: int = 1_000_000) -> WittDecomposition:
    """Split E as radical + hyperbolic planes + an anisotropic part.

    Each round picks the lexicographically least isotropic vector v outside
    the kernel of the current orthogonal piece, pairs it with w rescaled and
    corrected so that (v, w) spans a hyperbolic plane, and passes to the
    orthogonal complement of the pair.
    """
    f = e.field
    rad = e.radical()
    pairs = []
    current = Subspace.full(f, e.n)
    while True:
        if f.q**current.dim > cap:
            raise CapExceeded("witt scan exceeds cap")
        kernel_rel = current & e.perp(current)
        found = None
        for v in current.nonzero_vectors():
            if not kernel_rel.contains_vector(v) and e.Q_value(v).is_zero():
                found = v
                break
        if found is None:
            break
        v = found
        w0 = next(b for b in current.basis if e.omega_value(v, b))
        scale = f.inv(e.omega_value(v, w0).val)
        w1 = tuple(f.mul(scale, x) for x in w0)
        a = f.conj(e.Q_value(w1).rep)
        w = tuple(f.sub(x, f.mul(a, y)) for x, y in zip(w1, v))
        assert e.Q_value(w).is_zero() and e.omega_value(v, w).val == f.one
        pairs.append((v, w))
        pair_span = Subspace.span_of(f, v, w)
        current = current & e.perp(pair_span)
    anis_basis = extend_basis(rad, current)
    anis = e.restrict(anis_basis)
    for v in anis_basis.nonzero_vectors():
        assert not e.Q_value(v).is_zero(), "leftover part has an isotropic vector"
    g = len(pairs)
    model = direct_sum(zero_space(e.params, rad.dim), hyperbolic_space(e.params, g),
                       FormedSpace(e.params, anis.gram))
    cols = list(rad.basis)
    for v, w in pairs:
        cols.extend([v, w])
    cols.extend(anis_basis.basis)
    t = MatrixGF.from_rows(f, cols).transpose()
    witness = Isometry(model, e, t)
    assert witness.is_isometry() and witness.is_bijective()
    return WittDecomposition(rad, g, tuple(pairs), anis, anis_basis, model, witness)


# -- hyperbolization of E + (-E) ---------------------------------------------------


def hyperbolization_isometry(e: FormedSpace) -> Isometry:
    """The natural isometry (E,q) + (E,-q) -> H^(+dim E) for nondegenerate E.

    The map sends (u, v) to (u - g(u - v), flat(u - v)) where flat is
    v -> omega(-, v) and g = flat^(-1) o (v -> q(-, v)), followed by the
    basis identification of E + dual(E) with the hyperbolic spaces.
    """
    if e.kernel().dim != 0:
        raise Degenerate("hyperbolization needs a nondegenerate space")
    f = e.field
    n = e.n
    omega = e.omega_matrix
    g = omega.inverse() * e.gram
    eye = MatrixGF.identity(f, n)
    top = _hstack(eye - g, g)
    bottom = _hstack(omega, -omega)
    block = stack_pair(top, bottom)
    perm = _interleave_matrix(f, n)
    source = direct_sum(e, e.negate())
    target = hyperbolic_space(e.params, n)
    iso = Isometry(source, target, perm * block)
    assert iso.is_isometry() and iso.is_bijective()
    return iso


def dual_action_matrix(alpha: MatrixGF) -> MatrixGF:
    """Coordinate matrix of f -> f o alpha^(-1) on sigma-skew functionals."""
    return alpha.inverse().conj().transpose()


def hyperbolization_conjugate(e: FormedSpace, alpha: MatrixGF) -> MatrixGF:
    """The map alpha + (alpha^(-1))^* written in hyperbolic coordinates."""
    f = e.field
    n = e.n
    perm = _interleave_matrix(f, n)
    return perm * block_diag(alpha, dual_action_matrix(alpha)) * perm.inverse()


def _hstack(a: MatrixGF, b: MatrixGF) -> MatrixGF:
    assert a.rows == b.rows
    data = []
    for i in range(a.rows):
        data.extend(a.row(i))
        data.extend(b.row(i))
    return MatrixGF(a.field, a.rows, a.cols + b.cols, data)


def stack_pair(a: MatrixGF, b: MatrixGF) -> MatrixGF:
    return stack_rows(a, b)


def _interleave_matrix(field: GF, n: int) -> MatrixGF:
    """Permutation sending concatenated (x, y) coordinates to pairs (x_i, y_i)."""
    rows = []
    one = field.one
    for i in range(n):
        r1 = [0] * (2 * n)
        r1[i] = one
        r2 = [0] * (2 * n)
        r2[n + i] = one
        rows.extend([r1, r2])
    return MatrixGF.from_rows(field, rows)


# -- sign flips and doubling --------------------------------------------------------


def sign_flip_isometry(e: FormedSpace, witness: PropertyWitness) -> Isometry:
    """(E,q) = (E,-q) via multiplication by a (kind A), or the 2x2 block
    matrix [[conj(a), -conj(b)], [b, a]] on E+E from -q+-q to q+q (kind B)."""
    f = e.field
    if witness is None or witness.a.field != f or not witness.check():
        raise WitnessMismatch("witness does not solve the norm equation over this field")
    if witness.kind == "A":
        a = witness.a.val
        mat = MatrixGF.identity(f, e.n).scale(a)
        iso = Isometry(e, e.negate(), mat)
    else:
        a, b = witness.a.val, witness.b.val
        eye = MatrixGF.identity(f, e.n)
        top = _hstack(eye.scale(f.conj(a)), eye.scale(f.neg(f.conj(b))))
        bottom = _hstack(eye.scale(b), eye.scale(a))
        mat = stack_pair(top, bottom)
        double = direct_sum(e, e)
        iso = Isometry(double.negate(), double, mat)
    assert iso.is_isometry()
    return iso


def double_is_hyperbolic(e: FormedSpace, witness: PropertyWitness) -> Isometry:
    """E^2 = H^(dim E) under property (A); E^4 = H^(2 dim E) under (B)."""
    if e.kernel().dim != 0:
        raise Degenerate("doubling needs a nondegenerate space")
    f = e.field
    if witness is None or witness.a.field != f or not witness.check():
        raise WitnessMismatch("invalid witness")
    n = e.n
    phi = hyperbolization_isometry(e)
    if witness.kind == "A":
        a = witness.a.val
        flip = block_diag(MatrixGF.identity(f, n), MatrixGF.identity(f, n).scale(a))
        source = direct_sum(e, e)
        iso = Isometry(source, phi.target, phi.matrix * flip)
    else:
        beta_inv = sign_flip_isometry(e, witness).matrix.inverse()
        step1 = block_diag(MatrixGF.identity(f, 2 * n), beta_inv)
        reorder = _block_permutation(f, n, (0, 2, 1, 3))
        step3 = block_diag(phi.matrix, phi.matrix)
        source = direct_sum(e, e, e, e)
        target = hyperbolic_space(e.params, 2 * n)
        iso = Isometry(source, target, step3 * reorder * step1)
    assert iso.is_isometry() and iso.is_bijective()
    return iso


def _block_permutation(field: GF, n: int, order) -> MatrixGF:
    """Permutation matrix moving source block order[i] to target slot i."""
    k = len(order)
    rows = []
    for i in range(k):
        src = order[i]
        for t in range(n):
            r = [0] * (k * n)
            r[src * n + t] = field.one
            rows.append(r)
    return MatrixGF.from_rows(field, rows)


# -- parameter rescaling --------------------------------------------------------------


def rescale_form(e: FormedSpace, alpha) -> FormedSpace:
    """Multiply the form by 1/alpha, changing (eps, Lambda) accordingly.

    The new parameters are eps' = sigma(alpha)/alpha * eps and
    Lambda' = alpha^(-1) Lambda; automorphisms are unchanged as a subgroup
    of GL(E).
    """
    f = e.field
    a = alpha.val if isinstance(alpha, FieldElement) else f.element(alpha).val
    if a == 0:
        raise BadAlpha("rescaling by zero")
    ainv = f.inv(a)
    new_eps = f.mul(f.mul(f.conj(a), ainv), e.params.eps)
    new_lam = LambdaSpace(f, [f.mul(ainv, v) for v in e.params.lam.basis_vals])
    params = FormParameters(f, FieldElement(f, new_eps), new_lam,
                            name=f"{e.params.name}/rescaled")
    return FormedSpace(params, e.gram.scale(ainv))
