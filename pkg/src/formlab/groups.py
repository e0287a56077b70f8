"""Matrix groups over GF(q) at desk scale: backtracking enumeration of
isometry groups and their affine subgroups, closures, orbits, stabilizer
split sequences, stabilization embeddings and abelianizations."""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

from .errors import (
    CapExceeded,
    ElementsUnavailable,
    NotAnAction,
    SequenceBroken,
)
from .forms import (
    FormedSpace,
    Isometry,
    QuotientForm,
    extend_basis,
    induced_quotient_form,
    isotropic_complement,
    orthogonal_decomposition,
)
from .gf import GF
from .homology import HomologyGroup
from .linalg import MatrixGF, Subspace, all_vectors, block_diag
from .posets import FinitePoset

DEFAULT_ELEMENT_CAP = 1_000_000
SAMPLE_BRANCHES = 48


@dataclass
class MatrixGroup:
    """A finite matrix group, as generators plus (optionally) all elements."""

    field: GF
    degree: int
    constraint: str
    generators: list
    elements: list | None = None
    space: FormedSpace | None = None
    _elt_set: set = dc_field(default=None, repr=False)

    @property
    def order(self) -> int | None:
        return len(self.elements) if self.elements is not None else None

    def element_set(self) -> set:
        if self.elements is None:
            raise ElementsUnavailable(f"{self.constraint}: no full element list")
        if self._elt_set is None:
            self._elt_set = {g.data for g in self.elements}
        return self._elt_set

    def __contains__(self, g: MatrixGF) -> bool:
        return g.data in self.element_set()

    def ensure_elements(self, cap: int = DEFAULT_ELEMENT_CAP) -> list:
        if self.elements is None:
            self.elements = group_closure(self.generators, cap)
        return self.elements

    def serialize(self):
        out = {
            "constraint": self.constraint,
            "order": self.order,
            "generators": [g.serialize() for g in self.generators],
        }
        return out


# ---------------------------------------------------------------------------
# raw closure on flat tuples (hot path)


def _mul_data(a, b, n, add, mul):
    out = []
    for i in range(n):
        arow = a[i * n : (i + 1) * n]
        for j in range(n):
            acc = 0
            for t in range(n):
                x = arow[t]
                if x:
                    acc = add(acc, mul(x, b[t * n + j]))
            out.append(acc)
    return tuple(out)


def group_closure(generators, cap: int = DEFAULT_ELEMENT_CAP) -> list:
    """Breadth-first closure of a generator list under multiplication."""
    if not generators:
        return []
    f = generators[0].field
    n = generators[0].rows
    add, mul = f.add, f.mul
    gens = [g.data for g in generators]
    eye = MatrixGF.identity(f, n).data
    seen = {eye}
    seen.update(gens)
    frontier = list(seen)
    while frontier:
        new = []
        for b in frontier:
            for a in gens:
                c = _mul_data(a, b, n, add, mul)
                if c not in seen:
                    seen.add(c)
                    new.append(c)
                    if len(seen) > cap:
                        raise CapExceeded(f"closure exceeds {cap} elements")
        frontier = new
    out = [MatrixGF(f, n, n, d) for d in sorted(seen)]
    return out


# ---------------------------------------------------------------------------
# backtracking search for isometries / constrained linear groups


def _search(field: GF, n: int, space: FormedSpace | None, fixed_cols: dict,
            col_pred, cap: int, max_found: int | None):
    """Backtrack over images of the standard basis, in lexicographic order.

    Prunes on linear independence and, when a formed space is given, on
    omega agreement with the standard basis and on Q values.
    """
    add, mul, conj, inv, neg = field.add, field.mul, field.conj, field.inv, field.neg
    vectors = [v for v in all_vectors(field, n)]
    if space is not None:
        omega = space.omega_matrix
        om_rows = [omega.row(i) for i in range(n)]
        omega_t = [[omega[i, j] for i in range(n)] for j in range(n)]
        lam_reduce = space.params.lam.reduce
        gram = space.gram

        def q_raw(v):
            return lam_reduce(field.dot_sigma(v, gram.apply(v)))

        q_targets = [q_raw(tuple(field.one if t == i else 0 for t in range(n)))
                     for i in range(n)]
        omega_targets = [[omega[i, j] for j in range(n)] for i in range(n)]

        def omega_val(v, w):
            acc = 0
            for i, x in enumerate(v):
                if x:
                    xo = conj(x)
                    row = om_rows[i]
                    inner = 0
                    for y, o in zip(w, row):
                        if y and o:
                            inner = add(inner, mul(o, y))
                    acc = add(acc, mul(xo, inner))
            return acc

    found = []
    cols = []
    echelon = []  # list of (pivot_index, reduced_vector) for independence

    def reduce_vec(v):
        v = list(v)
        for pj, row in echelon:
            c = v[pj]
            if c:
                c = neg(mul(c, inv(row[pj])))
                v = [add(x, mul(c, y)) for x, y in zip(v, row)]
        return v

    def extend(j):
        if len(found) and max_found is not None and len(found) >= max_found:
            return
        if j == n:
            found.append(tuple(x for col in cols for x in col))
            if max_found is None and len(found) > cap:
                raise CapExceeded(f"group enumeration exceeds {cap} elements")
            return
        candidates = [fixed_cols[j]] if j in fixed_cols else vectors
        for v in candidates:
            red = reduce_vec(v)
            pj = next((i for i, x in enumerate(red) if x), None)
            if pj is None:
                continue
            if space is not None:
                if q_raw(v) != q_targets[j]:
                    continue
                ok = True
                for i in range(j + 1):
                    w = v if i == j else cols[i]
                    if omega_val(w, v) != omega_targets[i][j]:
                        ok = False
                        break
                if not ok:
                    continue
            if col_pred is not None and not col_pred(j, v):
                continue
            cols.append(v)
            echelon.append((pj, red))
            extend(j + 1)
            echelon.pop()
            cols.pop()
            if max_found is not None and len(found) >= max_found:
                return

    extend(0)
    out = []
    for data in found:
        # columns were collected; transpose into row-major storage
        mat = [[data[jj * n + ii] for jj in range(n)] for ii in range(n)]
        out.append(MatrixGF(field, n, n, [x for r in mat for x in r]))
    return out


def isometry_group(e: FormedSpace, cap: int = DEFAULT_ELEMENT_CAP,
                   sample: int = SAMPLE_BRANCHES) -> MatrixGroup:
    """All bijective isometries of E by pruned backtracking.

    If the full count would exceed the cap, returns a generator list made of
    the first completed branches instead of the element list.
    """
    try:
        elements = _search(e.field, e.n, e, {}, None, cap, None)
    except CapExceeded:
        gens = _search(e.field, e.n, e, {}, None, cap, sample)
        return MatrixGroup(e.field, e.n, "isometries", gens, None, e)
    for g in elements:
        iso = Isometry(e, e, g)
        assert iso.is_isometry()
    gens = elements if len(elements) <= sample else _reduce_generators(elements)
    return MatrixGroup(e.field, e.n, "isometries", gens, elements, e)


def gl_group(field: GF, n: int, cap: int = DEFAULT_ELEMENT_CAP) -> MatrixGroup:
    """GL_n(F_q) with full enumeration (desk scale only)."""
    elements = _search(field, n, None, {}, None, cap, None)
    return MatrixGroup(field, n, "GL", gl_generators(field, n), elements)


def brute_force_isometries(e: FormedSpace) -> list:
    """Oracle: scan every matrix and keep the bijective isometries."""
    f = e.field
    n = e.n
    out = []
    for data in all_vectors(f, n * n):
        m = MatrixGF(f, n, n, data)
        if m.is_invertible() and Isometry(e, e, m).is_isometry():
            out.append(m)
    return out


def _reduce_generators(elements, limit: int = 8) -> list:
    """A small generating subset, grown greedily and verified by closure."""
    target = len(elements)
    gens = []
    have = {elements[0].field and elements[0].data} if False else set()
    have = {MatrixGF.identity(elements[0].field, elements[0].rows).data}
    for g in elements:
        if g.data in have:
            continue
        gens.append(g)
        have = {m.data for m in group_closure(gens, cap=target + 1)}
        if len(have) == target:
            return gens
        if len(gens) >= limit:
            break
    return gens if len(have) == target else list(elements)


# -- generator constructions -------------------------------------------------


def primitive_element(field: GF) -> int:
    """A multiplicative generator of F_q^x (the least one)."""
    q = field.q
    for a in range(1, q):
        x, order = a, 1
        while x != field.one:
            x = field.mul(x, a)
            order += 1
        if order == q - 1:
            return a
    raise ValueError("no primitive element found")


def gl_generators(field: GF, n: int) -> list:
    """Elementary transvections plus one diagonal scaling generate GL_n."""
    if n == 0:
        return []
    gamma = primitive_element(field)
    gens = []
    if field.q > 2 or n == 1:
        d = MatrixGF.identity(field, n).row_list()
        d[0][0] = gamma
        gens.append(MatrixGF.from_rows(field, d))
    one = field.one
    for i in range(n):
        for j in range(n):
            if i != j:
                m = MatrixGF.identity(field, n).row_list()
                m[i][j] = one
                gens.append(MatrixGF.from_rows(field, m))
    return gens


def adapted_frame(v0: Subspace) -> MatrixGF:
    """Invertible matrix whose first columns span a complement of v0 and
    whose last columns are v0's basis."""
    comp = v0.complement()
    rows = list(comp.basis) + list(v0.basis)
    return MatrixGF.from_rows(v0.field, rows).transpose()


def at_group_generators(field: GF, n: int, v0: Subspace) -> list:
    """Generators of A^T(V, V0) = {g : g(v) - v in V0 for all v}."""
    k = v0.dim
    m = n - k
    t = adapted_frame(v0)
    t_inv = t.inverse()
    gens_ad = []
    for g in gl_generators(field, k):
        rows = MatrixGF.identity(field, n).row_list()
        for i in range(k):
            for j in range(k):
                rows[m + i][m + j] = g[i, j]
        gens_ad.append(MatrixGF.from_rows(field, rows))
    one = field.one
    for i in range(m):
        for j in range(k):
            rows = MatrixGF.identity(field, n).row_list()
            rows[m + j][i] = one
            gens_ad.append(MatrixGF.from_rows(field, rows))
    if not gens_ad:
        return [MatrixGF.identity(field, n)]
    return [t * g * t_inv for g in gens_ad]


def a_group_generators(field: GF, n: int, v0: Subspace) -> list:
    """Generators of A(V, V0) = {g : g fixes V0 pointwise}."""
    k = v0.dim
    m = n - k
    t = adapted_frame(v0)
    t_inv = t.inverse()
    gens_ad = []
    for g in gl_generators(field, m):
        rows = MatrixGF.identity(field, n).row_list()
        for i in range(m):
            for j in range(m):
                rows[i][j] = g[i, j]
        gens_ad.append(MatrixGF.from_rows(field, rows))
    one = field.one
    for i in range(m):
        for j in range(k):
            rows = MatrixGF.identity(field, n).row_list()
            rows[m + j][i] = one
            gens_ad.append(MatrixGF.from_rows(field, rows))
    if not gens_ad:
        return [MatrixGF.identity(field, n)]
    return [t * g * t_inv for g in gens_ad]


def at_group(field: GF, n: int, v0: Subspace, cap: int = DEFAULT_ELEMENT_CAP,
             want_elements: bool = True) -> MatrixGroup:
    gens = at_group_generators(field, n, v0)
    elements = group_closure(gens, cap) if want_elements else None
    return MatrixGroup(field, n, "AT(V,V0)", gens, elements)


def a_group(field: GF, n: int, v0: Subspace, cap: int = DEFAULT_ELEMENT_CAP,
            want_elements: bool = True) -> MatrixGroup:
    gens = a_group_generators(field, n, v0)
    elements = group_closure(gens, cap) if want_elements else None
    return MatrixGroup(field, n, "A(V,V0)", gens, elements)


def fixing_pointwise_group(e: FormedSpace, u: Subspace,
                           cap: int = DEFAULT_ELEMENT_CAP,
                           sample: int = SAMPLE_BRANCHES) -> MatrixGroup:
    """Ai(E, U): isometries of E restricting to the identity on U.

    Searches in coordinates adapted to U so the constraint is columnwise.
    """
    f = e.field
    n = e.n
    t = MatrixGF.from_rows(f, list(u.basis) + list(extend_basis(u, Subspace.full(f, n)).basis)).transpose()
    t_inv = t.inverse()
    moved = FormedSpace(e.params, t.conj_transpose() * e.gram * t)
    eye = MatrixGF.identity(f, n)
    fixed = {j: eye.col(j) for j in range(u.dim)}
    try:
        elements_ad = _search(f, n, moved, fixed, None, cap, None)
    except CapExceeded:
        gens_ad = _search(f, n, moved, fixed, None, cap, sample)
        gens = [t * g * t_inv for g in gens_ad]
        return MatrixGroup(f, n, "Ai(E,U)", gens, None, e)
    elements = [t * g * t_inv for g in elements_ad]
    for g in elements:
        assert Isometry(e, e, g).is_isometry()
        for b in u.basis:
            assert g.apply(b) == b
    gens = elements if len(elements) <= sample else _reduce_generators(elements)
    return MatrixGroup(f, n, "Ai(E,U)", gens, elements, e)


def symplectic_transvection(e: FormedSpace, v, lam) -> MatrixGF:
    """x -> x + lam * omega(x, v) v, an isometry for isotropic v (sigma = id)."""
    f = e.field
    n = e.n
    lam = lam if isinstance(lam, int) else lam.val
    omega_v = e.omega_matrix.apply(v)
    eye = MatrixGF.identity(f, n)
    cols = []
    for j in range(n):
        coeff = f.mul(lam, omega_v[j])
        col = [f.add(x, f.mul(coeff, y)) for x, y in zip(eye.col(j), v)]
        cols.append(col)
    data = [cols[j][i] for i in range(n) for j in range(n)]
    return MatrixGF(f, n, n, data)


def symplectic_transvection_generators(e: FormedSpace) -> list:
    """Transvections along one vector per line of E (symplectic preset)."""
    f = e.field
    seen = set()
    gens = []
    for v in all_vectors(f, e.n):
        if not any(v):
            continue
        line = Subspace.span_of(f, v)
        if line.basis in seen:
            continue
        seen.add(line.basis)
        for lam in range(1, f.q):
            gens.append(symplectic_transvection(e, line.basis[0], lam))
    return gens


# ---------------------------------------------------------------------------
# actions on posets


def poset_permutation(g: MatrixGF, poset: FinitePoset) -> dict:
    """The permutation of poset elements induced by W -> gW."""
    out = {}
    for w in poset.elements:
        img = w.apply(g)
        if img not in poset.index:
            raise NotAnAction(f"{g!r} moves {w!r} outside the poset")
        out[w] = img
    if len(set(out.values())) != len(poset.elements):
        raise NotAnAction("matrix does not act bijectively on the poset")
    return out


def orbits(group: MatrixGroup, poset: FinitePoset) -> list:
    """Orbit partition of the poset under the group generated by generators."""
    perms = [poset_permutation(g, poset) for g in group.generators]
    seen = set()
    out = []
    for w in poset.elements:
        if w in seen:
            continue
        orbit = {w}
        frontier = [w]
        while frontier:
            x = frontier.pop()
            for p in perms:
                y = p[x]
                if y not in orbit:
                    orbit.add(y)
                    frontier.append(y)
        seen |= orbit
        out.append(sorted(orbit, key=lambda s: s.basis))
    return out


def transitive_per_rank(group: MatrixGroup, poset: FinitePoset) -> bool:
    """One orbit per rank; true for a witness subgroup implies it for the group."""
    parts = orbits(group, poset)
    ranks_seen = {}
    for orbit in parts:
        r = poset.rank_of(orbit[0])
        if r in ranks_seen:
            return False
        ranks_seen[r] = len(orbit)
    return len(ranks_seen) == poset.dim + 1 if len(poset) else True


def stabilizer(group: MatrixGroup, w: Subspace) -> MatrixGroup:
    elements = [g for g in group.ensure_elements() if w.apply(g) == w]
    return MatrixGroup(group.field, group.degree, f"{group.constraint}_W",
                       _reduce_generators(elements) if len(elements) > 8 else elements,
                       elements, group.space)


def stabilization_embed(g: MatrixGF, extra: int) -> MatrixGF:
    """Extend by the identity on an added F^extra (or H) summand."""
    return block_diag(g, MatrixGF.identity(g.field, extra))


# ---------------------------------------------------------------------------
# coordinate helpers for restrictions and quotients


def restrict_to_frame(g: MatrixGF, frame: Subspace) -> MatrixGF:
    """The matrix of g on an invariant subspace, in the frame's basis."""
    cols = []
    for b in frame.basis:
        c = frame.coordinates_of(g.apply(b))
        if c is None:
            raise ValueError("subspace is not invariant under g")
        cols.append(c)
    k = frame.dim
    data = [cols[j][i] for i in range(k) for j in range(k)]
    return MatrixGF(frame.field, k, k, data)


def induced_on_quotient(g: MatrixGF, qf: QuotientForm) -> MatrixGF:
    """The matrix induced by g on Z^perp/Z in the quotient coordinates."""
    m = qf.space.n
    cols = []
    eye = MatrixGF.identity(qf.space.field, m)
    for j in range(m):
        lifted = qf.lift_vector(eye.col(j))
        cols.append(qf.project_vector(g.apply(lifted)))
    data = [cols[j][i] for i in range(m) for j in range(m)]
    return MatrixGF(qf.space.field, m, m, data)


# ---------------------------------------------------------------------------
# the four stabilizer split sequences


def _set_of(mats) -> set:
    return {m.data for m in mats}


def _assemble(frames, blocks, n) -> MatrixGF:
    """Conjugate blockdiag(blocks) from the frame coordinates back to F^n."""
    field = blocks[0].field
    rows = []
    for fr in frames:
        rows.extend(fr.basis)
    t = MatrixGF.from_rows(field, rows).transpose()
    return t * block_diag(*blocks) * t.inverse()


def section_gl(field: GF, n: int, w: Subspace):
    """Section of restriction GL(V)_W -> GL(W) via a coordinate complement."""
    comp = extend_basis(w, Subspace.full(field, n))

    def s(f_mat: MatrixGF) -> MatrixGF:
        return _assemble([w, comp], [f_mat, MatrixGF.identity(field, comp.dim)], n)

    return s


def section_at(field: GF, n: int, v0: Subspace, w: Subspace):
    """Section of A^T(V,V0)_W -> A^T(W, W & V0): identity on a complement X
    of W & V0 inside V0."""
    wv0 = w & v0
    x = extend_basis(wv0, v0)

    def s(f_mat: MatrixGF) -> MatrixGF:
        return _assemble([w, x], [f_mat, MatrixGF.identity(field, x.dim)], n)

    return s


def dual_twist_on_complement(e: FormedSpace, w: Subspace, c: Subspace,
                             rad: Subspace):
    """The map f -> f~ with omega(f w, f~ c) = omega(w, c), on C-coordinates.

    Here f~ = phi^(-1) o (f^*)^(-1) o phi for phi: C -> dual of W/R(E),
    v -> omega(-, v)."""
    f = e.field
    wbar = extend_basis(rad & w, w)  # lifts a basis of W / R(E)
    m = c.dim
    assert wbar.dim == m
    phi_rows = [[e.omega_value(wb, cb).val for cb in c.basis] for wb in wbar.basis]
    phi = MatrixGF.from_rows(f, phi_rows)
    phi_inv = phi.inverse()
    from .linalg import quotient_coordinates

    rad_in_w = Subspace.from_vectors(f, w.dim,
                                     [w.coordinates_of(b) for b in (rad & w).basis])
    proj, sect = quotient_coordinates(rad_in_w)
    wbar_in_w = [w.coordinates_of(b) for b in wbar.basis]

    def twist(f_on_w: MatrixGF) -> MatrixGF:
        # induced map on W/R in the wbar coordinates
        cols = []
        for b in wbar_in_w:
            img = proj.apply(f_on_w.apply(b))
            cols.append(img)
        fbar_cols = cols  # in the proj coordinates; frame: proj(wbar) = identity?
        frame = MatrixGF.from_rows(f, [proj.apply(b) for b in wbar_in_w]).transpose()
        frame_inv = frame.inverse()
        fbar = frame_inv * MatrixGF(f, m, m,
                                    [fbar_cols[j][i] for i in range(m) for j in range(m)])
        return phi_inv * fbar.inverse().conj().transpose() * phi

    return twist


def section_isotropic(e: FormedSpace, w: Subspace, u: Subspace | None = None):
    """Section of Gi(E)_W -> GL(W)_{R} x Gi(W^perp/W)   (u = None), or of
    Ai(E,U)_W -> A^T(W, W & U^perp)_{id R} x Gi(U^perp/U-side)  (u given).

    Returns (section, carrier) where section(f_on_W, h_on_quotient) is a
    matrix on E, and carrier is the quotient form on W^perp/W used for h.
    """
    f = e.field
    rad = e.radical()
    if u is None:
        z0 = None
    else:
        z0 = extend_basis(rad & u, u)
        if z0.dim == 0:
            z0 = None
    c = isotropic_complement(e, w, z0)
    eprime = orthogonal_decomposition(e, w, c)
    qf = induced_quotient_form(e, w)
    # E' projects isometrically onto W^perp/W; move h from quotient coords to E'
    pmat_cols = [qf.project_vector(b) for b in eprime.basis]
    k = eprime.dim
    pmat = MatrixGF(f, k, k, [pmat_cols[j][i] for i in range(k) for j in range(k)])
    pmat_inv = pmat.inverse()
    twist = dual_twist_on_complement(e, w, c, rad)

    def section(f_on_w: MatrixGF, h_on_q: MatrixGF) -> MatrixGF:
        h_on_eprime = pmat_inv * h_on_q * pmat
        return _assemble([w, c, eprime], [f_on_w, twist(f_on_w), h_on_eprime], e.n)

    return section, qf, c, eprime


def check_stabilizer_sequence(row: str, *, field=None, n=None, v0=None,
                              e=None, u=None, w=None,
                              cap: int = DEFAULT_ELEMENT_CAP,
                              sample_pairs: int = 25, rng=None) -> dict:
    """Verify one of the four split stabilizer sequences at an element W.

    Checks (i) the stated kernel is the kernel of restriction, elementwise;
    (ii) |G_W| = |kernel| * |image|; (iii) the explicit section lands in the
    stabilizer, splits the restriction, and is a homomorphism on sampled
    pairs; (iv) for rank-0 W in the relative rows, the degenerate
    isomorphism with the full small group, including its split retraction.
    """
    import random

    rng = rng or random.Random(0)
    report = {"row": row}
    if row == "GL":
        grp = gl_group(field, n, cap)
        stab = [g for g in grp.elements if w.apply(g) == w]
        kernel = [g for g in stab if all(g.apply(b) == b for b in w.basis)]
        stated = [g for g in grp.elements if all(g.apply(b) == b for b in w.basis)]
        if _set_of(kernel) != _set_of(stated):
            raise SequenceBroken("kernel differs from A(V, W)")
        image = {restrict_to_frame(g, w).data for g in stab}
        gl_w = gl_group(field, w.dim, cap)
        if len(stab) != len(kernel) * len(image):
            raise SequenceBroken("order multiplicativity fails")
        if image != _set_of(gl_w.elements):
            raise SequenceBroken("restriction is not onto GL(W)")
        sec = section_gl(field, n, w)
        targets = [MatrixGF(field, w.dim, w.dim, d) for d in sorted(image)]
        stab_set = _set_of(stab)
        for f_mat in targets:
            g = sec(f_mat)
            if g.data not in stab_set:
                raise SequenceBroken("section leaves the stabilizer")
            if restrict_to_frame(g, w) != f_mat:
                raise SequenceBroken("section does not split the restriction")
        for _ in range(sample_pairs):
            f1, f2 = rng.choice(targets), rng.choice(targets)
            if sec(f1 * f2) != sec(f1) * sec(f2):
                raise SequenceBroken("section is not a homomorphism")
        report.update(order_stab=len(stab), order_kernel=len(kernel),
                      order_image=len(image))
        return report

    if row == "AT":
        grp = at_group(field, n, v0, cap)
        stab = [g for g in grp.elements if w.apply(g) == w]
        kernel = [g for g in stab if all(g.apply(b) == b for b in w.basis)]
        wv0 = w & v0
        # kernel should biject with A(V0, W & V0) via restriction to V0
        restr = {restrict_to_frame(g, v0).data for g in kernel}
        a_small = a_group(field, v0.dim,
                          Subspace.from_vectors(field, v0.dim,
                                                [v0.coordinates_of(b) for b in wv0.basis]),
                          cap)
        if restr != _set_of(a_small.elements) or len(restr) != len(kernel):
            raise SequenceBroken("kernel differs from A(V0, W & V0)")
        image = {restrict_to_frame(g, w).data for g in stab}
        if len(stab) != len(kernel) * len(image):
            raise SequenceBroken("order multiplicativity fails")
        # image = A^T(W, W & V0) in W-coordinates
        wv0_in_w = Subspace.from_vectors(field, w.dim,
                                         [w.coordinates_of(b) for b in wv0.basis])
        at_small = at_group(field, w.dim, wv0_in_w, cap)
        if image != _set_of(at_small.elements):
            raise SequenceBroken("restriction image is not A^T(W, W & V0)")
        sec = section_at(field, n, v0, w)
        stab_set = _set_of(stab)
        targets = [MatrixGF(field, w.dim, w.dim, d) for d in sorted(image)]
        for f_mat in targets:
            g = sec(f_mat)
            if g.data not in stab_set or restrict_to_frame(g, w) != f_mat:
                raise SequenceBroken("section fails for the AT row")
        for _ in range(sample_pairs):
            f1, f2 = rng.choice(targets), rng.choice(targets)
            if sec(f1 * f2) != sec(f1) * sec(f2):
                raise SequenceBroken("AT section is not a homomorphism")
        report.update(order_stab=len(stab), order_kernel=len(kernel),
                      order_image=len(image))
        if w.dim and (w & v0).dim == 0:
            _check_rank0_at(field, n, v0, w, grp, stab, report)
        return report

    if row in ("Gi", "Ai"):
        grp = isometry_group(e, cap) if row == "Gi" else fixing_pointwise_group(e, u, cap)
        if grp.elements is None:
            raise CapExceeded("group too large for the sequence check")
        rad = e.radical()
        stab = [g for g in grp.elements if w.apply(g) == w]
        kernel = [g for g in stab if all(g.apply(b) == b for b in w.basis)]
        if row == "Gi":
            stated = [g for g in grp.elements if all(g.apply(b) == b for b in w.basis)]
            if _set_of(kernel) != _set_of(stated):
                raise SequenceBroken("kernel differs from Ai(E, W)")
            # image: GL(W) elements preserving R(E)
            image = {restrict_to_frame(g, w).data for g in stab}
            rad_in_w = Subspace.from_vectors(e.field, w.dim,
                                             [w.coordinates_of(b) for b in rad.basis])
            glw = gl_group(e.field, w.dim, cap)
            target = {g.data for g in glw.elements if rad_in_w.apply(g) == rad_in_w}
            if image != target:
                raise SequenceBroken("restriction image is not GL(W)_R")
            sec, qf_w, c, eprime = section_isotropic(e, w)
        else:
            uperp = e.perp(u)
            qf_u = induced_quotient_form(e, u)
            x_in_q = qf_u.project_subspace(w & uperp)
            small = fixing_pointwise_group(qf_u.space, x_in_q, cap)
            induced = {induced_on_quotient(g, qf_u).data for g in kernel}
            if induced != _set_of(small.elements) or len(kernel) != len(small.elements):
                raise SequenceBroken("kernel differs from Ai(U^perp/U, W & U^perp)")
            image = {restrict_to_frame(g, w).data for g in stab}
            wuperp_in_w = Subspace.from_vectors(
                e.field, w.dim, [w.coordinates_of(b) for b in (w & uperp).basis])
            rad_in_w = Subspace.from_vectors(e.field, w.dim,
                                             [w.coordinates_of(b) for b in rad.basis])
            at_small = at_group(e.field, w.dim, wuperp_in_w, cap)
            target = {
                g.data
                for g in at_small.elements
                if all(g.apply(b) == b for b in rad_in_w.basis)
            }
            if image != target:
                raise SequenceBroken("image is not A^T(W, W&U^perp)_{id R}")
            sec, qf_w, c, eprime = section_isotropic(e, w, u)
        if len(stab) != len(kernel) * len(image):
            raise SequenceBroken("order multiplicativity fails")
        # quotient side group
        carrier = qf_w.space
        quot_group = isometry_group(carrier, cap)
        stab_set = _set_of(stab)
        targets = [MatrixGF(e.field, w.dim, w.dim, d) for d in sorted(image)]
        h_elts = quot_group.elements
        for f_mat in targets[: min(len(targets), 12)]:
            for h in h_elts[: min(len(h_elts), 6)]:
                g = sec(f_mat, h)
                if g.data not in stab_set:
                    raise SequenceBroken("isotropic section leaves the stabilizer")
                if restrict_to_frame(g, w) != f_mat:
                    raise SequenceBroken("isotropic section does not split")
                if induced_on_quotient(g, qf_w) != h:
                    raise SequenceBroken("section does not induce h on W^perp/W")
        for _ in range(sample_pairs):
            f1, f2 = rng.choice(targets), rng.choice(targets)
            h1, h2 = rng.choice(h_elts), rng.choice(h_elts)
            if sec(f1 * f2, h1 * h2) != sec(f1, h1) * sec(f2, h2):
                raise SequenceBroken("isotropic section is not a homomorphism")
        report.update(order_stab=len(stab), order_kernel=len(kernel),
                      order_image=len(image), order_quotient=len(h_elts))
        if row == "Ai" and w.dim == u.dim and rad.dim == 0:
            _check_rank0_ai(e, u, w, grp, stab, report)
        return report

    raise ValueError(f"unknown stabilizer row {row!r}")


def _check_rank0_at(field, n, v0, w0, grp, stab, report):
    """Rank-0 degeneration: GL(V0) = A^T(V,V0)_{W0}, split by restriction."""
    glv0 = gl_group(field, v0.dim, DEFAULT_ELEMENT_CAP)

    def include(h: MatrixGF) -> MatrixGF:
        return _assemble([v0, w0], [h, MatrixGF.identity(field, w0.dim)], n)

    images = {include(h).data for h in glv0.elements}
    if images != _set_of(stab):
        raise SequenceBroken("GL(V0) does not match the rank-0 stabilizer")
    for h in glv0.elements[:20]:
        if restrict_to_frame(include(h), v0) != h:
            raise SequenceBroken("retraction fails on the rank-0 inclusion")
    report["rank0_iso"] = True


def _check_rank0_ai(e, u, w0, grp, stab, report):
    """Rank-0 degeneration: Gi(U^perp/U) = Ai(E,U)_{W0} via extension by id."""
    f = e.field
    rad = e.radical()
    c = extend_basis(rad & w0, w0)
    eprime = orthogonal_decomposition(e, u, c)
    qf = induced_quotient_form(e, u)
    pcols = [qf.project_vector(b) for b in eprime.basis]
    k = eprime.dim
    pmat = MatrixGF(f, k, k, [pcols[j][i] for i in range(k) for j in range(k)])
    pmat_inv = pmat.inverse()
    quot = isometry_group(qf.space, DEFAULT_ELEMENT_CAP)

    def include(h: MatrixGF) -> MatrixGF:
        blocks = [MatrixGF.identity(f, u.dim), MatrixGF.identity(f, c.dim),
                  pmat_inv * h * pmat]
        return _assemble([u, c, eprime], blocks, e.n)

    images = {include(h).data for h in quot.elements}
    if images != _set_of(stab):
        raise SequenceBroken("Gi(U^perp/U) does not match the rank-0 stabilizer")
    for h in quot.elements[:20]:
        if induced_on_quotient(include(h), qf) != h:
            raise SequenceBroken("rank-0 retraction (induced map) fails")
    report["rank0_iso"] = True


# ---------------------------------------------------------------------------
# abelianization


def _closure_data(gens_data, n, field, cap):
    add, mul = field.add, field.mul
    eye = MatrixGF.identity(field, n).data
    seen = {eye}
    seen.update(gens_data)
    frontier = list(seen)
    while frontier:
        new = []
        for b in frontier:
            for a in gens_data:
                c = _mul_data(a, b, n, add, mul)
                if c not in seen:
                    seen.add(c)
                    new.append(c)
                    if len(seen) > cap:
                        raise CapExceeded("closure exceeds cap")
        frontier = new
    return seen


def commutator_subgroup(group: MatrixGroup, cap: int = DEFAULT_ELEMENT_CAP) -> set:
    """Element set of the commutator subgroup (normal closure of commutators)."""
    f = group.field
    n = group.degree
    add, mul = f.add, f.mul
    gens = [g.data for g in group.generators]
    inv = {d: MatrixGF(f, n, n, d).inverse().data for d in gens}
    comms = []
    for a in gens:
        for b in gens:
            ainv = inv[a]
            binv = inv[b]
            c = _mul_data(_mul_data(a, b, n, add, mul),
                          _mul_data(ainv, binv, n, add, mul), n, add, mul)
            comms.append(c)
    small_gens = []
    closure = {MatrixGF.identity(f, n).data}

    def absorb(candidates):
        nonlocal closure
        added = False
        for c in candidates:
            if c not in closure:
                small_gens.append(c)
                closure = _closure_data(small_gens, n, f, cap)
                added = True
        return added

    absorb(comms)
    while True:
        conjugates = []
        for g in gens:
            ginv = inv[g]
            for s in small_gens:
                conjugates.append(
                    _mul_data(_mul_data(g, s, n, add, mul), ginv, n, add, mul)
                )
        if not absorb(conjugates):
            break
    return closure


def abelianization(group: MatrixGroup, cap: int = DEFAULT_ELEMENT_CAP) -> HomologyGroup:
    """H_1(G; Z) as the quotient by the commutator subgroup."""
    f = group.field
    n = group.degree
    elements = group.ensure_elements(cap)
    derived = commutator_subgroup(group, cap)
    m = len(elements) // len(derived)
    if m == 1:
        return HomologyGroup(0)
    add, mul = f.add, f.mul
    # coset decomposition
    coset_id = {}
    reps = []
    for g in elements:
        if g.data in coset_id:
            continue
        cid = len(reps)
        reps.append(g.data)
        for s in derived:
            coset_id[_mul_data(g.data, s, n, add, mul)] = cid
    assert len(reps) == m

    def cmul(i, j):
        return coset_id[_mul_data(reps[i], reps[j], n, add, mul)]

    # abelian invariants from the element-order filtration at each prime
    orders = []
    ident = coset_id[MatrixGF.identity(f, n).data]
    for i in range(m):
        k, x = 1, i
        while x != ident:
            x = cmul(x, i)
            k += 1
        orders.append(k)
    for i in range(m):
        for j in range(m):
            assert cmul(i, j) == cmul(j, i), "quotient is not abelian"
    invariants = _abelian_invariants(m, orders)
    return HomologyGroup(0, tuple(invariants))


def _abelian_invariants(m: int, orders) -> list:
    """Invariant factors of a finite abelian group from its order statistics."""
    def prime_factors(x):
        out = {}
        d = 2
        while d * d <= x:
            while x % d == 0:
                out[d] = out.get(d, 0) + 1
                x //= d
            d += 1
        if x > 1:
            out[x] = out.get(x, 0) + 1
        return out

    primes = prime_factors(m)
    p_parts = {}
    for p, _ in primes.items():
        # c_k = number of elements x with x^(p^k) = 1 = p^(sum min(lambda_i, k))
        lambdas = []
        k = 1
        prev_log = 0
        while True:
            c_k = sum(1 for o in orders if pow_divides(o, p, k))
            log = _int_log(c_k, p)
            gained = log - prev_log
            # `gained` = number of lambda_i >= k
            if gained == 0:
                break
            lambdas.append(gained)
            prev_log = log
            k += 1
        # lambdas[k-1] = #parts >= k; convert to the partition itself
        parts = []
        for k, cnt in enumerate(lambdas, start=1):
            nxt = lambdas[k] if k < len(lambdas) else 0
            parts.extend([k] * (cnt - nxt))
        p_parts[p] = sorted(parts, reverse=True)
    width = max(len(v) for v in p_parts.values())
    invariants = []
    for i in range(width):
        d = 1
        for p, parts in p_parts.items():
            if i < len(parts):
                d *= p ** parts[i]
        invariants.append(d)
    invariants.sort()
    return [d for d in invariants if d > 1]


def pow_divides(order: int, p: int, k: int) -> bool:
    """Whether x^(p^k) = e for an element of the given order."""
    return (p**k) % order == 0


def _int_log(x: int, p: int) -> int:
    out = 0
    while x % p == 0 and x > 1:
        x //= p
        out += 1
    return out
