"""Integral homology of finite posets: Smith normal form, order complexes,
the rank-filtration chain complex, and Cohen-Macaulay verification.

All matrices here are plain lists of lists of Python ints, so every
computation is exact regardless of entry growth.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import CapExceeded, NotCohenMacaulay
from .posets import NEG_INF, POS_INF, FinitePoset

DEFAULT_SIMPLEX_CAP = 500_000


# ---------------------------------------------------------------------------
# integer matrices


def int_identity(n):
    return [[1 if i == j else 0 for j in range(n)] for i in range(n)]


def int_matmul(a, b):
    if not a or not b:
        return [[] for _ in a]
    n, k, m = len(a), len(b), len(b[0])
    bt = list(zip(*b))
    return [[sum(x * y for x, y in zip(row, col)) for col in bt] for row in a]


def int_transpose(a):
    return [list(r) for r in zip(*a)]


def is_zero_matrix(a):
    return all(not x for row in a for x in row)


class SmithNormalForm:
    """U * A * V = S with S diagonal, d_1 | d_2 | ..., U and V unimodular.

    Also tracks the inverses of U and V (each elementary operation has an
    elementary inverse), which the homology solvers need.
    """

    def __init__(self, a, rows=None, cols=None, transforms=True):
        self.m = len(a) if rows is None else rows
        self.n = (len(a[0]) if a else 0) if cols is None else cols
        self.s = [list(r) for r in a]
        self.transforms = transforms
        if transforms:
            self.u = int_identity(self.m)
            self.u_inv = int_identity(self.m)
            self.v = int_identity(self.n)
            self.v_inv = int_identity(self.n)
        self._reduce()

    # elementary operations, mirrored into the transforms

    def _swap_rows(self, i, j):
        s = self.s
        s[i], s[j] = s[j], s[i]
        if self.transforms:
            u, ui = self.u, self.u_inv
            u[i], u[j] = u[j], u[i]
            for r in ui:
                r[i], r[j] = r[j], r[i]

    def _swap_cols(self, i, j):
        for r in self.s:
            r[i], r[j] = r[j], r[i]
        if self.transforms:
            for r in self.v:
                r[i], r[j] = r[j], r[i]
            vi = self.v_inv
            vi[i], vi[j] = vi[j], vi[i]

    def _add_row(self, dst, src, c):
        # row_dst += c * row_src
        self.s[dst] = [x + c * y for x, y in zip(self.s[dst], self.s[src])]
        if self.transforms:
            self.u[dst] = [x + c * y for x, y in zip(self.u[dst], self.u[src])]
            ui = self.u_inv
            for r in ui:
                r[src] -= c * r[dst]

    def _add_col(self, dst, src, c):
        for r in self.s:
            r[dst] += c * r[src]
        if self.transforms:
            for r in self.v:
                r[dst] += c * r[src]
            self.v_inv[src] = [x - c * y for x, y in
                               zip(self.v_inv[src], self.v_inv[dst])]

    def _negate_row(self, i):
        self.s[i] = [-x for x in self.s[i]]
        if self.transforms:
            self.u[i] = [-x for x in self.u[i]]
            for r in self.u_inv:
                r[i] = -r[i]

    def _find_pivot(self, t):
        best = None
        val = None
        for i in range(t, self.m):
            row = self.s[i]
            for j in range(t, self.n):
                x = row[j]
                if x and (val is None or abs(x) < val):
                    best, val = (i, j), abs(x)
                    if val == 1:
                        return best
        return best

    def _reduce(self):
        s = self.s
        t = 0
        limit = min(self.m, self.n)
        while t < limit:
            pos = self._find_pivot(t)
            if pos is None:
                break
            i, j = pos
            if i != t:
                self._swap_rows(t, i)
            if j != t:
                self._swap_cols(t, j)
            while True:
                # shrink the column, then the row, until both are clear
                dirty = False
                for i in range(t + 1, self.m):
                    if s[i][t]:
                        q = s[i][t] // s[t][t]
                        if q:
                            self._add_row(i, t, -q)
                        if s[i][t]:
                            self._swap_rows(t, i)
                            dirty = True
                if dirty:
                    continue
                for j in range(t + 1, self.n):
                    if s[t][j]:
                        q = s[t][j] // s[t][t]
                        if q:
                            self._add_col(j, t, -q)
                        if s[t][j]:
                            self._swap_cols(t, j)
                            dirty = True
                if not dirty:
                    break
            # pivot must divide the rest of the submatrix
            p = s[t][t]
            offender = None
            for i in range(t + 1, self.m):
                row = s[i]
                for j in range(t + 1, self.n):
                    if row[j] % p:
                        offender = i
                        break
                if offender is not None:
                    break
            if offender is not None:
                self._add_row(t, offender, 1)
                continue
            if p < 0:
                self._negate_row(t)
            t += 1

    @property
    def diagonal(self):
        return [self.s[i][i] for i in range(min(self.m, self.n))]

    @property
    def rank(self):
        return sum(1 for d in self.diagonal if d)

    def invariant_factors(self):
        return [d for d in self.diagonal if d]

    def torsion(self):
        return tuple(d for d in self.diagonal if d > 1)


def smith_normal_form(a, transforms: bool = True):
    """(S, U, V) with U*A*V = S diagonal and divisibility down the diagonal."""
    snf = SmithNormalForm(a, transforms=transforms)
    if transforms:
        return snf.s, snf.u, snf.v
    return snf.s, None, None


def integer_rank(a) -> int:
    if not a or not a[0]:
        return 0
    return SmithNormalForm(a, transforms=False).rank


def kernel_basis(a, cols: int):
    """Basis of the integer kernel lattice of A (columns of length `cols`)."""
    if cols == 0:
        return []
    if not a or not a[0]:
        return [[1 if i == j else 0 for i in range(cols)] for j in range(cols)]
    snf = SmithNormalForm(a)
    r = snf.rank
    return [[snf.v[i][j] for i in range(cols)] for j in range(r, cols)]


def solve_exact(a, b, cols: int):
    """Integer solution x of A x = b, or None; A given as list of rows."""
    if not a:
        return [0] * cols if cols else []
    snf = SmithNormalForm(a)
    ub = [sum(u * x for u, x in zip(row, b)) for row in snf.u]
    y = [0] * cols
    diag = snf.diagonal
    for i, val in enumerate(ub):
        d = diag[i] if i < len(diag) else 0
        if d:
            if val % d:
                return None
            y[i] = val // d
        elif val:
            return None
    return [sum(snf.v[i][j] * y[j] for j in range(cols)) for i in range(cols)]


@dataclass(frozen=True)
class HomologyGroup:
    """Free rank plus invariant factors > 1 (each dividing the next)."""

    betti: int
    torsion: tuple = ()

    def is_zero(self) -> bool:
        return self.betti == 0 and not self.torsion

    def is_free(self) -> bool:
        return not self.torsion

    def serialize(self):
        return {"betti": self.betti, "torsion": list(self.torsion)}

    def __repr__(self):
        parts = []
        if self.betti:
            parts.append(f"Z^{self.betti}" if self.betti > 1 else "Z")
        parts.extend(f"Z/{d}" for d in self.torsion)
        return " + ".join(parts) if parts else "0"


class HomologyBasis:
    """Homology of ker(d_out)/im(d_in) with representative cycles and a
    coordinate solver for arbitrary cycles."""

    def __init__(self, d_out, d_in, dim_chain: int):
        self.dim_chain = dim_chain
        kb = kernel_basis(d_out, dim_chain)
        self._kernel = kb
        z = len(kb)
        if z == 0:
            self.group = HomologyGroup(0)
            self.representatives = []
            self._free_indices = []
            self._ux = []
            self._diag = []
            self._kernel_snf = None
            return
        kmat = [[kb[j][i] for j in range(z)] for i in range(dim_chain)]
        self._kernel_snf = SmithNormalForm(kmat)
        assert all(d == 1 for d in self._kernel_snf.invariant_factors()), \
            "kernel lattice must be saturated"
        n_in = len(d_in[0]) if d_in and d_in[0] else 0
        x = [[0] * n_in for _ in range(z)]
        for col in range(n_in):
            b = [row[col] for row in d_in]
            sol = self._solve_kernel_coords(b)
            assert sol is not None, "image does not lie in the kernel"
            for i in range(z):
                x[i][col] = sol[i]
        snf_x = SmithNormalForm(x, rows=z, cols=n_in)
        diag = snf_x.diagonal + [0] * (z - len(snf_x.diagonal))
        self._diag = diag[:z]
        self._ux = snf_x.u
        ux_inv = snf_x.u_inv
        gens = []
        free_idx = []
        torsion = []
        for i in range(z):
            d = self._diag[i]
            if d == 1:
                continue
            vec = [sum(kb[j][r] * ux_inv[j][i] for j in range(z)) for r in range(dim_chain)]
            if d == 0:
                free_idx.append(i)
                gens.append(vec)
            else:
                torsion.append(d)
        self._free_indices = free_idx
        self.group = HomologyGroup(len(free_idx), tuple(torsion))
        self.representatives = gens

    def _solve_kernel_coords(self, vec):
        z = len(self._kernel)
        if z == 0:
            return [] if not any(vec) else None
        snf = self._kernel_snf
        ub = [sum(u * x for u, x in zip(row, vec)) for row in snf.u]
        y = [0] * z
        for i in range(len(vec)):
            d = snf.s[i][i] if i < z and i < snf.m else 0
            if i < z and d:
                if ub[i] % d:
                    return None
                y[i] = ub[i] // d
            elif ub[i]:
                return None
        return [sum(snf.v[i][j] * y[j] for j in range(z)) for i in range(z)]

    def coordinates(self, cycle):
        """Integer coordinates of a cycle's class in the free basis.

        Raises if the class has a nonzero torsion component or if the vector
        is not a cycle.
        """
        sol = self._solve_kernel_coords(cycle)
        if sol is None:
            raise ValueError("vector is not a cycle")
        z = len(self._kernel)
        y = [sum(self._ux[i][j] * sol[j] for j in range(z)) for i in range(z)]
        out = []
        for i in range(z):
            d = self._diag[i]
            if d == 0:
                out.append(y[i])
            elif d > 1 and y[i] % d:
                raise ValueError("class has a torsion component")
        return out


# ---------------------------------------------------------------------------
# order complexes


class OrderComplex:
    """Augmented simplicial chain complex of the strict chains of a poset.

    Degree k simplices are ascending (k+1)-chains, stored as tuples of
    element indices; degree -1 holds the empty simplex.
    """

    def __init__(self, poset: FinitePoset, cap: int = DEFAULT_SIMPLEX_CAP):
        self.poset = poset
        n = len(poset.elements)
        chains = [[()], [(i,) for i in range(n)]]
        total = 1 + n
        level = chains[1]
        while level:
            nxt = []
            for c in level:
                m = poset.above_mask[c[-1]]
                while m:
                    j = (m & -m).bit_length() - 1
                    nxt.append(c + (j,))
                    m &= m - 1
            total += len(nxt)
            if total > cap:
                raise CapExceeded(f"order complex exceeds {cap} simplices")
            if nxt:
                nxt.sort()
                chains.append(nxt)
            level = nxt
        self.simplices = chains  # simplices[k+1] holds degree-k simplices
        self.indexes = [
            {s: i for i, s in enumerate(level)} for level in chains
        ]

    @property
    def dim(self) -> int:
        return len(self.simplices) - 2

    def n_simplices(self, k: int) -> int:
        if -1 <= k <= self.dim:
            return len(self.simplices[k + 1])
        return 0

    def boundary_matrix(self, k: int):
        """Matrix of d_k : C_k -> C_(k-1), including the augmentation d_0."""
        rows = self.n_simplices(k - 1)
        cols = self.n_simplices(k)
        mat = [[0] * cols for _ in range(rows)]
        if not rows or not cols:
            return mat
        idx = self.indexes[k]
        for s, j in self.indexes[k + 1].items():
            for drop in range(len(s)):
                face = s[:drop] + s[drop + 1 :]
                mat[idx[face]][j] += -1 if drop % 2 else 1
        return mat

    def boundary_of_chain(self, k: int, chain: dict) -> dict:
        """Boundary of a chain given as {simplex: coeff} in degree k."""
        out = {}
        for s, c in chain.items():
            if not c:
                continue
            for drop in range(len(s)):
                face = s[:drop] + s[drop + 1 :]
                sign = -1 if drop % 2 else 1
                out[face] = out.get(face, 0) + sign * c
        return {s: c for s, c in out.items() if c}


def reduced_homology(poset: FinitePoset, cap: int = DEFAULT_SIMPLEX_CAP) -> dict:
    """Reduced integral homology per degree, computed by Smith normal form.

    The empty poset gives H_(-1) = Z; for nonempty posets degree -1 vanishes.
    """
    cx = OrderComplex(poset, cap)
    ranks = {}
    torsions = {}
    for k in range(0, cx.dim + 1):
        snf = SmithNormalForm(cx.boundary_matrix(k), transforms=False)
        ranks[k] = snf.rank
        torsions[k] = snf.torsion()
    out = {}
    for k in range(-1, cx.dim + 1):
        nk = cx.n_simplices(k)
        betti = nk - ranks.get(k, 0) - ranks.get(k + 1, 0)
        out[k] = HomologyGroup(betti, torsions.get(k + 1, ()))
    return out


def homology_is_spherical(groups: dict, dim: int) -> bool:
    """Vanishing below the top degree, and free on top."""
    for k, g in groups.items():
        if k < dim and not g.is_zero():
            return False
        if k == dim and not g.is_free():
            return False
    return True


def top_homology_basis(poset: FinitePoset, degree: int,
                       cap: int = DEFAULT_SIMPLEX_CAP):
    """(OrderComplex, HomologyBasis) in the stated degree."""
    cx = OrderComplex(poset, cap)
    d_out = cx.boundary_matrix(degree)
    d_in = cx.boundary_matrix(degree + 1)
    basis = HomologyBasis(d_out, d_in, cx.n_simplices(degree))
    return cx, basis


# ---------------------------------------------------------------------------
# Cohen-Macaulay verification


@dataclass
class CMReport:
    is_cm: bool
    intervals_checked: int
    failure: tuple | None = None  # (x, y, degree, HomologyGroup)

    def serialize(self):
        out = {"is_cm": self.is_cm, "intervals_checked": self.intervals_checked}
        if self.failure is not None:
            x, y, deg, grp = self.failure
            out["failure"] = {"x": repr(x), "y": repr(y), "degree": deg,
                              "homology": grp.serialize()}
        return out


def _interval_spherical(poset: FinitePoset, x, y, cap) -> tuple:
    ival = poset.interval(x, y)
    groups = reduced_homology(ival, cap)
    for k, g in sorted(groups.items()):
        if k < ival.dim and not g.is_zero():
            return False, (x, y, k, g)
        if k == ival.dim and not g.is_free():
            return False, (x, y, k, g)
    return True, None


def check_cohen_macaulay(poset: FinitePoset, cap: int = DEFAULT_SIMPLEX_CAP) -> CMReport:
    """Homology-level sphericity of every interval (x, y), ends included."""
    checked = 0
    pairs = [(NEG_INF, POS_INF)]
    pairs += [(NEG_INF, y) for y in poset.elements]
    pairs += [(x, POS_INF) for x in poset.elements]
    pairs += [
        (x, y)
        for x in poset.elements
        for y in poset.elements
        if poset.less(x, y)
    ]
    for x, y in pairs:
        ok, failure = _interval_spherical(poset, x, y, cap)
        checked += 1
        if not ok:
            return CMReport(False, checked, failure)
    return CMReport(True, checked)


# ---------------------------------------------------------------------------
# the rank-filtration chain complex of a Cohen-Macaulay poset


class IntChainComplex:
    """Chain complex of free Z-modules with labeled bases.

    boundaries[r] is the matrix C_r -> C_(r-1); labels[r] names the basis.
    """

    def __init__(self, labels: dict, boundaries: dict, low: int, high: int):
        self.labels = labels
        self.boundaries = boundaries
        self.low = low
        self.high = high
        for r in range(low + 1, high + 1):
            a = boundaries.get(r)
            b = boundaries.get(r + 1)
            if a and b and a[0] and b and b[0]:
                comp = int_matmul(a, b)
                assert is_zero_matrix(comp), f"d o d != 0 between degrees {r+1} and {r-1}"

    def dim_at(self, r: int) -> int:
        return len(self.labels.get(r, []))

    def homology(self) -> dict:
        ranks = {}
        torsions = {}
        for r in range(self.low, self.high + 1):
            mat = self.boundaries.get(r)
            if mat is None or not mat or not mat[0]:
                ranks[r] = 0
                torsions[r] = ()
            else:
                snf = SmithNormalForm(mat, transforms=False)
                ranks[r] = snf.rank
                torsions[r] = snf.torsion()
        out = {}
        for r in range(self.low, self.high + 1):
            betti = self.dim_at(r) - ranks.get(r, 0) - ranks.get(r + 1, 0)
            out[r] = HomologyGroup(betti, torsions.get(r + 1, ()))
        return out


def rank_filtration_complex(poset: FinitePoset, cap: int = DEFAULT_SIMPLEX_CAP,
                            verify_cm: bool = True) -> IntChainComplex:
    """The chain complex with degree-r term the sum over rank-r elements X of
    the top reduced homology of the lower interval below X.

    The differential cones a representative cycle off X, takes the simplicial
    boundary, and reads off its class in the chosen bases one rank down.
    The poset must be Cohen-Macaulay; with verify_cm the full interval check
    runs first, otherwise only the lower intervals (needed for the terms
    anyway) are validated.
    """
    if verify_cm:
        report = check_cohen_macaulay(poset, cap)
        if not report.is_cm:
            x, y, deg, grp = report.failure
            raise NotCohenMacaulay(
                f"interval ({x!r}, {y!r}) has homology {grp} in degree {deg}"
            )
    n = len(poset.elements)
    labels = {-1: [("empty", 0)]}
    boundaries = {}
    if n == 0:
        return IntChainComplex(labels, boundaries, -1, -1)
    dim = poset.dim
    interval_data = {}   # element index -> (OrderComplex, HomologyBasis)
    for i in range(n):
        r = poset.rank[i]
        below = poset.subposet(_mask_bits(poset.below_mask[i]))
        cx = OrderComplex(below, cap)
        groups = reduced_homology(below, cap)
        for k, g in groups.items():
            if k < r - 1 and not g.is_zero():
                raise NotCohenMacaulay(
                    f"lower interval of {poset.elements[i]!r} has homology {g} in degree {k}"
                )
        basis = HomologyBasis(
            cx.boundary_matrix(r - 1), cx.boundary_matrix(r), cx.n_simplices(r - 1)
        )
        if not basis.group.is_free():
            raise NotCohenMacaulay(
                f"lower interval of {poset.elements[i]!r} has torsion on top"
            )
        interval_data[i] = (below, cx, basis)
    for r in range(0, dim + 1):
        rank_r = [i for i in range(n) if poset.rank[i] == r]
        labels[r] = [
            (poset.elements[i], t)
            for i in rank_r
            for t in range(len(interval_data[i][2].representatives))
        ]
        prev = labels[r - 1]
        mat = [[0] * len(labels[r]) for _ in range(len(prev))]
        col = 0
        row_offset = {}
        off = 0
        if r >= 1:
            for j in [i for i in range(n) if poset.rank[i] == r - 1]:
                row_offset[j] = off
                off += len(interval_data[j][2].representatives)
        for i in rank_r:
            below, cx, basis = interval_data[i]
            local_to_global = [poset.index[x] for x in below.elements]
            for rep in basis.representatives:
                if r == 0:
                    mat[0][col] = 1  # boundary of the vertex [X] hits the empty simplex
                    col += 1
                    continue
                cone = {}
                for s_idx, coeff in enumerate(rep):
                    if not coeff:
                        continue
                    s = cx.simplices[r][s_idx]  # degree r-1 simplices of the interval
                    glob = tuple(local_to_global[t] for t in s) + (i,)
                    cone[glob] = cone.get(glob, 0) + coeff
                bdry = _boundary_global(cone)
                strips = {}
                rest_ok = True
                for s, c in bdry.items():
                    top = s[-1] if s else None
                    if top is not None and poset.rank[top] == r - 1:
                        strips.setdefault(top, {})[s[:-1]] = c
                    else:
                        rest_ok = all(poset.rank[t] <= r - 2 for t in s)
                        assert rest_ok, "boundary simplex crosses ranks unexpectedly"
                for j, chain in strips.items():
                    below_j, cx_j, basis_j = interval_data[j]
                    to_local = {poset.index[x]: t for t, x in enumerate(below_j.elements)}
                    vec = [0] * cx_j.n_simplices(r - 2)
                    for s, c in chain.items():
                        local = tuple(to_local[t] for t in s)
                        vec[cx_j.indexes[r - 1][local]] += c
                    coords = basis_j.coordinates(vec)
                    for t, val in enumerate(coords):
                        mat[row_offset[j] + t][col] = val
                col += 1
        boundaries[r] = mat
    return IntChainComplex(labels, boundaries, -1, dim)


def _mask_bits(mask: int):
    out = []
    while mask:
        j = (mask & -mask).bit_length() - 1
        out.append(j)
        mask &= mask - 1
    return out


def _boundary_global(chain: dict) -> dict:
    out = {}
    for s, c in chain.items():
        for drop in range(len(s)):
            face = s[:drop] + s[drop + 1 :]
            sign = -1 if drop % 2 else 1
            out[face] = out.get(face, 0) + sign * c
    return {s: c for s, c in out.items() if c}


def skeleton_quotient_ranks(poset: FinitePoset, r: int,
                            cap: int = DEFAULT_SIMPLEX_CAP) -> dict:
    """Ranks of the relative homology of |P_(<=r)| modulo |P_(<=r-1)|.

    The relative complex has a basis of simplices whose top vertex has rank
    exactly r; its homology realizes the wedge of suspended lower intervals.
    """
    keep = [i for i in range(len(poset.elements)) if poset.rank[i] <= r]
    sub = poset.subposet(keep)
    to_parent = {t: poset.index[x] for t, x in enumerate(sub.elements)}
    cx = OrderComplex(sub, cap)

    def is_relative(s):
        return bool(s) and poset.rank[to_parent[s[-1]]] == r

    rel = {}
    for k in range(0, cx.dim + 1):
        rel[k] = [s for s in cx.simplices[k + 1] if is_relative(s)]
    idx = {k: {s: i for i, s in enumerate(level)} for k, level in rel.items()}
    mats = {}
    for k in range(0, cx.dim + 1):
        rows = len(rel.get(k - 1, []))
        cols = len(rel.get(k, []))
        mat = [[0] * cols for _ in range(rows)]
        for s, j in idx[k].items():
            for drop in range(len(s)):
                face = s[:drop] + s[drop + 1 :]
                if face in idx.get(k - 1, {}):
                    mat[idx[k - 1][face]][j] += -1 if drop % 2 else 1
        mats[k] = mat
    out = {}
    for k in range(0, cx.dim + 1):
        nk = len(rel.get(k, []))
        rk = integer_rank(mats[k]) if mats[k] and mats[k][0] else 0
        rk1 = integer_rank(mats.get(k + 1, [])) if mats.get(k + 1) and mats[k + 1] and mats[k + 1][0] else 0
        out[k] = nk - rk - rk1
    return out
