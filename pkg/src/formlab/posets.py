"""Finite graded posets and the subspace/isotropic buildings that live on them.

Order relations are stored as per-element bitmasks, so interval extraction
and gradedness checks are cheap.  Seven building flavors are provided:

    P(V)        proper nonzero subspaces of F^n
    Pbar(V)     nonzero subspaces (V included)
    P(V,V0)     W < V with W + V0 = V
    Pbar(V,V0)  W <= V with W + V0 = V
    PbarT(V,V0) W < V with W & V0 = 0, ordered by reversed inclusion
    Pi(E)       isotropic W with R(E) < W < E
    Pi(E,U)     additionally W + U^perp = E
"""

from __future__ import annotations

from .errors import CapExceeded, NotGraded, NotInBuilding
from .forms import FormedSpace, induced_quotient_form
from .gf import GF
from .linalg import MatrixGF, Subspace, all_subspaces, quotient_coordinates


class _Sentinel:
    def __init__(self, name):
        self.name = name

    def __repr__(self):
        return self.name


NEG_INF = _Sentinel("-inf")
POS_INF = _Sentinel("+inf")


class FinitePoset:
    """Explicit finite poset; asserted graded at construction."""

    def __init__(self, elements, less, check_graded: bool = True):
        self.elements = tuple(elements)
        self.index = {x: i for i, x in enumerate(self.elements)}
        if len(self.index) != len(self.elements):
            raise ValueError("duplicate poset elements")
        n = len(self.elements)
        above = [0] * n
        below = [0] * n
        for i, x in enumerate(self.elements):
            for j, y in enumerate(self.elements):
                if i != j and less(x, y):
                    above[i] |= 1 << j
                    below[j] |= 1 << i
        self.above_mask = tuple(above)
        self.below_mask = tuple(below)
        self._assert_partial_order()
        self.rank = self._compute_ranks()
        self.dim = max(self.rank) if n else -1
        if check_graded:
            self._assert_graded()

    @classmethod
    def from_masks(cls, elements, above_mask, check_graded: bool = True):
        out = object.__new__(cls)
        out.elements = tuple(elements)
        out.index = {x: i for i, x in enumerate(out.elements)}
        n = len(out.elements)
        below = [0] * n
        for i in range(n):
            m = above_mask[i]
            while m:
                j = (m & -m).bit_length() - 1
                below[j] |= 1 << i
                m &= m - 1
        out.above_mask = tuple(above_mask)
        out.below_mask = tuple(below)
        out._assert_partial_order()
        out.rank = out._compute_ranks()
        out.dim = max(out.rank) if n else -1
        if check_graded:
            out._assert_graded()
        return out

    # -- structure ----------------------------------------------------------

    def _assert_partial_order(self):
        n = len(self.elements)
        for i in range(n):
            if (self.above_mask[i] >> i) & 1:
                raise ValueError("relation is not irreflexive")
            m = self.above_mask[i]
            while m:
                j = (m & -m).bit_length() - 1
                if self.above_mask[j] & ~self.above_mask[i]:
                    raise ValueError("relation is not transitive")
                m &= m - 1

    def _compute_ranks(self):
        n = len(self.elements)
        order = sorted(range(n), key=lambda i: self.below_mask[i].bit_count())
        rank = [0] * n
        for i in order:
            m = self.below_mask[i]
            best = -1
            while m:
                j = (m & -m).bit_length() - 1
                if rank[j] > best:
                    best = rank[j]
                m &= m - 1
            rank[i] = best + 1
        return tuple(rank)

    def _assert_graded(self):
        for i, j in self.covers():
            if self.rank[j] != self.rank[i] + 1:
                raise NotGraded(
                    f"cover {self.elements[i]!r} < {self.elements[j]!r} skips a rank"
                )
        for i in range(len(self.elements)):
            if not self.above_mask[i] and self.rank[i] != self.dim:
                raise NotGraded(f"maximal element {self.elements[i]!r} has low rank")

    def covers(self):
        n = len(self.elements)
        out = []
        for i in range(n):
            m = self.above_mask[i]
            while m:
                j = (m & -m).bit_length() - 1
                if not (self.above_mask[i] & self.below_mask[j]):
                    out.append((i, j))
                m &= m - 1
        return out

    # -- queries -------------------------------------------------------------

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def __contains__(self, x):
        return x in self.index

    def less(self, x, y) -> bool:
        return bool((self.above_mask[self.index[x]] >> self.index[y]) & 1)

    def leq(self, x, y) -> bool:
        return x == y or self.less(x, y)

    def rank_of(self, x) -> int:
        return self.rank[self.index[x]]

    def elements_of_rank(self, r):
        return [x for i, x in enumerate(self.elements) if self.rank[i] == r]

    def maximal_elements(self):
        return [x for i, x in enumerate(self.elements) if not self.above_mask[i]]

    def minimal_elements(self):
        return [x for i, x in enumerate(self.elements) if not self.below_mask[i]]

    # -- derived posets --------------------------------------------------------

    def subposet(self, keep) -> "FinitePoset":
        keep = [i if isinstance(i, int) else self.index[i] for i in keep]
        elements = [self.elements[i] for i in keep]
        pos = {old: new for new, old in enumerate(keep)}
        above = []
        for i in keep:
            m = self.above_mask[i]
            acc = 0
            while m:
                j = (m & -m).bit_length() - 1
                if j in pos:
                    acc |= 1 << pos[j]
                m &= m - 1
            above.append(acc)
        return FinitePoset.from_masks(elements, above)

    def interval(self, x, y) -> "FinitePoset":
        """The open interval (x, y); use NEG_INF / POS_INF for the ends."""
        n = len(self.elements)
        if x is NEG_INF:
            lower = (1 << n) - 1
        else:
            lower = self.above_mask[self.index[x]]
        if y is POS_INF:
            upper = (1 << n) - 1
        else:
            upper = self.below_mask[self.index[y]]
        m = lower & upper
        keep = []
        while m:
            j = (m & -m).bit_length() - 1
            keep.append(j)
            m &= m - 1
        return self.subposet(keep)

    def dual(self) -> "FinitePoset":
        return FinitePoset.from_masks(self.elements, self.below_mask)

    def to_json(self):
        def ser(x):
            if isinstance(x, Subspace):
                return x.serialize()
            if isinstance(x, tuple) and len(x) == 2 and isinstance(x[1], Subspace):
                return [x[0], x[1].serialize()]
            return repr(x)

        return {
            "elements": [ser(x) for x in self.elements],
            "rank": list(self.rank),
            "dim": self.dim,
            "covers": self.covers(),
        }

    def __repr__(self):
        return f"FinitePoset({len(self.elements)} elements, dim {self.dim})"


class PosetMap:
    """Order-preserving map of posets, stored elementwise."""

    def __init__(self, source: FinitePoset, target: FinitePoset, assignment):
        self.source = source
        self.target = target
        if callable(assignment):
            assignment = {x: assignment(x) for x in source.elements}
        self.assignment = dict(assignment)
        for x in source.elements:
            if self.assignment[x] not in target.index:
                raise ValueError(f"image of {x!r} is not in the target poset")
        for x in source.elements:
            for y in source.elements:
                if source.less(x, y) and not target.leq(self.assignment[x], self.assignment[y]):
                    raise ValueError("assignment is not order-preserving")

    def __call__(self, x):
        return self.assignment[x]

    def is_bijective(self) -> bool:
        return len(set(self.assignment.values())) == len(self.target.elements)

    def is_isomorphism(self) -> bool:
        if not self.is_bijective():
            return False
        inv = {v: k for k, v in self.assignment.items()}
        for x in self.target.elements:
            for y in self.target.elements:
                if self.target.less(x, y) and not self.source.less(inv[x], inv[y]):
                    return False
        return True

    def is_rank_preserving(self) -> bool:
        return all(
            self.source.rank_of(x) == self.target.rank_of(self.assignment[x])
            for x in self.source.elements
        )


def poset_from_subspaces(subs) -> FinitePoset:
    return FinitePoset(subs, lambda a, b: a < b)


# ---------------------------------------------------------------------------
# building constructors


def tits_building(field: GF, n: int, cap: int = 200_000) -> FinitePoset:
    """P(V): nontrivial proper subspaces of F^n."""
    subs = [w for w in all_subspaces(field, n, cap) if 0 < w.dim < n]
    return poset_from_subspaces(subs)


def tits_building_aug(field: GF, n: int, cap: int = 200_000) -> FinitePoset:
    """Pbar(V): nonzero subspaces, including V itself."""
    subs = [w for w in all_subspaces(field, n, cap) if w.dim > 0]
    return poset_from_subspaces(subs)


def relative_building(field: GF, n: int, v0: Subspace, cap: int = 200_000) -> FinitePoset:
    """P(V, V0): W < V with W + V0 = V."""
    subs = [
        w
        for w in all_subspaces(field, n, cap)
        if w.dim < n and (w + v0).dim == n
    ]
    return poset_from_subspaces(subs)


def relative_building_aug(field: GF, n: int, v0: Subspace, cap: int = 200_000) -> FinitePoset:
    """Pbar(V, V0): W <= V with W + V0 = V."""
    subs = [w for w in all_subspaces(field, n, cap) if (w + v0).dim == n]
    return poset_from_subspaces(subs)


def transpose_building_aug(field: GF, n: int, v0: Subspace, cap: int = 200_000) -> FinitePoset:
    """PbarT(V, V0): W < V with W meeting V0 trivially, reversed inclusion."""
    subs = [
        w
        for w in all_subspaces(field, n, cap)
        if w.dim < n and (w & v0).dim == 0
    ]
    return FinitePoset(subs, lambda a, b: b < a)


def isotropic_building(e: FormedSpace, cap: int = 200_000) -> FinitePoset:
    """Pi(E): isotropic subspaces strictly between the radical and E."""
    rad = e.radical()
    subs = [
        w
        for w in all_subspaces(e.field, e.n, cap)
        if rad.dim < w.dim < e.n and rad <= w and e.is_isotropic(w)
    ]
    return poset_from_subspaces(subs)


def relative_isotropic_building(e: FormedSpace, u: Subspace, cap: int = 200_000) -> FinitePoset:
    """Pi(E, U): members of Pi(E) with W + U^perp = E."""
    rad = e.radical()
    if not (e.is_isotropic(u) and rad.dim < u.dim < e.n and rad <= u):
        raise NotInBuilding("U must itself be an element of Pi(E)")
    uperp = e.perp(u)
    subs = [
        w
        for w in all_subspaces(e.field, e.n, cap)
        if rad.dim < w.dim < e.n
        and rad <= w
        and (w + uperp).dim == e.n
        and e.is_isotropic(w)
    ]
    return poset_from_subspaces(subs)


def build_building(kind: str, *, field=None, n=None, v0=None, e=None, u=None,
                   cap: int = 200_000) -> FinitePoset:
    """Dispatcher over the seven building flavors."""
    if kind == "P(V)":
        return tits_building(field, n, cap)
    if kind == "Pbar(V)":
        return tits_building_aug(field, n, cap)
    if kind == "P(V,V0)":
        return relative_building(field, n, v0, cap)
    if kind == "Pbar(V,V0)":
        return relative_building_aug(field, n, v0, cap)
    if kind == "PbarT(V,V0)":
        return transpose_building_aug(field, n, v0, cap)
    if kind == "Pi(E)":
        return isotropic_building(e, cap)
    if kind == "Pi(E,U)":
        return relative_isotropic_building(e, u, cap)
    raise ValueError(f"unknown building kind {kind!r}")


# ---------------------------------------------------------------------------
# joins and the join decomposition of the relative building


def join(p: FinitePoset, q: FinitePoset) -> FinitePoset:
    """P * Q: disjoint union with everything in P below everything in Q."""
    elements = [(0, x) for x in p.elements] + [(1, y) for y in q.elements]
    np_ = len(p.elements)
    above = []
    q_all = ((1 << len(q.elements)) - 1) << np_
    for i in range(np_):
        above.append(p.above_mask[i] | q_all)
    for j in range(len(q.elements)):
        above.append(q.above_mask[j] << np_)
    return FinitePoset.from_masks(elements, above)


def join_decomposition_map(field: GF, n: int, v0: Subspace, u: Subspace,
                           cap: int = 200_000):
    """The map P(V,V0) -> P(V/U, V0/U) * P(V,U) sending W to W/U when
    W + U < V and to W itself otherwise.

    Returns (map, source, target); the quotient is taken in coordinates
    given by the non-pivot positions of U.
    """
    if not u <= v0:
        raise NotInBuilding("U must be contained in V0")
    source = relative_building(field, n, v0, cap)
    proj, _sect = quotient_coordinates(u)
    m = n - u.dim

    def down(w: Subspace) -> Subspace:
        return Subspace.from_vectors(field, m, [proj.apply(b) for b in w.basis])

    left = relative_building(field, m, down(v0), cap)
    right = relative_building(field, n, u, cap)
    target = join(left, right)

    def phi(w: Subspace):
        if (w + u).dim < n:
            return (0, down(w))
        return (1, w)

    return PosetMap(source, target, phi), source, target


# ---------------------------------------------------------------------------
# stabilization inclusions and structural isomorphisms


def pad_subspace(w: Subspace, extra: int) -> Subspace:
    """Include F^n into F^(n+extra) by appending zero coordinates."""
    return Subspace(
        w.field,
        w.ambient_dim + extra,
        [tuple(b) + (0,) * extra for b in w.basis],
        w.pivots,
    )


def stabilization_poset_map(p: FinitePoset, q: FinitePoset, extra: int) -> PosetMap:
    """The inclusion of buildings induced by V -> V + F^extra (or E -> E + H)."""
    return PosetMap(p, q, lambda w: pad_subspace(w, extra))


def subspace_in_coordinates(w: Subspace, frame: Subspace) -> Subspace:
    """Rewrite w <= span(frame) in the coordinates of the frame's basis."""
    coords = [frame.coordinates_of(b) for b in w.basis]
    if any(c is None for c in coords):
        raise ValueError("subspace is not contained in the frame")
    return Subspace.from_vectors(w.field, frame.dim, coords)


def lower_interval_iso_gl(p: FinitePoset, w: Subspace) -> PosetMap:
    """P(V)_{<W} = P(W) (and the same shape for the augmented flavors)."""
    frame = w
    source = p.interval(NEG_INF, w)
    target = tits_building(w.field, w.dim)
    return PosetMap(source, target, lambda x: subspace_in_coordinates(x, frame))


def upper_interval_iso_gl(p: FinitePoset, w: Subspace) -> PosetMap:
    """P(V)_{>W} = P(V/W) via quotient coordinates."""
    field = w.field
    proj, _ = quotient_coordinates(w)
    m = w.ambient_dim - w.dim
    source = p.interval(w, POS_INF)

    def down(x: Subspace) -> Subspace:
        return Subspace.from_vectors(field, m, [proj.apply(b) for b in x.basis])

    target = tits_building(field, m)
    return PosetMap(source, target, down)


def upper_interval_iso_isotropic(e: FormedSpace, p: FinitePoset, w: Subspace,
                                 cap: int = 200_000) -> PosetMap:
    """Pi(E)_{>W} = Pi(W^perp) with the restricted form."""
    perp = e.perp(w)
    restr = e.restrict(perp)
    source = p.interval(w, POS_INF)
    target = isotropic_building(restr, cap)
    return PosetMap(
        source, target, lambda x: subspace_in_coordinates(x, perp)
    )


def radical_quotient_iso(e: FormedSpace, cap: int = 200_000):
    """Pi(E) = Pi(E/R(E)) through the quotient projection."""
    rad = e.radical()
    qf = induced_quotient_form(e, rad)
    assert qf.perp.dim == e.n, "radical must be orthogonal to everything"
    source = isotropic_building(e, cap)
    target = isotropic_building(qf.space, cap)
    return PosetMap(source, target, qf.project_subspace), qf


def annihilator_map(field: GF, n: int, v0: Subspace, cap: int = 200_000) -> PosetMap:
    """PbarT(V,V0) (reversed order) = Pbar(V*, Ann(V0)), W -> Ann(W)."""
    source = transpose_building_aug(field, n, v0, cap)
    target = relative_building_aug(field, n, v0.annihilator(), cap)
    return PosetMap(source, target, lambda w: w.annihilator())
