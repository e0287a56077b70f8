"""Steinberg modules (top homology of the subspace buildings) with their
matrix-group actions, coinvariants, and the Kunneth consequence of the join
decomposition of the relative building."""

from __future__ import annotations

from .errors import NotAnAutomorphism
from .gf import GF
from .homology import (
    HomologyBasis,
    HomologyGroup,
    OrderComplex,
    SmithNormalForm,
    reduced_homology,
)
from .linalg import MatrixGF, Subspace
from .posets import FinitePoset, PosetMap, join_decomposition_map, relative_building, tits_building


class HomologyModuleWithAction:
    """Reduced homology of a poset of subspaces in one degree, together with
    the machinery to push group elements through it."""

    def __init__(self, poset: FinitePoset, degree: int, cap: int = 500_000):
        self.poset = poset
        self.degree = degree
        self.complex = OrderComplex(poset, cap)
        self.basis = HomologyBasis(
            self.complex.boundary_matrix(degree),
            self.complex.boundary_matrix(degree + 1),
            self.complex.n_simplices(degree),
        )

    @property
    def rank(self) -> int:
        return self.basis.group.betti

    @property
    def torsion(self) -> tuple:
        return self.basis.group.torsion

    def action_matrix(self, g: MatrixGF):
        """Integer matrix of g on the chosen homology basis."""
        if self.degree == -1:
            return [[1] * self.rank for _ in range(self.rank)] if self.rank else []
        perm = {}
        for w in self.poset.elements:
            img = w.apply(g)
            if img not in self.poset.index:
                raise NotAnAutomorphism(f"{g!r} does not preserve the poset")
            perm[self.poset.index[w]] = self.poset.index[img]
        if len(set(perm.values())) != len(perm):
            raise NotAnAutomorphism("matrix does not permute the poset")
        k = self.degree
        idx = self.complex.indexes[k + 1]
        cols = []
        for rep in self.basis.representatives:
            out = [0] * self.complex.n_simplices(k)
            for s_i, coeff in enumerate(rep):
                if not coeff:
                    continue
                s = self.complex.simplices[k + 1][s_i]
                image = tuple(perm[t] for t in s)
                out[idx[image]] += coeff
            cols.append(self.basis.coordinates(out))
        d = self.rank
        return [[cols[j][i] for j in range(d)] for i in range(d)]


def steinberg(field: GF, n: int, v0: Subspace | None = None,
              cap: int = 500_000) -> HomologyModuleWithAction:
    """St(V) = top homology of P(V), or St(V, V0) of the relative building.

    The degree is dim V - 2 (resp. dim V0 - 1); for one-dimensional V the
    building is empty and St(F^1) = Z in degree -1.
    """
    if v0 is None:
        poset = tits_building(field, n, cap)
        degree = n - 2
    else:
        poset = relative_building(field, n, v0, cap)
        degree = v0.dim - 1
    return HomologyModuleWithAction(poset, degree, cap)


def induced_homology_action(g: MatrixGF, module: HomologyModuleWithAction):
    return module.action_matrix(g)


def coinvariants(module: HomologyModuleWithAction, generators) -> HomologyGroup:
    """Cokernel of the stacked maps rho(g) - id over the generators."""
    d = module.rank
    if d == 0:
        return HomologyGroup(0)
    cols = []
    for g in generators:
        rho = module.action_matrix(g)
        for j in range(d):
            cols.append([rho[i][j] - (1 if i == j else 0) for i in range(d)])
    if not cols:
        return HomologyGroup(d)
    stacked = [[col[i] for col in cols] for i in range(d)]
    snf = SmithNormalForm(stacked, transforms=False)
    r = snf.rank
    return HomologyGroup(d - r, snf.torsion())


def coinvariants_of_matrices(rank: int, action_matrices) -> HomologyGroup:
    cols = []
    for rho in action_matrices:
        for j in range(rank):
            cols.append([rho[i][j] - (1 if i == j else 0) for i in range(rank)])
    if not cols:
        return HomologyGroup(rank)
    stacked = [[col[i] for col in cols] for i in range(rank)]
    snf = SmithNormalForm(stacked, transforms=False)
    return HomologyGroup(rank - snf.rank, snf.torsion())


def pushforward_matrix(phi: PosetMap, degree: int,
                       source: HomologyModuleWithAction,
                       target_complex: OrderComplex,
                       target_basis: HomologyBasis):
    """Matrix of the map induced by a poset map on homology in one degree.

    Simplices whose vertices collapse are sent to zero, as in any simplicial
    map of order complexes.
    """
    t_idx = target_complex.indexes[degree + 1]
    cols = []
    for rep in source.basis.representatives:
        out = [0] * target_complex.n_simplices(degree)
        for s_i, coeff in enumerate(rep):
            if not coeff:
                continue
            s = source.complex.simplices[degree + 1][s_i]
            image = tuple(target_complex.poset.index[phi(source.poset.elements[t])]
                          for t in s)
            if len(set(image)) < len(image):
                continue
            out[t_idx[image]] += coeff
        cols.append(target_basis.coordinates(out))
    rows = target_basis.group.betti
    return [[cols[j][i] for j in range(len(cols))] for i in range(rows)]


def kunneth_rank_check(field: GF, n: int, v0: Subspace, u: Subspace,
                       cap: int = 500_000) -> dict:
    """Verify rank St(V,V0) = rank St(V/U,V0/U) * rank St(V,U), that all
    three modules are torsion-free, and that the join-decomposition map is
    an isomorphism on top homology."""
    from .linalg import quotient_coordinates

    st = steinberg(field, n, v0, cap)
    proj, _ = quotient_coordinates(u)
    m = n - u.dim
    v0_down = Subspace.from_vectors(field, m, [proj.apply(b) for b in v0.basis])
    st_left = steinberg(field, m, v0_down, cap)
    st_right = steinberg(field, n, u, cap)
    phi, source, target = join_decomposition_map(field, n, v0, u, cap)
    degree = v0.dim - 1
    assert target.dim == degree, "join of the factors has the wrong dimension"
    t_cx = OrderComplex(target, cap)
    t_basis = HomologyBasis(
        t_cx.boundary_matrix(degree), t_cx.boundary_matrix(degree + 1),
        t_cx.n_simplices(degree),
    )
    mat = pushforward_matrix(phi, degree, st, t_cx, t_basis)
    iso = False
    if st.rank == t_basis.group.betti:
        if st.rank == 0:
            iso = True
        else:
            snf = SmithNormalForm([row[:] for row in mat], transforms=False)
            iso = snf.rank == st.rank and all(d == 1 for d in snf.invariant_factors())
    return {
        "rank": st.rank,
        "rank_left": st_left.rank,
        "rank_right": st_right.rank,
        "product_identity": st.rank == st_left.rank * st_right.rank,
        "torsion_free": not (st.torsion or st_left.torsion or st_right.torsion),
        "target_rank": t_basis.group.betti,
        "phi_is_iso_on_top": iso,
    }


def steinberg_rank_formula(n: int, q: int) -> int:
    """q^(n(n-1)/2), the rank of St(F_q^n)."""
    return q ** (n * (n - 1) // 2)


def top_homology_module(poset: FinitePoset, cap: int = 500_000) -> HomologyModuleWithAction:
    return HomologyModuleWithAction(poset, poset.dim, cap)


def sphericity_report(poset: FinitePoset, cap: int = 500_000) -> dict:
    groups = reduced_homology(poset, cap)
    top = groups.get(poset.dim, HomologyGroup(0))
    below_zero = all(g.is_zero() for k, g in groups.items() if k < poset.dim)
    return {
        "dim": poset.dim,
        "top": top.serialize(),
        "spherical": below_zero and top.is_free(),
    }
