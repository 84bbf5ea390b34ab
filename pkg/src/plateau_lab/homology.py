"""Homology of finite complexes over Z, Z/m and Q via integer Smith normal form."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

from .complex_core import AnyComplex, chain_complex, chain_vector

__all__ = [
    "CoefficientGroup",
    "Integers",
    "Rationals",
    "IntegersMod",
    "SmithForm",
    "smith_normal_form",
    "smith_decomposition",
    "HomologyPresentation",
    "homology",
    "is_boundary",
    "InducedHomMap",
    "induced_map",
    "chain_map_induced",
    "SubgroupSpec",
    "is_zero_on_subgroup",
    "is_injective",
    "mayer_vietoris_check",
    "integer_kernel",
    "is_solvable",
]


@dataclass(frozen=True)
class CoefficientGroup:
    """Coefficient group: ``"Z"``, ``"Q"`` or ``"Z/m"`` with ``m >= 2``."""

    tag: str
    m: int = 0

    def __post_init__(self):
        if self.tag not in ("Z", "Q", "Z/m"):
            raise ValueError(f"unknown coefficient tag {self.tag!r}")
        if self.tag == "Z/m" and self.m < 2:
            raise ValueError("modulus must be >= 2")
        if self.tag != "Z/m" and self.m != 0:
            raise ValueError("modulus only applies to Z/m")

    @classmethod
    def parse(cls, text: str) -> "CoefficientGroup":
        t = text.strip().replace(" ", "")
        if t in ("Z", "Integers"):
            return Integers
        if t in ("Q", "Rationals"):
            return Rationals
        for prefix in ("Z/", "IntegersMod(", "Z_"):
            if t.startswith(prefix):
                return IntegersMod(int(t[len(prefix):].rstrip(")")))
        raise ValueError(f"cannot parse coefficient group {text!r}")

    def __str__(self) -> str:
        return f"Z/{self.m}" if self.tag == "Z/m" else self.tag


Integers = CoefficientGroup("Z")
Rationals = CoefficientGroup("Q")


def IntegersMod(m: int) -> CoefficientGroup:
    return CoefficientGroup("Z/m", int(m))


# --- Smith normal form ----------------------------------------------------------


@dataclass
class SmithForm:
    """``U @ M @ V = D`` with the inverses of ``U`` and ``V`` tracked as well."""

    U: list
    D: list
    V: list
    Uinv: list
    Vinv: list
    diagonal: list

    @property
    def rank(self) -> int:
        return len(self.diagonal)


def _identity(n: int) -> list:
    return [[1 if i == j else 0 for j in range(n)] for i in range(n)]


def smith_decomposition(M: Sequence[Sequence[int]], *, left: bool = True, right: bool = True) -> SmithForm:
    """Smith normal form by minimal-pivot elimination over the integers.

    ``left``/``right`` switch tracking of ``U, U^-1`` and ``V, V^-1``; untracked
    transforms are returned as ``None``.
    """
    A = [[int(x) for x in row] for row in M]
    m = len(A)
    n = len(A[0]) if m else 0
    if any(len(r) != n for r in A):
        raise ValueError("ragged matrix")
    U = _identity(m) if left else None
    Ui = _identity(m) if left else None
    V = _identity(n) if right else None
    Vi = _identity(n) if right else None

    def swap_rows(i, j):
        if i == j:
            return
        A[i], A[j] = A[j], A[i]
        if left:
            U[i], U[j] = U[j], U[i]
            for row in Ui:
                row[i], row[j] = row[j], row[i]

    def swap_cols(i, j):
        if i == j:
            return
        for row in A:
            row[i], row[j] = row[j], row[i]
        if right:
            for row in V:
                row[i], row[j] = row[j], row[i]
            Vi[i], Vi[j] = Vi[j], Vi[i]

    def add_row(dst, src, q):
        # row dst += q * row src
        rs, rd = A[src], A[dst]
        for k in range(n):
            if rs[k]:
                rd[k] += q * rs[k]
        if left:
            us, ud = U[src], U[dst]
            for k in range(m):
                if us[k]:
                    ud[k] += q * us[k]
            for row in Ui:
                if row[dst]:
                    row[src] -= q * row[dst]

    def add_col(dst, src, q):
        # col dst += q * col src
        for row in A:
            if row[src]:
                row[dst] += q * row[src]
        if right:
            for row in V:
                if row[src]:
                    row[dst] += q * row[src]
            vd, vs = Vi[dst], Vi[src]
            for k in range(n):
                if vd[k]:
                    vs[k] -= q * vd[k]

    diag = []
    t = 0
    while t < min(m, n):
        best = None
        for i in range(t, m):
            row = A[i]
            for j in range(t, n):
                v = row[j]
                if v and (best is None or abs(v) < best[0]):
                    best = (abs(v), i, j)
                    if best[0] == 1:
                        break
            if best is not None and best[0] == 1:
                break
        if best is None:
            break
        swap_rows(t, best[1])
        swap_cols(t, best[2])
        while True:
            p = A[t][t]
            clean = True
            for i in range(t + 1, m):
                if A[i][t]:
                    add_row(i, t, -(A[i][t] // p))
                    clean = clean and A[i][t] == 0
            for j in range(t + 1, n):
                if A[t][j]:
                    add_col(j, t, -(A[t][j] // p))
                    clean = clean and A[t][j] == 0
            if not clean:
                cand = [(abs(A[i][t]), i, t) for i in range(t + 1, m) if A[i][t]]
                cand += [(abs(A[t][j]), t, j) for j in range(t + 1, n) if A[t][j]]
                _, i, j = min(cand)
                swap_rows(t, i)
                swap_cols(t, j)
                continue
            bad = None
            if abs(p) == 1:
                break
            for i in range(t + 1, m):
                row = A[i]
                for j in range(t + 1, n):
                    if row[j] % p:
                        bad = i
                        break
                if bad is not None:
                    break
            if bad is None:
                break
            add_row(t, bad, 1)
        if A[t][t] < 0:
            A[t][t] = -A[t][t]
            if left:
                U[t] = [-x for x in U[t]]
                for row in Ui:
                    row[t] = -row[t]
        diag.append(A[t][t])
        t += 1
    return SmithForm(U, A, V, Ui, Vi, diag)


def smith_normal_form(M: Sequence[Sequence[int]]) -> tuple[list, list, list]:
    """Return ``(U, D, V)`` with ``U M V = D`` in Smith normal form."""
    s = smith_decomposition(M)
    return s.U, s.D, s.V


def matmul(A: Sequence[Sequence], B: Sequence[Sequence]) -> list:
    if not A:
        return []
    inner = len(B)
    cols = len(B[0]) if inner else 0
    out = []
    for row in A:
        acc = [0] * cols
        for k in range(inner):
            a = row[k]
            if a:
                bk = B[k]
                for j in range(cols):
                    if bk[j]:
                        acc[j] += a * bk[j]
        out.append(acc)
    return out


def matvec(A: Sequence[Sequence], x: Sequence) -> list:
    return [sum(a * b for a, b in zip(row, x) if a and b) for row in A]


def _column(A, j) -> list:
    return [row[j] for row in A]


def integer_kernel(A: Sequence[Sequence[int]], ncols: int | None = None) -> list[list[int]]:
    """Z-basis of ``{x in Z^c : A x = 0}``."""
    c = len(A[0]) if A else (ncols or 0)
    if not A:
        return [[1 if i == j else 0 for i in range(c)] for j in range(c)]
    s = smith_decomposition(A, left=False)
    return [_column(s.V, j) for j in range(s.rank, c)]


def is_solvable(A: Sequence[Sequence[int]], b: Sequence[int], ring: str = "Z") -> bool:
    """Decide whether ``A x = b`` has a solution with ``x`` in Z^c (or Q^c)."""
    if not A:
        return True
    if all(v == 0 for v in b):
        return True
    s = smith_decomposition(A, right=False)
    y = matvec(s.U, b)
    for i, v in enumerate(y):
        if i < s.rank:
            if ring == "Z" and v % s.diagonal[i]:
                return False
        elif v:
            return False
    return True


# --- Homology presentations ------------------------------------------------------


@dataclass(eq=False)
class HomologyPresentation:
    """H_k as a direct sum of cyclic groups, with explicit generating cycles.

    ``orders[i]`` is the order of generator ``i`` (0 means infinite).  Over Z/m
    a generator of order ``m`` counts toward ``free_rank``; over Q all
    generators are free.
    """

    k: int
    group: CoefficientGroup
    orders: tuple
    generators: tuple
    cells: tuple
    _Vinv: list = field(repr=False, default=None)
    _lattice: tuple = field(repr=False, default=())
    _scale_of: dict = field(repr=False, default=None)
    _rank_dk: int = field(repr=False, default=0)
    _Urel: list = field(repr=False, default=None)
    _gen_rows: tuple = field(repr=False, default=())
    _dk: list = field(repr=False, default=None)

    @property
    def free_rank(self) -> int:
        if self.group.tag == "Z/m":
            return sum(1 for o in self.orders if o == self.group.m)
        return sum(1 for o in self.orders if o == 0)

    @property
    def torsion(self) -> list[int]:
        if self.group.tag == "Z/m":
            return [o for o in self.orders if o != self.group.m]
        return [o for o in self.orders if o != 0]

    @property
    def rank(self) -> int:
        return len(self.orders)

    def is_trivial(self) -> bool:
        return not self.orders

    def group_string(self) -> str:
        parts = []
        b = self.free_rank
        if b:
            base = {"Z": "Z", "Q": "Q"}.get(self.group.tag, f"(Z/{self.group.m})")
            parts.append(f"{base}^{b}")
        parts += [f"Z/{d}" for d in self.torsion]
        return " + ".join(parts) if parts else "0"

    def _reduce(self, coords: Sequence) -> tuple:
        out = []
        for c, o in zip(coords, self.orders):
            out.append(c % o if o else c)
        return tuple(out)

    def coordinates(self, chain) -> tuple:
        """Coordinates of the class of a k-cycle in terms of ``generators``."""
        vec = chain if not isinstance(chain, dict) else self._dense(chain)
        if len(vec) != len(self.cells):
            raise ValueError(f"chain has length {len(vec)}, expected {len(self.cells)}")
        if self.group.tag == "Q":
            vec = [Fraction(x) for x in vec]
            den = math.lcm(*[x.denominator for x in vec]) if vec else 1
            ivec = [int(x * den) for x in vec]
        else:
            den, ivec = 1, [int(x) for x in vec]
        if self.group.tag == "Z/m":
            ivec = [x % self.group.m for x in ivec]
        y = matvec(self._Vinv, ivec) if self._Vinv is not None else list(ivec)
        for i in range(self._rank_dk):
            if self.group.tag == "Z/m":
                if y[i] % self._scale_of[i]:
                    raise ValueError("chain is not a cycle")
            elif y[i]:
                raise ValueError("chain is not a cycle")
        w = [y[i] // self._scale_of[i] for i in self._lattice]
        u = matvec(self._Urel, w) if self._Urel is not None else w
        coords = [u[i] for i in self._gen_rows]
        if self.group.tag == "Q":
            return tuple(Fraction(c, den) for c in coords)
        return self._reduce(coords)

    def _dense(self, chain: dict) -> list:
        idx = {c: i for i, c in enumerate(self.cells)}
        vec = [0] * len(self.cells)
        for c, v in chain.items():
            if c not in idx:
                raise KeyError(f"{c} is not a {self.k}-cell")
            vec[idx[c]] += v
        return vec

    def is_zero(self, coords: Sequence) -> bool:
        if self.group.tag == "Q":
            return all(c == 0 for c in coords)
        return all(c == 0 for c in self._reduce(coords))

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "group": self.group_string(),
            "coefficients": str(self.group),
            "free_rank": self.free_rank,
            "torsion": self.torsion,
            "orders": list(self.orders),
            "generators": [list(g) for g in self.generators],
        }


def _boundary(K: AnyComplex, k: int) -> tuple[list, int, int]:
    cc = chain_complex(K)
    rows = cc.size(k - 1) if k >= 1 else 0
    cols = cc.size(k)
    if k >= 1 and k < len(cc.boundary):
        return cc.boundary[k], rows, cols
    return [[0] * cols for _ in range(rows)], rows, cols


def homology(K: AnyComplex, k: int, G: CoefficientGroup = Integers) -> HomologyPresentation:
    """Presentation of H_k(K; G) (unreduced)."""
    if k < 0:
        raise ValueError("negative degree")
    cache = K.__dict__.setdefault("_homology_cache", {})
    if (k, G) in cache:
        return cache[(k, G)]
    cells = tuple(K.cells_of_dim(k))
    nk = len(cells)
    dk, rows_k, _ = _boundary(K, k)
    dk1, _, cols_k1 = _boundary(K, k + 1)

    if rows_k:
        s = smith_decomposition(dk, left=False)
        V, Vinv, diag = s.V, s.Vinv, s.diagonal
    else:
        V, Vinv, diag = _identity(nk), _identity(nk), []
    r = len(diag)
    modular = G.tag == "Z/m"
    m = G.m
    if modular:
        lattice = list(range(nk))
        scales = [m // math.gcd(diag[i], m) if i < r else 1 for i in range(nk)]
    else:
        lattice = list(range(r, nk))
        scales = [1] * len(lattice)
    scale_of = dict(zip(lattice, scales))

    # relations: boundaries of (k+1)-cells, plus m * Z^nk when modular
    rel_cols = []
    for j in range(cols_k1):
        col = _column(dk1, j)
        if any(col):
            y = matvec(Vinv, col)
            rel_cols.append([y[i] // scale_of[i] for i in lattice])
    if modular:
        for pos, i in enumerate(lattice):
            g = math.gcd(diag[i], m) if i < r else m
            col = [0] * len(lattice)
            col[pos] = g
            rel_cols.append(col)
    w = len(lattice)
    R = [[c[i] for c in rel_cols] for i in range(w)]
    if rel_cols and w:
        sr = smith_decomposition(R, right=False)
        Urel, Urel_inv = sr.U, sr.Uinv
        rel_diag = sr.diagonal
    else:
        Urel, Urel_inv, rel_diag = _identity(w), _identity(w), []
    orders = [rel_diag[i] if i < len(rel_diag) else 0 for i in range(w)]
    keep = [i for i, o in enumerate(orders) if o != 1 and (G.tag != "Q" or o == 0)]

    gens = []
    for i in keep:
        x = _column(Urel_inv, i)
        chain = [0] * nk
        for pos, li in enumerate(lattice):
            coef = x[pos] * scale_of[li]
            if coef:
                for row in range(nk):
                    if V[row][li]:
                        chain[row] += coef * V[row][li]
        if modular:
            chain = [c % m for c in chain]
        gens.append(tuple(chain))
    pres = HomologyPresentation(
        k=k,
        group=G,
        orders=tuple(orders[i] for i in keep),
        generators=tuple(gens),
        cells=cells,
        _Vinv=Vinv,
        _lattice=tuple(lattice),
        _scale_of=scale_of,
        _rank_dk=r,
        _Urel=Urel,
        _gen_rows=tuple(keep),
        _dk=dk,
    )
    cache[(k, G)] = pres
    return pres


def is_boundary(K: AnyComplex, k: int, G: CoefficientGroup, chain) -> bool:
    """Exact test whether a k-chain is a boundary over ``G`` (independent of presentations)."""
    vec = chain_vector(K, k, chain) if isinstance(chain, dict) else list(chain)
    dk1, rows, cols = _boundary(K, k + 1)
    if G.tag == "Q":
        den = math.lcm(*[Fraction(x).denominator for x in vec]) if vec else 1
        vec = [int(Fraction(x) * den) for x in vec]
        return is_solvable(dk1, vec, "Q") if cols else not any(vec)
    if G.tag == "Z/m":
        m = G.m
        vec = [int(x) % m for x in vec]
        A = [list(row) + [m if i == j else 0 for j in range(rows)] for i, row in enumerate(dk1)]
        if not cols:
            A = [[m if i == j else 0 for j in range(rows)] for i in range(rows)]
        return is_solvable(A, vec, "Z")
    return is_solvable(dk1, vec, "Z") if cols else not any(vec)


# --- induced maps ------------------------------------------------------------------


@dataclass
class InducedHomMap:
    """Matrix of a homomorphism between two presentations (columns = source generators)."""

    source: HomologyPresentation
    target: HomologyPresentation
    matrix: list

    def apply(self, coords: Sequence) -> tuple:
        if len(coords) != self.source.rank:
            raise ValueError("coordinate vector has wrong length")
        img = [sum(row[j] * coords[j] for j in range(len(coords))) for row in self.matrix]
        return self.target._reduce(img) if self.target.group.tag != "Q" else tuple(img)

    def compose(self, first: "InducedHomMap") -> "InducedHomMap":
        """``self ∘ first``."""
        prod = matmul(self.matrix, first.matrix) if self.matrix and first.matrix else [
            [0] * first.source.rank for _ in range(self.target.rank)
        ]
        if self.target.group.tag != "Q":
            prod = [[v % o if o else v for v in row] for row, o in zip(prod, self.target.orders)]
        return InducedHomMap(first.source, self.target, prod)


def chain_map_induced(
    K_src: AnyComplex,
    K_tgt: AnyComplex,
    k: int,
    G: CoefficientGroup,
    chain_map: Callable[[dict], dict],
    verify: bool = True,
) -> InducedHomMap:
    """Induced map of an arbitrary chain map given on chains as ``dict -> dict``."""
    src = homology(K_src, k, G)
    tgt = homology(K_tgt, k, G)
    cols = []
    for gen in src.generators:
        chain = {c: v for c, v in zip(src.cells, gen) if v}
        image = chain_map(chain)
        vec = chain_vector(K_tgt, k, image)
        coords = tgt.coordinates(vec)
        if verify:
            diff = list(vec)
            for coef, tg in zip(coords, tgt.generators):
                for i, v in enumerate(tg):
                    diff[i] -= coef * v
            if not is_boundary(K_tgt, k, G, diff):
                raise ArithmeticError("induced map check failed: difference is not a boundary")
        cols.append(list(coords))
    matrix = [[cols[j][i] for j in range(len(cols))] for i in range(tgt.rank)]
    return InducedHomMap(src, tgt, matrix)


def induced_map(K_sub: AnyComplex, K_sup: AnyComplex, k: int, G: CoefficientGroup = Integers) -> InducedHomMap:
    """Map H_k(K_sub) -> H_k(K_sup) induced by inclusion."""
    if not K_sub.is_subcomplex_of(K_sup):
        raise ValueError("inclusion violated: source is not a subcomplex of target")
    return chain_map_induced(K_sub, K_sup, k, G, lambda c: c)


@dataclass
class SubgroupSpec:
    """Subgroup given by generators in presentation coordinates."""

    generators: list

    @classmethod
    def whole(cls, pres: HomologyPresentation) -> "SubgroupSpec":
        return cls([[1 if i == j else 0 for i in range(pres.rank)] for j in range(pres.rank)])

    @classmethod
    def from_cycles(cls, pres: HomologyPresentation, cycles: Sequence) -> "SubgroupSpec":
        gens = []
        for idx, c in enumerate(cycles):
            try:
                gens.append(list(pres.coordinates(c)))
            except ValueError as exc:
                raise ValueError(f"L[{idx}] is not a cycle") from exc
        return cls(gens)


def is_injective(f: InducedHomMap) -> bool:
    """Exact injectivity test for a map between presentations."""
    src, tgt = f.source, f.target
    ns = src.rank
    if ns == 0:
        return True
    if src.group.tag == "Q":
        if tgt.rank == 0:
            return False
        return not integer_kernel([_integral_q(row) for row in f.matrix], ns)
    cols = [[f.matrix[i][j] for i in range(tgt.rank)] for j in range(ns)] + _relation_block(tgt)
    if tgt.rank == 0:
        kernel = [[1 if i == j else 0 for i in range(ns)] for j in range(ns)]
    else:
        A = [[c[i] for c in cols] for i in range(tgt.rank)]
        kernel = [v[:ns] for v in integer_kernel(A)]
    for x in kernel:
        for xi, o in zip(x, src.orders):
            if (o == 0 and xi != 0) or (o and xi % o):
                return False
    return True


def is_zero_on_subgroup(f: InducedHomMap, L: SubgroupSpec) -> bool:
    for g in L.generators:
        if len(g) != f.source.rank:
            raise ValueError(f"subgroup generator has length {len(g)}, expected {f.source.rank}")
        if not f.target.is_zero(f.apply(g)):
            return False
    return True


# --- exactness -----------------------------------------------------------------------


def _relation_block(p: HomologyPresentation) -> list[list[int]]:
    """Columns ``order_i e_i`` for the finite-order generators (skipped over Q)."""
    if p.group.tag == "Q":
        return []
    cols = []
    for i, o in enumerate(p.orders):
        if o:
            col = [0] * p.rank
            col[i] = o
            cols.append(col)
    return cols


def _hstack(*blocks: list[list[int]], rows: int) -> list[list[int]]:
    """Concatenate column lists into a row-major matrix with ``rows`` rows."""
    cols = [c for b in blocks for c in b]
    return [[c[i] for c in cols] for i in range(rows)]


def _integral_q(vec: Sequence) -> list[int]:
    den = math.lcm(*[Fraction(x).denominator for x in vec]) if vec else 1
    return [int(Fraction(x) * den) for x in vec]


def mayer_vietoris_check(A: AnyComplex, B: AnyComplex, k: int, G: CoefficientGroup = Integers, K: AnyComplex | None = None) -> bool:
    """Exactness of H_k(A∩B) -> H_k(A)⊕H_k(B) -> H_k(A∪B) at the middle term."""
    union = A.union(B)
    if K is not None and K.cells != union.cells:
        raise ValueError("A ∪ B does not equal K")
    K = union
    C = A.intersection(B)
    ia, ib = induced_map(C, A, k, G), induced_map(C, B, k, G)
    ja, jb = induced_map(A, K, k, G), induced_map(B, K, k, G)
    pa, pb, pk = ia.target, ib.target, ja.target
    na, nb, nc = pa.rank, pb.rank, ia.source.rank
    ring = "Q" if G.tag == "Q" else "Z"
    # psi columns (i_*, i'_*)
    psi = []
    for j in range(nc):
        psi.append([ia.matrix[i][j] for i in range(na)] + [ib.matrix[i][j] for i in range(nb)])
    phi = []
    for j in range(na):
        phi.append([ja.matrix[i][j] for i in range(pk.rank)])
    for j in range(nb):
        phi.append([-jb.matrix[i][j] for i in range(pk.rank)])
    if ring == "Q":
        psi = [_integral_q(c) for c in psi]
        phi = [_integral_q(c) for c in phi]
    # image ⊆ kernel
    for col in psi:
        img = [sum(phi[j][i] * col[j] for j in range(na + nb)) for i in range(pk.rank)]
        if not pk.is_zero(img):
            return False
    # kernel ⊆ image
    rel_k = _relation_block(pk)
    M = _hstack(phi, rel_k, rows=pk.rank)
    if pk.rank:
        kernel = [v[: na + nb] for v in integer_kernel(M)]
    else:
        kernel = [[1 if i == j else 0 for i in range(na + nb)] for j in range(na + nb)]
    rel_ab = [c + [0] * nb for c in _relation_block(pa)] + [[0] * na + c for c in _relation_block(pb)]
    span = _hstack(psi, rel_ab, rows=na + nb)
    for v in kernel:
        if not any(v):
            continue
        if not span or not span[0]:
            return False
        if not is_solvable(span, v, ring):
            return False
    return True
