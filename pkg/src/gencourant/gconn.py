"""Metric-compatible, torsion-free connections on TM (+) T*M and their
curvature tensors, over the 2n-element generalized coordinate frame
e_A in {(d_mu, 0)} u {(0, dx^mu)}.

A connection is a coefficient array Gamma[C, A, B] with
nab_{e_A} e_B = Gamma^C_{AB} e_C, attached to a ``FrameAlgebroid`` that
records the anchor, the constant pairing Gram matrix and the frame
brackets of the ambient bracket.  Everything downstream (torsion 3-form,
curvature tensor, traces, characteristic vector field) is computed from
those two ingredients, so the same code serves the standard twisted
bracket, its shear by e^B, and the bivector-sheared bracket.

Curvature conventions:
    R0(psi,psi')phi = nab_psi nab_psi' phi - nab_psi' nab_psi phi
                      - nab_{[psi,psi']} phi
    R(phi',phi,psi,psi') = (1/2) { <R0(psi,psi')phi, phi'>
                                   + <R0(phi,phi')psi, psi'>
                                   + <nab_{e_l} psi, psi'> <nab_{e^l} phi, phi'> }
    Ric(psi,psi') = R(e^l, psi, e_l, psi'),  with e^l the pairing-dual frame
    scalar_E     = Ric(e^l, e_l)
    scalar_G     = Ric(G^{-1} e^l, e_l)
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import expr as ex
from . import gtb
from . import riemann as rm
from . import tensors as tn
from .errors import (
    CyclicConstraintViolated,
    InvalidLieAlgebra,
    NotAntisymmetric,
    SingularMetric,
)
from .expr import Chart, Expr, add, esum, mul, neg
from .gtb import GeneralizedMetric, GenSection, gen_metric
from .tensors import DOWN, UP, TensorField


def _zeros(shape) -> np.ndarray:
    a = np.empty(shape, dtype=object)
    a.reshape(-1)[:] = [ex.ZERO] * a.size
    return a


# ---------------------------------------------------------------------------
# the ambient bracket data on the frame
# ---------------------------------------------------------------------------


class FrameAlgebroid:
    """Anchor, pairing Gram and frame brackets of a Courant structure on the
    generalized coordinate frame.  The Gram matrix is the constant block
    swap in every picture used here (all our isomorphisms are orthogonal)."""

    def __init__(self, chart: Chart, anchor: np.ndarray, brackets: np.ndarray):
        self.chart = chart
        self.dim2 = 2 * chart.dim
        self.anchor = anchor  # [A, mu]: Expr components of rho(e_A)
        self.brackets = brackets  # [C, A, B]: [e_A, e_B] = brackets^C_{AB} e_C

    def swap(self, a: int) -> int:
        n = self.chart.dim
        return a + n if a < n else a - n

    def frame_deriv(self, a: int, f: Expr) -> Expr:
        coords = self.chart.coords()
        return esum(
            mul(self.anchor[a, m], ex.differentiate(f, coords[m]))
            for m in range(self.chart.dim)
        )

    def anchor_of(self, comps) -> np.ndarray:
        """Vector-field components of rho(psi) for frame components comps."""
        n = self.chart.dim
        return np.array(
            [esum(mul(comps[a], self.anchor[a, m]) for a in range(self.dim2)) for m in range(n)],
            dtype=object,
        )

    def d_map_components(self, f: Expr) -> np.ndarray:
        """Frame components of the bracket differential: <Df, e_A> = rho(e_A).f,
        so (Df)^C = rho(e_{swap(C)}).f."""
        return np.array(
            [self.frame_deriv(self.swap(c), f) for c in range(self.dim2)], dtype=object
        )

    def rho_star_components(self, mu: int) -> np.ndarray:
        """Frame components of rho*(dx^mu) = g_E^{-1} rho^T dx^mu."""
        return np.array(
            [self.anchor[self.swap(c), mu] for c in range(self.dim2)], dtype=object
        )


def standard_algebroid(chart: Chart, H: TensorField) -> FrameAlgebroid:
    """The twisted Dorfman bracket on the coordinate frame: anchor projects
    to the vector part; the only nonzero frame brackets are
    [(d_mu,0),(d_nu,0)] = (0, -H(d_mu, d_nu, .))."""
    n = chart.dim
    anchor = _zeros((2 * n, n))
    for m in range(n):
        anchor[m, m] = ex.ONE
    brackets = _zeros((2 * n, 2 * n, 2 * n))
    for m, v, l in itertools.product(range(n), repeat=3):
        brackets[n + l, m, v] = neg(H.comps[m, v, l])
    return FrameAlgebroid(chart, anchor, brackets)


def conjugated_algebroid(chart: Chart, F: np.ndarray, Finv: np.ndarray,
                         source: FrameAlgebroid) -> FrameAlgebroid:
    """Pull the bracket of ``source`` back through the frame isomorphism F:
    [e_A, e_B]_new = F^{-1} [F e_A, F e_B]_source."""
    n = chart.dim
    dim2 = 2 * n
    anchor = _zeros((dim2, n))
    for a in range(dim2):
        col = F[:, a]
        vec = source.anchor_of(col)
        for m in range(n):
            anchor[a, m] = vec[m]
    brackets = _zeros((dim2, dim2, dim2))
    sections = [GenSection.from_components(chart, F[:, a]) for a in range(dim2)]
    for a in range(dim2):
        for b in range(dim2):
            br = _bracket_components(source, sections[a].components(), sections[b].components())
            for c in range(dim2):
                brackets[c, a, b] = esum(mul(Finv[c, d], br[d]) for d in range(dim2))
    return FrameAlgebroid(chart, anchor, brackets)


def _bracket_components(alg: FrameAlgebroid, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """[psi, phi] of general sections from the frame brackets plus the
    anchored Leibniz/left-Leibniz corrections of the ambient bracket:
    [u^A e_A, v^B e_B] = u^A v^B [e_A,e_B] + (rho(u).v^C) e_C
                         - (rho(v).u^C) e_C + <u, v-gradient term>.

    The last piece is D<u, e_B> contributions from the left slot:
    [f e_A, .] = f [e_A, .] - (rho(.).f) e_A + <e_A, .> Df."""
    dim2 = alg.dim2
    coords = alg.chart.coords()
    n = alg.chart.dim
    out = _zeros((dim2,))
    rho_u = alg.anchor_of(u)
    rho_v = alg.anchor_of(v)
    eta = gtb.pairing_gram(alg.chart)
    for c in range(dim2):
        terms = [
            mul(u[a], v[b], alg.brackets[c, a, b])
            for a in range(dim2)
            for b in range(dim2)
            if not ex.is_zero(alg.brackets[c, a, b])
        ]
        terms.append(esum(mul(rho_u[m], ex.differentiate(v[c], coords[m])) for m in range(n)))
        terms.append(neg(esum(mul(rho_v[m], ex.differentiate(u[c], coords[m])) for m in range(n))))
        # left-Leibniz correction <e_A, v> D(u^A), projected on e_c:
        # (Df)^c = rho(e_swap(c)).f
        sc = alg.swap(c)
        terms.append(
            esum(
                mul(
                    esum(mul(v[b], eta[a, b]) for b in range(dim2)),
                    mul(alg.anchor[sc, m], ex.differentiate(u[a], coords[m])),
                )
                for a in range(dim2)
                for m in range(n)
            )
        )
        out[c] = esum(terms)
    return out


# ---------------------------------------------------------------------------
# connections
# ---------------------------------------------------------------------------


@dataclass
class GenConnection:
    """Connection coefficients over the generalized frame, together with the
    bracket data and the generalized metric of its picture."""

    algebroid: FrameAlgebroid
    gamma: np.ndarray  # [C, A, B]
    metric: GeneralizedMetric
    provenance: str = "custom"
    _riemann: np.ndarray | None = field(default=None, repr=False, compare=False)
    _ricci: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def chart(self) -> Chart:
        return self.algebroid.chart

    def lowered(self, a: int, b: int, c: int) -> Expr:
        """<nab_{e_a} e_b, e_c> for the constant swap Gram."""
        return self.gamma[self.algebroid.swap(c), a, b]

    def nabla(self, psi: GenSection, phi: GenSection) -> GenSection:
        comps = nabla_components(self, psi.components(), phi.components())
        return GenSection.from_components(self.chart, comps)


def nabla_components(conn: GenConnection, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    dim2 = conn.algebroid.dim2
    n = conn.chart.dim
    coords = conn.chart.coords()
    rho_u = conn.algebroid.anchor_of(u)
    out = _zeros((dim2,))
    for c in range(dim2):
        terms = [
            mul(u[a], v[b], conn.gamma[c, a, b])
            for a in range(dim2)
            for b in range(dim2)
            if not ex.is_zero(conn.gamma[c, a, b])
        ]
        terms.append(esum(mul(rho_u[m], ex.differentiate(v[c], coords[m])) for m in range(n)))
        out[c] = esum(terms)
    return out


def pairing_compat_residual(conn: GenConnection) -> np.ndarray:
    """rho(e_A).<e_B, e_C> - <nab_A e_B, e_C> - <e_B, nab_A e_C>; the first
    term is zero for the constant-Gram coordinate frame."""
    dim2 = conn.algebroid.dim2
    out = _zeros((dim2,) * 3)
    for a, b, c in itertools.product(range(dim2), repeat=3):
        out[a, b, c] = neg(add(conn.lowered(a, b, c), conn.lowered(a, c, b)))
    return out


def metric_compat_residual(conn: GenConnection) -> np.ndarray:
    """rho(e_A).G(e_B,e_C) - G(nab_A e_B, e_C) - G(e_B, nab_A e_C)."""
    dim2 = conn.algebroid.dim2
    gram = conn.metric.gram()
    out = _zeros((dim2,) * 3)
    for a, b, c in itertools.product(range(dim2), repeat=3):
        terms = [conn.algebroid.frame_deriv(a, gram[b, c])]
        for f in range(dim2):
            terms.append(neg(mul(conn.gamma[f, a, b], gram[f, c])))
            terms.append(neg(mul(conn.gamma[f, a, c], gram[b, f])))
        out[a, b, c] = esum(terms)
    return out


def gualtieri_torsion(conn: GenConnection) -> np.ndarray:
    """Totally antisymmetric torsion 3-form on the frame:
    T(A,B,C) = <nab_A e_B - nab_B e_A - [e_A,e_B], e_C> + <nab_C e_A, e_B>."""
    alg = conn.algebroid
    dim2 = alg.dim2
    out = _zeros((dim2,) * 3)
    for a, b, c in itertools.product(range(dim2), repeat=3):
        sc = alg.swap(c)
        out[a, b, c] = esum(
            [
                conn.gamma[sc, a, b],
                neg(conn.gamma[sc, b, a]),
                neg(alg.brackets[sc, a, b]),
                conn.gamma[alg.swap(b), c, a],
            ]
        )
    return out


def gen_riemann(conn: GenConnection) -> np.ndarray:
    """Curvature tensor R[D, C, A, B] = R(e_D, e_C, e_A, e_B) (the argument
    order of the defining formula: R(phi', phi, psi, psi'))."""
    if conn._riemann is not None:
        return conn._riemann
    alg = conn.algebroid
    dim2 = alg.dim2
    gamma = conn.gamma
    # R0up[F, A, B, C]: e_F component of R0(e_A, e_B) e_C
    r0up = np.empty((dim2,) * 4, dtype=object)
    for f, a, b, c in itertools.product(range(dim2), repeat=4):
        terms = [
            alg.frame_deriv(a, gamma[f, b, c]),
            neg(alg.frame_deriv(b, gamma[f, a, c])),
        ]
        for d in range(dim2):
            terms.append(mul(gamma[d, b, c], gamma[f, a, d]))
            terms.append(neg(mul(gamma[d, a, c], gamma[f, b, d])))
            if not ex.is_zero(alg.brackets[d, a, b]):
                terms.append(neg(mul(alg.brackets[d, a, b], gamma[f, d, c])))
        r0up[f, a, b, c] = esum(terms)
    # lowered: R0[D,C,A,B] = <R0(e_A,e_B)e_C, e_D> = r0up[swap(D),A,B,C]
    out = np.empty((dim2,) * 4, dtype=object)
    for d, c, a, b in itertools.product(range(dim2), repeat=4):
        third = esum(
            mul(conn.lowered(lam, a, b), conn.lowered(alg.swap(lam), c, d))
            for lam in range(dim2)
        )
        out[d, c, a, b] = mul(
            0.5,
            add(r0up[alg.swap(d), a, b, c], r0up[alg.swap(b), c, d, a], third),
        )
    conn._riemann = out
    return out


def ricci(conn: GenConnection) -> np.ndarray:
    """Ric[C, B] = R(e^l, e_C, e_l, e_B), symmetric."""
    if conn._ricci is not None:
        return conn._ricci
    alg = conn.algebroid
    dim2 = alg.dim2
    r = gen_riemann(conn)
    out = np.empty((dim2, dim2), dtype=object)
    for c, b in itertools.product(range(dim2), repeat=2):
        out[c, b] = esum(r[alg.swap(lam), c, lam, b] for lam in range(dim2))
    conn._ricci = out
    return out


def scalar_E(conn: GenConnection) -> Expr:
    """Pairing trace of the Ricci tensor."""
    alg = conn.algebroid
    ric = ricci(conn)
    return esum(ric[alg.swap(lam), lam] for lam in range(alg.dim2))


def scalar_G(conn: GenConnection, metric: GeneralizedMetric | None = None) -> Expr:
    """Generalized-metric trace of the Ricci tensor."""
    gm = metric if metric is not None else conn.metric
    graminv = gm.gram_inverse()
    ric = ricci(conn)
    dim2 = conn.algebroid.dim2
    return esum(
        mul(graminv[lam, m], ric[m, lam]) for lam in range(dim2) for m in range(dim2)
    )


def divergence_section(conn: GenConnection, comps: np.ndarray) -> Expr:
    """Div(psi) = <nab_{e_l} psi, e^l>: the e_l component of nab_{e_l} psi."""
    alg = conn.algebroid
    dim2 = alg.dim2
    terms = []
    for lam in range(dim2):
        terms.append(
            esum(mul(conn.gamma[lam, lam, b], comps[b]) for b in range(dim2))
        )
        terms.append(alg.frame_deriv(lam, comps[lam]))
    return esum(terms)


def char_vf(conn: GenConnection) -> TensorField:
    """Characteristic vector field: f -> Div(Df), read off on the
    coordinate functions."""
    chart = conn.chart
    out = np.array(
        [
            divergence_section(conn, conn.algebroid.d_map_components(chart.coord(m)))
            for m in range(chart.dim)
        ],
        dtype=object,
    )
    return TensorField(chart, (UP,), out)


def v_tensor(conn: GenConnection) -> TensorField:
    """V(xi, eta, zeta) = <nab_{rho* xi} rho* eta, rho* zeta> on the
    coordinate coframe; contravariant, antisymmetric in the last two slots."""
    chart = conn.chart
    n = chart.dim
    alg = conn.algebroid
    rs = [alg.rho_star_components(m) for m in range(n)]
    eta = gtb.pairing_gram(chart)
    out = np.empty((n, n, n), dtype=object)
    for i, j in itertools.product(range(n), repeat=2):
        nab = nabla_components(conn, rs[i], rs[j])
        for k in range(n):
            out[i, j, k] = esum(
                mul(nab[a], eta[a, b], rs[k][b])
                for a in range(alg.dim2)
                for b in range(alg.dim2)
                if eta[a, b]
            )
    return TensorField(chart, (UP, UP, UP), out)


def v_trace(conn: GenConnection, h: TensorField) -> TensorField:
    """Partial trace of the V tensor against the inverse of the induced
    form h: Z -> V(dx^k, h^{-1}(d_k), h^{-1}(Z))."""
    chart = conn.chart
    n = chart.dim
    hinv = tn.matrix_inverse(h.comps)
    v = v_tensor(conn)
    out = np.empty((n,), dtype=object)
    for lam in range(n):
        out[lam] = esum(
            mul(v.comps[k, a, b], hinv[a, k], hinv[b, lam])
            for k in range(n)
            for a in range(n)
            for b in range(n)
        )
    return TensorField(chart, (DOWN,), out)


def ricci_compat_residual(conn: GenConnection, metric: GeneralizedMetric | None = None) -> TensorField:
    """(X, Y) -> Ric(Psi_+(X), Psi_-(Y)): the off-block part of the Ricci
    tensor with respect to the eigenbundle splitting of the metric."""
    gm = metric if metric is not None else conn.metric
    chart = conn.chart
    n = chart.dim
    ric = ricci(conn)
    plus = [gm.psi_plus(_coord_field(chart, i)).components() for i in range(n)]
    minus = [gm.psi_minus(_coord_field(chart, j)).components() for j in range(n)]
    out = np.empty((n, n), dtype=object)
    dim2 = 2 * n
    for i, j in itertools.product(range(n), repeat=2):
        out[i, j] = esum(
            mul(ric[a, b], plus[i][a], minus[j][b])
            for a in range(dim2)
            for b in range(dim2)
        )
    return TensorField(chart, (DOWN, DOWN), out)


def _coord_field(chart: Chart, i: int) -> TensorField:
    return tn.from_function(chart, (UP,), lambda m: ex.ONE if m == i else ex.ZERO)


def covariant_derivative_torsion(conn: GenConnection, T: np.ndarray) -> np.ndarray:
    """(nab_{e_A} T)(e_B, e_C, e_D) for a covariant frame 3-tensor."""
    alg = conn.algebroid
    dim2 = alg.dim2
    out = np.empty((dim2,) * 4, dtype=object)
    for a, b, c, d in itertools.product(range(dim2), repeat=4):
        terms = [alg.frame_deriv(a, T[b, c, d])]
        for f in range(dim2):
            terms.append(neg(mul(conn.gamma[f, a, b], T[f, c, d])))
            terms.append(neg(mul(conn.gamma[f, a, c], T[b, f, d])))
            terms.append(neg(mul(conn.gamma[f, a, d], T[b, c, f])))
        out[a, b, c, d] = esum(terms)
    return out


def bianchi_residual(conn: GenConnection) -> np.ndarray:
    """Residual of the algebraic Bianchi identity with torsion terms:
    <R(e_A,e_B)e_C + cyc, e_D>
      - (1/2){ sum_cyc [ (nab_A T)(B,C,D) - T(A, T-op(B,C), D) ]
               - (nab_D T)(A,B,C) }."""
    alg = conn.algebroid
    dim2 = alg.dim2
    r = gen_riemann(conn)
    T = gualtieri_torsion(conn)
    nabT = covariant_derivative_torsion(conn, T)
    out = np.empty((dim2,) * 4, dtype=object)
    for d, a, b, c in itertools.product(range(dim2), repeat=4):
        lhs = add(r[d, c, a, b], r[d, a, b, c], r[d, b, c, a])
        rhs_terms = []
        for x, y, z in ((a, b, c), (b, c, a), (c, a, b)):
            rhs_terms.append(nabT[x, y, z, d])
            rhs_terms.append(
                neg(
                    esum(
                        mul(T[y, z, alg.swap(f)], T[x, f, d]) for f in range(dim2)
                    )
                )
            )
        rhs_terms.append(neg(nabT[d, a, b, c]))
        out[d, a, b, c] = add(lhs, neg(mul(0.5, esum(rhs_terms))))
    return out


# ---------------------------------------------------------------------------
# construction: minimal connection, parameter family, dilaton choice
# ---------------------------------------------------------------------------


def minimal_connection(g: TensorField, H_prime: TensorField) -> GenConnection:
    """The distinguished torsion-free metric connection for the block
    diagonal metric of g and the bracket twisted by the closed 3-form
    H_prime:

    nab^0_{(X,xi)} (Y,eta) =
      ( nabLC_X Y + (1/6) g^{-1} H'(g^{-1} xi, Y, .) - (1/3) g^{-1} H'(X, g^{-1} eta, .),
        nabLC_X eta - (1/3) H'(X, Y, .) + (1/6) H'(g^{-1} xi, g^{-1} eta, .) )."""
    chart = g.chart
    n = chart.dim
    metric = gen_metric(g)  # checks positive definiteness
    gtb.check_closed(H_prime)
    tn.check_antisymmetric(H_prime)
    lc = rm.christoffel(g)
    ginv = lc.metric_inverse.comps
    Hc = H_prime.comps
    gamma = _zeros((2 * n,) * 3)
    for k, i, j in itertools.product(range(n), repeat=3):
        # block-diagonal transport by the chart connection
        gamma[k, i, j] = lc.coeffs[k, i, j]
        gamma[n + k, i, n + j] = neg(lc.coeffs[j, i, k])
    for m, v, l in itertools.product(range(n), repeat=3):
        gamma[n + l, m, v] = add(gamma[n + l, m, v], mul(-1.0 / 3.0, Hc[m, v, l]))
        gamma[l, m, n + v] = add(
            gamma[l, m, n + v],
            mul(
                -1.0 / 3.0,
                esum(
                    mul(ginv[l, a2], ginv[v, b2], Hc[m, b2, a2])
                    for a2 in range(n)
                    for b2 in range(n)
                ),
            ),
        )
        gamma[l, n + m, v] = add(
            gamma[l, n + m, v],
            mul(
                1.0 / 6.0,
                esum(
                    mul(ginv[l, a2], ginv[m, b2], Hc[b2, v, a2])
                    for a2 in range(n)
                    for b2 in range(n)
                ),
            ),
        )
        gamma[n + l, n + m, n + v] = add(
            gamma[n + l, n + m, n + v],
            mul(
                1.0 / 6.0,
                esum(
                    mul(ginv[m, a2], ginv[v, b2], Hc[a2, b2, l])
                    for a2 in range(n)
                    for b2 in range(n)
                ),
            ),
        )
    return GenConnection(standard_algebroid(chart, H_prime), gamma, metric, "minimal")


def block_lc_connection(g: TensorField, H_prime: TensorField) -> GenConnection:
    """The block-diagonal chart Levi-Civita transport alone (metric
    compatible but torsionful: its torsion 3-form is the anchor pullback
    of H_prime)."""
    chart = g.chart
    n = chart.dim
    metric = gen_metric(g)
    lc = rm.christoffel(g)
    gamma = _zeros((2 * n,) * 3)
    for k, i, j in itertools.product(range(n), repeat=3):
        gamma[k, i, j] = lc.coeffs[k, i, j]
        gamma[n + k, i, n + j] = neg(lc.coeffs[j, i, k])
    return GenConnection(standard_algebroid(chart, H_prime), gamma, metric, "block-lc")


@dataclass
class ConnParams:
    """Validated parameter pair for the affine family of torsion-free
    metric connections: J fully contravariant, W fully covariant, both
    antisymmetric in their last two slots with vanishing cyclic sum."""

    J: TensorField
    W: TensorField


def _cyclic_residual(t: TensorField) -> float:
    n = t.chart.dim
    res = []
    for a, b, c in itertools.product(range(n), repeat=3):
        res.append(esum([t.comps[a, b, c], t.comps[b, c, a], t.comps[c, a, b]]))
    return ex.max_abs_on_points(res, t.chart.sample_points())[0]


def _alt3(t: TensorField) -> TensorField:
    return tn.antisymmetrize(t, (0, 1, 2))


def validate_params(J: TensorField, W: TensorField, policy: str = "reject",
                    tol: float = 1e-10) -> ConnParams:
    """Check (or restore, under policy='project') the constraints on a
    parameter pair.  Antisymmetry in the last two slots is a hard
    requirement; the cyclic constraint is either enforced (reject) or
    repaired by T -> T - Alt(T), which zeroes the cyclic sum of a tensor
    skew in its last two slots."""
    if J.variance != (UP, UP, UP) or W.variance != (DOWN, DOWN, DOWN):
        raise NotAntisymmetric("J must be fully contravariant, W fully covariant")
    for t, name in ((J, "J"), (W, "W")):
        swapped = np.swapaxes(t.comps, 1, 2)
        diff = [add(a, b) for a, b in zip(t.comps.reshape(-1), swapped.reshape(-1))]
        worst, _ = ex.max_abs_on_points(diff, t.chart.sample_points())
        if worst > tol:
            raise NotAntisymmetric(f"{name} not antisymmetric in its last two slots ({worst:.3e})")
    if policy == "project":
        J = J - _alt3(J)
        W = W - _alt3(W)
    else:
        for t, name in ((J, "J"), (W, "W")):
            worst = _cyclic_residual(t)
            if worst > tol:
                raise CyclicConstraintViolated(f"cyclic sum of {name} is {worst:.3e}")
    return ConnParams(J, W)


def param_tensor_frame(params: ConnParams, g: TensorField) -> np.ndarray:
    """Frame components K[A,B,C] of the deformation tensor built from (J, W):

    K((X,xi),(Y,eta),(Z,zeta)) =
        W(g1 xi, Y, Z) + W(X, g1 eta, Z) + W(X, Y, g1 zeta) + W(g1 xi, g1 eta, g1 zeta)
      - J(g X, eta, zeta) - J(xi, g Y, zeta) - J(xi, eta, g Z) - J(g X, g Y, g Z)

    with g1 = g^{-1}.  Exactly one term survives for each frame type
    combination."""
    chart = g.chart
    n = chart.dim
    ginv = tn.metric_inverse(g).comps
    gc = g.comps
    Jc, Wc = params.J.comps, params.W.comps
    K = _zeros((2 * n,) * 3)
    for A, B, C in itertools.product(range(2 * n), repeat=3):
        forms = tuple(idx >= n for idx in (A, B, C))
        i, j, k = (idx % n for idx in (A, B, C))
        nforms = sum(forms)
        if nforms in (1, 3):
            # W survives: inverse metric on the form legs
            def w_leg(slot, raw, is_form):
                return (
                    [(a, ginv[raw, a]) for a in range(n)] if is_form else [(raw, ex.ONE)]
                )

            terms = []
            for (a, fa) in w_leg(0, i, forms[0]):
                for (b, fb) in w_leg(1, j, forms[1]):
                    for (c, fc) in w_leg(2, k, forms[2]):
                        terms.append(mul(fa, fb, fc, Wc[a, b, c]))
            K[A, B, C] = esum(terms)
        else:
            # -J survives: metric on the vector legs
            def j_leg(raw, is_form):
                return (
                    [(raw, ex.ONE)] if is_form else [(a, gc[a, raw]) for a in range(n)]
                )

            terms = []
            for (a, fa) in j_leg(i, forms[0]):
                for (b, fb) in j_leg(j, forms[1]):
                    for (c, fc) in j_leg(k, forms[2]):
                        terms.append(mul(fa, fb, fc, Jc[a, b, c]))
            K[A, B, C] = neg(esum(terms))
    return K


def with_params(base: GenConnection, params: ConnParams) -> GenConnection:
    """base + g_E^{-1} K(., ., .): every torsion-free metric connection for
    the block-diagonal metric arises this way."""
    K = param_tensor_frame(params, base.metric.g)
    alg = base.algebroid
    dim2 = alg.dim2
    gamma = np.empty((dim2,) * 3, dtype=object)
    for c, a, b in itertools.product(range(dim2), repeat=3):
        gamma[c, a, b] = add(base.gamma[c, a, b], K[a, b, alg.swap(c)])
    return GenConnection(alg, gamma, base.metric, "params")


def dilaton_params(g: TensorField, phi) -> ConnParams:
    """J = 0 and W(X,Y,Z) = (1/(n-1)){ g(X,Y) <dphi, Z> - g(X,Z) <dphi, Y> }:
    the choice with vanishing characteristic vector field and partial trace
    exactly dphi.  The g-trace of the brace is (n-1) dphi, which fixes the
    normalization; needs n > 1."""
    chart = g.chart
    n = chart.dim
    if n < 2:
        raise SingularMetric("the dilaton trace condition needs a chart of dimension > 1")
    dphi = tn.d_scalar(chart, phi)
    W = np.empty((n, n, n), dtype=object)
    for i, j, k in itertools.product(range(n), repeat=3):
        W[i, j, k] = mul(
            1.0 / (n - 1),
            add(mul(g.comps[i, j], dphi.comps[k]), neg(mul(g.comps[i, k], dphi.comps[j]))),
        )
    return ConnParams(
        tn.zeros(chart, (UP, UP, UP)), TensorField(chart, (DOWN, DOWN, DOWN), W)
    )


def dilaton_connection(g: TensorField, B: TensorField, H: TensorField, phi) -> GenConnection:
    """The connection of the flatness/compatibility dictionary for the
    background (g, B, phi): built in the block-diagonal picture with twist
    H + dB, then sheared back by e^B so that it lives on the H-twisted
    bracket and is compatible with the metric of the pair (g, B)."""
    H_prime = H + tn.exterior_derivative(B)
    hat = with_params(minimal_connection(g, H_prime), dilaton_params(g, phi))
    conn = untwist(hat, B)
    conn.provenance = "dilaton"
    return conn


def dilaton_connection_twisted(g: TensorField, H_prime: TensorField, phi) -> GenConnection:
    """Same connection, left in the block-diagonal picture."""
    conn = with_params(minimal_connection(g, H_prime), dilaton_params(g, phi))
    conn.provenance = "dilaton-twisted"
    return conn


# ---------------------------------------------------------------------------
# transport along bundle isomorphisms
# ---------------------------------------------------------------------------


def transport_connection(conn: GenConnection, F: np.ndarray, Finv: np.ndarray,
                         algebroid: FrameAlgebroid, metric: GeneralizedMetric,
                         provenance: str = "transported") -> GenConnection:
    """Pull a connection back through a frame isomorphism F into a new
    bracket picture: nab'_psi psi' = F^{-1}( nab_{F psi} F(psi') )."""
    src = conn.algebroid
    dim2 = src.dim2
    # tmp1[E, A, B] = F^C_A F^D_B Gamma^E_{CD}
    tmp1 = np.empty((dim2,) * 3, dtype=object)
    for e_i in range(dim2):
        for a in range(dim2):
            inner = [
                esum(mul(F[c, a], conn.gamma[e_i, c, d]) for c in range(dim2))
                for d in range(dim2)
            ]
            for b in range(dim2):
                tmp1[e_i, a, b] = esum(mul(inner[d], F[d, b]) for d in range(dim2))
    # tmp2[D, A, B] = F^C_A rho_src(e_C).F^D_B
    tmp2 = np.empty((dim2,) * 3, dtype=object)
    for d in range(dim2):
        for a in range(dim2):
            for b in range(dim2):
                tmp2[d, a, b] = esum(
                    mul(F[c, a], src.frame_deriv(c, F[d, b])) for c in range(dim2)
                )
    gamma = np.empty((dim2,) * 3, dtype=object)
    for g_i, a, b in itertools.product(range(dim2), repeat=3):
        gamma[g_i, a, b] = add(
            esum(mul(Finv[g_i, e_i], tmp1[e_i, a, b]) for e_i in range(dim2)),
            esum(mul(Finv[g_i, d], tmp2[d, a, b]) for d in range(dim2)),
        )
    return GenConnection(algebroid, gamma, metric, provenance)


def untwist(conn: GenConnection, B: TensorField) -> GenConnection:
    """Shear a connection by e^B: if the input is torsion-free and metric
    for BlockDiag(g, g^{-1}) with bracket twist H', the output is
    torsion-free and metric for the pair (g, B) with twist H' - dB."""
    gm_new = gen_metric(conn.metric.g, B)
    F = gm_new.shear_matrix(-1)  # matrix of e^{-B}
    Finv = gm_new.shear_matrix(+1)
    H_new = _current_twist(conn) - tn.exterior_derivative(B)
    alg_new = standard_algebroid(conn.chart, H_new)
    out = transport_connection(conn, F, Finv, alg_new, gm_new, "untwisted")
    return out


def _current_twist(conn: GenConnection) -> TensorField:
    """Recover the twist 3-form from the standard-frame brackets."""
    chart = conn.chart
    n = chart.dim
    comps = np.empty((n, n, n), dtype=object)
    for m, v, l in itertools.product(range(n), repeat=3):
        comps[m, v, l] = neg(conn.algebroid.brackets[n + l, m, v])
    return TensorField(chart, (DOWN, DOWN, DOWN), comps)


def theta_transport(conn: GenConnection, theta: TensorField, B: TensorField,
                    G_metric: TensorField) -> GenConnection:
    """Pull a connection on the standard twisted bracket back through the
    bivector shear F_theta; the result lives on the sheared bracket and is
    compatible with BlockDiag(G, G^{-1}) for G = -B g^{-1} B."""
    F, Finv = gtb.theta_twist_matrices(theta, B)
    alg_new = conjugated_algebroid(conn.chart, F, Finv, conn.algebroid)
    gm_new = gen_metric(G_metric)
    return transport_connection(conn, F, Finv, alg_new, gm_new, "theta-sheared")


# ---------------------------------------------------------------------------
# trace relations of the affine family (helpers for identity tests)
# ---------------------------------------------------------------------------


def param_trace_oneform(K: np.ndarray, alg: FrameAlgebroid) -> np.ndarray:
    """K'(psi) = K(e_l, e^l, psi)."""
    dim2 = alg.dim2
    return np.array(
        [esum(K[lam, alg.swap(lam), c] for lam in range(dim2)) for c in range(dim2)],
        dtype=object,
    )


def divergence_dual(conn: GenConnection, kp: np.ndarray) -> Expr:
    """Div(K') = (nab_{e_l} K')(e^l) for a frame 1-form K'."""
    alg = conn.algebroid
    dim2 = alg.dim2
    terms = []
    for lam in range(dim2):
        sl = alg.swap(lam)
        terms.append(alg.frame_deriv(lam, kp[sl]))
        terms.append(neg(esum(mul(conn.gamma[c, lam, sl], kp[c]) for c in range(dim2))))
    return esum(terms)


def pairing_norm2_dual(kp: np.ndarray, alg: FrameAlgebroid) -> Expr:
    """|K'|^2 with the (split) pairing: K'(e_l) K'(e^l)."""
    return esum(mul(kp[lam], kp[alg.swap(lam)]) for lam in range(alg.dim2))


def restrict_to_graph(conn: GenConnection, sign: int) -> np.ndarray:
    """Chart connection coefficients of the restriction to the graph
    eigenbundle: nab_{Psi(d_i)} Psi(d_j) = Psi(Gamma^k_{ij} d_k), valid
    because a metric connection preserves both eigenbundles."""
    chart = conn.chart
    n = chart.dim
    gm = conn.metric
    secs = [
        (gm.psi_plus if sign > 0 else gm.psi_minus)(_coord_field(chart, i)).components()
        for i in range(n)
    ]
    out = np.empty((n, n, n), dtype=object)
    for i in range(n):
        for j in range(n):
            nab = nabla_components(conn, secs[i], secs[j])
            for k in range(n):
                out[k, i, j] = nab[k]  # vector part determines the graph section
    return out


def trace_identity_residual(conn: GenConnection, K: np.ndarray) -> Expr:
    """K(g_E^{-1} K(., e_l, e_m), e^m, e^l) - 2 K(e^m, g_E^{-1} K(e_l, e_m, .), e^l),
    identically zero for any parameter tensor with the cyclic property.
    Written as the equivalent full contraction
    K(e^n, e^m, e^l) { K(e_n, e_l, e_m) - 2 K(e_l, e_n, e_m) }."""
    alg = conn.algebroid
    dim2 = alg.dim2
    terms = []
    for nu, m2, lam in itertools.product(range(dim2), repeat=3):
        up = K[alg.swap(nu), alg.swap(m2), alg.swap(lam)]
        terms.append(
            mul(up, add(K[nu, lam, m2], mul(-2.0, K[lam, nu, m2])))
        )
    return esum(terms)


# ---------------------------------------------------------------------------
# dimension of the parameter space
# ---------------------------------------------------------------------------


def lc_parameter_space_dim(n: int) -> int:
    """Dimension of the null space of the pointwise linear constraints on a
    frame 3-tensor K: skew in the last two slots, compatibility with the
    flat block-diagonal metric (K(., ., tau .) pairing condition), and
    vanishing cyclic sum.  Equals (2/3) n (n^2 - 1)."""
    dim2 = 2 * n

    def swap(a):
        return a + n if a < n else a - n

    def flat(a, b, c):
        return (a * dim2 + b) * dim2 + c

    rows = []
    for a, b, c in itertools.product(range(dim2), repeat=3):
        r1 = np.zeros(dim2 ** 3)
        r1[flat(a, b, c)] += 1
        r1[flat(a, c, b)] += 1
        rows.append(r1)
        r2 = np.zeros(dim2 ** 3)
        r2[flat(a, b, swap(c))] += 1
        r2[flat(a, c, swap(b))] += 1
        rows.append(r2)
        r3 = np.zeros(dim2 ** 3)
        r3[flat(a, b, c)] += 1
        r3[flat(b, c, a)] += 1
        r3[flat(c, a, b)] += 1
        rows.append(r3)
    rank = np.linalg.matrix_rank(np.array(rows))
    return dim2 ** 3 - rank


# ---------------------------------------------------------------------------
# quadratic Lie algebras: the zero-anchor case in exact arithmetic
# ---------------------------------------------------------------------------


def _frac_matrix(rows) -> list[list[Fraction]]:
    return [[Fraction(v) for v in row] for row in rows]


def _frac_matmul(a, b):
    return [
        [sum((a[i][k] * b[k][j] for k in range(len(b))), Fraction(0)) for j in range(len(b[0]))]
        for i in range(len(a))
    ]


def _frac_inverse(m):
    k = len(m)
    aug = [list(row) + [Fraction(int(i == j)) for j in range(k)] for i, row in enumerate(m)]
    for col in range(k):
        pivot = next((r for r in range(col, k) if aug[r][col] != 0), None)
        if pivot is None:
            raise InvalidLieAlgebra("pairing matrix is singular")
        aug[col], aug[pivot] = aug[pivot], aug[col]
        pv = aug[col][col]
        aug[col] = [v / pv for v in aug[col]]
        for r in range(k):
            if r != col and aug[r][col]:
                f = aug[r][col]
                aug[r] = [v - f * w for v, w in zip(aug[r], aug[col])]
    return [row[k:] for row in aug]


def _leading_minors(m):
    k = len(m)
    minors = []
    for size in range(1, k + 1):
        sub = [row[:size] for row in m[:size]]
        minors.append(_frac_det(sub))
    return minors


def _frac_det(m):
    k = len(m)
    if k == 1:
        return m[0][0]
    det = Fraction(0)
    for j in range(k):
        minor = [row[:j] + row[j + 1:] for row in m[1:]]
        term = m[0][j] * _frac_det(minor)
        det += term if j % 2 == 0 else -term
    return det


@dataclass
class QuadraticLieAlgebra:
    """Finite-dimensional quadratic Lie algebra with rational structure
    constants c[k][i][j] ([b_i, b_j] = c^k_{ij} b_k), an invariant pairing,
    and a chosen maximal positive-definite subspace (rows of vplus_basis)."""

    dim: int
    structure: list
    pairing: list
    vplus_basis: list

    def __post_init__(self):
        d = self.dim
        c = [[[Fraction(v) for v in row] for row in plane] for plane in self.structure]
        P = _frac_matrix(self.pairing)
        V = _frac_matrix(self.vplus_basis)
        self.structure, self.pairing, self.vplus_basis = c, P, V
        for k, i, j in itertools.product(range(d), repeat=3):
            if c[k][i][j] != -c[k][j][i]:
                raise InvalidLieAlgebra("structure constants not antisymmetric")
        for i, j, k, l in itertools.product(range(d), repeat=4):
            lhs = sum((c[m][j][k] * c[l][i][m] for m in range(d)), Fraction(0))
            rhs = sum((c[m][i][j] * c[l][m][k] + c[m][i][k] * c[l][j][m] for m in range(d)), Fraction(0))
            if lhs != rhs:
                raise InvalidLieAlgebra("Jacobi identity fails")
        for i in range(d):
            for j in range(d):
                if P[i][j] != P[j][i]:
                    raise InvalidLieAlgebra("pairing not symmetric")
        self.pairing_inv = _frac_inverse(P)
        for i, j, k in itertools.product(range(d), repeat=3):
            val = sum((c[m][i][j] * P[m][k] + c[m][i][k] * P[j][m] for m in range(d)), Fraction(0))
            if val != 0:
                raise InvalidLieAlgebra("pairing not invariant under the adjoint action")
        # positive definiteness of V+ and negativity of its orthogonal complement
        gram_plus = _frac_matmul(_frac_matmul(V, P), [list(r) for r in zip(*V)])
        if any(m <= 0 for m in _leading_minors(gram_plus)):
            raise InvalidLieAlgebra("chosen subspace is not positive definite")
        comp = self._complement_basis()
        gram_minus = _frac_matmul(_frac_matmul(comp, P), [list(r) for r in zip(*comp)])
        # negative definite iff the leading minors alternate: (-1)^s m_s > 0
        minors = _leading_minors(gram_minus)
        if any((m >= 0 if s % 2 == 1 else m <= 0) for s, m in enumerate(minors, start=1)):
            raise InvalidLieAlgebra("orthogonal complement is not negative definite")

    def _complement_basis(self):
        """Exact nullspace basis of V P (the pairing-orthogonal complement)."""
        d = self.dim
        VP = _frac_matmul(self.vplus_basis, self.pairing)
        rows = [list(r) for r in VP]
        pivots = []
        r = 0
        for c_ in range(d):
            pivot = next((i for i in range(r, len(rows)) if rows[i][c_] != 0), None)
            if pivot is None:
                continue
            rows[r], rows[pivot] = rows[pivot], rows[r]
            rows[r] = [v / rows[r][c_] for v in rows[r]]
            for i in range(len(rows)):
                if i != r and rows[i][c_]:
                    f = rows[i][c_]
                    rows[i] = [v - f * w for v, w in zip(rows[i], rows[r])]
            pivots.append(c_)
            r += 1
        free = [c_ for c_ in range(d) if c_ not in pivots]
        basis = []
        for fc in free:
            vec = [Fraction(0)] * d
            vec[fc] = Fraction(1)
            for ri, pc in enumerate(pivots):
                vec[pc] = -rows[ri][fc]
            basis.append(vec)
        return basis

    def projector_plus(self):
        """Pairing-orthogonal projector onto the positive subspace."""
        V = self.vplus_basis
        P = self.pairing
        Vt = [list(r) for r in zip(*V)]
        core = _frac_inverse(_frac_matmul(_frac_matmul(V, P), Vt))
        return _frac_matmul(Vt, _frac_matmul(core, _frac_matmul(V, P)))


def qla_lc(qla: QuadraticLieAlgebra):
    """Exact coefficients of the canonical torsion-free metric connection
    on a quadratic Lie algebra with a chosen splitting:

    <nab_x y, z> = (1/3)<[x+,y+],z+> + (1/3)<[x-,y-],z->
                   + <[x-,y+],z+> + <[x+,y-],z->.

    Returns Gamma[c][a][b] with nab_{b_a} b_b = Gamma^c_{ab} b_c, all
    Fractions."""
    d = qla.dim
    c = qla.structure
    P = qla.pairing
    Pp = qla.projector_plus()
    Pm = [[Fraction(int(i == j)) - Pp[i][j] for j in range(d)] for i in range(d)]

    def bracket(u, v):
        return [
            sum((c[k][i][j] * u[i] * v[j] for i in range(d) for j in range(d)), Fraction(0))
            for k in range(d)
        ]

    def pair(u, v):
        return sum((u[i] * P[i][j] * v[j] for i in range(d) for j in range(d)), Fraction(0))

    basis = [[Fraction(int(i == j)) for j in range(d)] for i in range(d)]

    def proj(M, u):
        return [sum((M[i][j] * u[j] for j in range(d)), Fraction(0)) for i in range(d)]

    lowered = [[[Fraction(0)] * d for _ in range(d)] for _ in range(d)]  # [a][b][e]
    for a in range(d):
        xp, xm = proj(Pp, basis[a]), proj(Pm, basis[a])
        for b in range(d):
            yp, ym = proj(Pp, basis[b]), proj(Pm, basis[b])
            for e in range(d):
                zp, zm = proj(Pp, basis[e]), proj(Pm, basis[e])
                lowered[a][b][e] = (
                    Fraction(1, 3) * pair(bracket(xp, yp), zp)
                    + Fraction(1, 3) * pair(bracket(xm, ym), zm)
                    + pair(bracket(xm, yp), zp)
                    + pair(bracket(xp, ym), zm)
                )
    Pinv = qla.pairing_inv
    gamma = [[[Fraction(0)] * d for _ in range(d)] for _ in range(d)]  # [cc][a][b]
    for cc, a, b in itertools.product(range(d), repeat=3):
        gamma[cc][a][b] = sum((Pinv[cc][e] * lowered[a][b][e] for e in range(d)), Fraction(0))
    return gamma


def qla_torsion(qla: QuadraticLieAlgebra, gamma):
    """Exact torsion 3-form T(a,b,e) = <nab_a b - nab_b a - [a,b], e>
    + <nab_e a, b> (zero anchor)."""
    d = qla.dim
    P = qla.pairing
    c = qla.structure

    def low(a, b, e):
        return sum((gamma[cc][a][b] * P[cc][e] for cc in range(d)), Fraction(0))

    T = [[[Fraction(0)] * d for _ in range(d)] for _ in range(d)]
    for a, b, e in itertools.product(range(d), repeat=3):
        br = sum((c[m][a][b] * P[m][e] for m in range(d)), Fraction(0))
        T[a][b][e] = low(a, b, e) - low(b, a, e) - br + low(e, a, b)
    return T


def qla_compat_residual(qla: QuadraticLieAlgebra, gamma):
    """Exact pairing-compatibility residual <nab_a b, e> + <b, nab_a e>."""
    d = qla.dim
    P = qla.pairing

    def low(a, b, e):
        return sum((gamma[cc][a][b] * P[cc][e] for cc in range(d)), Fraction(0))

    return [
        [[low(a, b, e) + low(a, e, b) for e in range(d)] for b in range(d)]
        for a in range(d)
    ]
