"""String-background residuals.

Given a background (g, B, phi) with a closed 3-form twist H, this module
evaluates

- the three one-loop residual tensors of the sigma-model Weyl anomaly
  (symmetric, antisymmetric, scalar) and their dependent scalar combination,
- the two identities that tie them to the curvature of the dilaton
  connection on TM (+) T*M: the metric trace of its Ricci tensor equals the
  scalar residual, and its off-block Ricci components equal the difference
  of the symmetric and antisymmetric residuals,
- for invertible B, the bivector-gauge side: the cotangent Lie algebroid of
  theta = B^{-1}, its Levi-Civita connection for the fiber metric G^{-1}
  with G = -B g^{-1} B, and the three residuals of the dual gravity
  equations, plus the transport identity connecting both Ricci tensors.

All residuals are exact symbolic fields; the CLI samples them at the
chart's seeded points.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import expr as ex
from . import gconn
from . import gtb
from . import riemann as rm
from . import tensors as tn
from .expr import Chart, Expr, add, esum, mul, neg
from .gtb import LieAlgebroidCotangent
from .tensors import DOWN, UP, TensorField


# ---------------------------------------------------------------------------
# backgrounds
# ---------------------------------------------------------------------------


@dataclass
class Background:
    """Chart background fields: Riemannian g, 2-form B, dilaton phi, and a
    closed 3-form twist H (defaults to zero).  H may instead be supplied
    through a potential 2-form, guaranteeing closedness by construction."""

    chart: Chart
    g: TensorField
    B: TensorField
    phi: Expr
    H: TensorField = None

    def __post_init__(self):
        if self.H is None:
            self.H = tn.zeros(self.chart, (DOWN,) * 3)
        gtb._check_positive_definite(self.g)
        tn.check_antisymmetric(self.B)
        tn.check_antisymmetric(self.H)
        gtb.check_closed(self.H)
        self.phi = ex._coerce(self.phi)

    @staticmethod
    def from_potential(chart: Chart, g, B, phi, B0) -> "Background":
        return Background(chart, g, B, phi, tn.exterior_derivative(B0))

    def h_total(self) -> TensorField:
        """H' = H + dB: the twist seen by the sheared, block-diagonal picture."""
        return self.H + tn.exterior_derivative(self.B)


@dataclass
class BetaResiduals:
    beta_g: TensorField        # symmetric (0,2)
    beta_B: TensorField        # antisymmetric (0,2)
    beta_phi: Expr
    beta_phi_prime: Expr

    def max_abs(self, points):
        fields = list(self.beta_g.comps.reshape(-1)) + list(self.beta_B.comps.reshape(-1))
        fields += [self.beta_phi]
        return ex.max_abs_on_points(fields, points)


def beta_all(bg: Background) -> BetaResiduals:
    """Index-free assembly of the three residual tensors:

    beta_g(X,Y)  = Ric(X,Y) - (1/2) <i_X H', i_Y H'>_g
                   + (nab_X dphi)(Y) + (nab_Y dphi)(X)
    beta_B(X,Y)  = (1/2) (delta_g H')(X,Y) + H'(X, Y, grad phi)
    beta_phi     = R(g) - (1/2) <H',H'>_g + 4 Lap(phi) - 4 |grad phi|^2
    beta_phi'    = -(1/4) (beta_phi - tr_g beta_g)
    """
    chart = bg.chart
    n = chart.dim
    g = bg.g
    Hp = bg.h_total()
    gamma = rm.christoffel(g)
    ginv = gamma.metric_inverse
    _, ric, rscal = rm.curvature_package(g)
    hess = rm.covariant_derivative(tn.d_scalar(chart, bg.phi), gamma)
    lap, grad, norm2 = rm.laplace_divergence(bg.phi, g, gamma)
    deltaH = rm.codifferential(Hp, g, gamma)

    bg_comps = np.empty((n, n), dtype=object)
    bB_comps = np.empty((n, n), dtype=object)
    coord_fields = [gconn._coord_field(chart, i) for i in range(n)]
    iH = [tn.interior_product(coord_fields[i], Hp) for i in range(n)]
    for i, j in itertools.product(range(n), repeat=2):
        bg_comps[i, j] = esum(
            [
                ric.comps[i, j],
                mul(-0.5, rm.form_inner(iH[i], iH[j], g)),
                hess.comps[i, j],
                hess.comps[j, i],
            ]
        )
        bB_comps[i, j] = add(
            mul(0.5, deltaH.comps[i, j]),
            esum(mul(Hp.comps[i, j, a], grad.comps[a]) for a in range(n)),
        )
    beta_g = TensorField(chart, (DOWN, DOWN), bg_comps)
    beta_B = TensorField(chart, (DOWN, DOWN), bB_comps)
    beta_phi = esum([rscal, mul(-0.5, rm.form_inner(Hp, Hp, g)), mul(4.0, lap), mul(-4.0, norm2)])
    trace = esum(
        mul(ginv.comps[i, j], bg_comps[i, j]) for i in range(n) for j in range(n)
    )
    beta_phi_prime = mul(-0.25, add(beta_phi, neg(trace)))
    return BetaResiduals(beta_g, beta_B, beta_phi, beta_phi_prime)


def beta_b_conformal_form(bg: Background) -> TensorField:
    """The equivalent divergence form (1/2) e^{2 phi} delta_g(e^{-2 phi} H')."""
    chart = bg.chart
    Hp = bg.h_total()
    weight = ex.exp(mul(-2.0, bg.phi))
    weighted = Hp.map(lambda c: mul(weight, c))
    delta = rm.codifferential(weighted, bg.g)
    back = ex.exp(mul(2.0, bg.phi))
    return delta.map(lambda c: mul(0.5, back, c))


def beta_g_index_form(bg: Background) -> TensorField:
    """Raw index-sum assembly Ric_{mn} - (1/4) H'_{m a b} H'_n{}^{a b}
    + 2 (nab dphi)_{(mn)}: an independent formula path used as an oracle
    against the index-free assembly."""
    chart = bg.chart
    n = chart.dim
    Hp = bg.h_total()
    gamma = rm.christoffel(bg.g)
    ginv = gamma.metric_inverse.comps
    _, ric, _ = rm.curvature_package(bg.g)
    hess = rm.covariant_derivative(tn.d_scalar(chart, bg.phi), gamma)
    out = np.empty((n, n), dtype=object)
    for m, v in itertools.product(range(n), repeat=2):
        quad = esum(
            mul(Hp.comps[m, a, b], Hp.comps[v, c, d], ginv[a, c], ginv[b, d])
            for a in range(n) for b in range(n) for c in range(n) for d in range(n)
        )
        out[m, v] = esum(
            [ric.comps[m, v], mul(-0.25, quad), hess.comps[m, v], hess.comps[v, m]]
        )
    return TensorField(chart, (DOWN, DOWN), out)


# ---------------------------------------------------------------------------
# the flatness / block-diagonality dictionary
# ---------------------------------------------------------------------------


@dataclass
class CentralResiduals:
    """Identity residuals: both fields vanish for every background, on-shell
    or not."""

    scalar_residual: Expr              # metric Ricci trace minus beta_phi
    ricci_residual: TensorField        # off-block Ricci minus (beta_g - beta_B)
    connection: gconn.GenConnection
    betas: BetaResiduals

    def max_abs(self, points):
        fields = [self.scalar_residual] + list(self.ricci_residual.comps.reshape(-1))
        return ex.max_abs_on_points(fields, points)


def central_residuals(bg: Background) -> CentralResiduals:
    """Build the dilaton connection for (g, B, phi) on the H-twisted bracket
    (through the shear, so B != 0 exercises the conjugation path) and
    return the two identity residuals."""
    betas = beta_all(bg)
    conn = gconn.dilaton_connection(bg.g, bg.B, bg.H, bg.phi)
    scalar_res = add(gconn.scalar_G(conn), neg(betas.beta_phi))
    compat = gconn.ricci_compat_residual(conn)
    ricci_res = compat - (betas.beta_g - betas.beta_B)
    return CentralResiduals(scalar_res, ricci_res, conn, betas)


# ---------------------------------------------------------------------------
# the bivector gauge: cotangent algebroid quantities
# ---------------------------------------------------------------------------


@dataclass
class SymplecticPackage:
    """Everything attached to theta = B^{-1}: the dual metric G = -B g^{-1} B,
    the cotangent Lie algebroid with its Levi-Civita connection for G^{-1},
    the transported twist, and the dilaton data in the dual variables."""

    chart: Chart
    theta: TensorField                  # bivector, (2,0)
    G: TensorField                      # Riemannian metric (0,2)
    g_A: np.ndarray                     # fiber metric on T*M: matrix of G^{-1} = -theta g theta
    cotangent: LieAlgebroidCotangent
    gamma: np.ndarray                   # connection coefficients [c, a, b]
    H_theta: np.ndarray                 # frame 3-form H'(theta., theta., theta.)
    dphi_dual: np.ndarray               # d_theta phi as dual-frame components
    ric: np.ndarray                     # Ricci of the algebroid connection [a, b]
    scalar: Expr                        # G-trace of ric


def build_symplectic(bg: Background, validate: bool = True, tol: float = 1e-9) -> SymplecticPackage:
    chart = bg.chart
    n = chart.dim
    theta = gtb.theta_matrix_from_b(bg.B)  # raises SingularB when not invertible
    ginv = tn.metric_inverse(bg.g)
    G_comps = np.empty((n, n), dtype=object)
    for i, j in itertools.product(range(n), repeat=2):
        G_comps[i, j] = neg(
            esum(
                mul(bg.B.comps[i, a], ginv.comps[a, b], bg.B.comps[b, j])
                for a in range(n) for b in range(n)
            )
        )
    G = TensorField(chart, (DOWN, DOWN), G_comps)
    gtb._check_positive_definite(G)
    dB = tn.exterior_derivative(bg.B)
    cot = LieAlgebroidCotangent.build(theta, dB, validate=validate, tol=tol)
    # g_A = G^{-1} = -theta g theta (inverse without another adjugate pass)
    g_A = np.empty((n, n), dtype=object)
    for a, b in itertools.product(range(n), repeat=2):
        g_A[a, b] = neg(
            esum(
                mul(theta.comps[a, m], bg.g.comps[m, k], theta.comps[k, b])
                for m in range(n) for k in range(n)
            )
        )
    gamma = cot.algebroid.lc_connection(g_A)
    Hp = bg.h_total()
    H_theta = np.empty((n, n, n), dtype=object)
    for a, b, c in itertools.product(range(n), repeat=3):
        H_theta[a, b, c] = esum(
            mul(Hp.comps[i, j, k], theta.comps[i, a], theta.comps[j, b], theta.comps[k, c])
            for i in range(n) for j in range(n) for k in range(n)
        )
    dphi_dual = gtb.d_theta(chart, bg.phi, theta).comps
    _, ric = cot.algebroid.curvature(gamma)
    scalar = esum(
        mul(G.comps[a, b], ric[a, b]) for a in range(n) for b in range(n)
    )
    return SymplecticPackage(chart, theta, G, g_A, cot, gamma, H_theta, dphi_dual, ric, scalar)


def lie_algebroid_lc(theta: TensorField, twist: TensorField, G: TensorField,
                     tol: float = 1e-9):
    """Public wrapper: validate theta against the twist, build the cotangent
    algebroid and the Levi-Civita coefficients for the fiber metric G^{-1}."""
    gtb._check_positive_definite(G)
    cot = LieAlgebroidCotangent.build(theta, twist, validate=True, tol=tol)
    g_A = tn.matrix_inverse(G.comps)
    return cot, cot.algebroid.lc_connection(g_A)


def algebroid_curvature(cot: LieAlgebroidCotangent, gamma: np.ndarray, G: TensorField):
    """(Ricci over the coframe, G-trace scalar) of an algebroid connection."""
    _, ric = cot.algebroid.curvature(gamma)
    n = cot.chart.dim
    scalar = esum(mul(G.comps[a, b], ric[a, b]) for a in range(n) for b in range(n))
    return ric, scalar


def algebroid_laplacian(cot: LieAlgebroidCotangent, gamma: np.ndarray, G: TensorField, phi) -> Expr:
    """Lap(phi) = (nab_{E_k}(d_A phi))(G(d_k)) over the coframe."""
    n = cot.chart.dim
    w = gtb.d_theta(cot.chart, phi, cot.theta).comps
    terms = []
    for k in range(n):
        nab = cot.algebroid.connection_apply_dual(gamma, k, w)
        terms.append(esum(mul(G.comps[a, k], nab[a]) for a in range(n)))
    return esum(terms)


def _pform_inner_dual(P: np.ndarray, Q: np.ndarray, G: TensorField, degree: int) -> Expr:
    """(1/p!) P(E^{i1}..) Q(G E_{i1} ..) for frame p-forms on the cotangent
    algebroid (G lowers the algebroid frame indices)."""
    n = G.chart.dim
    norm = 1.0 / float(np.prod(range(1, degree + 1)))
    terms = []
    for idx in itertools.product(range(n), repeat=degree):
        for jdx in itertools.product(range(n), repeat=degree):
            factors = [P[idx], Q[jdx]]
            factors.extend(G.comps[jdx[s], idx[s]] for s in range(degree))
            terms.append(mul(*factors))
    return mul(norm, esum(terms))


def symplectic_residuals(bg: Background, pkg: SymplecticPackage | None = None):
    """Residual fields of the dual gravity equations:

    1. scalar:  R^theta(G^{-1}) - (1/2) <H'_th, H'_th>_G + 4 Lap_th(phi)
                - 4 |d_th phi|^2_G
    2. symm:    Ric^theta(xi,eta) - (1/2) <i_xi H'_th, i_eta H'_th>_G
                + (nab_xi d_th phi)(eta) + (nab_eta d_th phi)(xi)
    3. skew:    H'_th(xi,eta, G(d_th phi))
                - (1/2) (nab_{E^k} H'_th)(G(E_k), xi, eta)
    """
    if pkg is None:
        pkg = build_symplectic(bg)
    chart = bg.chart
    n = chart.dim
    alg = pkg.cotangent.algebroid
    G = pkg.G
    w = pkg.dphi_dual
    norm2 = esum(mul(G.comps[a, b], w[a], w[b]) for a in range(n) for b in range(n))
    lap_terms = []
    nab_w = [alg.connection_apply_dual(pkg.gamma, k, w) for k in range(n)]
    for k in range(n):
        lap_terms.append(esum(mul(G.comps[a, k], nab_w[k][a]) for a in range(n)))
    lap = esum(lap_terms)
    hh = _pform_inner_dual(pkg.H_theta, pkg.H_theta, G, 3)
    res1 = esum([pkg.scalar, mul(-0.5, hh), mul(4.0, lap), mul(-4.0, norm2)])

    res2 = np.empty((n, n), dtype=object)
    iH = [pkg.H_theta[a] for a in range(n)]  # i_{E^a} H: slice of the first slot
    for a, b in itertools.product(range(n), repeat=2):
        res2[a, b] = esum(
            [
                pkg.ric[a, b],
                mul(-0.5, _pform_inner_dual(iH[a], iH[b], G, 2)),
                nab_w[a][b],
                nab_w[b][a],
            ]
        )

    u = np.array(
        [esum(mul(G.comps[a, m], w[m]) for m in range(n)) for a in range(n)], dtype=object
    )  # G(d_th phi) as a frame section of the algebroid
    nabH = [alg.covariant_derivative_form(pkg.gamma, k, pkg.H_theta, 3) for k in range(n)]
    res3 = np.empty((n, n), dtype=object)
    for a, b in itertools.product(range(n), repeat=2):
        first = esum(mul(pkg.H_theta[a, b, c], u[c]) for c in range(n))
        second = esum(
            mul(G.comps[m, k], nabH[k][m, a, b]) for k in range(n) for m in range(n)
        )
        res3[a, b] = add(first, mul(-0.5, second))
    return (
        res1,
        TensorField(chart, (UP, UP), res2),
        TensorField(chart, (UP, UP), res3),
    )


# ---------------------------------------------------------------------------
# equivalence of the two descriptions
# ---------------------------------------------------------------------------


VANISH_TOL = 1e-7


@dataclass
class EquivalenceReport:
    beta_max: float
    symplectic_max: float
    transport_max: float
    beta_on_shell: bool
    symplectic_on_shell: bool
    verdict: str


def theta_transported_connection(bg: Background, pkg: SymplecticPackage | None = None):
    """The dilaton connection pulled back through the bivector shear; its
    metric is the block-diagonal package of G."""
    if pkg is None:
        pkg = build_symplectic(bg)
    conn = gconn.dilaton_connection(bg.g, bg.B, bg.H, bg.phi)
    return conn, gconn.theta_transport(conn, pkg.theta, bg.B, pkg.G), pkg


def transport_identity_residual(bg: Background, pkg: SymplecticPackage | None = None):
    """Ric_theta(psi, psi') - Ric(F_theta psi, F_theta psi') on the frame."""
    conn, conn_theta, pkg = theta_transported_connection(bg, pkg)
    F, _ = gtb.theta_twist_matrices(pkg.theta, bg.B)
    ric = gconn.ricci(conn)
    ric_theta = gconn.ricci(conn_theta)
    dim2 = 2 * bg.chart.dim
    out = np.empty((dim2, dim2), dtype=object)
    for a, b in itertools.product(range(dim2), repeat=2):
        out[a, b] = add(
            ric_theta[a, b],
            neg(
                esum(
                    mul(ric[c, d], F[c, a], F[d, b])
                    for c in range(dim2) for d in range(dim2)
                )
            ),
        )
    return out, conn, conn_theta, pkg


def equivalence_report(bg: Background, tol: float = 1e-9) -> EquivalenceReport:
    points = bg.chart.sample_points()
    betas = beta_all(bg)
    pkg = build_symplectic(bg)
    res1, res2, res3 = symplectic_residuals(bg, pkg)
    beta_max = betas.max_abs(points)[0]
    sym_fields = [res1] + list(res2.comps.reshape(-1)) + list(res3.comps.reshape(-1))
    sym_max = ex.max_abs_on_points(sym_fields, points)[0]
    transport, _, _, _ = transport_identity_residual(bg, pkg)
    transport_max = ex.max_abs_on_points(transport, points)[0]
    beta_on = beta_max < VANISH_TOL
    sym_on = sym_max < VANISH_TOL
    if beta_on and sym_on:
        verdict = "equivalent: both on-shell"
    elif not beta_on and not sym_on:
        verdict = "equivalent: both off-shell"
    else:
        verdict = "inconsistent: one family vanishes without the other"
    return EquivalenceReport(beta_max, sym_max, transport_max, beta_on, sym_on, verdict)
