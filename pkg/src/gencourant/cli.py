"""Command dispatch: evaluate identity suites on a scene and emit a JSON
report.

    gencourant <command> <scene.json> [--seed N] [--points N]
               [--tol-sym X] [--tol-fd X] [--policy reject|project]
               [--out report.json]

Commands: axioms, torsion, curvature, beta, central, symplectic,
equivalence, all.  Exit codes: 0 every enabled check passed, 1 a check
failed, 2 input error, 3 internal error.
"""

from __future__ import annotations

import argparse
import itertools
import sys
import time

import numpy as np

from . import expr as ex
from . import gconn
from . import gtb
from . import riemann as rm
from . import streff
from . import tensors as tn
from .errors import CommandError, GencourantError, SceneError, SingularB
from .scene import Check, Report, Scene, load_scene

COMMANDS = ("axioms", "torsion", "curvature", "beta", "central", "symplectic", "equivalence", "all")


def _check(name, identity, fields, points, tol) -> Check:
    worst, at = ex.max_abs_on_points(fields, points)
    return Check(name, identity, worst, tol, at)


def _flat(arrays):
    out = []
    for a in arrays:
        if isinstance(a, np.ndarray):
            out.extend(a.reshape(-1))
        elif isinstance(a, tn.TensorField):
            out.extend(a.comps.reshape(-1))
        else:
            out.append(a)
    return out


# ---------------------------------------------------------------------------
# check suites
# ---------------------------------------------------------------------------


def checks_axioms(scene: Scene) -> list:
    bg = scene.background
    chart = scene.chart
    pts = chart.sample_points()
    tol = scene.tol("sym")
    H = bg.h_total()
    gen = chart.rng(1009)
    triples = [tuple(gtb.random_section(chart, gen) for _ in range(3)) for _ in range(3)]
    out = []

    jac = _flat([gtb.jacobiator(a, b, c, H).components() for a, b, c in triples])
    out.append(_check("axioms.leibniz-identity",
                      "in-bracket derivation rule (Jacobiator residual)", jac, pts, tol))

    inv = []
    for a, b, c in triples:
        lhs = ex.esum(
            ex.mul(a.vec.comps[m], ex.differentiate(gtb.pairing(b, c), chart.coord(m)))
            for m in range(chart.dim)
        )
        rhs = gtb.pairing(gtb.dorfman(a, b, H, False), c) + gtb.pairing(b, gtb.dorfman(a, c, H, False))
        inv.append(lhs - rhs)
    out.append(_check("axioms.pairing-invariance",
                      "anchored derivative of the pairing splits over the bracket", inv, pts, tol))

    sym = _flat([
        (gtb.dorfman(a, b, H, False) + gtb.dorfman(b, a, H, False)
         - gtb.d_map(chart, gtb.pairing(a, b))).components()
        for a, b, _ in triples
    ])
    out.append(_check("axioms.symmetric-part",
                      "symmetrized bracket is the differential of the pairing", sym, pts, tol))

    f = ex.random_polynomial(chart, gen)
    g2 = ex.random_polynomial(chart, gen)
    props = _flat([gtb.dorfman(gtb.d_map(chart, f), triples[0][0], H, False).components()])
    props.append(gtb.pairing(gtb.d_map(chart, f), gtb.d_map(chart, g2)))
    out.append(_check("axioms.differential-image",
                      "differential image is central and isotropic", props, pts, tol))

    a, b, _ = triples[1]
    rhof = ex.esum(
        ex.mul(b.vec.comps[m], ex.differentiate(f, chart.coord(m))) for m in range(chart.dim)
    )
    left = (
        gtb.dorfman(a.scale(f), b, H, False)
        - gtb.dorfman(a, b, H, False).scale(f)
        + a.scale(rhof)
        - gtb.d_map(chart, f).scale(gtb.pairing(a, b))
    )
    out.append(_check("axioms.left-leibniz",
                      "left multiplication rule of the bracket", left.components(), pts, tol))

    morph = _flat([
        (gtb.dorfman(a, b, H, False).vec - tn.lie_bracket(a.vec, b.vec)).comps
        for a, b, _ in triples
    ])
    out.append(_check("axioms.anchor-morphism",
                      "anchor sends the bracket to the vector-field commutator", morph, pts, tol))

    gm = gtb.gen_metric(bg.g, bg.B)
    tau = gm.tau_matrix()
    dim2 = 2 * chart.dim
    tau2 = []
    for i, j in itertools.product(range(dim2), repeat=2):
        want = ex.ONE if i == j else ex.ZERO
        tau2.append(ex.esum(ex.mul(tau[i, k], tau[k, j]) for k in range(dim2)) - want)
    out.append(_check("axioms.involution", "squared metric involution is the identity",
                      tau2, pts, tol))

    proj = []
    genv = chart.rng(1013)
    X = tn.from_function(chart, ("up",), lambda i: ex.random_polynomial(chart, genv))
    plus, minus = gm.psi_plus(X), gm.psi_minus(X)
    proj.extend((gm.project(plus, +1) - plus).components())
    proj.extend(gm.project(plus, -1).components())
    proj.extend((gm.project(minus, -1) - minus).components())
    proj.extend(gm.project(minus, +1).components())
    out.append(_check("axioms.eigenbundle-graphs",
                      "graph embeddings land in the projector eigenbundles", proj, pts, tol))

    hdiff = [a - b for a, b in
             zip(gm.h_form().comps.reshape(-1), gm.g_inv.comps.reshape(-1))]
    out.append(_check("axioms.induced-form",
                      "induced cotangent form equals the inverse metric", hdiff, pts, tol))

    shear = gtb.twisted_bracket_check(bg.B, bg.H)
    out.append(Check("axioms.shear-intertwines-brackets",
                     "the 2-form shear maps the shifted twist bracket to the original",
                     shear, tol, pts[0]))

    # finite-difference consistency of the expression engine on phi
    fd = []
    h = 1e-4
    for m in range(chart.dim):
        d = ex.differentiate(bg.phi, chart.coord(m))
        for p in pts[:4]:
            up = list(p)
            dn = list(p)
            up[m] += h
            dn[m] -= h
            cd = (ex.evaluate(bg.phi, up) - ex.evaluate(bg.phi, dn)) / (2 * h)
            fd.append(abs(cd - ex.evaluate(d, p)))
    out.append(Check("axioms.derivative-fd-consistency",
                     "symbolic derivatives agree with central differences",
                     max(fd) if fd else 0.0, scene.tol("fd"), pts[0]))
    return out


def checks_torsion(scene: Scene) -> list:
    bg = scene.background
    chart = scene.chart
    pts = chart.sample_points()
    Hp = bg.h_total()
    out = []
    minimal = gconn.minimal_connection(bg.g, Hp)
    T0 = gconn.gualtieri_torsion(minimal)
    out.append(_check("torsion.minimal-vanishes",
                      "distinguished connection is torsion-free", _flat([T0]), pts,
                      scene.tol("strict")))
    base = gconn.block_lc_connection(bg.g, Hp)
    T = gconn.gualtieri_torsion(base)
    n = chart.dim
    pullback = []
    for a, b, c in itertools.product(range(2 * n), repeat=3):
        want = Hp.comps[a, b, c] if max(a, b, c) < n else ex.ZERO
        pullback.append(T[a, b, c] - want)
    out.append(_check("torsion.block-transport-pullback",
                      "block transport torsion is the anchor pullback of the twist",
                      pullback, pts, scene.tol("sym")))
    anti = []
    for i, j in ((0, 1), (1, 2)):
        swapped = np.swapaxes(T, i, j)
        anti.extend(p + q for p, q in zip(T.reshape(-1), swapped.reshape(-1)))
    out.append(_check("torsion.total-antisymmetry",
                      "torsion 3-form is totally antisymmetric", anti, pts, scene.tol("sym")))
    out.append(_check("torsion.pairing-compatibility",
                      "connection coefficients are skew in the pairing",
                      _flat([gconn.pairing_compat_residual(minimal)]), pts, scene.tol("strict")))
    out.append(_check("torsion.metric-compatibility",
                      "block metric is parallel", _flat([gconn.metric_compat_residual(minimal)]),
                      pts, scene.tol("sym")))
    return out


def checks_curvature(scene: Scene) -> list:
    bg = scene.background
    chart = scene.chart
    pts = chart.sample_points()
    tol = scene.tol("sym")
    Hp = bg.h_total()
    out = []
    minimal = gconn.minimal_connection(bg.g, Hp)
    r = gconn.gen_riemann(minimal)
    dim2 = 2 * chart.dim
    sym1, sym2, sym3, sym4, bianchi = [], [], [], [], []
    for d, c, a, b in itertools.product(range(dim2), repeat=4):
        sym1.append(r[d, c, a, b] + r[d, c, b, a])
        sym2.append(r[d, c, a, b] + r[c, d, a, b])
        sym3.append(r[d, c, a, b] - r[b, a, c, d])
        sym4.append(r[d, c, a, b] - r[a, b, d, c])
        bianchi.append(ex.esum([r[d, c, a, b], r[d, a, b, c], r[d, b, c, a]]))
    out.append(_check("curvature.skew-last-pair", "curvature tensor is skew in the bracket slots",
                      sym1, pts, tol))
    out.append(_check("curvature.skew-first-pair", "curvature tensor is skew in the value slots",
                      sym2, pts, tol))
    out.append(_check("curvature.pair-swap", "curvature tensor is symmetric under swapping the two pairs",
                      sym3, pts, tol))
    out.append(_check("curvature.interchange", "interchange symmetry of the curvature tensor",
                      sym4, pts, tol))
    out.append(_check("curvature.bianchi-torsion-free", "algebraic Bianchi identity, torsion-free case",
                      bianchi, pts, tol))
    base = gconn.block_lc_connection(bg.g, Hp)
    out.append(_check("curvature.bianchi-torsionful",
                      "algebraic Bianchi identity with torsion terms",
                      _flat([gconn.bianchi_residual(base)]), pts, tol))
    out.append(_check("curvature.pairing-scalar-vanishes",
                      "pairing trace of the distinguished connection vanishes",
                      [gconn.scalar_E(minimal)], pts, scene.tol("strict")))
    _, _, rscal = rm.curvature_package(bg.g)
    closed = rscal - 0.5 * rm.form_inner(Hp, Hp, bg.g)
    out.append(_check("curvature.metric-scalar-closed-form",
                      "metric trace equals chart scalar minus half the twist norm",
                      [gconn.scalar_G(minimal) - closed], pts, tol))
    out.append(_check("curvature.characteristic-field-minimal",
                      "characteristic vector field of the distinguished connection vanishes",
                      _flat([gconn.char_vf(minimal)]), pts, scene.tol("strict")))

    # one random parameter pair: stays in the family, scalars follow the
    # closed forms in the partial traces
    gen = chart.rng(1021)
    J = tn.antisymmetrize(
        tn.from_function(chart, ("up",) * 3, lambda *i: ex.random_polynomial(chart, gen, 2, 0.2)),
        (1, 2),
    )
    W = tn.antisymmetrize(
        tn.from_function(chart, ("down",) * 3, lambda *i: ex.random_polynomial(chart, gen, 2, 0.2)),
        (1, 2),
    )
    params = gconn.validate_params(J, W, policy="project")
    conn = gconn.with_params(minimal, params)
    out.append(_check("curvature.family-torsion-free",
                      "parameter deformations stay torsion-free",
                      _flat([gconn.gualtieri_torsion(conn)]), pts, tol))
    K = gconn.param_tensor_frame(params, bg.g)
    out.append(_check("curvature.trace-identity",
                      "quadratic trace identity of the deformation tensor",
                      [gconn.trace_identity_residual(minimal, K)], pts, scene.tol("strict")))
    return out


def checks_beta(scene: Scene) -> list:
    bg = scene.background
    pts = scene.chart.sample_points()
    tol = scene.tol("sym")
    betas = streff.beta_all(bg)
    out = []
    other = streff.beta_b_conformal_form(bg)
    out.append(_check("beta.antisymmetric-two-forms-agree",
                      "divergence and conformally weighted forms of the antisymmetric residual",
                      [a - b for a, b in zip(betas.beta_B.comps.reshape(-1), other.comps.reshape(-1))],
                      pts, tol))
    index = streff.beta_g_index_form(bg)
    out.append(_check("beta.symmetric-index-free-agree",
                      "index and index-free assemblies of the symmetric residual",
                      [a - b for a, b in zip(betas.beta_g.comps.reshape(-1), index.comps.reshape(-1))],
                      pts, tol))
    Hp = bg.h_total()
    lap, _, norm2 = rm.laplace_divergence(bg.phi, bg.g)
    direct = -0.5 * lap + norm2 - 0.25 * rm.form_inner(Hp, Hp, bg.g)
    out.append(_check("beta.scalar-combination",
                      "dependent scalar equals its direct assembly",
                      [betas.beta_phi_prime - direct], pts, 1e-12))
    return out


def checks_central(scene: Scene) -> list:
    bg = scene.background
    pts = scene.chart.sample_points()
    tol = scene.tol("sym")
    res = streff.central_residuals(bg)
    return [
        _check("central.scalar-identity",
               "metric Ricci trace of the dilaton connection equals the scalar residual",
               [res.scalar_residual], pts, tol),
        _check("central.off-block-identity",
               "off-block Ricci equals symmetric minus antisymmetric residual",
               _flat([res.ricci_residual]), pts, tol),
    ]


def _require_symplectic(scene: Scene):
    if scene.chart.dim % 2 == 1:
        raise CommandError("symplectic checks need an even-dimensional chart (B is singular)")
    try:
        return streff.build_symplectic(scene.background)
    except SingularB as err:
        raise CommandError(f"symplectic checks need an invertible B: {err}") from err


def checks_symplectic(scene: Scene, pkg=None) -> list:
    bg = scene.background
    chart = scene.chart
    pts = chart.sample_points()
    tol = scene.tol("sym")
    if pkg is None:
        pkg = _require_symplectic(scene)
    out = []
    res_sch = gtb.schouten_check(pkg.theta, tn.exterior_derivative(bg.B))
    out.append(_check("symplectic.twisted-jacobi",
                      "inverse bivector satisfies the twisted Jacobi identity",
                      _flat([res_sch]), pts, tol))
    alg = pkg.cotangent.algebroid
    n = chart.dim
    torsion = []
    compat = []
    for a, b, c in itertools.product(range(n), repeat=3):
        torsion.append(pkg.gamma[c, a, b] - pkg.gamma[c, b, a] - alg.structure[c, a, b])
        lhs = alg.frame_derivative(a, pkg.g_A[b, c])
        rhs = ex.esum(
            [ex.mul(pkg.gamma[d, a, b], pkg.g_A[d, c]) for d in range(n)]
            + [ex.mul(pkg.gamma[d, a, c], pkg.g_A[b, d]) for d in range(n)]
        )
        compat.append(lhs - rhs)
    out.append(_check("symplectic.algebroid-torsion-free",
                      "coframe connection is torsion-free", torsion, pts, tol))
    out.append(_check("symplectic.algebroid-compatibility",
                      "coframe connection preserves the fiber metric", compat, pts, tol))
    res1, res2, res3 = streff.symplectic_residuals(bg, pkg)
    _, conn_theta, _ = streff.theta_transported_connection(bg, pkg)
    out.append(_check("symplectic.scalar-two-paths",
                      "coframe scalar residual equals the sheared metric Ricci trace",
                      [res1 - gconn.scalar_G(conn_theta)], pts, tol))
    return out


def checks_equivalence(scene: Scene) -> list:
    bg = scene.background
    pts = scene.chart.sample_points()
    tol = scene.tol("sym")
    pkg = _require_symplectic(scene)
    residual, _, _, _ = streff.transport_identity_residual(bg, pkg)
    rep = streff.equivalence_report(bg)
    agree = 0.0 if rep.beta_on_shell == rep.symplectic_on_shell else max(rep.beta_max, rep.symplectic_max)
    return [
        _check("equivalence.ricci-transport",
               "Ricci tensors match through the bivector shear", _flat([residual]), pts, tol),
        Check("equivalence.simultaneous-vanishing",
              "the two residual families vanish together", agree, streff.VANISH_TOL, pts[0]),
    ], rep


SUITES = {
    "axioms": checks_axioms,
    "torsion": checks_torsion,
    "curvature": checks_curvature,
    "beta": checks_beta,
    "central": checks_central,
}


def run_command(cmd: str, scene: Scene) -> Report:
    if cmd not in COMMANDS:
        raise CommandError(f"unknown command '{cmd}' (choose from {', '.join(COMMANDS)})")
    start = time.perf_counter()
    checks = []
    summary = {}
    pts = scene.chart.sample_points()
    if cmd in SUITES:
        checks = SUITES[cmd](scene)
        if cmd == "beta":
            betas = streff.beta_all(scene.background)
            worst, at = betas.max_abs(pts)
            summary["beta_max_abs"] = worst
            summary["beta_on_shell"] = worst < streff.VANISH_TOL
    elif cmd == "symplectic":
        checks = checks_symplectic(scene)
        res1, res2, res3 = streff.symplectic_residuals(scene.background)
        worst, _ = ex.max_abs_on_points(_flat([res1, res2, res3]), pts)
        summary["symplectic_max_abs"] = worst
        summary["symplectic_on_shell"] = worst < streff.VANISH_TOL
    elif cmd == "equivalence":
        checks, rep = checks_equivalence(scene)
        summary.update(
            beta_max_abs=rep.beta_max,
            symplectic_max_abs=rep.symplectic_max,
            beta_on_shell=rep.beta_on_shell,
            symplectic_on_shell=rep.symplectic_on_shell,
            verdict_text=rep.verdict,
        )
    elif cmd == "all":
        for name in ("axioms", "torsion", "curvature", "beta", "central"):
            checks.extend(SUITES[name](scene))
        betas = streff.beta_all(scene.background)
        summary["beta_max_abs"] = betas.max_abs(pts)[0]
        summary["beta_on_shell"] = summary["beta_max_abs"] < streff.VANISH_TOL
        try:
            pkg = _require_symplectic(scene)
        except CommandError as err:
            summary["symplectic_skipped"] = str(err)
        else:
            checks.extend(checks_symplectic(scene, pkg))
            eq_checks, rep = checks_equivalence(scene)
            checks.extend(eq_checks)
            summary.update(
                symplectic_max_abs=rep.symplectic_max,
                symplectic_on_shell=rep.symplectic_on_shell,
                verdict_text=rep.verdict,
            )
    elapsed = time.perf_counter() - start
    return Report(
        command=cmd,
        scene=scene.name,
        seed=scene.chart.seed,
        num_points=scene.chart.num_points,
        checks=checks,
        summary=summary,
        timing_seconds=elapsed,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gencourant",
        description="Residual checks for generalized-geometry backgrounds on a chart.",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("scene", help="scene JSON file")
    parser.add_argument("--seed", type=int, default=None, help="override the chart seed")
    parser.add_argument("--points", type=int, default=None, help="override the sample count")
    parser.add_argument("--tol-sym", type=float, default=None, help="symbolic identity tolerance")
    parser.add_argument("--tol-fd", type=float, default=None, help="finite-difference tolerance")
    parser.add_argument("--policy", choices=("reject", "project"), default=None)
    parser.add_argument("--out", default=None, help="write the JSON report here instead of stdout")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        scene = load_scene(args.scene, seed=args.seed, points=args.points)
        if args.tol_sym is not None:
            scene.tolerances["sym"] = args.tol_sym
        if args.tol_fd is not None:
            scene.tolerances["fd"] = args.tol_fd
        if args.policy is not None:
            scene.policy = args.policy
        report = run_command(args.command, scene)
    except (SceneError, CommandError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except GencourantError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except Exception as err:  # pragma: no cover - internal faults
        print(f"internal error: {type(err).__name__}: {err}", file=sys.stderr)
        return 3
    text = report.to_json()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    for check in sorted(report.checks, key=lambda c: c.name):
        mark = "ok  " if check.passed else "FAIL"
        print(f"{mark} {check.name}: {check.max_abs_residual:.3e} (tol {check.tolerance:.1e})",
              file=sys.stderr)
    print(f"verdict: {'pass' if report.passed else 'fail'}", file=sys.stderr)
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
