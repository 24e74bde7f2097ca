"""Command-line front end: parse observables, dispatch computations, emit
machine-readable results.

Exit codes: 0 success, 1 usage error, 2 expression parse error, 3 check
failure, 4 numerical failure.  With a fixed seed every invocation is
byte-deterministic.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from . import mech, polarize, prequant, symplin
from .expr import (
    Add,
    Const,
    DomainError,
    EvalError,
    Expr,
    Mul,
    ParseError,
    PhaseSpace,
    evaluate,
    parse,
    random_points,
    simplify,
)

try:
    import tomllib as _toml
except ModuleNotFoundError:  # python < 3.11
    import tomli as _toml

__all__ = ["main", "RunConfig", "parse_one_form"]

USAGE_ERROR = 1
PARSE_ERROR = 2
CHECK_FAILURE = 3
NUMERICAL_FAILURE = 4


@dataclass
class RunConfig:
    n: int = 1
    hbar: float = 1.0
    mass: float = 1.0
    fmt: str = "json"
    output: str | None = None
    seed: int = 0
    params: dict = field(default_factory=dict)

    @property
    def space(self) -> PhaseSpace:
        return PhaseSpace(self.n, hbar=self.hbar, mass=self.mass)

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)


def _common_options() -> argparse.ArgumentParser:
    # SUPPRESS defaults keep subparser parses from clobbering values that
    # were already set before the subcommand
    common = _Parser(add_help=False)
    g = common.add_argument_group("common options")
    g.add_argument("--config", default=argparse.SUPPRESS,
                   help="TOML config file; explicit flags take precedence")
    g.add_argument("--n", type=int, default=argparse.SUPPRESS,
                   help="degrees of freedom (default 1)")
    g.add_argument("--hbar", type=float, default=argparse.SUPPRESS,
                   help="value of hbar (default 1)")
    g.add_argument("--mass", type=float, default=argparse.SUPPRESS,
                   help="value of m (default 1)")
    g.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                   help="random seed for sampling checks (default 0)")
    g.add_argument("--format", dest="fmt", choices=["json", "csv"],
                   default=argparse.SUPPRESS, help="output format")
    g.add_argument("--output", default=argparse.SUPPRESS,
                   help="write results to this path instead of stdout")
    g.add_argument("--param", action="append", default=argparse.SUPPRESS,
                   metavar="NAME=VALUE", help="bind a free symbol, repeatable")
    return common


def _build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    ap = _Parser(prog="geomquant", description=__doc__, parents=[common])
    sub = ap.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bracket", parents=[common],
                       help="Poisson bracket of two observables")
    b.add_argument("f")
    b.add_argument("g")

    fl = sub.add_parser("flow", parents=[common], help="integrate Hamilton's equations")
    fl.add_argument("hamiltonian")
    fl.add_argument("--state0", required=True, help="comma-separated x1..xn,p1..pn")
    fl.add_argument("--t-end", type=float, required=True)
    fl.add_argument("--dt", type=float, required=True)

    ck = sub.add_parser("check", parents=[common], help="run a residual suite")
    ck.add_argument("suite", choices=["poisson", "curvature", "commutator",
                                      "liouville", "polarization"])
    ck.add_argument("--theta", help="override 1-form, e.g. '2*p1 dx1' (curvature suite)")
    ck.add_argument("--trials", type=int, default=40)

    spc = sub.add_parser("spectrum", parents=[common],
                         help="eigenvalues of a truncated quantization")
    spc.add_argument("space_kind", nargs="?", choices=["prequantum-ho", "bargmann"],
                     metavar="space", help="prequantum-ho | bargmann")
    spc.add_argument("--space", dest="space_flag",
                     choices=["prequantum-ho", "bargmann"],
                     help="alternative to the positional space argument")
    spc.add_argument("--K", type=int, default=5)

    pq = sub.add_parser("prequantize", parents=[common],
                        help="apply Q_pre(f) to a section")
    pq.add_argument("f")
    pq.add_argument("--section", default="1")
    pq.add_argument("--gauge", choices=["theta", "theta-tilde"], default="theta")

    cl = sub.add_parser("classify", parents=[common],
                        help="classify a subspace from a JSON matrix file")
    cl.add_argument("input", help="JSON file with keys 'omega' and 'subspace' (row vectors)")

    return ap


def _load_config(ns) -> RunConfig:
    cfg = RunConfig()
    config_path = getattr(ns, "config", None)
    if config_path:
        with open(config_path, "rb") as fh:
            data = _toml.load(fh)
        space = data.get("space", {})
        cfg.n = int(space.get("n", cfg.n))
        cfg.hbar = float(space.get("hbar", cfg.hbar))
        cfg.mass = float(space.get("mass", cfg.mass))
        out = data.get("output", {})
        cfg.fmt = str(out.get("format", cfg.fmt))
        cfg.output = out.get("path", cfg.output)
        cfg.seed = int(data.get("seed", cfg.seed))
        cfg.params.update({k: float(v) for k, v in data.get("params", {}).items()})
    for attr, dest in (("n", "n"), ("hbar", "hbar"), ("mass", "mass"),
                       ("seed", "seed"), ("fmt", "fmt"), ("output", "output")):
        val = getattr(ns, attr, None)
        if val is not None:
            setattr(cfg, dest, val)
    for item in getattr(ns, "param", []) or []:
        name, _, value = item.partition("=")
        if not name or not value:
            raise SystemExit(USAGE_ERROR)
        cfg.params[name] = float(value)
    return cfg


def _emit(cfg: RunConfig, text: str) -> None:
    if cfg.output:
        with open(cfg.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


_FORM_TERM_RE = re.compile(r"^(.*?)\s*d([xp])(\d+)$")


def parse_one_form(text: str, space: PhaseSpace) -> prequant.ConnectionForm:
    """Parse 'c1 dx1 + c2 dp1 - ...' into a ConnectionForm.

    Each term is a coefficient expression followed by dxJ or dpJ; an empty
    coefficient means 1.  Signs between terms fold into the coefficients.
    """
    comps: list[Expr] = [Const(0)] * space.dim
    terms: list[tuple[str, str]] = []
    depth = 0
    current = []
    sign = "+"
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch in "+-" and depth == 0:
            if "".join(current).strip():
                terms.append((sign, "".join(current)))
                current = []
            sign = ch
        else:
            current.append(ch)
    if "".join(current).strip():
        terms.append((sign, "".join(current)))
    if not terms:
        raise ParseError("empty 1-form", 0)
    for s, chunk in terms:
        mo = _FORM_TERM_RE.match(chunk.strip())
        if not mo:
            raise ParseError(f"1-form term {chunk.strip()!r} must end in dxJ or dpJ", 0)
        coeff_src, kind, idx = mo.group(1).strip(), mo.group(2), int(mo.group(3))
        if not 1 <= idx <= space.n:
            raise ParseError(f"coordinate index out of range in d{kind}{idx}", 0)
        coeff_src = coeff_src.rstrip("*").strip() or "1"
        coeff = parse(coeff_src, space)
        if s == "-":
            coeff = Mul((Const(-1), coeff))
        slot = (idx - 1) if kind == "x" else (space.n + idx - 1)
        comps[slot] = simplify(Add((comps[slot], coeff)))
    return prequant.ConnectionForm(tuple(comps))


# ---------------------------------------------------------------------------
# subcommands

def _cmd_bracket(cfg: RunConfig, ns) -> int:
    space = cfg.space
    f = parse(ns.f, space)
    g = parse(ns.g, space)
    br = mech.poisson_bracket(f, g, space)
    pts = random_points(space, cfg.rng(), 5, 1.0)
    vals = np.broadcast_to(
        np.asarray(evaluate(br, space, pts, cfg.params), dtype=complex), pts.shape[1:])
    if cfg.fmt == "json":
        payload = {
            "bracket": str(br),
            "samples": [
                {"point": [repr(float(v)) for v in pts[:, k]],
                 "value": [repr(float(vals[k].real)), repr(float(vals[k].imag))]}
                for k in range(pts.shape[1])
            ],
        }
        _emit(cfg, json.dumps(payload, sort_keys=True, indent=2))
    else:
        lines = ["bracket," + str(br)]
        header = ",".join(space.coordinates) + ",value_re,value_im"
        lines.append(header)
        for k in range(pts.shape[1]):
            lines.append(",".join(repr(float(v)) for v in pts[:, k])
                         + f",{float(vals[k].real)!r},{float(vals[k].imag)!r}")
        _emit(cfg, "\n".join(lines) + "\n")
    return 0


def _cmd_flow(cfg: RunConfig, ns) -> int:
    space = cfg.space
    H = parse(ns.hamiltonian, space)
    state0 = [float(v) for v in ns.state0.split(",")]
    traj = mech.flow(H, space, state0, ns.t_end, ns.dt, params=cfg.params)
    drift = traj.energy_drift(H, space, cfg.params)
    body = traj.to_csv() if cfg.fmt == "csv" else traj.to_json()
    _emit(cfg, body)
    print(f"max energy drift: {drift!r}", file=sys.stderr)
    return 0


def _suite_poisson(cfg: RunConfig, ns) -> dict:
    space = cfg.space
    rng = cfg.rng()
    pts = random_points(space, rng, 100, 1.0)
    worst = {"antisymmetry": 0.0, "bilinearity": 0.0, "leibniz": 0.0, "jacobi": 0.0}
    for _ in range(ns.trials):
        f = ex.random_polynomial(space, rng)
        g = ex.random_polynomial(space, rng)
        h = ex.random_polynomial(space, rng)
        fg = mech.poisson_bracket(f, g, space)
        worst["antisymmetry"] = max(worst["antisymmetry"], ex.max_rel_residual(
            fg, simplify(Const(-1) * mech.poisson_bracket(g, f, space)), space, pts))
        a, b = 2.0, -3.0
        lin = mech.poisson_bracket(simplify(Const(a) * f + Const(b) * g), h, space)
        lin_rhs = simplify(Const(a) * mech.poisson_bracket(f, h, space)
                           + Const(b) * mech.poisson_bracket(g, h, space))
        worst["bilinearity"] = max(worst["bilinearity"], ex.max_rel_residual(
            lin, lin_rhs, space, pts))
        lei = mech.poisson_bracket(f, simplify(g * h), space)
        lei_rhs = simplify(mech.poisson_bracket(f, g, space) * h
                           + mech.poisson_bracket(f, h, space) * g)
        worst["leibniz"] = max(worst["leibniz"], ex.max_rel_residual(lei, lei_rhs, space, pts))
        jac = mech.poisson_bracket(f, mech.poisson_bracket(g, h, space), space)
        jac_rhs = simplify(
            mech.poisson_bracket(fg, h, space)
            + mech.poisson_bracket(g, mech.poisson_bracket(f, h, space), space))
        worst["jacobi"] = max(worst["jacobi"], ex.max_rel_residual(jac, jac_rhs, space, pts))
    return {"residuals": worst, "threshold": 1e-8,
            "pass": all(v < 1e-8 for v in worst.values())}


def _random_field(space: PhaseSpace, rng) -> mech.VectorFieldExpr:
    return mech.VectorFieldExpr(tuple(
        ex.random_polynomial(space, rng, degree=2, terms=2) for _ in range(space.dim)))


def _suite_curvature(cfg: RunConfig, ns) -> dict:
    space = cfg.space
    rng = cfg.rng()
    pts = random_points(space, rng, 50, 1.0)
    if ns.theta:
        thetas = {"custom": parse_one_form(ns.theta, space)}
    else:
        thetas = {
            "tautological": prequant.ConnectionForm.tautological(space),
            "symmetrized": prequant.ConnectionForm.symmetrized(space),
        }
    worst = {}
    for name, theta in thetas.items():
        w = 0.0
        for _ in range(ns.trials):
            X = _random_field(space, rng)
            Y = _random_field(space, rng)
            s = ex.random_polynomial(space, rng, degree=2, terms=2)
            res = prequant.curvature_check(theta, X, Y, s, space)
            vals = np.atleast_1d(np.asarray(evaluate(res, space, pts), dtype=complex))
            w = max(w, float(np.max(np.abs(vals))))
        worst[name] = w
    return {"residuals": worst, "threshold": 1e-8,
            "pass": all(v < 1e-8 for v in worst.values())}


def _suite_commutator(cfg: RunConfig, ns) -> dict:
    space = cfg.space
    rng = cfg.rng()
    pts = random_points(space, rng, 50, 1.0)
    theta = prequant.ConnectionForm.tautological(space)
    w = 0.0
    for _ in range(ns.trials):
        f = ex.random_polynomial(space, rng, degree=3, terms=2)
        g = ex.random_polynomial(space, rng, degree=3, terms=2)
        s = ex.random_polynomial(space, rng, degree=2, terms=2)
        res = prequant.commutator_residual(f, g, s, theta, space)
        vals = np.atleast_1d(np.asarray(evaluate(res, space, pts), dtype=complex))
        w = max(w, float(np.max(np.abs(vals))))
    return {"residuals": {"commutator": w}, "threshold": 1e-7, "pass": w < 1e-7}


def _suite_liouville(cfg: RunConfig, ns) -> dict:
    space = cfg.space
    rng = cfg.rng()
    pts = random_points(space, rng, 100, 1.0)
    w = 0.0
    for _ in range(ns.trials):
        f = ex.random_polynomial(space, rng, degree=4, terms=3)
        div = mech.liouville_divergence(f, space)
        vals = np.atleast_1d(np.asarray(evaluate(div, space, pts), dtype=float))
        w = max(w, float(np.max(np.abs(vals))))
    H = parse("p1^2/2 + x1^4/4" if space.n == 1 else "p1^2/2 + x1^2*x2^2/4", space)
    step = mech.flow_step_map(H, space, 0.01, tol=1e-14)
    s0 = np.linspace(0.3, 0.9, space.dim)
    eps = 1e-5
    J = np.zeros((space.dim, space.dim))
    for k in range(space.dim):
        d = np.zeros(space.dim)
        d[k] = eps
        J[:, k] = (step(s0 + d) - step(s0 - d)) / (2 * eps)
    det_err = abs(float(np.linalg.det(J)) - 1.0)
    return {"residuals": {"divergence": w, "jacobian_det_minus_1": det_err},
            "threshold": {"divergence": 1e-8, "jacobian_det_minus_1": 1e-6},
            "pass": w < 1e-8 and det_err < 1e-6}


def _suite_polarization(cfg: RunConfig, ns) -> dict:
    space = cfg.space
    rng = cfg.rng()
    vertical = polarize.polarization_check(polarize.vertical_distribution(space), space, rng)
    holo = polarize.polarization_check(polarize.holomorphic_distribution(space), space, rng)
    ok = (vertical.involutive and vertical.lagrangian
          and holo.involutive and holo.lagrangian and holo.const_intersection)
    report = {
        "residuals": {
            "vertical": vars(vertical),
            "holomorphic": vars(holo),
        },
        "pass": ok,
    }
    if space.n >= 2:
        gens = (
            mech.VectorFieldExpr(tuple(
                Const(1 if k == 0 else 0) for k in range(space.dim))),
            mech.VectorFieldExpr(tuple(
                ex.Sym("x1") if k == space.n else Const(1 if k == space.n + 1 else 0)
                for k in range(space.dim))),
        )
        bad = polarize.polarization_check(polarize.Distribution(gens), space, rng)
        report["residuals"]["non_involutive_control"] = vars(bad)
        report["pass"] = report["pass"] and not bad.involutive
    return report


def _cmd_check(cfg: RunConfig, ns) -> int:
    suites = {
        "poisson": _suite_poisson,
        "curvature": _suite_curvature,
        "commutator": _suite_commutator,
        "liouville": _suite_liouville,
        "polarization": _suite_polarization,
    }
    report = suites[ns.suite](cfg, ns)
    payload = {"suite": ns.suite, "seed": cfg.seed, **report}
    _emit(cfg, json.dumps(payload, sort_keys=True, indent=2, default=repr))
    return 0 if report["pass"] else CHECK_FAILURE


def _cmd_spectrum(cfg: RunConfig, ns) -> int:
    kind = ns.space_kind or ns.space_flag
    if ns.K < 0 or kind is None:
        raise SystemExit(USAGE_ERROR)
    ns.space_kind = kind
    space = PhaseSpace(1, hbar=cfg.hbar, mass=cfg.mass)
    if ns.space_kind == "prequantum-ho":
        pairs = prequant.prequantum_ho_spectrum(ns.K, space, cfg.rng())
        eigs = [v for v, _ in pairs]
        lattice = [cfg.hbar * n for n in range(-ns.K, ns.K + 1)]
    else:
        basis = polarize.bargmann_basis(ns.K, cfg.hbar)
        onb = basis.normalized_elements()
        theta_tilde = prequant.ConnectionForm.symmetrized(space)
        Q = prequant.prequantum_operator(prequant.harmonic_oscillator(space),
                                         theta_tilde, space)
        quad = prequant.QuadratureSpec(nodes=64, scale=float(np.sqrt(2 * cfg.hbar)))
        op = prequant.assemble_matrix(Q, onb, quad, space,
                                      labels=[f"psi{k}" for k in range(ns.K + 1)])
        eigs = [float(v.real) for v in op.eigenvalues()]
        lattice = [cfg.hbar * k for k in range(ns.K + 1)]
    deviation = max(abs(e - l) for e, l in zip(sorted(eigs), sorted(lattice)))
    if cfg.fmt == "csv":
        lines = ["eigenvalue"] + [repr(e) for e in sorted(eigs)]
        lines.append(f"max_deviation,{deviation!r}")
        _emit(cfg, "\n".join(lines) + "\n")
    else:
        _emit(cfg, json.dumps(
            {"eigenvalues": sorted(eigs), "max_deviation_from_lattice": deviation},
            sort_keys=True, indent=2))
    return 0


def _cmd_prequantize(cfg: RunConfig, ns) -> int:
    space = cfg.space
    f = parse(ns.f, space)
    s = parse(ns.section, space)
    theta = (prequant.ConnectionForm.tautological(space) if ns.gauge == "theta"
             else prequant.ConnectionForm.symmetrized(space))
    Q = prequant.prequantum_operator(f, theta, space)
    result = Q(s)
    if cfg.fmt == "json":
        _emit(cfg, json.dumps(
            {"observable": str(f), "section": str(s), "gauge": ns.gauge,
             "result": str(result)},
            sort_keys=True, indent=2))
    else:
        _emit(cfg, str(result) + "\n")
    return 0


def _cmd_classify(cfg: RunConfig, ns) -> int:
    with open(ns.input) as fh:
        data = json.load(fh)
    omega = symplin.SymplecticForm(np.asarray(data["omega"], dtype=float))
    basis_rows = np.asarray(data["subspace"], dtype=float)
    sub = symplin.Subspace(basis_rows.T)
    kind = symplin.classify_subspace(omega, sub)
    payload = {"classification": kind, "dim": sub.dim, "ambient_dim": sub.ambient_dim}
    _emit(cfg, json.dumps(payload, sort_keys=True, indent=2))
    return 0


def main(argv=None) -> int:
    ap = _build_parser()
    try:
        ns = ap.parse_args(argv)
        cfg = _load_config(ns)
        handlers = {
            "bracket": _cmd_bracket,
            "flow": _cmd_flow,
            "check": _cmd_check,
            "spectrum": _cmd_spectrum,
            "prequantize": _cmd_prequantize,
            "classify": _cmd_classify,
        }
        return handlers[ns.command](cfg, ns)
    except SystemExit as se:
        return se.code if isinstance(se.code, int) else USAGE_ERROR
    except ParseError as pe:
        print(f"parse error: {pe}", file=sys.stderr)
        return PARSE_ERROR
    except (DomainError, EvalError, mech.IntegrationError, mech.DivergentIntegralError,
            mech.EnergyNotAboveError, ArithmeticError, np.linalg.LinAlgError) as ne:
        print(f"numerical failure: {ne}", file=sys.stderr)
        return NUMERICAL_FAILURE
    except (ValueError, OSError, KeyError) as ue:
        print(f"error: {ue}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
