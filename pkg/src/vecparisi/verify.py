"""Deterministic property suite behind the ``verify`` command.

Every check is seeded and runs at reduced size, so the whole table takes
well under a minute. Each row is keyed by the result it exercises.
"""

import numpy as np

from . import mcoracle, optimize, pde, potts, sdecheck
from .config import RunConfig
from .functional import evaluate, evaluate_pi, integral_closed_form, integral_direct, tilt
from .model import check_assumptions
from .paths import DerivedPath, DiscreteCdf, compose_pi


def _setup(preset, **over):
    cfg = RunConfig.from_dict({"preset": preset, **over})
    derived = DerivedPath(cfg.model, cfg.psi)
    tilted = tilt(cfg.base, cfg.model, cfg.psi.z)
    return cfg, derived, tilted


def sk_closed_form(beta, q, nodes=200):
    """``E log cosh(beta sqrt(2q) G) - beta^2 q + beta^2 q^2 / 2``."""
    x, w = pde.gauss_hermite(nodes)
    return float(w @ np.log(np.cosh(beta * np.sqrt(2 * q) * x))) - beta**2 * q + beta**2 * q * q / 2


def random_cdf(rng, k=3):
    qs = (0.0,) + tuple(np.sort(rng.uniform(0.05, 0.95, size=k - 1))) + (1.0,)
    ms = tuple(np.sort(rng.uniform(0.0, 1.0, size=k))) + (1.0,)
    return DiscreteCdf(qs, ms)


def _row(key, passed, detail):
    return {"key": key, "passed": bool(passed), "detail": detail}


def check_closed_form():
    worst = 0.0
    for beta in (0.3, 0.8):
        cfg, _, _ = _setup("sk-rs", model={"dim": 1, "betas": [[2, beta]]})
        for q in (0.25, 0.5, 1.0):
            val = evaluate(cfg.model, cfg.psi, DiscreteCdf.one_step(q), cfg.base, cfg.grid).total
            worst = max(worst, abs(val - sk_closed_form(beta, q)))
    return _row("closed-form/D1", worst <= 1e-4, f"max_err={worst:.3e}")


def check_oracle(seed):
    cfg, derived, tilted = _setup("sk-two-level")
    sol = pde.solve(tilted, derived, cfg.alpha, cfg.grid)
    est = mcoracle.estimate_phi0(mcoracle.NestedSampler(cfg.alpha, derived, tilted, seed=seed), [0.0], 16)
    diff = abs(est["mean"] - sol.value(0.0, [0.0]))
    tol = max(3 * est["stderr"], 5e-3)
    return _row("recursion/oracle", diff <= tol, f"diff={diff:.3e} tol={tol:.3e}")


def check_lipschitz(seed, pairs=10):
    cfg, derived, tilted = _setup("sk-rs")
    c = derived.lipschitz_constant()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(pairs):
        a, b = random_cdf(rng), random_cdf(rng)
        worst = max(worst, pde.lipschitz_ratio(pde.solve(tilted, derived, a, cfg.grid), pde.solve(tilted, derived, b, cfg.grid)))
    return _row("corollary-2.10/lipschitz-in-alpha", worst <= c, f"max_ratio={worst:.3e} C={c:.3e}")


def check_residual():
    cfg, derived, tilted = _setup("sk-mixture")
    sol = pde.solve(tilted, derived, cfg.alpha, cfg.grid)
    pts = [(s, [x]) for s in (0.1, 0.45, 0.8) for x in (-1.0, 0.0, 0.7)]
    res = pde.mc_residual_check(sol, cfg.alpha, pts, ds=0.02)
    return _row("lemma-2.2/flat-piece-residual", res["max"] <= 1e-3, f"max={res['max']:.3e}")


def check_exp_v(seed):
    cfg, derived, tilted = _setup("sk-mixture")
    sol = pde.solve(tilted, derived, cfg.alpha, cfg.grid)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(4):
        r = pde.exp_v_check(sol, float(rng.uniform(0, 1)), rng.uniform(-2, 2, 1), n_samples=20000, seed=seed + i)
        worst = max(worst, abs(r["mean"] - 1) / r["stderr"])
    return _row("lemma-2.13/exp-v-mean-one", worst <= 3, f"max_z={worst:.2f}")


def check_convex_x():
    cfg, derived, tilted = _setup("potts2-mixed")
    sol = pde.solve(tilted, derived, cfg.alpha, cfg.grid)
    hb = pde.hessian_bounds(sol, (0.0, 0.3, 0.7))
    gb = pde.gradient_bound_check(sol, (0.0, 0.7))
    ok = hb["min_eig"] >= -1e-6 and gb["passed"]
    return _row("lemma-3.4/convex-in-x", ok, f"min_eig={hb['min_eig']:.3e} grad_excess={gb['max_excess']:.3e}")


def check_joint_convexity(seed, pairs=5):
    cfg, derived, tilted = _setup("sk-mixture")
    rng = np.random.default_rng(seed)
    worst = np.inf
    for _ in range(pairs):
        a, b = random_cdf(rng), random_cdf(rng)
        x0, x1 = rng.uniform(-1.5, 1.5, 1), rng.uniform(-1.5, 1.5, 1)
        s = float(rng.uniform(0, 0.9))
        for lam in (0.25, 0.5, 0.75):
            worst = min(worst, pde.phi_convexity_slack(tilted, derived, a, b, lam, s, x0, x1, cfg.grid))
    return _row("lemma-3.6/joint-convexity", worst >= -1e-6, f"min_slack={worst:.3e}")


def check_variational(seed):
    cfg, derived, tilted = _setup("sk-mixture")
    sol = pde.solve(tilted, derived, cfg.alpha, cfg.grid)
    cp = sdecheck.ControlProblem(sol, [0.3], 0.0, 1.0, n_paths=2048, n_steps=128, seed=seed)
    r = sdecheck.run_checks(cp)
    v = r["value_u_star"]
    ok_value = abs(v["mean"] - r["phi_sx"]) <= 3 * v["stderr"] + 5e-3
    worst = min(p["gap"] + 3 * p["stderr"] for p in r["perturbations"])
    rows = [
        _row("proposition-3.1/value", ok_value, f"diff={v['mean'] - r['phi_sx']:.3e} se={v['stderr']:.3e}"),
        _row("proposition-3.1/optimality", worst >= -5e-3, f"min_gap_plus_3se={worst:.3e}"),
    ]
    z = max(r["martingale"]["z"])
    rows.append(_row("lemma-3.3/gradient-martingale", z <= 3, f"max_z={z:.2f}"))
    return rows


def check_hessian(seed):
    cfg, derived, tilted = _setup("sk-mixture")
    sol = pde.solve(tilted, derived, cfg.alpha, cfg.grid)
    cp = sdecheck.ControlProblem(sol, [0.3], 0.0, 1.0, n_paths=4096, n_steps=128, seed=seed)
    r = sdecheck.hessian_evolution_check(sdecheck.simulate_optimal(cp), control_variate=False)
    z = abs(r["mean_diff"][0][0]) / r["stderr"][0][0]
    return _row("lemma-3.3/hessian-evolution", z <= 3, f"z={z:.2f}")


def check_window():
    cfg, derived, tilted = _setup("sk-mixture")
    sol = pde.solve(tilted, derived, cfg.alpha, cfg.grid)
    c = pde.hessian_bounds(sol, (0.0, 0.5))["C"]
    small = sdecheck.uniqueness_window_check(sdecheck.ControlProblem(sol, [0.0], 0.3, 0.35), c)
    return _row("lemma-3.5/uniqueness-window", small["holds"], f"integral={small['integral']:.3e} bound={small['bound']:.3e}")


def check_decomposition(seed):
    cfg, derived, _ = _setup("potts2-mixed")
    rng = np.random.default_rng(seed)
    worst_int, worst_pi = 0.0, 0.0
    for _ in range(3):
        a = random_cdf(rng)
        worst_int = max(worst_int, abs(integral_direct(derived, a) - integral_closed_form(cfg.model, cfg.psi, a)))
        val = evaluate(cfg.model, cfg.psi, a, cfg.base, cfg.grid).total
        worst_pi = max(worst_pi, abs(evaluate_pi(cfg.model, compose_pi(cfg.psi, a), cfg.base, cfg.grid) - val))
    ok = worst_int <= 1e-8 and worst_pi <= 1e-8
    return _row("lemma-4.1/decomposition", ok, f"int_err={worst_int:.3e} pi_err={worst_pi:.3e}")


def check_strict_convexity(seed):
    rows = []
    for preset in ("sk-rs", "potts2-beta2", "potts2-mixed"):
        cfg, _, _ = _setup(preset)
        r = optimize.certify_convexity(cfg.model, cfg.psi, cfg.base, (0.25, 0.5, 0.75, 1.0), 3, seed, cfg.grid)
        rows.append(_row(f"theorem-1.2/strict-convexity/{preset}", r["min_slack"] > 1e-6,
                         f"min_slack={r['min_slack']:.3e} min_normalized={r['min_normalized']:.3e}"))
    return rows


def check_potts_algebra(seed):
    ok_id = all(potts.path_identities(d, seed=seed)["passed"] for d in range(2, 9))
    ok_gamma = all(potts.gamma_identities(potts.PottsSetup(d, ((2, 1.0),)))["passed"] for d in range(2, 9))
    ok_pd = all(potts.gamma_pd_check(potts.PottsSetup(d, ((2, 1.0), (3, 1.0))))["passed"] for d in (2, 3))
    ok_kernel = all(potts.kernel_checks(potts.PottsSetup(d, ((2, 1.0),)), 100, seed)["passed"] for d in (2, 3))
    return [
        _row("potts/path-identities", ok_id, "D=2..8"),
        _row("potts/gamma-identities", ok_gamma, "D=2..8"),
        _row("lemma-5.1/gamma-positive-definite", ok_pd, "D=2,3"),
        _row("lemma-5.3/hessian-kernel", ok_kernel, "D=2,3"),
    ]


def check_assumption_suite(seed):
    cfg, _, _ = _setup("potts2-mixed")
    r = check_assumptions(cfg.model, samples=200, seed=seed)
    return _row("assumptions/potts-mixed", r["passed"], f"cond_min={r['cond_xi']['min_value']:.3e}")


def run_suite(seed=0):
    rows = [check_closed_form(), check_oracle(seed), check_lipschitz(seed), check_residual(), check_exp_v(seed)]
    rows += [check_convex_x(), check_joint_convexity(seed)]
    rows += check_variational(seed)
    rows += [check_hessian(seed), check_window(), check_decomposition(seed)]
    rows += check_strict_convexity(seed)
    rows += check_potts_algebra(seed)
    rows.append(check_assumption_suite(seed))
    return rows


def format_table(rows):
    width = max(len(r["key"]) for r in rows)
    lines = [f"{'check'.ljust(width)}  result  detail"]
    for r in rows:
        lines.append(f"{r['key'].ljust(width)}  {'PASS' if r['passed'] else 'FAIL'}    {r['detail']}")
    passed = sum(r["passed"] for r in rows)
    lines.append(f"{passed}/{len(rows)} checks passed")
    return "\n".join(lines) + "\n"
