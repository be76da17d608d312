"""Quick sanity checks runnable from the command line (``cmspde selftest``)."""
import tempfile
from pathlib import Path

import numpy as np

from . import exp_filters as ef, reduced_models as rm, resonance_lab as rl, spde_sim as sp
from .stochastic_core import SdeState, generate_increments, heun_step

CHECKS = []


def check(func):
    CHECKS.append(func)
    return func


@check
def empty_increments():
    return len(generate_increments(7, 0.01, 0)) == 0


@check
def increments_reproducible():
    a = generate_increments(7, 0.01, 1000).increments
    b = generate_increments(7, 0.01, 1000).increments
    return np.array_equal(a, b)


@check
def heun_linear_ode():
    x = heun_step(SdeState([1.0]), lambda v: -v, lambda v: np.zeros_like(v), 0.3, 0.1)
    return abs(x.components[0] - 0.905) < 1e-15


@check
def heun_pure_noise():
    x = heun_step(SdeState([0.25]), lambda v: np.zeros_like(v), lambda v: np.ones_like(v), 0.125, 0.1)
    return x.components[0] == 0.375


@check
def filter_steady_gains():
    ok = True
    for m, gain in ((2, 1 / 3), (3, 1 / 8)):
        f = ef.ExpFilter(m)
        for _ in range(2000):
            f = ef.filter_step(f, 0.01, 0.01)
        ok &= abs(f.z - gain) < 1e-6
    return ok


@check
def chain_identity_and_base_case():
    empty = ef.chain_step(ef.FilterChain(), 0.02, 0.01)
    single = ef.chain_step(ef.FilterChain.of(2), 0.02, 0.01)
    return empty.output == 2.0 and single.output == ef.filter_step(ef.ExpFilter(2), 0.02, 0.01).z


@check
def stationary_covariance_shape():
    c = ef.stationary_z_covariance(3.0, 8.0)
    return (abs(c[0, 0] - 1 / 6) < 1e-15 and np.allclose(c, c.T)
            and np.all(np.linalg.eigvalsh(c) > 0))


@check
def spde_trivial_solution():
    grid = sp.Grid(15)
    params = sp.SpdeParams(0.0, 0.0, (2,), 0.01)
    rhs_zero = not np.any(sp.spde_rhs(np.zeros(15), params, grid, [0.0]))
    run = sp.run_spde(params, grid, sp.FieldState(np.zeros(15)), 1, 1.0)
    return rhs_zero and not np.any(run.a)


@check
def projection_normalisation():
    grid = sp.Grid(31)
    a1 = sp.project_amplitude(np.sin(grid.x), grid)
    a2 = sp.project_amplitude(np.sin(2 * grid.x), grid)
    return abs(a1 - 1) < 1e-12 and abs(a2) < 1e-12


@check
def spde_stable_for_positive_gamma():
    grid = sp.Grid(7)
    params = sp.SpdeParams(0.05, 0.0, (2,), 0.05)
    run = sp.run_spde(params, grid, sp.mode_field(grid, {1: 0.1}), 0, 100.0)
    return bool(np.all(np.diff(run.a) < 0) and run.a[-1] < 0.1 * run.a[0])


@check
def models_fixed_point_and_noise_free():
    p = rm.ModelParams(-0.03, 0.7)
    z = np.linspace(-1, 1, 7)
    zero = rm.StrongModelState(0.0, z)
    ok = rm.naive_rhs(zero, p) == 0 and rm.normal_form_rhs(zero, p, 2.0) == 0
    ok &= rm.weak_rhs(rm.WeakModelState(0.0), p, 1.0, 1.0) == 0
    s = rm.StrongModelState(0.4)
    p0 = rm.ModelParams(-0.03, 0.0)
    cubic = 0.03 * 0.4 - 0.4 ** 3 / 12
    ok &= rm.naive_rhs(s, p0) == rm.normal_form_rhs(s, p0, 1.0) == cubic
    ok &= rm.weak_rhs(rm.WeakModelState(0.4), p0, 1.0, 1.0) == cubic
    return bool(ok) and rm.deterministic_equilibrium(0.0) == 0.0


@check
def strong_variants_agree_without_noise():
    p = rm.ModelParams(-0.03, 0.0)
    a = b = rm.StrongModelState(0.3)
    for w in generate_increments(3, 0.1, 50).increments:
        a = rm.step_strong_model(a, p, "naive", w, 0.1)
        b = rm.step_strong_model(b, p, "normal_form", w, 0.1)
    return a.a == b.a


@check
def reconstruction():
    grid = sp.Grid(31)
    p = rm.ModelParams(0.0, 0.0)
    zero = rm.reconstruct_field(0.0, rm.StrongModelState(0.0), p, grid)
    s = rm.StrongModelState(0.37, np.linspace(-1, 1, 7))
    u = rm.reconstruct_field(0.37, s, rm.ModelParams(-0.03, 1.0), grid)
    return not np.any(zero.u) and abs(sp.project_amplitude(u, grid) - 0.37) < 1e-12


@check
def quad_rest_state():
    s = rl.QuadNoiseState()
    for _ in range(10):
        s = rl.quad_step(s, 0.0, 0.01)
    return s.vector().tolist() == [0.0, 0.0, 0.0, 0.0]


@check
def diffusion_and_replacement_limits():
    d = rl.theoretical_diffusion(3.0, 8.0)
    c = rl.replacement_coefficients(3.0, 1e12)
    return np.array_equal(d, d.T) and c.y2_psi1 < 1e-11 and c.y2_psi2 < 1e-11


@check
def single_member_estimate_unreliable():
    est = rl.estimate_long_time_stats(0, 1, 1.0, dt=0.01)
    return not est.reliable and np.all(np.isnan(est.drift_stderr))


@check
def zero_input_effective_noise():
    rep = rl.synthesize_effective_noise(np.zeros((2, 2000)), 0.01, bin_widths=(1.0,))
    return rep.variance_rate[0] == 0 and rep.correlation[0] == 0 and rep.drift_rate == 0


@check
def deterministic_sweep():
    from .experiments import stability_sweep
    rep = stability_sweep([0.0], -0.03, 100, 50.0, dt=0.1)
    return abs(rep.rows[0]["lyapunov"] - 0.03) < 1e-6


@check
def figure_run_deterministic():
    from .experiments import ExperimentConfig, run_experiment
    with tempfile.TemporaryDirectory() as tmp:
        contents = []
        for sub in ("a", "b"):
            out = Path(tmp) / sub
            run_experiment(ExperimentConfig("fig2", seed=5, out=str(out)))
            contents.append({p.name: p.read_bytes() for p in out.glob("*.csv")})
        return contents[0] == contents[1] and len(contents[0]) == 2


def run_all(verbose=True):
    """Run every check; returns the number of failures."""
    failures = 0
    for func in CHECKS:
        try:
            ok = bool(func())
        except Exception as exc:  # noqa: BLE001 - report and continue
            ok = False
            if verbose:
                print(f"  error: {exc!r}")
        failures += not ok
        if verbose:
            print(f"{'PASS' if ok else 'FAIL'}  {func.__name__}")
    return failures
