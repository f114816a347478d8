"""End-to-end acceptance criteria.

Each criterion prints one PASS/FAIL line (run with ``pytest -s`` to see
them live) and then asserts.  Criteria are evaluated at their stated
tolerances against the production solver at the default basis.
"""

import time

import numpy as np
import pytest

from rcsoc.bogoliubov import (build_bogoliubov_matrix,
                              excitation_spectrum, goldstone_index,
                              lowest_branches)
from rcsoc.cavity import (atomic_moments, build_cavity_matrix,
                          cavity_steady_state, field_profiles, pump_vector)
from rcsoc.dynamics import (LambdaParams, ThreeLevelField,
                            drift_report, excited_steady_state,
                            propagate_effective, propagate_lambda)
from rcsoc.meanfield import (SolverConfig, apply_atomic_hamiltonian,
                             rayleigh_quotient, solve_steady_state)
from rcsoc.model import (PlaneWaveBasis, make_symmetric_params,
                         screw_transform)
from rcsoc.observables import classify_phase, order_parameters
from rcsoc.sweep import SweepSpec, detect_boundaries, resume_sweep, \
    run_sweep
from test_bogoliubov import fd_linearization_error
from test_cavity import random_moments

pytestmark = pytest.mark.acceptance

BASIS = PlaneWaveBasis()
CUT_SOLVER = SolverConfig(n_seeds=1, continuation=False)


def report(criterion: str, ok: bool, detail: str) -> bool:
    print(f"\nACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} - "
          f"{detail}")
    return ok


# ----------------------------------------------------------------------
# expensive shared computations
# ----------------------------------------------------------------------

@pytest.fixture(scope="module")
def named():
    """The three named operating points at full solver settings."""
    out = {}
    for eta in (20.0, 30.0, 50.0):
        p = make_symmetric_params(-20.0, eta)
        t0 = time.time()
        ss = solve_steady_state(p, SolverConfig(), basis=BASIS)
        out[eta] = (ss, time.time() - t0)
    return out


@pytest.fixture(scope="module")
def cut20(tmp_path_factory):
    """The pump cut at detuning -20: 61 points spanning both phase
    boundaries of the model, with spectra."""
    spec = SweepSpec(eta_min=0.0, eta_max=85.0, eta_steps=61,
                     delta_min=-20.0, delta_max=-20.0, delta_steps=1,
                     solver=CUT_SOLVER, with_spectrum=True,
                     direction="both")
    t0 = time.time()
    result = run_sweep(spec, out_dir=tmp_path_factory.mktemp("cut20"))
    return result, time.time() - t0


@pytest.fixture(scope="module")
def cut10(tmp_path_factory):
    # near-degenerate even/odd branches at this detuning make random
    # mixed-parity seeds crawl; the two parity-biased seeds plus the
    # bidirectional warm chains cover both branches directly
    solver = SolverConfig(n_seeds=0, continuation=False,
                          max_iters=60_000)
    spec = SweepSpec(eta_min=0.0, eta_max=80.0, eta_steps=41,
                     delta_min=-10.0, delta_max=-10.0, delta_steps=1,
                     solver=solver, with_spectrum=False,
                     direction="both")
    result = run_sweep(spec, out_dir=tmp_path_factory.mktemp("cut10"))
    return result


def _label(ss, p, eta, delta):
    pt = order_parameters(ss.spinor, ss.cavity, ss.mu, eta=eta,
                          delta=delta)
    pt.converged = ss.converged
    pt.diverged = ss.diverged
    return classify_phase(pt), pt


def _first_flip(result, from_label):
    rows = sorted(result.rows, key=lambda r: r["i_eta"])
    etas = result.spec.etas
    for i in range(len(rows) - 1):
        if rows[i]["label"] == from_label \
                and rows[i + 1]["label"] != from_label:
            return 0.5 * (etas[i] + etas[i + 1]), i
    return None, None


# ----------------------------------------------------------------------
# criteria
# ----------------------------------------------------------------------

def test_criterion_1_named_phase_points(named):
    expected = {20.0: ("DW-SW", 0), 30.0: ("PW-SS", 1),
                50.0: ("DW-SS", 1)}
    parts = []
    details = []
    for eta, (want_label, want_w) in expected.items():
        ss, elapsed = named[eta]
        label, pt = _label(ss, make_symmetric_params(-20.0, eta), eta,
                           -20.0)
        ok = (label == want_label and pt.winding == want_w
              and elapsed < 120.0)
        parts.append(ok)
        details.append(f"eta={eta:g}: {label}/W={pt.winding} "
                       f"(want {want_label}/W={want_w}) "
                       f"[{elapsed:.0f}s]")
    ok = report("1", all(parts), "named phase points; " + "; ".join(
        details))
    assert ok


def test_criterion_2_spiral_structure(named):
    ss, _ = named[30.0]
    c = ss.spinor.coefficients()
    j = BASIS.modes
    c_dn1 = abs(c[0, j == 1][0])
    c_upm1 = abs(c[1, j == -1][0])
    others = np.abs(np.concatenate([
        c[0, j != 1], c[1, j != -1]]))
    m = atomic_moments(ss.spinor)
    parts = [abs(c_dn1 - 1 / np.sqrt(2)) <= 1e-3,
             abs(c_upm1 - 1 / np.sqrt(2)) <= 1e-3,
             np.max(others) < 1e-4,
             abs(ss.cavity.alpha_m) < 1e-6,
             abs(ss.cavity.beta_p) < 1e-6,
             abs(m.s_minus) < 1e-6]
    ok = report("2", all(parts),
                f"homogeneous spiral structure: |c_dn,1|={c_dn1:.6f}, "
                f"|c_up,-1|={c_upm1:.6f}, max other |c|="
                f"{np.max(others):.2e}, |alpha_-|="
                f"{abs(ss.cavity.alpha_m):.2e}, |S|="
                f"{abs(m.s_minus):.2e}")
    assert ok


def test_criterion_3_first_boundary(cut20):
    result, elapsed = cut20
    eta_c, idx = _first_flip(result, "DW-SW")
    bounds = detect_boundaries(result)
    topo = [b for b in bounds
            if set(b.labels) == {"DW-SW", "PW-SS"}]
    first_order = any(b.order == "first" and b.topological
                      for b in topo)
    rows = sorted(result.rows, key=lambda r: r["i_eta"])
    jump_ok = False
    if idx is not None:
        a, b = rows[idx], rows[idx + 1]
        w_ok = a["winding"] == 0 and b["winding"] == 1
        jump = abs(a["abs_alpha_m"] - b["abs_alpha_m"])
        neigh = [abs(rows[k + 1]["abs_alpha_m"]
                     - rows[k]["abs_alpha_m"])
                 for k in range(max(0, idx - 4), idx)]
        jump_ok = w_ok and jump > 5.0 * max(np.median(neigh), 1e-12)
    parts = [eta_c is not None and abs(eta_c - 27.0) <= 2.7,
             first_order, jump_ok, elapsed < 3600.0]
    ok = report("3", all(parts),
                f"lattice-to-spiral boundary at eta={eta_c}, "
                f"want 27+-2.7; first-order+topological tag: "
                f"{first_order}; winding jump with discontinuous "
                f"|alpha_-|: {jump_ok}; cut runtime {elapsed:.0f}s")
    assert ok


def test_criterion_4_transition_orders(cut20, cut10):
    result, _ = cut20
    rows = sorted(result.rows, key=lambda r: r["i_eta"])
    bounds = detect_boundaries(result)
    second = [b for b in bounds
              if set(b.labels) == {"PW-SS", "DW-SS"}]
    second_ok = any(b.order == "second" and not b.topological
                    for b in second)
    # continuous growth: last spiral point below tol_dw, first few
    # density-wave points small and rising
    eta_c2, idx2 = _first_flip(result, "PW-SS")
    growth_ok = False
    if idx2 is not None:
        before = rows[idx2]["abs_nw"]
        after = [r["abs_nw"] for r in rows[idx2 + 1:idx2 + 4]
                 if r["label"] == "DW-SS"]
        growth_ok = (before <= 1e-4 and len(after) >= 2
                     and after[0] < 0.12
                     and all(np.diff(after) > 0))
    rows10 = sorted(cut10.rows, key=lambda r: r["i_eta"])
    labels10 = [r["label"] for r in rows10]
    bounds10 = detect_boundaries(cut10)
    direct = [b for b in bounds10
              if set(b.labels) == {"DW-SW", "DW-SS"}]
    direct_ok = (any(b.order == "first" and b.topological
                     for b in direct)
                 and "PW-SS" not in labels10)
    parts = [second_ok, growth_ok, direct_ok]
    ok = report("4", all(parts),
                f"second-order spiral crystallisation at eta={eta_c2} "
                f"(tagged={second_ok}, continuous growth={growth_ok}); "
                f"direct first-order transition on the -10 cut: "
                f"{direct_ok} (labels seen: {sorted(set(labels10))})")
    assert ok


def test_criterion_5_spectrum_properties(named, solved, cut20):
    # (a) free ladder with fourfold recoil degeneracy
    free = solved(-20.0, 0.0)
    p0 = make_symmetric_params(-20.0, 0.0)
    spec0 = excitation_spectrum(build_bogoliubov_matrix(free, p0))
    w0, _, _ = spec0.half_spectrum()
    re0 = np.real(w0)
    free_ok = (np.sum(np.abs(re0 - 1.0) < 1e-8) == 4
               and np.sum(np.abs(re0 - 4.0) < 1e-8) == 4)
    # (b) Goldstone branch on the lattice state
    ss20, _ = named[20.0]
    p20 = make_symmetric_params(-20.0, 20.0)
    spec20 = excitation_spectrum(build_bogoliubov_matrix(ss20, p20))
    gi = goldstone_index(spec20, ss20)
    gold_ok = gi is not None and abs(np.real(spec20.omega[gi])) <= 1e-3
    # (c) spiral state: gapped, conservative branches doubly degenerate
    ss30, _ = named[30.0]
    p30 = make_symmetric_params(-20.0, 30.0)
    spec30 = excitation_spectrum(build_bogoliubov_matrix(ss30, p30))
    branches = lowest_branches(spec30, ss30, n=12)
    res30 = np.array([b[0] for b in branches[:5]])
    gapped = np.all(res30 > 0.05) and goldstone_index(spec30,
                                                      ss30) is None
    omegas = np.array([complex(b[0], b[1]) for b in branches])
    paired = 0
    for b in branches[:5]:
        close = np.sum(np.abs(omegas - complex(b[0], b[1]))
                       < 1e-5 * max(1.0, abs(b[0])))
        if close >= 2 or abs(b[1]) > 1e-3:
            paired += 1
    spiral_ok = gapped and paired == 5
    # (d) the soft-branch gap of the lattice state closes within 5% of
    # the mean-field flip: chase the (meta)stable lattice branch across
    # the boundary with warm starts and track its softest mode
    result, _ = cut20
    eta_flip, idx = _first_flip(result, "DW-SW")
    rows = sorted(result.rows, key=lambda r: r["i_eta"])
    warm_cfg = SolverConfig(n_seeds=0, parity_seeds=False,
                            continuation=False)
    # rebuild the lattice state a little below the flip
    eta0 = eta_flip - 2.0
    chain = solve_steady_state(make_symmetric_params(-20.0, eta0),
                               SolverConfig(n_seeds=1,
                                            continuation=False),
                               basis=BASIS)
    eta_gap = None
    trail = []
    eta = eta0
    while eta < eta_flip + 3.0:
        p = make_symmetric_params(-20.0, eta)
        chain = solve_steady_state(p, warm_cfg, init=chain)
        if not chain.converged:
            break
        spc = excitation_spectrum(build_bogoliubov_matrix(chain, p))
        gi = goldstone_index(spc, chain)
        soft = min(re for re, _, i in lowest_branches(spc, chain, n=6)
                   if i != gi)
        trail.append((eta, soft))
        if soft < 0.05:
            eta_gap = eta
            break
        eta += 0.25
    if eta_gap is None and len(trail) >= 2:
        # branch ended before dipping: extrapolate the last slope
        (e1, s1), (e2, s2) = trail[-2], trail[-1]
        if s2 < s1:
            eta_gap = e2 + s2 * (e2 - e1) / (s1 - s2)
    close_ok = (eta_flip is not None and eta_gap is not None
                and abs(eta_gap - eta_flip) <= 0.05 * eta_flip)
    parts = [free_ok, gold_ok, spiral_ok, close_ok]
    ok = report("5", all(parts),
                f"free ladder fourfold: {free_ok}; Goldstone "
                f"Re(omega)<=1e-3: {gold_ok}; spiral gapped+paired: "
                f"{spiral_ok}; gap closes at eta={eta_gap} vs flip "
                f"{eta_flip} (within 5%: {close_ok})")
    assert ok


def test_criterion_6a_cavity_ode_oracle():
    from scipy.integrate import solve_ivp
    p = make_symmetric_params(-16.0, 19.0)
    worst = 0.0
    for seed in range(100):
        m = random_moments(seed)
        target = cavity_steady_state(m, p).as_vector()
        M = build_cavity_matrix(m, p)
        eta = pump_vector(p)

        def rhs(t, y):
            a = y[:4] + 1j * y[4:]
            d = -1j * (M @ a) + eta
            return np.concatenate([d.real, d.imag])

        sol = solve_ivp(rhs, (0, 20.0 / p.kappa), np.zeros(8),
                        rtol=1e-11, atol=1e-12)
        end = sol.y[:4, -1] + 1j * sol.y[4:, -1]
        worst = max(worst, float(np.max(np.abs(end - target))))
    ok = report("6a", worst <= 1e-8,
                f"steady state vs ODE integration on 100 random "
                f"moment sets: worst {worst:.2e} (<= 1e-8)")
    assert ok


def test_criterion_6b_linearization_oracle(named, solved):
    states = [(-20.0, 0.0, solved(-20.0, 0.0)),
              (-20.0, 20.0, named[20.0][0]),
              (-20.0, 30.0, named[30.0][0]),
              (-20.0, 50.0, named[50.0][0]),
              (-10.0, 30.0, solved(-10.0, 30.0))]
    worst = 0.0
    for delta, eta, ss in states:
        p = make_symmetric_params(delta, eta)
        for seed in range(20):
            worst = max(worst, fd_linearization_error(ss, p, seed))
    ok = report("6b", worst <= 1e-4,
                f"fluctuation matrix vs finite-difference "
                f"linearisation, 20 directions x 5 states: worst "
                f"relative error {worst:.2e} (<= 1e-4)")
    assert ok


def test_criterion_6c_elimination_scaling(named):
    ss, _ = named[20.0]
    p = make_symmetric_params(-20.0, 20.0)
    dsums = np.array([-200.0, -400.0, -800.0])
    errs = []
    for dsum in dsums:
        g = np.sqrt(abs(p.u0_dn * dsum) / 2.0)
        lp = LambdaParams.from_microscopic(g, g, dsum / 2, dsum / 2, p)
        st3 = ThreeLevelField.from_ground(ss.spinor)
        st3.psi[2] = excited_steady_state(st3.psi,
                                          ss.cavity.as_vector(), lp,
                                          BASIS)
        traj3 = propagate_lambda(st3, lp, t_final=1.0,
                                 dt=0.01 / abs(dsum),
                                 a0=ss.cavity.as_vector())
        traje = propagate_effective(ss, p, t_final=1.0, dt=5e-4)
        dev = 0.0
        for key in ("nw_dn", "s_minus", "alpha_m"):
            dev += abs(traj3.series(key)[-1] - traje.series(key)[-1])
        errs.append(dev)
    slope = np.polyfit(np.log(np.abs(dsums)), np.log(errs), 1)[0]
    ok = report("6c", -1.2 <= slope <= -0.8,
                f"three-level vs effective observable error over "
                f"doubling detunings: {['%.2e' % e for e in errs]}, "
                f"log-log slope {slope:.3f} (want -1 +- 0.2)")
    assert ok


def test_criterion_6d_screw_invariance(named):
    ss, _ = named[20.0]
    p = make_symmetric_params(-20.0, 20.0)
    pt0 = order_parameters(ss.spinor, ss.cavity, ss.mu)
    rng = np.random.default_rng(123)
    worst = 0.0
    for shift in rng.uniform(0.0, 2.0 * np.pi, size=16):
        f2, c2 = screw_transform(ss.spinor, ss.cavity, shift)
        prof = field_profiles(c2, p, BASIS)
        rq = rayleigh_quotient(f2, prof, p)
        h = apply_atomic_hamiltonian(f2, prof, p)
        d = h.psi - np.real(rq) * f2.psi
        res = float(np.sqrt(np.real(BASIS.integrate(
            np.abs(d[0]) ** 2 + np.abs(d[1]) ** 2))))
        pt = order_parameters(f2, c2, float(np.real(rq)))
        worst = max(worst,
                    abs(np.real(rq) - ss.mu),
                    res,
                    abs(abs(pt.nw_dn) - abs(pt0.nw_dn)),
                    abs(abs(pt.s_plus) - abs(pt0.s_plus)),
                    abs(abs(pt.sw_minus_m) - abs(pt0.sw_minus_m)),
                    abs(abs(c2.alpha_m) - abs(ss.cavity.alpha_m)))
    ok = report("6d", worst <= 1e-8,
                f"screw-family invariance of mu/stationarity/orders "
                f"over 16 random shifts: worst {worst:.2e} (<= 1e-8)")
    assert ok


def test_criterion_6e_parity_purity(cut20, cut10):
    result, _ = cut20
    purities = [r["parity_purity"] for r in result.rows
                + cut10.rows if r["converged"]]
    worst = min(purities)
    ok = report("6e", worst >= 1.0 - 1e-6,
                f"momentum parity purity over {len(purities)} "
                f"converged sweep points: worst {worst:.10f} "
                f"(>= 1 - 1e-6)")
    assert ok


def test_criterion_6f_realtime_drift(named):
    worst = 0.0
    for eta in (20.0, 30.0):
        ss, _ = named[eta]
        p = make_symmetric_params(-20.0, eta)
        traj = propagate_effective(ss, p, t_final=50.0, dt=1e-3)
        worst = max(worst, drift_report(traj)["max_drift"])
    ok = report("6f", worst < 1e-4,
                f"observable drift of accepted steady states over "
                f"t=50: worst {worst:.2e} (< 1e-4)")
    assert ok


def test_criterion_7_determinism(tmp_path_factory):
    spec = SweepSpec(eta_min=18.0, eta_max=32.0, eta_steps=3,
                     delta_min=-20.0, delta_max=-20.0, delta_steps=1,
                     solver=CUT_SOLVER, with_spectrum=False,
                     direction="both")
    d1 = tmp_path_factory.mktemp("det1")
    d2 = tmp_path_factory.mktemp("det2")
    run_sweep(spec, out_dir=d1)
    run_sweep(spec, out_dir=d2)
    rerun_ok = ((d1 / "phase_points.csv").read_bytes()
                == (d2 / "phase_points.csv").read_bytes())
    lines = (d1 / "checkpoint.jsonl").read_text().splitlines()
    d3 = tmp_path_factory.mktemp("det3")
    (d3 / "checkpoint.jsonl").write_text(
        "\n".join(lines[:len(lines) // 2]) + "\n")
    resume_sweep(d3 / "checkpoint.jsonl", out_dir=d3)
    resume_ok = ((d3 / "phase_points.csv").read_bytes()
                 == (d1 / "phase_points.csv").read_bytes())
    ok = report("7", rerun_ok and resume_ok,
                f"byte-identical rerun: {rerun_ok}; byte-identical "
                f"resume after interrupt: {resume_ok}")
    assert ok


def test_criterion_8_symmetric_identities(cut20, cut10):
    result, _ = cut20
    rows = [r for r in result.rows + cut10.rows if r["converged"]]
    worst_nw = max(abs(r["abs_nw_dn"] - r["abs_nw_up"]) for r in rows)
    worst_cav = max(abs(r["abs_alpha_m"] - r["abs_beta_p"])
                    for r in rows)
    worst_sz = max(r["max_sz"] for r in rows)
    parts = [worst_nw <= 1e-6, worst_cav <= 1e-6, worst_sz <= 1e-6]
    ok = report("8", all(parts),
                f"symmetric identities over {len(rows)} converged "
                f"points: worst ||N_dn|-|N_up||={worst_nw:.2e} "
                f"(<=1e-6), worst ||alpha_-|-|beta_+||={worst_cav:.2e} "
                f"(<=1e-6), worst max|s_z|={worst_sz:.2e} (<=1e-6)")
    assert ok
