"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``criterion N: PASS|FAIL`` line with the measured
quantities; the lines are repeated in the pytest terminal summary.
"""

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from qeraser import qcore
from qeraser.analysis import (
    FringeHistogram,
    JointDistribution,
    coincidence_table,
    conditional_probability,
    mutual_information,
    order_independence_test,
    visibility,
)
from qeraser.models import (
    MziModel,
    PredictionRule,
    SpinPairModel,
    TwoSlitModel,
    detector_basis,
    local_extrema,
    mzi_couple_wwd,
    mzi_final_state,
    mzi_state_after_bs1,
    normalized_fringe,
    position_predictions,
    twoslit_pdf,
)
from qeraser.qcore import x_basis, z_basis
from qeraser.runner import MeasurementSchedule, RngSpec, run_batch

EXACT = 1e-12
MC_TOL = 0.005
N = 100_000
N_SCREEN = 1_000_000


def report(number, checks, detail):
    ok = all(checks.values())
    failed = [name for name, passed in checks.items() if not passed]
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} | {detail}"
    if failed:
        line += f" | failed: {', '.join(failed)}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def mzi_batch(order, wwd, seed, n=N, enabled=True):
    m = MziModel(wwd_enabled=enabled)
    return run_batch(m, MeasurementSchedule.for_model(m, order, wwd), n, RngSpec(seed))


def exact(order, wwd):
    state = mzi_final_state(MziModel())
    return JointDistribution.exact(state, detector_basis(), wwd, order)


@pytest.fixture(scope="module")
def screen_run():
    m = TwoSlitModel()
    batch = run_batch(m, MeasurementSchedule.for_model(m, "delayed", "x"), N_SCREEN, RngSpec(20240601))
    return m, batch


def test_criterion_1_bright_detector_without_which_way():
    p = qcore.probabilities(mzi_final_state(MziModel(wwd_enabled=False)), detector_basis())
    batch = mzi_batch("delayed", "none", 101, enabled=False)
    d2 = int(np.sum(batch.column("detector") == 1))
    report(1, {
        "P(D1)=1": abs(p[0] - 1) <= EXACT,
        "P(D2)=0": abs(p[1]) <= EXACT,
        "no D2 clicks": d2 == 0,
    }, f"P(D1)={p[0]:.15f} P(D2)={p[1]:.3g} MC D2 clicks={d2}/{N}")


def test_criterion_2_equal_clicks_with_which_way():
    p = qcore.probabilities(mzi_final_state(MziModel()), detector_basis())
    f = float(np.mean(mzi_batch("delayed", "x", 202).column("detector") == 0))
    report(2, {
        "P(D1)=P(D2)=1/2": np.all(np.abs(p - 0.5) <= EXACT),
        "MC within 0.005": abs(f - 0.5) <= MC_TOL,
    }, f"P(D1)={p[0]:.15f} P(D2)={p[1]:.15f} MC f(D1)={f:.5f}")


def test_criterion_3_eager_x_determines_click():
    j = exact("eager", x_basis(1))
    a, b = conditional_probability(j, "plus", "D1"), conditional_probability(j, "minus", "D2")
    t = coincidence_table(mzi_batch("eager", "x", 303))
    bad = int(t.cell("D2", "plus") + t.cell("D1", "minus"))
    report(3, {
        "P(D1|plus)=1": abs(a - 1) <= EXACT,
        "P(D2|minus)=1": abs(b - 1) <= EXACT,
        "no violations": bad == 0,
    }, f"P(D1|plus)={a:.15f} P(D2|minus)={b:.15f} MC violations={bad}/{t.total}")


def test_criterion_4_delayed_z_erases_which_way():
    j = exact("delayed", z_basis(1))
    up, down = conditional_probability(j, "D1", "up"), conditional_probability(j, "D1", "down")
    mi = mutual_information(j)
    f = conditional_probability(coincidence_table(mzi_batch("delayed", "z", 404)), "D1", "up")
    report(4, {
        "P(up|D1)=1/2": abs(up - 0.5) <= EXACT,
        "P(down|D1)=1/2": abs(down - 0.5) <= EXACT,
        "MC within 0.005": abs(f - 0.5) <= MC_TOL,
        "MI=0": mi <= EXACT,
    }, f"P(up|D1)={up:.15f} P(down|D1)={down:.15f} MC f(up|D1)={f:.5f} MI={mi:.3g} bits")


def test_criterion_5_delayed_click_predicts_x():
    j = exact("delayed", x_basis(1))
    a, b = conditional_probability(j, "D1", "plus"), conditional_probability(j, "D2", "minus")
    bad, total = 0, 0
    for seed in (505, 506, 507):
        t = coincidence_table(mzi_batch("delayed", "x", seed))
        bad += int(t.cell("D1", "minus") + t.cell("D2", "plus"))
        total += t.total
    report(5, {
        "P(plus|D1)=1": abs(a - 1) <= EXACT,
        "P(minus|D2)=1": abs(b - 1) <= EXACT,
        "no violations": bad == 0,
    }, f"P(plus|D1)={a:.15f} P(minus|D2)={b:.15f} MC violations={bad}/{total}")


def test_criterion_6_order_independence():
    diffs, pvals = {}, {}
    for kind, basis in (("z", z_basis(1)), ("x", x_basis(1))):
        diffs[kind] = float(np.abs(exact("eager", basis).probs - exact("delayed", basis).probs).max())
        r = order_independence_test(coincidence_table(mzi_batch("eager", kind, 606)),
                                    coincidence_table(mzi_batch("delayed", kind, 607)))
        pvals[kind] = r.p_value
    report(6, {
        "exact z": diffs["z"] <= EXACT,
        "exact x": diffs["x"] <= EXACT,
        "chi2 z": pvals["z"] > 1e-3,
        "chi2 x": pvals["x"] > 1e-3,
    }, " ".join(f"{k}: max|diff|={diffs[k]:.3g} p={pvals[k]:.4f}" for k in ("z", "x")))


def test_criterion_7_two_slit_fringes(screen_run):
    m, batch = screen_run
    hist = FringeHistogram.from_records(m, batch)
    v = {key: visibility(hist, key).visibility for key in ("all", "plus", "minus")}
    ident = float(np.abs(0.5 * twoslit_pdf(m, "x_plus") + 0.5 * twoslit_pdf(m, "x_minus")
                         - twoslit_pdf(m, "none")).max())
    plus_n, minus_n = normalized_fringe(m, "x_plus"), normalized_fringe(m, "x_minus")
    peaks, troughs = local_extrema(plus_n, "max"), local_extrema(minus_n, "min")
    same = np.array_equal(peaks, troughs) and int(np.argmax(plus_n)) == int(np.argmin(minus_n))
    report(7, {
        "visibility(all)<=0.02": v["all"] <= 0.02,
        "visibility(plus)>=0.98": v["plus"] >= 0.98,
        "visibility(minus)>=0.98": v["minus"] >= 0.98,
        "decomposition": ident <= EXACT,
        "peaks at troughs": same,
    }, f"V(all)={v['all']:.4f} V(plus)={v['plus']:.4f} V(minus)={v['minus']:.4f} "
       f"identity err={ident:.3g} plus peaks={np.round(m.centers[peaks], 2).tolist()}")


def test_criterion_8_position_prediction(screen_run):
    m, batch = screen_run
    assert m.n_bins == 201
    table = position_predictions(m, PredictionRule(1e-6))
    screen = batch.column("screen")
    on_grid = screen < m.n_bins
    predicted = np.full(len(batch), "undetermined", dtype=object)
    predicted[on_grid] = table[screen[on_grid]]
    definite = predicted != "undetermined"
    observed = np.array(x_basis().labels, dtype=object)[batch.column("x")]
    checked = int(definite.sum())
    rate = float(np.mean(observed[definite] == predicted[definite])) if checked else float("nan")
    # best achievable per-bin agreement on this grid, whatever eta is
    leak = np.minimum(twoslit_pdf(m, "x_plus"), twoslit_pdf(m, "x_minus")) / (
        twoslit_pdf(m, "x_plus") + twoslit_pdf(m, "x_minus"))
    report(8, {
        "some definite bins": checked > 0,
        "match >= 0.999": checked > 0 and rate >= 0.999,
    }, f"definite bins={int((table != 'undetermined').sum())} checked trials={checked} "
       f"match={rate:.5f} best possible per-bin match={1 - leak.min():.5f}")


def test_criterion_9_spin_pair():
    s = SpinPairModel()
    state = s.final_state()
    pz = float(np.trace(qcore.joint_distribution(state, z_basis(0), z_basis(1))))
    px = float(np.trace(qcore.joint_distribution(state, x_basis(0), x_basis(1))))
    zx = JointDistribution.exact(state, z_basis(0), x_basis(1))
    cond = conditional_probability(zx, "down", "plus")

    def mc(kind_q, kind_w, seed):
        sched = MeasurementSchedule("delayed", kind_w, s.quanton_basis(kind_q))
        return coincidence_table(run_batch(s, sched, N, RngSpec(seed)))

    fz = np.trace(mc("z", "z", 901).counts) / N
    fx = np.trace(mc("x", "x", 902).counts) / N
    fc = conditional_probability(mc("z", "x", 903), "down", "plus")
    report(9, {
        "P(z1=z2)=1": abs(pz - 1) <= EXACT,
        "P(x1=x2)=1": abs(px - 1) <= EXACT,
        "P(x2=plus|z1=down)=1/2": abs(cond - 0.5) <= EXACT,
        "MC z": abs(fz - 1) <= MC_TOL,
        "MC x": abs(fx - 1) <= MC_TOL,
        "MC cross": abs(fc - 0.5) <= MC_TOL,
    }, f"P(z same)={pz:.15f} P(x same)={px:.15f} P(plus|down)={cond:.15f} "
       f"MC: {fz:.5f} {fx:.5f} {fc:.5f}")


def test_criterion_10_detector_state_is_maximally_mixed():
    red = MziModel()
    coupled = mzi_couple_wwd(mzi_state_after_bs1(red))
    final = mzi_final_state(red)
    errs = [float(np.abs(qcore.reduced_density(s, 1).matrix - np.eye(2) / 2).max())
            for s in (coupled, final)]
    report(10, {
        "coupled state": errs[0] <= EXACT,
        "final state": errs[1] <= EXACT,
    }, f"max|rho - I/2| coupled={errs[0]:.3g} final={errs[1]:.3g}")
