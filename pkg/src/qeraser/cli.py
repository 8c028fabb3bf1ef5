"""Command-line front end: ``qeraser --model mzi --mode montecarlo ...``.

Writes ``summary.csv`` for every run, ``trials.csv`` for Monte Carlo runs
and ``fringes.csv`` for two-slit runs.  Exit status is 0 on success, 2 on a
usage error and 1 on a runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import analysis, models, qcore
from .runner import MeasurementSchedule, RngSpec, TrialBatch, run_batch


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    model: str = "mzi"
    order: str = "delayed"
    wwd_basis: str = "x"
    wwd_enabled: bool = True
    quanton_basis: str = "z"
    mode: str = "analytic"
    trials: int | None = None
    seed: int = 0
    d: float = 1.0
    wavelength: float = 0.1
    dist: float = 100.0
    width: float = 30.0
    bins: int = 201
    eta: float = 1e-6
    predict: bool = False
    out_dir: Path = Path(".")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="qeraser",
        description="Delayed-choice quantum eraser experiments: exact and Monte Carlo.",
    )
    p.add_argument("--model", choices=["mzi", "twoslit", "spins"], default="mzi")
    p.add_argument("--order", choices=["eager", "delayed"], default="delayed",
                   help="eager: which-way detector measured first; delayed: quanton first")
    p.add_argument("--wwd-basis", choices=["z", "x", "none"], default=None,
                   help="basis for reading the which-way detector (default x, or none with --wwd off)")
    p.add_argument("--wwd", choices=["on", "off"], default="on",
                   help="include the which-way detector (mzi only)")
    p.add_argument("--quanton-basis", choices=["z", "x"], default="z",
                   help="basis for spin 1 (spins only)")
    p.add_argument("--mode", choices=["analytic", "montecarlo"], default="analytic")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bins", type=int, default=201)
    p.add_argument("--d", type=float, default=1.0, help="slit separation")
    p.add_argument("--lambda", dest="wavelength", type=float, default=0.1, help="wavelength")
    p.add_argument("--dist", type=float, default=100.0, help="slit-to-screen distance")
    p.add_argument("--width", type=float, default=30.0, help="screen envelope width (std)")
    p.add_argument("--eta", type=float, default=1e-6,
                   help="dominance ratio for position-based predictions")
    p.add_argument("--predict", action="store_true",
                   help="add predicted x-state and match columns to trials.csv")
    p.add_argument("--out-dir", type=Path, default=Path("."))
    return p


def parse_config(argv) -> RunConfig:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        return _resolve(ns)
    except UsageError as exc:
        parser.error(str(exc))


def _resolve(ns) -> RunConfig:
    wwd_enabled = ns.wwd == "on"
    if not wwd_enabled and ns.model != "mzi":
        raise UsageError("--wwd off is only available for --model mzi")
    wwd_basis = ns.wwd_basis or ("x" if wwd_enabled else "none")
    if not wwd_enabled and wwd_basis != "none":
        raise UsageError("--wwd off leaves no which-way detector to measure")
    if ns.mode == "montecarlo":
        if ns.trials is None:
            raise UsageError("--mode montecarlo requires --trials")
        if ns.trials < 0:
            raise UsageError("--trials must be >= 0")
    if not 0 <= ns.seed < 2**64:
        raise UsageError("--seed must be an unsigned 64-bit integer")
    if ns.model == "twoslit" and ns.bins < 2:
        raise UsageError("--bins must be at least 2")
    if not 0 < ns.eta < 1:
        raise UsageError("--eta must lie in (0, 1)")
    if ns.predict and ns.model == "spins":
        raise UsageError("--predict applies to mzi and twoslit runs")
    return RunConfig(
        model=ns.model, order=ns.order, wwd_basis=wwd_basis, wwd_enabled=wwd_enabled,
        quanton_basis=ns.quanton_basis, mode=ns.mode, trials=ns.trials, seed=ns.seed,
        d=ns.d, wavelength=ns.wavelength, dist=ns.dist, width=ns.width, bins=ns.bins,
        eta=ns.eta, predict=ns.predict, out_dir=ns.out_dir,
    )


# Experiment construction ---------------------------------------------------------

def make_model(cfg: RunConfig):
    if cfg.model == "mzi":
        return models.MziModel(wwd_enabled=cfg.wwd_enabled)
    if cfg.model == "twoslit":
        try:
            return models.TwoSlitModel.uniform(cfg.bins, d=cfg.d, wavelength=cfg.wavelength,
                                               distance=cfg.dist, width=cfg.width)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    return models.SpinPairModel()


def make_schedule(cfg: RunConfig, model) -> MeasurementSchedule:
    if cfg.model == "spins":
        qb = model.quanton_basis(cfg.quanton_basis)
        return MeasurementSchedule(cfg.order, cfg.wwd_basis, qb)
    return MeasurementSchedule.for_model(model, cfg.order, cfg.wwd_basis)


Row = tuple  # (claim, quantity, value)


def _wwd_rows(state, schedule) -> list[Row]:
    """Conditional probabilities and mutual information from an exact state."""
    wwd = schedule.wwd()
    exact = analysis.JointDistribution.exact(state, schedule.quanton_basis, wwd, schedule.order)
    other = "delayed" if schedule.order == "eager" else "eager"
    swapped = analysis.JointDistribution.exact(state, schedule.quanton_basis, wwd, other)
    rows = [("order_independence", "max |P_eager - P_delayed|",
             float(np.abs(exact.probs - swapped.probs).max()))]
    if schedule.quanton_basis.name != "screen":
        for q in exact.row_labels:
            for w in exact.col_labels:
                rows.append(("coincidence", f"P({w}|{q})",
                             analysis.conditional_probability(exact, q, w)))
    claim = "click_predicts_x" if wwd.name == "x" else "which_way_erased"
    rows.append((claim, "mutual_information_bits", analysis.mutual_information(exact)))
    return rows


def analytic_summary(cfg: RunConfig, model, schedule) -> tuple[list[Row], dict]:
    extra = {}
    if cfg.model == "spins":
        state = model.final_state()
        zz = analysis.JointDistribution.exact(state, qcore.z_basis(0), qcore.z_basis(1))
        xx = analysis.JointDistribution.exact(state, qcore.x_basis(0), qcore.x_basis(1))
        zx = analysis.JointDistribution.exact(state, qcore.z_basis(0), qcore.x_basis(1))
        rows = [
            ("spin_z_correlation", "P(z1 = z2)", float(np.trace(zz.probs))),
            ("spin_x_correlation", "P(x1 = x2)", float(np.trace(xx.probs))),
            ("spin_cross_basis_null", "P(x2=plus|z1=down)",
             analysis.conditional_probability(zx, "down", "plus")),
            ("spin_cross_basis_null", "I(z1; x2) bits", analysis.mutual_information(zx)),
        ]
        return rows, extra

    state = model.final_state()
    qprobs = qcore.outcome_distribution(state, schedule.quanton_basis)
    rows: list[Row] = []
    if cfg.model == "mzi":
        claim = "mzi_equal_clicks" if cfg.wwd_enabled else "mzi_bright_d1"
        rows += [(claim, f"P({label})", p) for label, p in qprobs]
        if cfg.wwd_enabled:
            rho = qcore.reduced_density(state, 1).matrix
            rows.append(("which_way_erased", "max |rho_wwd - I/2|",
                         float(np.abs(rho - np.eye(2) / 2).max())))
    else:
        p_none = models.twoslit_pdf(model, "none")
        p_plus = models.twoslit_pdf(model, "x_plus")
        p_minus = models.twoslit_pdf(model, "x_minus")
        hist = analysis.FringeHistogram(model.centers, {"all": p_none, "plus": p_plus, "minus": p_minus},
                                        model.envelope_mass, model.wavenumber, model.width)
        rule = models.PredictionRule(cfg.eta)
        definite = models.position_predictions(model, rule) != "undetermined"
        leak = np.minimum(p_plus, p_minus) / (p_plus + p_minus)
        rows += [
            ("screen_no_interference", "visibility(all)", analysis.visibility(hist, "all").visibility),
            ("fringe_recovery", "visibility(plus)", analysis.visibility(hist, "plus").visibility),
            ("fringe_recovery", "visibility(minus)", analysis.visibility(hist, "minus").visibility),
            ("fringe_decomposition", "max |p/2 + m/2 - none|",
             float(np.abs(0.5 * p_plus + 0.5 * p_minus - p_none).max())),
            ("fringe_complementarity", "plus peaks == minus troughs",
             int(np.array_equal(
                 models.local_extrema(models.normalized_fringe(model, "x_plus"), "max"),
                 models.local_extrema(models.normalized_fringe(model, "x_minus"), "min")))),
            ("position_prediction", "definite bins", int(definite.sum())),
            ("position_prediction", "min bin leakage", float(leak.min())),
        ]
        extra["fringes"] = (["bin_center", "pdf_none", "pdf_plus", "pdf_minus"],
                            list(zip(model.centers, p_none, p_plus, p_minus)))
    if schedule.wwd() is not None:
        rows += _wwd_rows(state, schedule)
    return rows, extra


def montecarlo_summary(cfg: RunConfig, model, schedule, batch: TrialBatch) -> tuple[list[Row], dict]:
    extra = {}
    rows: list[Row] = [("trials", "n", len(batch))]
    if len(batch) == 0:
        return rows, extra
    table = analysis.coincidence_table(batch)
    qcounts = table.counts.sum(axis=1)
    if cfg.model != "twoslit":
        for label, c in zip(table.row_labels, qcounts):
            rows.append(("click_frequency", f"f({label})", c / table.total))
    if schedule.wwd() is not None:
        exact = analysis.JointDistribution.exact(model.final_state(), schedule.quanton_basis,
                                                 schedule.wwd(), schedule.order)
        fit = analysis.goodness_of_fit(table, exact)
        rows.append(("exact_agreement", "chi2 p-value", fit.p_value))
        rows.append(("exact_agreement", "forbidden coincidences",
                     int(table.counts[exact.probs <= qcore.ZERO_PROB].sum())))
        if cfg.model != "twoslit":
            for q in table.row_labels:
                for w in table.col_labels:
                    try:
                        val = analysis.conditional_probability(table, q, w)
                    except analysis.EmptyCondition:
                        continue
                    rows.append(("coincidence", f"f({w}|{q})", val))
        rows.append(("mutual_information", "plug-in bits", analysis.mutual_information(table)))
    if cfg.model == "twoslit":
        hist = analysis.FringeHistogram.from_records(model, batch)
        labels = [k for k in hist.counts if k != "all"]
        for key in ["all"] + labels:
            try:
                rows.append(("fringe_visibility", f"visibility({key})",
                             analysis.visibility(hist, key).visibility))
            except analysis.EmptyHistogram:
                pass
        extra["fringes"] = (["bin_center", "count_total"] + [f"count_{k}" for k in labels],
                            list(zip(hist.centers, *(hist.counts[k] for k in ["all"] + labels))))
    if cfg.predict:
        predicted, match = predictions(cfg, model, batch)
        extra["predict"] = (predicted, match)
        checked = match != ""
        if checked.any():
            rows.append(("prediction", "checked trials", int(checked.sum())))
            rows.append(("prediction", "match frequency", float((match[checked] == "1").mean())))
    return rows, extra


def predictions(cfg: RunConfig, model, batch: TrialBatch) -> tuple[np.ndarray, np.ndarray]:
    """Predicted x-state of the detector per trial, and whether it came true."""
    q = batch.column("detector" if cfg.model == "mzi" else "screen")
    if cfg.model == "mzi":
        table = np.array([models.predict_x_state_from_click(lab) for lab in ("D1", "D2")], dtype=object)
    else:
        table = models.position_predictions(model, models.PredictionRule(cfg.eta))
        table = np.concatenate([table, np.array(["undetermined"] * 2, dtype=object)])
    predicted = table[q]
    match = np.full(len(batch), "", dtype=object)
    if any(b.name == "x" for b in batch.bases):
        x_labels = np.array(qcore.x_basis().labels, dtype=object)[batch.column("x")]
        definite = predicted != "undetermined"
        match[definite] = np.where(x_labels[definite] == predicted[definite], "1", "0")
    return predicted, match


# Output ------------------------------------------------------------------------

def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".12g")
    return str(value)


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows([fmt(v) for v in row] for row in rows)
    return buf.getvalue()


def trials_csv(batch: TrialBatch, predict=None) -> str:
    header = ["trial_id", "order", "first_label", "second_label", "seed"]
    if predict is not None:
        header += ["predicted", "prediction_match"]
    lines = [",".join(header)]
    labels = [np.array(b.labels, dtype=object)[batch.indices[:, j]] for j, b in enumerate(batch.bases)]
    first = labels[0]
    second = labels[1] if len(labels) > 1 else np.full(len(batch), "", dtype=object)
    seed = str(batch.master_seed)
    for i in range(len(batch)):
        row = [str(batch.start + i), batch.order, first[i], second[i], seed]
        if predict is not None:
            row += [predict[0][i], predict[1][i]]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def emit_outputs(cfg: RunConfig, batch: TrialBatch | None, rows: list[Row], extra: dict) -> list[Path]:
    out = Path(cfg.out_dir)
    written = []
    if batch is not None:
        written.append(out / "trials.csv")
        write_atomic(written[-1], trials_csv(batch, extra.get("predict")))
    if "fringes" in extra:
        header, data = extra["fringes"]
        written.append(out / "fringes.csv")
        write_atomic(written[-1], _csv_text(header, data))
    written.append(out / "summary.csv")
    write_atomic(written[-1], _csv_text(["claim", "quantity", "value"], rows))
    return written


def execute(cfg: RunConfig) -> list[Path]:
    model = make_model(cfg)
    schedule = make_schedule(cfg, model)
    if cfg.mode == "analytic":
        rows, extra = analytic_summary(cfg, model, schedule)
        return emit_outputs(cfg, None, rows, extra)
    batch = run_batch(model, schedule, cfg.trials, RngSpec(cfg.seed))
    rows, extra = montecarlo_summary(cfg, model, schedule, batch)
    return emit_outputs(cfg, batch, rows, extra)


def run_command(argv=None) -> int:
    try:
        cfg = parse_config(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        execute(cfg)
    except UsageError as exc:
        build_parser().print_usage(sys.stderr)
        print(f"qeraser: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - any failure is a runtime error
        print(f"qeraser: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
