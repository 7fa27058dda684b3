"""Command-line interface.

Subcommands: simulate, infer, detect, eval, pipeline.  Exit codes:
0 success, 2 configuration error, 3 data error, 4 numerical failure.
"""
from __future__ import annotations

import csv
import functools
import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from . import io as nio
from .detect import DetectorConfig, DetectorConfigError, NetworkDetector
from .inference import BhppEngine, GemEngine, SbmEngine
from .metrics import DetectionRecord, ari, ccd_dnf, rate_rmse
from .model import ConfigError, ModelConfig
from .presets import PRESET_NAMES, get_preset
from .simulate import ScheduleError

EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 2, 3, 4


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    path = Path(path)
    text = path.read_text()
    if path.suffix in (".toml", ".tml"):
        import tomllib
        return tomllib.loads(text)
    return json.loads(text)


def _guarded(fn):
    """Map library exceptions onto the documented exit codes."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ConfigError, DetectorConfigError) as exc:
            click.echo(f"config error: {exc}", err=True)
            sys.exit(EXIT_CONFIG)
        except (nio.DataError, ScheduleError, FileNotFoundError) as exc:
            click.echo(f"data error: {exc}", err=True)
            sys.exit(EXIT_DATA)
        except (FloatingPointError, np.linalg.LinAlgError) as exc:
            click.echo(f"numerical failure: {exc}", err=True)
            sys.exit(EXIT_NUMERIC)

    return wrapper


@click.group()
def main():
    """Online variational inference and changepoint detection on networks."""


def _common_out(out_dir: str) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


@main.command()
@click.option("--preset", "preset_name", type=click.Choice(PRESET_NAMES),
              required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out-dir", default=".", show_default=True)
@click.option("--n-nodes", type=int, default=None,
              help="Override the preset's network size.")
@click.option("--fraction", type=float, default=0.1, show_default=True,
              help="Fraction of nodes moved (swap preset).")
@click.option("--gap-steps", type=int, default=10, show_default=True,
              help="Batches between the two changes (rate-gap preset).")
@click.option("--rho", type=float, default=0.25, show_default=True,
              help="Edge probability (sparsity preset).")
@_guarded
def simulate(preset_name, seed, out_dir, n_nodes, fraction, gap_steps, rho):
    """Simulate an event stream from a named scenario preset."""
    out = _common_out(out_dir)
    preset = get_preset(preset_name, n_nodes=n_nodes, fraction=fraction,
                        gap_steps=gap_steps, rho=rho)
    output = preset.build(seed)
    nio.write_events_csv(out / "events.csv", output)
    nio.write_ground_truth(out / "ground_truth.json", output, preset.horizon)
    meta = {"preset": preset_name, "seed": seed, "n_nodes": preset.n_nodes,
            "n_groups": preset.n_groups, "delta": preset.delta,
            "horizon": preset.horizon, "variant": preset.variant,
            "n_events": int(output.src.size)}
    (out / "sim_meta.json").write_text(json.dumps(meta))
    click.echo(f"simulated {output.src.size} events "
               f"-> {out / 'events.csv'}")


def _make_engine(variant: str, config: ModelConfig, seed: int | None):
    if variant == "bhpp":
        return BhppEngine(config, seed=seed)
    if variant == "sbm":
        return SbmEngine(config, seed=seed)
    if variant == "gem":
        return GemEngine(config, seed=seed)
    raise ConfigError(f"unknown engine variant {variant!r}")


def _run_inference(events_path, variant, config_overrides, delta, horizon,
                   seed, out: Path) -> Path:
    registry, batches = nio.ingest_csv(events_path, delta, horizon)
    if not batches:
        raise nio.DataError("no events to infer from")
    width = batches[0].width
    kwargs = dict(n_nodes=len(registry), delta=width)
    kwargs.update(config_overrides)
    config = ModelConfig(**kwargs)
    engine = _make_engine(variant, config, seed)
    trace_path = out / "trace.jsonl"
    with nio.TraceWriter(trace_path) as trace:
        for batch in batches:
            state = engine.step(batch)
            with np.errstate(invalid="raise"):
                if not np.all(np.isfinite(state.rate.alpha)):
                    raise FloatingPointError("non-finite rate posterior")
            sigma = state.sbm.sigma if variant == "sbm" else None
            occupancy = state.occupancy if variant == "gem" else None
            trace.write_step(state.step_index, state.rate.alpha,
                             state.rate.beta,
                             getattr(getattr(state, "mixture", None),
                                     "gamma", None),
                             state.membership.tau, sigma, occupancy)
    (out / "node_registry.json").write_text(json.dumps(registry.names))
    if variant == "gem":
        occupied = engine.occupied_groups()
        report = {"occupied_groups": occupied.tolist(),
                  "occupied_count": int(occupied.size)}
        (out / "occupancy.json").write_text(json.dumps(report))
        click.echo(f"occupied group count: {occupied.size}")
    return trace_path


@main.command()
@click.option("--events", "events_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--variant", type=click.Choice(["bhpp", "sbm", "gem"]),
              default="bhpp", show_default=True)
@click.option("--delta", default="0.1", show_default=True,
              help="Batch width (number or duration string like '1w').")
@click.option("--horizon", type=float, default=None)
@click.option("--n-groups", type=int, default=2, show_default=True)
@click.option("--truncation", type=int, default=10, show_default=True)
@click.option("--epsilon", type=float, default=0.1, show_default=True)
@click.option("--forgetting", type=float, default=0.1, show_default=True,
              help="Shared value for all forgetting factors.")
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None, help="TOML/JSON file of ModelConfig overrides.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out-dir", default=".", show_default=True)
@_guarded
def infer(events_path, variant, delta, horizon, n_groups, truncation,
          epsilon, forgetting, config_path, seed, out_dir):
    """Run online inference over an event CSV, writing a posterior trace."""
    out = _common_out(out_dir)
    overrides = dict(
        n_groups=(truncation if variant == "gem" else n_groups),
        truncation=truncation, epsilon_occupancy=epsilon,
        delta_lambda=forgetting, delta_z=forgetting,
        delta_pi=forgetting, delta_u=forgetting)
    if variant == "gem":
        overrides.update(delta_z=1.0, delta_pi=1.0, delta_u=1.0, n_cavi=20)
    overrides.update(_load_config_file(config_path))
    trace_path = _run_inference(events_path, variant, overrides,
                                delta, horizon, seed, out)
    click.echo(f"trace written to {trace_path}")


def _run_detection(trace_path, det_config: DetectorConfig, out: Path) -> Path:
    records = nio.read_trace(trace_path)
    if not records:
        raise nio.DataError("empty trace")
    tau0 = np.asarray(records[0]["tau"])
    alpha0 = np.asarray(records[0]["alpha"])
    detector = NetworkDetector(det_config, alpha0.shape[0], tau0.shape[0])
    detections_path = out / "detections.jsonl"
    with nio.DetectionLog(detections_path) as log:
        for rec in records:
            events = detector.update(np.asarray(rec["alpha"]),
                                     np.asarray(rec["beta"]),
                                     np.asarray(rec["tau"]))
            for ev in events:
                log.write(ev.step, ev.kind, ev.key, ev.statistic,
                          ev.threshold, ev.flagged)
    return detections_path


@main.command()
@click.option("--trace", "trace_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--b1", type=int, default=10, show_default=True)
@click.option("--b2", type=int, default=10, show_default=True)
@click.option("--kappa", type=int, default=2, show_default=True)
@click.option("--w-kl", type=float, default=10.0, show_default=True)
@click.option("--w-js", type=float, default=2.0, show_default=True)
@click.option("--no-reset", is_flag=True,
              help="Keep sliding the detection window after a flag.")
@click.option("--out-dir", default=".", show_default=True)
@_guarded
def detect(trace_path, b1, b2, kappa, w_kl, w_js, no_reset, out_dir):
    """Run changepoint detection over a posterior trace."""
    out = _common_out(out_dir)
    det_config = DetectorConfig(b1=b1, b2=b2, kappa=kappa, w_kl=w_kl,
                                w_js=w_js, reset_on_flag=not no_reset)
    path = _run_detection(trace_path, det_config, out)
    click.echo(f"detections written to {path}")


def _truth_changes(truth: dict) -> list[tuple[float, tuple]]:
    changes = []
    rates = truth["rates"]
    for t, prev, cur in zip(truth["rate_times"][1:], rates[:-1], rates[1:]):
        for k, m in zip(*np.nonzero(~np.isclose(prev, cur))):
            changes.append((float(t), ("rate", int(k), int(m))))
    labels = truth["memberships"]
    for t, prev, cur in zip(truth["membership_times"][1:], labels[:-1],
                            labels[1:]):
        for i in np.nonzero(np.asarray(prev) != np.asarray(cur))[0]:
            changes.append((float(t), ("node", int(i))))
    return changes


def _run_eval(trace_path, detections_path, truth_path, delta, burn_in,
              out: Path) -> dict:
    records = nio.read_trace(trace_path)
    truth = nio.read_ground_truth(truth_path)
    delta = nio.parse_duration(delta)
    # trace rows follow the ingestion registry's first-appearance order;
    # remap ground-truth node indexing to match when the registry is numeric
    node_perm = None
    registry_path = Path(trace_path).parent / "node_registry.json"
    if registry_path.exists():
        names = json.loads(registry_path.read_text())
        if names and all(str(n).isdigit() for n in names):
            node_perm = np.array([int(n) for n in names])
    pos_of = None
    if node_perm is not None:
        pos_of = np.empty(node_perm.size, dtype=int)
        pos_of[node_perm] = np.arange(node_perm.size)
    label_times = np.asarray(truth["membership_times"])
    label_values = truth["memberships"]
    rate_times = np.asarray(truth["rate_times"])
    rate_values = truth["rates"]

    def at(times, values, t):
        return values[int(np.searchsorted(times, t, side="right")) - 1]

    ari_series, mean_trace, true_trace = [], [], []
    for rec in records:
        t = rec["r"] * delta
        true_labels = np.asarray(at(label_times, label_values, t))
        if node_perm is not None:
            true_labels = true_labels[node_perm]
        ari_series.append(ari(np.asarray(rec["tau_argmax"]), true_labels))
        alpha, beta = np.asarray(rec["alpha"]), np.asarray(rec["beta"])
        mean_trace.append(alpha / beta)
        true_rates = np.asarray(at(rate_times, rate_values, t))
        k = alpha.shape[0]
        if true_rates.shape[0] != k:
            padded = np.zeros((k, k))
            kk = true_rates.shape[0]
            padded[:kk, :kk] = true_rates
            true_rates = padded
        true_trace.append(true_rates)
    rmse = rate_rmse(np.asarray(mean_trace), np.asarray(true_trace), burn_in)

    # inferred group labels are only identified up to permutation; map each
    # inferred group to the majority true label so flag keys are comparable
    last = records[-1]
    final_true = np.asarray(at(label_times, label_values,
                               last["r"] * delta))
    if node_perm is not None:
        final_true = final_true[node_perm]
    inferred = np.asarray(last["tau_argmax"])
    n_inf = np.asarray(last["alpha"]).shape[0]
    n_true = int(final_true.max()) + 1
    contingency = np.zeros((n_inf, max(n_true, n_inf)))
    for g, z in zip(inferred, final_true):
        contingency[g, z] += 1
    group_map = np.argmax(contingency, axis=1)

    flagged = []
    for rec in nio.read_trace(detections_path):
        key = rec["key"]
        kind = rec["kind"]
        if kind == "rate":
            flag_key = ("rate", int(group_map[key[0]]), int(group_map[key[1]]))
        else:
            flag_key = ("node", int(key if np.isscalar(key) else key[0]))
        flagged.append((rec["step"] * delta, flag_key))
    true_changes = _truth_changes(truth)
    if pos_of is not None:
        true_changes = [(t, ("node", int(pos_of[key[1]]))
                         if key[0] == "node" else key)
                        for t, key in true_changes]
    record = DetectionRecord(true_changes, flagged)
    ccd, dnf, per_key = ccd_dnf(record, horizon=truth["horizon"])

    summary = {
        "ari_final": ari_series[-1],
        "ari_series": ari_series,
        "ccd": ccd,
        "dnf": dnf,
        "per_key": {str(k): v for k, v in per_key.items()},
        "rate_rmse": np.asarray(rmse).tolist(),
        "burn_in": burn_in,
    }
    (out / "summary.json").write_text(json.dumps(summary))

    # plot-ready exports: posterior block means with one-sd bands, and
    # membership-change flag counts per step
    with open(out / "rate_means.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "block_row", "block_col", "mean", "sd"])
        for rec in records:
            alpha, beta = np.asarray(rec["alpha"]), np.asarray(rec["beta"])
            mean, sd = alpha / beta, np.sqrt(alpha) / beta
            for k in range(mean.shape[0]):
                for m in range(mean.shape[1]):
                    writer.writerow([rec["r"], k, m, mean[k, m], sd[k, m]])
    flag_counts = {}
    for t, key in flagged:
        if key[0] == "node":
            step = int(round(t / delta))
            flag_counts[step] = flag_counts.get(step, 0) + 1
    with open(out / "node_flags.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "n_flagged_nodes"])
        for step in sorted(flag_counts):
            writer.writerow([step, flag_counts[step]])
    return summary


@main.command("eval")
@click.option("--trace", "trace_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--detections", "detections_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--truth", "truth_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--delta", default="0.1", show_default=True)
@click.option("--burn-in", type=int, default=10, show_default=True)
@click.option("--out-dir", default=".", show_default=True)
@_guarded
def eval_cmd(trace_path, detections_path, truth_path, delta, burn_in, out_dir):
    """Score a trace and detection log against simulator ground truth."""
    out = _common_out(out_dir)
    summary = _run_eval(trace_path, detections_path, truth_path, delta,
                        burn_in, out)
    click.echo(f"ARI(final)={summary['ari_final']:.3f} "
               f"CCD={summary['ccd']:.3f} DNF={summary['dnf']:.3f}")


@main.command()
@click.option("--preset", "preset_name", type=click.Choice(PRESET_NAMES),
              required=True)
@click.option("--variant", type=click.Choice(["bhpp", "sbm", "gem"]),
              default=None, help="Defaults to the preset's variant.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--forgetting", type=float, default=0.1, show_default=True)
@click.option("--n-nodes", type=int, default=None)
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None)
@click.option("--out-dir", default=".", show_default=True)
@_guarded
def pipeline(preset_name, variant, seed, forgetting, n_nodes, config_path,
             out_dir):
    """simulate -> infer -> detect -> eval in one run."""
    out = _common_out(out_dir)
    preset = get_preset(preset_name, n_nodes=n_nodes, forgetting=forgetting)
    variant = variant or preset.variant
    output = preset.build(seed)
    nio.write_events_csv(out / "events.csv", output)
    nio.write_ground_truth(out / "ground_truth.json", output, preset.horizon)

    overrides = dict(
        n_groups=(preset.truncation if variant == "gem" else preset.n_groups),
        delta_lambda=forgetting, delta_z=forgetting,
        delta_pi=forgetting, delta_u=forgetting)
    if variant == "gem":
        overrides.update(truncation=preset.truncation, delta_z=1.0,
                         delta_pi=1.0, delta_u=1.0, n_cavi=20)
    overrides.update(_load_config_file(config_path))
    trace_path = _run_inference(out / "events.csv", variant, overrides,
                                preset.delta, preset.horizon, seed, out)
    detections_path = _run_detection(trace_path, preset.detector, out)
    summary = _run_eval(trace_path, detections_path,
                        out / "ground_truth.json", preset.delta,
                        preset.detector.b1, out)
    click.echo(f"pipeline done: ARI(final)={summary['ari_final']:.3f} "
               f"CCD={summary['ccd']:.3f} DNF={summary['dnf']:.3f}")


def n_workers() -> int:
    """Worker-thread cap for replicate sweeps (NETCPD_THREADS, default 4)."""
    try:
        return max(1, int(os.environ.get("NETCPD_THREADS", "4")))
    except ValueError:
        return 4


if __name__ == "__main__":
    main()
