"""Command-line interface: ``hafit ingest|optimize|evaluate|simulate|enhance|prescribe|freq-response``.

Exit codes are 0 on success, 1 when a computation fails and 2 for usage or
input errors (missing or malformed files, bad options).
"""
from __future__ import annotations

import csv
import functools
import json
import logging
import sys
from pathlib import Path

import click
import numpy as np

from hafit import __version__
from hafit.config import ConfigError, RunConfig, load_fitting, save_fitting
from hafit.corpus import DatasetManifest, IngestError, ingest, load_utterances
from hafit.evaluation import EvalReport, evaluate_fitting
from hafit.ha_processor import ANCHOR_FREQS_HZ, design_fir
from hafit.hearing_loss import HearingLossModel, UnsupportedSeverityError
from hafit.noise_suppression import wiener_enhance
from hafit.optimizer import FittingProblem, train
from hafit.prescriptions import MalformedAudiogramError, nal_r, resolve_audiogram
from hafit.signal_core import (
    PRESENTATION_LEVEL_DB,
    RateMismatchError,
    UnsupportedEncodingError,
    Waveform,
    normalize_spl,
    read_wav,
    write_wav,
)

EXIT_COMPUTATION = 1
EXIT_INPUT = 2

INPUT_ERRORS = (
    FileNotFoundError,
    IsADirectoryError,
    ConfigError,
    IngestError,
    MalformedAudiogramError,
    RateMismatchError,
    UnsupportedEncodingError,
    UnsupportedSeverityError,
    json.JSONDecodeError,
)

# default evaluation front end per fitting label
_AUTO_FRONT_END = {"N": ("none",), "G": ("none",), "Cn": ("none",), "Cw": ("wiener",), "custom": ("none",)}


def _guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except click.exceptions.Exit:
            raise
        except click.ClickException:
            raise
        except KeyError as exc:
            click.echo(f"error: {exc.args[0] if exc.args else exc}", err=True)
            sys.exit(EXIT_INPUT)
        except INPUT_ERRORS as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_INPUT)
        except Exception as exc:  # computation failure
            click.echo(f"computation failed: {type(exc).__name__}: {exc}", err=True)
            sys.exit(EXIT_COMPUTATION)

    return wrapper


def _load_config(path) -> RunConfig:
    return RunConfig.load(path) if path else RunConfig()


def _audiogram(spec):
    try:
        return resolve_audiogram(spec)
    except FileNotFoundError:
        raise MalformedAudiogramError(f"{spec!r} is neither a standard audiogram nor a readable file") from None


@click.group()
@click.version_option(__version__, prog_name="hafit")
@click.option("-v", "--verbose", count=True, help="Repeat for more logging.")
def main(verbose: int) -> None:
    """Hearing-aid fitting optimization through a differentiable hearing-loss model."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


@main.command("ingest")
@click.argument("root", type=click.Path(file_okay=False))
@click.option("--out", "out", type=click.Path(dir_okay=False), required=True, help="Manifest JSON to write.")
@_guarded
def cmd_ingest(root, out):
    """Pair clean/ and noisy/ WAVs under ROOT into a hashed manifest."""
    m = ingest(root, out)
    counts = {s: len(m.select(s)) for s in ("train", "val", "test")}
    click.echo(f"{len(m.entries)} utterances {counts} hash {m.hash[:16]}")


@main.command("optimize")
@click.option("--manifest", type=click.Path(dir_okay=False), required=True)
@click.option("--config", "config_path", type=click.Path(dir_okay=False))
@click.option("--audiogram")
@click.option("--noise")
@click.option("--front-end", type=click.Choice(["none", "wiener"]))
@click.option("--source", type=click.Choice(["clean", "noisy"]))
@click.option("--seed", type=int)
@click.option("--epochs", type=int)
@click.option("--batch-size", type=int)
@click.option("--lr", type=float)
@click.option("--gradient-mode", type=click.Choice(["exact", "finite_difference"]))
@click.option("--max-utterances", type=int)
@click.option("--out", "out", type=click.Path(file_okay=False))
@_guarded
def cmd_optimize(manifest, config_path, audiogram, noise, front_end, source, seed, epochs, batch_size, lr,
                 gradient_mode, max_utterances, out):
    """Train a fitting from NAL-R and write fitting, loss CSV and run report."""
    cfg = _load_config(config_path).override(
        audiogram=audiogram, noise=noise, front_end=front_end, source=source, output_dir=out,
        max_utterances=max_utterances, train_seed=seed, train_epochs=epochs, train_batch_size=batch_size,
        train_learning_rate=lr, train_gradient_mode=gradient_mode,
    )
    m = DatasetManifest.load(manifest)
    a = _audiogram(cfg.audiogram)
    train_set = load_utterances(m, "train", cfg.noise, cfg.max_utterances, cfg.calibration)
    val_set = load_utterances(m, "val", cfg.noise, cfg.max_utterances, cfg.calibration)
    if not train_set:
        raise IngestError("no training utterances match the requested split/noise")
    problem = FittingProblem(a, cfg.train.alpha, cfg.calibration, cfg.train.taps, cfg.loss_config, cfg.smearing_config)
    run = train(train_set, a, cfg.train, cfg.front_end, cfg.source, val_set, problem,
                progress=lambda e, loss: click.echo(f"epoch {e} loss {loss:.4f}", err=True))

    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    provenance = {"audiogram": a.name, "noise": cfg.noise, "manifest_hash": m.hash}
    save_fitting(run.final, out_dir / f"fitting_{run.label}.json", provenance)
    (out_dir / "loss.csv").write_text(run.loss_csv())
    report = {
        "label": run.label,
        "audiogram": {"name": a.name, "hl_db": list(a.hl_db)},
        "manifest_hash": m.hash,
        "n_train": len(train_set),
        "n_val": len(val_set),
        "initial_gains_db": list(run.initial.gains_db),
        "final_gains_db": list(run.final.gains_db),
        "best_val_gains_db": list(run.best_val.gains_db) if run.best_val else None,
        "initial_loss": run.initial_loss,
        "final_loss": run.final_loss,
        "config": cfg.to_dict(),
    }
    (out_dir / "report.json").write_text(json.dumps(report, indent=2) + "\n")
    click.echo(f"{run.label}: " + " ".join(f"{g:.2f}" for g in run.final.gains_db))


@main.command("evaluate")
@click.argument("fittings", nargs=-1, required=True)
@click.option("--manifest", type=click.Path(dir_okay=False), required=True)
@click.option("--config", "config_path", type=click.Path(dir_okay=False))
@click.option("--audiogram")
@click.option("--noise")
@click.option("--front-end", type=click.Choice(["auto", "none", "wiener", "both"]), default="auto",
              help="auto applies Wiener only to Cw fittings.")
@click.option("--max-utterances", type=int)
@click.option("--out", "out", type=click.Path(dir_okay=False), required=True, help="CSV report to write.")
@_guarded
def cmd_evaluate(fittings, manifest, config_path, audiogram, noise, front_end, max_utterances, out):
    """Score FITTINGS (fitting JSON files) on the test split."""
    cfg = _load_config(config_path).override(audiogram=audiogram, noise=noise, max_utterances=max_utterances)
    loaded = [load_fitting(p) for p in fittings]
    m = DatasetManifest.load(manifest)
    a = _audiogram(cfg.audiogram)
    test_set = load_utterances(m, "test", cfg.noise, cfg.max_utterances, cfg.calibration)
    if not test_set:
        raise IngestError("no test utterances match the requested split/noise")
    problem = FittingProblem(a, cfg.train.alpha, cfg.calibration, cfg.train.taps, cfg.loss_config, cfg.smearing_config)
    rows = []
    for f in loaded:
        if front_end == "auto":
            modes = _AUTO_FRONT_END[f.label]
        elif front_end == "both":
            modes = ("none", "wiener")
        else:
            modes = (front_end,)
        for fe in modes:
            rows.append(evaluate_fitting(test_set, f, a, fe, "noisy", problem, noise=cfg.noise))
    report = EvalReport(tuple(rows), m.hash)
    report.write_csv(out)
    click.echo(report.to_csv(), nl=False)


@main.command("simulate")
@click.argument("input_wav", type=click.Path(dir_okay=False))
@click.option("--audiogram", required=True)
@click.option("--normalize/--no-normalize", default=False, help="Present the input at 65 dB SPL first.")
@click.option("--out", "out", type=click.Path(dir_okay=False), required=True)
@_guarded
def cmd_simulate(input_wav, audiogram, normalize, out):
    """Render INPUT_WAV as heard with the given audiogram."""
    a = _audiogram(audiogram)
    x = np.asarray(read_wav(input_wav))
    if normalize:
        x = normalize_spl(x, PRESENTATION_LEVEL_DB)
    y = HearingLossModel.build(a).simulate(x)
    write_wav(Waveform(y), out, "float32")


@main.command("enhance")
@click.argument("input_wav", type=click.Path(dir_okay=False))
@click.option("--out", "out", type=click.Path(dir_okay=False), required=True)
@_guarded
def cmd_enhance(input_wav, out):
    """Wiener-filter INPUT_WAV."""
    x = read_wav(input_wav)
    write_wav(Waveform(wiener_enhance(np.asarray(x))), out, "float32")


@main.command("prescribe")
@click.option("--audiogram", required=True)
@click.option("--out", "out", type=click.Path(dir_okay=False))
@_guarded
def cmd_prescribe(audiogram, out):
    """Print (and optionally save) the NAL-R fitting for an audiogram."""
    a = _audiogram(audiogram)
    f = nal_r(a)
    if out:
        save_fitting(f, out, {"audiogram": a.name, "rule": "NAL-R"})
    for freq, g in zip(ANCHOR_FREQS_HZ, f.gains_db):
        click.echo(f"{freq:7.0f} Hz  {g:6.2f} dB")


def frequency_response_grid(points: int = 200) -> np.ndarray:
    """Log-spaced 100 Hz to 10 kHz, with the anchor frequencies included."""
    return np.unique(np.concatenate([np.geomspace(100.0, 10000.0, points), ANCHOR_FREQS_HZ]))


@main.command("freq-response")
@click.argument("fitting", type=click.Path(dir_okay=False))
@click.option("--points", type=int, default=200, show_default=True)
@click.option("--out", "out", type=click.Path(dir_okay=False), required=True)
@_guarded
def cmd_frequency_response(fitting, points, out):
    """Write the realized FIR gain of FITTING as (frequency_hz, gain_db) CSV."""
    f = load_fitting(fitting)
    freqs = frequency_response_grid(points)
    gain = 20.0 * np.log10(np.abs(design_fir(f).response(freqs)))
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["frequency_hz", "gain_db"])
        for fr, g in zip(freqs, gain):
            w.writerow([f"{fr:.3f}", f"{g:.4f}"])


if __name__ == "__main__":
    main()
