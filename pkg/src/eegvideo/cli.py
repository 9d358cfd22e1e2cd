"""Command-line entry point: ``eegvideo {synth,frames,flow,train,eval}``."""
from __future__ import annotations

import argparse
import logging
import os
import sys
import tempfile
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import dsp, imaging
from .eegio import read_recording, standard_layout_22, synth_recording, write_recording
from .evaluation import cross_validate, epoch_curve_csv, format_table, reports_to_csv
from .flow import DEFAULT_MAX_MAG, flow_to_hsv_image, video_flow, write_ppm
from .net import save_checkpoint
from .pipeline import BandpassFilter, DaeDenoiser, make_cnn_rnn

log = logging.getLogger("eegvideo")


class CliError(Exception):
    pass


@contextmanager
def atomic_path(path):
    """Yield a temporary sibling path that replaces ``path`` only on success."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix="." + path.name, suffix=".part")
    os.close(fd)
    try:
        yield tmp
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.remove(tmp)


def _load(path):
    if not Path(path).is_file():
        raise CliError("input file not found: %s" % path)
    return read_recording(path)


def _outdir(path):
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _preprocess(rec, args):
    X = BandpassFilter(rec.sample_rate).fit_transform(rec.X)
    if not args.no_dae:
        X = DaeDenoiser(seed=args.seed).fit_transform(X)
    return X


def _trial_video(rec, args):
    """12-frame video of the selected trial and band (or broadband)."""
    if not 0 <= args.trial < len(rec):
        raise CliError("trial index %d out of range (recording has %d trials)" % (args.trial, len(rec)))
    if args.band != "broadband":
        band = dsp.band_by_name(args.band)
        dsp.BandpassSpec(band.low_hz, band.high_hz).validate(rec.sample_rate)
    X = _preprocess(rec, args)[args.trial]
    if args.band != "broadband":
        X = dsp.butter_bandpass(dsp.BandpassSpec(band.low_hz, band.high_hz), rec.sample_rate, X)
    proj = imaging.aep_project(rec.layout)
    video = imaging.make_video(X, proj, args.band, rec.trials[args.trial].label)
    return imaging.compress_video(video)


def cmd_synth(args):
    layout = standard_layout_22()
    rec = synth_recording(args.seed, args.classes, args.per_class, layout, args.rate, args.dur,
                          noise_std=args.noise)
    with atomic_path(args.output) as tmp:
        write_recording(rec, tmp)
    print("wrote %s: %d trials, %d channels, %d samples at %g Hz"
          % (args.output, len(rec), rec.n_channels, rec.n_samples, rec.sample_rate))


def cmd_frames(args):
    rec = _load(args.input)
    video = _trial_video(rec, args)
    lo, hi = args.lo, args.hi
    if lo is None or hi is None:
        m = float(np.max(np.abs(video.frames))) or 1.0
        lo, hi = -m, m
    out = _outdir(args.outdir)
    for i, frame in enumerate(video.frames):
        with atomic_path(out / ("frame_%02d.pgm" % i)) as tmp:
            imaging.frame_to_pgm(frame, lo, hi, tmp)
    print("wrote %d frames to %s (gray range [%g, %g])" % (len(video), out, lo, hi))


def cmd_flow(args):
    rec = _load(args.input)
    video = _trial_video(rec, args)
    out = _outdir(args.outdir)
    fields = video_flow(video.frames)
    for i, fl in enumerate(fields):
        with atomic_path(out / ("flow_%02d.ppm" % i)) as tmp:
            write_ppm(flow_to_hsv_image(fl, args.max_mag), tmp)
    print("wrote %d flow images to %s" % (len(fields), out))


def _net_params(args):
    return dict(epochs_cnn=args.epochs_cnn, epochs_rnn=args.epochs_rnn, frames_per_trial=args.frames_per_trial,
                lr_cnn=args.lr_cnn, lr_rnn=args.lr_rnn, batch=args.batch)


def cmd_train(args):
    rec = _load(args.input)
    y = rec.labels
    if len(rec) == 0:
        raise CliError("recording has no trials")
    counts = np.bincount(y)
    if np.any(counts == 0) or counts.max() != counts.min():
        raise CliError("training set must be balanced with every class present (counts %s)" % counts.tolist())
    model = make_cnn_rnn(rec.layout, rec.sample_rate, cell=args.cell, seed=args.seed,
                         denoise=not args.no_dae, **_net_params(args))
    model.fit(rec.X, y)
    acc = float(np.mean(model.predict(rec.X) == y))
    net = model[-1]
    with atomic_path(args.output) as tmp:
        save_checkpoint(net.params_, tmp)
    curve = args.curve or str(Path(args.output).with_suffix(".epochs.csv"))
    with atomic_path(curve) as tmp:
        epoch_curve_csv(net.training_log_, tmp)
    print("training accuracy: %.4f" % acc)
    print("wrote checkpoint %s and epoch curve %s" % (args.output, curve))


def cmd_eval(args):
    rec = _load(args.input)
    counts = np.bincount(rec.labels)
    if counts.min() < args.k:
        raise CliError("each class needs at least k=%d trials (smallest class has %d)" % (args.k, counts.min()))
    reports = [cross_validate(rec, m, k=args.k, seed=args.seed, n_jobs=args.jobs, net_params=_net_params(args))
               for m in args.method]
    text = format_table(reports)
    sys.stdout.write(text)
    if args.csv:
        with atomic_path(args.csv) as tmp:
            reports_to_csv(reports, tmp)
        print("wrote %s" % args.csv)


def _add_video_args(p):
    p.add_argument("input", help="ERF recording")
    p.add_argument("--trial", type=int, default=0, help="trial index (default 0)")
    p.add_argument("--band", default="alpha", choices=list(dsp.BAND_NAMES) + ["broadband"])
    p.add_argument("--outdir", "-o", required=True)
    p.add_argument("--seed", type=int, default=0, help="seed of the denoising autoencoder")
    p.add_argument("--no-dae", action="store_true", help="skip the denoising autoencoder")


def _add_net_args(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs-cnn", type=int, default=4)
    p.add_argument("--epochs-rnn", type=int, default=30)
    p.add_argument("--frames-per-trial", type=int, default=48,
                   help="fully sampled frames per trial used to pre-train the CNN")
    p.add_argument("--lr-cnn", type=float, default=0.01)
    p.add_argument("--lr-rnn", type=float, default=0.01)
    p.add_argument("--batch", type=int, default=32)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eegvideo", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic recording")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--per-class", type=int, default=10)
    p.add_argument("--rate", type=float, default=250.0)
    p.add_argument("--dur", type=float, default=2.0)
    p.add_argument("--noise", type=float, default=2.0, help="sensor noise std (microvolts)")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("frames", help="export the 12 compressed frames of one trial as PGM")
    _add_video_args(p)
    p.add_argument("--lo", type=float, help="amplitude mapped to gray 0")
    p.add_argument("--hi", type=float, help="amplitude mapped to gray 255")
    p.set_defaults(func=cmd_frames)

    p = sub.add_parser("flow", help="export the 11 optical-flow images of one trial as PPM")
    _add_video_args(p)
    p.add_argument("--max-mag", type=float, default=DEFAULT_MAX_MAG)
    p.set_defaults(func=cmd_flow)

    p = sub.add_parser("train", help="train the CNN-RNN on a recording")
    p.add_argument("input")
    p.add_argument("--cell", choices=["lstm", "gru"], default="lstm")
    p.add_argument("-o", "--output", required=True, help="checkpoint path")
    p.add_argument("--curve", help="epoch-curve CSV path (default: <output>.epochs.csv)")
    p.add_argument("--no-dae", action="store_true")
    _add_net_args(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="k-fold cross-validation")
    p.add_argument("input")
    p.add_argument("--method", nargs="+", default=["csp-lda"],
                   choices=["cnn-rnn-lstm", "cnn-rnn-gru", "csp-lda"])
    p.add_argument("-k", type=int, default=10)
    p.add_argument("--csv", help="per-fold accuracy CSV")
    p.add_argument("--jobs", type=int, default=1, help="parallel folds")
    _add_net_args(p)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (CliError, ValueError, OSError) as exc:
        print("eegvideo %s: error: %s" % (args.command, exc), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
