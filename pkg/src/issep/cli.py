"""Command-line driver wiring the pipeline: simulate, separate, dereverb, evaluate.

Option values resolve in three layers: built-in defaults, then a JSON
config file (flat keys mirroring the option names), then explicit flags.
Failures emit one machine-readable JSON line on stderr and a nonzero exit.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .iss import IssConfig, separate
from .metrics import evaluate
from .models import SourceModel
from .simulate import make_scene
from .stft import MultichannelSpectrogram, StftConfig, Waveform, istft, read_wav, stft, write_wav
from .wpe import wpe_dereverb


@dataclass
class RunConfig:
    """Resolved options for one invocation."""

    sources: int | None = None
    channels: int = 2
    taps: int = 5
    delay: int = 3
    iterations: int = 15
    warmstart_iterations: int = 0
    model: str = "laplace"
    epsilon: float = 1e-3
    ref_channel: int = 0
    seed: int = 0
    kind: str = "anechoic"
    rt_decay_ms: float = 300.0
    snr_db: float | None = None
    duration_s: float = 3.0
    max_delay_samples: int = 0


CONFIG_KEYS = tuple(asdict(RunConfig()).keys())


def _resolve(args: argparse.Namespace) -> RunConfig:
    values = asdict(RunConfig())
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            file_values = json.load(fh)
        unknown = sorted(set(file_values) - set(values))
        if unknown:
            raise ValueError(f"unknown config keys: {unknown}")
        values.update(file_values)
    for key in CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    return RunConfig(**values)


def _write_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def cmd_simulate(cfg: RunConfig, out_dir) -> int:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    scene = make_scene(
        n_sources=cfg.sources if cfg.sources is not None else 2,
        n_channels=cfg.channels,
        kind=cfg.kind,
        rt_decay_ms=cfg.rt_decay_ms,
        snr_db=math.inf if cfg.snr_db is None else cfg.snr_db,
        duration_s=cfg.duration_s,
        seed=cfg.seed,
        max_delay_samples=cfg.max_delay_samples,
    )
    write_wav(out / "mix.wav", Waveform(scene.mixture, scene.sample_rate))
    src_files = []
    for k in range(scene.n_sources):
        name = f"src_{k}.wav"
        write_wav(out / name, Waveform(scene.images[k, cfg.ref_channel], scene.sample_rate))
        src_files.append(name)
    _write_json(
        out / "scene.json",
        {"params": scene.params, "files": {"mixture": "mix.wav", "sources": src_files}},
    )
    print(f"wrote scene to {out}")
    return 0


def cmd_separate(cfg: RunConfig, input_path, out_dir, trace_path=None) -> int:
    w = read_wav(input_path)
    if cfg.sources is not None and cfg.sources > w.n_channels:
        raise ValueError(f"{cfg.sources} sources from {w.n_channels} channels")
    S = stft(w)
    iss_cfg = IssConfig(
        n_sources=cfg.sources,
        iterations=cfg.iterations,
        taps=cfg.taps,
        delay=cfg.delay,
        source_model=SourceModel(cfg.model),
        epsilon=cfg.epsilon,
        ref_channel=cfg.ref_channel,
        track_cost=trace_path is not None,
        warmstart_iterations=cfg.warmstart_iterations,
    )
    Y, _, trace = separate(S.data, iss_cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for k in range(Y.shape[0]):
        y = istft(
            MultichannelSpectrogram(Y[k : k + 1], S.config, w.sample_rate),
            length=w.n_samples,
        )
        write_wav(out / f"est_{k}.wav", y)
    if trace_path is not None:
        _write_json(trace_path, {"cost_trace": trace})
    print(f"wrote {Y.shape[0]} separated sources to {out}")
    return 0


def cmd_dereverb(cfg: RunConfig, input_path, output_path) -> int:
    w = read_wav(input_path)
    S = stft(w)
    Xd, _ = wpe_dereverb(
        S.data, taps=cfg.taps, delay=cfg.delay, iterations=cfg.iterations, epsilon=cfg.epsilon
    )
    y = istft(MultichannelSpectrogram(Xd, S.config, w.sample_rate), length=w.n_samples)
    write_wav(output_path, y)
    print(f"wrote dereverberated audio to {output_path}")
    return 0


def cmd_evaluate(est_paths, ref_paths, report_path=None, trace_path=None) -> int:
    est = np.concatenate([read_wav(p).samples for p in est_paths])
    ref = np.concatenate([read_wav(p).samples for p in ref_paths])
    trace = None
    if trace_path is not None:
        with open(trace_path, encoding="utf-8") as fh:
            trace = json.load(fh).get("cost_trace")
    report = evaluate(est, ref, cost_trace=trace)
    payload = report.as_dict()
    print(json.dumps(payload, indent=2))
    if report_path is not None:
        _write_json(report_path, payload)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="issep",
        description="Multichannel source separation and dereverberation toolkit",
    )
    parser.add_argument("--config", help="JSON file with flat option keys")
    parser.add_argument("--threads", type=int, default=None, help="cap BLAS/FFT threads")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, keys):
        spec = {
            "sources": dict(type=int),
            "channels": dict(type=int),
            "taps": dict(type=int),
            "delay": dict(type=int),
            "iterations": dict(type=int),
            "warmstart_iterations": dict(type=int),
            "model": dict(choices=("gauss", "laplace", "unit")),
            "epsilon": dict(type=float),
            "ref_channel": dict(type=int),
            "seed": dict(type=int),
            "kind": dict(choices=("anechoic", "reverberant")),
            "rt_decay_ms": dict(type=float),
            "snr_db": dict(type=float),
            "duration_s": dict(type=float),
            "max_delay_samples": dict(type=int),
        }
        for key in keys:
            p.add_argument(f"--{key.replace('_', '-')}", default=None, **spec[key])

    p_sim = sub.add_parser("simulate", help="render a synthetic scene")
    p_sim.add_argument("--out-dir", required=True)
    add_common(
        p_sim,
        (
            "sources",
            "channels",
            "kind",
            "rt_decay_ms",
            "snr_db",
            "duration_s",
            "seed",
            "max_delay_samples",
            "ref_channel",
        ),
    )

    p_sep = sub.add_parser("separate", help="separate a multichannel WAV")
    p_sep.add_argument("--input", required=True)
    p_sep.add_argument("--out-dir", required=True)
    p_sep.add_argument("--cost-trace", default=None, help="write the cost trace JSON here")
    add_common(
        p_sep,
        (
            "sources",
            "taps",
            "delay",
            "iterations",
            "warmstart_iterations",
            "model",
            "epsilon",
            "ref_channel",
        ),
    )

    p_der = sub.add_parser("dereverb", help="dereverberate a multichannel WAV")
    p_der.add_argument("--input", required=True)
    p_der.add_argument("--output", required=True)
    add_common(p_der, ("taps", "delay", "iterations", "epsilon"))

    p_eval = sub.add_parser("evaluate", help="score estimates against references")
    p_eval.add_argument("--estimates", nargs="+", required=True)
    p_eval.add_argument("--references", nargs="+", required=True)
    p_eval.add_argument("--report", default=None)
    p_eval.add_argument("--cost-trace", default=None, help="attach this trace JSON to the report")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        limits = threadpool_limits(limits=args.threads) if args.threads else None
        try:
            if args.command == "simulate":
                return cmd_simulate(_resolve(args), args.out_dir)
            if args.command == "separate":
                return cmd_separate(_resolve(args), args.input, args.out_dir, args.cost_trace)
            if args.command == "dereverb":
                return cmd_dereverb(_resolve(args), args.input, args.output)
            return cmd_evaluate(args.estimates, args.references, args.report, args.cost_trace)
        finally:
            if limits is not None:
                limits.unregister()
    except Exception as exc:  # pragma: no cover - exercised via CLI tests
        print(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}),
            file=sys.stderr,
        )
        return 1


if __name__ == "__main__":
    sys.exit(main())
