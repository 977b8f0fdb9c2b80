"""Command-line entry point.

Subcommands: simulate | attack-dos | attack-dodge | defend | sweep.

Exit codes are a stable contract: 0 success, 1 search finished without a
hit, 2 usage or validation error, 3 oracle failure (partial results are
flushed first). Environment overrides: FRINGESIM_SCRATCH for the adapter
scratch directory, FRINGESIM_ADAPTER_TIMEOUT for the adapter timeout in
seconds.
"""

from __future__ import annotations

import argparse
import itertools
import json
import os
import shlex
import sys
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import __version__
from .attack import (
    MODE_COLLECT_ALL,
    MODE_FIRST_HIT,
    OracleError,
    SearchSpace,
    grid_search_dodging,
    grid_search_dos,
    success_rate_dodging,
    success_rate_dos,
)
from .bridge import DEFAULT_TIMEOUT_S, AdapterClient, AdapterError
from .defense import (
    FilterSpec,
    butterworth_notch,
    estimate_fringe_frequency,
    evaluate_defense,
    notch_suppression_db,
)
from .detectors import (
    FringeRunDetector,
    ProfileEmbedder,
    feature_distance,
    oracle_embedding,
    oracle_label,
)
from .io import ImageFormatError, Manifest, load_image, save_image, synth_face, write_sweep_csv
from .perturb import PerturbationParams, pulse_to_fringe, render_adversarial, theta_to_signal
from .sensor import SensorConfig
from .signal import check_imperceptible


def _floats(text: str) -> list[float]:
    return [float(part) for part in text.split(",") if part.strip() != ""]


def _ints(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part.strip() != ""]


def _pair(text: str) -> tuple[float, float]:
    values = _floats(text)
    if len(values) != 2:
        raise argparse.ArgumentTypeError(f"expected two comma-separated values, got {text!r}")
    return values[0], values[1]


def _theta_arg(text: str) -> PerturbationParams:
    try:
        return PerturbationParams.from_cli_string(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _add_sensor_args(parser, require_timing=True):
    parser.add_argument("--td", type=float, required=require_timing,
                        help="interline delay in microseconds")
    parser.add_argument("--te", type=float, required=require_timing,
                        help="per-row exposure in microseconds")
    parser.add_argument("--gain", type=float, default=1.0, help="conversion gain")
    parser.add_argument("--t0", type=float, default=0.0, help="exposure start of row 0 (us)")
    parser.add_argument("--levels", type=_pair, default=(1.0, 0.0),
                        help="on,off luminance levels (default 1,0)")
    parser.add_argument("--phase", type=float, default=0.0, help="drive phase offset (us)")


def _add_input_args(parser):
    parser.add_argument("--image", action="append", default=[], help="input image (repeatable)")
    parser.add_argument("--synth", type=_ints, default=None,
                        help="comma-separated seeds for synthetic faces")
    parser.add_argument("--rows", type=int, default=960, help="synthetic image rows")
    parser.add_argument("--cols", type=int, default=1280, help="synthetic image cols")


def _add_oracle_args(parser, kind: str):
    parser.add_argument("--oracle", choices=("stub", "external"), default="stub")
    parser.add_argument("--adapter-cmd", default=None,
                        help="adapter command line for --oracle external")
    parser.add_argument("--scratch", default=None, help="adapter scratch directory")
    parser.add_argument("--timeout", type=float, default=None, help="adapter timeout (s)")
    if kind in ("detect", "both"):
        parser.add_argument("--band", type=_pair, default=(0.4, 0.6),
                            help="stub detector row band as fractions or rows")
        parser.add_argument("--dark-thresh", type=float, default=0.5)
        parser.add_argument("--min-run", type=int, default=15)
    if kind in ("embed", "both"):
        parser.add_argument("--dim", type=int, default=16, help="stub embedder dimensions")


def _add_space_args(parser):
    parser.add_argument("--b-max", type=int, default=40)
    parser.add_argument("--s-max", type=int, default=40)
    parser.add_argument("--alpha-max", type=float, default=0.0)
    parser.add_argument("--b-step", type=int, default=1)
    parser.add_argument("--s-step", type=int, default=1)
    parser.add_argument("--alpha-step", type=float, default=45.0)
    parser.add_argument("--iters", type=int, default=1, help="outer iterations")
    parser.add_argument("--mode", choices=(MODE_FIRST_HIT, MODE_COLLECT_ALL),
                        default=MODE_FIRST_HIT)
    parser.add_argument("--randomize-phase", action="store_true",
                        help="draw a fresh drive phase per evaluation")


def _load_inputs(args) -> list[tuple[str, np.ndarray]]:
    inputs = []
    for path in args.image:
        inputs.append((Path(path).stem, load_image(path)))
    if args.synth is not None:
        for seed in args.synth:
            inputs.append((f"synth{seed}", synth_face(seed, args.rows, args.cols)))
    if not inputs:
        raise ValueError("no inputs: pass --image or --synth")
    return inputs


def _sensor_for(args, image) -> SensorConfig:
    return SensorConfig(
        interline_delay_us=args.td,
        exposure_us=args.te,
        gain=args.gain,
        rows=image.shape[0],
        cols=image.shape[1],
        start_us=args.t0,
    )


def _resolve_scratch(args) -> str | None:
    return args.scratch or os.environ.get("FRINGESIM_SCRATCH") or None


def _resolve_timeout(args) -> float:
    if args.timeout is not None:
        return args.timeout
    env = os.environ.get("FRINGESIM_ADAPTER_TIMEOUT")
    return float(env) if env else DEFAULT_TIMEOUT_S


def _make_oracles(args, kind: str, jobs: int = 1):
    """Build (primary_oracle, pool, closers) for stub or external mode."""
    if args.oracle == "stub":
        if kind == "detect":
            oracle = FringeRunDetector(band=args.band, dark_thresh=args.dark_thresh,
                                       min_run=args.min_run)
        else:
            oracle = ProfileEmbedder(dim=args.dim)
        return oracle, None, []
    if not args.adapter_cmd:
        raise ValueError("--oracle external requires --adapter-cmd")
    command = shlex.split(args.adapter_cmd)
    clients = [
        AdapterClient(command, scratch_dir=_resolve_scratch(args), timeout_s=_resolve_timeout(args))
        for _ in range(max(1, jobs))
    ]
    return clients[0], clients, clients


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def _run_echo(args, out_dir: Path, extra: dict | None = None) -> None:
    echo = {
        "version": __version__,
        "argv": sys.argv[1:] if args.argv is None else args.argv,
        "seed": getattr(args, "seed", None),
    }
    if extra:
        echo.update(extra)
    _write_json(out_dir / "run.json", echo)


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    inputs = _load_inputs(args)
    reports = []
    for name, image in inputs:
        cfg = _sensor_for(args, image)
        pulse = theta_to_signal(args.theta, cfg, levels=args.levels, phase_us=args.phase)
        imperceptible = check_imperceptible(pulse)
        if not imperceptible:
            print(f"warning: {name}: drive at {pulse.frequency_hz:.1f} Hz flickers visibly",
                  file=sys.stderr)
        adv, pattern = render_adversarial(image, args.theta, cfg,
                                          levels=args.levels, phase_us=args.phase)
        adv_path = out_dir / f"{name}.adv.pgm"
        if adv.ndim == 3:
            adv_path = out_dir / f"{name}.adv.ppm"
        save_image(np.clip(adv, 0.0, None), adv_path)
        pattern_path = out_dir / f"{name}.pattern.pgm"
        pattern.to_pgm(pattern_path)
        reports.append({
            "input": name,
            "adversarial": str(adv_path),
            "pattern_preview": str(pattern_path),
            "theta": args.theta.to_json(),
            "pulse": pulse.to_json(),
            "sensor": cfg.to_json(),
            "imperceptible": imperceptible,
        })
    _write_json(out_dir / "report.json", {"simulations": reports})
    _run_echo(args, out_dir, {"theta": args.theta.to_json()})
    return 0


# ---------------------------------------------------------------------------
# attack


def _space_from_args(args) -> SearchSpace:
    return SearchSpace(
        b_max=args.b_max,
        s_max=args.s_max,
        alpha_max=args.alpha_max,
        b_step=args.b_step,
        s_step=args.s_step,
        alpha_step=args.alpha_step,
        max_iters=args.iters,
        mode=args.mode,
    )


def _write_result(out_dir: Path, result, suffix: str = "") -> None:
    _write_json(out_dir / f"result{suffix}.json", result.to_json())
    with open(out_dir / f"result{suffix}.csv", "w", encoding="utf-8", newline="") as fh:
        result.to_csv(fh)


def cmd_attack_dos(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    inputs = _load_inputs(args)
    if len(inputs) != 1:
        raise ValueError("attack-dos expects exactly one input image")
    name, image = inputs[0]
    detector, pool, closers = _make_oracles(args, "detect", args.jobs)
    try:
        result = grid_search_dos(
            image,
            _space_from_args(args),
            detector,
            _sensor_for(args, image),
            levels=args.levels,
            phase_us=args.phase,
            randomize_phase=args.randomize_phase,
            rng=args.seed,
            n_jobs=args.jobs,
            detector_pool=pool,
        )
    except OracleError as exc:
        _write_result(out_dir, exc.partial, ".partial")
        print(f"error: oracle failed at theta {exc.theta}: {exc}", file=sys.stderr)
        return 3
    finally:
        for client in closers:
            client.close()
    _write_result(out_dir, result)
    _run_echo(args, out_dir, {"input": name, "evaluations": result.evaluations})
    return 0 if result.found else 1


def cmd_attack_dodge(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    inputs = _load_inputs(args)
    if len(inputs) != 2:
        raise ValueError("attack-dodge expects exactly two inputs (attacker, user)")
    (name_x, image_x), (name_u, image_u) = inputs
    embedder, pool, closers = _make_oracles(args, "embed", args.jobs)
    try:
        result = grid_search_dodging(
            image_x,
            image_u,
            _space_from_args(args),
            embedder,
            args.delta,
            _sensor_for(args, image_x),
            levels=args.levels,
            phase_us=args.phase,
            randomize_phase=args.randomize_phase,
            rng=args.seed,
            n_jobs=args.jobs,
            embedder_pool=pool,
        )
    except OracleError as exc:
        _write_result(out_dir, exc.partial, ".partial")
        print(f"error: oracle failed at theta {exc.theta}: {exc}", file=sys.stderr)
        return 3
    finally:
        for client in closers:
            client.close()
    _write_result(out_dir, result)
    _run_echo(args, out_dir, {"attacker": name_x, "user": name_u, "delta": args.delta})
    return 0 if result.found else 1


# ---------------------------------------------------------------------------
# defend


def cmd_defend(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.manifest:
        return _defend_batch(args, out_dir)
    inputs = _load_inputs(args)
    reports = []
    for name, image in inputs:
        f0 = args.f0 if args.f0 is not None else estimate_fringe_frequency(image)
        bandwidth = args.bandwidth if args.bandwidth is not None else f0 / 4.0
        spec = FilterSpec(center_cpr=f0, bandwidth_cpr=bandwidth,
                          order=args.order, harmonics=args.harmonics)
        repaired = butterworth_notch(image, spec, tilt_deg=args.tilt)
        out_path = out_dir / f"{name}.repaired.pgm"
        if repaired.ndim == 3:
            out_path = out_dir / f"{name}.repaired.ppm"
        save_image(np.clip(repaired, 0.0, None), out_path)
        reports.append({
            "input": name,
            "output": str(out_path),
            "f0": f0,
            "spec": spec.to_json(),
            "suppression_db": notch_suppression_db(image, repaired, f0),
        })
    _write_json(out_dir / "defend_report.json", {
        "repairs": reports,
        "inpainting_repair": "not implemented",
    })
    _run_echo(args, out_dir)
    return 0


def _defend_batch(args, out_dir: Path) -> int:
    manifest = Manifest.load(args.manifest)
    if not manifest.entries:
        raise ValueError("manifest has no entries")
    detector, _, closers = _make_oracles(args, "detect")
    base = Path(args.manifest).parent
    groups: dict[str, list] = {}
    for entry in manifest.entries:
        key = json.dumps(entry.condition, sort_keys=True)
        path = Path(entry.path)
        if not path.is_absolute():
            path = base / path
        groups.setdefault(key, []).append(load_image(path))
    rows = []
    details = []
    try:
        for key, images in sorted(groups.items()):
            attacked = [img for img in images if oracle_label(detector, img) == 0]
            if not attacked:
                rows.append((args.model_name, key, 0, 0, ""))
                continue
            f0 = args.f0 if args.f0 is not None else estimate_fringe_frequency(attacked[0])
            bandwidth = args.bandwidth if args.bandwidth is not None else f0 / 4.0
            spec = FilterSpec(center_cpr=f0, bandwidth_cpr=bandwidth,
                              order=args.order, harmonics=args.harmonics)
            rate = evaluate_defense(attacked, spec, detector=detector, tilt_deg=args.tilt)
            defended = round(rate * len(attacked))
            rows.append((args.model_name, key, len(attacked), defended, f"{rate:.4f}"))
            details.append({"condition": json.loads(key), "f0": f0, "spec": spec.to_json(),
                            "n": len(attacked), "defended": defended, "rate": rate})
    finally:
        for client in closers:
            client.close()
    with open(out_dir / "defense_rates.csv", "w", encoding="utf-8", newline="") as fh:
        write_sweep_csv(fh, rows)
    _write_json(out_dir / "defense_rates.json", {"groups": details})
    _run_echo(args, out_dir)
    return 0


# ---------------------------------------------------------------------------
# sweep


def _scaled(image: np.ndarray, scale: float) -> np.ndarray:
    """Shrink or grow frame content about the center, keeping dimensions."""
    if scale == 1.0:
        return image
    zoomed = ndimage.zoom(image, (scale, scale) + ((1.0,) if image.ndim == 3 else ()), order=1)
    out = np.full_like(image, float(np.median(image)))
    r = min(zoomed.shape[0], image.shape[0])
    c = min(zoomed.shape[1], image.shape[1])
    ro, co = (image.shape[0] - r) // 2, (image.shape[1] - c) // 2
    zo, zc = (zoomed.shape[0] - r) // 2, (zoomed.shape[1] - c) // 2
    out[ro : ro + r, co : co + c] = zoomed[zo : zo + r, zc : zc + c]
    return np.maximum(out, 0.0)


def _sweep_conditions(args) -> list[tuple[str, dict]]:
    conditions = []
    if args.pulse_periods:
        for period in args.pulse_periods:
            conditions.append((f"period={period:g}us", {"period_us": period}))
    if args.scales:
        for scale in args.scales:
            conditions.append((f"scale={scale:g}", {"scale": scale}))
    if args.tilts:
        for tilt in args.tilts:
            conditions.append((f"tilt={tilt:g}deg", {"tilt_deg": tilt}))
    if not conditions:
        raise ValueError("sweep needs --pulse-periods, --scales, or --tilts")
    return conditions


def cmd_sweep(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    inputs = _load_inputs(args)
    conditions = _sweep_conditions(args)
    kind = "embed" if args.task == "dodge" else "detect"
    oracle, _, closers = _make_oracles(args, kind)
    model = args.model_name if args.model_name else f"{args.oracle}-{kind}"
    rows = []
    try:
        for label, cond in conditions:
            period = cond.get("period_us", args.pulse_period)
            tilt = cond.get("tilt_deg", 0.0)
            scale = cond.get("scale", 1.0)
            width, interval = pulse_to_fringe(period, args.duty, args.td)
            theta = PerturbationParams(width, interval, tilt)
            images = [_scaled(img, scale) for _name, img in inputs]
            if args.task == "dos":
                n_b = n_a = 0
                for img in images:
                    cfg = _sensor_for(args, img)
                    if oracle_label(oracle, img) != 1:
                        continue  # undetectable before the attack: excluded entirely
                    n_b += 1
                    adv, _ = render_adversarial(img, theta, cfg, levels=args.levels,
                                                phase_us=args.phase)
                    n_a += int(oracle_label(oracle, adv) == 0)
                rate = success_rate_dos(n_a, n_b) if n_b else 0.0
            else:
                if args.delta is None:
                    raise ValueError("sweep --task dodge requires --delta")
                n_b = n_a = 0
                for img_x, img_u in itertools.combinations(images, 2):
                    base_dist = feature_distance(oracle_embedding(oracle, img_x),
                                                 oracle_embedding(oracle, img_u))
                    if base_dist <= args.delta:
                        continue  # already confusable: excluded entirely
                    n_b += 1
                    adv_x, _ = render_adversarial(img_x, theta, _sensor_for(args, img_x),
                                                  levels=args.levels, phase_us=args.phase)
                    adv_u, _ = render_adversarial(img_u, theta, _sensor_for(args, img_u),
                                                  levels=args.levels, phase_us=args.phase)
                    dist = feature_distance(oracle_embedding(oracle, adv_x),
                                            oracle_embedding(oracle, adv_u))
                    n_a += int(dist <= args.delta)
                rate = success_rate_dodging(n_a, n_b) if n_b else 0.0
            rows.append((model, label, n_b, n_a, f"{rate:.4f}"))
    finally:
        for client in closers:
            client.close()
    with open(out_dir / "sweep.csv", "w", encoding="utf-8", newline="") as fh:
        write_sweep_csv(fh, rows)
    _write_json(out_dir / "sweep.json", {
        "model": model,
        "rows": [dict(zip(("model", "condition", "n_b", "n_a", "rate"), row)) for row in rows],
    })
    _run_echo(args, out_dir)
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fringesim",
        description="Simulate, search, and defend illumination-modulation fringe attacks.",
    )
    parser.add_argument("--version", action="version", version=f"fringesim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="render fringe-perturbed images")
    _add_input_args(p_sim)
    _add_sensor_args(p_sim)
    p_sim.add_argument("--theta", type=_theta_arg, required=True, help="fringe as b,s[,alpha]")
    p_sim.add_argument("--out", default=".", help="output directory")
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.set_defaults(func=cmd_simulate)

    p_dos = sub.add_parser("attack-dos", help="search fringes that blind a detector")
    _add_input_args(p_dos)
    _add_sensor_args(p_dos)
    _add_space_args(p_dos)
    _add_oracle_args(p_dos, "detect")
    p_dos.add_argument("--jobs", type=int, default=1)
    p_dos.add_argument("--out", default=".", help="output directory")
    p_dos.add_argument("--seed", type=int, default=0)
    p_dos.set_defaults(func=cmd_attack_dos)

    p_dodge = sub.add_parser("attack-dodge", help="search fringes that confuse two faces")
    _add_input_args(p_dodge)
    _add_sensor_args(p_dodge)
    _add_space_args(p_dodge)
    _add_oracle_args(p_dodge, "embed")
    p_dodge.add_argument("--delta", type=float, required=True, help="verification threshold")
    p_dodge.add_argument("--jobs", type=int, default=1)
    p_dodge.add_argument("--out", default=".", help="output directory")
    p_dodge.add_argument("--seed", type=int, default=0)
    p_dodge.set_defaults(func=cmd_attack_dodge)

    p_def = sub.add_parser("defend", help="repair fringe banding with a notch filter")
    _add_input_args(p_def)
    p_def.add_argument("--manifest", default=None, help="batch mode: dataset manifest")
    _add_oracle_args(p_def, "detect")
    p_def.add_argument("--f0", type=float, default=None, help="fringe fundamental (cycles/row)")
    p_def.add_argument("--bandwidth", type=float, default=None, help="stop-band width (cycles/row)")
    p_def.add_argument("--order", type=int, default=4)
    p_def.add_argument("--harmonics", type=int, default=3)
    p_def.add_argument("--tilt", type=float, default=0.0)
    p_def.add_argument("--model-name", default="stub", help="model column for the report table")
    p_def.add_argument("--out", default=".", help="output directory")
    p_def.add_argument("--seed", type=int, default=0)
    p_def.set_defaults(func=cmd_defend)

    p_sweep = sub.add_parser("sweep", help="success-rate table over a condition axis")
    _add_input_args(p_sweep)
    _add_sensor_args(p_sweep)
    _add_oracle_args(p_sweep, "both")
    p_sweep.add_argument("--task", choices=("dos", "dodge"), default="dos")
    p_sweep.add_argument("--pulse-periods", type=_floats, default=None,
                         help="condition axis: comma-separated periods (us)")
    p_sweep.add_argument("--scales", type=_floats, default=None,
                         help="condition axis: image scale factors (distance proxy)")
    p_sweep.add_argument("--tilts", type=_floats, default=None,
                         help="condition axis: fringe tilt angles (deg)")
    p_sweep.add_argument("--pulse-period", type=float, default=1000.0,
                         help="fixed period when sweeping another axis (us)")
    p_sweep.add_argument("--duty", type=float, default=0.5)
    p_sweep.add_argument("--delta", type=float, default=None, help="threshold for --task dodge")
    p_sweep.add_argument("--model-name", default=None, help="model column for the table")
    p_sweep.add_argument("--out", default=".", help="output directory")
    p_sweep.add_argument("--seed", type=int, default=0)
    p_sweep.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.argv = list(argv) if argv is not None else None
    try:
        return args.func(args)
    except AdapterError as exc:
        print(f"error: adapter failure: {exc}", file=sys.stderr)
        return 3
    except (ValueError, ImageFormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
