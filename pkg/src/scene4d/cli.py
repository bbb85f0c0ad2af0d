"""Command line entry points.

    scene4d fixture contact --out demo/contact --queries
    scene4d build demo/contact/manifest.json --out demo/contact/build
    scene4d serve demo/contact/build
    scene4d mock-llm --port 8091
    scene4d ask demo/contact/build "Where do instances 1 and 2 ..." \
        --type spatial --endpoint http://127.0.0.1:8091/v1/chat/completions
    scene4d bench demo/contact/build --queries demo/contact/queries.jsonl \
        --endpoint http://127.0.0.1:8091/v1/chat/completions
    scene4d ablate demo/contact/manifest.json
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import fixtures as fixtures_mod
from .densification import DensifyConfig, export_ply
from .errors import Scene4DError
from .evaluation import load_fixtures, run_benchmark, save_fixtures
from .gateway import EndpointConfig, GatewayServer, MockLLM, run_session
from .lifting import LiftConfig
from .pipeline import (
    ABLATIONS,
    PipelineConfig,
    ablation_config,
    build,
    build_from_manifest,
    load_built,
    persist,
)
from .scene_io import load_scene, validate_bundle
from .toolkit import scene_summary


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--no-jump-filter", action="store_true")
    p.add_argument("--no-depth-maintenance", action="store_true")
    p.add_argument("--no-gradient-filter", action="store_true")
    p.add_argument("--multi-frame", action="store_true")
    p.add_argument("--stride", type=int, default=4, help="dense pixel stride")
    p.add_argument("--k", type=int, default=8, help="interpolation neighbors")
    p.add_argument("--tau", type=float, default=0.6, help="merge containment threshold")
    p.add_argument("--t-ref", type=int, default=None)
    p.add_argument("--seed-frames", type=str, default=None, help="comma separated, e.g. 0,10,19")


def _config_from_args(args) -> PipelineConfig:
    seeds = None
    if args.seed_frames:
        seeds = tuple(int(x) for x in args.seed_frames.split(","))
    return PipelineConfig(
        lift=LiftConfig(
            enable_jump_filter=not args.no_jump_filter,
            enable_depth_maintenance=not args.no_depth_maintenance,
            enable_gradient_filter=not args.no_gradient_filter,
        ),
        densify=DensifyConfig(k=args.k, pixel_stride=args.stride),
        seed_frames=seeds,
        t_ref=args.t_ref,
        tau=args.tau,
        multi_frame=args.multi_frame,
    )


def _endpoint_from_args(args) -> EndpointConfig:
    return EndpointConfig(
        url=args.endpoint,
        model=args.model,
        api_key=args.api_key,
        step_budget=args.step_budget,
    )


def cmd_validate(args) -> int:
    bundle = load_scene(args.manifest)
    report = validate_bundle(bundle)
    if args.json:
        print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    else:
        print(report)
    return 0 if report.ok else 1


def cmd_fixture(args) -> int:
    recipe = fixtures_mod.preset(
        args.preset, emit_frames=args.emit_frames, multi_seed=args.multi_seed
    )
    out = Path(args.out or args.preset)
    manifest_path, truth_path = fixtures_mod.write_fixture(recipe, out)
    print(f"wrote {manifest_path}")
    print(f"wrote {truth_path}")
    if args.queries:
        bundle, truth = fixtures_mod.generate_fixture(recipe)
        scene = build(bundle)
        qpath = save_fixtures(fixtures_mod.make_queries(scene, truth), out / "queries.jsonl")
        print(f"wrote {qpath}")
    return 0


def cmd_build(args) -> int:
    config = _config_from_args(args)
    out = Path(args.out)
    scene = build_from_manifest(args.manifest, config, out_dir=out, cache_dir=args.cache)
    print(f"built scene {scene.manifest.scene_id!r} -> {out / 'scene.json'}")
    print(f"fingerprint {config.fingerprint()}")
    for s in scene_summary(scene):
        c = np.round(s.centroid, 3).tolist()
        print(
            f"  instance {s.instance_id} class={s.class_name} points={s.num_points} "
            f"centroid={c} present={s.first_present}..{s.last_present}"
        )
    return 0


def cmd_lift(args) -> int:
    config = _config_from_args(args)
    bundle = load_scene(args.manifest)
    from .lifting import lift_tracks

    cloud = lift_tracks(bundle, config.lift)
    n, t = cloud.num_points, cloud.num_timesteps
    alive = int(cloud.alive.sum())
    vis = float(cloud.visibility.mean())
    print(f"{n} tracks x {t} steps, alive {alive} ({alive / n:.1%}), visible {vis:.1%}")
    z = cloud.cam_depths[cloud.visibility & cloud.alive[:, None]]
    if z.size:
        print(f"camera depth range [{z.min():.3f}, {z.max():.3f}] m")
    return 0


def cmd_ply(args) -> int:
    config = _config_from_args(args)
    scene = build_from_manifest(args.manifest, config)
    t = args.t if args.t is not None else scene.dense.t_obs[0]
    path = export_ply(scene.dense, int(t), args.out, binary=args.binary)
    print(f"wrote {path} ({scene.dense.num_points} points at t={int(t)})")
    return 0


def cmd_serve(args) -> int:
    scenes = {}
    for d in args.build_dir:
        scene = load_built(d)
        scenes[scene.manifest.scene_id] = scene
    server = GatewayServer(scenes, host=args.host, port=args.port)
    names = ", ".join(sorted(scenes))
    print(f"serving {names} at {server.url}  (Ctrl+C stops)")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def cmd_mock_llm(args) -> int:
    server = MockLLM(host=args.host, port=args.port, prose=args.prose)
    print(f"mock chat-completions endpoint at {server.url}  (Ctrl+C stops)")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def cmd_ask(args) -> int:
    scene = load_built(args.build_dir)
    answer = run_session(
        scene,
        args.query,
        args.type,
        _endpoint_from_args(args),
        frame_fetching=not args.no_frames,
    )
    if args.transcript:
        for msg in answer.transcript:
            role = msg.get("role")
            body = msg.get("content")
            if isinstance(body, list):
                body = "<image attachment>"
            if msg.get("tool_calls"):
                calls = ", ".join(
                    f"{c['function']['name']}({c['function']['arguments']})"
                    for c in msg["tool_calls"]
                )
                body = f"[tool calls] {calls}"
            print(f"--- {role}\n{body}")
    print(f"tool calls: {answer.num_tool_calls}, steps: {answer.steps}")
    if answer.parse_ok:
        print(f"answer: {answer.prediction}")
        return 0
    print(f"no parseable answer: {answer.failure_reason}")
    return 1


def _bench_runner(scenes, endpoint):
    def run(fixture):
        scene = scenes[fixture.scene_id]
        return run_session(scene, fixture.query, fixture.query_type, endpoint)

    return run


def cmd_bench(args) -> int:
    scene = load_built(args.build_dir)
    scenes = {scene.manifest.scene_id: scene}
    queries = load_fixtures(args.queries)
    endpoint = _endpoint_from_args(args)
    report = run_benchmark(queries, _bench_runner(scenes, endpoint), scenes, args.fingerprint)
    print(report.to_text())
    if args.out:
        Path(args.out).write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
        print(f"wrote {args.out}")
    return 0


def cmd_ablate(args) -> int:
    bundle = load_scene(args.manifest)
    truth_path = Path(args.manifest).parent / "truth.json"
    if not truth_path.exists():
        print("ablate needs the fixture's truth.json next to the manifest", file=sys.stderr)
        return 2
    truth = fixtures_mod.FixtureTruth.load(truth_path)
    base = _config_from_args(args)

    rows = []
    with MockLLM() as mock:
        endpoint = EndpointConfig(url=mock.url)
        for name, label in ABLATIONS.items():
            config = ablation_config(base, name)
            scene = build(bundle, config, cache_dir=args.cache)
            queries = fixtures_mod.make_queries(scene, truth)
            scenes = {scene.manifest.scene_id: scene}
            report = run_benchmark(
                queries, _bench_runner(scenes, endpoint), scenes, config.fingerprint()
            )
            stats = report.category_stats()
            rows.append((label, stats, report.parse_failures))

    name_w = max(len(r[0]) for r in rows)
    cats = [
        ("spatial", "Spatial (px)"),
        ("temporal_pit", "PIT (steps)"),
        ("temporal_interval", "Interval (IoU)"),
        ("directional", "Direction (L1)"),
    ]
    header = "Configuration".ljust(name_w) + "".join(f"  {label:>18s}" for _, label in cats)
    print(header)
    print("-" * len(header))
    for label, stats, failures in rows:
        cells = []
        for key, _ in cats:
            s = stats.get(key)
            cell = f"{s['mean']:9.3f} +- {s['std']:5.3f}" if s else "-".rjust(18)
            cells.append("  " + cell)
        suffix = f"  [{failures} parse failures]" if failures else ""
        print(label.ljust(name_w) + "".join(cells) + suffix)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="scene4d", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a scene bundle against its declared shapes")
    p.add_argument("manifest")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("fixture", help="render a synthetic scene with ground truth")
    p.add_argument("preset", choices=fixtures_mod.PRESETS)
    p.add_argument("--out", default=None)
    p.add_argument("--emit-frames", action="store_true")
    p.add_argument("--multi-seed", action="store_true")
    p.add_argument("--queries", action="store_true", help="also write benchmark queries")
    p.set_defaults(fn=cmd_fixture)

    p = sub.add_parser("build", help="lift, densify, merge, and persist a scene")
    p.add_argument("manifest")
    p.add_argument("--out", required=True)
    p.add_argument("--cache", default=None)
    _add_config_args(p)
    p.set_defaults(fn=cmd_build)

    p = sub.add_parser("lift", help="lift tracks only and print control cloud stats")
    p.add_argument("manifest")
    _add_config_args(p)
    p.set_defaults(fn=cmd_lift)

    p = sub.add_parser("ply", help="export the dense cloud at one timestep")
    p.add_argument("manifest")
    p.add_argument("--out", required=True)
    p.add_argument("--t", type=int, default=None)
    p.add_argument("--binary", action="store_true")
    _add_config_args(p)
    p.set_defaults(fn=cmd_ply)

    p = sub.add_parser("serve", help="expose built scenes over HTTP")
    p.add_argument("build_dir", nargs="+")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8090)
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("mock-llm", help="deterministic scripted chat endpoint")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8091)
    p.add_argument("--prose", action="store_true", help="answer free text with no parseable value")
    p.set_defaults(fn=cmd_mock_llm)

    p = sub.add_parser("ask", help="run one agent session against an endpoint")
    p.add_argument("build_dir")
    p.add_argument("query")
    p.add_argument(
        "--type",
        required=True,
        choices=["spatial", "temporal_pit", "temporal_interval", "directional"],
    )
    p.add_argument("--endpoint", required=True)
    p.add_argument("--model", default="scene4d-agent")
    p.add_argument("--api-key", default=None)
    p.add_argument("--step-budget", type=int, default=20)
    p.add_argument("--no-frames", action="store_true")
    p.add_argument("--transcript", action="store_true")
    p.set_defaults(fn=cmd_ask)

    p = sub.add_parser("bench", help="score stored queries against an endpoint")
    p.add_argument("build_dir")
    p.add_argument("--queries", required=True)
    p.add_argument("--endpoint", required=True)
    p.add_argument("--model", default="scene4d-agent")
    p.add_argument("--api-key", default=None)
    p.add_argument("--step-budget", type=int, default=20)
    p.add_argument("--fingerprint", default="")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("ablate", help="compare toggle configurations on one fixture")
    p.add_argument("manifest")
    p.add_argument("--cache", default=None)
    _add_config_args(p)
    p.set_defaults(fn=cmd_ablate)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except Scene4DError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
