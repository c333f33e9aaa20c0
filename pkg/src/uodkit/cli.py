"""Command-line client for the discovery service.

Every subcommand does local file handling only and delegates compute to the
HTTP service: a remote one when --server is given, otherwise an in-process
instance of the same app. Exit codes: 0 success, 1 usage error, 2 data or
format error, 3 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import asyncio
import base64
import sys
import threading
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable

import httpx

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_CONVERGENCE = 3

_KIND_TO_EXIT = {"format": EXIT_DATA, "data": EXIT_DATA, "convergence": EXIT_CONVERGENCE}


class CliError(Exception):
    def __init__(self, message: str, exit_code: int):
        super().__init__(message)
        self.exit_code = exit_code


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse defaults to exit code 2
        raise CliError(f"{self.prog}: {message}", EXIT_USAGE)


class ServiceClient:
    """Thin HTTP wrapper; talks to --server or to the app in-process via ASGI."""

    def __init__(self, server: str | None):
        self._server = server
        self._app = None
        self._local = threading.local()

    def _post(self, path: str, payload: dict) -> httpx.Response:
        if self._server:
            client = getattr(self._local, "client", None)
            if client is None:
                client = httpx.Client(base_url=self._server, timeout=None)
                self._local.client = client
            return client.post(path, json=payload)
        if self._app is None:
            from .service import create_app

            self._app = create_app()

        async def _go() -> httpx.Response:
            transport = httpx.ASGITransport(app=self._app)
            async with httpx.AsyncClient(
                transport=transport, base_url="http://uodkit", timeout=None
            ) as client:
                return await client.post(path, json=payload)

        return asyncio.run(_go())

    def post(self, path: str, payload: dict) -> dict:
        try:
            response = self._post(path, payload)
        except httpx.HTTPError as err:
            raise CliError(f"cannot reach service: {err}", EXIT_USAGE)
        if response.status_code == 200:
            return response.json()
        detail = None
        try:
            detail = response.json().get("detail")
        except ValueError:
            pass
        if isinstance(detail, dict) and "kind" in detail:
            kind = detail["kind"]
            raise CliError(detail.get("message", kind), _KIND_TO_EXIT.get(kind, EXIT_DATA))
        raise CliError(f"service rejected the request: {detail}", EXIT_USAGE)


def _b64(blob: bytes) -> str:
    return base64.b64encode(blob).decode("ascii")


def _read_file(path: Path) -> bytes:
    try:
        return path.read_bytes()
    except OSError as err:
        raise CliError(f"cannot read {path}: {err.strerror}", EXIT_DATA)


def _listing(path: Path, suffix: str) -> list[Path]:
    if path.is_dir():
        files = sorted(path.glob(f"*{suffix}"), key=lambda p: p.stem)
        if not files:
            raise CliError(f"no {suffix} files found in {path}", EXIT_DATA)
        return files
    if path.is_file():
        return [path]
    raise CliError(f"input path does not exist: {path}", EXIT_DATA)


def _ensure_dir(path: Path) -> Path:
    path.mkdir(parents=True, exist_ok=True)
    return path


def _map_jobs(fn: Callable, items: list, jobs: int) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _discovery_options(args) -> dict:
    return {
        "threshold": args.threshold,
        "eig_index": args.eig_index,
        "sign_rule": args.sign_rule,
        "threshold_mode": args.threshold_mode,
        "lambda1": getattr(args, "lambda1", 0.5),
        "lambda2": getattr(args, "lambda2", 1.5),
        "chunk_frames": getattr(args, "chunk", 20),
    }


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_discover(args, client: ServiceClient) -> int:
    files = _listing(Path(args.features), ".fmp1")
    mask_dir = _ensure_dir(Path(args.out_mask))
    heat_dir = _ensure_dir(Path(args.out_heatmap)) if args.out_heatmap else None
    options = _discovery_options(args)

    def work(path: Path) -> dict:
        return client.post(
            "/discover", {"features_b64": _b64(_read_file(path)), "options": options}
        )

    results = _map_jobs(work, files, args.jobs)
    for path, result in zip(files, results):
        (mask_dir / f"{path.stem}.pgm").write_bytes(base64.b64decode(result["mask_b64"]))
        if heat_dir is not None:
            (heat_dir / f"{path.stem}.pgm").write_bytes(base64.b64decode(result["heatmap_b64"]))
    print(f"discover: wrote {len(files)} mask(s) to {mask_dir}")
    return EXIT_OK


def cmd_bbox(args, client: ServiceClient) -> int:
    files = _listing(Path(args.masks), ".pgm")

    def work(path: Path) -> dict:
        return client.post(
            "/boxes",
            {
                "mask_b64": _b64(_read_file(path)),
                "min_area_frac": args.min_area_frac,
                "dedup_iou": args.dedup_iou,
            },
        )

    results = _map_jobs(work, files, args.jobs)
    lines = []
    for path, result in zip(files, results):
        rendered = ";".join(",".join(str(v) for v in box) for box in result["boxes"])
        lines.append(f"{path.stem} {rendered}" if rendered else path.stem)
    out = Path(args.out)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("\n".join(lines) + "\n", encoding="ascii")
    print(f"bbox: wrote {len(lines)} record(s) to {out}")
    return EXIT_OK


def cmd_eval(args, client: ServiceClient) -> int:
    pred_dir = Path(args.pred)
    gt_dir = Path(args.gt)
    pred_stems = {p.stem for p in pred_dir.glob("*.pgm")} if pred_dir.is_dir() else set()
    gt_stems = {p.stem for p in gt_dir.glob("*.pgm")} if gt_dir.is_dir() else set()
    if not pred_dir.is_dir() or not gt_dir.is_dir():
        raise CliError(f"--pred and --gt must be directories: {pred_dir}, {gt_dir}", EXIT_DATA)
    missing_gt = sorted(pred_stems - gt_stems)
    missing_pred = sorted(gt_stems - pred_stems)
    if missing_gt or missing_pred:
        parts = []
        if missing_gt:
            parts.append(f"missing ground truth for: {', '.join(missing_gt)}")
        if missing_pred:
            parts.append(f"missing predictions for: {', '.join(missing_pred)}")
        raise CliError("; ".join(parts), EXIT_DATA)
    if not pred_stems:
        raise CliError(f"no .pgm files to evaluate in {pred_dir}", EXIT_DATA)

    items = [
        {
            "stem": stem,
            "pred_b64": _b64(_read_file(pred_dir / f"{stem}.pgm")),
            "gt_b64": _b64(_read_file(gt_dir / f"{stem}.pgm")),
        }
        for stem in sorted(pred_stems)
    ]
    result = client.post(
        "/evaluate", {"items": items, "beta_sq": args.beta_sq, "threshold": args.threshold}
    )
    if args.out:
        Path(args.out).write_text(result["report_text"], encoding="ascii")
        print(f"eval: wrote report to {args.out}")
    else:
        sys.stdout.write(result["report_text"])
    return EXIT_OK


def cmd_video(args, client: ServiceClient) -> int:
    rgb_files = _listing(Path(args.rgb), ".fmp1")
    flow_files = _listing(Path(args.flow), ".fmp1")
    if len(rgb_files) != len(flow_files):
        raise CliError(
            f"frame count mismatch: {len(rgb_files)} rgb vs {len(flow_files)} flow", EXIT_DATA
        )
    out_dir = _ensure_dir(Path(args.out))
    payload = {
        "rgb_b64": [_b64(_read_file(p)) for p in rgb_files],
        "flow_b64": [_b64(_read_file(p)) for p in flow_files],
        "options": _discovery_options(args),
    }
    result = client.post("/video", payload)
    for path, mask_b64 in zip(rgb_files, result["masks_b64"]):
        (out_dir / f"{path.stem}.pgm").write_bytes(base64.b64decode(mask_b64))
    print(f"video: wrote {len(rgb_files)} mask(s) to {out_dir}")
    return EXIT_OK


def cmd_train_toy(args, client: ServiceClient) -> int:
    result = client.post(
        "/train",
        {
            "epochs": args.epochs,
            "batch": args.batch,
            "lr": args.lr,
            "seed": args.seed,
            "n_scenes": args.scenes,
            "tau": args.tau,
            "alpha": args.alpha,
            "beta": args.beta,
            "eval_scenes": args.eval_scenes,
        },
    )
    ckpt = Path(args.out_ckpt)
    if ckpt.parent != Path(""):
        ckpt.parent.mkdir(parents=True, exist_ok=True)
    ckpt.write_bytes(base64.b64decode(result["checkpoint_b64"]))
    trace = result["trace"]
    lines = [f"epoch {i}: {value:.6f}" for i, value in enumerate(trace)]
    lines.append(f"baseline_iou: {result['baseline_iou']:.4f}")
    lines.append(f"trained_iou: {result['trained_iou']:.4f}")
    report = "\n".join(lines) + "\n"
    if args.report:
        Path(args.report).write_text(report, encoding="ascii")
    print(
        f"train-toy: checkpoint written to {ckpt}; "
        f"baseline IoU {result['baseline_iou']:.4f}, trained IoU {result['trained_iou']:.4f}"
    )
    return EXIT_OK


def cmd_selfcheck(args, client: ServiceClient) -> int:
    result = client.post("/selfcheck", {})
    for suite in result["suites"]:
        status = "PASS" if suite["passed"] else "FAIL"
        print(f"{suite['name']}: {status} ({suite['detail']})")
    return EXIT_OK if result["ok"] else EXIT_DATA


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="uodkit", description=__doc__)
    parser.add_argument("--server", help="base URL of a running service (default: in-process)")
    parser.add_argument("--jobs", type=int, default=1, help="parallel workers for per-file requests")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_discovery_flags(p):
        p.add_argument("--threshold", type=float, default=0.5)
        p.add_argument("--eig-index", dest="eig_index", type=int, default=1)
        p.add_argument("--sign-rule", dest="sign_rule",
                       choices=["border-negative", "none"], default="border-negative")
        p.add_argument("--threshold-mode", dest="threshold_mode",
                       choices=["minmax", "median"], default="minmax")

    p = sub.add_parser("discover", help="feature maps -> masks and heatmaps")
    p.add_argument("--features", required=True, help="FMP1 file or directory")
    p.add_argument("--out-mask", dest="out_mask", required=True)
    p.add_argument("--out-heatmap", dest="out_heatmap")
    add_discovery_flags(p)
    p.set_defaults(handler=cmd_discover)

    p = sub.add_parser("bbox", help="masks -> bounding box records")
    p.add_argument("--masks", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--min-area-frac", dest="min_area_frac", type=float, default=0.0025)
    p.add_argument("--dedup-iou", dest="dedup_iou", type=float, default=0.7)
    p.set_defaults(handler=cmd_bbox)

    p = sub.add_parser("eval", help="score predicted heatmaps against ground-truth masks")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--beta-sq", dest="beta_sq", type=float, default=0.3)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--out")
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("video", help="chunked appearance+motion discovery over frames")
    p.add_argument("--rgb", required=True)
    p.add_argument("--flow", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--lambda1", type=float, default=0.5)
    p.add_argument("--lambda2", type=float, default=1.5)
    p.add_argument("--chunk", type=int, default=20)
    add_discovery_flags(p)
    p.set_defaults(handler=cmd_video)

    p = sub.add_parser("train-toy", help="train the toy encoder on synthetic scenes")
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch", type=int, default=16)
    p.add_argument("--lr", type=float, default=7.5e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scenes", type=int, default=512)
    p.add_argument("--tau", type=float, default=0.1)
    p.add_argument("--alpha", type=float, default=5.0)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--eval-scenes", dest="eval_scenes", type=int, default=64)
    p.add_argument("--out-ckpt", dest="out_ckpt", required=True)
    p.add_argument("--report")
    p.set_defaults(handler=cmd_train_toy)

    p = sub.add_parser("selfcheck", help="run the built-in oracle suites")
    p.set_defaults(handler=cmd_selfcheck)

    return parser


def run(argv: list[str]) -> int:
    """Parse arguments and execute; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        client = ServiceClient(args.server)
        return args.handler(args, client)
    except CliError as err:
        print(str(err), file=sys.stderr)
        return err.exit_code


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
