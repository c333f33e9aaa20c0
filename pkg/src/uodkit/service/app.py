"""HTTP surface over the core package.

All compute runs behind these endpoints; the command-line tool is a thin
client. Domain errors map to HTTP 422 with a structured detail carrying the
error kind (format / data / convergence), which clients translate to exit
codes.
"""

from __future__ import annotations

import base64
import binascii
import io

import numpy as np
from fastapi import FastAPI, HTTPException

from .. import __version__
from ..boxes import generate_boxes
from ..errors import UodError
from ..formats import (
    fmap_from_bytes,
    heatmap_from_bytes,
    mask_from_bytes,
    mask_to_bytes,
)
from ..losses import LossConfig
from ..metrics import EvalOptions, evaluate_pairs, render_report
from ..pca import DiscoveryConfig, discover, video_discover
from ..selfcheck import run_all
from ..toy import TrainConfig, evaluate_toy, gen_synthetic, make_encoder, save_toy_encoder, train_toy
from .schemas import (
    BoxesRequest,
    BoxesResponse,
    DiscoverRequest,
    DiscoverResponse,
    DiscoveryOptions,
    EvalRequest,
    EvalResponse,
    HealthResponse,
    SelfcheckResponse,
    SuiteOutcome,
    TrainRequest,
    TrainResponse,
    VideoRequest,
    VideoResponse,
)


def _decode(payload_b64: str, what: str) -> bytes:
    try:
        return base64.b64decode(payload_b64, validate=True)
    except (binascii.Error, ValueError):
        raise HTTPException(
            status_code=422, detail={"kind": "format", "message": f"invalid base64 in {what}"}
        )


def _domain_error(err: UodError) -> HTTPException:
    return HTTPException(status_code=422, detail={"kind": err.kind, "message": str(err)})


def _discovery_config(options: DiscoveryOptions) -> DiscoveryConfig:
    return DiscoveryConfig(
        eig_index=options.eig_index,
        threshold=options.threshold,
        sign_rule=options.sign_rule,
        threshold_mode=options.threshold_mode,
        video_lambda1=options.lambda1,
        video_lambda2=options.lambda2,
        chunk_frames=options.chunk_frames,
    )


def create_app() -> FastAPI:
    app = FastAPI(title="uodkit", version=__version__)

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/discover", response_model=DiscoverResponse)
    def discover_endpoint(request: DiscoverRequest) -> DiscoverResponse:
        try:
            fmap = fmap_from_bytes(_decode(request.features_b64, "features"))
            result = discover(fmap, _discovery_config(request.options))
        except UodError as err:
            raise _domain_error(err)
        return DiscoverResponse(
            mask_b64=base64.b64encode(mask_to_bytes(result.mask)).decode("ascii"),
            heatmap_b64=base64.b64encode(mask_to_bytes(result.heatmap)).decode("ascii"),
            degenerate=result.degenerate,
        )

    @app.post("/boxes", response_model=BoxesResponse)
    def boxes_endpoint(request: BoxesRequest) -> BoxesResponse:
        try:
            mask = mask_from_bytes(_decode(request.mask_b64, "mask"))
            boxes = generate_boxes(mask, request.min_area_frac, request.dedup_iou)
        except UodError as err:
            raise _domain_error(err)
        return BoxesResponse(boxes=[b.as_tuple() for b in boxes])

    @app.post("/evaluate", response_model=EvalResponse)
    def evaluate_endpoint(request: EvalRequest) -> EvalResponse:
        try:
            items = [
                (
                    item.stem,
                    heatmap_from_bytes(_decode(item.pred_b64, f"prediction {item.stem}")),
                    mask_from_bytes(_decode(item.gt_b64, f"ground truth {item.stem}")),
                )
                for item in request.items
            ]
            report = evaluate_pairs(
                items, EvalOptions(beta_sq=request.beta_sq, threshold=request.threshold)
            )
        except UodError as err:
            raise _domain_error(err)
        return EvalResponse(
            f_beta_max=report.f_beta_max,
            iou=report.iou,
            accuracy=report.accuracy,
            jaccard=report.jaccard,
            corloc=report.corloc,
            n_images=report.n_images,
            report_text=render_report(report),
        )

    @app.post("/video", response_model=VideoResponse)
    def video_endpoint(request: VideoRequest) -> VideoResponse:
        try:
            rgb = [fmap_from_bytes(_decode(b, f"rgb frame {i}")) for i, b in enumerate(request.rgb_b64)]
            flow = [fmap_from_bytes(_decode(b, f"flow frame {i}")) for i, b in enumerate(request.flow_b64)]
            masks = video_discover(rgb, flow, _discovery_config(request.options))
        except UodError as err:
            raise _domain_error(err)
        return VideoResponse(
            masks_b64=[base64.b64encode(mask_to_bytes(m)).decode("ascii") for m in masks]
        )

    @app.post("/train", response_model=TrainResponse)
    def train_endpoint(request: TrainRequest) -> TrainResponse:
        config = TrainConfig(
            batch=request.batch,
            epochs=request.epochs,
            lr=request.lr,
            seed=request.seed,
            n_scenes=request.n_scenes,
            loss=LossConfig(tau=request.tau, alpha=request.alpha, beta=request.beta),
        )
        heldout_seed = int(np.random.SeedSequence([request.seed, 0x48E1D]).generate_state(1)[0])
        try:
            encoder, trace = train_toy(config)
            heldout = gen_synthetic(heldout_seed, request.eval_scenes)
            baseline = evaluate_toy(make_encoder(request.seed), heldout)
            trained = evaluate_toy(encoder, heldout)
        except UodError as err:
            raise _domain_error(err)
        sink = io.BytesIO()
        save_toy_encoder(encoder, sink)
        return TrainResponse(
            checkpoint_b64=base64.b64encode(sink.getvalue()).decode("ascii"),
            trace=trace,
            baseline_iou=baseline,
            trained_iou=trained,
            heldout_seed=heldout_seed,
        )

    @app.post("/selfcheck", response_model=SelfcheckResponse)
    def selfcheck_endpoint() -> SelfcheckResponse:
        results = run_all()
        return SelfcheckResponse(
            suites=[SuiteOutcome(name=r.name, passed=r.passed, detail=r.detail) for r in results],
            ok=all(r.passed for r in results),
        )

    return app


app = create_app()
