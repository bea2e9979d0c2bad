"""HTTP surface.

POST /embed  {"texts": [...]}  ->  {"model_id", "dim", "sequences": [
    {"tokens": [{"text", "start", "end", "vector"}], "truncated": bool}]}
GET  /health  ->  {"model_id", "dim", "layer": "second_to_last"}  (503 until
the encoder has loaded)

Bad requests (empty batch, batch over the cap, text over the character
limit, malformed bodies) return 400; encoder failures return 500.
Configuration comes from EMBED_* environment variables.
"""

from __future__ import annotations

from contextlib import asynccontextmanager

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .encoder import LAYER_NAME, EncoderConfig, HiddenStateEncoder


class EmbedRequest(BaseModel):
    texts: list[str]


def create_app(config: EncoderConfig | None = None) -> FastAPI:
    config = config or EncoderConfig.from_env()

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        app.state.encoder = HiddenStateEncoder(config)
        yield
        app.state.encoder = None

    app = FastAPI(title="embedding-service", lifespan=lifespan)

    @app.exception_handler(RequestValidationError)
    async def bad_request(_request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    def encoder_or_none(request: Request) -> HiddenStateEncoder | None:
        return getattr(request.app.state, "encoder", None)

    @app.get("/health")
    async def health(request: Request):
        encoder = encoder_or_none(request)
        if encoder is None:
            return JSONResponse(status_code=503, content={"detail": "model not loaded"})
        return {"model_id": encoder.model_id, "dim": encoder.dim, "layer": LAYER_NAME}

    @app.post("/embed")
    async def embed(request: Request, body: EmbedRequest):
        encoder = encoder_or_none(request)
        if encoder is None:
            return JSONResponse(status_code=503, content={"detail": "model not loaded"})
        if not body.texts:
            return JSONResponse(status_code=400, content={"detail": "texts must be non-empty"})
        if len(body.texts) > config.batch_cap:
            return JSONResponse(
                status_code=400,
                content={"detail": f"batch of {len(body.texts)} exceeds cap {config.batch_cap}"},
            )
        oversized = [i for i, t in enumerate(body.texts) if len(t) > config.max_chars]
        if oversized:
            return JSONResponse(
                status_code=400,
                content={"detail": f"texts {oversized} exceed {config.max_chars} characters"},
            )
        sequences = encoder.encode(body.texts)
        return {
            "model_id": encoder.model_id,
            "dim": encoder.dim,
            "sequences": [
                {
                    "tokens": [
                        {"text": t.text, "start": t.start, "end": t.end, "vector": t.vector}
                        for t in seq.tokens
                    ],
                    "truncated": seq.truncated,
                }
                for seq in sequences
            ],
        }

    return app


def serve() -> None:
    import uvicorn

    config = EncoderConfig.from_env()
    uvicorn.run(create_app(config), host="0.0.0.0", port=config.port)


app = create_app()
