"""FastAPI service wrapping the core package."""

from fastapi import FastAPI

from .routes import router


def create_app() -> FastAPI:
    app = FastAPI(
        title="geoprog",
        description="Execute, verify, select, augment and score "
                    "plane-geometry solution programs.",
    )
    app.include_router(router)
    return app


__all__ = ["create_app"]
