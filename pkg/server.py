from contextlib import asynccontextmanager

import uvicorn
from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from app.core.config import get_settings
from app.dependencies import close_global_store

settings = get_settings()


@asynccontextmanager
async def lifespan(app: FastAPI):
    """Lifespan events (startup/shutdown)"""
    yield
    close_global_store()


app = FastAPI(
    title="Bryant4",
    description="Marginally trapped surfaces of Bryant type in Minkowski 4-space",
    version=settings.version,
    lifespan=lifespan,
)

# CORS
app.add_middleware(
    CORSMiddleware,
    allow_origins=settings.cors_origins,
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


# Routers
def include_routers(app: FastAPI):
    from app.api.routes import classify, jobs, system

    app.include_router(jobs.router, prefix="/jobs", tags=["jobs"])
    app.include_router(classify.router, prefix="/classify", tags=["classify"])
    app.include_router(system.router, prefix="/system", tags=["system"])


include_routers(app)


def start_server(host: str | None = None, port: int | None = None):
    """Run FastAPI with Uvicorn"""
    uvicorn.run(app, host=host or settings.api_host, port=port or settings.api_port)


if __name__ == "__main__":
    start_server()
