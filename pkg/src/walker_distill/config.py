import logging

from pydantic_settings import BaseSettings

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


class Settings(BaseSettings):
    """Process-wide settings loaded from environment variables.

    Experiment semantics live in the YAML run config (see ``schemas.RunConfig``);
    these only decide where things go and how much hardware to use.
    """

    log_level: str = "INFO"
    output_root: str = "./data/runs"
    workers: int = 2  # concurrent pipeline stages in the matrix runner

    # Job service
    host: str = "0.0.0.0"
    port: int = 4210
    # polled endpoints kept out of the access log; a prefix also covers its sub-paths
    quiet_paths: list[str] = ["/health", "/progress", "/matrix/status"]

    class Config:
        env_prefix = "WALKER_DISTILL_"
        env_file = ".env"
        env_file_encoding = "utf-8"


settings = Settings()


class PollingAccessFilter(logging.Filter):
    """Drops uvicorn access records whose request path is a polled status endpoint."""

    def __init__(self, paths: list[str]):
        super().__init__()
        self.paths = tuple(p.rstrip("/") for p in paths)

    def is_quiet(self, path: str) -> bool:
        path = path.split("?", 1)[0].rstrip("/")
        return any(path == p or path.startswith(p + "/") for p in self.paths)

    def filter(self, record: logging.LogRecord) -> bool:
        # uvicorn.access args: (client, method, path, http_version, status)
        args = record.args
        if isinstance(args, tuple) and len(args) >= 3 and isinstance(args[2], str):
            return not self.is_quiet(args[2])
        return True


def configure_logging(level: str | None = None) -> None:
    logging.basicConfig(
        level=getattr(logging, (level or settings.log_level).upper()),
        format=LOG_FORMAT,
    )
    access = logging.getLogger("uvicorn.access")
    if not any(isinstance(f, PollingAccessFilter) for f in access.filters):
        access.addFilter(PollingAccessFilter(settings.quiet_paths))
