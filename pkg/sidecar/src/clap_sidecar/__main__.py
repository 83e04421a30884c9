"""Run the sidecar: python -m clap_sidecar (port via CLAP_SIDECAR_PORT)."""
import os

import uvicorn

from .app import app_from_env


def main() -> None:
    uvicorn.run(
        app_from_env(),
        host=os.environ.get("CLAP_SIDECAR_HOST", "127.0.0.1"),
        port=int(os.environ.get("CLAP_SIDECAR_PORT", "8641")),
        log_level="info",
    )


if __name__ == "__main__":
    main()
