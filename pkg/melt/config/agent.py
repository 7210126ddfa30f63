import pathlib as pt

import pydantic_settings


class AgentSetting(pydantic_settings.BaseSettings):
    host: str = "127.0.0.1"
    port: int = 8766
    storage_dir: pt.Path = pt.Path(".melt/agent")
    seed: int = 0

    def to_uvicorn_config(self) -> dict:
        # See uvicorn.config.Config.__init__ keyword arguments for more details
        return {"host": self.host, "port": self.port, "log_level": "warning"}
