def split_bind(bind: str, default_host: str = "127.0.0.1") -> tuple[str, int]:
    """Split "host:port" (or ":port") into its parts."""
    host, _, port = bind.rpartition(":")
    return host or default_host, int(port)
