"""Run the sidecar: ``python -m meshseg_sidecar [--host H] [--port P]``.

The port defaults to $MESHSEG_SIDECAR_PORT or 8731.  Stub mode is the
default; set MESHSEG_SIDECAR_ADAPTER to serve real models.
"""
import argparse
import os
import sys

from .adapters import load_adapter_from_env
from .service import DEFAULT_PORT, PORT_ENV_VAR, make_server


def main(argv=None):
    parser = argparse.ArgumentParser(prog="meshseg-sidecar", description=__doc__)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int,
                        default=int(os.environ.get(PORT_ENV_VAR, DEFAULT_PORT)))
    args = parser.parse_args(argv)
    adapter = load_adapter_from_env()
    server = make_server(args.host, args.port, adapter)
    mode = "stub" if adapter is None else "real-model"
    print(f"meshseg sidecar ({mode}) listening on http://{args.host}:{args.port}",
          flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
    return 0


if __name__ == "__main__":
    sys.exit(main())
