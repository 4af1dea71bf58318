"""Bridge command line."""

from __future__ import annotations

import argparse
import sys

from midialign_bridge.config import BridgeConfig
from midialign_bridge.server import serve


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="midialign-bridge",
        description="Serve real model adapters over the midialign wire protocol")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("serve", help="start the bridge server")
    run.add_argument("--stdio", action="store_true", help="serve on stdin/stdout")
    run.add_argument("--port", type=int, help="serve HTTP on this port")
    run.add_argument("--generator", default="stub",
                     help='"stub" or module.path:factory')
    run.add_argument("--mutator", default="stub",
                     help='"stub", "llm:<endpoint>", or module.path:factory')
    run.add_argument("--scorer", default="stub",
                     help='"stub", "clap:<model-id>", or module.path:factory')
    run.add_argument("--device", default="cpu")
    run.add_argument("--sample-rate", type=int, default=22050)
    run.add_argument("--soundfont", default=None)
    run.add_argument("--llm-model", default="")
    run.add_argument("--api-key-env", default="MIDIALIGN_BRIDGE_API_KEY",
                     help="environment variable holding the mutator API key")
    run.add_argument("--concurrent", action="store_true",
                     help="advertise concurrent request support in the handshake")
    args = parser.parse_args(argv)

    if not args.stdio and args.port is None:
        run.error("pick --stdio or --port")
    config = BridgeConfig(
        generator=args.generator,
        mutator=args.mutator,
        scorer=args.scorer,
        device=args.device,
        sample_rate=args.sample_rate,
        soundfont=args.soundfont,
        llm_model=args.llm_model,
        api_key_env=args.api_key_env,
        transport="stdio" if args.stdio else "http",
        port=args.port or 8400,
        concurrent=args.concurrent,
    )
    return serve(config)


if __name__ == "__main__":
    sys.exit(main())
