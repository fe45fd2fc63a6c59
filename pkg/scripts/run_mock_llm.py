#!/usr/bin/env python3
"""Run the mock LM server standalone for offline development.

Serves echo chat, deterministic embeddings and hash-derived token scores, so
`toxiscope serve` can point a provider at it:

    python scripts/run_mock_llm.py --port 8099

    # provider entry for config/service.yaml
    #   base_url: http://127.0.0.1:8099/v1
"""
import argparse
import time

from toxiscope.mock_llm import MockLmServer


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--port", type=int, default=8099)
    parser.add_argument("--delay", type=float, default=0.0, help="chat latency in seconds")
    args = parser.parse_args()

    server = MockLmServer(
        echo_chat=True,
        default_embeddings=True,
        default_scores=True,
        echo_delay=args.delay,
    ).start(port=args.port)
    print(f"mock LM listening on {server.base_url}")
    try:
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        server.stop()


if __name__ == "__main__":
    main()
