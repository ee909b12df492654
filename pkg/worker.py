#!/usr/bin/env python3
"""RQ worker for ddforge per-environment jobs.

Usage:
    python worker.py --redis-url redis://localhost:6379/0            # Start single worker
    python worker.py --redis-url redis://localhost:6379/0 --burst    # Process jobs and exit
    python worker.py --config run.json --name worker-1               # Redis URL from a config file

The Redis URL comes from ``--redis-url`` or ``redis_url`` in the JSON config;
environment variables are not consulted.
"""

import argparse
import logging
import sys
from pathlib import Path

# Add project root to Python path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

logger = logging.getLogger("ddforge.worker")


def main() -> int:
    """Start the RQ worker."""
    try:
        import redis
        from rq import Worker
    except ImportError:
        logging.basicConfig(level=logging.INFO)
        logger.error("Redis and RQ are required. Install with: pip install redis rq")
        return 1

    from ddforge.cli import LOG_FORMAT
    from ddforge.config import load_settings
    from ddforge.monitoring import init_sentry
    from ddforge.queue import QUEUE_NAME
    from ddforge.utils.errors import DdforgeError, format_error_line

    parser = argparse.ArgumentParser(description="ddforge RQ worker")
    parser.add_argument("--config", help="JSON settings file")
    parser.add_argument("--redis-url", dest="redis_url")
    parser.add_argument("--log-level", dest="log_level")
    parser.add_argument("--burst", action="store_true", help="Run in burst mode (process jobs and exit)")
    parser.add_argument("--name", type=str, default=None, help="Worker name for monitoring")
    parser.add_argument("--queue", type=str, default=QUEUE_NAME, help=f"Queue name (default: {QUEUE_NAME})")
    args = parser.parse_args()

    try:
        settings = load_settings(args.config, redis_url=args.redis_url, log_level=args.log_level)
    except DdforgeError as exc:
        sys.stderr.write(format_error_line(exc) + "\n")
        return exc.exit_code

    logging.basicConfig(level=getattr(logging, settings.log_level), format=LOG_FORMAT)
    init_sentry(settings.sentry_dsn, environment="worker")
    if not settings.redis_url:
        logger.error("No Redis URL configured; pass --redis-url or set redis_url in the config")
        return 2

    try:
        redis_conn = redis.from_url(settings.redis_url, socket_connect_timeout=5, socket_timeout=30)
        redis_conn.ping()
        logger.info("Connected to Redis at %s", settings.redis_url.split("@")[-1])
    except Exception as exc:
        logger.error("Failed to connect to Redis: %s", exc)
        return 1

    # Job functions are resolved by import path; load them once up front
    import ddforge.tasks  # noqa: F401

    worker = Worker([args.queue], connection=redis_conn, name=args.name)
    logger.info("Starting RQ worker %s on queue %s%s", worker.name, args.queue, " (burst mode)" if args.burst else "")
    try:
        worker.work(burst=args.burst, with_scheduler=False)
    except KeyboardInterrupt:
        logger.info("Shutting down worker...")
    return 0


if __name__ == "__main__":
    sys.exit(main())
