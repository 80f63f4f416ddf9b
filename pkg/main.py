"""Main entry point for the hitting-time toolkit."""

import sys

from dotenv import load_dotenv

# Load environment variables
load_dotenv()

from pydantic import ValidationError  # noqa: E402

from cli.dispatcher import main  # noqa: E402
from models.schemas import SystemConfig  # noqa: E402


def validate_startup() -> None:
    """Validate the environment settings before dispatching."""
    try:
        SystemConfig.from_env()
    except (ValidationError, ValueError) as e:
        print(f"ERROR: invalid environment configuration: {e}", file=sys.stderr)
        print("Check HITTIME_WORKERS, HITTIME_BATCH_SIZE and LOG_LEVEL in your .env file.", file=sys.stderr)
        sys.exit(2)


if __name__ == "__main__":
    validate_startup()
    sys.exit(main(sys.argv[1:]))
