"""``python -m src``: the same entry point as the ``graph-kalman`` console script."""

from .main import cli

if __name__ == "__main__":
    raise SystemExit(cli())
