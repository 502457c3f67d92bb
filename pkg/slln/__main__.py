"""``python -m slln``: the same command line as the ``slln`` console script."""

from .cli import main

if __name__ == "__main__":
    main(prog_name="slln")
