#!/usr/bin/env python3
"""
Development setup script for the slln toolkit.
"""

import os
import subprocess
import sys


def run_command(cmd, description):
    """Run a command and print status."""
    print(f">>> {description}")
    result = subprocess.run(cmd, shell=True)
    if result.returncode != 0:
        print(f"ERROR: {description} failed!")
        sys.exit(1)
    print()


def main():
    """Set up development environment."""
    print("=== slln Development Setup ===\n")

    # Install package in development mode
    run_command("pip install -e .", "Installing package in development mode")

    # Install development dependencies
    run_command("pip install -r requirements-dev.txt", "Installing development dependencies")

    # Create the default artifact directory
    out_dir = os.environ.get("SLLN_OUTPUT_DIR", os.path.join(os.getcwd(), "slln-out"))
    os.makedirs(out_dir, exist_ok=True)
    print(f">>> Created output directory: {out_dir}\n")

    print("=== Setup Complete! ===")
    print("\nQuick start:")
    print("1. List fixtures:   slln fixtures")
    print("2. Exact bounds:    slln expect fixture=moving-average n=3")
    print("3. Maximal ineq.:   slln inequalities family=exhaustive-small")
    print("4. Divergence run:  slln divergence fixture=heavy-tail --seed 42")
    print("\nRun tests: python -m pytest -m 'not slow'")
    print("View help: slln --help")


if __name__ == "__main__":
    main()
