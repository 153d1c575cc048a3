#!/usr/bin/env python3
"""
Class-Fourier GNN - experiment harness

Usage:
    python main.py generate --seed 7 --out runs/synthetic
    python main.py train --config experiment.json
    python main.py sweep-ir --config experiment.json --ratios 0.1,0.5,0.9
"""

from src.cli.app import main


if __name__ == "__main__":
    main()
