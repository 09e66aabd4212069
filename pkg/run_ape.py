#!/usr/bin/env python3
"""
Transference APE command line.

Usage:
    python run_ape.py gen-data --out-dir data/synth
    python run_ape.py learn-bpe --corpus data/synth/train --out data/bpe.txt
    python run_ape.py train --config desk.cfg --train data/synth/train --dev data/synth/dev \
        --bpe data/bpe.txt --out outputs/checkpoints/generic
"""

import sys
from pathlib import Path

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent))

from src.cli import main

if __name__ == "__main__":
    sys.exit(main())
