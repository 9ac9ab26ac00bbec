#!/usr/bin/env python3
"""Script to run a batch experiment from a spec file."""

import sys
from pathlib import Path

# Add src to path (script is in scripts/runners/)
PROJECT_ROOT = Path(__file__).parent.parent.parent
sys.path.insert(0, str(PROJECT_ROOT / 'src'))

from crowdnav.cli import main


if __name__ == '__main__':
    main(['run', *sys.argv[1:]])
