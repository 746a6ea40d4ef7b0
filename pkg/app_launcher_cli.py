#!/usr/bin/env python3
"""
GridGenius - Stability-Constrained Feedback Optimization Toolkit
Launcher for source checkouts; forwards all arguments to the CLI.
"""

import sys
from pathlib import Path

# Add project root to path for imports
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

try:
    from gridgenius.cli.main_cli import main as gridgenius_main
except ImportError as e:
    print(f"Import error: {e}")
    print("Install the dependencies first: pip install -r requirements.txt")
    sys.exit(1)


def main() -> int:
    """Entry point for the GridGenius launcher."""
    return gridgenius_main(sys.argv[1:])


if __name__ == '__main__':
    sys.exit(main())
