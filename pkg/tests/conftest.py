import sys
from pathlib import Path

# allow cross-imports between test modules (shared brute-force oracles)
sys.path.insert(0, str(Path(__file__).parent))
