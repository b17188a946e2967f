import os
import sys

# Let test modules share plain helpers (helpers.py) without packaging tests/.
sys.path.insert(0, os.path.dirname(__file__))
