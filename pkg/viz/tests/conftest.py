import os
import sys

# the renderer is a single top-level module; make it importable when the
# viz package is not pip-installed
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
