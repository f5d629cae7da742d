import pathlib
import sys

# Source-tree import path; a pip-installed fedsim takes precedence anyway.
sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[2] / "python"))
