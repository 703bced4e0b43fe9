"""Path-integral closure of non-equilibrium Hamiltonian dynamics on a trial-density manifold."""

import json
import pathlib

_MANIFEST = pathlib.Path(__file__).with_name("manifest.json")

__version__ = json.loads(_MANIFEST.read_text(encoding="utf-8"))["version"]
