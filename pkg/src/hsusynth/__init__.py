"""Program synthesis over statement-level syntax trees with hierarchical
sequential gated units."""
from pathlib import Path

BUNDLED_CORPUS = Path(__file__).parent / "corpus"

__version__ = "0.1.0"
