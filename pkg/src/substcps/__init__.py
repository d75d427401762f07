"""Cut-and-project structure of one-dimensional Pisot substitution tilings.

From a substitution rule the package derives the exact control points of its
fixed-point tiling, the return module, the cut-and-project scheme given by the
Galois conjugates of the expansion factor, a finite-radius search for
algebraic coincidence, and the windows as attractors of the dual IFS.
"""

__version__ = "0.1.0"

from .errors import SubstCPSError  # noqa: E402
from .pipeline import PipelineOptions, Verdict, VerdictKind, VerdictReport, run_pipeline  # noqa: E402
from .substitution import build_system, load_spec, parse_spec  # noqa: E402

__all__ = [
    "SubstCPSError",
    "PipelineOptions",
    "Verdict",
    "VerdictKind",
    "VerdictReport",
    "run_pipeline",
    "build_system",
    "load_spec",
    "parse_spec",
]
