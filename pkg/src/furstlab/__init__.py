"""furstlab: a numerical laboratory for random matrix products.

Computes Lyapunov spectra and Oseledets splittings of finitely supported
matrix ensembles, samples the stationary measure on projective space, and
estimates the dimension and conditional-entropy quantities that govern it.
"""

from .ensemble import EnsembleSpec, diagnose, load_spec, shannon_entropy
from .cocycle import (LyapunovSpectrum, OseledetsFrame, TwoSidedWord,
                      forward_product, lyapunov_spectrum, oseledets_splitting,
                      sample_word)
from .projective import ProjectivePoint, Subspace, proj_distance, wedge_norm

__version__ = "0.1.0"

__all__ = [
    "EnsembleSpec", "LyapunovSpectrum", "OseledetsFrame", "ProjectivePoint",
    "Subspace", "TwoSidedWord", "diagnose", "forward_product", "load_spec",
    "lyapunov_spectrum", "oseledets_splitting", "proj_distance",
    "sample_word", "shannon_entropy", "wedge_norm",
]
