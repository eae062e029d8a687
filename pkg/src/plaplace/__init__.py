"""Numerical companion for intermediate Schouten curvature and p-Laplace potential theory.

Submodules:

- ``spectra``: A^(p) and Bochner cones on Schouten spectra.
- ``measures``: Radon measures with exact ball-mass cumulatives.
- ``wolff``: certified Wolff potential quadrature and bounds.
- ``capacity``: p-capacity of condensers by energy minimization.
- ``thinness``: dyadic thinness series and escape-ray search.
- ``conformal``: curvature of conformally flat metrics and p-Laplace identities.
- ``dimension``: box counting, Frostman points and the singular-set experiment.
- ``cli``: command-line front end.
"""

__version__ = "0.1.0"

from plaplace.spectra import (  # noqa: F401
    ConeSpec,
    EigenSpectrum,
    InvalidParameterError,
    ap_functional,
    ap_spectrum,
    bochner_form_eigenvalue,
    cone_membership,
    model_spectrum,
)
