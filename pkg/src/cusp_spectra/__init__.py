"""Essential spectra of warped torus-cusp metrics.

The pipeline: a cusp metric ds^2 + sum_j exp(-2 w_j(s)) (dx^j)^2 reduces,
channel by invariant-form channel, to half-line Schrodinger operators whose
essential spectrum is read off from the classified potential tail, either a
single ray [c, infinity) or the band/gap structure of a periodic potential
computed through Floquet discriminants. A finite-difference truncation
serves as an independent numerical oracle.
"""

__version__ = "0.1.0"

from .errors import (
    CuspSpectraError,
    DomainError,
    NumericalError,
    RefinementError,
    TailClassificationError,
    UnsupportedError,
)
from .profiles import (
    BumpParams,
    PeriodicBump,
    PeriodicFunction,
    PeriodicPotential,
    REFERENCE_PERIOD,
    SmoothCutoff,
)
from .metrics import (
    ConstantSlopeTail,
    CurvatureReport,
    PeriodicSlopeTail,
    TorusCuspMetric,
    VolumeProfile,
    WarpProfile,
    curvature_range,
    envelope_check,
    fiber_curvature,
    gapped_cusp_metric,
    gapped_warp,
    hyperbolic_cusp,
    linear_warp,
    mixed_curvature,
    volume_profile,
)
from .reduction import (
    ConstantTail,
    Dirichlet,
    FormChannel,
    PeriodicTail,
    Robin,
    SchrodingerPotential,
    channels_for_degree,
    function_potential,
    potential_from_log_slope,
    potential_from_volume,
    tail_classify,
)
from .floquet import (
    Band,
    BandStructure,
    Gap,
    MonodromyMatrix,
    band_structure,
    discriminant,
    discriminant_scan,
    essential_spectrum_halfline,
    merge_band_structures,
    monodromy,
    p_form_essential_spectrum,
)
from .oracle import (
    GapAudit,
    Grid,
    TridiagonalOperator,
    discretize_schrodinger,
    discretize_weighted,
    eigenvalues_below,
    gap_audit,
)

__all__ = [name for name in dir() if not name.startswith("_")]
