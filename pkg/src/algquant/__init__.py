"""Symbolic-numeric toolkit for symplectic Lie algebroids: axiom checking,
induced Poisson structures, Heisenberg-type central extensions, osculating
group fibers, Fock-space operator models, and exact flat-frame star products
cross-validated against Toeplitz compressions."""

__version__ = "0.1.0"

from .rings import (
    Chart,
    CPoly,
    EtaLaurent,
    FormalSeries,
    ParseError,
    PolyFn,
    parse_poly,
    poly_derive,
    series_mul,
)
from .algebroid import (
    AlgebroidPresentation,
    AxiomReport,
    FrameKForm,
    Section,
    bracket_sections,
    ce_differential,
    check_axioms,
)
from .poisson import (
    CentralExtensionPresentation,
    FiberLinearFn,
    NondegeneracyError,
    PoissonBivector,
    SymplecticFormOnFrame,
    central_extension,
    check_symplectic,
    contact_form_check,
    dirac_bracket_on_S,
    induced_poisson,
    linear_poisson_bracket,
    poisson_bracket,
    schouten_jacobi,
)
from .heisenberg import (
    GroupElement,
    HomogeneousSymbol,
    OsculatingFiber,
    bch_multiply,
    dilation,
    fiber_decompose,
    ground_state_symbol,
    group_identity,
    group_inverse,
    zero_symbol,
)
from .fock import (
    CompatibleStructure,
    DegenerateFiberError,
    ExtractionError,
    FockOperator,
    FockSpace,
    QuadratureConvergenceError,
    bargmann_toeplitz,
    berezin_symbol,
    build_representation,
    coherent_vector,
    compatible_J,
    purify_projector,
    quantize_symbol,
    vacuum_projector,
)
from .star import (
    WEIGHT_RATIO,
    FlatFrameConfig,
    FlatFrameError,
    check_associativity,
    oracle_compare,
    standard_frame_config,
    star,
    star_series,
    toeplitz_at_hbar,
    total_symbol_extract,
    wick_tensor,
)
