"""
Constants for schwarz-adjoint
"""

METHODS = ("multiplicative", "additive")
PROBLEMS = ("poisson", "convdiff")
REFERENCE_MODES = ("exact", "surrogate", "none")
# "width": beta is the total overlap, each side widens by beta/2.
# "extension": each subdomain widens by beta past every interior partition line.
OVERLAP_CONVENTIONS = ("width", "extension")

# Poisson: -lap u = 8 pi^2 sin(2 pi x) sin(2 pi y), exact u = sin(2 pi x) sin(2 pi y)
POISSON_QOI_RECT = (0.6, 0.6, 0.8, 0.8)
CANCELLATION_QOI_RECT = (0.4, 0.4, 0.8, 0.8)

# Convection-diffusion: -lap u + b.grad u = 1 with b = (-60, 0)
CONVDIFF_VELOCITY = (-60.0, 0.0)
CONVDIFF_SOURCE = 1.0
CONVDIFF_QOI_RECT = (0.05, 0.05, 0.2, 0.2)
CONVDIFF_ADJOINT_DEGREE = 3

DEFAULT_TAU = 0.4
DEFAULT_STAGE2_BETA = 0.2

# Uniform red refinements used for reference solutions (4x in each direction).
REFERENCE_REFINEMENTS = 2
REFERENCE_DEGREE = 3

CSV_COLUMNS = (
    "nx",
    "ny",
    "beta",
    "K",
    "method",
    "tau",
    "eta_total",
    "gamma",
    "eta_disc",
    "gamma_D",
    "eta_iter",
)
CSV_FLOAT_FORMAT = "{:.5e}"
