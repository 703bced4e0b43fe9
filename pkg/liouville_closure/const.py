"""Constants used by the liouville_closure library and command line runner."""

DOMAIN = "liouville_closure"
DEFAULT_NAME = "Liouville closure"

# ---------------------------
#   Models and providers
# ---------------------------
MODEL_OSCILLATOR = "oscillator"
MODEL_TBH = "tbh"
MODEL_HARMONIC = "harmonic"
MODEL_FREE = "free"
MODELS = [MODEL_OSCILLATOR, MODEL_TBH, MODEL_HARMONIC, MODEL_FREE]

PROVIDER_CLOSED_FORM = "closed_form"
PROVIDER_MONTE_CARLO = "monte_carlo"
PROVIDER_TABULATED = "tabulated"
PROVIDERS = [PROVIDER_CLOSED_FORM, PROVIDER_MONTE_CARLO, PROVIDER_TABULATED]

# ---------------------------
#   Configuration sections
# ---------------------------
SECTION_RUN = "run"
SECTION_MODEL = "model"
SECTION_GRID = "grid"
SECTION_GEOMETRY = "geometry"
SECTION_HARMONIC = "harmonic"
SECTION_PATHS = "paths"
SECTION_CLOSURE = "closure"
SECTION_TRANSFER = "transfer"
SECTION_WEAKNOISE = "weaknoise"
SECTION_PDE = "pde"

# [run]
CONF_MODEL = "model"
DEFAULT_MODEL = MODEL_HARMONIC
CONF_PROVIDER = "provider"
DEFAULT_PROVIDER = PROVIDER_CLOSED_FORM
CONF_BETA = "beta"
DEFAULT_BETA = 1.0
CONF_DELTA_T = "delta_t"
DEFAULT_DELTA_T = 1.0
CONF_W_REV = "w_rev"
DEFAULT_W_REV = 1.0
CONF_SEED = "seed"
DEFAULT_SEED = 0
CONF_OUTPUT = "output"
DEFAULT_OUTPUT = "out"
CONF_WORKERS = "workers"
DEFAULT_WORKERS = 1

# [model]
CONF_CUTOFF = "cutoff"
DEFAULT_CUTOFF = 3
MAX_CUTOFF = 16
CONF_K_RES = "k_res"
DEFAULT_K_RES = 1
CONF_KAPPA = "kappa"
DEFAULT_KAPPA = 1.0
CONF_COUNT = "count"
DEFAULT_COUNT = 100000
CONF_BATCHES = "batches"
DEFAULT_BATCHES = 20

# [grid]
CONF_LOWER = "lower"
DEFAULT_LOWER = [-4.0]
CONF_UPPER = "upper"
DEFAULT_UPPER = [4.0]
CONF_POINTS = "points"
DEFAULT_POINTS = [401]
MIN_GRID_POINTS = 16

# [geometry]
CONF_LAMBDA = "lambda"
DEFAULT_LAMBDA = [0.5, 0.2]
CONF_LAMBDA_DOT = "lambda_dot"
DEFAULT_LAMBDA_DOT = []

# [harmonic]
CONF_U0 = "u0"
DEFAULT_U0 = 1.0
CONF_T_RESTART = "t_restart"
DEFAULT_T_RESTART = 1.5
CONF_HORIZON = "horizon"
DEFAULT_HORIZON = 5.0
CONF_SLICE_TIMES = "slice_times"
DEFAULT_SLICE_TIMES = [0.5, 1.0, 1.5, 3.0]
CONF_EXTREMAL_HORIZON = "extremal_horizon"
DEFAULT_EXTREMAL_HORIZON = 5.0
CONF_STEP = "step"
DEFAULT_FIGURE_STEP = 0.01

# [paths] / [closure]
CONF_LAMBDA0 = "lambda0"
DEFAULT_LAMBDA0 = [1.0]
CONF_LAMBDA_END = "lambda_end"
DEFAULT_LAMBDA_END = [1.0]
CONF_N_NODES = "n_nodes"
DEFAULT_N_NODES = 2000
DEFAULT_CLOSURE_NODES = 200
DEFAULT_CLOSURE_HORIZON = 1.0
MIN_N_NODES = 8
CONF_TOLERANCE = "tolerance"
DEFAULT_EL_TOLERANCE = 1e-3
CONF_MAX_ITER = "max_iter"
DEFAULT_NEWTON_MAX_ITER = 50

# [transfer]
CONF_N_SUB = "n_sub"
DEFAULT_N_SUB = 20
CONF_STEPS = "steps"
DEFAULT_STEPS = 3
CONF_INITIAL = "initial"
DEFAULT_INITIAL = [1.0]
DEFAULT_STEADY_TOLERANCE = 1e-10
DEFAULT_STEADY_MAX_ITER = 2000
CONF_TRIALS = "trials"
DEFAULT_TRIALS = 50
MIN_TRIALS = 10
CONF_CONFINEMENT = "confinement_factor"
DEFAULT_CONFINEMENT = 2.0
CONF_SPECTRUM = "spectrum"
DEFAULT_SPECTRUM = 5

# [weaknoise]
CONF_ALPHA_GUESS = "alpha_guess"
DEFAULT_ALPHA_GUESS = [0.0]
DEFAULT_DRIFT_STEP = 0.01
DEFAULT_WEAKNOISE_HORIZON = 10.0

# [pde]
CONF_DT_PDE = "dt_pde"
DEFAULT_DT_PDE = 1e-4
CONF_N_SUB_LIST = "n_sub_list"
DEFAULT_N_SUB_LIST = [10, 20, 40]
CONF_WIDTH = "width"
DEFAULT_WIDTH = 0.25
CONF_DECAY_START = "decay_start"
DEFAULT_DECAY_START = 4.0
CONF_DECAY_END = "decay_end"
DEFAULT_DECAY_END = 6.0

# ---------------------------
#   Numerical tolerances
# ---------------------------
SE_FACTOR = 3.0
CLOSED_FORM_ATOL = 1e-12
DEGENERATE_RATIO = 1e-10
FD_STEP_GEOMETRY = 1e-3
FD_STEP_BRACKET = 1e-5
FD_STEP_NEWTON = 1e-4
FINE_STEP = 1e-3
ENERGY_TAU = 0.1
ENERGY_DRIFT_TOL = 1e-6
OVERFLOW_KAPPA_T = 700.0
CONTRACTION_TOL = 1e-6
TAIL_MASS_WARN = 1e-3
TAIL_CENTRAL_FRACTION = 0.8
BLOWUP_FACTOR = 10.0
HJ_SAMPLE_RADIUS = 0.1
HJ_SAMPLE_COUNT = 100
FIXED_POINT_TOL = 1e-8
VALIDITY_RADIUS = 1.0
DEFAULT_LAMBDA_DOT_SCALE = 0.2

# ---------------------------
#   Exit codes
# ---------------------------
EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NOT_CONVERGED = 2
