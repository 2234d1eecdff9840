"""
Configuration file for the WFP mixing-time laboratory
"""

# Problem instance (harmonic Wigner-Fokker-Planck, units hbar = m = 1)
MODEL_DEFAULTS = {
    'd': 1,
    'omega0': 1.0,
    'gamma': 1.0,
    'Dqq': 0.0,
    'Dpq': 0.0,
    'Dpp': 1.0,
    'require_psd': True
}

# Convention switches for the places where the source equations disagree
CONVENTION_DEFAULTS = {
    'q12_convention': 'DQQ',       # DQQ or DPQ
    'noise_convention': 'TWO_D',   # TWO_D (covariance 2D dt) or ONE_D (D dt)
    'friction_convention': 'GAMMA' # GAMMA or TWO_GAMMA
}

# Particle simulation
SIM_DEFAULTS = {
    'dt': 1e-3,
    't_final': 10.0,
    'n_particles': 10000,
    'seed': 0,
    'record_every': 100,  # steps between curve samples
    'metric': 'KL',       # KL or L2
    'workers': 1
}

# Initial Gaussian for decay runs
INITIAL_DEFAULTS = {
    'mean_x': 5.0,
    'mean_p': 0.0,
    'cov': 'steady',  # steady, zero or identity
    'cov_scale': 1.0
}

# Classical SGD side
SGD_DEFAULTS = {
    's': 0.1,
    'hessian_scale': 1.0,
    'x0': 1.0
}

# Rate fitting and mixing-time estimate
ANALYSIS_DEFAULTS = {
    'prefactor_C': 1.0,
    'epsilon': 1e-3,
    'fit_window': None,      # [t_lo, t_hi] or None for automatic
    'fit_floor_factor': 10.0
}

# Output
OUTPUT_DEFAULTS = {
    'path': './results/run',
    'format': 'csv'
}

# Sweep section is empty unless a config asks for one
SWEEP_DEFAULTS = {
    'axes': {},
    'enforce': None,  # None or 'equal_q' (Dpq = -gamma * Dqq per cell)
    'fit': 'none'     # none, exact or monte_carlo
}

# Numerical tolerances
TOLERANCES = {
    'closed_form_rel': 1e-12,
    'oracle_abs': 1e-10,
    'symmetry': 1e-12,
    'psd_clip': 1e-12,
    'psd_det': 1e-12,
    'equal_q': 1e-12,
    'critical_damping': 1e-8,
    'lyapunov_residual': 1e-12
}

# Counter-based random streams
RNG_CONFIG = {
    'block_size': 4096,  # particles per independently keyed noise block
    'domains': {
        'steady_sample': 0,
        'langevin_noise': 1,
        'sgd_noise': 2,
        'sgd_discrete': 3
    }
}

# Friction dominance gamma / omega0 used to label compare reports
REGIME_THRESHOLDS = {
    'friction_dominated': 10.0,
    'hamiltonian_dominated': 1.0
}

REGIME_LABELS = {
    'friction': "friction-dominated regime",
    'intermediate': "intermediate regime; analogy partial",
    'hamiltonian': "Hamiltonian-dominated regime; analogy weak"
}

# Minimum samples inside a fit window
FIT_MIN_SAMPLES = 5

# Exit codes of the command-line front-end
EXIT_CODES = {
    'success': 0,
    'config_error': 2,
    'numerical_error': 3
}

SCHEMA_VERSION = "1.0"

# 17 significant digits round-trips every double
CSV_FLOAT_FORMAT = '%.17g'

CURVE_COLUMNS = ['t', 'metric', 'distance', 'mean_norm', 'cxx', 'cxp', 'cpp']
