"""Default seeds and tolerances shared by the library and the CLI."""

DEFAULT_SEED = 20240917

# sampled Cayley planes per taming certificate
CAYLEY_SAMPLES = 10_000

# float comparison layer for calibration sampling
CALIBRATION_TOL = 1e-9

# numerical rank tolerance (relative to the largest singular value)
RANK_RTOL = 1e-9

# refuse to evaluate exp(<class, Re alpha>) beyond this exponent
MAX_EXPONENT = 600.0

SPECTRAL_ZERO_TOL = 1e-10
