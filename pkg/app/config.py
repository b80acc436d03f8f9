import os
from dotenv import load_dotenv

load_dotenv()

# Runtime knobs (all optional; see .env.example)
DIMENSION_CAP = int(os.getenv("QI_DIMENSION_CAP", "4096"))
WORKERS = max(1, int(os.getenv("QI_WORKERS", "1")))
LOG_LEVEL = os.getenv("QI_LOG_LEVEL", "WARNING").upper()

# Shots are drawn in fixed-size blocks, one random substream per block.
# Changing this changes sampled output, so it is not read from the environment.
SHOT_BLOCK = 4096

# Numerical tolerances
HERMITIAN_TOL = 1e-9
PSD_TOL = 1e-9
TRACE_TOL = 1e-9
COMPLETENESS_TOL = 1e-9
ISOMETRY_TOL = 1e-9
PURE_NORM_TOL = 1e-12
PROBABILITY_CLAMP = 1e-12
TRACE_PRESERVATION_TOL = 1e-10
INTEGRATOR_PSD_TOL = 1e-7
INTEGRATOR_TRACE_TOL = 1e-8
COMPLETION_RESIDUAL = 1e-8
ZERO_PROBABILITY = 1e-15
UNITARY_TOL = 1e-10

# First-order Kraus steps are corrected to exact completeness; beyond this
# raw deviation the step is rejected as too coarse.
KRAUS_STEP_MAX_DEVIATION = 0.05

ROOT_LABEL = "root"
# Composed outcome labels read newest-first: "nu.mu" means mu happened, then nu.
LABEL_SEPARATOR = "."
# Outcomes of independent subsystems: "mu,nu" for subsystem 1 then 2.
PAIR_SEPARATOR = ","
