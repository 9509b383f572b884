
# Numerical guards.
P_EPS = 1e-6              # Clip for Bernoulli means, keeps log terms finite.
EIG_FLOOR = 1e-3          # Smallest eigenvalue allowed in a precision matrix.
VAR_FLOOR = 1e-6          # Smallest eigenvalue allowed in a mixture covariance.
COLUMN_NORM_GUARD = 1e-12 # Columns shorter than this are left as they are.
SPARSITY_EPS = 1e-6       # A latent unit counts as active when z > SPARSITY_EPS.

# Lateral competition strengths.
ALPHA_E = 0.13            # Self-excitation.
ALPHA_H = 0.125           # Within-group lateral inhibition.

# Model defaults.
DEFAULT_LAYER_SIZES = [784, 360, 360, 100]
DEFAULT_GROUP_SIZE = [5, 5, 5]
DEFAULT_T = 50
DEFAULT_BETA = 0.05
DEFAULT_GAMMA = 0.001
DEFAULT_LAMBDA_E = 0.9
DEFAULT_WEIGHT_STD = 0.055
ACT_HIDDEN = "relu"
ACT_OUT = "logistic"
PRECISION_MODES = ("identity", "diagonal", "full")

# Run defaults.
DEFAULT_ETA_W = 0.02
DEFAULT_EPOCHS = 50
DEFAULT_BATCH_SIZE = 200
DEFAULT_N_VAL = 2000
DEFAULT_GMM_COMPONENTS = 65
DEFAULT_PIXEL_GMM_COMPONENTS = 10
DEFAULT_MC_SAMPLES = 5000
BINARIZE_THRESHOLD = 0.5
MASK_KINDS = ("right-half", "all-ones", "custom")

# Files and formats.
CHECKPOINT_FORMAT_VERSION = 1
CHECKPOINT_MANIFEST = "manifest.json"
GMM_MANIFEST = "gmm.manifest.json"
TENSOR_DTYPE = "<f8"
TRAIN_CSV = "metrics.csv"
TRAIN_CSV_HEADER = ["epoch", "train_bce", "val_bce", "wall_seconds"]
REPORT_CSV = "report.csv"
REPORT_JSON = "report.json"
REPORT_CSV_HEADER = ["command", "bce", "log_px", "log_px_stderr", "mmse", "err_pct", "sparsity"]
LOG_PX_STDERR_BASIS = "test records"  # log_px_stderr is the spread over records, not sampling error.
ERROR_LOG_NAME = "ngc_error_log.txt"
OUTPUT_DIR_ENV = "NGC_OUTPUT_DIR"
MNIST_DIR_ENV = "NGC_MNIST_DIR"
