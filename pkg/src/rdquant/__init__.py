"""Rate-distortion analysis of gradient quantizers on a Gaussian source."""
from .gauss import (
    GaussianSource,
    RdPoint,
    TruncatedMoments,
    binary_entropy,
    discrete_entropy,
    shannon_distortion,
    shannon_rate,
    std_cdf,
    std_cdf_inv,
    std_pdf,
    truncated_moments,
)
from .schemes import (
    SchemeId,
    SchemePoint,
    asym_binary_point,
    asym_binary_rate_for_distortion,
    asym_h,
    scaled_sign_point,
    sweep_scheme,
    topk_bbit_point,
    topk_ternary_point,
)
from .ecsq import (
    LloydMaxConfig,
    ScalarQuantizerSpec,
    apply_scalar,
    eval_scalar,
    lagrangian_cost,
    lloyd_max,
    sweep_lambda,
)
from .ecvq import (
    SampleSet,
    VectorCodebook,
    clg_assign,
    clg_train,
    eval_codebook,
    export_assignments,
    product_quantizer_eval,
    sample_gaussian,
)

__version__ = "0.1.0"
