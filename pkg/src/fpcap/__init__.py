"""Fingerprinting capacities, log-likelihood decoders and seeded simulations."""

__version__ = "0.1.0"

from .capacity import (  # noqa: E402
    CapacityResult,
    arcsine_expectation,
    capacity,
    capacity_table,
    joint_mi_rate,
    maximize_over_p,
    simple_mi,
)
from .channels import (  # noqa: E402
    ATTACKS,
    CollusionChannel,
    channel_marginals,
    custom_channel,
    load_channel,
    make_channel,
    pirate_output,
)
from .core import (  # noqa: E402
    NEG_INFINITY,
    RngStream,
    arcsine_cdf,
    arcsine_sample,
    binary_entropy,
    kl_div,
    log_binom_pmf,
)
from .decode import (  # noqa: E402
    BayesianM,
    InformedLLR,
    JointLLR,
    JointUniversal,
    OosterwijkH,
    SchemeParams,
    UniversalG,
    accuse_joint,
    accuse_simple,
    joint_moment_fn,
    joint_tuple_score,
    moment_fn,
    scheme_params_joint,
    scheme_params_simple,
    simple_llr_table,
    universal_score,
    user_scores,
)
from .encode import BiasModel, Code, draw_biases, generate_code, load_code, save_code  # noqa: E402
from .sim import (  # noqa: E402
    ErrorEstimate,
    Scenario,
    estimate_error_rates,
    group_testing_run,
    innocent_mgf_probe,
    run_trial,
)
