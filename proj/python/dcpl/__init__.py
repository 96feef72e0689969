"""Python bindings for the dcpl C++ core."""

from ._dcpl import (  # noqa: F401
    AdaptationReport,
    Dataset,
    DcplError,
    HyperParams,
    LrSchedule,
    ModelParams,
    SynthConfig,
    assign_pseudo_labels,
    compute_centroids,
    compute_prior_matrix,
    cosine_similarity,
    entropy,
    eq5_bound_check,
    forward_probs,
    generate_pair,
    init_near_identity,
    load_dataset,
    load_head,
    materialize,
    oracle_transition,
    parse_config_text,
    predict_labels,
    run_adaptation,
    run_bound_suite,
    run_gradcheck_suite,
    run_identity_baseline,
    run_oracle,
    save_dataset,
    save_head,
    softmax_temp,
    total_loss,
    train_source_head,
    transition_recovery_error,
)

__version__ = "0.1.0"
