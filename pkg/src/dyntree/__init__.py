"""Dynamic tree attention for multi-head speculative decoding."""

from .calibration import FixedTreeSpec, build_fixed_tree, estimate_accuracy, expected_accept_length
from .candgen import (
    Candidate,
    CandidateSet,
    enumerate_all_candidates,
    generate_candidates,
    is_prefix_closed,
    top_n_oracle,
)
from .drafttree import (
    DraftTree,
    TreeBuffers,
    attention_mask,
    build_tree,
    position_offsets,
    prepare_buffers,
    retrieval_paths,
)
from .marginals import AccuracyMatrix, LogTable, MarginalTable, log_scores, top_m_rows, validate_marginals
from .simulator import SimConfig, SimStats, make_truth_model, run_simulation
from .verifier import VerificationResult, brute_force_verify, greedy_verify

__version__ = "0.1.0"
