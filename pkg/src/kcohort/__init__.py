"""K-anonymous user cohorts from sparse non-negative feature vectors.

The library builds cohorts with a consecutive weighted-sampling splitter
that guarantees every cohort holds at least K users, alongside
hash-and-sort and random-grouping baselines, and evaluates them with a
campaign-recall harness.  See the README for the file formats and the CLI.
"""

from .cohorts import (
    Cohort,
    CohortAssignment,
    KAnonymityReport,
    build_ccws,
    build_hash_and_sort,
    build_random,
    cohort_digest,
    cohort_identity,
    read_assignment,
    size_distribution,
    verify_k_anonymity,
    write_assignment,
    write_assignment_metadata,
)
from .errors import (
    ConfigError,
    DatasetFormatError,
    InfeasibilityError,
    KCohortError,
    PartitionError,
    UndefinedHashError,
    UndefinedSimilarityError,
)
from .evaluation import (
    Campaign,
    CampaignCounts,
    RecallReport,
    SweepPoint,
    SyntheticConfig,
    cohort_matches,
    default_p_grid,
    evaluate,
    generate_synthetic,
    load_campaigns,
    store_campaigns,
    sweep_p,
    user_matches,
    write_recall_report,
    write_size_cdf_csv,
    write_sweep_csv,
)
from .hashers import (
    CwsSample,
    HashMethod,
    HashVector,
    cws_sample,
    cws_samples_for_seeds,
    cws_zero_bit,
    hash_matrix,
    hash_vector,
    minhash,
    signrp,
)
from .rng import StreamKey, gamma21, gaussian, mix64, raw_word, uniform01
from .vectors import (
    Dataset,
    SparseVector,
    binary_jaccard,
    double_dimensions,
    load_dataset,
    pgmm,
    store_dataset,
    weighted_jaccard,
)

__version__ = "0.1.0"
