//! Episode metrics, algorithm comparison and numerical checks of the
//! gradient identities relating centralized and decentralized critics.

mod metrics;
mod summary;
mod theorem;

pub use metrics::{fairness_ratio, metrics_csv, metrics_mean, parse_metrics_csv, total_variation, MetricsRecord, METRICS_HEADER};
pub use summary::{
    comparison_csv, evaluation_summary, fairness_table, percent_reduction, AlgoSummary, Comparison, COMPARISON_HEADER,
};
pub use theorem::{
    marginalize_critic, theorem1_from_samples, theorem2_from_samples, trained_critic_probe, verify_theorem1,
    verify_theorem2, GradientSampleSet, JointCritic, ProductCritic, Theorem1Report, Theorem2Report,
    TrainedCriticProbe, STRICT_EPS, THEOREM1_TOL, THEOREM2_TOL,
};
