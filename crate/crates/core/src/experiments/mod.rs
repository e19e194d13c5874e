//! Simulation designs, baselines, cross-validation and replication protocols.

pub mod baselines;
pub mod cv;
pub mod data;
pub mod dgp;
pub mod fit;
pub mod metrics;
pub mod protocols;
pub mod replicate;

pub use baselines::{lasso_oracle, logistic_l1, logistic_unregularized, ols, ridge_oracle};
pub use cv::{kfold_cv, kfold_cv_l1, CvResult};
pub use data::{read_csv, read_csv_path, standardize, Dataset, Task};
pub use dgp::{gen_gaussian_outliers, gen_sparse_linreg, gen_sparse_logit, DgpKind, DgpSpec};
pub use fit::{fit_method, fit_robust, Method, RobustSettings};
pub use metrics::{compute_metrics, MetricRow};
pub use protocols::{run_real_data, run_simulation, RealDataConfig, RealDataset, Scale, SimulationConfig};
pub use replicate::{batch_replicate, simulate_replicate, ReplicationReport};
