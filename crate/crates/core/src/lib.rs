//! Post hoc inference on statistical maps: simultaneous lower bounds on the
//! true discovery proportion (TDP) of arbitrary voxel sets.
//!
//! The pipeline runs from a [`SubjectStack`] of per-subject maps to a one-sample
//! [`StatMap`], a sign-flipping [`NullPValueMatrix`], calibrated JER-controlling
//! [`Template`]s (Simes, ARI, pARI, Notip), and finally TDP bounds for clusters
//! and top-k sets.

pub mod bounds;
pub mod cluster;
pub mod data;
pub mod error;
pub mod harness;
pub mod phdat;
pub mod rng;
pub mod special;
pub mod stats;
pub mod templates;

pub use bounds::{
    confidence_curve, tdp_bound_bruteforce, tdp_bound_linear, true_tdp, BoundCount, ConfidenceCurve, Selection,
};
pub use cluster::{cluster_table, drill_down, extract_clusters, holm_fwer_set, Cluster, ClusterTable, Connectivity};
pub use data::{voxel_to_world, Grid3, Mask, PValueVector, StatMap, SubjectStack};
pub use error::{Error, Result};
pub use phdat::{read_phdat, write_phdat};
pub use stats::{one_sample_z, p_from_z, sign_flip_null, NullPValueMatrix, Sidedness};
pub use templates::{
    ari_template, calibrate_notip, calibrate_pari, empirical_jer, hommel_value, learn_notip_templates,
    simes_template, CalibrationResult, LearnedTemplateFamily, Template, TemplateKind,
};
