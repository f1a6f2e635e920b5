//! Subspace searches and the degree-reduction pipeline built on them.

mod pipeline;
mod subspaces;

pub use pipeline::{
    small_degree_element, verify_pipeline_report, BundleInfo, Check, ExtensionRecord, Fallback, IterationRecord,
    PipelineConfig, PipelineConstants, PipelineFamily, PipelineReport, StageRecord,
};
pub use subspaces::{
    find_w_formed, find_w_linear, find_w_perp_in, find_w_singular, formed_dim_bound, meets_image_trivially,
    no_rational_eigenvalue, perp_to_image, FormedW, RadicalBranch,
};
