//! Stage solvers: LSBD, IBD, FIBD, LSPR, FPR, and the two-stage pipeline.

mod interferometric;
mod lsbd;
pub mod operators;
mod phase;
mod pipeline;
mod schedule;

pub use interferometric::{fibd, ibd, interferometric_misfit, InterferometricProblem};
pub(crate) use lsbd::truncated_conv as lsbd_truncated_conv;
pub use lsbd::{deconvolve_source, lsbd, lsbd_from, lsbd_misfit, LsbdProblem};
pub use phase::{fpr, lspr, lspr_from, lspr_misfit, suggest_front_channel, PhaseJacobianOp, PhaseProblem};
pub use pipeline::{fbd_pipeline, PipelineConfig};
pub use schedule::{focusing_weights, FocusingSide, HomotopySchedule, Weight};

use crate::model::{ChannelSet, InterferogramSet, SolveReport, SourceAutocorr};
use crate::seqcore::Sequence;

/// Estimates from LSBD or the full pipeline.
#[derive(Debug, Clone)]
pub struct FbdResult {
    /// `ĝ_i` on `{0..tau}`.
    pub responses: ChannelSet,
    /// `ŝ` on `{0..T}` with unit energy.
    pub source: Sequence,
    pub source_autocorr: SourceAutocorr,
    pub interferograms: InterferogramSet,
    pub reports: Vec<SolveReport>,
}
