//! Focused blind deconvolution.
//!
//! Recovers sparse, front-loaded impulse responses `g_i` from channel
//! outputs `d_i = s * g_i` driven by one unknown source `s`. The work is
//! split in two: interferometric deconvolution (FIBD) removes the source
//! auto-correlation from the cross-correlations `d_ij`, then focused phase
//! retrieval (FPR) recovers `g_i` from the estimated `g_ij`. Plain LSBD,
//! IBD and LSPR are provided as baselines.
//!
//! ```
//! use fbd_core::synth::{make_experiment, recovery_score, ExperimentId, ExperimentSpec};
//! use fbd_core::{build_interferograms, fpr, AltMinConfig, HomotopySchedule};
//!
//! let mut spec = ExperimentSpec::new(ExperimentId::I, 1);
//! spec.nr = 4;
//! let exp = make_experiment(&spec).unwrap();
//! let gij = build_interferograms(&exp.truth, spec.tau).unwrap();
//! let (g, _) = fpr(&gij, 0, &HomotopySchedule::hard_then_free(), &AltMinConfig::default(), 7).unwrap();
//! assert!(recovery_score(&g, &exp.truth).unwrap() > 0.9);
//! ```

pub mod altmin;
pub mod error;
pub mod fbd;
pub mod focusing;
pub mod linalg;
pub mod model;
pub mod seqcore;
pub mod synth;

pub use altmin::{alternate, AltMinConfig, BlockProblem, InnerSolver, LinearOperator};
pub use error::{FbdError, Result};
pub use fbd::{
    fbd_pipeline, fibd, focusing_weights, fpr, ibd, lsbd, lspr, FbdResult, FocusingSide, HomotopySchedule,
    PipelineConfig, Weight,
};
pub use focusing::{appendix_check, second_moment_functional, AppendixCheck, FocusReport};
pub use model::{build_interferograms, ChannelSet, InterferogramSet, LegReport, SolveReport, SourceAutocorr};
pub use seqcore::Sequence;
