use super::interferometric::fibd;
use super::lsbd::{assemble_result, deconvolve_source, lsbd_from};
use super::phase::fpr;
use super::schedule::HomotopySchedule;
use super::FbdResult;
use crate::altmin::AltMinConfig;
use crate::error::Result;
use crate::model::{build_interferograms, ChannelSet, SolveReport};
use crate::seqcore::max_normalize_interferograms;

/// Knobs for [`fbd_pipeline`] beyond the data and `tau`.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub front_channel: usize,
    pub alphas: HomotopySchedule,
    pub betas: HomotopySchedule,
    pub altmin: AltMinConfig,
    pub seed: u64,
    /// Finish with an LSBD refinement warm-started at the FPR estimate.
    pub finalize: bool,
}

impl PipelineConfig {
    pub fn new(front_channel: usize, seed: u64) -> Self {
        Self {
            front_channel,
            alphas: HomotopySchedule::hard_then_free(),
            betas: HomotopySchedule::hard_then_free(),
            altmin: AltMinConfig::default(),
            seed,
            finalize: false,
        }
    }
}

/// Interferograms, FIBD, FPR, then optionally LSBD.
///
/// The FIBD and FPR stages see max-normalised data, so the returned
/// responses carry the scale of `d` only through the final source
/// deconvolution.
pub fn fbd_pipeline(d: &ChannelSet, tau: usize, cfg: &PipelineConfig) -> Result<FbdResult> {
    let t = d.span() - 1;
    let dij = max_normalize_interferograms(&build_interferograms(d, t)?)?;
    let (sa, gij, fibd_report) = fibd(&dij, tau, &cfg.alphas, &cfg.altmin, cfg.seed)?;
    let (g, fpr_report) = fpr(
        &gij,
        cfg.front_channel,
        &cfg.betas,
        &cfg.altmin,
        cfg.seed.wrapping_add(1),
    )?;
    let (s, g) = deconvolve_source(d, &g)?;
    let mut reports = vec![fibd_report, fpr_report];
    if cfg.finalize {
        let mut refined = lsbd_from(d, tau, s, g, &cfg.altmin, cfg.seed)?;
        reports.append(&mut refined.reports);
        refined.reports = reports;
        refined.source_autocorr = sa;
        refined.interferograms = gij;
        return Ok(refined);
    }
    let mut deconv = SolveReport::new("deconvolve", cfg.seed);
    deconv.final_misfit = super::lsbd::lsbd_misfit(d, &s, &g);
    reports.push(deconv);
    let mut out = assemble_result(s, g, tau, reports)?;
    out.source_autocorr = sa;
    out.interferograms = gij;
    Ok(out)
}
