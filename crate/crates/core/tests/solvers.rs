use fbd_core::fbd::{lsbd_from, lsbd_misfit, PhaseProblem};
use fbd_core::seqcore::{convolve, max_normalize_interferograms};
use fbd_core::synth::{make_experiment, recovery_score, Experiment, ExperimentId, ExperimentSpec};
use fbd_core::{
    build_interferograms, fbd_pipeline, fibd, fpr, ibd, lsbd, lspr, AltMinConfig, ChannelSet, FbdError,
    HomotopySchedule, InnerSolver, InterferogramSet, PipelineConfig, Weight,
};

fn small(id: ExperimentId, seed: u64) -> Experiment {
    let mut spec = ExperimentSpec::new(id, seed);
    spec.nr = 4;
    spec.t = 200;
    make_experiment(&spec).unwrap()
}

fn data_interferograms(e: &Experiment) -> InterferogramSet {
    max_normalize_interferograms(&build_interferograms(&e.data, e.spec.t).unwrap()).unwrap()
}

fn only(w: Weight) -> HomotopySchedule {
    HomotopySchedule::new(vec![w]).unwrap()
}

fn assert_nonincreasing(values: &[f64]) {
    for w in values.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-6) + 1e-15, "{} -> {}", w[0], w[1]);
    }
}

#[test]
fn lsbd_output_has_unit_energy_source_and_consistent_fields() {
    let e = small(ExperimentId::I, 1);
    let cfg = AltMinConfig {
        max_outer_iters: 200,
        ..AltMinConfig::default()
    };
    let r = lsbd(&e.data, e.spec.tau, &cfg, 9).unwrap();
    let energy: f64 = r.source.samples().iter().map(|v| v * v).sum();
    assert!((energy - 1.0).abs() < 1e-12);
    assert_eq!(r.responses.span(), e.spec.tau + 1);
    assert_eq!(r.source.len(), e.spec.t + 1);
    let g: Vec<Vec<f64>> = r.responses.channels().iter().map(|c| c.samples().to_vec()).collect();
    let u = lsbd_misfit(&e.data, r.source.samples(), &g);
    assert!((u - r.reports[0].final_misfit).abs() <= 1e-12 * (1.0 + u));
    assert_nonincreasing(&r.reports[0].legs[0].objective_second);
}

#[test]
fn lsbd_fits_identical_channels_with_identical_responses() {
    // identical channels share every root, so only the fit and the symmetry are determined
    let s: Vec<f64> = (0..60).map(|i| ((i * 37 % 23) as f64 - 11.0) / 7.0).collect();
    let d = ChannelSet::from_rows(vec![s.clone(), s.clone(), s]).unwrap();
    let cfg = AltMinConfig {
        epsilon: 1e-14,
        ..AltMinConfig::default()
    };
    let r = lsbd(&d, 4, &cfg, 3).unwrap();
    assert!(r.reports[0].final_misfit < 1e-10 * d.total_energy());
    let g0 = r.responses.channel(0);
    for g in r.responses.channels() {
        assert!(g.max_abs_diff(g0) <= 1e-12 * g0.samples().iter().fold(0.0f64, |m, v| m.max(v.abs())));
    }
}

#[test]
fn single_channel_has_the_delta_minimiser() {
    let e = small(ExperimentId::I, 2);
    let d = e.data.channel(0).samples().to_vec();
    let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
    let s: Vec<f64> = d.iter().map(|v| v / norm).collect();
    let mut g = vec![0.0; e.spec.tau + 1];
    g[0] = norm;
    let one = ChannelSet::from_rows(vec![d]).unwrap();
    assert!(lsbd_misfit(&one, &s, &[g.clone()]) < 1e-28);
    let r = lsbd_from(&one, e.spec.tau, s, vec![g], &AltMinConfig::default(), 0).unwrap();
    assert!(r.reports[0].final_misfit < 1e-26);
    assert_eq!(r.reports[0].total_outer_iterations(), 2);
}

#[test]
fn direct_and_cgls_inner_solvers_agree() {
    let e = small(ExperimentId::II, 3);
    let dij = data_interferograms(&e);
    let direct = AltMinConfig {
        max_outer_iters: 5,
        line_search: false,
        ..AltMinConfig::default()
    };
    let cgls = AltMinConfig {
        inner_solver: InnerSolver::Cgls {
            tol: 1e-13,
            max_iters: 4000,
        },
        ..direct.clone()
    };
    let (sa1, g1, _) = ibd(&dij, e.spec.tau, &direct, 5).unwrap();
    let (sa2, g2, _) = ibd(&dij, e.spec.tau, &cgls, 5).unwrap();
    let scale = g1
        .entries()
        .iter()
        .flat_map(|s| s.samples())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(g1.misfit(&g2).unwrap().sqrt() < 1e-6 * scale);
    assert!(sa1.to_sequence().max_abs_diff(&sa2.to_sequence()) < 1e-6);
}

#[test]
fn ibd_fits_white_source_interferograms() {
    // d_ij = g_ij on a wider lag window: the source auto-correlation is a delta
    let e = small(ExperimentId::I, 4);
    let gij = build_interferograms(&e.truth, e.spec.tau).unwrap();
    let wide = InterferogramSet::new(gij.nr(), 80, gij.entries().to_vec()).unwrap();
    let dij = max_normalize_interferograms(&wide).unwrap();
    let cfg = AltMinConfig {
        epsilon: 1e-12,
        ..AltMinConfig::default()
    };
    let (sa, _, rep) = ibd(&dij, e.spec.tau, &cfg, 6).unwrap();
    assert!(rep.final_misfit < 1e-6, "V = {}", rep.final_misfit);
    assert_eq!(sa.at(0), 1.0);
}

#[test]
fn interferometric_outputs_satisfy_their_constraints() {
    let e = small(ExperimentId::I, 5);
    let dij = data_interferograms(&e);
    let tau = e.spec.tau as isize;
    let cfg = AltMinConfig {
        max_outer_iters: 50,
        ..AltMinConfig::default()
    };

    let (sa, g, rep) = fibd(&dij, e.spec.tau, &only(Weight::Infinite), &cfg, 2).unwrap();
    assert_eq!(sa.at(0), 1.0);
    for x in 1..=e.spec.t as isize {
        assert_eq!(sa.at(x), sa.at(-x));
    }
    for k in 0..g.nr() {
        let gkk = g.entry(k, k);
        for t in -tau..=tau {
            if t != 0 {
                assert_eq!(gkk.at(t), 0.0);
            }
        }
    }
    assert_nonincreasing(&rep.legs[0].objective_second);

    let (sa, _, rep) = ibd(&dij, e.spec.tau, &cfg, 2).unwrap();
    assert_eq!(sa.at(0), 1.0);
    assert_nonincreasing(&rep.legs[0].objective_second);
}

#[test]
fn hard_front_leg_pins_the_front_channel() {
    let e = small(ExperimentId::I, 6);
    let gij = e.truth_interferograms();
    let start: Vec<Vec<f64>> = (0..gij.nr())
        .map(|k| {
            (0..=e.spec.tau)
                .map(|t| ((k * 31 + t * 17) % 13) as f64 / 13.0 - 0.4)
                .collect()
        })
        .collect();
    let mut p = PhaseProblem::focused(&gij, 2, Weight::Infinite, start);
    p.solve(1e-10, 200).unwrap();
    let f = &p.responses()[2];
    assert!(f[0] != 0.0);
    assert!(f[1..].iter().all(|v| *v == 0.0));
}

#[test]
fn fpr_recovers_exact_spike_interferograms() {
    let e = small(ExperimentId::I, 7);
    let gij = e.truth_interferograms();
    let (g, rep) = fpr(
        &gij,
        0,
        &HomotopySchedule::hard_then_free(),
        &AltMinConfig::default(),
        1,
    )
    .unwrap();
    assert!(rep.final_misfit < 1e-12);
    assert!(recovery_score(&g, &e.truth).unwrap() > 0.999);
}

#[test]
fn lspr_fits_interferograms_of_a_shifted_white_filtered_truth() {
    let e = small(ExperimentId::I, 8);
    let gij = e.truth_interferograms();
    let cfg = AltMinConfig {
        epsilon: 1e-14,
        ..AltMinConfig::default()
    };
    let (g, rep) = lspr(&gij, &cfg, 3).unwrap();
    let est = build_interferograms(&g, e.spec.tau).unwrap();
    assert!((est.misfit(&gij).unwrap() - rep.final_misfit).abs() < 1e-12);
}

#[test]
fn pipeline_is_deterministic_and_reports_every_stage() {
    let e = small(ExperimentId::I, 9);
    let mut cfg = PipelineConfig::new(0, 11);
    cfg.altmin.max_outer_iters = 40;
    let a = fbd_pipeline(&e.data, e.spec.tau, &cfg).unwrap();
    let b = fbd_pipeline(&e.data, e.spec.tau, &cfg).unwrap();
    assert_eq!(a.responses, b.responses);
    assert_eq!(a.source, b.source);
    let stages: Vec<&str> = a.reports.iter().map(|r| r.stage.as_str()).collect();
    assert_eq!(stages, ["fibd", "fpr", "deconvolve"]);

    cfg.finalize = true;
    let c = fbd_pipeline(&e.data, e.spec.tau, &cfg).unwrap();
    let stages: Vec<&str> = c.reports.iter().map(|r| r.stage.as_str()).collect();
    assert_eq!(stages, ["fibd", "fpr", "lsbd"]);
    let energy: f64 = c.source.samples().iter().map(|v| v * v).sum();
    assert!((energy - 1.0).abs() < 1e-12);
}

#[test]
fn invalid_inputs_are_reported() {
    let e = small(ExperimentId::I, 11);
    let raw = build_interferograms(&e.data, e.spec.t).unwrap();
    let cfg = AltMinConfig::default();
    assert!(matches!(
        ibd(&raw.map_entries(|s| s.scaled(3.0)), e.spec.tau, &cfg, 1),
        Err(FbdError::InvalidArgument(_))
    ));
    let dij = data_interferograms(&e);
    assert!(ibd(&dij, e.spec.t + 1, &cfg, 1).is_err());
    assert!(fpr(
        &e.truth_interferograms(),
        9,
        &HomotopySchedule::hard_then_free(),
        &cfg,
        1
    )
    .is_err());
    let zeros = ChannelSet::from_rows(vec![vec![0.0; 50]; 2]).unwrap();
    assert!(lsbd(&zeros, 5, &cfg, 1).is_err());
    assert!(lsbd(&e.data, e.spec.t, &cfg, 1).is_err());
    let bad = AltMinConfig {
        epsilon: 0.0,
        ..AltMinConfig::default()
    };
    assert!(lsbd(&e.data, e.spec.tau, &bad, 1).is_err());
}

#[test]
fn convolution_data_matches_the_generator() {
    let e = small(ExperimentId::II, 12);
    for (d, g) in e.data.channels().iter().zip(e.truth.channels()) {
        let full = convolve(&e.source, g).unwrap();
        assert!(full.window(0, e.spec.t as isize).max_abs_diff(d) < 1e-14);
        assert!(full
            .window(e.spec.t as isize + 1, full.end())
            .samples()
            .iter()
            .all(|v| *v == 0.0));
    }
}
