use fbd_core::synth::{make_experiment, recovery_score, ExperimentId, ExperimentSpec};
use fbd_core::{build_interferograms, ChannelSet, Sequence};
use nalgebra::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Nonzero roots of `sum_t c[t] z^t` by Durand-Kerner iteration.
fn nonzero_roots(c: &[f64]) -> Vec<Complex<f64>> {
    let lo = c.iter().position(|v| *v != 0.0).unwrap();
    let hi = c.iter().rposition(|v| *v != 0.0).unwrap();
    let p: Vec<f64> = c[lo..=hi].iter().map(|v| v / c[hi]).collect();
    let n = p.len() - 1;
    let eval = |z: Complex<f64>| p.iter().rev().fold(Complex::new(0.0, 0.0), |acc, a| acc * z + a);
    let seed = Complex::new(0.4, 0.9);
    let mut z: Vec<Complex<f64>> = (0..n).map(|k| seed.powi(k as i32)).collect();
    for _ in 0..2000 {
        for i in 0..n {
            let denom: Complex<f64> = (0..n).filter(|&j| j != i).map(|j| z[i] - z[j]).product();
            let step = eval(z[i]) / denom;
            z[i] -= step;
        }
    }
    for r in &z {
        assert!(eval(*r).norm() < 1e-9, "unconverged root {r}");
    }
    z
}

#[test]
fn experiment_one_channels_share_no_nonzero_root() {
    for nr in [2, 3, 5, 8] {
        let mut spec = ExperimentSpec::new(ExperimentId::I, 1);
        spec.nr = nr;
        let e = make_experiment(&spec).unwrap();
        let roots: Vec<Vec<Complex<f64>>> = e.truth.channels().iter().map(|g| nonzero_roots(g.samples())).collect();
        for z in &roots[0] {
            let common = roots[1..].iter().all(|r| r.iter().any(|w| (z - w).norm() < 1e-6));
            assert!(!common, "nr={nr}: root {z} shared by every channel");
        }
    }
}

#[test]
fn root_finder_returns_roots() {
    let c = [0.0, 2.0, -3.0, 0.5, 1.0];
    for z in nonzero_roots(&c) {
        let v: Complex<f64> = c.iter().enumerate().map(|(t, a)| z.powi(t as i32) * a).sum();
        assert!(v.norm() < 1e-9);
    }
}

#[test]
fn experiment_four_interferograms_depend_only_on_the_delay() {
    let e = make_experiment(&ExperimentSpec::new(ExperimentId::IV, 2)).unwrap();
    let gij = build_interferograms(&e.truth, e.spec.tau).unwrap();
    let onset = |g: &Sequence| g.samples().iter().position(|v| *v != 0.0).unwrap() as isize;
    let auto = gij.entry(0, 0);
    for i in 0..e.spec.nr {
        for j in i..e.spec.nr {
            let lag = onset(e.truth.channel(j)) - onset(e.truth.channel(i));
            assert!(gij.entry(i, j).max_abs_diff(&auto.shifted(lag).window(-30, 30)) < 1e-14);
        }
    }
}

#[test]
fn every_experiment_is_reproducible_and_has_live_channels() {
    for id in [
        ExperimentId::I,
        ExperimentId::II,
        ExperimentId::III,
        ExperimentId::IV,
        ExperimentId::V,
        ExperimentId::VFront,
        ExperimentId::Layered,
    ] {
        let spec = ExperimentSpec::new(id, 3);
        let a = make_experiment(&spec).unwrap();
        let b = make_experiment(&spec).unwrap();
        assert_eq!(a.data, b.data);
        assert!(a.truth.channels().iter().all(|g| g.samples().iter().any(|v| *v != 0.0)));
    }
}

#[test]
fn random_estimates_score_near_zero() {
    let truth = make_experiment(&ExperimentSpec::new(ExperimentId::I, 1)).unwrap().truth;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..31).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let s = recovery_score(&ChannelSet::from_rows(rows).unwrap(), &truth).unwrap();
        assert!(s.abs() < 0.2, "score {s}");
    }
}
