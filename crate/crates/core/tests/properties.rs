use hdqcd::detect::{cusum_run, cusum_step, wlcusum_step, DetectorConfig, DetectorState, PlugIn};
use hdqcd::divergence::{kl_gaussian, l_infinity, GaussianParams};
use hdqcd::estimators::{apply_shrinkage, sample_covariance, DataWindow, ShrinkageRule};
use hdqcd::spectra::{eig_sym, empirical_stieltjes, esdf, PopulationSpectrum};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;

fn spd(p: usize, entries: &[f64]) -> DMatrix<f64> {
    let g = DMatrix::from_fn(p, p, |i, j| entries[i * p + j]);
    &g * g.transpose() / p as f64 + DMatrix::identity(p, p) * 0.1
}

fn symmetric(p: usize, entries: &[f64]) -> DMatrix<f64> {
    let g = DMatrix::from_fn(p, p, |i, j| entries[i * p + j]);
    (&g + g.transpose()) * 0.5
}

prop_compose! {
    fn gaussian(p: usize)(
        mean in prop::collection::vec(-2.0..2.0f64, p),
        entries in prop::collection::vec(-1.5..1.5f64, p * p),
    ) -> GaussianParams {
        GaussianParams::new(DVector::from_vec(mean), spd(p, &entries)).unwrap()
    }
}

prop_compose! {
    fn window(p: usize, n: usize)(entries in prop::collection::vec(-3.0..3.0f64, p * n)) -> DataWindow {
        DataWindow::new(DMatrix::from_vec(p, n, entries)).unwrap()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn esdf_is_a_distribution_function(
        eigs in prop::collection::vec(-5.0..5.0f64, 1..30),
        mut xs in prop::collection::vec(-6.0..6.0f64, 2..20),
    ) {
        xs.sort_by(f64::total_cmp);
        let f: Vec<f64> = xs.iter().map(|&x| esdf(&eigs, x)).collect();
        prop_assert!(f.iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert!(f.windows(2).all(|w| w[1] >= w[0]));
        prop_assert_eq!(esdf(&eigs, 6.0), 1.0);
    }

    #[test]
    fn stieltjes_maps_upper_half_plane_into_itself(
        eigs in prop::collection::vec(0.0..5.0f64, 1..30),
        re in -3.0..8.0f64,
        im in 1e-3..5.0f64,
    ) {
        let m = empirical_stieltjes(&eigs, Complex64::new(re, im)).unwrap();
        prop_assert!(m.im > 0.0);
        prop_assert!(m.norm() <= 1.0 / im * (1.0 + 1e-12));
    }

    #[test]
    fn eigendecomposition_reconstructs(p in 1usize..8, entries in prop::collection::vec(-4.0..4.0f64, 64)) {
        let a = symmetric(p, &entries[..p * p]);
        let d = eig_sym(&a).unwrap();
        prop_assert!(d.reconstruction_residual(&a) < 1e-10);
        prop_assert!(d.orthonormality_residual() < 1e-10);
        let e = d.eigenvalues();
        prop_assert!(e.as_slice().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn kl_is_nonnegative_and_zero_on_the_diagonal(a in gaussian(3), b in gaussian(3)) {
        prop_assert!(kl_gaussian(&a, &b).unwrap() >= 0.0);
        prop_assert!(kl_gaussian(&a, &a).unwrap().abs() < 1e-12);
    }

    #[test]
    fn excess_delay_increases_with_estimation_divergence(
        d_post in 0.01..20.0f64,
        f1 in 0.0..0.99f64,
        f2 in 0.0..0.99f64,
    ) {
        let (lo, hi) = if f1 < f2 { (f1, f2) } else { (f2, f1) };
        prop_assume!(hi - lo > 1e-9);
        let l1 = l_infinity(d_post, lo * d_post).unwrap();
        let l2 = l_infinity(d_post, hi * d_post).unwrap();
        prop_assert!(l2 > l1);
        let identity = l2 + 1.0 / d_post - 1.0 / (d_post - hi * d_post);
        prop_assert!(identity.abs() < 1e-9 * (1.0 / (d_post - hi * d_post)).max(1.0));
    }

    #[test]
    fn statistic_never_negative(llrs in prop::collection::vec(-10.0..10.0f64, 1..200)) {
        let mut y = 0.0;
        for l in llrs {
            y = cusum_step(y, l);
            prop_assert!(y >= 0.0);
        }
    }

    #[test]
    fn stopping_time_monotone_in_threshold(
        xs in prop::collection::vec(-2.0..3.0f64, 300),
        b1 in 0.0..10.0f64,
        b2 in 0.0..10.0f64,
    ) {
        let post = GaussianParams::new(DVector::from_vec(vec![1.0]), DMatrix::identity(1, 1)).unwrap();
        let stream: Vec<DVector<f64>> = xs.iter().map(|&x| DVector::from_vec(vec![x])).collect();
        let (lo, hi) = if b1 < b2 { (b1, b2) } else { (b2, b1) };
        let t_lo = cusum_run(stream.clone(), &post, &DetectorConfig::new(lo, 0, 300)).unwrap().time;
        let t_hi = cusum_run(stream, &post, &DetectorConfig::new(hi, 0, 300)).unwrap().time;
        prop_assert!(t_lo <= t_hi);
    }

    #[test]
    fn window_holds_the_most_recent_samples(
        n in 2usize..8,
        xs in prop::collection::vec(-3.0..3.0f64, 10..40),
    ) {
        let mut state = DetectorState::new(DetectorConfig::new(1e9, n, 1000)).unwrap();
        let est = PlugIn::lwise();
        for (k, &x) in xs.iter().enumerate() {
            let step = wlcusum_step(&mut state, DVector::from_vec(vec![x]), &est).unwrap();
            prop_assert_eq!(step.is_some(), k >= n);
            prop_assert_eq!(state.time(), k as u64 + 1);
            let held: Vec<f64> = state.window().map(|c| c[0]).collect();
            let start = (k + 1).saturating_sub(n);
            prop_assert_eq!(&held[..], &xs[start..=k]);
            prop_assert!(state.statistic() >= 0.0);
        }
    }

    #[test]
    fn lwise_is_spd_and_shares_the_sample_eigenbasis(w in window(4, 9)) {
        let s = sample_covariance(&w).unwrap();
        let rank = eig_sym(s.matrix()).unwrap().eigenvalues().iter().filter(|&&l| l > 1e-8).count();
        prop_assume!(rank == 4);
        let lw = apply_shrinkage(&w, &ShrinkageRule::lwise()).unwrap();
        prop_assert!(!lw.is_singular());
        prop_assert!(lw.shrunk_eigenvalues().unwrap().iter().all(|&v| v > 0.0));
        let comm = (lw.matrix() * s.matrix() - s.matrix() * lw.matrix()).norm();
        prop_assert!(comm < 1e-8 * (1.0 + s.matrix().norm() * lw.matrix().norm()));
    }

    #[test]
    fn spectrum_counts_sum_to_dimension(
        weights in prop::collection::vec(0.01..1.0f64, 1..5),
        p in 1usize..300,
    ) {
        let total: f64 = weights.iter().sum();
        let pairs: Vec<(f64, f64)> = weights.iter().enumerate().map(|(k, w)| (1.0 + k as f64, w / total)).collect();
        let h = PopulationSpectrum::from_pairs(&pairs).unwrap();
        prop_assert_eq!(h.counts(p).iter().sum::<usize>(), p);
        prop_assert_eq!(h.eigenvalues(p).len(), p);
    }

    #[test]
    fn serde_round_trips(
        b in 0.0..100.0f64,
        n in 2usize..100,
        knots in prop::collection::vec(0.1..10.0f64, 1..6),
    ) {
        let cfg = DetectorConfig::new(b, n, 1000);
        let back: DetectorConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        prop_assert_eq!(cfg, back);

        let table: Vec<(f64, f64)> = knots.iter().enumerate().map(|(k, &v)| (k as f64, v)).collect();
        let rule = ShrinkageRule::Table(hdqcd::estimators::PiecewiseLinear::new(table).unwrap());
        let back: ShrinkageRule = serde_json::from_str(&serde_json::to_string(&rule).unwrap()).unwrap();
        prop_assert_eq!(rule, back);

        let h = PopulationSpectrum::from_pairs(&[(0.5, 0.25), (b + 0.5, 0.75)]).unwrap();
        let back: PopulationSpectrum = serde_json::from_str(&serde_json::to_string(&h).unwrap()).unwrap();
        prop_assert_eq!(h, back);
    }
}
