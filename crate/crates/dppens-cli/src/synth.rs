//! Built-in synthetic benchmark: a dense Gaussian cluster plus a sparse
//! annulus in the plane, with a smooth nonlinear response. The contrast in
//! point density is what separates bulk from tail behaviour and what makes
//! diversity-seeking samplers visibly better than uniform ones.

use dppens::stream_rng;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::Dataset;
use crate::stream_tag;

pub const SYNTH_CLUSTER: usize = 350;
pub const SYNTH_ANNULUS: usize = 150;
pub const SYNTH_N: usize = SYNTH_CLUSTER + SYNTH_ANNULUS;

/// Default kernel bandwidth and subset size for the synthetic dataset
/// (applied to standardized features).
pub const SYNTH_SIGMA: f64 = 0.5;
pub const SYNTH_K: usize = 25;

/// Generates the 500-point benchmark: 350 points from N(0, 0.5^2 I_2) and
/// 150 spread uniformly (by area) over the annulus 2 <= r <= 6, labelled
///
/// `y = 2 + sin(x1) + 0.5 cos(2 x2) + 0.1 ||x|| + N(0, 0.05^2)`.
///
/// Deterministic in `seed`; cluster rows come first.
pub fn synth500(seed: u64) -> Dataset {
    let mut rng = stream_rng(seed, &[stream_tag::SYNTH]);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut features = DMatrix::zeros(SYNTH_N, 2);
    let mut labels = DVector::zeros(SYNTH_N);
    let mut place = |i: usize, x1: f64, x2: f64, rng: &mut dyn rand::RngCore| {
        let noise: f64 = Normal::new(0.0, 0.05).expect("label noise").sample(rng);
        features[(i, 0)] = x1;
        features[(i, 1)] = x2;
        labels[i] = 2.0 + x1.sin() + 0.5 * (2.0 * x2).cos() + 0.1 * x1.hypot(x2) + noise;
    };
    for i in 0..SYNTH_CLUSTER {
        let x1 = 0.5 * unit.sample(&mut rng);
        let x2 = 0.5 * unit.sample(&mut rng);
        place(i, x1, x2, &mut rng);
    }
    for i in 0..SYNTH_ANNULUS {
        // uniform by area: r^2 uniform on [4, 36]
        let r = (4.0 + 32.0 * rng.random::<f64>()).sqrt();
        let theta = std::f64::consts::TAU * rng.random::<f64>();
        place(
            SYNTH_CLUSTER + i,
            r * theta.cos(),
            r * theta.sin(),
            &mut rng,
        );
    }
    Dataset::new(features, Some(labels)).expect("synthetic data is finite")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_is_deterministic_in_the_seed() {
        let a = synth500(11);
        let b = synth500(11);
        let c = synth500(12);
        assert_eq!(a.features(), b.features());
        assert_eq!(a.labels().unwrap(), b.labels().unwrap());
        assert_ne!(a.features(), c.features());
    }

    #[test]
    fn annulus_rows_sit_in_the_stated_radius_band() {
        let ds = synth500(3);
        assert_eq!(ds.n(), SYNTH_N);
        assert_eq!(ds.d(), 2);
        for i in SYNTH_CLUSTER..SYNTH_N {
            let r = ds.features()[(i, 0)].hypot(ds.features()[(i, 1)]);
            assert!((2.0..=6.0).contains(&r), "annulus radius {r}");
        }
        // the cluster is visibly tighter than the annulus
        let cluster_max = (0..SYNTH_CLUSTER)
            .map(|i| ds.features()[(i, 0)].hypot(ds.features()[(i, 1)]))
            .fold(0.0f64, f64::max);
        assert!(cluster_max < 2.5, "cluster radius {cluster_max}");
    }

    #[test]
    fn labels_track_the_response_surface() {
        let ds = synth500(5);
        let x = ds.features();
        let y = ds.labels().unwrap();
        for i in 0..ds.n() {
            let clean = 2.0
                + x[(i, 0)].sin()
                + 0.5 * (2.0 * x[(i, 1)]).cos()
                + 0.1 * x[(i, 0)].hypot(x[(i, 1)]);
            assert!((y[i] - clean).abs() < 0.3, "noise beyond 6 sigma");
        }
    }
}
