//! Distributional tests: empirical sampler frequencies against exact laws.
//!
//! Seeds are fixed so every run sees the same draw sequence; tolerances
//! carry explicit CLT slack on top of the exact probabilities.

use dppens::kernel::GramMatrix;
use dppens::oracle::{enumerate_dpp_law, enumerate_kdpp_law, random_pd};
use dppens::rng::stream_rng;
use dppens::sampler::{projection_dpp_phase, PreparedSampler, SamplerConfig, SamplerScheme};
use dppens::spectrum::eigendecompose;

use nalgebra::DMatrix;

fn total_variation(counts: &[usize], law: &[f64], draws: usize) -> f64 {
    counts
        .iter()
        .zip(law)
        .map(|(&c, &p)| (c as f64 / draws as f64 - p).abs())
        .sum::<f64>()
        / 2.0
}

#[test]
fn uniform_pairs_are_equally_likely() {
    let n = 6;
    let config = SamplerConfig {
        scheme: SamplerScheme::Uniform,
        k: 2,
        alpha: 1.0,
        seed: 0xA11CE,
    };
    let sampler = PreparedSampler::<f64>::prepare(&config, n, None).unwrap();
    let draws = 100_000;
    let mut counts = vec![0usize; 1 << n];
    for i in 0..draws {
        let subset = sampler.draw_stream(&[i as u64]).unwrap();
        counts[subset.mask() as usize] += 1;
    }
    let want = 1.0 / 15.0;
    let mut seen = 0;
    for (mask, &c) in counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        assert_eq!(mask.count_ones(), 2, "uniform sampler left size 2");
        seen += 1;
        let freq = c as f64 / draws as f64;
        assert!(
            (freq - want).abs() <= 0.01,
            "pair {mask:#b}: freq {freq} vs {want}"
        );
    }
    assert_eq!(seen, 15, "every pair should appear");
}

#[test]
fn rls_with_equal_scores_is_uniform_over_subsets() {
    let n = 5;
    let k = GramMatrix::from_symmetric(DMatrix::<f64>::identity(n, n)).unwrap();
    let spectrum = eigendecompose(&k, 0.0).unwrap();
    let config = SamplerConfig {
        scheme: SamplerScheme::Rls,
        k: 2,
        alpha: 1.0,
        seed: 0xB0B,
    };
    let sampler = PreparedSampler::prepare(&config, n, Some(&spectrum)).unwrap();
    let draws = 100_000;
    let mut counts = vec![0usize; 1 << n];
    for i in 0..draws {
        counts[sampler.draw_stream(&[i as u64]).unwrap().mask() as usize] += 1;
    }
    let mut law = vec![0.0; 1 << n];
    for (mask, slot) in law.iter_mut().enumerate() {
        if mask.count_ones() == 2 {
            *slot = 1.0 / 10.0;
        }
    }
    let tv = total_variation(&counts, &law, draws);
    assert!(tv < 0.02, "TV {tv}");
}

#[test]
fn rls_singleton_law_follows_scores() {
    // Scores (2, 1, 1) with k = 1: inclusion law (1/2, 1/4, 1/4).
    use dppens::sampler::sample_rls;
    let scores = [2.0, 1.0, 1.0];
    let draws = 100_000;
    let mut counts = [0usize; 3];
    for i in 0..draws {
        let mut rng = stream_rng(0xC0FFEE, &[i as u64]);
        let subset = sample_rls(&scores, 1, &mut rng).unwrap();
        counts[subset.indices()[0]] += 1;
    }
    let want = [0.5, 0.25, 0.25];
    for i in 0..3 {
        let freq = counts[i] as f64 / draws as f64;
        assert!(
            (freq - want[i]).abs() <= 0.01,
            "index {i}: freq {freq} vs {}",
            want[i]
        );
    }
}

#[test]
fn dpp_on_diagonal_kernel_is_independent_bernoulli() {
    let n = 4;
    let c = 2.0;
    let alpha = 1.5;
    let k = GramMatrix::from_symmetric(DMatrix::from_diagonal_element(n, n, c)).unwrap();
    let spectrum = eigendecompose(&k, 0.0).unwrap();
    let config = SamplerConfig {
        scheme: SamplerScheme::Dpp,
        k: 0,
        alpha,
        seed: 0xD1A6,
    };
    let sampler = PreparedSampler::prepare(&config, n, Some(&spectrum)).unwrap();
    let draws = 100_000;
    let mut inclusion = vec![0usize; n];
    for i in 0..draws {
        for &idx in sampler.draw_stream(&[i as u64]).unwrap().indices() {
            inclusion[idx] += 1;
        }
    }
    let want = c / (c + alpha);
    for (i, &count) in inclusion.iter().enumerate() {
        let freq = count as f64 / draws as f64;
        assert!(
            (freq - want).abs() <= 0.01,
            "coordinate {i}: freq {freq} vs {want}"
        );
    }
}

#[test]
fn dpp_inclusion_matches_marginal_diagonal() {
    let n = 8;
    let alpha = 1.0;
    let mut rng = stream_rng(0x5eed, &[1]);
    let k = random_pd::<f64, _>(n, &mut rng);
    let spectrum = eigendecompose(&k, 0.0).unwrap();
    let marginal = spectrum.marginal_kernel(alpha).unwrap();
    let config = SamplerConfig {
        scheme: SamplerScheme::Dpp,
        k: 0,
        alpha,
        seed: 0x11C1,
    };
    let sampler = PreparedSampler::prepare(&config, n, Some(&spectrum)).unwrap();
    let draws = 100_000usize;
    let mut inclusion = vec![0usize; n];
    let mut sizes = 0usize;
    let mut sizes_sq = 0.0f64;
    for i in 0..draws {
        let subset = sampler.draw_stream(&[i as u64]).unwrap();
        sizes += subset.len();
        sizes_sq += (subset.len() * subset.len()) as f64;
        for &idx in subset.indices() {
            inclusion[idx] += 1;
        }
    }
    for i in 0..n {
        let p = marginal[(i, i)];
        let freq = inclusion[i] as f64 / draws as f64;
        let band = 3.0 * (p * (1.0 - p) / draws as f64).sqrt() + 1e-3;
        assert!(
            (freq - p).abs() <= band,
            "coordinate {i}: freq {freq} vs P_ii {p} (band {band})"
        );
    }
    // Mean subset size sits within 3 standard errors of the marginal trace.
    let mean = sizes as f64 / draws as f64;
    let var = (sizes_sq / draws as f64 - mean * mean).max(0.0);
    let se = (var / draws as f64).sqrt();
    let want: f64 = (0..n).map(|i| marginal[(i, i)]).sum();
    assert!(
        (mean - want).abs() <= 3.0 * se + 1e-3,
        "size mean {mean} vs trace {want} (se {se})"
    );
}

#[test]
fn dpp_empirical_law_matches_enumeration() {
    let n = 6;
    let alpha = 1.0;
    let mut rng = stream_rng(0x5eed, &[2]);
    let k = random_pd::<f64, _>(n, &mut rng);
    let spectrum = eigendecompose(&k, 0.0).unwrap();
    let law = enumerate_dpp_law(&k, alpha).unwrap();
    let config = SamplerConfig {
        scheme: SamplerScheme::Dpp,
        k: 0,
        alpha,
        seed: 0x7A31,
    };
    let sampler = PreparedSampler::prepare(&config, n, Some(&spectrum)).unwrap();
    let draws = 200_000;
    let mut counts = vec![0usize; 1 << n];
    for i in 0..draws {
        counts[sampler.draw_stream(&[i as u64]).unwrap().mask() as usize] += 1;
    }
    let tv = total_variation(&counts, &law, draws);
    assert!(tv < 0.02, "TV {tv}");
}

#[test]
fn kdpp_empirical_law_matches_enumeration() {
    let n = 6;
    let kk = 3;
    let mut rng = stream_rng(0x5eed, &[3]);
    let k = random_pd::<f64, _>(n, &mut rng);
    let spectrum = eigendecompose(&k, 0.0).unwrap();
    let law = enumerate_kdpp_law(&k, kk).unwrap();
    let config = SamplerConfig {
        scheme: SamplerScheme::Kdpp,
        k: kk,
        alpha: 1.0,
        seed: 0x7A32,
    };
    let sampler = PreparedSampler::prepare(&config, n, Some(&spectrum)).unwrap();
    let draws = 200_000;
    let mut counts = vec![0usize; 1 << n];
    for i in 0..draws {
        let subset = sampler.draw_stream(&[i as u64]).unwrap();
        assert_eq!(subset.len(), kk);
        counts[subset.mask() as usize] += 1;
    }
    let tv = total_variation(&counts, &law, draws);
    assert!(tv < 0.02, "TV {tv}");
}

#[test]
fn kdpp_singletons_follow_diagonal_weights() {
    let n = 4;
    let mut rng = stream_rng(0x5eed, &[4]);
    let k = random_pd::<f64, _>(n, &mut rng);
    let spectrum = eigendecompose(&k, 0.0).unwrap();
    let config = SamplerConfig {
        scheme: SamplerScheme::Kdpp,
        k: 1,
        alpha: 1.0,
        seed: 0x51461,
    };
    let sampler = PreparedSampler::prepare(&config, n, Some(&spectrum)).unwrap();
    let draws = 100_000;
    let mut counts = vec![0usize; n];
    for i in 0..draws {
        counts[sampler.draw_stream(&[i as u64]).unwrap().indices()[0]] += 1;
    }
    let trace: f64 = (0..n).map(|i| k.entries()[(i, i)]).sum();
    for (i, &count) in counts.iter().enumerate() {
        let want = k.entries()[(i, i)] / trace;
        let freq = count as f64 / draws as f64;
        assert!(
            (freq - want).abs() <= 0.01,
            "singleton {i}: freq {freq} vs {want}"
        );
    }
}

#[test]
fn projection_phase_splits_a_balanced_mixture() {
    // One projection direction (e0 + e1)/sqrt(2): the sampled singleton is
    // {0} or {1} with probability 1/2 each.
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let vectors = DMatrix::from_column_slice(2, 1, &[s, s]);
    let draws = 100_000;
    let mut counts = [0usize; 2];
    for i in 0..draws {
        let mut rng = stream_rng(0x9906, &[i as u64]);
        let subset = projection_dpp_phase(&vectors, &mut rng).unwrap();
        counts[subset.indices()[0]] += 1;
    }
    for (i, &c) in counts.iter().enumerate() {
        let freq = c as f64 / draws as f64;
        assert!((freq - 0.5).abs() <= 0.01, "index {i}: freq {freq}");
    }
}
