//! Subset samplers over the rows of a kernel matrix.
//!
//! Four schemes with increasing diversity: uniform, sequential
//! RLS-proportional, the exact L-ensemble DPP with `L = K / alpha`, and the
//! exact fixed-size kDPP. The determinantal schemes run the classical
//! spectral two-phase algorithm: an eigenindex selection phase followed by
//! the projection-DPP elimination phase shared by both.

use nalgebra::DMatrix;
use rand::Rng;

use crate::esym::{ElemSymTable, Scaled};
use crate::real::{real, Real};
use crate::rng::stream_rng;
use crate::spectrum::Spectrum;
use crate::subset::Subset;
use crate::{Error, Result};

/// Landmark selection scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SamplerScheme {
    Uniform,
    Rls,
    Dpp,
    Kdpp,
}

impl SamplerScheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            SamplerScheme::Uniform => "uniform",
            SamplerScheme::Rls => "rls",
            SamplerScheme::Dpp => "dpp",
            SamplerScheme::Kdpp => "kdpp",
        }
    }

    /// Whether the scheme needs an eigendecomposition of the kernel.
    pub fn needs_spectrum(&self) -> bool {
        !matches!(self, SamplerScheme::Uniform)
    }

    /// Whether the scheme returns exactly `k` indices.
    pub fn fixed_size(&self) -> bool {
        !matches!(self, SamplerScheme::Dpp)
    }
}

impl std::fmt::Display for SamplerScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SamplerScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" => Ok(SamplerScheme::Uniform),
            "rls" => Ok(SamplerScheme::Rls),
            "dpp" => Ok(SamplerScheme::Dpp),
            "kdpp" => Ok(SamplerScheme::Kdpp),
            other => Err(Error::invalid(format!(
                "unknown sampler scheme '{other}' (expected uniform, rls, dpp, or kdpp)"
            ))),
        }
    }
}

/// Scheme plus its parameters; `k` is ignored by the free-size DPP, `alpha`
/// by the uniform scheme, and `alpha` sets both the RLS regularizer and the
/// L-ensemble convention `L = K / alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig {
    pub scheme: SamplerScheme,
    pub k: usize,
    pub alpha: f64,
    pub seed: u64,
}

/// A sampler bound to its precomputed per-dataset state (leverage scores or
/// the symmetric-polynomial table), ready for repeated draws.
pub struct PreparedSampler<'a, T: Real> {
    config: SamplerConfig,
    n: usize,
    state: Prepared<'a, T>,
}

enum Prepared<'a, T: Real> {
    Uniform {
        k: usize,
    },
    Rls {
        scores: Vec<T>,
        k: usize,
    },
    Dpp {
        spectrum: &'a Spectrum<T>,
        alpha: T,
    },
    Kdpp {
        spectrum: &'a Spectrum<T>,
        table: ElemSymTable<T>,
        k: usize,
    },
}

impl<'a, T: Real> PreparedSampler<'a, T> {
    /// Binds `config` to a ground set of size `n`. Every scheme except
    /// uniform requires the kernel's spectrum.
    pub fn prepare(
        config: &SamplerConfig,
        n: usize,
        spectrum: Option<&'a Spectrum<T>>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("ground set must be non-empty"));
        }
        if let Some(s) = spectrum {
            if s.n() != n {
                return Err(Error::invalid(format!(
                    "spectrum is over {} points but the ground set has {n}",
                    s.n()
                )));
            }
        }
        let need = || -> Result<&'a Spectrum<T>> {
            spectrum.ok_or_else(|| {
                Error::invalid(format!(
                    "scheme {} requires the kernel spectrum",
                    config.scheme
                ))
            })
        };
        let fixed_k = |k: usize| -> Result<usize> {
            if k == 0 || k > n {
                return Err(Error::invalid(format!(
                    "subset size k = {k} out of range 1..={n}"
                )));
            }
            Ok(k)
        };
        let alpha = |a: f64| -> Result<T> {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::invalid(format!(
                    "alpha = {a} must be positive and finite"
                )));
            }
            Ok(real::<T>(a))
        };
        let state = match config.scheme {
            SamplerScheme::Uniform => Prepared::Uniform {
                k: fixed_k(config.k)?,
            },
            SamplerScheme::Rls => {
                let s = need()?;
                let scores = s.ridge_leverage_scores(alpha(config.alpha)?)?;
                Prepared::Rls {
                    scores: scores.as_slice().to_vec(),
                    k: fixed_k(config.k)?,
                }
            }
            SamplerScheme::Dpp => Prepared::Dpp {
                spectrum: need()?,
                alpha: alpha(config.alpha)?,
            },
            SamplerScheme::Kdpp => {
                let s = need()?;
                let k = fixed_k(config.k)?;
                let table = ElemSymTable::with_max_degree(s.eigenvalues().as_slice(), k)?;
                Prepared::Kdpp {
                    spectrum: s,
                    table,
                    k,
                }
            }
        };
        Ok(PreparedSampler {
            config: *config,
            n,
            state,
        })
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn draw<R: Rng>(&self, rng: &mut R) -> Result<Subset> {
        match &self.state {
            Prepared::Uniform { k } => sample_uniform(self.n, *k, rng),
            Prepared::Rls { scores, k } => sample_rls(scores, *k, rng),
            Prepared::Dpp { spectrum, alpha } => sample_dpp(spectrum, *alpha, rng),
            Prepared::Kdpp { spectrum, table, k } => sample_kdpp(spectrum, table, *k, rng),
        }
    }

    /// Draws from the stream addressed by `path` under the config's seed.
    pub fn draw_stream(&self, path: &[u64]) -> Result<Subset> {
        let mut rng = stream_rng(self.config.seed, path);
        self.draw(&mut rng)
    }
}

/// Uniform k-subset of `{0, .., n-1}`.
pub fn sample_uniform<R: Rng>(n: usize, k: usize, rng: &mut R) -> Result<Subset> {
    if k == 0 || k > n {
        return Err(Error::invalid(format!(
            "subset size k = {k} out of range 1..={n}"
        )));
    }
    let indices = rand::seq::index::sample(rng, n, k).into_vec();
    Subset::new(indices, n)
}

/// Sequential without-replacement draw of `k` indices, each round picking
/// index `i` with probability proportional to its remaining score.
pub fn sample_rls<T: Real, R: Rng>(scores: &[T], k: usize, rng: &mut R) -> Result<Subset> {
    let n = scores.len();
    if k == 0 || k > n {
        return Err(Error::invalid(format!(
            "subset size k = {k} out of range 1..={n}"
        )));
    }
    let mut weights = Vec::with_capacity(n);
    for (i, &s) in scores.iter().enumerate() {
        let w = s.to_f64().unwrap_or(f64::NAN);
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::invalid(format!(
                "score {i} must be strictly positive and finite"
            )));
        }
        weights.push(w);
    }
    let mut picked = Vec::with_capacity(k);
    for _ in 0..k {
        let total: f64 = weights.iter().sum();
        let target = rng.random::<f64>() * total;
        let mut cum = 0.0;
        let mut chosen = None;
        let mut last_positive = None;
        for (i, &w) in weights.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            last_positive = Some(i);
            cum += w;
            if cum > target {
                chosen = Some(i);
                break;
            }
        }
        // float tail: cumulative sum can fall short of total
        let i = chosen
            .or(last_positive)
            .expect("at least n - k + 1 positive weights remain");
        picked.push(i);
        weights[i] = 0.0;
    }
    Subset::new(picked, n)
}

/// Exact draw from the L-ensemble with `L = K / alpha`: eigenindex `l` joins
/// the projection phase independently with probability
/// `lambda_l / (lambda_l + alpha)`. The empty subset is a legal output.
pub fn sample_dpp<T: Real, R: Rng>(
    spectrum: &Spectrum<T>,
    alpha: T,
    rng: &mut R,
) -> Result<Subset> {
    let a = alpha.to_f64().unwrap_or(f64::NAN);
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::invalid("alpha must be positive and finite"));
    }
    let mut selected = Vec::new();
    for (l, &lam) in spectrum.eigenvalues().iter().enumerate() {
        let lf = lam.to_f64().unwrap_or(f64::NAN);
        let p = lf / (lf + a);
        if rng.random::<f64>() < p {
            selected.push(l);
        }
    }
    if selected.is_empty() {
        return Ok(Subset::empty(spectrum.n()));
    }
    let basis = spectrum.eigenvectors().select_columns(selected.iter());
    projection_dpp_phase(&basis, rng)
}

/// Exact draw from the kDPP over `K`: choose exactly `k` eigenindices by the
/// backward walk over the symmetric-polynomial table, then run the
/// projection phase. `table` must be built over the spectrum's eigenvalues
/// (same order) up to degree `k` at least.
pub fn sample_kdpp<T: Real, R: Rng>(
    spectrum: &Spectrum<T>,
    table: &ElemSymTable<T>,
    k: usize,
    rng: &mut R,
) -> Result<Subset> {
    let n = spectrum.n();
    if k == 0 || k > n {
        return Err(Error::invalid(format!(
            "subset size k = {k} out of range 1..={n}"
        )));
    }
    if table.n() != n || table.max_degree() < k {
        return Err(Error::invalid(
            "symmetric-polynomial table does not cover the spectrum at degree k",
        ));
    }
    for (l, (&a, &b)) in spectrum
        .eigenvalues()
        .iter()
        .zip(table.lambdas().iter())
        .enumerate()
    {
        let (af, bf) = (
            a.to_f64().unwrap_or(f64::NAN),
            b.to_f64().unwrap_or(f64::NAN),
        );
        if (af - bf).abs() > 1e-9 * af.abs().max(bf.abs()).max(1.0) {
            return Err(Error::invalid(format!(
                "table eigenvalue {l} disagrees with the spectrum"
            )));
        }
    }
    // Backward walk: with j eigenvalues left and r still to pick, include
    // eigenindex j-1 with probability lambda_j * E[j-1][r-1] / E[j][r].
    let mut selected = Vec::with_capacity(k);
    let mut r = k;
    for j in (1..=n).rev() {
        if r == 0 {
            break;
        }
        let lam = Scaled::from_value(spectrum.eigenvalues()[j - 1]);
        let take = table.cell(j - 1, r - 1).mul(&lam);
        let total = table.cell(j, r);
        let p = take.ratio(&total).to_f64().unwrap_or(f64::NAN);
        if !(0.0..=1.0 + 1e-9).contains(&p) {
            return Err(Error::DegenerateSampling { step: j, mass: p });
        }
        if rng.random::<f64>() < p {
            selected.push(j - 1);
            r -= 1;
        }
    }
    if r > 0 {
        return Err(Error::DegenerateSampling { step: 0, mass: 0.0 });
    }
    selected.reverse();
    let basis = spectrum.eigenvectors().select_columns(selected.iter());
    projection_dpp_phase(&basis, rng)
}

/// Samples the projection DPP spanned by `r` orthonormal columns: exactly
/// `r` indices, index `i` entering at step `t` with probability equal to its
/// squared remaining row norm over `r - t`. After each pick the basis is
/// rotated so the chosen row's direction occupies one column, and that
/// column is dropped.
pub fn projection_dpp_phase<T: Real, R: Rng>(vectors: &DMatrix<T>, rng: &mut R) -> Result<Subset> {
    let n = vectors.nrows();
    let r = vectors.ncols();
    if r > n {
        return Err(Error::invalid(format!(
            "{r} basis columns exceed the ground set of size {n}"
        )));
    }
    if r == 0 {
        return Ok(Subset::empty(n));
    }
    check_orthonormal(vectors)?;

    let mut v = vectors.clone();
    let mut rho: Vec<T> = (0..n).map(|i| v.row(i).norm_squared()).collect();
    let mut taken = vec![false; n];
    let mut out = Vec::with_capacity(r);
    let two = real::<T>(2.0);

    for step in 0..r {
        let mut total = 0.0;
        for (i, &m) in rho.iter().enumerate() {
            if !taken[i] {
                total += m.to_f64().unwrap_or(0.0).max(0.0);
            }
        }
        if total < 1e-9 {
            return Err(Error::DegenerateSampling { step, mass: total });
        }
        let target = rng.random::<f64>() * total;
        let mut cum = 0.0;
        let mut chosen = None;
        let mut last_positive = None;
        for (i, &m) in rho.iter().enumerate() {
            if taken[i] {
                continue;
            }
            let mf = m.to_f64().unwrap_or(0.0);
            if mf <= 0.0 {
                continue;
            }
            last_positive = Some(i);
            cum += mf;
            if cum > target {
                chosen = Some(i);
                break;
            }
        }
        let i = match chosen.or(last_positive) {
            Some(i) => i,
            None => return Err(Error::DegenerateSampling { step, mass: total }),
        };
        out.push(i);
        taken[i] = true;

        if step + 1 == r {
            break;
        }

        // Rotate the chosen row's direction into one column and drop it,
        // leaving an orthonormal basis of the conditioned projection.
        let row = v.row(i).clone_owned();
        let beta_sq = row.norm_squared();
        if beta_sq.to_f64().unwrap_or(0.0) < 1e-18 {
            return Err(Error::DegenerateSampling {
                step,
                mass: beta_sq.to_f64().unwrap_or(0.0),
            });
        }
        let beta = beta_sq.sqrt();
        let mut c = 0;
        for j in 1..row.len() {
            if row[j].abs() > row[c].abs() {
                c = j;
            }
        }
        let mut w = row;
        let sign = if w[c] >= T::zero() {
            T::one()
        } else {
            -T::one()
        };
        w[c] += sign * beta;
        let denom = w.norm_squared();
        if denom > T::zero() {
            let u = &v * w.transpose();
            v -= u * w * (two / denom);
        }
        for (j, m) in rho.iter_mut().enumerate() {
            if !taken[j] {
                let e = v[(j, c)];
                *m -= e * e;
                if *m < T::zero() {
                    *m = T::zero();
                }
            }
        }
        rho[i] = T::zero();
        v = v.remove_column(c);
    }
    Subset::new(out, n)
}

fn check_orthonormal<T: Real>(vectors: &DMatrix<T>) -> Result<()> {
    // the window widens with the scalar's epsilon so single precision
    // remains usable at larger n
    let eps = T::default_epsilon().to_f64().unwrap_or(f64::EPSILON);
    let tol = real::<T>((16.0 * vectors.nrows() as f64 * eps).max(1e-8));
    let gram = vectors.transpose() * vectors;
    for a in 0..gram.nrows() {
        for b in 0..gram.ncols() {
            let want = if a == b { T::one() } else { T::zero() };
            if (gram[(a, b)] - want).abs() > tol {
                return Err(Error::invalid(
                    "basis columns are not orthonormal within tolerance",
                ));
            }
        }
    }
    Ok(())
}
