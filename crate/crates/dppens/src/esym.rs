//! Elementary symmetric polynomials over non-negative spectra.
//!
//! The table is the triangular dynamic program
//! `E[j][r] = e_r(lambda_1..lambda_j) = E[j-1][r] + lambda_j * E[j-1][r-1]`,
//! whose addends are all non-negative, so no cancellation occurs. Values
//! span far more orders of magnitude than a machine float for spectra in
//! the thousands; every cell therefore carries its own power-of-two scale
//! exponent ([`Scaled`]), which keeps trace- and determinant-level queries
//! accurate across the whole table.

use crate::real::{real, Real};
use crate::{Error, Result};

/// A non-negative extended-range value `mantissa * 2^exponent`.
///
/// The mantissa is kept within a per-type window around one so that sums
/// and products of in-window values never overflow or underflow the
/// underlying float. Exponent arithmetic is exact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaled<T> {
    mantissa: T,
    exponent: i64,
}

/// Mantissa renormalization window, derived from the scalar's exponent range.
#[derive(Clone, Copy)]
struct Window<T> {
    hi: T,
    lo: T,
    exp: i64,
}

impl<T: Real> Window<T> {
    fn new() -> Self {
        let max = T::max_value()
            .and_then(|m| m.to_f64())
            .expect("bounded float type");
        let exp = (max.log2() / 4.0).floor() as i64;
        let hi = real::<T>(2.0).powi(exp as i32);
        Window {
            hi,
            lo: T::one() / hi,
            exp,
        }
    }
}

impl<T: Real> Scaled<T> {
    pub fn zero() -> Self {
        Scaled {
            mantissa: T::zero(),
            exponent: 0,
        }
    }

    pub fn one() -> Self {
        Scaled {
            mantissa: T::one(),
            exponent: 0,
        }
    }

    /// Wraps a plain non-negative value.
    pub fn from_value(x: T) -> Self {
        Scaled {
            mantissa: x,
            exponent: 0,
        }
        .normalized(&Window::new())
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa == T::zero()
    }

    fn normalized(mut self, w: &Window<T>) -> Self {
        if self.mantissa == T::zero() {
            self.exponent = 0;
            return self;
        }
        while self.mantissa.abs() >= w.hi {
            self.mantissa *= w.lo;
            self.exponent += w.exp;
        }
        while self.mantissa.abs() < w.lo {
            self.mantissa *= w.hi;
            self.exponent -= w.exp;
        }
        self
    }

    fn mul_w(&self, rhs: &Scaled<T>, w: &Window<T>) -> Self {
        Scaled {
            mantissa: self.mantissa * rhs.mantissa,
            exponent: self.exponent + rhs.exponent,
        }
        .normalized(w)
    }

    fn add_w(&self, rhs: &Scaled<T>, w: &Window<T>) -> Self {
        if self.is_zero() {
            return *rhs;
        }
        if rhs.is_zero() {
            return *self;
        }
        let (big, small) = if self.exponent >= rhs.exponent {
            (self, rhs)
        } else {
            (rhs, self)
        };
        let shift = small.exponent - big.exponent; // <= 0
        let scale = pow2::<T>(shift);
        Scaled {
            mantissa: big.mantissa + small.mantissa * scale,
            exponent: big.exponent,
        }
        .normalized(w)
    }

    /// `self - rhs`, clamped at zero. Used by the leave-one-out downward
    /// recurrence, whose exact result is always non-negative.
    fn sub_clamped_w(&self, rhs: &Scaled<T>, w: &Window<T>) -> Self {
        if rhs.is_zero() {
            return *self;
        }
        if self.is_zero() {
            return Scaled::zero();
        }
        let (m, e) = if self.exponent >= rhs.exponent {
            (
                self.mantissa - rhs.mantissa * pow2::<T>(rhs.exponent - self.exponent),
                self.exponent,
            )
        } else {
            (
                self.mantissa * pow2::<T>(self.exponent - rhs.exponent) - rhs.mantissa,
                rhs.exponent,
            )
        };
        if m <= T::zero() {
            return Scaled::zero();
        }
        Scaled {
            mantissa: m,
            exponent: e,
        }
        .normalized(w)
    }

    pub fn mul(&self, rhs: &Scaled<T>) -> Self {
        self.mul_w(rhs, &Window::new())
    }

    pub fn add(&self, rhs: &Scaled<T>) -> Self {
        self.add_w(rhs, &Window::new())
    }

    pub fn sub_clamped(&self, rhs: &Scaled<T>) -> Self {
        self.sub_clamped_w(rhs, &Window::new())
    }

    /// De-scales to a plain value; overflows to infinity (or underflows to
    /// zero) when the exponent exceeds the scalar's range.
    pub fn to_value(&self) -> T {
        self.mantissa * pow2::<T>(self.exponent)
    }

    /// `self / rhs` as a plain value; infinite when the magnitudes are too
    /// far apart to represent.
    pub fn ratio(&self, rhs: &Scaled<T>) -> T {
        if rhs.is_zero() {
            return if self.is_zero() {
                T::zero() / T::zero()
            } else {
                T::one() / T::zero()
            };
        }
        (self.mantissa / rhs.mantissa) * pow2::<T>(self.exponent - rhs.exponent)
    }

    /// Relative deviation `|self / rhs - 1|`; `rhs` must be nonzero unless
    /// both are zero.
    pub fn rel_diff(&self, rhs: &Scaled<T>) -> T {
        if self.is_zero() && rhs.is_zero() {
            return T::zero();
        }
        (self.ratio(rhs) - T::one()).abs()
    }

    /// Natural logarithm; negative infinity for zero.
    pub fn ln(&self) -> T {
        self.mantissa.ln() + real::<T>(self.exponent as f64) * real::<T>(std::f64::consts::LN_2)
    }
}

fn pow2<T: Real>(e: i64) -> T {
    let clamped = e.clamp(i32::MIN as i64, i32::MAX as i64) as i32;
    real::<T>(2.0).powi(clamped)
}

/// Triangular table of `e_r(lambda_1..lambda_j)` for `0 <= r <= min(j, max_degree)`.
#[derive(Debug, Clone)]
pub struct ElemSymTable<T: Real> {
    lambdas: Vec<T>,
    max_degree: usize,
    // row j holds degrees 0..=min(j, max_degree), rows j = 0..=n
    rows: Vec<Vec<Scaled<T>>>,
}

/// Builds the full table (all degrees up to `n`) for a non-negative spectrum.
pub fn elem_sym<T: Real>(lambdas: &[T]) -> Result<ElemSymTable<T>> {
    ElemSymTable::with_max_degree(lambdas, lambdas.len())
}

impl<T: Real> ElemSymTable<T> {
    /// Builds the table up to degree `max_degree` (inclusive); O(n * max_degree)
    /// time and space. Rejects negative or non-finite entries.
    pub fn with_max_degree(lambdas: &[T], max_degree: usize) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(Error::invalid("spectrum must be non-empty"));
        }
        for (i, &l) in lambdas.iter().enumerate() {
            if !crate::real::is_finite(l) || l < T::zero() {
                return Err(Error::invalid(format!(
                    "spectrum entry {i} must be finite and non-negative"
                )));
            }
        }
        let n = lambdas.len();
        let kmax = max_degree.min(n);
        let w = Window::<T>::new();
        let mut rows: Vec<Vec<Scaled<T>>> = Vec::with_capacity(n + 1);
        rows.push(vec![Scaled::one()]);
        for j in 1..=n {
            let lam = Scaled::from_value(lambdas[j - 1]);
            let top = j.min(kmax);
            let prev = &rows[j - 1];
            let mut row = Vec::with_capacity(top + 1);
            row.push(Scaled::one());
            for r in 1..=top {
                let keep = if r < prev.len() {
                    prev[r]
                } else {
                    Scaled::zero()
                };
                let take = lam.mul_w(&prev[r - 1], &w);
                row.push(keep.add_w(&take, &w));
            }
            rows.push(row);
        }
        Ok(ElemSymTable {
            lambdas: lambdas.to_vec(),
            max_degree: kmax,
            rows,
        })
    }

    pub fn n(&self) -> usize {
        self.lambdas.len()
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn lambdas(&self) -> &[T] {
        &self.lambdas
    }

    /// `e_r(lambda_1..lambda_j)`; zero when `r > j`.
    ///
    /// Panics if `r > max_degree` or `j > n` (a programming error).
    pub fn cell(&self, j: usize, r: usize) -> Scaled<T> {
        assert!(
            r <= self.max_degree && j <= self.n(),
            "cell ({j}, {r}) outside table (n = {}, max_degree = {})",
            self.n(),
            self.max_degree
        );
        if r >= self.rows[j].len() {
            Scaled::zero()
        } else {
            self.rows[j][r]
        }
    }

    /// `e_r` of the whole spectrum.
    pub fn e(&self, r: usize) -> Scaled<T> {
        self.cell(self.n(), r)
    }

    /// `e_r` of the spectrum with entry `exclude` deleted, as a scaled value.
    ///
    /// Uses the O(r) downward recurrence
    /// `e_r(hat) = e_r(lambda) - lambda_x * e_{r-1}(hat)` while the
    /// subtracted share stays at or below 0.99 of the total and the
    /// accumulated error amplification stays small; otherwise rebuilds the
    /// table without the excluded entry at O(n * r). The amplification
    /// bound matters because per-step shares compound: a run of steps each
    /// cancelling 90% multiplies the inherited relative error by ~9 every
    /// step, which a per-step cap alone would wave through.
    pub fn elem_sym_loo_scaled(&self, exclude: usize, r: usize) -> Result<Scaled<T>> {
        let n = self.n();
        if exclude >= n {
            return Err(Error::invalid(format!(
                "exclude index {exclude} out of range for n = {n}"
            )));
        }
        if r + 1 > n || r > self.max_degree {
            return Err(Error::invalid(format!(
                "degree {r} out of range for leave-one-out over n = {n} (max_degree = {})",
                self.max_degree
            )));
        }
        let w = Window::<T>::new();
        let lam = Scaled::from_value(self.lambdas[exclude]);
        let threshold = 0.99f64;
        // Relative-error amplification in units of machine epsilon:
        // amp_r <= (1 + 2g) + g * amp_{r-1} with g = share / (1 - share).
        let max_amp = 1e4f64;
        let mut amp = 0.0f64;
        let mut prev = Scaled::one(); // e_0(hat)
        for rr in 1..=r {
            let take = lam.mul_w(&prev, &w);
            let total = self.e(rr);
            let share = take.ratio(&total).to_f64().unwrap_or(f64::NAN);
            // NaN share must also fall through to the rebuild.
            if share.is_nan() || share > threshold {
                return Ok(self.rebuild_loo(exclude, r, &w));
            }
            let g = share.max(0.0) / (1.0 - share.max(0.0));
            amp = (1.0 + 2.0 * g) + g * amp;
            if amp > max_amp {
                return Ok(self.rebuild_loo(exclude, r, &w));
            }
            prev = total.sub_clamped_w(&take, &w);
        }
        Ok(prev)
    }

    /// Plain-value variant of [`Self::elem_sym_loo_scaled`]; may overflow to
    /// infinity for spectra whose polynomials exceed the scalar's range.
    pub fn elem_sym_loo(&self, exclude: usize, r: usize) -> Result<T> {
        Ok(self.elem_sym_loo_scaled(exclude, r)?.to_value())
    }

    /// The ratio `e_k(hat) / e_{k-1}(hat)` for the spectrum with `exclude`
    /// deleted; `k = n` yields zero since `e_n` of an (n-1)-vector vanishes.
    pub fn loo_ratio(&self, exclude: usize, k: usize) -> Result<T> {
        let n = self.n();
        if k == 0 || k > n {
            return Err(Error::invalid(format!(
                "ratio degree k = {k} out of range 1..={n}"
            )));
        }
        if k == n {
            return Ok(T::zero());
        }
        let num = self.elem_sym_loo_scaled(exclude, k)?;
        let den = self.elem_sym_loo_scaled(exclude, k - 1)?;
        Ok(num.ratio(&den))
    }

    fn rebuild_loo(&self, exclude: usize, r: usize, w: &Window<T>) -> Scaled<T> {
        let mut row = vec![Scaled::<T>::zero(); r + 1];
        row[0] = Scaled::one();
        let mut seen = 0usize;
        for (i, &l) in self.lambdas.iter().enumerate() {
            if i == exclude {
                continue;
            }
            seen += 1;
            let lam = Scaled::from_value(l);
            let top = r.min(seen);
            for rr in (1..=top).rev() {
                row[rr] = row[rr].add_w(&lam.mul_w(&row[rr - 1], w), w);
            }
        }
        row[r]
    }
}
