//! Daubechies scaling functions.
//!
//! Filters are obtained by spectral factorization of the Daubechies
//! polynomial, then the scaling function is tabulated on a dyadic grid by the
//! cascade recursion `phi(x) = sqrt(2) * sum_k h_k phi(2x - k)` anchored at the
//! integer values (eigenvector of the two-scale matrix for eigenvalue 1).

use nalgebra::{Complex, DMatrix, DVector};
use std::f64::consts::SQRT_2;

use crate::{Error, Result};

pub const MAX_ORDER: usize = 8;
pub const DEFAULT_DEPTH: u32 = 12;
pub const MAX_LEVEL: u32 = 30;

/// Low-pass filter of the Daubechies wavelet D2N.
#[derive(Debug, Clone, PartialEq)]
pub struct DaubechiesFilter {
    order: usize,
    coeffs: Vec<f64>,
}

impl DaubechiesFilter {
    /// Number of vanishing moments `N`; the filter has `2N` taps.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Right end of the support `[0, 2N-1]` of the scaling function.
    pub fn support_len(&self) -> usize {
        2 * self.order - 1
    }

    pub fn is_haar(&self) -> bool {
        self.order == 1
    }

    /// `|sum h - sqrt 2|`.
    pub fn sum_residual(&self) -> f64 {
        (self.coeffs.iter().sum::<f64>() - SQRT_2).abs()
    }

    /// Max over shifts `m` of `|sum_k h_k h_{k+2m} - delta_{m0}|`.
    pub fn orthonormality_residual(&self) -> f64 {
        let h = &self.coeffs;
        (0..self.order)
            .map(|m| {
                let s: f64 = (0..h.len() - 2 * m).map(|k| h[k] * h[k + 2 * m]).sum();
                let target = if m == 0 { 1.0 } else { 0.0 };
                (s - target).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Max over `p < N` of `|sum_k (-1)^k k^p h_k|`.
    pub fn moment_residual(&self) -> f64 {
        (0..self.order)
            .map(|p| {
                self.coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, &h)| {
                        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                        sign * (k as f64).powi(p as i32) * h
                    })
                    .sum::<f64>()
                    .abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Builds the D2N filter for `order` in `1..=8`; order 1 is Haar.
pub fn make_filter(order: usize) -> Result<DaubechiesFilter> {
    if order == 0 || order > MAX_ORDER {
        return Err(Error::UnsupportedOrder(order));
    }
    if order == 1 {
        return Ok(DaubechiesFilter {
            order,
            coeffs: vec![1.0 / SQRT_2; 2],
        });
    }

    // P(y) = sum_{k<N} C(N-1+k, k) y^k, with y = sin^2(w/2).
    let n = order;
    let mut p = Vec::with_capacity(n);
    let mut binom = 1.0f64;
    for k in 0..n {
        if k > 0 {
            binom = binom * (n - 1 + k) as f64 / k as f64;
        }
        p.push(binom);
    }
    let y_roots = polynomial_roots(&p)?;

    // Each root y gives w^2 - (2 - 4y) w + 1 = 0 in w = 1/z; keep the root
    // outside the unit circle for the minimum-phase factor.
    let mut q = vec![Complex::new(1.0, 0.0)];
    let mut q_at_one = Complex::new(1.0, 0.0);
    for y in y_roots {
        let b = Complex::new(2.0, 0.0) - y * 4.0;
        let disc = (b * b - Complex::new(4.0, 0.0)).sqrt();
        let w1 = (b + disc) * 0.5;
        let w2 = (b - disc) * 0.5;
        let w = if w1.norm() >= w2.norm() { w1 } else { w2 };
        q = poly_mul(&q, &[-w, Complex::new(1.0, 0.0)]);
        q_at_one *= Complex::new(1.0, 0.0) - w;
    }
    let mut h = q;
    for _ in 0..n {
        h = poly_mul(&h, &[Complex::new(0.5, 0.0), Complex::new(0.5, 0.0)]);
    }
    let coeffs: Vec<f64> = h.iter().map(|c| (c / q_at_one).re * SQRT_2).collect();
    let mut filter = DaubechiesFilter { order, coeffs };
    polish_filter(&mut filter);
    Ok(filter)
}

fn poly_mul(a: &[Complex<f64>], b: &[Complex<f64>]) -> Vec<Complex<f64>> {
    let mut out = vec![Complex::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_eval(coeffs: &[f64], z: Complex<f64>) -> Complex<f64> {
    coeffs
        .iter()
        .rev()
        .fold(Complex::new(0.0, 0.0), |acc, &c| acc * z + c)
}

/// Roots of `sum_k coeffs[k] x^k` by Durand-Kerner followed by Newton steps.
fn polynomial_roots(coeffs: &[f64]) -> Result<Vec<Complex<f64>>> {
    let degree = coeffs.len() - 1;
    let lead = coeffs[degree];
    let monic: Vec<f64> = coeffs.iter().map(|c| c / lead).collect();
    let seed = Complex::new(0.4, 0.9);
    let mut roots: Vec<Complex<f64>> = (0..degree).map(|i| seed.powu(i as u32)).collect();
    for _ in 0..500 {
        let mut delta = 0.0f64;
        for i in 0..degree {
            let num = poly_eval(&monic, roots[i]);
            let den = (0..degree)
                .filter(|&k| k != i)
                .fold(Complex::new(1.0, 0.0), |acc, k| acc * (roots[i] - roots[k]));
            let step = num / den;
            roots[i] -= step;
            delta = delta.max(step.norm());
        }
        if delta < 1e-15 {
            break;
        }
    }
    let derivative: Vec<f64> = monic
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, c)| k as f64 * c)
        .collect();
    for r in roots.iter_mut() {
        for _ in 0..3 {
            let d = poly_eval(&derivative, *r);
            if d.norm() == 0.0 {
                break;
            }
            *r -= poly_eval(&monic, *r) / d;
        }
    }
    if roots.iter().any(|r| !r.re.is_finite() || !r.im.is_finite()) {
        return Err(Error::Construction("polynomial root finding diverged".into()));
    }
    Ok(roots)
}

/// Newton iterations on the defining system: orthonormality for shifts
/// `0..N` and vanishing moments `0..N`.
fn polish_filter(filter: &mut DaubechiesFilter) {
    let n = filter.order;
    let taps = 2 * n;
    let residual = |h: &[f64]| -> DVector<f64> {
        let mut r = DVector::zeros(taps);
        for m in 0..n {
            let s: f64 = (0..taps - 2 * m).map(|k| h[k] * h[k + 2 * m]).sum();
            r[m] = s - if m == 0 { 1.0 } else { 0.0 };
        }
        for p in 0..n {
            let scale = ((taps - 1) as f64).powi(p as i32);
            r[n + p] = h
                .iter()
                .enumerate()
                .map(|(k, &hk)| {
                    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                    sign * (k as f64).powi(p as i32) * hk
                })
                .sum::<f64>()
                / scale;
        }
        r
    };
    for _ in 0..4 {
        let h = filter.coeffs.clone();
        let r = residual(&h);
        let mut jac = DMatrix::zeros(taps, taps);
        for m in 0..n {
            for k in 0..taps - 2 * m {
                jac[(m, k)] += h[k + 2 * m];
                jac[(m, k + 2 * m)] += h[k];
            }
        }
        for p in 0..n {
            let scale = ((taps - 1) as f64).powi(p as i32);
            for k in 0..taps {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                jac[(n + p, k)] = sign * (k as f64).powi(p as i32) / scale;
            }
        }
        let Some(step) = jac.lu().solve(&r) else {
            return;
        };
        let candidate: Vec<f64> = h.iter().zip(step.iter()).map(|(a, s)| a - s).collect();
        if residual(&candidate).amax() <= r.amax() {
            filter.coeffs = candidate;
        } else {
            return;
        }
    }
}

/// Resolution parameters shared by every projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct WaveletSpec {
    pub order: usize,
    pub level: u32,
}

impl WaveletSpec {
    pub fn new(order: usize, level: u32) -> Result<Self> {
        if order == 0 || order > MAX_ORDER {
            return Err(Error::UnsupportedOrder(order));
        }
        if level > MAX_LEVEL {
            return Err(Error::InvalidArgument(format!(
                "level {level} exceeds maximum {MAX_LEVEL}"
            )));
        }
        Ok(Self { order, level })
    }

    pub fn haar(level: u32) -> Self {
        Self { order: 1, level }
    }

    /// Smallest translate whose support meets `[0,1]`.
    pub fn k_min(&self) -> i64 {
        2 - 2 * self.order as i64
    }

    /// Largest translate whose support meets `[0,1]`.
    pub fn k_max(&self) -> i64 {
        (1i64 << self.level) - 1
    }

    /// Number of translates per axis, `2^j + 2N - 2`.
    pub fn k_count(&self) -> usize {
        (self.k_max() - self.k_min() + 1) as usize
    }

    pub fn table(&self) -> Result<ScalingTable> {
        build_table(&make_filter(self.order)?, DEFAULT_DEPTH)
    }
}

/// Values of the scaling function on the grid `m 2^-depth` of `[0, 2N-1]`.
#[derive(Debug, Clone)]
pub struct ScalingTable {
    filter: DaubechiesFilter,
    depth: u32,
    values: Vec<f64>,
}

/// Translates `k_start..k_start+len` with their values at one point.
#[derive(Debug, Clone, Copy)]
pub struct PhiWindow {
    pub k_start: i64,
    pub len: usize,
    pub values: [f64; 2 * MAX_ORDER],
}

impl PhiWindow {
    /// Nonzero `(k, value)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.values[..self.len]
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(move |(i, v)| (self.k_start + i as i64, *v))
    }

    pub fn get(&self, k: i64) -> f64 {
        let off = k - self.k_start;
        if off < 0 || off as usize >= self.len {
            0.0
        } else {
            self.values[off as usize]
        }
    }
}

/// Tabulates the scaling function of `filter` at dyadic resolution `depth`.
pub fn build_table(filter: &DaubechiesFilter, depth: u32) -> Result<ScalingTable> {
    if depth > 24 {
        return Err(Error::InvalidArgument(format!("table depth {depth} too large")));
    }
    let h = filter.coeffs();
    let support = filter.support_len();
    let scale = 1usize << depth;
    let last = support * scale;
    let mut values = vec![0.0; last + 1];

    if filter.is_haar() {
        values[..scale].fill(1.0);
        return Ok(ScalingTable {
            filter: filter.clone(),
            depth,
            values,
        });
    }

    // Interior integers 1..=2N-2; phi vanishes at 0 and 2N-1.
    let interior = support - 1;
    let mut system = DMatrix::<f64>::zeros(interior, interior);
    for a in 0..interior {
        for b in 0..interior {
            let idx = 2 * (a as i64 + 1) - (b as i64 + 1);
            if (0..h.len() as i64).contains(&idx) {
                system[(a, b)] = SQRT_2 * h[idx as usize];
            }
        }
        system[(a, a)] -= 1.0;
    }
    let mut constrained = system.clone();
    constrained.row_mut(interior - 1).fill(1.0);
    let mut rhs = DVector::zeros(interior);
    rhs[interior - 1] = 1.0;
    let v = constrained
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Construction("singular two-scale system".into()))?;
    let eig_residual = (&system * &v).amax();
    if !eig_residual.is_finite() || eig_residual > 1e-10 {
        return Err(Error::Construction(format!(
            "no eigenvalue-1 eigenvector (residual {eig_residual:e})"
        )));
    }
    for (i, val) in v.iter().enumerate() {
        values[(i + 1) * scale] = *val;
    }

    for level in 1..=depth {
        let step = 1usize << (depth - level);
        let mut m = step;
        while m < last {
            let mut acc = 0.0;
            for (k, hk) in h.iter().enumerate() {
                let idx = 2 * m as i64 - (k * scale) as i64;
                if idx >= 0 && idx as usize <= last {
                    acc += hk * values[idx as usize];
                }
            }
            values[m] = SQRT_2 * acc;
            m += 2 * step;
        }
    }

    Ok(ScalingTable {
        filter: filter.clone(),
        depth,
        values,
    })
}

impl ScalingTable {
    pub fn filter(&self) -> &DaubechiesFilter {
        &self.filter
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn order(&self) -> usize {
        self.filter.order
    }

    /// Grid values, index `m` holding `phi(m 2^-depth)`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `phi(x)` snapped to the nearest grid point; zero off the support.
    pub fn phi(&self, x: f64) -> f64 {
        if self.filter.is_haar() {
            return if (0.0..1.0).contains(&x) { 1.0 } else { 0.0 };
        }
        let scaled = (x * (1u64 << self.depth) as f64).round();
        if scaled < 0.0 || scaled >= self.values.len() as f64 || scaled.is_nan() {
            0.0
        } else {
            self.values[scaled as usize]
        }
    }

    /// Max over grid points of depth `depth-1` of the refinement residual.
    pub fn refinement_residual(&self) -> f64 {
        let h = self.filter.coeffs();
        let scale = 1i64 << self.depth;
        let last = self.values.len() as i64 - 1;
        let mut worst = 0.0f64;
        let mut m = 0i64;
        while m <= last {
            let mut acc = 0.0;
            for (k, hk) in h.iter().enumerate() {
                let idx = 2 * m - k as i64 * scale;
                if (0..=last).contains(&idx) {
                    acc += hk * self.values[idx as usize];
                }
            }
            let direct = self.values[m as usize];
            // Haar is discontinuous at 1, where the half-open convention and
            // the recursion disagree.
            if !(self.filter.is_haar() && m == scale) {
                worst = worst.max((direct - SQRT_2 * acc).abs());
            }
            m += 2;
        }
        worst
    }

    /// Max over grid points of `|sum_k phi(x - k) - 1|`.
    pub fn partition_of_unity_residual(&self) -> f64 {
        let scale = 1usize << self.depth;
        (0..scale)
            .map(|r| {
                let s: f64 = (0..=self.filter.support_len())
                    .filter_map(|k| self.values.get(r + k * scale))
                    .sum();
                (s - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// `2^{j/2} phi(2^j x - k)`.
///
/// For Haar the indicator is evaluated exactly, with the cell at the right
/// edge of `[0,1]` closed so that `x = 1` falls in translate `2^j - 1`.
pub fn eval_phi_jk(table: &ScalingTable, level: u32, k: i64, x: f64) -> f64 {
    let u = (1u64 << level) as f64 * x - k as f64;
    let amplitude = dyadic_amplitude(level);
    if table.filter.is_haar() {
        return if haar_contains(u, x) { amplitude } else { 0.0 };
    }
    amplitude * table.phi(u)
}

fn haar_contains(u: f64, x: f64) -> bool {
    if x == 1.0 {
        u == 1.0
    } else {
        (0.0..1.0).contains(&u)
    }
}

/// `2^{e/2}`, exact whenever `e` is even.
pub fn dyadic_amplitude(e: u32) -> f64 {
    let half = (1u64 << (e / 2)) as f64;
    if e % 2 == 0 {
        half
    } else {
        half * SQRT_2
    }
}

/// Haar cell of `x` at `level`, with `x = 1` in the last cell.
pub fn haar_cell(level: u32, x: f64) -> i64 {
    let cells = 1i64 << level;
    ((cells as f64 * x).floor() as i64).min(cells - 1)
}

/// `2^{jd/2} Phi(2^j x - k)` for the tensor product scaling function.
pub fn eval_tensor_phi(table: &ScalingTable, level: u32, k: &[i64], x: &[f64]) -> Result<f64> {
    if k.len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: k.len(),
        });
    }
    if table.filter.is_haar() {
        let dilation = (1u64 << level) as f64;
        let inside = k
            .iter()
            .zip(x)
            .all(|(&kl, &xl)| haar_contains(dilation * xl - kl as f64, xl));
        let amplitude = dyadic_amplitude(level * k.len() as u32);
        return Ok(if inside { amplitude } else { 0.0 });
    }
    Ok(k
        .iter()
        .zip(x)
        .map(|(&kl, &xl)| eval_phi_jk(table, level, kl, xl))
        .product())
}

/// All translates whose support may contain `x`, with their values.
pub fn phi_window(table: &ScalingTable, level: u32, x: f64) -> PhiWindow {
    let len = table.filter.support_len() + 1;
    let top = ((1u64 << level) as f64 * x).floor() as i64;
    let k_start = top - len as i64 + 1;
    let mut values = [0.0; 2 * MAX_ORDER];
    for (i, v) in values.iter_mut().take(len).enumerate() {
        *v = eval_phi_jk(table, level, k_start + i as i64, x);
    }
    PhiWindow {
        k_start,
        len,
        values,
    }
}
