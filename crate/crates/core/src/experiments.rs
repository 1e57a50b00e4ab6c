//! Monte Carlo harness for the risk orders of the contrast estimators.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::demix::MixingMatrix;
use crate::estimators::estimate;
use crate::wavelet::ScalingTable;
use crate::{Error, EstimatorKind, Result, Sample, WaveletSpec};

pub type Rational = Ratio<i64>;

/// Marginal law of one latent source, supported in `[0,1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceKind {
    Uniform,
    /// Equal-weight mixture of the uniforms on `[0,0.4]` and `[0.6,1]`.
    BimodalMix,
    /// Symmetric triangular density on `[0,1]` with mode `1/2`.
    Triangular,
}

impl SourceKind {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            SourceKind::Uniform => rng.gen::<f64>(),
            SourceKind::BimodalMix => {
                let u = rng.gen::<f64>() * 0.4;
                if rng.gen::<bool>() {
                    u
                } else {
                    0.6 + u
                }
            }
            SourceKind::Triangular => 0.5 * (rng.gen::<f64>() + rng.gen::<f64>()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SourceKind::Uniform => "uniform",
            SourceKind::BimodalMix => "bimodal",
            SourceKind::Triangular => "triangular",
        }
    }
}

impl FromStr for SourceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(SourceKind::Uniform),
            "bimodal" => Ok(SourceKind::BimodalMix),
            "triangular" => Ok(SourceKind::Triangular),
            other => Err(Error::InvalidArgument(format!("unknown source '{other}'"))),
        }
    }
}

/// Independent latent sources, one law per axis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceSpec {
    pub axes: Vec<SourceKind>,
}

impl SourceSpec {
    pub fn iid(kind: SourceKind, d: usize) -> Self {
        Self {
            axes: vec![kind; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }
}

/// Observed sample with the affine map that brought `A s` into `[0,1]^d`:
/// `x = scale * (A s) + shift`, coordinatewise.
#[derive(Debug, Clone)]
pub struct MixedSample {
    pub sample: Sample,
    pub scale: Vec<f64>,
    pub shift: Vec<f64>,
}

impl MixedSample {
    /// `diag(scale) A`, the linear part of the map from sources to observations.
    pub fn effective_mixing(&self, mixing: &MixingMatrix) -> nalgebra::DMatrix<f64> {
        let mut m = mixing.matrix().clone();
        for (i, s) in self.scale.iter().enumerate() {
            m.row_mut(i).scale_mut(*s);
        }
        m
    }
}

/// Draws `n` source rows, mixes them by `A` and maps the image of the unit
/// cube under `A` affinely onto `[0,1]^d`. The map depends only on `A`, so
/// rows stay independent.
pub fn generate_mixed(
    source: &SourceSpec,
    mixing: &MixingMatrix,
    n: usize,
    seed: u64,
) -> Result<MixedSample> {
    let d = source.dim();
    if mixing.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: mixing.dim(),
        });
    }
    if n == 0 {
        return Err(Error::InvalidArgument("cannot generate an empty sample".into()));
    }
    let a = mixing.matrix();
    let mut scale = vec![1.0; d];
    let mut shift = vec![0.0; d];
    for i in 0..d {
        let lo: f64 = a.row(i).iter().map(|v| v.min(0.0)).sum();
        let hi: f64 = a.row(i).iter().map(|v| v.max(0.0)).sum();
        scale[i] = 1.0 / (hi - lo);
        shift[i] = -lo * scale[i];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = vec![0.0; d];
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        for (v, kind) in s.iter_mut().zip(&source.axes) {
            *v = kind.draw(&mut rng);
        }
        for i in 0..d {
            let x: f64 = (0..d).map(|j| a[(i, j)] * s[j]).sum();
            data.push((scale[i] * x + shift[i]).clamp(0.0, 1.0));
        }
    }
    Ok(MixedSample {
        sample: Sample::new(d, data)?,
        scale,
        shift,
    })
}

/// Seed of replicate `index` under `master`: a SplitMix64 step on
/// `master + (index + 1) * 0x9E3779B97F4A7C15`.
pub fn replicate_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add((index + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One Monte Carlo configuration.
#[derive(Debug, Clone)]
pub struct MonteCarlo {
    pub estimator: EstimatorKind,
    pub source: SourceSpec,
    pub mixing: MixingMatrix,
    pub spec: WaveletSpec,
    pub replicates: usize,
    pub seed: u64,
}

/// Mean and dispersion of replicated values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    /// Standard error of the mean.
    pub stderr: f64,
}

/// Mean and standard error of `values`, summed in index order.
pub fn summarize(values: &[f64]) -> Summary {
    let r = values.len() as f64;
    let mean = values.iter().sum::<f64>() / r;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1.0);
    Summary {
        mean,
        stderr: (var / r).sqrt(),
    }
}

impl MonteCarlo {
    /// Estimator values on `replicates` independent samples of size `n`.
    /// Replicates run in parallel; results are returned in replicate order.
    pub fn values(&self, table: &ScalingTable, n: usize) -> Result<Vec<f64>> {
        (0..self.replicates)
            .into_par_iter()
            .map(|r| {
                let seed = replicate_seed(self.seed ^ n as u64, r as u64);
                let mixed = generate_mixed(&self.source, &self.mixing, n, seed)?;
                estimate(self.estimator, &mixed.sample, self.spec, table).map(|e| e.value)
            })
            .collect()
    }

    /// Mean squared deviation from `target` and its standard error.
    pub fn mse(&self, table: &ScalingTable, n: usize, target: f64) -> Result<Summary> {
        if self.replicates < 2 {
            return Err(Error::InvalidArgument(
                "Monte Carlo needs at least 2 replicates".into(),
            ));
        }
        let sq: Vec<f64> = self
            .values(table, n)?
            .into_iter()
            .map(|v| (v - target).powi(2))
            .collect();
        Ok(summarize(&sq))
    }
}

/// Functional form of [`MonteCarlo::mse`].
#[allow(clippy::too_many_arguments)]
pub fn monte_carlo_mse(
    estimator: EstimatorKind,
    source: &SourceSpec,
    mixing: &MixingMatrix,
    spec: WaveletSpec,
    table: &ScalingTable,
    n: usize,
    replicates: usize,
    seed: u64,
    target: f64,
) -> Result<Summary> {
    MonteCarlo {
        estimator,
        source: source.clone(),
        mixing: mixing.clone(),
        spec,
        replicates,
        seed,
    }
    .mse(table, n, target)
}

/// Least-squares slope of `log(mse)` against `log(n)` with its standard error.
pub fn rate_slope(ns: &[usize], mses: &[f64]) -> Result<(f64, f64)> {
    if ns.len() != mses.len() {
        return Err(Error::DimensionMismatch {
            expected: ns.len(),
            got: mses.len(),
        });
    }
    if ns.len() < 3 {
        return Err(Error::InvalidArgument(
            "rate fit needs at least 3 sample sizes".into(),
        ));
    }
    if let Some(bad) = mses.iter().find(|m| !(**m > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "rate fit needs positive MSE, got {bad}"
        )));
    }
    let x: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let y: Vec<f64> = mses.iter().map(|m| m.ln()).collect();
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x
        .iter()
        .zip(&y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let stderr = (rss / (k - 2.0) / sxx).sqrt();
    Ok((slope, stderr))
}

/// Per-`n` MSE with the fitted log-log slope.
#[derive(Debug, Clone)]
pub struct RateReport {
    pub estimator: EstimatorKind,
    pub spec: WaveletSpec,
    pub n_grid: Vec<usize>,
    pub mse: Vec<Summary>,
    pub slope: f64,
    pub slope_stderr: f64,
}

/// MSE against `target` over a strictly increasing `n_grid`, then the slope.
pub fn rate_experiment(
    config: &MonteCarlo,
    table: &ScalingTable,
    n_grid: &[usize],
    target: f64,
) -> Result<RateReport> {
    if n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "n grid must be strictly increasing".into(),
        ));
    }
    let mse = n_grid
        .iter()
        .map(|&n| config.mse(table, n, target))
        .collect::<Result<Vec<_>>>()?;
    let means: Vec<f64> = mse.iter().map(|s| s.mean).collect();
    let (slope, slope_stderr) = rate_slope(n_grid, &means)?;
    Ok(RateReport {
        estimator: config.estimator,
        spec: config.spec,
        n_grid: n_grid.to_vec(),
        mse,
        slope,
        slope_stderr,
    })
}

/// Position of the resolution relative to the sample size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `2^{jd} < n`.
    SmallJ,
    /// `2^{jd} >= n`.
    LargeJ,
}

impl Regime {
    pub fn of(spec: WaveletSpec, d: usize, n: usize) -> Self {
        if (spec.level as f64 * d as f64).exp2() < n as f64 {
            Regime::SmallJ
        } else {
            Regime::LargeJ
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::SmallJ => "small-j",
            Regime::LargeJ => "large-j",
        })
    }
}

/// Exponent `e` of the convergence rate `n^e` at the optimal resolution for a
/// density of Besov smoothness `s` in dimension `d`.
pub fn theoretical_rate(
    estimator: EstimatorKind,
    s: Rational,
    d: usize,
    regime: Regime,
) -> Result<Rational> {
    if s <= Rational::from_integer(0) {
        return Err(Error::InvalidArgument(format!("smoothness must be positive, got {s}")));
    }
    if d == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    let one = Rational::from_integer(1);
    let four_s = s * 4;
    let d = Rational::from_integer(d as i64);
    match (estimator, regime) {
        (EstimatorKind::C2, Regime::LargeJ) => Err(Error::InoperableRegime),
        (EstimatorKind::C2, Regime::SmallJ) => Ok(-four_s / (four_s + d)),
        (EstimatorKind::D2Fast | EstimatorKind::D2Brute, Regime::SmallJ) => {
            Ok(-one + one / (one + four_s))
        }
        (EstimatorKind::Delta2 | EstimatorKind::G2 | EstimatorKind::F2, Regime::SmallJ) => Ok(-one),
        (
            EstimatorKind::D2Fast
            | EstimatorKind::D2Brute
            | EstimatorKind::Delta2
            | EstimatorKind::G2
            | EstimatorKind::F2,
            Regime::LargeJ,
        ) => Ok(-(s * 8) / (four_s + d)),
        (EstimatorKind::B2, _) => Err(Error::InvalidArgument(
            "no tabulated contrast rate for b2".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    #[test]
    fn rate_examples() {
        assert_eq!(
            theoretical_rate(EstimatorKind::C2, r(1, 1), 2, Regime::SmallJ).unwrap(),
            r(-2, 3)
        );
        assert_eq!(
            theoretical_rate(EstimatorKind::Delta2, r(1, 1), 2, Regime::SmallJ).unwrap(),
            r(-1, 1)
        );
        assert_eq!(
            theoretical_rate(EstimatorKind::D2Fast, r(1, 4), 1, Regime::SmallJ).unwrap(),
            r(-1, 2)
        );
        assert_eq!(
            theoretical_rate(EstimatorKind::C2, r(1, 1), 2, Regime::LargeJ).unwrap_err(),
            Error::InoperableRegime
        );
        assert!(theoretical_rate(EstimatorKind::C2, r(0, 1), 2, Regime::SmallJ).is_err());
        assert!(theoretical_rate(EstimatorKind::B2, r(1, 1), 2, Regime::SmallJ).is_err());
    }

    #[test]
    fn slopes() {
        let ns = [100, 200, 400];
        let m: Vec<f64> = ns.iter().map(|&n| (n as f64).powi(-2)).collect();
        let (s, _) = rate_slope(&ns, &m).unwrap();
        assert!((s + 2.0).abs() < 1e-12);
        let m: Vec<f64> = ns.iter().map(|&n| 3.5 / n as f64).collect();
        assert!((rate_slope(&ns, &m).unwrap().0 + 1.0).abs() < 1e-12);
        assert!(rate_slope(&ns[..2], &m[..2]).is_err());
        assert!(rate_slope(&ns, &[1.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn generator_contract() {
        let src = SourceSpec::iid(SourceKind::Uniform, 2);
        let id = MixingMatrix::identity(2);
        let a = generate_mixed(&src, &id, 100, 9).unwrap();
        let b = generate_mixed(&src, &id, 100, 9).unwrap();
        assert_eq!(a.sample, b.sample);
        assert_eq!(a.scale, vec![1.0, 1.0]);
        assert_eq!(a.shift, vec![0.0, 0.0]);
        assert!(generate_mixed(&src, &id, 0, 9).is_err());
        assert!(generate_mixed(&src, &MixingMatrix::identity(3), 10, 9).is_err());

        let rot = MixingMatrix::rotation_2d(0.5);
        let m = generate_mixed(&SourceSpec::iid(SourceKind::BimodalMix, 2), &rot, 500, 1).unwrap();
        assert!(m.sample.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn sources_in_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for kind in [SourceKind::Uniform, SourceKind::BimodalMix, SourceKind::Triangular] {
            for _ in 0..1000 {
                let v = kind.draw(&mut rng);
                assert!((0.0..=1.0).contains(&v));
                if kind == SourceKind::BimodalMix {
                    assert!(!(0.4..0.6).contains(&v));
                }
            }
        }
    }

    #[test]
    fn monte_carlo_is_deterministic() {
        let spec = WaveletSpec::haar(2);
        let table = spec.table().unwrap();
        let mc = MonteCarlo {
            estimator: EstimatorKind::C2,
            source: SourceSpec::iid(SourceKind::Uniform, 2),
            mixing: MixingMatrix::identity(2),
            spec,
            replicates: 16,
            seed: 7,
        };
        let a = mc.mse(&table, 200, 0.0).unwrap();
        let b = mc.mse(&table, 200, 0.0).unwrap();
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert!(a.mean > 0.0);
        let one = MonteCarlo {
            replicates: 1,
            ..mc
        };
        assert!(one.mse(&table, 200, 0.0).is_err());
    }

    #[test]
    fn seeds_differ() {
        let s: std::collections::HashSet<u64> = (0..1000).map(|i| replicate_seed(7, i)).collect();
        assert_eq!(s.len(), 1000);
    }
}
