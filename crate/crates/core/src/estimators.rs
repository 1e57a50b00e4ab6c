//! Estimators of the wavelet contrast `C_j^2 = sum_k (alpha_jk - lambda_jk)^2`.
//!
//! * [`c2_plugin`]: plug-in on the full sample.
//! * [`b2_ustat`]: U-statistic for `sum_k alpha_jk^2`.
//! * [`d2_brute`] / [`d2_fast`]: full-sample U-statistic of order `2d+2`, by
//!   literal enumeration and by Möbius inversion over set partitions.
//! * [`f2_mixed`]: plug-in mixed over `d+1` disjoint blocks.
//! * [`g2_mixed`] / [`delta2_ustat`]: two-sample estimators against a sample
//!   of the product of marginals, see [`build_product_sample`].

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use crate::combinatorics::{falling_factorial, set_partitions};
use crate::coordinates::{
    check_table, estimate_alpha, estimate_lambda, estimate_marginal_alpha, for_each_translate,
    product_map, KIndex,
};
use crate::wavelet::{haar_cell, phi_window, ScalingTable};
use crate::{Error, Result, Sample, WaveletSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorKind {
    C2,
    B2,
    D2Brute,
    D2Fast,
    F2,
    G2,
    Delta2,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 7] = [
        EstimatorKind::C2,
        EstimatorKind::B2,
        EstimatorKind::D2Brute,
        EstimatorKind::D2Fast,
        EstimatorKind::F2,
        EstimatorKind::G2,
        EstimatorKind::Delta2,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::C2 => "c2",
            EstimatorKind::B2 => "b2",
            EstimatorKind::D2Brute => "d2-brute",
            EstimatorKind::D2Fast => "d2",
            EstimatorKind::F2 => "f2",
            EstimatorKind::G2 => "g2",
            EstimatorKind::Delta2 => "delta2",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .find(|k| k.name() == s)
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("unknown estimator '{s}'")))
    }
}

/// Value of one estimator on one input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContrastEstimate {
    pub estimator: EstimatorKind,
    pub value: f64,
    pub spec: WaveletSpec,
    pub n_used: usize,
    pub d: usize,
}

/// Returns a message when `2^{jd} >= n^2`, where the estimators' risk no
/// longer goes to zero.
pub fn regime_warning(spec: WaveletSpec, d: usize, n: usize) -> Option<String> {
    let cells = (spec.level as f64 * d as f64).exp2();
    let n2 = (n as f64) * (n as f64);
    (cells >= n2).then(|| {
        format!(
            "2^(jd) = 2^{} >= n^2 = {n2}: estimator risk does not vanish at this resolution",
            spec.level as usize * d
        )
    })
}

fn warn_regime(spec: WaveletSpec, d: usize, n: usize) {
    if let Some(msg) = regime_warning(spec, d, n) {
        log::warn!("{msg}");
    }
}

fn require_len(sample: &Sample, needed: usize) -> Result<()> {
    if sample.len() < needed {
        return Err(Error::SampleTooSmall {
            needed,
            got: sample.len(),
        });
    }
    Ok(())
}

/// Plug-in estimator `sum_k (alpha_hat_jk - lambda_hat_jk)^2`.
pub fn c2_plugin(sample: &Sample, spec: WaveletSpec, table: &ScalingTable) -> Result<ContrastEstimate> {
    warn_regime(spec, sample.dim(), sample.len());
    check_table(spec, table)?;
    require_len(sample, 1)?;
    let value = match haar_c2_exact(sample, spec) {
        Some(v) => v,
        None => {
            let alpha = estimate_alpha(sample, spec, table)?;
            let lambda = estimate_lambda(sample, spec, table)?;
            alpha.squared_distance(&lambda)
        }
    };
    Ok(ContrastEstimate {
        estimator: EstimatorKind::C2,
        value,
        spec,
        n_used: sample.len(),
        d: sample.dim(),
    })
}

/// Haar plug-in from integer cell counts. With joint counts `c_k` and marginal
/// counts `m_l`, `n^{2d} 2^{-jd} C^2 = sum_k (n^{d-1} c_k - prod_l m_l(k_l))^2`,
/// expanded so that only occupied joint cells are visited. The integer part
/// is exact; `None` when the counts overflow `i128` or the wavelet is not Haar.
fn haar_c2_exact(sample: &Sample, spec: WaveletSpec) -> Option<f64> {
    if spec.order != 1 {
        return None;
    }
    let n = sample.len() as i128;
    let d = sample.dim();
    let mut joint: BTreeMap<KIndex, i128> = BTreeMap::new();
    let mut marginal: Vec<BTreeMap<i64, i128>> = vec![BTreeMap::new(); d];
    for row in sample.rows() {
        let k: KIndex = row.iter().map(|&x| haar_cell(spec.level, x)).collect();
        for (m, &c) in marginal.iter_mut().zip(&k) {
            *m.entry(c).or_insert(0) += 1;
        }
        *joint.entry(k).or_insert(0) += 1;
    }
    let pow = |base: i128, e: usize| (0..e).try_fold(1i128, |acc, _| acc.checked_mul(base));
    let nd1 = pow(n, d - 1)?;
    let mut joint_sq = 0i128;
    let mut cross = 0i128;
    for (k, &c) in &joint {
        let prod = k
            .iter()
            .zip(&marginal)
            .try_fold(1i128, |acc, (cell, m)| acc.checked_mul(m[cell]))?;
        joint_sq = joint_sq.checked_add(c.checked_mul(c)?)?;
        cross = cross.checked_add(c.checked_mul(prod)?)?;
    }
    let product_sq = marginal.iter().try_fold(1i128, |acc, m| {
        acc.checked_mul(m.values().map(|c| c * c).sum::<i128>())
    })?;
    let total = nd1
        .checked_mul(nd1)?
        .checked_mul(joint_sq)?
        .checked_sub(nd1.checked_mul(cross)?.checked_mul(2)?)?
        .checked_add(product_sq)?;
    let denom = pow(n, 2 * d)?;
    let cells = (spec.level as i32).checked_mul(d as i32)?;
    Some(total as f64 / denom as f64 * 2f64.powi(cells))
}

/// U-statistic `(1/A_n^2) sum_{i1 != i2} sum_k Phi_jk(X_i1) Phi_jk(X_i2)`,
/// computed from per-translate totals and sums of squares.
pub fn b2_ustat(points: &Sample, spec: WaveletSpec, table: &ScalingTable) -> Result<ContrastEstimate> {
    check_table(spec, table)?;
    require_len(points, 2)?;
    let n = points.len();
    let mut acc: BTreeMap<KIndex, (f64, f64)> = BTreeMap::new();
    for row in points.rows() {
        for_each_translate(table, spec.level, row, |k, v| {
            if let Some(e) = acc.get_mut(k) {
                e.0 += v;
                e.1 += v * v;
            } else {
                acc.insert(k.to_vec(), (v, v * v));
            }
        });
    }
    let total: f64 = acc.values().map(|(t, q)| t * t - q).sum();
    Ok(ContrastEstimate {
        estimator: EstimatorKind::B2,
        value: total / (n as f64 * (n - 1) as f64),
        spec,
        n_used: n,
        d: points.dim(),
    })
}

/// Dense indexing of the translates `[2-2N, 2^j-1]^d`.
#[derive(Debug, Clone, Copy)]
struct TranslateBox {
    k_min: i64,
    width: usize,
    dim: usize,
}

impl TranslateBox {
    fn new(spec: WaveletSpec, dim: usize) -> Self {
        Self {
            k_min: spec.k_min(),
            width: spec.k_count(),
            dim,
        }
    }

    fn size(&self) -> usize {
        self.width.pow(self.dim as u32)
    }

    fn stride(&self, axis: usize) -> usize {
        self.width.pow((self.dim - 1 - axis) as u32)
    }

    /// Per-axis dense vectors of `phi_{jk}(x^l)` over the box width.
    fn axis_values(&self, table: &ScalingTable, level: u32, row: &[f64]) -> Vec<Vec<f64>> {
        row.iter()
            .map(|&x| {
                let mut v = vec![0.0; self.width];
                for (k, val) in phi_window(table, level, x).iter() {
                    let idx = k - self.k_min;
                    if idx >= 0 && (idx as usize) < self.width {
                        v[idx as usize] = val;
                    }
                }
                v
            })
            .collect()
    }

    /// Dense outer product of per-axis vectors.
    fn outer(&self, factors: &[&[f64]], out: &mut [f64]) {
        out.fill(0.0);
        self.outer_add(factors, 1.0, out);
    }

    fn outer_add(&self, factors: &[&[f64]], scale: f64, out: &mut [f64]) {
        let nonzero: Vec<Vec<(usize, f64)>> = factors
            .iter()
            .map(|f| {
                f.iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(i, v)| (i, *v))
                    .collect()
            })
            .collect();
        if nonzero.iter().any(|v| v.is_empty()) {
            return;
        }
        let d = self.dim;
        let strides: Vec<usize> = (0..d).map(|a| self.stride(a)).collect();
        let mut pos = vec![0usize; d];
        loop {
            let mut idx = 0;
            let mut v = scale;
            for a in 0..d {
                let (i, f) = nonzero[a][pos[a]];
                idx += i * strides[a];
                v *= f;
            }
            out[idx] += v;
            let mut a = d;
            loop {
                if a == 0 {
                    return;
                }
                a -= 1;
                pos[a] += 1;
                if pos[a] < nonzero[a].len() {
                    break;
                }
                pos[a] = 0;
            }
        }
    }
}

/// Work limit for [`d2_brute_with_budget`], in enumerated tuples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BruteBudget {
    pub max_tuples: u64,
}

impl Default for BruteBudget {
    /// `A_12^6`: accepts `n <= 12` at `d = 2`.
    fn default() -> Self {
        Self {
            max_tuples: 665_280,
        }
    }
}

/// Full-sample U-statistic of order `2d+2` by enumeration of every ordered
/// tuple of distinct indices. Exponential cost; used as the reference for
/// [`d2_fast`].
pub fn d2_brute(sample: &Sample, spec: WaveletSpec, table: &ScalingTable) -> Result<ContrastEstimate> {
    d2_brute_with_budget(sample, spec, table, BruteBudget::default())
}

pub fn d2_brute_with_budget(
    sample: &Sample,
    spec: WaveletSpec,
    table: &ScalingTable,
    budget: BruteBudget,
) -> Result<ContrastEstimate> {
    check_table(spec, table)?;
    let d = sample.dim();
    let m = 2 * d + 2;
    require_len(sample, m)?;
    let n = sample.len();
    let tuples = falling_factorial(n as u64, m as u64).unwrap_or(u64::MAX);
    if tuples > budget.max_tuples {
        return Err(Error::BudgetExceeded {
            tuples,
            budget: budget.max_tuples,
        });
    }

    let bx = TranslateBox::new(spec, d);
    let size = bx.size();
    let marginals: Vec<Vec<Vec<f64>>> = sample
        .rows()
        .map(|row| bx.axis_values(table, spec.level, row))
        .collect();
    let joint: Vec<Vec<f64>> = marginals
        .iter()
        .map(|axes| {
            let refs: Vec<&[f64]> = axes.iter().map(|v| v.as_slice()).collect();
            let mut out = vec![0.0; size];
            bx.outer(&refs, &mut out);
            out
        })
        .collect();

    // bracket(i0; i1..id) = Phi_k(X_i0) - prod_l phi_{k^l}(X_{il}^l)
    let bracket = |idx: &[usize], out: &mut [f64], scratch: &mut [f64]| {
        let refs: Vec<&[f64]> = (0..d).map(|l| marginals[idx[1 + l]][l].as_slice()).collect();
        bx.outer(&refs, scratch);
        for ((o, j), s) in out.iter_mut().zip(&joint[idx[0]]).zip(scratch.iter()) {
            *o = j - s;
        }
    };

    let mut first = vec![0.0; size];
    let mut second = vec![0.0; size];
    let mut scratch = vec![0.0; size];
    let mut total = 0.0;
    let mut tuple = Vec::with_capacity(m);
    let mut used = vec![false; n];
    let mut stack: Vec<usize> = vec![0];
    // Iterative depth-first enumeration of distinct ordered tuples.
    while let Some(next) = stack.pop() {
        let mut candidate = next;
        while candidate < n && used[candidate] {
            candidate += 1;
        }
        if candidate >= n {
            if let Some(last) = tuple.pop() {
                used[last] = false;
            }
            continue;
        }
        stack.push(candidate + 1);
        tuple.push(candidate);
        used[candidate] = true;
        if tuple.len() == d + 1 {
            bracket(&tuple, &mut first, &mut scratch);
        }
        if tuple.len() == m {
            bracket(&tuple[d + 1..], &mut second, &mut scratch);
            total += first.iter().zip(&second).map(|(a, b)| a * b).sum::<f64>();
            tuple.pop();
            used[candidate] = false;
        } else {
            stack.push(0);
        }
    }

    Ok(ContrastEstimate {
        estimator: EstimatorKind::D2Brute,
        value: total / tuples as f64,
        spec,
        n_used: n,
        d,
    })
}

/// Per-slot factor of one expanded product term of the `D^2` kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    /// Slot unused by this term; contributes 1.
    Free,
    /// `Phi_jk(X_i)`, all axes.
    Joint,
    /// `phi_{jk^l}(X_i^l)`.
    Axis(usize),
}

/// Full-sample U-statistic of order `2d+2`, exact, in `O(n (2N-1)^d)` per
/// coincidence pattern.
///
/// The kernel `[Phi_k(a) - prod_l phi_{k^l}(b_l)] [Phi_k(c) - prod_l phi_{k^l}(e_l)]`
/// expands into four products over the `2d+2` slots. For each product the sum
/// over distinct ordered tuples is the Möbius-weighted sum, over set
/// partitions of the slots, of unconstrained sums in which the slots of each
/// block share one observation. Such a block contributes, per translate `k`,
/// the sample mean of `prod_l phi_{k^l}(X^l)^{c_l}`, where `c_l` counts the
/// slots of the block acting on axis `l`.
pub fn d2_fast(sample: &Sample, spec: WaveletSpec, table: &ScalingTable) -> Result<ContrastEstimate> {
    check_table(spec, table)?;
    let d = sample.dim();
    let m = 2 * d + 2;
    require_len(sample, m)?;
    warn_regime(spec, d, sample.len());
    let partitions = set_partitions(m).map_err(|_| {
        Error::InvalidArgument(format!("d2 supports dimensions up to 3, got {d}"))
    })?;
    let n = sample.len();
    let bx = TranslateBox::new(spec, d);
    let size = bx.size();
    let rows: Vec<Vec<Vec<f64>>> = sample
        .rows()
        .map(|row| bx.axis_values(table, spec.level, row))
        .collect();

    let mut moments: HashMap<Vec<u32>, Vec<f64>> = HashMap::new();
    let ones = vec![1.0; bx.width];
    let mut moment = |exps: &[u32]| -> Vec<f64> {
        moments
            .entry(exps.to_vec())
            .or_insert_with(|| {
                let mut out = vec![0.0; size];
                let mut powered: Vec<Vec<f64>> = vec![Vec::new(); d];
                for axes in &rows {
                    for l in 0..d {
                        powered[l] = if exps[l] == 0 {
                            ones.clone()
                        } else {
                            axes[l].iter().map(|v| v.powi(exps[l] as i32)).collect()
                        };
                    }
                    let refs: Vec<&[f64]> = powered.iter().map(|v| v.as_slice()).collect();
                    bx.outer_add(&refs, 1.0 / n as f64, &mut out);
                }
                out
            })
            .clone()
    };

    let half = |joint: bool| -> Vec<Slot> {
        let mut slots = vec![if joint { Slot::Joint } else { Slot::Free }];
        slots.extend((0..d).map(|l| if joint { Slot::Free } else { Slot::Axis(l) }));
        slots
    };
    let terms = [
        (1.0, true, true),
        (-1.0, true, false),
        (-1.0, false, true),
        (1.0, false, false),
    ];

    // n^b / A_n^m for each possible block count b.
    let scale: Vec<f64> = (0..=m)
        .map(|b| {
            let mut r = 1.0;
            for t in 0..m {
                r *= n as f64 / (n - t) as f64;
            }
            r * (n as f64).powi(b as i32 - m as i32)
        })
        .collect();

    let mut total = 0.0;
    let mut product = vec![0.0; size];
    for (sign, left, right) in terms {
        let mut slots = half(left);
        slots.extend(half(right));
        for partition in &partitions {
            product.fill(1.0);
            for block in partition.blocks() {
                let mut exps = vec![0u32; d];
                for &s in block {
                    match slots[s] {
                        Slot::Free => {}
                        Slot::Joint => exps.iter_mut().for_each(|e| *e += 1),
                        Slot::Axis(l) => exps[l] += 1,
                    }
                }
                if exps.iter().all(|&e| e == 0) {
                    continue;
                }
                let mom = moment(&exps);
                for (p, v) in product.iter_mut().zip(&mom) {
                    *p *= v;
                }
            }
            let sum_k: f64 = product.iter().sum();
            total += sign
                * partition.mobius_weight() as f64
                * scale[partition.len()]
                * sum_k;
        }
    }

    Ok(ContrastEstimate {
        estimator: EstimatorKind::D2Fast,
        value: total,
        spec,
        n_used: n,
        d,
    })
}

/// Disjoint row blocks: `joint` keeps full rows, `marginals[l]` contributes
/// only axis `l` of its rows. Ranges are 0-based and half-open.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitScheme {
    pub joint: Range<usize>,
    pub marginals: Vec<Range<usize>>,
}

impl SplitScheme {
    fn validate(&self, sample: &Sample) -> Result<()> {
        if self.marginals.len() != sample.dim() {
            return Err(Error::DimensionMismatch {
                expected: sample.dim(),
                got: self.marginals.len(),
            });
        }
        let mut blocks: Vec<&Range<usize>> = std::iter::once(&self.joint)
            .chain(self.marginals.iter())
            .collect();
        for b in &blocks {
            if b.end > sample.len() {
                return Err(Error::InvalidArgument(format!(
                    "block {b:?} exceeds {} rows",
                    sample.len()
                )));
            }
            if b.len() < 2 {
                return Err(Error::SampleTooSmall {
                    needed: 2,
                    got: b.len(),
                });
            }
        }
        blocks.sort_by_key(|b| b.start);
        if blocks.windows(2).any(|w| w[0].end > w[1].start) {
            return Err(Error::InvalidArgument("split blocks overlap".into()));
        }
        Ok(())
    }
}

/// `d+1` contiguous blocks of `floor(n/(d+1))` rows; trailing rows unused.
pub fn split_d_plus_1(sample: &Sample) -> Result<SplitScheme> {
    let d = sample.dim();
    require_len(sample, 2 * (d + 1))?;
    let m = sample.len() / (d + 1);
    Ok(SplitScheme {
        joint: 0..m,
        marginals: (1..=d).map(|l| l * m..(l + 1) * m).collect(),
    })
}

/// `B(R0) + prod_l B(R^l) - 2 sum_k alpha_k(R0) prod_l alpha_{k^l}(R^l)`.
pub fn f2_mixed(
    sample: &Sample,
    scheme: &SplitScheme,
    spec: WaveletSpec,
    table: &ScalingTable,
) -> Result<ContrastEstimate> {
    scheme.validate(sample)?;
    let joint = sample.slice_rows(scheme.joint.start, scheme.joint.end)?;
    let blocks = scheme
        .marginals
        .iter()
        .enumerate()
        .map(|(l, r)| sample.axis_sample(l, r.start, r.end))
        .collect::<Result<Vec<_>>>()?;
    let b_joint = b2_ustat(&joint, spec, table)?.value;
    let mut b_product = 1.0;
    for b in &blocks {
        b_product *= b2_ustat(b, spec, table)?.value;
    }
    let alpha = estimate_alpha(&joint, spec, table)?;
    let marginals = blocks
        .iter()
        .map(|b| estimate_marginal_alpha(b, 1, spec, table))
        .collect::<Result<Vec<_>>>()?;
    let lambda = product_map(&marginals)?;
    let n_used = scheme.joint.len() + scheme.marginals.iter().map(|r| r.len()).sum::<usize>();
    Ok(ContrastEstimate {
        estimator: EstimatorKind::F2,
        value: b_joint + b_product - 2.0 * alpha.dot(&lambda),
        spec,
        n_used,
        d: sample.dim(),
    })
}

/// Rows `(X_{(m-1)d+1}^1, ..., X_{md}^d)` for `m = 1..floor(n/d)`: independent
/// draws from the product of the marginals.
pub fn build_product_sample(sample: &Sample) -> Result<Sample> {
    let d = sample.dim();
    require_len(sample, d)?;
    let rows = sample.len() / d;
    let mut data = Vec::with_capacity(rows * d);
    for m in 0..rows {
        for l in 0..d {
            data.push(sample.row(m * d + l)[l]);
        }
    }
    Sample::new(d, data)
}

/// Splits `sample` into a joint sample `R` of `floor(n/(d+1))` rows and a
/// product sample `S` of the same size built from the next `d` row blocks.
pub fn two_sample_split(sample: &Sample) -> Result<(Sample, Sample)> {
    let d = sample.dim();
    require_len(sample, 2 * (d + 1))?;
    let m = sample.len() / (d + 1);
    let r = sample.slice_rows(0, m)?;
    let s = build_product_sample(&sample.slice_rows(m, m + d * m)?)?;
    Ok((r, s))
}

fn check_pair(r: &Sample, s: &Sample) -> Result<()> {
    if r.dim() != s.dim() {
        return Err(Error::DimensionMismatch {
            expected: r.dim(),
            got: s.dim(),
        });
    }
    require_len(r, 2)?;
    require_len(s, 2)
}

/// `B(R) + B(S) - 2 sum_k alpha_k(R) alpha_k(S)`.
pub fn g2_mixed(
    sample_r: &Sample,
    sample_s: &Sample,
    spec: WaveletSpec,
    table: &ScalingTable,
) -> Result<ContrastEstimate> {
    check_pair(sample_r, sample_s)?;
    let br = b2_ustat(sample_r, spec, table)?.value;
    let bs = b2_ustat(sample_s, spec, table)?.value;
    let cross = estimate_alpha(sample_r, spec, table)?.dot(&estimate_alpha(sample_s, spec, table)?);
    Ok(ContrastEstimate {
        estimator: EstimatorKind::G2,
        value: br + bs - 2.0 * cross,
        spec,
        n_used: sample_r.len() + sample_s.len(),
        d: sample_r.dim(),
    })
}

/// Two-sample U-statistic
/// `(1/A_n^2) sum_{i1 != i2} sum_k [Phi_k(R_i1) - Phi_k(S_i1)] [Phi_k(R_i2) - Phi_k(S_i2)]`.
pub fn delta2_ustat(
    sample_r: &Sample,
    sample_s: &Sample,
    spec: WaveletSpec,
    table: &ScalingTable,
) -> Result<ContrastEstimate> {
    check_table(spec, table)?;
    check_pair(sample_r, sample_s)?;
    if sample_r.len() != sample_s.len() {
        return Err(Error::InvalidArgument(format!(
            "two-sample U-statistic needs equal sizes, got {} and {}",
            sample_r.len(),
            sample_s.len()
        )));
    }
    let n = sample_r.len();
    let mut acc: BTreeMap<KIndex, (f64, f64)> = BTreeMap::new();
    let mut diff: BTreeMap<KIndex, f64> = BTreeMap::new();
    for (r, s) in sample_r.rows().zip(sample_s.rows()) {
        diff.clear();
        for_each_translate(table, spec.level, r, |k, v| {
            *diff.entry(k.to_vec()).or_insert(0.0) += v;
        });
        for_each_translate(table, spec.level, s, |k, v| {
            *diff.entry(k.to_vec()).or_insert(0.0) -= v;
        });
        for (k, &v) in &diff {
            if let Some(e) = acc.get_mut(k) {
                e.0 += v;
                e.1 += v * v;
            } else {
                acc.insert(k.clone(), (v, v * v));
            }
        }
    }
    let total: f64 = acc.values().map(|(t, q)| t * t - q).sum();
    Ok(ContrastEstimate {
        estimator: EstimatorKind::Delta2,
        value: total / (n as f64 * (n - 1) as f64),
        spec,
        n_used: 2 * n,
        d: sample_r.dim(),
    })
}

/// Runs `kind` on a single sample, deriving the split samples it needs.
pub fn estimate(
    kind: EstimatorKind,
    sample: &Sample,
    spec: WaveletSpec,
    table: &ScalingTable,
) -> Result<ContrastEstimate> {
    match kind {
        EstimatorKind::C2 => c2_plugin(sample, spec, table),
        EstimatorKind::B2 => b2_ustat(sample, spec, table),
        EstimatorKind::D2Brute => d2_brute(sample, spec, table),
        EstimatorKind::D2Fast => d2_fast(sample, spec, table),
        EstimatorKind::F2 => f2_mixed(sample, &split_d_plus_1(sample)?, spec, table),
        EstimatorKind::G2 => {
            let (r, s) = two_sample_split(sample)?;
            g2_mixed(&r, &s, spec, table)
        }
        EstimatorKind::Delta2 => {
            let (r, s) = two_sample_split(sample)?;
            delta2_ustat(&r, &s, spec, table)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(order: usize, level: u32) -> (WaveletSpec, ScalingTable) {
        let spec = WaveletSpec::new(order, level).unwrap();
        (spec, spec.table().unwrap())
    }

    fn random_sample(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Sample {
        Sample::new(d, (0..n * d).map(|_| rng.gen::<f64>()).collect()).unwrap()
    }

    /// Literal ordered-pair enumeration for `B^2`.
    fn b2_enumerated(s: &Sample, spec: WaveletSpec, t: &ScalingTable) -> f64 {
        use crate::wavelet::eval_tensor_phi;
        let n = s.len();
        let d = s.dim();
        let mut total = 0.0;
        let ks: Vec<Vec<i64>> = {
            let mut out = vec![vec![]];
            for _ in 0..d {
                out = out
                    .into_iter()
                    .flat_map(|p| {
                        (spec.k_min()..=spec.k_max()).map(move |k| {
                            let mut q = p.clone();
                            q.push(k);
                            q
                        })
                    })
                    .collect();
            }
            out
        };
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    for k in &ks {
                        total += eval_tensor_phi(t, spec.level, k, s.row(i)).unwrap()
                            * eval_tensor_phi(t, spec.level, k, s.row(j)).unwrap();
                    }
                }
            }
        }
        total / (n * (n - 1)) as f64
    }

    #[test]
    fn haar_c2_exact_matches_coordinate_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for (d, level, n) in [(2, 1, 5), (2, 3, 200), (3, 2, 50), (1, 2, 9), (4, 1, 30)] {
            let (spec, t) = setup(1, level);
            let s = random_sample(&mut rng, n, d);
            let alpha = estimate_alpha(&s, spec, &t).unwrap();
            let lambda = estimate_lambda(&s, spec, &t).unwrap();
            let generic = alpha.squared_distance(&lambda);
            let exact = haar_c2_exact(&s, spec).unwrap();
            assert!((exact - generic).abs() <= 1e-12 * generic.max(1.0), "{exact} {generic}");
        }
        assert!(haar_c2_exact(&random_sample(&mut rng, 5, 2), WaveletSpec::new(2, 1).unwrap()).is_none());
    }

    #[test]
    fn c2_examples() {
        let (spec, t) = setup(1, 1);
        let s = Sample::from_rows(&[[0.1, 0.1], [0.9, 0.9]]).unwrap();
        assert_eq!(c2_plugin(&s, spec, &t).unwrap().value, 1.0);
        let s = Sample::from_rows(&[[0.1, 0.1], [0.1, 0.9], [0.9, 0.1], [0.9, 0.9]]).unwrap();
        assert_eq!(c2_plugin(&s, spec, &t).unwrap().value, 0.0);
        let (spec, t) = setup(3, 2);
        let s = Sample::from_values(&[0.2, 0.4, 0.41, 0.9]).unwrap();
        assert!(c2_plugin(&s, spec, &t).unwrap().value.abs() <= 1e-15);
    }

    #[test]
    fn b2_examples() {
        let (spec, t) = setup(1, 0);
        let s = Sample::from_values(&[0.25, 0.75]).unwrap();
        assert_eq!(b2_ustat(&s, spec, &t).unwrap().value, 1.0);
        let (spec, t) = setup(1, 1);
        let s = Sample::from_values(&[0.1, 0.9]).unwrap();
        assert_eq!(b2_ustat(&s, spec, &t).unwrap().value, 0.0);
        let one = Sample::from_values(&[0.5]).unwrap();
        assert!(matches!(
            b2_ustat(&one, spec, &t),
            Err(Error::SampleTooSmall { needed: 2, got: 1 })
        ));
    }

    #[test]
    fn b2_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (order, level, d) in [(1, 2, 1), (2, 1, 2), (3, 2, 1), (1, 1, 3)] {
            let (spec, t) = setup(order, level);
            for n in [2, 7, 23, 50] {
                let s = random_sample(&mut rng, n, d);
                let fast = b2_ustat(&s, spec, &t).unwrap().value;
                let slow = b2_enumerated(&s, spec, &t);
                assert!((fast - slow).abs() <= 1e-12 * slow.abs().max(1.0), "{fast} {slow}");
            }
        }
    }

    #[test]
    fn d2_level_zero_haar() {
        let (spec, t) = setup(1, 0);
        let s = Sample::from_values(&[0.1, 0.3, 0.6, 0.9]).unwrap();
        assert_eq!(d2_brute(&s, spec, &t).unwrap().value, 0.0);
        assert!(d2_fast(&s, spec, &t).unwrap().value.abs() < 1e-12);
    }

    #[test]
    fn d2_one_dimension_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (order, level) in [(1, 1), (1, 2), (2, 1), (2, 2)] {
            let (spec, t) = setup(order, level);
            let s = random_sample(&mut rng, 5, 1);
            assert!(d2_brute(&s, spec, &t).unwrap().value.abs() < 1e-12);
            assert!(d2_fast(&s, spec, &t).unwrap().value.abs() < 1e-10);
        }
    }

    #[test]
    fn d2_fast_matches_brute() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for (order, level) in [(1, 1), (2, 1), (1, 2), (2, 2)] {
            let (spec, t) = setup(order, level);
            for n in [6, 8] {
                let s = random_sample(&mut rng, n, 2);
                let b = d2_brute(&s, spec, &t).unwrap().value;
                let f = d2_fast(&s, spec, &t).unwrap().value;
                let scale = estimate_alpha(&s, spec, &t).unwrap().sum_of_squares();
                assert!((b - f).abs() <= 1e-9 * b.abs().max(scale), "{b} vs {f}");
            }
        }
    }

    #[test]
    fn d2_guards() {
        let (spec, t) = setup(1, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let small = random_sample(&mut rng, 5, 2);
        assert!(matches!(d2_brute(&small, spec, &t), Err(Error::SampleTooSmall { .. })));
        assert!(matches!(d2_fast(&small, spec, &t), Err(Error::SampleTooSmall { .. })));
        let big = random_sample(&mut rng, 13, 2);
        assert!(matches!(d2_brute(&big, spec, &t), Err(Error::BudgetExceeded { .. })));
        let ok = random_sample(&mut rng, 12, 2);
        assert!(d2_brute_with_budget(&ok, spec, &t, BruteBudget { max_tuples: 10 }).is_err());
        let wide = random_sample(&mut rng, 12, 4);
        assert!(d2_fast(&wide, spec, &t).is_err());
    }

    #[test]
    fn splits() {
        let rows: Vec<[f64; 2]> = (0..7).map(|i| [i as f64 / 10.0, i as f64 / 20.0]).collect();
        let s = Sample::from_rows(&rows).unwrap();
        let scheme = split_d_plus_1(&s).unwrap();
        assert_eq!(scheme.joint, 0..2);
        assert_eq!(scheme.marginals, vec![2..4, 4..6]);
        let s6 = s.slice_rows(0, 6).unwrap();
        assert_eq!(split_d_plus_1(&s6).unwrap(), scheme);
        assert!(split_d_plus_1(&s.slice_rows(0, 5).unwrap()).is_err());
    }

    #[test]
    fn f2_examples() {
        let (spec, t) = setup(1, 0);
        let s = Sample::from_rows(&[
            [0.1, 0.1],
            [0.2, 0.2],
            [0.1, 0.7],
            [0.2, 0.8],
            [0.6, 0.1],
            [0.9, 0.2],
        ])
        .unwrap();
        let scheme = split_d_plus_1(&s).unwrap();
        assert_eq!(f2_mixed(&s, &scheme, spec, &t).unwrap().value, 0.0);

        let (spec, t) = setup(1, 1);
        let low = Sample::from_rows(&[
            [0.1, 0.1],
            [0.2, 0.2],
            [0.1, 0.3],
            [0.2, 0.4],
            [0.3, 0.1],
            [0.4, 0.2],
        ])
        .unwrap();
        let v = f2_mixed(&low, &split_d_plus_1(&low).unwrap(), spec, &t).unwrap().value;
        assert!(v.abs() < 1e-12, "{v}");

        let bad = SplitScheme {
            joint: 0..1,
            marginals: vec![1..3, 3..5],
        };
        assert!(f2_mixed(&low, &bad, spec, &t).is_err());
        let overlap = SplitScheme {
            joint: 0..2,
            marginals: vec![1..3, 3..5],
        };
        assert!(f2_mixed(&low, &overlap, spec, &t).is_err());
    }

    #[test]
    fn product_sample() {
        let s = Sample::from_rows(&[[0.1, 0.2], [0.3, 0.4], [0.5, 0.6], [0.7, 0.8], [0.9, 1.0]])
            .unwrap();
        let p = build_product_sample(&s).unwrap();
        assert_eq!(p.as_slice(), &[0.1, 0.4, 0.5, 0.8]);
        let one = Sample::from_values(&[0.3, 0.1]).unwrap();
        assert_eq!(build_product_sample(&one).unwrap(), one);
        let tiny = Sample::from_rows(&[[0.1, 0.2, 0.3], [0.3, 0.4, 0.5]]).unwrap();
        assert!(build_product_sample(&tiny).is_err());
    }

    #[test]
    fn two_sample_examples() {
        let (spec, t) = setup(1, 1);
        let r = Sample::from_values(&[0.1, 0.2]).unwrap();
        let s = Sample::from_values(&[0.8, 0.9]).unwrap();
        assert!((g2_mixed(&r, &s, spec, &t).unwrap().value - 4.0).abs() < 1e-12);
        assert!((delta2_ustat(&r, &s, spec, &t).unwrap().value - 4.0).abs() < 1e-12);
        assert!(g2_mixed(&r, &r, spec, &t).unwrap().value.abs() < 1e-12);
        assert_eq!(delta2_ustat(&r, &r, spec, &t).unwrap().value, 0.0);
        let one = Sample::from_values(&[0.5]).unwrap();
        assert!(g2_mixed(&r, &one, spec, &t).is_err());
        let three = Sample::from_values(&[0.5, 0.6, 0.7]).unwrap();
        assert!(delta2_ustat(&r, &three, spec, &t).is_err());
        let (spec0, t0) = setup(1, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_sample(&mut rng, 9, 3);
        let b = random_sample(&mut rng, 9, 3);
        assert_eq!(delta2_ustat(&a, &b, spec0, &t0).unwrap().value, 0.0);
    }

    #[test]
    fn regime_threshold() {
        assert!(regime_warning(WaveletSpec::haar(8), 2, 10).is_some());
        assert!(regime_warning(WaveletSpec::haar(2), 2, 10).is_none());
    }

    #[test]
    fn kind_round_trip() {
        for k in EstimatorKind::ALL {
            assert_eq!(k.name().parse::<EstimatorKind>().unwrap(), k);
        }
        assert!("x".parse::<EstimatorKind>().is_err());
    }
}
