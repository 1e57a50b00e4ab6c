//! Empirical wavelet coordinates `alpha_jk = (1/n) sum_i Phi_jk(X_i)`.
//!
//! Coordinates are stored sparsely, keyed by the translate `k in Z^d`. Each
//! observation touches at most `(2N-1)^d` translates.

use std::collections::BTreeMap;

use crate::wavelet::{dyadic_amplitude, haar_cell, phi_window, PhiWindow, ScalingTable};
use crate::{Error, Result, Sample, WaveletSpec};

/// Translate index in `Z^d`.
pub type KIndex = Vec<i64>;

#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateMap {
    spec: WaveletSpec,
    dim: usize,
    entries: BTreeMap<KIndex, f64>,
}

impl CoordinateMap {
    pub fn new(spec: WaveletSpec, dim: usize) -> Self {
        Self {
            spec,
            dim,
            entries: BTreeMap::new(),
        }
    }

    pub fn from_entries(spec: WaveletSpec, dim: usize, entries: BTreeMap<KIndex, f64>) -> Self {
        Self { spec, dim, entries }
    }

    pub fn spec(&self) -> WaveletSpec {
        self.spec
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Coefficient at `k`; zero when absent.
    pub fn get(&self, k: &[i64]) -> f64 {
        self.entries.get(k).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&KIndex, f64)> + '_ {
        self.entries.iter().map(|(k, v)| (k, *v))
    }

    pub fn entries(&self) -> &BTreeMap<KIndex, f64> {
        &self.entries
    }

    pub fn sum_of_squares(&self) -> f64 {
        self.entries.values().map(|v| v * v).sum()
    }

    /// `sum_k self(k) other(k)`.
    pub fn dot(&self, other: &CoordinateMap) -> f64 {
        let (small, large) = if self.len() <= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        small.iter().map(|(k, v)| v * large.get(k)).sum()
    }

    /// `sum_k (self(k) - other(k))^2` over the union of supports.
    pub fn squared_distance(&self, other: &CoordinateMap) -> f64 {
        let mut total = 0.0;
        for (k, v) in self.iter() {
            let d = v - other.get(k);
            total += d * d;
        }
        for (k, v) in other.iter() {
            if !self.entries.contains_key(k) {
                total += v * v;
            }
        }
        total
    }

    fn add(&mut self, k: &[i64], value: f64) {
        if let Some(v) = self.entries.get_mut(k) {
            *v += value;
        } else {
            self.entries.insert(k.to_vec(), value);
        }
    }
}

/// Calls `f(k, Phi_jk(x))` for every translate `k` with a nonzero value at `x`.
pub fn for_each_translate(
    table: &ScalingTable,
    level: u32,
    x: &[f64],
    mut f: impl FnMut(&[i64], f64),
) {
    let d = x.len();
    let mut k = vec![0i64; d];
    if table.filter().is_haar() {
        for (kl, &xl) in k.iter_mut().zip(x) {
            *kl = haar_cell(level, xl);
        }
        f(&k, dyadic_amplitude(level * d as u32));
        return;
    }
    let windows: Vec<PhiWindow> = x.iter().map(|&xl| phi_window(table, level, xl)).collect();
    let nonzero: Vec<Vec<(i64, f64)>> = windows.iter().map(|w| w.iter().collect()).collect();
    if nonzero.iter().any(|v| v.is_empty()) {
        return;
    }
    let mut pos = vec![0usize; d];
    loop {
        let mut value = 1.0;
        for l in 0..d {
            let (kl, vl) = nonzero[l][pos[l]];
            k[l] = kl;
            value *= vl;
        }
        f(&k, value);
        let mut l = d;
        loop {
            if l == 0 {
                return;
            }
            l -= 1;
            pos[l] += 1;
            if pos[l] < nonzero[l].len() {
                break;
            }
            pos[l] = 0;
        }
    }
}

/// `alpha_jk = (1/n) sum_i Phi_jk(X_i)` over all translates touched by the sample.
///
/// Haar coordinates are computed from integer cell counts, so they equal
/// `2^{jd/2} * count / n` exactly.
pub fn estimate_alpha(
    sample: &Sample,
    spec: WaveletSpec,
    table: &ScalingTable,
) -> Result<CoordinateMap> {
    check_table(spec, table)?;
    let n = sample.len();
    if n == 0 {
        return Err(Error::SampleTooSmall { needed: 1, got: 0 });
    }
    let d = sample.dim();
    let mut map = CoordinateMap::new(spec, d);
    if table.filter().is_haar() {
        let mut counts: BTreeMap<KIndex, u64> = BTreeMap::new();
        let mut cell = vec![0i64; d];
        for row in sample.rows() {
            for (c, &x) in cell.iter_mut().zip(row) {
                *c = haar_cell(spec.level, x);
            }
            if let Some(c) = counts.get_mut(&cell[..]) {
                *c += 1;
            } else {
                counts.insert(cell.clone(), 1);
            }
        }
        let amplitude = dyadic_amplitude(spec.level * d as u32);
        map.entries = counts
            .into_iter()
            .map(|(k, c)| (k, amplitude * (c as f64 / n as f64)))
            .collect();
        return Ok(map);
    }
    for row in sample.rows() {
        for_each_translate(table, spec.level, row, |k, v| map.add(k, v));
    }
    let inv = n as f64;
    for v in map.entries.values_mut() {
        *v /= inv;
    }
    Ok(map)
}

/// Coordinates of the marginal along `axis` (1-based).
pub fn estimate_marginal_alpha(
    sample: &Sample,
    axis: usize,
    spec: WaveletSpec,
    table: &ScalingTable,
) -> Result<CoordinateMap> {
    if axis == 0 || axis > sample.dim() {
        return Err(Error::AxisOutOfRange {
            axis,
            dim: sample.dim(),
        });
    }
    let marginal = sample.axis_sample(axis - 1, 0, sample.len())?;
    estimate_alpha(&marginal, spec, table)
}

/// `lambda_k = prod_l marginal_l(k^l)` over the cross product of nonzero entries.
pub fn product_map(marginals: &[CoordinateMap]) -> Result<CoordinateMap> {
    let first = marginals
        .first()
        .ok_or_else(|| Error::InvalidArgument("product of zero marginals".into()))?;
    let spec = first.spec;
    for m in marginals {
        if m.dim != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: m.dim,
            });
        }
        if m.spec != spec {
            return Err(Error::SpecMismatch);
        }
    }
    let d = marginals.len();
    let factors: Vec<Vec<(i64, f64)>> = marginals
        .iter()
        .map(|m| {
            m.iter()
                .filter(|(_, v)| *v != 0.0)
                .map(|(k, v)| (k[0], v))
                .collect()
        })
        .collect();
    let mut out = CoordinateMap::new(spec, d);
    if factors.iter().any(|f| f.is_empty()) {
        return Ok(out);
    }
    let mut pos = vec![0usize; d];
    loop {
        let mut k = Vec::with_capacity(d);
        let mut v = 1.0;
        for l in 0..d {
            let (kl, vl) = factors[l][pos[l]];
            k.push(kl);
            v *= vl;
        }
        out.entries.insert(k, v);
        let mut l = d;
        loop {
            if l == 0 {
                return Ok(out);
            }
            l -= 1;
            pos[l] += 1;
            if pos[l] < factors[l].len() {
                break;
            }
            pos[l] = 0;
        }
    }
}

/// Product of the `d` marginal coordinate maps of `sample`.
pub fn estimate_lambda(
    sample: &Sample,
    spec: WaveletSpec,
    table: &ScalingTable,
) -> Result<CoordinateMap> {
    let marginals = (1..=sample.dim())
        .map(|axis| estimate_marginal_alpha(sample, axis, spec, table))
        .collect::<Result<Vec<_>>>()?;
    product_map(&marginals)
}

pub(crate) fn check_table(spec: WaveletSpec, table: &ScalingTable) -> Result<()> {
    if table.order() != spec.order {
        return Err(Error::InvalidArgument(format!(
            "table built for order {} but spec has order {}",
            table.order(),
            spec.order
        )));
    }
    Ok(())
}
