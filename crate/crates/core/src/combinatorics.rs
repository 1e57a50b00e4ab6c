//! Exact counting of ordered index tuples and set-partition enumeration.
//!
//! Sums over ordered tuples of pairwise distinct indices are recovered from
//! unconstrained sums by Möbius inversion on the partition lattice: for slot
//! functions `v_1..v_m`,
//!
//! ```text
//! sum_{distinct i} prod_s v_s(i_s) = sum_P mu(P) prod_{B in P} sum_i prod_{s in B} v_s(i)
//! ```
//!
//! with `mu(P) = prod_B (-1)^{|B|-1} (|B|-1)!`.

use crate::{Error, Result};

pub const MAX_PARTITION_SIZE: usize = 8;

/// `A_n^p = n! / (n-p)!`, the number of ordered `p`-tuples of distinct
/// elements of `{1..n}`. Zero when `p > n`.
pub fn falling_factorial(n: u64, p: u64) -> Result<u64> {
    if p > n {
        return Ok(0);
    }
    (0..p).try_fold(1u64, |acc, t| {
        acc.checked_mul(n - t)
            .ok_or_else(|| Error::Overflow(format!("A_{n}^{p}")))
    })
}

/// Signed variant accepting arbitrary integers; negative arguments are errors.
pub fn falling_factorial_i64(n: i64, p: i64) -> Result<u64> {
    if n < 0 || p < 0 {
        return Err(Error::InvalidArgument(format!(
            "falling factorial of negative arguments ({n}, {p})"
        )));
    }
    falling_factorial(n as u64, p as u64)
}

/// Binomial coefficient `C_n^k`.
pub fn binomial(n: u64, k: u64) -> Result<u64> {
    if k > n {
        return Ok(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for t in 0..k {
        acc = acc * (n - t) as u128 / (t + 1) as u128;
    }
    u64::try_from(acc).map_err(|_| Error::Overflow(format!("C_{n}^{k}")))
}

/// Number of ordered pairs `(i1, i2)` in `I_n^m x I_n^m` sharing exactly `b`
/// indices: `A_n^m A_m^b A_{n-m}^{m-b} C_m^b`.
pub fn count_matching(n: u64, m: u64, b: u64) -> Result<u64> {
    if b > m || m > n {
        return Err(Error::InvalidArgument(format!(
            "count_matching requires 0 <= b <= m <= n, got n={n} m={m} b={b}"
        )));
    }
    let factors = [
        falling_factorial(n, m)?,
        falling_factorial(m, b)?,
        falling_factorial(n - m, m - b)?,
        binomial(m, b)?,
    ];
    factors.iter().try_fold(1u64, |acc, &f| {
        acc.checked_mul(f)
            .ok_or_else(|| Error::Overflow(format!("count_matching({n},{m},{b})")))
    })
}

/// A partition of the slots `0..m` into nonempty blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SetPartition {
    blocks: Vec<Vec<usize>>,
    mobius_weight: i64,
}

impl SetPartition {
    fn from_growth_string(rgs: &[usize]) -> Self {
        let n_blocks = rgs.iter().max().map_or(0, |m| m + 1);
        let mut blocks = vec![Vec::new(); n_blocks];
        for (slot, &b) in rgs.iter().enumerate() {
            blocks[b].push(slot);
        }
        let mobius_weight = blocks
            .iter()
            .map(|b| {
                let size = b.len() as i64;
                let fact: i64 = (1..size).product();
                if size % 2 == 0 {
                    -fact
                } else {
                    fact
                }
            })
            .product();
        Self {
            blocks,
            mobius_weight,
        }
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    /// `prod_B (-1)^{|B|-1} (|B|-1)!`.
    pub fn mobius_weight(&self) -> i64 {
        self.mobius_weight
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }
}

/// All partitions of `0..m`, in lexicographic order of restricted growth
/// strings. `m` must lie in `1..=8`.
pub fn set_partitions(m: usize) -> Result<Vec<SetPartition>> {
    if m == 0 || m > MAX_PARTITION_SIZE {
        return Err(Error::InvalidArgument(format!(
            "set partitions supported for 1..={MAX_PARTITION_SIZE} slots, got {m}"
        )));
    }
    let mut out = Vec::new();
    let mut rgs = vec![0usize; m];
    // prefix_max[i] = max(rgs[..i]) + 1, the largest value allowed at i.
    loop {
        out.push(SetPartition::from_growth_string(&rgs));
        let mut i = m - 1;
        loop {
            if i == 0 {
                return Ok(out);
            }
            let bound = rgs[..i].iter().max().copied().unwrap_or(0) + 1;
            if rgs[i] < bound {
                rgs[i] += 1;
                rgs[i + 1..].fill(0);
                break;
            }
            i -= 1;
        }
    }
}
