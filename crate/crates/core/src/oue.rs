//! Optimized unary encoding (OUE) frequency oracle.
//!
//! A value `x` in a domain of size `d` is one-hot encoded; each bit is then
//! randomized independently: a 1-bit survives with probability 1/2 and a 0-bit
//! flips to 1 with probability `q = 1 / (e^eps + 1)`. The curator counts set
//! bits per position and debiases them into unbiased frequency estimates.

use bitvec::prelude::*;
use rand::RngCore;

use crate::error::{Error, Result};

pub type Bits = BitVec<u64, Lsb0>;

/// Probability that a 0-bit is reported as 1.
pub fn flip_probability(epsilon: f64) -> f64 {
    1.0 / (epsilon.exp() + 1.0)
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && !epsilon.is_nan() {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "privacy budget must be positive, got {epsilon}"
        )))
    }
}

/// A perturbed bit vector together with the budget it was produced under.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    bits: Bits,
    epsilon: f64,
}

impl Report {
    pub fn new(mut bits: Bits, epsilon: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        bits.set_uninitialized(false);
        Ok(Report { bits, epsilon })
    }

    pub fn bits(&self) -> &Bits {
        &self.bits
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn domain_size(&self) -> usize {
        self.bits.len()
    }
}

/// One-hot vector of length `d` with bit `value` set.
pub fn encode(value: usize, d: usize) -> Result<Bits> {
    if value >= d {
        return Err(Error::invalid(format!("value {value} outside domain of size {d}")));
    }
    let mut bits = bitvec![u64, Lsb0; 0; d];
    bits.set(value, true);
    Ok(bits)
}

/// Randomizes an encoded vector bit by bit.
///
/// Each position consumes exactly one `u64` from `rng`, so the output is a
/// pure function of the generator state.
pub fn perturb<R: RngCore + ?Sized>(encoded: &Bits, epsilon: f64, rng: &mut R) -> Result<Report> {
    check_epsilon(epsilon)?;
    let q = flip_probability(epsilon);
    // P(u < threshold) = q for u uniform on [0, 2^64).
    let threshold = (q * 18_446_744_073_709_551_616.0) as u64;
    let len = encoded.len();
    let mut words = Vec::with_capacity(len.div_ceil(64));
    for (w, chunk) in encoded.as_raw_slice().iter().enumerate() {
        let width = (len - w * 64).min(64);
        let mut out = 0u64;
        for b in 0..width {
            let u = rng.next_u64();
            let on = if (chunk >> b) & 1 == 1 {
                u >> 63 == 1
            } else {
                u < threshold
            };
            out |= (on as u64) << b;
        }
        words.push(out);
    }
    let mut bits = Bits::from_vec(words);
    bits.truncate(len);
    Ok(Report { bits, epsilon })
}

/// Debiased per-value counts from a batch of reports.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedEstimate {
    pub counts: Vec<f64>,
    pub n: u64,
    /// `None` when no report was aggregated.
    pub epsilon: Option<f64>,
}

impl AggregatedEstimate {
    pub fn domain_size(&self) -> usize {
        self.counts.len()
    }
}

/// Running sums of set bits; merging partial aggregators is exact.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregator {
    ones: Vec<u64>,
    n: u64,
    epsilon: Option<f64>,
}

impl Aggregator {
    pub fn new(d: usize) -> Self {
        Aggregator {
            ones: vec![0; d],
            n: 0,
            epsilon: None,
        }
    }

    pub fn domain_size(&self) -> usize {
        self.ones.len()
    }

    pub fn len(&self) -> u64 {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn epsilon(&self) -> Option<f64> {
        self.epsilon
    }

    /// Raw count of reports with each bit set.
    pub fn ones(&self) -> &[u64] {
        &self.ones
    }

    fn accept_epsilon(&mut self, epsilon: f64) -> Result<()> {
        match self.epsilon {
            None => {
                self.epsilon = Some(epsilon);
                Ok(())
            }
            Some(e) if e == epsilon => Ok(()),
            Some(e) => Err(Error::protocol(format!(
                "cannot aggregate reports made with budget {epsilon} together with budget {e}"
            ))),
        }
    }

    pub fn add(&mut self, report: &Report) -> Result<()> {
        if report.domain_size() != self.ones.len() {
            return Err(Error::protocol(format!(
                "report has {} bits but the domain has {}",
                report.domain_size(),
                self.ones.len()
            )));
        }
        self.accept_epsilon(report.epsilon)?;
        for (w, &word) in report.bits.as_raw_slice().iter().enumerate() {
            let mut rest = word;
            while rest != 0 {
                let b = rest.trailing_zeros() as usize;
                self.ones[w * 64 + b] += 1;
                rest &= rest - 1;
            }
        }
        self.n += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &Aggregator) -> Result<()> {
        if other.ones.len() != self.ones.len() {
            return Err(Error::protocol(format!(
                "cannot merge aggregators over domains {} and {}",
                self.ones.len(),
                other.ones.len()
            )));
        }
        if let Some(e) = other.epsilon {
            self.accept_epsilon(e)?;
        }
        for (a, b) in self.ones.iter_mut().zip(&other.ones) {
            *a += b;
        }
        self.n += other.n;
        Ok(())
    }

    /// Applies `(ones - n q) / (1/2 - q)` per position.
    pub fn finalize(&self) -> AggregatedEstimate {
        let counts = match self.epsilon {
            None => vec![0.0; self.ones.len()],
            Some(eps) => {
                let q = flip_probability(eps);
                let n = self.n as f64;
                self.ones.iter().map(|&c| (c as f64 - n * q) / (0.5 - q)).collect()
            }
        };
        AggregatedEstimate {
            counts,
            n: self.n,
            epsilon: self.epsilon,
        }
    }
}

pub fn aggregate<'a>(reports: impl IntoIterator<Item = &'a Report>, d: usize) -> Result<AggregatedEstimate> {
    let mut agg = Aggregator::new(d);
    for r in reports {
        agg.add(r)?;
    }
    Ok(agg.finalize())
}

/// Variance of one debiased count for a value of negligible frequency:
/// `n 4 e^eps / (e^eps - 1)^2`.
pub fn oue_variance(n: u64, epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    // 4 e^eps / (e^eps - 1)^2 = 1 / sinh^2(eps / 2), which stays finite for large eps.
    let s = (epsilon / 2.0).sinh();
    Ok(n as f64 / (s * s))
}

/// First-order mean and variance of the ratio of two estimates with true
/// values `fx`, `fy`.
pub fn ratio_stats(fx: f64, fy: f64, var_x: f64, var_y: f64, cov: f64) -> Result<(f64, f64)> {
    if fy == 0.0 || !fy.is_finite() {
        return Err(Error::invalid("ratio denominator frequency must be non-zero"));
    }
    let mean = fx / fy;
    // (fx/fy)^2 [var_x/fx^2 - 2 cov/(fx fy) + var_y/fy^2], expanded so fx = 0 is allowed.
    let fy2 = fy * fy;
    let variance = var_x / fy2 - 2.0 * fx * cov / (fy2 * fy) + fx * fx * var_y / (fy2 * fy2);
    Ok((mean, variance))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedStream;

    #[test]
    fn encode_examples() {
        let b = encode(2, 4).unwrap();
        assert_eq!(b.iter_ones().collect::<Vec<_>>(), vec![2]);
        assert_eq!(b.len(), 4);
        assert_eq!(encode(0, 1).unwrap().count_ones(), 1);
        assert!(encode(5, 4).is_err());
    }

    #[test]
    fn flip_probability_at_ln3() {
        assert!((flip_probability(3f64.ln()) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn perturb_rejects_bad_budget() {
        let mut rng = SeedStream::new(1).rng(0);
        assert!(perturb(&encode(0, 4).unwrap(), 0.0, &mut rng).is_err());
        assert!(perturb(&encode(0, 4).unwrap(), f64::NAN, &mut rng).is_err());
    }

    #[test]
    fn perturb_huge_budget_keeps_zeros() {
        let mut rng = SeedStream::new(9).rng(0);
        let zeros = bitvec![u64, Lsb0; 0; 300];
        for _ in 0..100 {
            assert_eq!(perturb(&zeros, 60.0, &mut rng).unwrap().bits().count_ones(), 0);
        }
    }

    #[test]
    fn perturb_is_deterministic_and_sized() {
        let enc = encode(70, 130).unwrap();
        let a = perturb(&enc, 1.0, &mut SeedStream::new(5).rng(2)).unwrap();
        let b = perturb(&enc, 1.0, &mut SeedStream::new(5).rng(2)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.domain_size(), 130);
        // Bits past the logical length stay clear.
        assert_eq!(a.bits().as_raw_slice()[2] >> 2, 0);
    }

    #[test]
    fn perturb_retains_half_of_ones() {
        let enc = encode(3, 8).unwrap();
        let mut rng = SeedStream::new(11).rng(0);
        let trials = 1_000_000;
        let kept = (0..trials)
            .filter(|_| perturb(&enc, 1.0, &mut rng).unwrap().bits()[3])
            .count();
        let frac = kept as f64 / trials as f64;
        assert!((frac - 0.5).abs() < 0.005, "{frac}");
    }

    #[test]
    fn aggregate_arithmetic() {
        // 400 ones among 1000 reports at q = 1/4 -> (400 - 250) / 0.25.
        let eps = 3f64.ln();
        let mut agg = Aggregator::new(1);
        agg.n = 1000;
        agg.ones[0] = 400;
        agg.epsilon = Some(eps);
        assert!((agg.finalize().counts[0] - 600.0).abs() < 1e-9);
    }

    #[test]
    fn aggregate_empty_is_zero() {
        let est = aggregate(std::iter::empty(), 5).unwrap();
        assert_eq!(est.counts, vec![0.0; 5]);
        assert_eq!(est.n, 0);
    }

    #[test]
    fn aggregate_rejects_mixed_inputs() {
        let mut rng = SeedStream::new(1).rng(0);
        let a = perturb(&encode(0, 4).unwrap(), 1.0, &mut rng).unwrap();
        let b = perturb(&encode(0, 4).unwrap(), 2.0, &mut rng).unwrap();
        let c = perturb(&encode(0, 5).unwrap(), 1.0, &mut rng).unwrap();
        assert!(matches!(aggregate([&a, &b], 4), Err(Error::Protocol(_))));
        assert!(matches!(aggregate([&a, &c], 4), Err(Error::Protocol(_))));
        let mut x = Aggregator::new(4);
        x.add(&a).unwrap();
        let mut y = Aggregator::new(4);
        y.add(&b).unwrap();
        assert!(x.merge(&y).is_err());
    }

    #[test]
    fn variance_examples() {
        assert!((oue_variance(1, 3f64.ln()).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(oue_variance(0, 1.0).unwrap(), 0.0);
        assert!(oue_variance(1, 0.0).is_err());
    }

    #[test]
    fn ratio_examples() {
        let (m, v) = ratio_stats(3.0, 3.0, 2.0, 2.0, 2.0).unwrap();
        assert!((m - 1.0).abs() < 1e-15 && v.abs() < 1e-15);
        let (m, v) = ratio_stats(1.0, 2.0, 1.0, 1.0, 0.0).unwrap();
        assert!((m - 0.5).abs() < 1e-15);
        assert!((v - 0.3125).abs() < 1e-15);
        assert!(ratio_stats(1.0, 0.0, 1.0, 1.0, 0.0).is_err());
    }
}
