//! Empirical distribution functions, their left-continuous inverse, and the
//! randomized probability integral transform used for discrete variables.

use rand::distr::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Step-function ECDF over the distinct values of a sample.
///
/// `cdf_steps[i]` is `#{x <= support[i]} / n`, computed from integer counts so
/// that the last step is exactly 1 and `quantile(cdf(v)) == v` holds for every
/// support point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDistribution {
    sorted_support: Vec<f64>,
    cdf_steps: Vec<f64>,
    n: usize,
}

impl EmpiricalDistribution {
    pub fn new(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("ecdf needs at least one value"));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite value {v} in ecdf input")));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let mut support = Vec::new();
        let mut steps = Vec::new();
        for (i, &v) in sorted.iter().enumerate() {
            if i + 1 == n || sorted[i + 1] != v {
                support.push(v);
                steps.push((i + 1) as f64 / n as f64);
            }
        }
        Ok(EmpiricalDistribution {
            sorted_support: support,
            cdf_steps: steps,
            n,
        })
    }

    pub fn support(&self) -> &[f64] {
        &self.sorted_support
    }

    pub fn steps(&self) -> &[f64] {
        &self.cdf_steps
    }

    pub fn sample_size(&self) -> usize {
        self.n
    }

    pub fn min(&self) -> f64 {
        self.sorted_support[0]
    }

    pub fn max(&self) -> f64 {
        *self.sorted_support.last().unwrap()
    }

    /// `F(v) = #{x <= v} / n`.
    pub fn cdf(&self, v: f64) -> f64 {
        let idx = self.sorted_support.partition_point(|&s| s <= v);
        if idx == 0 {
            0.0
        } else {
            self.cdf_steps[idx - 1]
        }
    }

    /// Index into [`support`](Self::support) of `inf{v : F(v) >= u}`; `u = 0` maps to the minimum.
    pub fn quantile_index(&self, u: f64) -> Result<usize> {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::ProbabilityOutOfRange(u));
        }
        let idx = self.cdf_steps.partition_point(|&c| c < u);
        Ok(idx.min(self.cdf_steps.len() - 1))
    }

    /// Generalized inverse `inf{v in support : F(v) >= u}`.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        Ok(self.sorted_support[self.quantile_index(u)?])
    }
}

/// Builds the ECDF of a sample.
pub fn ecdf(values: &[f64]) -> Result<EmpiricalDistribution> {
    EmpiricalDistribution::new(values)
}

pub fn quantile(dist: &EmpiricalDistribution, u: f64) -> Result<f64> {
    dist.quantile(u)
}

/// `(F(x-), F(x))` for an observed value of a discrete variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscreteCdfPair {
    pub lower: f64,
    pub upper: f64,
}

impl DiscreteCdfPair {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lower) {
            return Err(Error::ProbabilityOutOfRange(lower));
        }
        if !(0.0..=1.0).contains(&upper) {
            return Err(Error::ProbabilityOutOfRange(upper));
        }
        if lower > upper {
            return Err(Error::InvalidParameter(format!(
                "cdf pair lower {lower} exceeds upper {upper}"
            )));
        }
        Ok(DiscreteCdfPair { lower, upper })
    }

    pub fn is_degenerate(&self) -> bool {
        self.upper <= self.lower
    }
}

/// Draws `q ~ Uniform(lower, upper)`.
pub fn randomized_pit<R: Rng + ?Sized>(pair: DiscreteCdfPair, rng: &mut R) -> Result<f64> {
    if pair.is_degenerate() {
        return Err(Error::DegeneratePair {
            lower: pair.lower,
            upper: pair.upper,
        });
    }
    let w: f64 = rng.sample(Open01);
    Ok(pair.lower + (pair.upper - pair.lower) * w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn counting_definition() {
        let d = ecdf(&[1.0, 2.0, 2.0, 5.0]).unwrap();
        assert_eq!(d.cdf(2.0), 0.75);
        assert_eq!(d.cdf(0.0), 0.0);
        assert_eq!(d.cdf(4.9), 0.75);
        assert_eq!(d.cdf(5.0), 1.0);
        assert_eq!(ecdf(&[7.0]).unwrap().cdf(7.0), 1.0);
        assert!(matches!(ecdf(&[]), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn generalized_inverse() {
        let d = ecdf(&[1.0, 2.0, 2.0, 5.0]).unwrap();
        assert_eq!(d.quantile(0.5).unwrap(), 2.0);
        assert_eq!(d.quantile(1.0).unwrap(), 5.0);
        assert_eq!(d.quantile(0.0).unwrap(), 1.0);
        assert_eq!(d.quantile(0.25).unwrap(), 1.0);
        assert_eq!(d.quantile(0.2500001).unwrap(), 2.0);
        assert!(matches!(d.quantile(1.5), Err(Error::ProbabilityOutOfRange(_))));
        assert!(d.quantile(-0.1).is_err());
    }

    #[test]
    fn quantile_at_two_thirds() {
        // steps are 1/6, 2/6, ..., 1; the first step reaching 2/3 is the 4th value
        let sample = [1.0, 2.0, 3.0, 11.0, 12.0, 13.0];
        let steps: Vec<f64> = (1..=6).map(|k| k as f64 / 6.0).collect();
        let oracle = sample[steps.iter().position(|&s| s >= 2.0 / 3.0).unwrap()];
        assert_eq!(oracle, 11.0);
        assert_eq!(ecdf(&sample).unwrap().quantile(2.0 / 3.0).unwrap(), 11.0);
    }

    #[test]
    fn pit_intervals() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p1 = 0.7;
        let zero = DiscreteCdfPair::new(0.0, 1.0 - p1).unwrap();
        let one = DiscreteCdfPair::new(1.0 - p1, 1.0).unwrap();
        for _ in 0..1000 {
            let q = randomized_pit(zero, &mut rng).unwrap();
            assert!(q > 0.0 && q < 0.3 + 1e-15);
            let q = randomized_pit(one, &mut rng).unwrap();
            assert!(q > 0.3 - 1e-15 && q < 1.0);
        }
        let flat = DiscreteCdfPair::new(0.4, 0.4).unwrap();
        assert!(matches!(
            randomized_pit(flat, &mut rng),
            Err(Error::DegeneratePair { .. })
        ));
        assert!(DiscreteCdfPair::new(0.5, 0.4).is_err());
    }

    proptest! {
        #[test]
        fn galois_inequalities(values in prop::collection::vec(0u8..12, 1..40), u in 0.0f64..=1.0) {
            let values: Vec<f64> = values.into_iter().map(f64::from).collect();
            let d = ecdf(&values).unwrap();
            if u > 0.0 {
                prop_assert!(d.cdf(d.quantile(u).unwrap()) >= u);
            }
            for &v in d.support() {
                prop_assert!(d.quantile(d.cdf(v)).unwrap() <= v);
                prop_assert_eq!(d.quantile(d.cdf(v)).unwrap(), v);
            }
        }

        #[test]
        fn monotone_right_continuous(values in prop::collection::vec(-50i32..50, 1..60)) {
            let values: Vec<f64> = values.into_iter().map(f64::from).collect();
            let d = ecdf(&values).unwrap();
            let mut prev = 0.0;
            for t in -60..=60 {
                let f = d.cdf(t as f64);
                prop_assert!(f >= prev);
                prev = f;
            }
            for &v in d.support() {
                prop_assert_eq!(d.cdf(v), d.cdf(v + 1e-9));
            }
            prop_assert_eq!(*d.steps().last().unwrap(), 1.0);
        }

        #[test]
        fn quantile_lands_in_sample(values in prop::collection::vec(-1e3f64..1e3, 1..50),
                                    probes in prop::collection::vec(0.0f64..=1.0, 1..20)) {
            let d = ecdf(&values).unwrap();
            for u in probes {
                let q = d.quantile(u).unwrap();
                prop_assert!(values.contains(&q));
            }
        }
    }
}
