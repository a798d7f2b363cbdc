//! Compensated accumulation and the binomial-weighted alternating sums of the outage formulas.

use crate::error::Result;
use crate::scalar::Real;

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy)]
pub struct CompensatedSum<T> {
    sum: T,
    carry: T,
}

impl<T: Real> Default for CompensatedSum<T> {
    fn default() -> Self {
        CompensatedSum {
            sum: T::zero(),
            carry: T::zero(),
        }
    }
}

impl<T: Real> CompensatedSum<T> {
    pub fn add(&mut self, x: T) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry = self.carry + ((self.sum - t) + x);
        } else {
            self.carry = self.carry + ((x - t) + self.sum);
        }
        self.sum = t;
    }

    pub fn value(&self) -> T {
        self.sum + self.carry
    }
}

impl<T: Real> FromIterator<T> for CompensatedSum<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        let mut acc = CompensatedSum::default();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

pub fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

/// `Σ_{τ_i ∈ 0..=n_i} (−1)^{Στ} Π C(n_i, τ_i) · f(τ)`.
pub fn alternating_sum<T, F>(ranges: &[u32], mut f: F) -> Result<T>
where
    T: Real,
    F: FnMut(&[u32]) -> Result<T>,
{
    let mut tau = vec![0u32; ranges.len()];
    let mut acc = CompensatedSum::default();
    loop {
        let mut weight = 1.0;
        let mut parity = 0;
        for (&n, &t) in ranges.iter().zip(tau.iter()) {
            weight *= binomial(n, t);
            parity += t;
        }
        if parity % 2 == 1 {
            weight = -weight;
        }
        acc.add(T::lit(weight) * f(&tau)?);

        let mut i = 0;
        loop {
            if i == tau.len() {
                return Ok(acc.value());
            }
            if tau[i] < ranges[i] {
                tau[i] += 1;
                break;
            }
            tau[i] = 0;
            i += 1;
        }
    }
}
