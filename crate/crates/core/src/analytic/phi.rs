//! The interference functional `φ` and its memo table.

use std::collections::HashMap;
use std::sync::Mutex;

use crate::error::{Error, Result};
use crate::quadrature::Quadrature;
use crate::scalar::Real;
use crate::specfun::{beta_fn, lauricella_fd, LauricellaArgs};

/// How `φ` is evaluated inside `Ψ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum PhiMode {
    /// Two-dimensional quadrature over the plane.
    Exact,
    /// Closed form that places both users at one point.
    #[default]
    Approx,
}

/// Thresholds with their weights at one user, merged on equal thresholds and sorted.
/// Zero thresholds and zero weights are dropped; every kept entry is finite and positive.
pub(crate) type Side<T> = Vec<(T, u32)>;

pub(crate) fn canonical_side<T: Real>(u: &[T], tau: &[u32]) -> Side<T> {
    let mut side: Side<T> = u
        .iter()
        .zip(tau.iter())
        .filter(|(u, t)| **t > 0 && **u > T::zero())
        .map(|(u, t)| (*u, *t))
        .collect();
    side.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite thresholds"));
    let mut merged: Side<T> = Vec::with_capacity(side.len());
    for (u, t) in side {
        match merged.last_mut() {
            Some(last) if last.0 == u => last.1 += t,
            _ => merged.push((u, t)),
        }
    }
    merged
}

pub(crate) fn merge_sides<T: Real>(a: &Side<T>, b: &Side<T>) -> Side<T> {
    let (u, t): (Vec<T>, Vec<u32>) = a.iter().chain(b.iter()).copied().unzip();
    canonical_side(&u, &t)
}

/// `π·B(a, c−a)·U_μ^(2/α−1)·Σ_κ τ_κ U_κ F_D(a; τ_ι + δ_ικ; c; 1 − U_ι/U_μ)` with
/// `a = 1 − 2/α`, `c = Στ + 1` and `μ` the largest threshold.
pub(crate) fn closed_form<T: Real>(entries: &Side<T>, alpha: T) -> Result<T> {
    let Some(mu) = (0..entries.len()).max_by(|&i, &j| {
        entries[i]
            .0
            .partial_cmp(&entries[j].0)
            .expect("finite thresholds")
    }) else {
        return Ok(T::zero());
    };
    let two_over_alpha = T::lit(2.0) / alpha;
    let a = T::one() - two_over_alpha;
    let total: u32 = entries.iter().map(|e| e.1).sum();
    let c = T::lit(f64::from(total)) + T::one();
    let u_mu = entries[mu].0;

    let others: Vec<usize> = (0..entries.len()).filter(|&i| i != mu).collect();
    // A ratio below ε would round x to 1. Only the term weighted by that tiny U depends
    // non-smoothly on x there, so the clamp costs nothing.
    let x: Vec<T> = others
        .iter()
        .map(|&i| (T::one() - entries[i].0 / u_mu).min(T::one() - T::epsilon()))
        .collect();
    let mut acc = T::zero();
    for (kappa, &(u_k, t_k)) in entries.iter().enumerate() {
        let b = others
            .iter()
            .map(|&i| T::lit(f64::from(entries[i].1 + u32::from(i == kappa))))
            .collect();
        let fd = lauricella_fd(&LauricellaArgs::new(a, b, c, x.clone())?)?;
        acc = acc + T::lit(f64::from(t_k)) * u_k * fd;
    }
    Ok(T::PI() * beta_fn(a, c - a)? * u_mu.powf(two_over_alpha - T::one()) * acc)
}

/// `∫_ℝ² 1 − Π(1 + U ℓ(|x − o₁|))^(−τ) Π(1 + Û ℓ(|x − o₂|))^(−τ̂) dx` with `|o₁ − o₂| = d`,
/// in polar coordinates about the midpoint. The radial tail beyond `R` is mapped onto
/// `(0, 1]`, so nothing is truncated.
pub(crate) fn plane_integral<T: Real>(
    near: &Side<T>,
    far: &Side<T>,
    alpha: T,
    d: T,
) -> Result<T> {
    if near.is_empty() && far.is_empty() {
        return Ok(T::zero());
    }
    let two = T::lit(2.0);
    let half = d / two;
    let neg_half_alpha = -alpha / two;
    let log_survival = |dist2: T, side: &Side<T>| -> T {
        let gain = dist2.max(T::zero()).powf(neg_half_alpha);
        side.iter().fold(T::zero(), |acc, &(u, t)| {
            acc - T::lit(f64::from(t)) * (u * gain).ln_1p()
        })
    };
    let integrand = |rho: T, cos_t: T| -> T {
        let q = rho * rho + half * half;
        let cross = rho * d * cos_t;
        let s = log_survival(q + cross, near) + log_survival(q - cross, far);
        -s.exp_m1()
    };

    let scales: Vec<T> = near
        .iter()
        .chain(far.iter())
        .map(|&(u, t)| (u * T::lit(f64::from(t))).powf(alpha.recip()))
        .collect();
    let s_max = scales.iter().copied().fold(T::zero(), T::max);
    let radius = (T::lit(8.0) * s_max).max(T::lit(4.0) * d);
    let mut points = vec![T::zero(), radius];
    if half > T::zero() {
        points.push(half);
    }
    // Each user sits at ρ = d/2; its bump has width of order its scale.
    let mut angles = vec![T::zero(), T::PI() / two, T::PI()];
    for &s in &scales {
        for f in [0.25, 1.0, 3.0] {
            let w = s * T::lit(f);
            for p in [w, half - w, half + w] {
                if p > T::zero() && p < radius {
                    points.push(p);
                }
            }
            if half > T::zero() && w < half {
                let theta = (w / half).asin();
                angles.extend([theta, T::PI() - theta]);
            }
        }
    }
    points.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
    points.dedup();
    angles.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
    angles.dedup();

    // Absolute floors are relative to s_max², the scale of every radial integral,
    // so that small pieces such as the tail are not resolved below roundoff.
    let area = s_max * s_max;
    let inner_quad = Quadrature {
        abs_tol: T::lit(1e-13) * area,
        ..Quadrature::<T>::with_tolerance(0.0, 1e-11)
    };
    let outer_quad = Quadrature {
        abs_tol: T::lit(1e-11) * area,
        ..Quadrature::<T>::with_tolerance(0.0, 1e-9)
    };
    // Beyond R, ρ = R·t^(−m): the integrand there is ρ^(−α) times a series in 1/ρ, so
    // in t it behaves as t^(m(α−2)−1) times a series in t^m, smooth for m(α−2) ≥ 3.
    let m = (T::lit(3.0) / (alpha - two)).ceil().max(T::one());
    let tail_jac = radius * radius * m;

    let radial = |theta: T| -> Result<T> {
        let cos_t = theta.cos();
        let body = inner_quad.integrate_segments(|rho| integrand(rho, cos_t) * rho, &points)?;
        let tail = inner_quad.integrate(
            |t: T| {
                // ρ dρ = R²·m·t^(−2m−1) dt
                let scale = t.powf(-m);
                let v = integrand(radius * scale, cos_t) * tail_jac * scale * scale / t;
                // Past overflow the integrand has long since vanished.
                if v.is_finite() {
                    v
                } else {
                    T::zero()
                }
            },
            T::zero(),
            T::one(),
        )?;
        Ok(body.value + tail.value)
    };

    let mut failure: Option<Error> = None;
    let outer = outer_quad.integrate_segments(
        |theta| match radial(theta) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                T::zero()
            }
        },
        &angles,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    // The integrand is even in θ.
    Ok(two * outer?.value)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub(crate) struct PhiKey {
    exact: bool,
    alpha: u64,
    d: u64,
    near: Vec<(u64, u32)>,
    far: Vec<(u64, u32)>,
}

impl PhiKey {
    pub(crate) fn new<T: Real>(exact: bool, alpha: T, d: T, near: &Side<T>, far: &Side<T>) -> Self {
        let bits = |s: &Side<T>| s.iter().map(|&(u, t)| (u.as_f64().to_bits(), t)).collect();
        PhiKey {
            exact,
            alpha: alpha.as_f64().to_bits(),
            d: d.as_f64().to_bits(),
            near: bits(near),
            far: bits(far),
        }
    }
}

/// Memo table for `φ`. `φ` depends on neither the SNR nor `λ`, so one table can
/// serve a whole sweep over those parameters.
#[derive(Debug, Default)]
pub struct PhiCache<T> {
    map: Mutex<HashMap<PhiKey, T>>,
}

impl<T: Real> PhiCache<T> {
    pub fn new() -> Self {
        PhiCache {
            map: Mutex::new(HashMap::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.map.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&self) {
        self.map.lock().expect("cache lock").clear();
    }

    pub(crate) fn get_or_compute<F>(&self, key: PhiKey, compute: F) -> Result<T>
    where
        F: FnOnce() -> Result<T>,
    {
        if let Some(v) = self.map.lock().expect("cache lock").get(&key) {
            return Ok(*v);
        }
        // Computed unlocked; a concurrent duplicate only repeats work.
        let v = compute()?;
        self.map.lock().expect("cache lock").insert(key, v);
        Ok(v)
    }
}
