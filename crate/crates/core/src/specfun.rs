//! Beta function and the fourth Lauricella function `F_D`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use gauss_quad::jacobi::GaussJacobi;

use crate::error::{Error, Result};
use crate::quadrature::Quadrature;
use crate::scalar::Real;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma<T: Real>(x: T) -> T {
    let half = T::lit(0.5);
    if x < half {
        // Γ(x)Γ(1−x) = π / sin(πx)
        let pi = T::PI();
        return (pi / (pi * x).sin()).ln() - ln_gamma(T::one() - x);
    }
    let x = x - T::one();
    let mut acc = T::lit(LANCZOS[0]);
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc = acc + T::lit(c) / (x + T::lit(i as f64));
    }
    let t = x + T::lit(LANCZOS_G) + half;
    half * (T::lit(2.0) * T::PI()).ln() + (x + half) * t.ln() - t + acc.ln()
}

/// `B(a, b) = Γ(a)Γ(b)/Γ(a+b)`.
pub fn beta_fn<T: Real>(a: T, b: T) -> Result<T> {
    if !(a > T::zero() && b > T::zero()) || !a.is_finite() || !b.is_finite() {
        return Err(Error::domain(format!(
            "beta function needs positive finite arguments, got ({}, {})",
            a, b
        )));
    }
    Ok((ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)).exp())
}

/// Parameters of `F_D^(n)(a; b_1..b_n; c; x_1..x_n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LauricellaArgs<T> {
    pub a: T,
    pub b: Vec<T>,
    pub c: T,
    pub x: Vec<T>,
}

impl<T: Real> LauricellaArgs<T> {
    pub fn new(a: T, b: Vec<T>, c: T, x: Vec<T>) -> Result<Self> {
        let args = LauricellaArgs { a, b, c, x };
        args.validate()?;
        Ok(args)
    }

    pub fn validate(&self) -> Result<()> {
        if self.b.len() != self.x.len() {
            return Err(Error::domain(format!(
                "F_D needs as many exponents as arguments ({} vs {})",
                self.b.len(),
                self.x.len()
            )));
        }
        if !(self.a > T::zero()) || !(self.c > self.a) {
            return Err(Error::domain(format!(
                "F_D integral representation diverges unless c > a > 0 (a = {}, c = {})",
                self.a, self.c
            )));
        }
        if let Some(x) = self.x.iter().find(|x| !(**x < T::one())) {
            return Err(Error::domain(format!(
                "F_D arguments must be below 1, got {}",
                x
            )));
        }
        if self.b.iter().chain(self.x.iter()).any(|v| !v.is_finite()) {
            return Err(Error::domain("F_D parameters must be finite"));
        }
        Ok(())
    }
}

/// Normalized Euler integral
/// `(1/B(a, c−a)) ∫₀¹ z^(a−1) (1−z)^(c−a−1) Π (1 − x_i z)^(−b_i) dz`,
/// equal to 1 when every factor of the product is identically 1.
pub fn lauricella_fd<T: Real>(args: &LauricellaArgs<T>) -> Result<T> {
    lauricella_fd_with(args, &Quadrature::default())
}

/// Even degrees only: the node solver pins the middle node of odd rules at the
/// centre, which is wrong unless both exponents agree.
const JACOBI_DEGREES: [usize; 6] = [8, 12, 16, 24, 32, 48];

/// Gauss–Jacobi rule for the weight `z^(a−1)(1−z)^(ca−1)` on `[0, 1]`, as `(z, w)` pairs.
type Rule = Arc<Vec<(f64, f64)>>;

fn jacobi_rule(a: f64, ca: f64, degree: usize) -> Result<Rule> {
    static RULES: OnceLock<Mutex<HashMap<(u64, u64, usize), Rule>>> = OnceLock::new();
    let key = (a.to_bits(), ca.to_bits(), degree);
    let rules = RULES.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(rule) = rules.lock().expect("rule table poisoned").get(&key) {
        return Ok(Arc::clone(rule));
    }
    let gj = GaussJacobi::new(degree, ca - 1.0, a - 1.0)
        .map_err(|e| Error::domain(format!("Gauss–Jacobi rule: {e}")))?;
    let rule: Rule = Arc::new(
        gj.iter()
            .map(|(t, w)| (0.5 * (1.0 + t), *w))
            .collect(),
    );
    rules
        .lock()
        .expect("rule table poisoned")
        .insert(key, Arc::clone(&rule));
    Ok(rule)
}

fn log_product<T: Real>(active: &[(T, T)], z: T) -> T {
    active
        .iter()
        .fold(T::zero(), |acc, &(x, b)| acc - b * (-x * z).ln_1p())
}

/// Ratio of Gauss–Jacobi sums to the rule's total weight. The product is analytic on
/// `[0, 1]` with its nearest singularity at `1/x_max`, so the error falls geometrically
/// with the degree; the error of the degree-`n` rule is taken as the squared relative
/// gap to the degree-`n/2` rule. `None` when no tabulated degree is accurate enough.
fn lauricella_jacobi<T: Real>(active: &[(T, T)], a: T, ca: T, quad: &Quadrature<T>) -> Result<Option<T>> {
    let x_max = active
        .iter()
        .fold(0.0f64, |m, &(x, _)| m.max(x.abs().as_f64()));
    // Convergence factor ρ of the Bernstein ellipse through the singularity.
    let t_sing = 2.0 / x_max - 1.0;
    let rho = t_sing + (t_sing * t_sing - 1.0).max(0.0).sqrt();
    let target = quad.rel_tol.as_f64().max(T::epsilon().as_f64());
    let Some(&degree) = JACOBI_DEGREES
        .iter()
        .find(|&&n| (2.0 * n as f64) * rho.ln() >= -(target * 1e-3).ln())
    else {
        return Ok(None);
    };
    let sum = |n: usize| -> Result<T> {
        let rule = jacobi_rule(a.as_f64(), ca.as_f64(), n)?;
        let (num, den) = rule.iter().fold((T::zero(), T::zero()), |(num, den), &(z, w)| {
            let w = T::lit(w);
            (num + w * log_product(active, T::lit(z)).exp(), den + w)
        });
        Ok(num / den)
    };
    let fine = sum(degree)?;
    let coarse = sum(degree / 2)?;
    let gap = ((fine - coarse) / fine).abs().as_f64();
    if gap * gap <= 1e-2 * target && gap.is_finite() {
        Ok(Some(fine))
    } else {
        Ok(None)
    }
}

pub fn lauricella_fd_with<T: Real>(args: &LauricellaArgs<T>, quad: &Quadrature<T>) -> Result<T> {
    args.validate()?;
    let active: Vec<(T, T)> = args
        .x
        .iter()
        .zip(args.b.iter())
        .filter(|(x, b)| **x != T::zero() && **b != T::zero())
        .map(|(x, b)| (*x, *b))
        .collect();
    if active.is_empty() {
        return Ok(T::one());
    }
    let a = args.a;
    let ca = args.c - args.a;
    if let Some(v) = lauricella_jacobi(&active, a, ca, quad)? {
        return Ok(v);
    }
    lauricella_adaptive(&active, a, ca, quad)
}

/// Breakpoints `end·8^(−j)` grading a segment towards a non-smooth endpoint at 0.
fn graded<T: Real>(end: T) -> impl Iterator<Item = T> {
    (1..=12).map(move |j| end * T::lit(8.0f64.powi(-j)))
}

/// Adaptive fallback for arguments close to 1.
fn lauricella_adaptive<T: Real>(active: &[(T, T)], a: T, ca: T, quad: &Quadrature<T>) -> Result<T> {
    let half = T::lit(0.5);

    // z = u^(1/a) on [0, 1/2] absorbs the z^(a−1) endpoint behaviour.
    let lower_end = half.powf(a);
    let mut lower_points: Vec<T> = graded(lower_end).collect();
    lower_points.extend([T::zero(), lower_end]);
    lower_points.sort_by(|p, q| p.partial_cmp(q).expect("finite breakpoints"));
    let lower = quad.integrate_segments(
        |u: T| {
            let z = u.powf(a.recip());
            (T::one() - z).powf(ca - T::one()) * log_product(active, z).exp() / a
        },
        &lower_points,
    )?;

    // 1 − z = v^(1/(c−a)) on [1/2, 1] absorbs the (1−z)^(c−a−1) end.
    // For x near 1 the product varies on the scale 1 − z ~ (1 − x)/x, and decays
    // algebraically above it; geometric breakpoints cover every decade in between.
    let upper_end = half.powf(ca);
    let mut points: Vec<T> = graded(upper_end).collect();
    points.extend([T::zero(), upper_end]);
    for &(x, _) in active {
        if x > T::zero() {
            let width = (T::one() - x) / x;
            let mut m = T::lit(0.25);
            loop {
                let v = (width * m).powf(ca);
                if !(v < upper_end) {
                    break;
                }
                if v > T::zero() {
                    points.push(v);
                }
                m = m * T::lit(4.0);
            }
        }
    }
    points.sort_by(|p, q| p.partial_cmp(q).expect("finite breakpoints"));
    points.dedup();
    // 1 − x·z = (1 − x) + x·(1 − z) keeps full precision as z → 1.
    let complement: Vec<(T, T, T)> = active.iter().map(|&(x, b)| (x, T::one() - x, b)).collect();
    let upper = quad.integrate_segments(
        |v: T| {
            let w = v.powf(ca.recip());
            let z = T::one() - w;
            let log_product = complement
                .iter()
                .fold(T::zero(), |acc, &(x, cx, b)| acc - b * (cx + x * w).ln());
            z.powf(a - T::one()) * log_product.exp() / ca
        },
        &points,
    )?;

    Ok((lower.value + upper.value) / beta_fn(a, ca)?)
}
