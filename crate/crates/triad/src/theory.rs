//! Closed-form limit quantities of the model.
//!
//! For parameters `(p, r, q)` the limiting fraction of vertices of weight `w`
//! is `x_w`, driven by the coefficients
//!
//! ```text
//! alpha = (2/3) p r + (1 - p) q
//! beta  = [2 p (1 - r) + 3 (1 - p) (1 - q)] / p
//! ```
//!
//! via the recursion `x_1 = 1/(alpha + beta + 1)`,
//! `x_w = x_{w-1} * (alpha (w-1) + beta) / (alpha w + beta + 1)`.
//! The sequence sums to 1 and decays like `C * w^-(1 + 1/alpha)`.
//!
//! Gamma ratios are always evaluated through log-Gamma differences:
//! `Gamma(w + beta/alpha)` alone overflows an `f64` near `w ~ 170`.

use std::io;

use serde::Serialize;
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TheoryError {
    #[error("parameter {name} = {value} out of range ({expected})")]
    ParamOutOfRange {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },
    #[error("scale-free condition violated: need r > 0, or q > 0 and p < 1 (alpha would be 0)")]
    ScaleFreeViolation,
    #[error("alpha = {0} out of range: scaling factors need 0 < alpha < 1")]
    AlphaOutOfRange(f64),
}

/// Model parameters.
///
/// * `p` — probability that a step creates a new vertex, `0 < p <= 1`.
/// * `r` — probability of the preferential rule at new-vertex steps.
/// * `q` — probability of the preferential rule at old-triple steps.
///
/// Construction additionally requires the scale-free condition
/// (`r > 0`, or `q > 0` and `p < 1`), which is exactly `alpha > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Params {
    p: f64,
    r: f64,
    q: f64,
}

impl Params {
    pub fn new(p: f64, r: f64, q: f64) -> Result<Self, TheoryError> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(TheoryError::ParamOutOfRange {
                name: "p",
                value: p,
                expected: "0 < p <= 1",
            });
        }
        if !(0.0..=1.0).contains(&r) {
            return Err(TheoryError::ParamOutOfRange {
                name: "r",
                value: r,
                expected: "0 <= r <= 1",
            });
        }
        if !(0.0..=1.0).contains(&q) {
            return Err(TheoryError::ParamOutOfRange {
                name: "q",
                value: q,
                expected: "0 <= q <= 1",
            });
        }
        if !(r > 0.0 || (q > 0.0 && p < 1.0)) {
            return Err(TheoryError::ScaleFreeViolation);
        }
        Ok(Params { p, r, q })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn coefficients(&self) -> Coefficients {
        coefficients(self)
    }
}

/// The pair `(alpha, beta)` driving both the weight-distribution recursion
/// and the per-step participation probability `alpha w / n + beta p / V`.
///
/// For valid [`Params`], `0 < alpha < 1` (since `alpha <= 1 - p/3`) and
/// `beta >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Coefficients {
    pub alpha: f64,
    pub beta: f64,
}

pub fn coefficients(params: &Params) -> Coefficients {
    let (p, r, q) = (params.p, params.r, params.q);
    Coefficients {
        alpha: (2.0 / 3.0) * p * r + (1.0 - p) * q,
        beta: (2.0 * p * (1.0 - r) + 3.0 * (1.0 - p) * (1.0 - q)) / p,
    }
}

/// The limiting weight distribution `x_1 .. x_wmax` together with the tail
/// remainders `y_0 .. y_wmax` (`y_w = 1 - sum_{v <= w} x_v`, `y_0 = 1`) and
/// the tail asymptotics `x_w ~ tail_constant * w^-exponent`.
#[derive(Debug, Clone, Serialize)]
pub struct TheoreticalDistribution {
    x: Vec<f64>,
    y: Vec<f64>,
    pub exponent: f64,
    pub tail_constant: f64,
}

impl TheoreticalDistribution {
    pub fn w_max(&self) -> usize {
        self.x.len()
    }

    /// `x_w`, 1-based.
    pub fn x(&self, w: usize) -> f64 {
        assert!(w >= 1 && w <= self.x.len(), "w = {w} out of range");
        self.x[w - 1]
    }

    /// `y_w`, 0-based; `y(0) = 1`.
    pub fn y(&self, w: usize) -> f64 {
        self.y[w]
    }

    /// All `x_w` in order, `xs()[0] = x_1`.
    pub fn xs(&self) -> &[f64] {
        &self.x
    }

    pub fn ys(&self) -> &[f64] {
        &self.y
    }

    /// `(w, x_w)` pairs, ready for tail fitting.
    pub fn points(&self) -> Vec<(u64, f64)> {
        self.x
            .iter()
            .enumerate()
            .map(|(i, &x)| ((i + 1) as u64, x))
            .collect()
    }

    /// Builds a distribution directly from raw `x` values (tail fields
    /// zeroed), for comparing an empirical histogram against itself.
    #[cfg(test)]
    pub(crate) fn from_x_values(x: Vec<f64>) -> Self {
        assert!(!x.is_empty());
        let mut y = Vec::with_capacity(x.len() + 1);
        y.push(1.0);
        for (w, &xw) in x.iter().enumerate() {
            y.push(y[w] - xw);
        }
        TheoreticalDistribution {
            x,
            y,
            exponent: 0.0,
            tail_constant: 0.0,
        }
    }

    /// CSV table with columns `w,x_w,y_w`.
    pub fn write_csv<W: io::Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "w,x_w,y_w")?;
        for w in 1..=self.x.len() {
            writeln!(out, "{},{},{}", w, self.x[w - 1], self.y[w])?;
        }
        Ok(())
    }
}

/// Evaluates the distribution by the forward recursion, the numerically
/// stable route: every factor lies in `(0, 1)` so there is no cancellation.
/// `y` is filled by telescoping, `y_w = y_{w-1} - x_w`.
pub fn xw_recursion(coeffs: &Coefficients, w_max: usize) -> TheoreticalDistribution {
    assert!(w_max >= 1, "w_max must be positive");
    let (a, b) = (coeffs.alpha, coeffs.beta);
    let mut x = Vec::with_capacity(w_max);
    let mut y = Vec::with_capacity(w_max + 1);
    y.push(1.0);
    let mut cur = 1.0 / (a + b + 1.0);
    x.push(cur);
    y.push(1.0 - cur);
    for w in 2..=w_max {
        let wf = w as f64;
        cur *= (a * (wf - 1.0) + b) / (a * wf + b + 1.0);
        x.push(cur);
        y.push(y[w - 1] - cur);
    }
    let (exponent, tail_constant) = tail_asymptotics(coeffs);
    TheoreticalDistribution {
        x,
        y,
        exponent,
        tail_constant,
    }
}

/// `ln Gamma(x + a) - ln Gamma(x)` without the catastrophic cancellation of
/// two separate log-Gamma calls (each is huge for large `x`, the difference
/// is only `~ a ln x`).
///
/// The fractional part of `a` is handled by a Stirling-series difference
/// after shifting `x` above 32; the integer part contributes plain
/// logarithms. Falls back to two log-Gamma calls when `a` is impractically
/// large (> 4096).
pub fn ln_gamma_ratio(x: f64, a: f64) -> f64 {
    assert!(x >= 1.0 && a >= 0.0, "need x >= 1 and a >= 0");
    if a > 4096.0 {
        return ln_gamma(x + a) - ln_gamma(x);
    }
    let m = a.floor();
    let f = a - m;
    // Gamma(x + m + f) / Gamma(x + f) = prod_{j < m} (x + f + j)
    let mut acc = 0.0;
    let mut j = 0.0;
    while j < m {
        acc += (x + f + j).ln();
        j += 1.0;
    }
    // shift x upward: lnG(x+f) - lnG(x) = lnG(x+1+f) - lnG(x+1) - ln1p(f/x)
    let mut x = x;
    while x < 32.0 {
        acc -= (f / x).ln_1p();
        x += 1.0;
    }
    // Stirling difference, exact to ~1e-15 absolute for x >= 32, 0 <= f < 1
    let stirling_tail = |z: f64| {
        let z2 = z * z;
        (1.0 / 12.0 - (1.0 / 360.0 - (1.0 / 1260.0 - 1.0 / (1680.0 * z2)) / z2) / z2) / z
    };
    acc + (x - 0.5) * (f / x).ln_1p() + f * ((x + f).ln() - 1.0) + stirling_tail(x + f)
        - stirling_tail(x)
}

/// `x_w` from the Gamma-ratio closed form
///
/// ```text
/// x_w = Gamma(1 + (beta+1)/alpha) Gamma(w + beta/alpha)
///     / [alpha Gamma(1 + beta/alpha) Gamma(w + (beta+1)/alpha + 1)]
/// ```
///
/// evaluated via log-Gamma differences. Cross-check for [`xw_recursion`].
pub fn xw_closed_form(coeffs: &Coefficients, w: u64) -> f64 {
    assert!(w >= 1, "w must be positive");
    let (a, b) = (coeffs.alpha, coeffs.beta);
    let wf = w as f64;
    let log_x = ln_gamma(1.0 + (b + 1.0) / a)
        - a.ln()
        - ln_gamma(1.0 + b / a)
        - ln_gamma_ratio(wf + b / a, 1.0 / a + 1.0);
    log_x.exp()
}

/// Tail behaviour of `x_w`: returns `(exponent, C)` with
/// `x_w ~ C * w^-exponent`, `exponent = 1 + 1/alpha`.
///
/// `C = Gamma(1 + (beta+1)/alpha) / (alpha * Gamma(1 + beta/alpha))` is the
/// exact `w -> infinity` limit of the closed form, read off with
/// `Gamma(w + a) / Gamma(w + b) ~ w^(a-b)`; there is no independently
/// published value for it.
pub fn tail_asymptotics(coeffs: &Coefficients) -> (f64, f64) {
    let (a, b) = (coeffs.alpha, coeffs.beta);
    let exponent = 1.0 + 1.0 / a;
    let log_c = ln_gamma(1.0 + (b + 1.0) / a) - a.ln() - ln_gamma(1.0 + b / a);
    (exponent, log_c.exp())
}

/// The deterministic scaling sequences
/// `b_n = prod_{i<=n} (1 + alpha/i)^-1` (decreasing, `b_n ~ Gamma(1+alpha) n^-alpha`)
/// and `e_n = prod_{i<=n} (1 - alpha/i)^-1` (increasing, needs `alpha < 1`).
#[derive(Debug, Clone)]
pub struct ScalingFactors {
    b: Vec<f64>,
    e: Vec<f64>,
}

impl ScalingFactors {
    pub fn n_max(&self) -> usize {
        self.b.len()
    }

    /// `b_n`, 1-based.
    pub fn b(&self, n: usize) -> f64 {
        assert!(n >= 1 && n <= self.b.len(), "n = {n} out of range");
        self.b[n - 1]
    }

    /// `e_n`, 1-based.
    pub fn e(&self, n: usize) -> f64 {
        assert!(n >= 1 && n <= self.e.len(), "n = {n} out of range");
        self.e[n - 1]
    }

    pub fn bs(&self) -> &[f64] {
        &self.b
    }

    pub fn es(&self) -> &[f64] {
        &self.e
    }
}

/// Computes `b_1..b_n` and `e_1..e_n` by stable product recurrences.
pub fn scaling_factors(alpha: f64, n_max: usize) -> Result<ScalingFactors, TheoryError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(TheoryError::AlphaOutOfRange(alpha));
    }
    assert!(n_max >= 1, "n_max must be positive");
    let mut b = Vec::with_capacity(n_max);
    let mut e = Vec::with_capacity(n_max);
    let (mut bp, mut ep) = (1.0, 1.0);
    for i in 1..=n_max {
        let fi = i as f64;
        bp *= fi / (fi + alpha);
        ep *= fi / (fi - alpha);
        b.push(bp);
        e.push(ep);
    }
    Ok(ScalingFactors { b, e })
}

/// `b_n = Gamma(n+1) Gamma(1+alpha) / Gamma(n+1+alpha)` via log-Gamma
/// differences.
pub fn b_closed_form(n: u64, alpha: f64) -> f64 {
    let nf = n as f64;
    (ln_gamma(1.0 + alpha) - ln_gamma_ratio(nf + 1.0, alpha)).exp()
}

/// `e_n = Gamma(1-alpha) Gamma(n+1) / Gamma(n+1-alpha)` via log-Gamma
/// differences.
pub fn e_closed_form(n: u64, alpha: f64) -> f64 {
    let nf = n as f64;
    (ln_gamma(1.0 - alpha) + ln_gamma_ratio(nf + 1.0 - alpha, alpha)).exp()
}
