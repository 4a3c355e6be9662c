//! Feasibility windows and a numerical upper bound on the rate functional
//! for the self-similar touch-down ansatz
//!
//! ```text
//! ĥ(x̂) = (x̂² + 1)^{γ/2},    ĵ(x̂) = −ηγ ∫₀^x̂ (y² + 1)^{γ/2−1} dy,
//! I_T ≤ T^{p₁+1}/(p₁+1)·J₁ + T^{p₂+1}/(p₂+1)·J₂,
//! J₁ = ∫ ĵ²/ĥ^m,  J₂ = ∫ ĥ^m (ĥ‴)²,
//! p₁ = ηγ(2−m) + 3η − 2,  p₂ = ηγ(m+2) − 5η.
//! ```

use crate::error::{Error, Result};
use crate::quadrature::{gk15, integrate};

/// Initial truncation radius of the spatial integrals.
pub const INITIAL_RADIUS: f64 = 10.0;
/// Largest truncation radius tried.
pub const MAX_RADIUS: f64 = 1e6;
/// Target ratio of analytic tail bound to the truncated integral.
pub const TAIL_RATIO: f64 = 1e-8;
const QUAD_REL_TOL: f64 = 1e-13;

/// Open interval; `None` from the window functions means empty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

impl Window {
    pub fn contains(&self, x: f64) -> bool {
        self.lo < x && x < self.hi
    }
}

fn check_m(m: f64) -> Result<()> {
    if !(m > 1.0) || !m.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "the ansatz is analysed for m > 1, got m = {m}"
        )));
    }
    Ok(())
}

/// The endpoints `(max(1/2, 1/m), min(1, 5/(2+m)))`, whether or not they
/// bound a nonempty window.
pub fn gamma_bounds(m: f64) -> Result<(f64, f64)> {
    check_m(m)?;
    Ok((0.5f64.max(1.0 / m), 1.0f64.min(5.0 / (2.0 + m))))
}

/// `max(1/2, 1/m) < γ < min(1, 5/(2+m))`.
pub fn gamma_window(m: f64) -> Result<Option<Window>> {
    let (lo, hi) = gamma_bounds(m)?;
    Ok((lo < hi).then_some(Window { lo, hi }))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaWindow {
    /// Window on `1/η`.
    pub inverse: Window,
    /// The corresponding window on `η` (upper end may be infinite).
    pub eta: Window,
}

/// `max(0, 5 − γ(m+2)) < 1/η < 3 − γ(m−2)` for `γ` in the closure of the
/// γ-window.
pub fn eta_window(m: f64, gamma: f64) -> Result<Option<EtaWindow>> {
    let (lo, hi) = gamma_bounds(m)?;
    if !(gamma >= lo && gamma <= hi) {
        return Err(Error::InvalidArgument(format!(
            "gamma = {gamma} lies outside the window [{lo}, {hi}] for m = {m}"
        )));
    }
    let inv_lo = (5.0 - gamma * (m + 2.0)).max(0.0);
    let inv_hi = 3.0 - gamma * (m - 2.0);
    if inv_lo >= inv_hi {
        return Ok(None);
    }
    let eta_hi = if inv_lo == 0.0 { f64::INFINITY } else { 1.0 / inv_lo };
    Ok(Some(EtaWindow {
        inverse: Window {
            lo: inv_lo,
            hi: inv_hi,
        },
        eta: Window {
            lo: 1.0 / inv_hi,
            hi: eta_hi,
        },
    }))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LdpAnsatz {
    pub m: f64,
    pub gamma: f64,
    pub eta: f64,
    pub t: f64,
}

impl LdpAnsatz {
    pub fn p1(&self) -> f64 {
        self.eta * self.gamma * (2.0 - self.m) + 3.0 * self.eta - 2.0
    }

    pub fn p2(&self) -> f64 {
        self.eta * self.gamma * (self.m + 2.0) - 5.0 * self.eta
    }

    /// Checks (st1), (st2), (tt1), (tt2) in that order.
    pub fn check_conditions(&self) -> Result<()> {
        let (m, g) = (self.m, self.gamma);
        if !(m * g > 1.0) {
            return Err(Error::Divergent {
                condition: "st1",
                detail: format!("m*gamma = {} must exceed 1", m * g),
            });
        }
        if !(m * g + 2.0 * g - 6.0 < -1.0) {
            return Err(Error::Divergent {
                condition: "st2",
                detail: format!("m*gamma + 2*gamma - 6 = {} must be below -1", m * g + 2.0 * g - 6.0),
            });
        }
        if !(self.p1() > -1.0) {
            return Err(Error::Divergent {
                condition: "tt1",
                detail: format!("p1 = {} must exceed -1", self.p1()),
            });
        }
        if !(self.p2() > -1.0) {
            return Err(Error::Divergent {
                condition: "tt2",
                detail: format!("p2 = {} must exceed -1", self.p2()),
            });
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        check_m(self.m)?;
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "gamma must lie in (0, 1), got {}",
                self.gamma
            )));
        }
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::InvalidArgument(format!("eta must be > 0, got {}", self.eta)));
        }
        if !(self.t > 0.0) || !self.t.is_finite() {
            return Err(Error::InvalidArgument(format!("T must be > 0, got {}", self.t)));
        }
        Ok(())
    }
}

/// `ĥ(x̂) = (x̂² + 1)^{γ/2}`.
pub fn profile(x: f64, gamma: f64) -> f64 {
    (x * x + 1.0).powf(0.5 * gamma)
}

/// Closed-form third derivative of [`profile`].
pub fn profile_third_derivative(x: f64, gamma: f64) -> f64 {
    let a = 0.5 * gamma;
    let u = x * x + 1.0;
    12.0 * a * (a - 1.0) * x * u.powf(a - 2.0)
        + 8.0 * a * (a - 1.0) * (a - 2.0) * x * x * x * u.powf(a - 3.0)
}

/// `ĵ(x̂)` by adaptive quadrature.
pub fn flux(x: f64, gamma: f64, eta: f64) -> f64 {
    let e = 0.5 * gamma - 1.0;
    let q = integrate(|y: f64| (y * y + 1.0).powf(e), 0.0, x.abs(), 0.0, 1e-14);
    -eta * gamma * q.value * x.signum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateBound {
    pub p1: f64,
    pub p2: f64,
    /// `T^{p₁+1}/(p₁+1)`.
    pub time_factor1: f64,
    /// `T^{p₂+1}/(p₂+1)`.
    pub time_factor2: f64,
    /// `∫_{|x̂|≤X} ĵ²/ĥ^m`.
    pub j1: f64,
    /// `∫_{|x̂|≤X} ĥ^m (ĥ‴)²`.
    pub j2: f64,
    /// Analytic bounds on `∫_{|x̂|>X}` of the two integrands (both sides).
    pub j1_tail: f64,
    pub j2_tail: f64,
    /// Quadrature error estimates of `j1` and `j2`.
    pub j1_error: f64,
    pub j2_error: f64,
    pub radius: f64,
    /// Whether both tail bounds fell below `1e-8` of their integrals
    /// before the radius cap.
    pub tail_converged: bool,
    /// `time_factor1·(j1 + j1_tail) + time_factor2·(j2 + j2_tail)`.
    pub bound: f64,
}

/// Even integrand pieces on `[0, X]` over geometric panels, with `ĵ`
/// carried across panel boundaries.
struct Integrals {
    j1: f64,
    j2: f64,
    j1_err: f64,
    j2_err: f64,
    flux_at_radius: f64,
}

fn panel_edges(radius: f64) -> Vec<f64> {
    let mut edges = vec![0.0, 0.5, 1.0];
    let mut x = 1.0;
    while x < radius {
        x = (2.0 * x).min(radius);
        edges.push(x);
    }
    edges
}

fn half_line_integrals(a: &LdpAnsatz, radius: f64) -> Integrals {
    let (m, gamma, eta) = (a.m, a.gamma, a.eta);
    let e = 0.5 * gamma - 1.0;
    let flux_density = |y: f64| (y * y + 1.0).powf(e);
    let mut j1 = 0.0;
    let mut j2 = 0.0;
    let mut j1_err = 0.0;
    let mut j2_err = 0.0;
    // Running value of ∫₀^{left} (y²+1)^{γ/2−1} dy.
    let mut base = 0.0;
    for w in panel_edges(radius).windows(2) {
        let (l, r) = (w[0], w[1]);
        let flux_at = |x: f64| -eta * gamma * (base + gk15(&flux_density, l, x).0);
        let q1 = integrate(
            |x: f64| {
                let j = flux_at(x);
                j * j / profile(x, gamma).powf(m)
            },
            l,
            r,
            0.0,
            QUAD_REL_TOL,
        );
        let q2 = integrate(
            |x: f64| {
                let d3 = profile_third_derivative(x, gamma);
                profile(x, gamma).powf(m) * d3 * d3
            },
            l,
            r,
            0.0,
            QUAD_REL_TOL,
        );
        j1 += q1.value;
        j2 += q2.value;
        j1_err += q1.error;
        j2_err += q2.error;
        base += integrate(flux_density, l, r, 0.0, 1e-15).value;
    }
    Integrals {
        j1,
        j2,
        j1_err,
        j2_err,
        flux_at_radius: eta * gamma * base,
    }
}

/// One-sided tail bounds `(∫_X^∞ ĵ²/ĥ^m, ∫_X^∞ ĥ^m(ĥ‴)²)`.
fn tail_bounds(a: &LdpAnsatz, radius: f64, flux_at_radius: f64) -> (f64, f64) {
    let (m, gamma, eta) = (a.m, a.gamma, a.eta);
    // |ĵ(x)| ≤ |ĵ(X)| + ηγ X^{γ−1}/(1−γ) and ĥ^m ≥ x^{mγ}.
    let jmax = flux_at_radius + eta * gamma * radius.powf(gamma - 1.0) / (1.0 - gamma);
    let t1 = jmax * jmax * radius.powf(1.0 - m * gamma) / (m * gamma - 1.0);
    // |ĥ‴| ≤ |a(a−1)|(4(1−γ) + 12/X²) u^{a−3/2} and u^e ≤ x^{2e}.
    let ah = 0.5 * gamma;
    let k = (ah * (ah - 1.0)).abs() * (4.0 * (1.0 - gamma) + 12.0 / (radius * radius));
    let ex = 0.5 * m * gamma + gamma - 3.0;
    let t2 = k * k * radius.powf(2.0 * ex + 1.0) / (-2.0 * ex - 1.0);
    (t1, t2)
}

/// Evaluates the two spatial integrals at a fixed truncation radius.
pub fn truncated_integrals(a: &LdpAnsatz, radius: f64) -> Result<(f64, f64, f64, f64)> {
    a.validate()?;
    a.check_conditions()?;
    let ints = half_line_integrals(a, radius);
    let (t1, t2) = tail_bounds(a, radius, ints.flux_at_radius);
    Ok((2.0 * ints.j1, 2.0 * ints.j2, 2.0 * t1, 2.0 * t2))
}

/// Upper bound on `I_T` for the ansatz, or [`Error::Divergent`] naming the
/// first violated integrability condition.
pub fn rate_upper_bound(a: &LdpAnsatz) -> Result<RateBound> {
    a.validate()?;
    a.check_conditions()?;
    let mut radius = INITIAL_RADIUS;
    loop {
        let ints = half_line_integrals(a, radius);
        let (t1, t2) = tail_bounds(a, radius, ints.flux_at_radius);
        let ok = t1 < TAIL_RATIO * ints.j1 && t2 < TAIL_RATIO * ints.j2;
        if ok || radius >= MAX_RADIUS {
            let (p1, p2) = (a.p1(), a.p2());
            let tf1 = a.t.powf(p1 + 1.0) / (p1 + 1.0);
            let tf2 = a.t.powf(p2 + 1.0) / (p2 + 1.0);
            let (j1, j2) = (2.0 * ints.j1, 2.0 * ints.j2);
            let (j1_tail, j2_tail) = (2.0 * t1, 2.0 * t2);
            return Ok(RateBound {
                p1,
                p2,
                time_factor1: tf1,
                time_factor2: tf2,
                j1,
                j2,
                j1_tail,
                j2_tail,
                j1_error: 2.0 * ints.j1_err,
                j2_error: 2.0 * ints.j2_err,
                radius,
                tail_converged: ok,
                bound: tf1 * (j1 + j1_tail) + tf2 * (j2 + j2_tail),
            });
        }
        radius = (2.0 * radius).min(MAX_RADIUS);
    }
}
