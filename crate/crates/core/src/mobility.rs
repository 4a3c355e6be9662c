//! Power-law mobility `M(h) = h^m`, the harmonic-mean edge metric, its
//! derivative (the Itô drift of the edge scheme), entropy and energy.
//!
//! Edge quantities are evaluated through a single scale-free helper. With
//! `a = max(h⁻, h⁺)` and `x = min/max − 1 ∈ (−1, 0]`,
//!
//! ```text
//! ⨏ M⁻¹  = a^{−m} φ(x),        φ(x) = ∫₀¹ (1 + t x)^{−m} dt
//! ψ      = a^{−m−1} Ψ(x),      Ψ(x) = −m ∫₀¹ (2t − 1)(1 + t x)^{−m−1} dt
//! ```
//!
//! where `ψ = (M(h⁺)⁻¹ + M(h⁻)⁻¹ − 2⨏M⁻¹)/(h⁺ − h⁻)` is the edge derivative
//! of the covariant metric without the `N^{3/2}` factor. Both integrals are
//! taken in closed form for `|x| ≥ 0.1` and by their power series (all terms
//! of one sign) below that, so equal heights need no special case.

use crate::error::{Error, Result};
use crate::grid::{
    central_difference_into, central_difference_transpose_into, forward_difference_into,
    forward_difference_transpose_into, neg_laplacian_into, EdgeField, FilmState,
};

/// Below this gap `|x|` the series replace the closed forms.
const SERIES_SWITCH: f64 = 0.1;
const SERIES_MAX_TERMS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Quadratic,
    Cubic,
    General,
}

/// Pure power-law mobility `M(h) = h^m`, `m ≥ 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mobility {
    m: f64,
    kind: Kind,
}

impl Mobility {
    pub fn new(m: f64) -> Result<Self> {
        if !m.is_finite() || m < 2.0 {
            return Err(Error::UnsupportedExponent {
                m,
                reason: "the mobility exponent must satisfy m >= 2",
            });
        }
        let kind = if m == 2.0 {
            Kind::Quadratic
        } else if m == 3.0 {
            Kind::Cubic
        } else {
            Kind::General
        };
        Ok(Self { m, kind })
    }

    pub fn exponent(&self) -> f64 {
        self.m
    }

    #[inline]
    pub fn value(&self, h: f64) -> f64 {
        match self.kind {
            Kind::Quadratic => h * h,
            Kind::Cubic => h * h * h,
            Kind::General => h.powf(self.m),
        }
    }

    /// `M′(h) = m h^{m−1}`.
    #[inline]
    pub fn derivative(&self, h: f64) -> f64 {
        self.m * h.powf(self.m - 1.0)
    }

    /// Contravariant metric `g^{αα}` and scale-free derivative
    /// `d = ∂_α g^{αα} / N^{3/2}` for an edge with left height `hl` and
    /// right height `hr`. Heights must be positive; not checked here.
    #[inline]
    pub fn edge_terms(&self, hl: f64, hr: f64) -> (f64, f64) {
        match self.kind {
            Kind::Quadratic => (hl * hr, hl - hr),
            Kind::Cubic => {
                let s = hl + hr;
                let p = hl * hr;
                (2.0 * p * p / s, 4.0 * p * (hl - hr) / s)
            }
            Kind::General => harmonic_edge_terms(hl, hr, self.m),
        }
    }

    #[inline]
    pub fn inverse_metric(&self, hl: f64, hr: f64) -> f64 {
        match self.kind {
            Kind::Quadratic => hl * hr,
            Kind::Cubic => {
                let p = hl * hr;
                2.0 * p * p / (hl + hr)
            }
            Kind::General => {
                let (a, x) = base_and_gap(hl, hr);
                a.powf(self.m) / phi(x, self.m)
            }
        }
    }
}

#[inline]
fn base_and_gap(hl: f64, hr: f64) -> (f64, f64) {
    if hl >= hr {
        (hl, hr / hl - 1.0)
    } else {
        (hr, hl / hr - 1.0)
    }
}

/// `φ(x) = ∫₀¹ (1 + t x)^{−m} dt` for `x ∈ (−1, 0]`.
fn phi(x: f64, m: f64) -> f64 {
    if x.abs() >= SERIES_SWITCH {
        (1.0 - (1.0 + x).powf(1.0 - m)) / ((m - 1.0) * x)
    } else {
        phi_series(x, m)
    }
}

fn phi_series(x: f64, m: f64) -> f64 {
    let y = -x;
    let mut coeff = 1.0;
    let mut sum = 1.0;
    for k in 1..SERIES_MAX_TERMS {
        let kf = k as f64;
        coeff *= (m + kf - 1.0) / kf * y;
        let term = coeff / (kf + 1.0);
        sum += term;
        if term <= f64::EPSILON * 1e-2 * sum {
            break;
        }
    }
    sum
}

/// `Ψ(x) = −m ∫₀¹ (2t − 1)(1 + t x)^{−m−1} dt`, nonpositive on `(−1, 0]`.
fn big_psi(x: f64, m: f64, phi_x: f64) -> f64 {
    if x.abs() >= SERIES_SWITCH {
        (1.0 + (1.0 + x).powf(-m) - 2.0 * phi_x) / x
    } else {
        let y = -x;
        let mut coeff = 1.0;
        let mut sum = 0.0;
        for k in 1..SERIES_MAX_TERMS {
            let kf = k as f64;
            coeff *= (m + kf) / kf * y;
            let term = coeff * kf / ((kf + 1.0) * (kf + 2.0));
            sum += term;
            if term <= f64::EPSILON * 1e-2 * sum {
                break;
            }
        }
        -m * sum
    }
}

/// General-exponent `(g^{αα}, ∂_α g^{αα}/N^{3/2})` for one edge.
///
/// Uses the integral representations above regardless of `m`; the fast
/// paths of [`Mobility::edge_terms`] are checked against this.
pub fn harmonic_edge_terms(hl: f64, hr: f64, m: f64) -> (f64, f64) {
    let (a, x) = base_and_gap(hl, hr);
    let ph = phi(x, m);
    let ps = big_psi(x, m, ph);
    let am = a.powf(m);
    let g = am / ph;
    // d = −(g^{αα})² ψ(hl, hr); ψ is antisymmetric in its arguments.
    let magnitude = am / a * ps / (ph * ph);
    let d = if hl >= hr { -magnitude } else { magnitude };
    (g, d)
}

fn check_height(h: f64, what: &str) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{what} must be positive and finite, got {h}")))
    }
}

/// `g^{αα} = (⨏₀¹ M((1−t) h_lo + t h_hi)⁻¹ dt)⁻¹`.
pub fn gr_inverse_metric(h_lo: f64, h_hi: f64, m: f64) -> Result<f64> {
    check_height(h_lo, "h_lo")?;
    check_height(h_hi, "h_hi")?;
    Ok(Mobility::new(m)?.inverse_metric(h_lo, h_hi))
}

/// Scale-free edge derivative `∂_α g^{αα}/N^{3/2}` for left/right heights.
pub fn gr_edge_derivative(h_left: f64, h_right: f64, m: f64) -> Result<f64> {
    check_height(h_left, "h_left")?;
    check_height(h_right, "h_right")?;
    Ok(Mobility::new(m)?.edge_terms(h_left, h_right).1)
}

/// Edge metric diagonal `g^{αα}(h)` of the harmonic-mean scheme.
pub fn gr_metric_diag(h: &FilmState, m: f64) -> Result<EdgeField> {
    h.check_positive()?;
    let mob = Mobility::new(m)?;
    let v = h.values();
    let n = v.len();
    Ok(EdgeField::new(
        (0..n).map(|a| mob.inverse_metric(v[a], v[(a + 1) % n])).collect(),
    ))
}

/// Itô drift `(N/β) Aᵀ (N^{−1/2} ∂_α g^{αα})_α = (N²/β) Aᵀ d`.
pub fn gr_ito_correction(h: &FilmState, m: f64, beta: f64) -> Result<Vec<f64>> {
    h.check_positive()?;
    if !(beta > 0.0) {
        return Err(Error::InvalidArgument(format!("beta must be > 0, got {beta}")));
    }
    let mob = Mobility::new(m)?;
    let v = h.values();
    let n = v.len();
    let scale = (n * n) as f64 / beta;
    let d: Vec<f64> = (0..n)
        .map(|a| scale * mob.edge_terms(v[a], v[(a + 1) % n]).1)
        .collect();
    let mut out = vec![0.0; n];
    forward_difference_transpose_into(&d, &mut out);
    Ok(out)
}

/// Node mobility diagonal `M(h^α)` of the central-difference scheme.
pub fn cd_metric_diag(h: &FilmState, m: f64) -> Result<Vec<f64>> {
    if let Some(i) = h.values().iter().position(|&x| x < 0.0) {
        return Err(Error::Domain(format!(
            "height {} at node {i} is negative",
            h.values()[i]
        )));
    }
    let mob = Mobility::new(m)?;
    Ok(h.values().iter().map(|&x| mob.value(x)).collect())
}

/// `max_i |Σ_j ∂_j (Cᵀ diag(M(h)) C)_{ij}|` by central differences with
/// step `1e-6·h_j`.
pub fn cd_ito_divergence_check(h: &FilmState, m: f64) -> Result<f64> {
    h.check_positive()?;
    let mob = Mobility::new(m)?;
    let n = h.n();
    let mut hv = h.values().to_vec();
    let mut div = vec![0.0; n];
    let mut col_plus = vec![0.0; n];
    let mut col_minus = vec![0.0; n];
    for j in 0..n {
        let eps = 1e-6 * hv[j];
        let orig = hv[j];
        hv[j] = orig + eps;
        cd_flux_column(&hv, &mob, j, &mut col_plus);
        hv[j] = orig - eps;
        cd_flux_column(&hv, &mob, j, &mut col_minus);
        hv[j] = orig;
        for i in 0..n {
            div[i] += (col_plus[i] - col_minus[i]) / (2.0 * eps);
        }
    }
    Ok(div.iter().fold(0.0f64, |acc, v| acc.max(v.abs())))
}

/// Column `j` of `Cᵀ diag(M(h)) C`.
fn cd_flux_column(h: &[f64], mob: &Mobility, j: usize, out: &mut [f64]) {
    let n = h.len();
    let mut e = vec![0.0; n];
    e[j] = 1.0;
    let mut ce = vec![0.0; n];
    central_difference_into(&e, &mut ce);
    for (k, v) in ce.iter_mut().enumerate() {
        *v *= mob.value(h[k]);
    }
    central_difference_transpose_into(&ce, out);
}

/// Tolerance for [`cd_ito_divergence_check`]: `1e-5 · N² · max_i M′(h_i)`.
pub fn cd_ito_divergence_tolerance(h: &FilmState, m: f64) -> Result<f64> {
    let mob = Mobility::new(m)?;
    let n = h.n() as f64;
    let scale = h.values().iter().map(|&x| mob.derivative(x)).fold(0.0, f64::max);
    Ok(1e-5 * n * n * scale)
}

fn entropy_exponent(m: f64) -> Result<()> {
    if !m.is_finite() || m <= 2.0 {
        return Err(Error::UnsupportedExponent {
            m,
            reason: "the entropy double integral converges only for m > 2",
        });
    }
    Ok(())
}

/// `s(h) = ∫_h^∞ ∫_{h′}^∞ M⁻¹ = h^{2−m}/((m−1)(m−2))`.
pub fn entropy_s(h: f64, m: f64) -> Result<f64> {
    entropy_exponent(m)?;
    check_height(h, "height")?;
    Ok(h.powf(2.0 - m) / ((m - 1.0) * (m - 2.0)))
}

/// `s′(h) = −h^{1−m}/(m−1)`.
pub fn entropy_s_prime(h: f64, m: f64) -> Result<f64> {
    entropy_exponent(m)?;
    check_height(h, "height")?;
    Ok(-h.powf(1.0 - m) / (m - 1.0))
}

/// Lumped entropy `S(h) = (1/N) Σ s(h_i)`.
pub fn entropy_total(h: &FilmState, m: f64) -> Result<f64> {
    entropy_exponent(m)?;
    h.check_positive()?;
    let c = 1.0 / ((m - 1.0) * (m - 2.0));
    let sum: f64 = if m == 3.0 {
        h.values().iter().map(|&x| 1.0 / x).sum()
    } else {
        h.values().iter().map(|&x| x.powf(2.0 - m)).sum()
    };
    Ok(c * sum / h.n() as f64)
}

/// `max_α |g^{αα} (A s′(h))_α − (Ah)_α|`.
pub fn verify_gr_identity(h: &FilmState, m: f64) -> Result<f64> {
    entropy_exponent(m)?;
    h.check_positive()?;
    let mob = Mobility::new(m)?;
    let v = h.values();
    let n = v.len();
    let sp: Vec<f64> = v.iter().map(|&x| -x.powf(1.0 - m) / (m - 1.0)).collect();
    let mut asp = vec![0.0; n];
    let mut ah = vec![0.0; n];
    forward_difference_into(&sp, &mut asp);
    forward_difference_into(v, &mut ah);
    Ok((0..n)
        .map(|a| (mob.inverse_metric(v[a], v[(a + 1) % n]) * asp[a] - ah[a]).abs())
        .fold(0.0, f64::max))
}

/// `E(h) = (1/2N) Σ_α ((Ah)_α)²`.
pub fn energy(h: &FilmState) -> f64 {
    energy_of(h.values())
}

pub(crate) fn energy_of(v: &[f64]) -> f64 {
    let n = v.len();
    let nf = n as f64;
    let sum: f64 = (0..n)
        .map(|a| {
            let d = nf * (v[(a + 1) % n] - v[a]);
            d * d
        })
        .sum();
    sum / (2.0 * nf)
}

/// Entropy dissipation `(1/N) Σ_i ((AᵀA h)_i)²`.
pub fn dissipation(h: &FilmState) -> f64 {
    let mut buf = vec![0.0; h.n()];
    dissipation_of(h.values(), &mut buf)
}

pub(crate) fn dissipation_of(v: &[f64], buf: &mut [f64]) -> f64 {
    neg_laplacian_into(v, buf);
    buf.iter().map(|x| x * x).sum::<f64>() / v.len() as f64
}
