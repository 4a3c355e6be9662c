//! Histograms, two-sample tests and the Monte Carlo estimators used by the
//! experiments.

use crate::error::{Error, Result};
use crate::grid::FilmState;
use crate::integrator::{SimParams, Termination, TrajectoryRecord};
use crate::mobility::{dissipation_of, entropy_total};
use crate::rng::{NoiseStream, Purpose};

/// Bin count for one-dimensional histograms.
pub const HISTOGRAM_BINS: usize = 50;
/// Bins per axis for joint histograms.
pub const JOINT_BINS: usize = 50;
/// Reference node for single-point statistics.
pub const REFERENCE_NODE: usize = 0;

fn check_finite(data: &[f64], what: &'static str) -> Result<()> {
    if data.is_empty() {
        return Err(Error::EmptyInput(what));
    }
    if let Some(x) = data.iter().find(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument(format!("{what} contains non-finite value {x}")));
    }
    Ok(())
}

fn uniform_edges(lo: f64, hi: f64, bins: usize) -> Result<Vec<f64>> {
    if bins == 0 {
        return Err(Error::InvalidArgument("bin count must be >= 1".into()));
    }
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidArgument(format!("invalid histogram range [{lo}, {hi}]")));
    }
    let w = (hi - lo) / bins as f64;
    let mut edges: Vec<f64> = (0..bins).map(|i| lo + i as f64 * w).collect();
    edges.push(hi);
    Ok(edges)
}

/// Empirical range, widened to unit width around a single repeated value.
fn data_range(data: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = data.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
        (lo.min(x), hi.max(x))
    });
    if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

#[inline]
fn bin_of(edges: &[f64], x: f64) -> Option<usize> {
    let bins = edges.len() - 1;
    let (lo, hi) = (edges[0], edges[bins]);
    if !(x >= lo && x <= hi) {
        return None;
    }
    let b = (((x - lo) / (hi - lo)) * bins as f64) as usize;
    let mut b = b.min(bins - 1);
    // Correct for rounding so that edges[b] <= x < edges[b+1].
    if x < edges[b] && b > 0 {
        b -= 1;
    } else if b + 1 < bins && x >= edges[b + 1] {
        b += 1;
    }
    Some(b)
}

/// Uniform-bin histogram. Values outside the range are counted separately.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub total: u64,
    pub outside: u64,
}

impl Histogram {
    pub fn with_range(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        Ok(Self {
            edges: uniform_edges(lo, hi, bins)?,
            counts: vec![0; bins],
            total: 0,
            outside: 0,
        })
    }

    /// Histogram over the empirical `[min, max]` of `data`.
    pub fn from_samples(data: &[f64], bins: usize) -> Result<Self> {
        check_finite(data, "histogram samples")?;
        let (lo, hi) = data_range(data.iter().copied());
        let mut h = Self::with_range(lo, hi, bins)?;
        h.extend(data);
        Ok(h)
    }

    pub fn add(&mut self, x: f64) {
        match bin_of(&self.edges, x) {
            Some(b) => {
                self.counts[b] += 1;
                self.total += 1;
            }
            None => self.outside += 1,
        }
    }

    pub fn extend(&mut self, data: &[f64]) {
        for &x in data {
            self.add(x);
        }
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    /// Probability density per bin (integrates to one over the range).
    pub fn density(&self) -> Vec<f64> {
        let w = self.edges[1] - self.edges[0];
        self.counts
            .iter()
            .map(|&c| c as f64 / (self.total.max(1) as f64 * w))
            .collect()
    }
}

/// Uniform-bin joint histogram on a rectangle, row-major in the first axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram2d {
    pub x_edges: Vec<f64>,
    pub y_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub total: u64,
    pub outside: u64,
}

impl Histogram2d {
    pub fn with_range(x: (f64, f64), y: (f64, f64), bins: usize) -> Result<Self> {
        Ok(Self {
            x_edges: uniform_edges(x.0, x.1, bins)?,
            y_edges: uniform_edges(y.0, y.1, bins)?,
            counts: vec![0; bins * bins],
            total: 0,
            outside: 0,
        })
    }

    pub fn from_pairs(pairs: &[(f64, f64)], bins: usize) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::EmptyInput("joint histogram pairs"));
        }
        let (lo, hi) = data_range(pairs.iter().flat_map(|&(a, b)| [a, b]));
        let mut h = Self::with_range((lo, hi), (lo, hi), bins)?;
        h.extend(pairs);
        Ok(h)
    }

    pub fn add(&mut self, x: f64, y: f64) {
        let bins = self.x_edges.len() - 1;
        match (bin_of(&self.x_edges, x), bin_of(&self.y_edges, y)) {
            (Some(i), Some(j)) => {
                self.counts[i * bins + j] += 1;
                self.total += 1;
            }
            _ => self.outside += 1,
        }
    }

    pub fn extend(&mut self, pairs: &[(f64, f64)]) {
        for &(x, y) in pairs {
            self.add(x, y);
        }
    }

    pub fn bins(&self) -> usize {
        self.x_edges.len() - 1
    }

    /// Cell probabilities `count/total`.
    pub fn probabilities(&self) -> Vec<f64> {
        let t = self.total.max(1) as f64;
        self.counts.iter().map(|&c| c as f64 / t).collect()
    }
}

/// `Σ |p_A − p_B|` over the shared cells of two normalized joint histograms.
pub fn l1_distance(a: &Histogram2d, b: &Histogram2d) -> Result<f64> {
    if a.x_edges != b.x_edges || a.y_edges != b.y_edges {
        return Err(Error::MismatchedBinning(format!(
            "{}x{} bins on [{}, {}] vs {}x{} bins on [{}, {}]",
            a.bins(),
            a.bins(),
            a.x_edges[0],
            a.x_edges[a.bins()],
            b.bins(),
            b.bins(),
            b.x_edges[0],
            b.x_edges[b.bins()]
        )));
    }
    Ok(a
        .probabilities()
        .iter()
        .zip(b.probabilities())
        .map(|(p, q)| (p - q).abs())
        .sum())
}

/// Joint histograms of two pair sets on a common square range.
pub fn shared_joint_histograms(
    a: &[(f64, f64)],
    b: &[(f64, f64)],
    bins: usize,
) -> Result<(Histogram2d, Histogram2d)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput("joint histogram pairs"));
    }
    let (lo, hi) = data_range(a.iter().chain(b).flat_map(|&(x, y)| [x, y]));
    let mut ha = Histogram2d::with_range((lo, hi), (lo, hi), bins)?;
    let mut hb = Histogram2d::with_range((lo, hi), (lo, hi), bins)?;
    ha.extend(a);
    hb.extend(b);
    Ok((ha, hb))
}

/// Bootstrap standard error of the L1 distance between the joint histograms
/// of `a` and `b` (resampling each set with replacement, fixed bins).
pub fn l1_bootstrap_se(
    a: &[(f64, f64)],
    b: &[(f64, f64)],
    bins: usize,
    replicates: usize,
    seed: u64,
) -> Result<f64> {
    let (ha, _) = shared_joint_histograms(a, b, bins)?;
    let range = (ha.x_edges[0], ha.x_edges[bins]);
    let mut stream = NoiseStream::new(seed, 0, Purpose::Bootstrap);
    let mut values = Vec::with_capacity(replicates);
    for r in 0..replicates {
        let rng = stream.rng_at(r as u64);
        let mut ra = Histogram2d::with_range(range, range, bins)?;
        let mut rb = Histogram2d::with_range(range, range, bins)?;
        for _ in 0..a.len() {
            let (x, y) = a[rand::Rng::random_range(rng, 0..a.len())];
            ra.add(x, y);
        }
        for _ in 0..b.len() {
            let (x, y) = b[rand::Rng::random_range(rng, 0..b.len())];
            rb.add(x, y);
        }
        values.push(l1_distance(&ra, &rb)?);
    }
    Ok(mean_and_se(&values).1 * (values.len() as f64).sqrt())
}

/// Sample mean and standard error of the mean.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    /// Two-sample critical value at the 1% level.
    pub critical: f64,
}

impl KsResult {
    pub fn passes(&self) -> bool {
        self.statistic < self.critical
    }
}

/// Two-sample Kolmogorov–Smirnov statistic with its 1% critical value
/// `1.63·√((n_a + n_b)/(n_a n_b))`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    check_finite(a, "first KS sample")?;
    check_finite(b, "second KS sample")?;
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (na, nb) = (xs.len(), ys.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < na || j < nb {
        let x = match (xs.get(i), ys.get(j)) {
            (Some(&p), Some(&q)) => p.min(q),
            (Some(&p), None) => p,
            (None, Some(&q)) => q,
            (None, None) => break,
        };
        while i < na && xs[i] <= x {
            i += 1;
        }
        while j < nb && ys[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    let (fa, fb) = (na as f64, nb as f64);
    Ok(KsResult {
        statistic: d,
        critical: 1.63 * ((fa + fb) / (fa * fb)).sqrt(),
    })
}

/// Node offset `round(dx·N)` for a spatial lag.
pub fn lag_offset(n: usize, dx: f64) -> Result<usize> {
    let k = (dx * n as f64).round();
    if !(k >= 1.0) || k >= n as f64 {
        return Err(Error::InvalidArgument(format!(
            "spatial lag dx = {dx} maps to offset {k} on a grid of {n} nodes; need 1 <= k < N"
        )));
    }
    Ok(k as usize)
}

/// `h^{k} − h^{0}` with `k = round(dx·N)`, one value per sample.
pub fn two_point_spatial(samples: &[FilmState], dx: f64) -> Result<Vec<f64>> {
    let first = samples.first().ok_or(Error::EmptyInput("two-point samples"))?;
    let k = lag_offset(first.n(), dx)?;
    samples
        .iter()
        .map(|s| {
            if s.n() != first.n() {
                return Err(Error::InvalidArgument("samples have different grid sizes".into()));
            }
            Ok(s.values()[REFERENCE_NODE + k] - s.values()[REFERENCE_NODE])
        })
        .collect()
}

/// Single-point values `h^0` of each sample.
pub fn single_point(samples: &[FilmState]) -> Vec<f64> {
    samples.iter().map(|s| s.values()[REFERENCE_NODE]).collect()
}

/// Per-trajectory pieces of the entropy balance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyPartial {
    pub s_initial: f64,
    pub s_final: f64,
    /// Trapezoid integral of the dissipation over all observed points.
    pub integral: f64,
    /// Same integral using every second point (the last segment at the fine
    /// spacing when the count is odd).
    pub integral_coarse: f64,
    pub t_final: f64,
}

/// Streaming accumulator for [`EntropyPartial`]; feed every observed state.
#[derive(Debug, Clone)]
pub struct EntropyTracker {
    m: f64,
    stride: u64,
    buf: Vec<f64>,
    points: u64,
    s_initial: f64,
    s_last: f64,
    last: (f64, f64),
    coarse_last: (f64, f64),
    integral: f64,
    integral_coarse: f64,
}

impl EntropyTracker {
    /// Uses every `stride`-th step (and the last one handed to
    /// [`EntropyTracker::finish`]).
    pub fn new(m: f64, n: usize, stride: u64) -> Result<Self> {
        if m <= 2.0 {
            return Err(Error::UnsupportedExponent {
                m,
                reason: "the entropy balance needs m > 2",
            });
        }
        Ok(Self {
            m,
            stride: stride.max(1),
            buf: vec![0.0; n],
            points: 0,
            s_initial: f64::NAN,
            s_last: f64::NAN,
            last: (0.0, 0.0),
            coarse_last: (0.0, 0.0),
            integral: 0.0,
            integral_coarse: 0.0,
        })
    }

    pub fn observe(&mut self, k: u64, t: f64, h: &[f64]) -> Result<()> {
        if k % self.stride != 0 {
            return Ok(());
        }
        self.push(t, h)
    }

    fn push(&mut self, t: f64, h: &[f64]) -> Result<()> {
        let state = FilmState::new(h.to_vec())?;
        let s = entropy_total(&state, self.m)?;
        let d = dissipation_of(h, &mut self.buf);
        if self.points == 0 {
            self.s_initial = s;
            self.coarse_last = (t, d);
        } else {
            self.integral += 0.5 * (t - self.last.0) * (d + self.last.1);
            if self.points % 2 == 0 {
                self.integral_coarse += 0.5 * (t - self.coarse_last.0) * (d + self.coarse_last.1);
                self.coarse_last = (t, d);
            }
        }
        self.s_last = s;
        self.last = (t, d);
        self.points += 1;
        Ok(())
    }

    /// Closes the integral at the final state `(t, h)` if it was not
    /// already observed.
    pub fn finish(mut self, t: f64, h: &[f64]) -> Result<EntropyPartial> {
        if self.points == 0 || self.last.0 != t {
            self.push(t, h)?;
        }
        let mut coarse = self.integral_coarse;
        if self.coarse_last.0 != self.last.0 {
            coarse += 0.5 * (self.last.0 - self.coarse_last.0) * (self.last.1 + self.coarse_last.1);
        }
        Ok(EntropyPartial {
            s_initial: self.s_initial,
            s_final: self.s_last,
            integral: self.integral,
            integral_coarse: coarse,
            t_final: self.last.0,
        })
    }
}

impl EntropyPartial {
    pub fn from_record(record: &TrajectoryRecord, m: f64) -> Result<Self> {
        let n = record.snapshots[0].1.n();
        let mut tracker = EntropyTracker::new(m, n, 1)?;
        for (k, (t, h)) in record.snapshots.iter().enumerate() {
            tracker.observe(k as u64, *t, h.values())?;
        }
        let (t, h) = record.snapshots.last().expect("nonempty record");
        tracker.finish(*t, h.values())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntropyBalanceReport {
    pub t: f64,
    /// `Ê[S(h_t)] + ∫₀ᵗ Ê[dissipation]`.
    pub lhs: f64,
    /// `Ê[S(h_0)] + 2N³t/β`.
    pub rhs: f64,
    pub lhs_se: f64,
    pub rhs_se: f64,
    /// `√(lhs_se² + rhs_se²)`.
    pub combined_se: f64,
    /// Richardson estimate `|I_s − I_{2s}|/3` of the trapezoid error.
    pub trapezoid_bias: f64,
    pub samples: usize,
}

impl EntropyBalanceReport {
    /// `|lhs − rhs| ≤ 3·(combined_se + trapezoid_bias)`.
    pub fn within_tolerance(&self) -> bool {
        (self.lhs - self.rhs).abs() <= 3.0 * (self.combined_se + self.trapezoid_bias)
    }
}

/// Combines per-trajectory partials into the balance report.
pub fn entropy_balance_from_partials(
    partials: &[EntropyPartial],
    n: usize,
    beta: f64,
) -> Result<EntropyBalanceReport> {
    let first = partials.first().ok_or(Error::EmptyInput("entropy partials"))?;
    let t = first.t_final;
    if partials.iter().any(|p| p.t_final != t) {
        return Err(Error::InvalidArgument(
            "trajectories end at different times".into(),
        ));
    }
    let lhs_values: Vec<f64> = partials.iter().map(|p| p.s_final + p.integral).collect();
    let s0: Vec<f64> = partials.iter().map(|p| p.s_initial).collect();
    let (lhs, lhs_se) = mean_and_se(&lhs_values);
    let (s0_mean, rhs_se) = mean_and_se(&s0);
    let nf = n as f64;
    let rhs = s0_mean + 2.0 * nf * nf * nf * t / beta;
    let fine = partials.iter().map(|p| p.integral).sum::<f64>();
    let coarse = partials.iter().map(|p| p.integral_coarse).sum::<f64>();
    let trapezoid_bias = (fine - coarse).abs() / (3.0 * partials.len() as f64);
    Ok(EntropyBalanceReport {
        t,
        lhs,
        rhs,
        lhs_se,
        rhs_se,
        combined_se: (lhs_se * lhs_se + rhs_se * rhs_se).sqrt(),
        trapezoid_bias,
        samples: partials.len(),
    })
}

/// Entropy balance over recorded trajectories (trapezoid over snapshots).
pub fn entropy_balance(
    trajectories: &[TrajectoryRecord],
    p: &SimParams,
) -> Result<EntropyBalanceReport> {
    if let Some((i, r)) = trajectories.iter().enumerate().find(|(_, r)| !r.completed()) {
        return Err(Error::InvalidArgument(format!(
            "trajectory {i} did not complete ({:?}); the balance needs the full horizon",
            r.termination
        )));
    }
    let partials = trajectories
        .iter()
        .map(|r| EntropyPartial::from_record(r, p.m))
        .collect::<Result<Vec<_>>>()?;
    entropy_balance_from_partials(&partials, p.n, p.beta)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExitTimeStats {
    pub total: usize,
    pub touched: usize,
    /// Runs that reached the horizon without touching down.
    pub censored: usize,
    pub solver_failures: usize,
    /// Mean touch-down time over touched runs; absent when none touched.
    pub mean: Option<f64>,
    pub std_error: Option<f64>,
}

impl ExitTimeStats {
    pub fn fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.touched as f64 / self.total as f64
        }
    }
}

pub fn exit_time_stats(records: &[TrajectoryRecord]) -> ExitTimeStats {
    exit_time_stats_from(records.iter().map(|r| &r.termination))
}

pub fn exit_time_stats_from<'a>(terminations: impl Iterator<Item = &'a Termination>) -> ExitTimeStats {
    let mut times = Vec::new();
    let mut total = 0;
    let mut censored = 0;
    let mut solver_failures = 0;
    for t in terminations {
        total += 1;
        match t {
            Termination::Completed => censored += 1,
            Termination::TouchDown { time } => times.push(*time),
            Termination::SolverFailure { .. } => solver_failures += 1,
        }
    }
    let (mean, std_error) = if times.is_empty() {
        (None, None)
    } else {
        let (m, se) = mean_and_se(&times);
        (Some(m), Some(se))
    };
    ExitTimeStats {
        total,
        touched: times.len(),
        censored,
        solver_failures,
        mean,
        std_error,
    }
}

/// Bin count of the repulsion fit on `(0, h_max]`.
pub const TAIL_BINS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct TailFit {
    /// Prefactor of the free fit `p(h) ≈ ĉ h^γ̂`.
    pub coefficient: f64,
    pub gamma: f64,
    /// Prefactor of the fixed-exponent fit `p(h) ≈ c₂ h²`.
    pub c2: f64,
    pub bins_used: usize,
}

/// Bin average of `h^γ` over `[l, r]`.
fn bin_power_mean(l: f64, r: f64, gamma: f64) -> f64 {
    let e = gamma + 1.0;
    if e.abs() < 1e-12 {
        (r.ln() - l.ln()) / (r - l)
    } else {
        (r.powf(e) - l.powf(e)) / (e * (r - l))
    }
}

/// Fits the density of `samples` near zero on 20 uniform bins of `(0, h_max]`.
///
/// The density is normalized by the full sample count. The free fit is a
/// count-weighted least-squares line of `log p` against `log x*`, where `x*`
/// solves `x*^γ = ⟨h^γ⟩_bin` and is updated with `γ` until it converges. The
/// fixed-exponent coefficient minimizes `Σ (p_b − c ⟨h²⟩_b)²`.
pub fn repulsion_tail_fit(samples: &[f64], h_max: f64) -> Result<TailFit> {
    check_finite(samples, "repulsion samples")?;
    if !(h_max > 0.0) || !h_max.is_finite() {
        return Err(Error::InvalidArgument(format!("h_max must be > 0, got {h_max}")));
    }
    let w = h_max / TAIL_BINS as f64;
    let mut counts = [0u64; TAIL_BINS];
    for &x in samples {
        if x > 0.0 && x <= h_max {
            let b = ((x / w).ceil() as usize).clamp(1, TAIL_BINS) - 1;
            counts[b] += 1;
        }
    }
    let total = samples.len() as f64;
    let bins: Vec<(f64, f64, f64, f64)> = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(b, &c)| {
            let l = b as f64 * w;
            (l, l + w, c as f64 / (total * w), c as f64)
        })
        .collect();
    if bins.len() < 5 {
        return Err(Error::InvalidArgument(format!(
            "only {} nonempty bins in (0, {h_max}]; need at least 5",
            bins.len()
        )));
    }
    let mut gamma: f64 = 0.0;
    let mut intercept = 0.0;
    for iter in 0..100 {
        let mut sw = 0.0;
        let mut sx = 0.0;
        let mut sy = 0.0;
        let mut sxx = 0.0;
        let mut sxy = 0.0;
        for &(l, r, p, c) in &bins {
            let x = if iter == 0 {
                0.5 * (l + r)
            } else if gamma.abs() < 1e-9 {
                let lm = if l == 0.0 { 0.0 } else { l * l.ln() };
                ((r * r.ln() - lm) / (r - l) - 1.0).exp()
            } else {
                bin_power_mean(l, r, gamma).powf(1.0 / gamma)
            };
            let (lx, ly) = (x.ln(), p.ln());
            sw += c;
            sx += c * lx;
            sy += c * ly;
            sxx += c * lx * lx;
            sxy += c * lx * ly;
        }
        let slope = (sw * sxy - sx * sy) / (sw * sxx - sx * sx);
        intercept = (sy - slope * sx) / sw;
        let converged = (slope - gamma).abs() < 1e-12;
        gamma = slope;
        if converged && iter > 0 {
            break;
        }
    }
    let (num, den) = bins.iter().fold((0.0, 0.0), |(num, den), &(l, r, p, _)| {
        let a = bin_power_mean(l, r, 2.0);
        (num + p * a, den + a * a)
    });
    Ok(TailFit {
        coefficient: intercept.exp(),
        gamma,
        c2: num / den,
        bins_used: bins.len(),
    })
}

/// `(h_{t0}(x₀), h_{t0+δt}(x₀))` from each record, matching snapshot times
/// to within half a time step.
pub fn two_time_pairs(
    records: &[TrajectoryRecord],
    t0: f64,
    delta_t: f64,
    dt: f64,
) -> Result<Vec<(f64, f64)>> {
    let find = |r: &TrajectoryRecord, t: f64| {
        r.snapshots
            .iter()
            .find(|(s, _)| (s - t).abs() <= 0.5 * dt)
            .map(|(_, h)| h.values()[REFERENCE_NODE])
    };
    let mut pairs = Vec::with_capacity(records.len());
    for (i, r) in records.iter().enumerate() {
        let a = find(r, t0).ok_or_else(|| {
            Error::InvalidArgument(format!("trajectory {i} has no snapshot at t = {t0}"))
        })?;
        let b = find(r, t0 + delta_t).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "trajectory {i} has no snapshot at t = {}; record stride must divide the lag",
                t0 + delta_t
            ))
        })?;
        pairs.push((a, b));
    }
    Ok(pairs)
}

/// Joint histogram of `(h_t(x₀), h_{t+δt}(x₀))` over completed records.
pub fn two_time_joint(records: &[TrajectoryRecord], delta_t: f64, dt: f64) -> Result<Histogram2d> {
    let done: Vec<TrajectoryRecord> = records.iter().filter(|r| r.completed()).cloned().collect();
    let pairs = two_time_pairs(&done, 0.0, delta_t, dt)?;
    Histogram2d::from_pairs(&pairs, JOINT_BINS)
}
