//! Experiment execution and artifact writing.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::{need, ExperimentConfig, ExperimentKind, InitialState};
use crate::diagnostics::{
    entropy_balance_from_partials, exit_time_stats_from, ks_two_sample, l1_bootstrap_se, l1_distance,
    repulsion_tail_fit,
    shared_joint_histograms, single_point, two_point_spatial, EntropyTracker,
    Histogram, Histogram2d, KsResult, HISTOGRAM_BINS, JOINT_BINS, REFERENCE_NODE,
};
use crate::error::{Error, Result};
use crate::grid::{FilmState, Scheme};
use crate::integrator::{drive_trajectory, run_trajectory, SimParams, Termination};
use crate::ldp::{eta_window, gamma_bounds, rate_upper_bound, LdpAnsatz};
use crate::rng::{NoiseStream, Purpose};
use crate::sampler::{sample_batch, sample_nu};

/// Replicates used for the bootstrap error of joint-histogram distances.
pub const BOOTSTRAP_REPLICATES: usize = 200;

/// Files written by a run, in write order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSummary {
    pub artifacts: Vec<PathBuf>,
}

/// Runs `cfg` on a worker pool of the configured size and writes its
/// artifacts under `cfg.out`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunSummary> {
    std::fs::create_dir_all(&cfg.out).map_err(|source| Error::Io {
        path: cfg.out.clone(),
        source,
    })?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let mut out = Output::new(cfg);
    pool.install(|| match cfg.experiment {
        ExperimentKind::Simulate => simulate(cfg, &mut out),
        ExperimentKind::SampleInvariant => sample_invariant(cfg, &mut out),
        ExperimentKind::Invariance => invariance(cfg, &mut out),
        ExperimentKind::ExitTime => exit_time(cfg, &mut out),
        ExperimentKind::Repulsion => repulsion(cfg, &mut out),
        ExperimentKind::EntropyBalance => entropy(cfg, &mut out),
        ExperimentKind::TwoTime => two_time(cfg, &mut out),
        ExperimentKind::LdpFeasibility => ldp_feasibility(cfg, &mut out),
        ExperimentKind::LdpRate => ldp_rate(cfg, &mut out),
    })?;
    Ok(RunSummary { artifacts: out.written })
}

/// Full-precision decimal (17 significant digits).
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

struct Output<'a> {
    dir: &'a Path,
    header: String,
    written: Vec<PathBuf>,
}

impl<'a> Output<'a> {
    fn new(cfg: &'a ExperimentConfig) -> Self {
        let mut header = format!("# thinfilm {}\n", env!("CARGO_PKG_VERSION"));
        for (k, v) in cfg.echo() {
            let _ = writeln!(header, "# {k} = {v}");
        }
        Self {
            dir: &cfg.out,
            header,
            written: Vec::new(),
        }
    }

    fn write(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.dir.join(name);
        let text = format!("{}{}", self.header, body);
        std::fs::write(&path, text).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?;
        self.written.push(path);
        Ok(())
    }
}

/// `key = value` lines.
#[derive(Default)]
struct Report(String);

impl Report {
    fn put(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.0, "{key} = {value}");
    }

    fn float(&mut self, key: &str, value: f64) {
        self.put(key, num(value));
    }

    fn ks(&mut self, prefix: &str, r: &KsResult) {
        self.float(&format!("{prefix}.ks_statistic"), r.statistic);
        self.float(&format!("{prefix}.ks_critical_1pct"), r.critical);
        self.put(&format!("{prefix}.ks_pass"), r.passes());
    }
}

fn histogram_csv(h: &Histogram) -> String {
    let mut s = String::from("bin_left,bin_right,count\n");
    for (i, c) in h.counts.iter().enumerate() {
        let _ = writeln!(s, "{},{},{c}", num(h.edges[i]), num(h.edges[i + 1]));
    }
    s
}

fn joint_csv(h: &Histogram2d) -> String {
    let mut s = String::from("x_left,x_right,y_left,y_right,count\n");
    let b = h.bins();
    for i in 0..b {
        for j in 0..b {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                num(h.x_edges[i]),
                num(h.x_edges[i + 1]),
                num(h.y_edges[j]),
                num(h.y_edges[j + 1]),
                h.counts[i * b + j]
            );
        }
    }
    s
}

fn states_csv(prefix_cols: &str, rows: impl Iterator<Item = (String, Vec<f64>)>, n: usize) -> String {
    let mut s = String::from(prefix_cols);
    for i in 0..n {
        let _ = write!(s, "{}h_{i}", if s.is_empty() { "" } else { "," });
    }
    s.push('\n');
    for (lead, values) in rows {
        s.push_str(&lead);
        for (i, v) in values.iter().enumerate() {
            if i > 0 || !lead.is_empty() {
                s.push(',');
            }
            s.push_str(&num(*v));
        }
        s.push('\n');
    }
    s
}

fn short(scheme: Scheme) -> &'static str {
    match scheme {
        Scheme::GruenRumpf => "gr",
        Scheme::CentralDifference => "cd",
    }
}

fn status(t: &Termination) -> (&'static str, Option<f64>) {
    match t {
        Termination::Completed => ("completed", None),
        Termination::TouchDown { time } => ("touch-down", Some(*time)),
        Termination::SolverFailure { time, .. } => ("solver-failure", Some(*time)),
    }
}

fn sim_params(cfg: &ExperimentConfig, scheme: Scheme, t_final: f64) -> Result<SimParams> {
    let p = SimParams {
        n: need(cfg.n, "n")?,
        m: need(cfg.m, "mobility_exponent")?,
        beta: need(cfg.beta, "beta")?,
        dt: need(cfg.dt, "dt")?,
        t_final,
        scheme,
        seed: need(cfg.seed, "seed")?,
        record_stride: cfg.record_stride,
    };
    p.validate()?;
    Ok(p)
}

/// Initial state of trajectory `j`; invariant draws use their own stream.
pub fn initial_state(initial: InitialState, n: usize, beta: f64, seed: u64, j: u64) -> Result<FilmState> {
    match initial {
        InitialState::Flat => FilmState::flat(n),
        InitialState::Invariant => {
            Ok(sample_nu(n, beta, &mut NoiseStream::new(seed, j, Purpose::Initial))?.state)
        }
    }
}

/// Termination and last interior state of one trajectory.
pub fn final_state(p: &SimParams, h0: &FilmState, j: u64) -> Result<(Termination, FilmState)> {
    let mut last = h0.values().to_vec();
    let (termination, _) = drive_trajectory(p, h0, j, |_, _, h| last.copy_from_slice(h))?;
    Ok((termination, FilmState::new(last)?))
}

/// Trajectories `0..count` in parallel, results in index order.
pub fn final_states(
    p: &SimParams,
    initial: InitialState,
    count: usize,
) -> Result<Vec<(FilmState, Termination, FilmState)>> {
    (0..count as u64)
        .into_par_iter()
        .map(|j| {
            let h0 = initial_state(initial, p.n, p.beta, p.seed, j)?;
            let (t, h) = final_state(p, &h0, j)?;
            Ok((h0, t, h))
        })
        .collect()
}

fn simulate(cfg: &ExperimentConfig, out: &mut Output) -> Result<()> {
    let p = sim_params(cfg, need(cfg.scheme, "scheme")?, need(cfg.t_final, "t_final")?)?;
    let count = cfg.samples.unwrap_or(1);
    if count == 0 {
        return Err(Error::Config("'samples' must be >= 1".into()));
    }
    let mut report = Report::default();
    if count == 1 && p.record_stride > 0 {
        let h0 = initial_state(cfg.initial, p.n, p.beta, p.seed, 0)?;
        let rec = run_trajectory(&p, &h0, 0)?;
        let rows = rec
            .snapshots
            .iter()
            .map(|(t, h)| (num(*t), h.values().to_vec()));
        out.write("snapshots.csv", &states_csv("t", rows, p.n))?;
        report.put("stream", &rec.stream_id);
        report.put("steps", rec.steps);
        let (label, time) = status(&rec.termination);
        report.put("status", label);
        if let Some(t) = time {
            report.float("end_time", t);
        }
        let last = rec.final_state();
        report.float("final_mean", last.mean());
        report.float("final_min", last.min());
    } else {
        let results = final_states(&p, cfg.initial, count)?;
        let rows = results.iter().enumerate().map(|(j, (_, t, h))| {
            let (label, time) = status(t);
            (
                format!("{j},{label},{}", num(time.unwrap_or(p.t_final))),
                h.values().to_vec(),
            )
        });
        out.write("samples.csv", &states_csv("trajectory,status,t_end", rows, p.n))?;
        exit_report(&mut report, results.iter().map(|(_, t, _)| t));
    }
    out.write("report.txt", &report.0)
}

fn exit_report<'a>(report: &mut Report, terms: impl Iterator<Item = &'a Termination>) {
    let s = exit_time_stats_from(terms);
    report.put("trajectories", s.total);
    report.put("touched_down", s.touched);
    report.put("censored", s.censored);
    report.put("solver_failures", s.solver_failures);
    report.float("touch_down_fraction", s.fraction());
    if let (Some(m), Some(se)) = (s.mean, s.std_error) {
        report.float("mean_exit_time", m);
        report.float("mean_exit_time_se", se);
    }
}

fn sample_invariant(cfg: &ExperimentConfig, out: &mut Output) -> Result<()> {
    let (n, beta, count, seed) = (
        need(cfg.n, "n")?,
        need(cfg.beta, "beta")?,
        need(cfg.samples, "samples")?,
        need(cfg.seed, "seed")?,
    );
    let batch = sample_batch(n, beta, count, seed)?;
    let rows = batch.samples.iter().map(|s| (String::new(), s.values().to_vec()));
    out.write("samples.csv", &states_csv("", rows, n))?;
    let h = Histogram::from_samples(&single_point(&batch.samples), HISTOGRAM_BINS)?;
    out.write("histogram.csv", &histogram_csv(&h))?;
    let mut report = Report::default();
    report.put("samples", batch.samples.len());
    report.put("attempts", batch.attempts);
    report.float("acceptance_rate", batch.acceptance_rate());
    report.put("reference_node", REFERENCE_NODE);
    out.write("report.txt", &report.0)
}

fn schemes(cfg: &ExperimentConfig) -> Vec<Scheme> {
    match cfg.scheme {
        Some(s) => vec![s],
        None => vec![Scheme::GruenRumpf, Scheme::CentralDifference],
    }
}

fn invariance(cfg: &ExperimentConfig, out: &mut Output) -> Result<()> {
    let (n, beta, count, seed) = (
        need(cfg.n, "n")?,
        need(cfg.beta, "beta")?,
        need(cfg.samples, "samples")?,
        need(cfg.seed, "seed")?,
    );
    let t_final = need(cfg.t_final, "t_final")?;
    let reference = sample_batch(n, beta, count, seed)?;
    let ref_single = single_point(&reference.samples);
    let ref_two = two_point_spatial(&reference.samples, cfg.delta_x)?;
    let mut report = Report::default();
    report.put("sampler.samples", reference.samples.len());
    report.float("sampler.acceptance_rate", reference.acceptance_rate());
    report.put("reference_node", REFERENCE_NODE);
    let mut singles = vec![("sampler", ref_single.clone())];
    for scheme in schemes(cfg) {
        let p = sim_params(cfg, scheme, t_final)?;
        let results = final_states(&p, cfg.initial, count)?;
        let kept: Vec<FilmState> = results
            .iter()
            .filter(|(_, t, _)| *t == Termination::Completed)
            .map(|(_, _, h)| h.clone())
            .collect();
        let key = short(scheme);
        let discarded = results.len() - kept.len();
        report.put(&format!("{key}.trajectories"), results.len());
        report.put(&format!("{key}.discarded"), discarded);
        report.float(&format!("{key}.discarded_fraction"), discarded as f64 / results.len() as f64);
        if kept.is_empty() {
            return Err(Error::EmptyInput("trajectories that reached the horizon"));
        }
        let single = single_point(&kept);
        report.ks(&format!("{key}.single_point"), &ks_two_sample(&single, &ref_single)?);
        let two = two_point_spatial(&kept, cfg.delta_x)?;
        report.ks(&format!("{key}.two_point"), &ks_two_sample(&two, &ref_two)?);
        singles.push((key, single));
    }
    // Single-point histograms on one shared range so they overlay directly.
    let (lo, hi) = singles
        .iter()
        .flat_map(|(_, v)| v.iter().copied())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    for (key, values) in &singles {
        let mut h = Histogram::with_range(lo, hi, HISTOGRAM_BINS)?;
        h.extend(values);
        out.write(&format!("histogram_{key}.csv"), &histogram_csv(&h))?;
    }
    out.write("report.txt", &report.0)
}

fn exit_time(cfg: &ExperimentConfig, out: &mut Output) -> Result<()> {
    let p = sim_params(cfg, need(cfg.scheme, "scheme")?, need(cfg.t_final, "t_final")?)?;
    let results = final_states(&p, cfg.initial, need(cfg.samples, "samples")?)?;
    let mut csv = String::from("trajectory,status,time\n");
    for (j, (_, t, _)) in results.iter().enumerate() {
        let (label, time) = status(t);
        let _ = writeln!(csv, "{j},{label},{}", num(time.unwrap_or(p.t_final)));
    }
    out.write("exit_times.csv", &csv)?;
    let mut report = Report::default();
    exit_report(&mut report, results.iter().map(|(_, t, _)| t));
    out.write("report.txt", &report.0)
}

fn repulsion(cfg: &ExperimentConfig, out: &mut Output) -> Result<()> {
    let (n, beta, count, seed) = (
        need(cfg.n, "n")?,
        need(cfg.beta, "beta")?,
        need(cfg.samples, "samples")?,
        need(cfg.seed, "seed")?,
    );
    let batch = sample_batch(n, beta, count, seed)?;
    let values = single_point(&batch.samples);
    out.write("histogram.csv", &histogram_csv(&Histogram::from_samples(&values, HISTOGRAM_BINS)?))?;
    let fit = repulsion_tail_fit(&values, cfg.h_max)?;
    let mut report = Report::default();
    report.put("samples", values.len());
    report.float("acceptance_rate", batch.acceptance_rate());
    report.put("reference_node", REFERENCE_NODE);
    report.float("h_max", cfg.h_max);
    report.put("tail_bins_used", fit.bins_used);
    report.float("tail_exponent", fit.gamma);
    report.float("tail_coefficient", fit.coefficient);
    report.float("quadratic_coefficient", fit.c2);
    let pooled: Vec<f64> = batch.samples.iter().flat_map(|h| h.values().iter().copied()).collect();
    let fit = repulsion_tail_fit(&pooled, cfg.h_max)?;
    report.put("pooled_values", pooled.len());
    report.float("pooled_tail_exponent", fit.gamma);
    report.float("pooled_quadratic_coefficient", fit.c2);
    out.write("report.txt", &report.0)
}

fn entropy(cfg: &ExperimentConfig, out: &mut Output) -> Result<()> {
    let p = sim_params(cfg, need(cfg.scheme, "scheme")?, need(cfg.t_final, "t_final")?)?;
    let count = need(cfg.samples, "samples")?;
    let stride = cfg.record_stride.max(1);
    let partials = (0..count as u64)
        .into_par_iter()
        .map(|j| {
            let h0 = initial_state(cfg.initial, p.n, p.beta, p.seed, j)?;
            let mut tracker = EntropyTracker::new(p.m, p.n, stride)?;
            let mut failure = None;
            let mut last = (0.0, h0.values().to_vec());
            let (termination, _) = drive_trajectory(&p, &h0, j, |k, t, h| {
                if failure.is_none() {
                    failure = tracker.observe(k, t, h).err();
                }
                last.0 = t;
                last.1.copy_from_slice(h);
            })?;
            if let Some(e) = failure {
                return Err(e);
            }
            if termination != Termination::Completed {
                return Err(Error::InvalidArgument(format!(
                    "trajectory {j} did not reach the horizon ({termination:?}); the balance needs every path"
                )));
            }
            tracker.finish(last.0, &last.1)
        })
        .collect::<Result<Vec<_>>>()?;
    let r = entropy_balance_from_partials(&partials, p.n, p.beta)?;
    let mut report = Report::default();
    report.put("trajectories", r.samples);
    report.put("record_stride", stride);
    report.float("t", r.t);
    report.float("lhs", r.lhs);
    report.float("rhs", r.rhs);
    report.float("lhs_se", r.lhs_se);
    report.float("rhs_se", r.rhs_se);
    report.float("combined_se", r.combined_se);
    report.float("trapezoid_bias", r.trapezoid_bias);
    report.float("difference", r.lhs - r.rhs);
    report.put("within_tolerance", r.within_tolerance());
    out.write("report.txt", &report.0)
}

/// `(h_0(x₀), h_δt(x₀))` pairs of the trajectories of `p` that reach the
/// horizon, started from invariant draws.
pub fn two_time_run(p: &SimParams, count: usize) -> Result<(Vec<(f64, f64)>, usize)> {
    let results = final_states(p, InitialState::Invariant, count)?;
    let pairs: Vec<(f64, f64)> = results
        .iter()
        .filter(|(_, t, _)| *t == Termination::Completed)
        .map(|(h0, _, h)| (h0.values()[REFERENCE_NODE], h.values()[REFERENCE_NODE]))
        .collect();
    let discarded = results.len() - pairs.len();
    Ok((pairs, discarded))
}

fn two_time(cfg: &ExperimentConfig, out: &mut Output) -> Result<()> {
    let delta_t = need(cfg.delta_t, "delta_t")?;
    let count = need(cfg.samples, "samples")?;
    let gr = sim_params(cfg, Scheme::GruenRumpf, delta_t)?;
    let cd = sim_params(cfg, Scheme::CentralDifference, delta_t)?;
    let (gr_pairs, gr_discarded) = two_time_run(&gr, count)?;
    let (cd_pairs, cd_discarded) = two_time_run(&cd, count)?;
    let (hg, hc) = shared_joint_histograms(&gr_pairs, &cd_pairs, JOINT_BINS)?;
    out.write("joint_histogram_gr.csv", &joint_csv(&hg))?;
    out.write("joint_histogram_cd.csv", &joint_csv(&hc))?;
    let l1 = l1_distance(&hg, &hc)?;
    let se = l1_bootstrap_se(&gr_pairs, &cd_pairs, JOINT_BINS, BOOTSTRAP_REPLICATES, need(cfg.seed, "seed")?)?;
    let mut report = Report::default();
    report.put("gr.pairs", gr_pairs.len());
    report.put("gr.discarded", gr_discarded);
    report.put("cd.pairs", cd_pairs.len());
    report.put("cd.discarded", cd_discarded);
    report.put("reference_node", REFERENCE_NODE);
    report.float("l1_distance", l1);
    report.float("l1_bootstrap_sd", se);
    out.write("report.txt", &report.0)
}

/// Grid `m_min + k·m_step` up to `m_max` (inclusive up to rounding).
pub fn exponent_grid(m_min: f64, m_max: f64, m_step: f64) -> Result<Vec<f64>> {
    if !(m_step > 0.0) || !(m_max >= m_min) {
        return Err(Error::Config(format!(
            "need m_step > 0 and m_max >= m_min, got m_min = {m_min}, m_max = {m_max}, m_step = {m_step}"
        )));
    }
    let count = ((m_max - m_min) / m_step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|k| m_min + k as f64 * m_step).collect())
}

fn ldp_feasibility(cfg: &ExperimentConfig, out: &mut Output) -> Result<()> {
    let grid = exponent_grid(
        need(cfg.m_min, "m_min")?,
        need(cfg.m_max, "m_max")?,
        need(cfg.m_step, "m_step")?,
    )?;
    let mut csv = String::from("m,gamma_lo,gamma_hi,feasible\n");
    let mut feasible = 0usize;
    for m in &grid {
        let (lo, hi) = gamma_bounds(*m)?;
        let ok = lo < hi;
        feasible += ok as usize;
        let _ = writeln!(csv, "{},{},{},{}", num(*m), num(lo), num(hi), ok as u8);
    }
    out.write("feasibility.csv", &csv)?;
    let mut report = Report::default();
    report.put("points", grid.len());
    report.put("feasible", feasible);
    out.write("report.txt", &report.0)
}

fn ldp_rate(cfg: &ExperimentConfig, out: &mut Output) -> Result<()> {
    let a = LdpAnsatz {
        m: need(cfg.m, "mobility_exponent")?,
        gamma: need(cfg.gamma, "gamma")?,
        eta: need(cfg.eta, "eta")?,
        t: need(cfg.t_final, "t_final")?,
    };
    let mut report = Report::default();
    let (lo, hi) = gamma_bounds(a.m)?;
    report.float("gamma_lo", lo);
    report.float("gamma_hi", hi);
    if let Ok(Some(w)) = eta_window(a.m, a.gamma) {
        report.float("inverse_eta_lo", w.inverse.lo);
        report.float("inverse_eta_hi", w.inverse.hi);
    }
    let b = rate_upper_bound(&a)?;
    report.float("p1", b.p1);
    report.float("p2", b.p2);
    report.float("time_factor1", b.time_factor1);
    report.float("time_factor2", b.time_factor2);
    report.float("j1", b.j1);
    report.float("j2", b.j2);
    report.float("j1_tail", b.j1_tail);
    report.float("j2_tail", b.j2_tail);
    report.float("j1_error", b.j1_error);
    report.float("j2_error", b.j2_error);
    report.float("radius", b.radius);
    report.put("tail_converged", b.tail_converged);
    report.float("bound", b.bound);
    out.write("report.txt", &report.0)
}
