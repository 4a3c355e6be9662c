//! Semi-implicit Euler–Maruyama stepping for both discretizations.
//!
//! One step solves
//!
//! ```text
//! (Id + Δt L(h_k)) h_{k+1} = h_k + Δt·b(h_k) + √(2NΔt/β)·B(h_k) W_k
//! ```
//!
//! with `L = Aᵀ G A AᵀA`, `b = (N²/β) Aᵀ d`, `B = Aᵀ √G` for the harmonic-mean
//! scheme and `L = Cᵀ M C AᵀA`, `b = 0`, `B = Cᵀ √M` for central differences.

use crate::error::{Error, Result};
use crate::grid::{
    central_difference_transpose_into, forward_difference_transpose_into, DriftMatrix,
    FilmState, ImplicitSolver, Scheme,
};
use crate::mobility::Mobility;
use crate::rng::{NoiseStream, Purpose};

/// Reference step `1e-10` at `N = 50`, scaled by `(50/N)⁴`.
pub fn default_dt(n: usize) -> f64 {
    1e-10 * (50.0 / n as f64).powi(4)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimParams {
    pub n: usize,
    pub m: f64,
    /// Inverse temperature. `f64::INFINITY` switches off noise and Itô drift.
    pub beta: f64,
    pub dt: f64,
    pub t_final: f64,
    pub scheme: Scheme,
    pub seed: u64,
    /// Steps between recorded snapshots; `0` records only the endpoints.
    pub record_stride: u64,
}

impl SimParams {
    /// Parameters with the default step for `n` and flat-film defaults elsewhere.
    pub fn new(n: usize, m: f64, beta: f64, t_final: f64, scheme: Scheme, seed: u64) -> Self {
        Self {
            n,
            m,
            beta,
            dt: default_dt(n),
            t_final,
            scheme,
            seed,
            record_stride: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidArgument(format!("n must be >= 2, got {}", self.n)));
        }
        if !(self.beta > 0.0) {
            return Err(Error::InvalidArgument(format!("beta must be > 0, got {}", self.beta)));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidArgument(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.t_final >= 0.0) || !self.t_final.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "t_final must be finite and >= 0, got {}",
                self.t_final
            )));
        }
        if self.t_final > 0.0 && self.dt > self.t_final {
            return Err(Error::InvalidArgument(format!(
                "dt = {} exceeds t_final = {}",
                self.dt, self.t_final
            )));
        }
        Mobility::new(self.m)?;
        Ok(())
    }

    /// Number of steps to reach `t_final` (the last one may overshoot by
    /// less than one `dt` when `t_final/dt` is not an integer).
    pub fn steps(&self) -> u64 {
        if self.t_final == 0.0 {
            return 0;
        }
        let ratio = self.t_final / self.dt;
        let rounded = ratio.round();
        if (ratio - rounded).abs() <= 1e-9 * ratio {
            rounded as u64
        } else {
            ratio.ceil() as u64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    Completed,
    /// A nodal height reached zero or below after the step ending at `time`.
    TouchDown { time: f64 },
    /// The linear solve failed on the step ending at `time`.
    SolverFailure { time: f64, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub scheme: Scheme,
    pub snapshots: Vec<(f64, FilmState)>,
    pub termination: Termination,
    pub stream_id: String,
    /// Number of completed steps.
    pub steps: u64,
}

impl TrajectoryRecord {
    pub fn final_state(&self) -> &FilmState {
        &self.snapshots.last().expect("a record always holds the initial state").1
    }

    pub fn completed(&self) -> bool {
        self.termination == Termination::Completed
    }

    pub fn touch_down_time(&self) -> Option<f64> {
        match self.termination {
            Termination::TouchDown { time } => Some(time),
            _ => None,
        }
    }

    /// A harmonic-mean trajectory that left the positive cone. The
    /// continuous process cannot do this for `m ≥ 3`, so this flags an
    /// under-resolved time step rather than a physical touch-down.
    pub fn is_resolution_failure(&self) -> bool {
        self.scheme == Scheme::GruenRumpf
            && self.touch_down_time().is_some()
    }
}

/// Outcome of a single step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepStatus {
    Interior,
    /// Some output entry is `≤ 0`.
    Boundary,
}

/// Reusable workspace that advances one state by one step.
#[derive(Debug, Clone)]
pub struct Stepper {
    scheme: Scheme,
    mobility: Mobility,
    n: usize,
    dt: f64,
    drift_scale: f64,
    noise_scale: f64,
    metric: Vec<f64>,
    flux: Vec<f64>,
    rhs: Vec<f64>,
    drift: DriftMatrix,
    solver: ImplicitSolver,
}

impl Stepper {
    pub fn new(p: &SimParams) -> Result<Self> {
        p.validate()?;
        let n = p.n;
        let nf = n as f64;
        let (drift_scale, noise_scale) = if p.beta.is_infinite() {
            (0.0, 0.0)
        } else {
            (p.dt * nf * nf / p.beta, (2.0 * nf * p.dt / p.beta).sqrt())
        };
        let drift = crate::grid::discrete_bilaplacian_drift(
            &FilmState::flat(n)?,
            &vec![1.0; n],
            p.scheme,
        )?;
        Ok(Self {
            scheme: p.scheme,
            mobility: Mobility::new(p.m)?,
            n,
            dt: p.dt,
            drift_scale,
            noise_scale,
            metric: vec![0.0; n],
            flux: vec![0.0; n],
            rhs: vec![0.0; n],
            drift,
            solver: ImplicitSolver::new(),
        })
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// Advances `h` (strictly positive, length N) with increments `w` into `out`.
    pub fn step(&mut self, h: &[f64], w: &[f64], out: &mut [f64]) -> Result<StepStatus> {
        let n = self.n;
        if h.len() != n || w.len() != n || out.len() != n {
            return Err(Error::InvalidArgument(format!(
                "step buffers must have length {n}"
            )));
        }
        if let Some(i) = h.iter().position(|&x| !(x > 0.0)) {
            return Err(Error::Domain(format!(
                "step input height {} at node {i} is not strictly positive",
                h[i]
            )));
        }
        match self.scheme {
            Scheme::GruenRumpf => {
                for a in 0..n {
                    let right = if a + 1 == n { h[0] } else { h[a + 1] };
                    let (g, d) = self.mobility.edge_terms(h[a], right);
                    self.metric[a] = g;
                    self.flux[a] = self.drift_scale * d + self.noise_scale * g.sqrt() * w[a];
                }
                forward_difference_transpose_into(&self.flux, &mut self.rhs);
            }
            Scheme::CentralDifference => {
                for i in 0..n {
                    let mu = self.mobility.value(h[i]);
                    self.metric[i] = mu;
                    self.flux[i] = self.noise_scale * mu.sqrt() * w[i];
                }
                central_difference_transpose_into(&self.flux, &mut self.rhs);
            }
        }
        for (r, &x) in self.rhs.iter_mut().zip(h) {
            *r += x;
        }
        self.drift.assemble(self.scheme, &self.metric);
        self.solver.solve(&self.drift, self.dt, &self.rhs, out)?;
        if out.iter().all(|&x| x > 0.0) {
            Ok(StepStatus::Interior)
        } else {
            Ok(StepStatus::Boundary)
        }
    }
}

fn check_scheme(p: &SimParams, scheme: Scheme) -> Result<()> {
    if p.scheme != scheme {
        return Err(Error::InvalidArgument(format!(
            "parameters are for the {} scheme, expected {scheme}",
            p.scheme
        )));
    }
    Ok(())
}

/// One harmonic-mean step. A nonpositive output is an error: the time step
/// is too coarse to resolve the boundary repulsion.
pub fn gr_step(h: &FilmState, p: &SimParams, w: &[f64]) -> Result<FilmState> {
    check_scheme(p, Scheme::GruenRumpf)?;
    h.check_positive()?;
    let mut out = vec![0.0; h.n()];
    match Stepper::new(p)?.step(h.values(), w, &mut out)? {
        StepStatus::Interior => FilmState::new(out),
        StepStatus::Boundary => Err(Error::Domain(format!(
            "harmonic-mean step produced a nonpositive height (min {:e}); reduce dt",
            out.iter().copied().fold(f64::INFINITY, f64::min)
        ))),
    }
}

/// Result of a central-difference step.
#[derive(Debug, Clone, PartialEq)]
pub enum CdStep {
    Interior(FilmState),
    /// The post-solve state has an entry `≤ 0`.
    TouchDown(FilmState),
}

/// One central-difference step.
pub fn cd_step(h: &FilmState, p: &SimParams, w: &[f64]) -> Result<CdStep> {
    check_scheme(p, Scheme::CentralDifference)?;
    h.check_positive()?;
    let mut out = vec![0.0; h.n()];
    let status = Stepper::new(p)?.step(h.values(), w, &mut out)?;
    let state = FilmState::new(out)?;
    Ok(match status {
        StepStatus::Interior => CdStep::Interior(state),
        StepStatus::Boundary => CdStep::TouchDown(state),
    })
}

/// Runs one trajectory, calling `observe(k, t, h)` on the initial state and
/// after every interior step. Returns the termination cause and step count.
pub fn drive_trajectory<F>(
    p: &SimParams,
    h0: &FilmState,
    trajectory_index: u64,
    mut observe: F,
) -> Result<(Termination, u64)>
where
    F: FnMut(u64, f64, &[f64]),
{
    p.validate()?;
    if h0.n() != p.n {
        return Err(Error::InvalidArgument(format!(
            "initial state has {} nodes, parameters say {}",
            h0.n(),
            p.n
        )));
    }
    h0.check_positive()?;
    let mut stepper = Stepper::new(p)?;
    let mut stream = NoiseStream::new(p.seed, trajectory_index, Purpose::Dynamics);
    let mut h = h0.values().to_vec();
    let mut next = vec![0.0; p.n];
    let mut w = vec![0.0; p.n];
    observe(0, 0.0, &h);
    let steps = p.steps();
    for k in 0..steps {
        stream.gaussian_into(k, &mut w);
        let time = (k + 1) as f64 * p.dt;
        match stepper.step(&h, &w, &mut next) {
            Ok(StepStatus::Interior) => {}
            Ok(StepStatus::Boundary) => return Ok((Termination::TouchDown { time }, k)),
            Err(Error::Solver(reason)) => {
                return Ok((Termination::SolverFailure { time, reason }, k))
            }
            Err(e) => return Err(e),
        }
        std::mem::swap(&mut h, &mut next);
        observe(k + 1, time, &h);
    }
    Ok((Termination::Completed, steps))
}

/// Runs one trajectory and records snapshots at `record_stride` and at the
/// last interior step.
pub fn run_trajectory(p: &SimParams, h0: &FilmState, trajectory_index: u64) -> Result<TrajectoryRecord> {
    let stride = p.record_stride;
    let mut snapshots: Vec<(f64, FilmState)> = Vec::new();
    let mut last: Option<(u64, f64, Vec<f64>)> = None;
    let (termination, steps) = drive_trajectory(p, h0, trajectory_index, |k, t, h| {
        if k == 0 || (stride > 0 && k % stride == 0) {
            snapshots.push((t, FilmState::new(h.to_vec()).expect("finite state")));
            last = None;
        } else {
            match &mut last {
                Some((lk, lt, buf)) => {
                    *lk = k;
                    *lt = t;
                    buf.copy_from_slice(h);
                }
                None => last = Some((k, t, h.to_vec())),
            }
        }
    })?;
    if let Some((_, t, buf)) = last {
        snapshots.push((t, FilmState::new(buf)?));
    }
    Ok(TrajectoryRecord {
        scheme: p.scheme,
        snapshots,
        termination,
        stream_id: NoiseStream::new(p.seed, trajectory_index, Purpose::Dynamics).id(),
        steps,
    })
}
