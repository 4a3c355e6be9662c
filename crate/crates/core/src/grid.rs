//! Periodic difference operators on the uniform grid `x_i = i/N` of the unit
//! torus, and the implicit linear solve used by both time steppers.
//!
//! Index conventions: node `i` carries `h_i`; edge `α` is the interval
//! `[x_α, x_{α+1})`, so its left node is `α` and its right node is
//! `α + 1 mod N`.
//!
//! | operator | action |
//! |----------|--------|
//! | `A`   | `(Ah)_α = N (h_{α+1} - h_α)` |
//! | `Aᵀ`  | `(Aᵀv)_i = N (v_{i-1} - v_i)` |
//! | `C`   | `(Cb)_j = N (b_{j+1} - b_{j-1})` |
//! | `Cᵀ`  | `(Cᵀv)_i = N (v_{i-1} - v_{i+1})` |

use std::fmt;

use crate::error::{Error, Result};

/// Which spatial discretization a matrix or trajectory belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Harmonic-mean (edge-based) mobility with the `A` operator.
    GruenRumpf,
    /// Node-based mobility with the central difference operator `C`.
    CentralDifference,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::GruenRumpf => "gruen-rumpf",
            Scheme::CentralDifference => "central-difference",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gruen-rumpf" => Ok(Scheme::GruenRumpf),
            "central-difference" => Ok(Scheme::CentralDifference),
            other => Err(Error::InvalidArgument(format!(
                "unknown scheme '{other}' (expected 'gruen-rumpf' or 'central-difference')"
            ))),
        }
    }
}

/// Nodal film heights on the periodic grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FilmState {
    values: Vec<f64>,
}

impl FilmState {
    /// Wraps nodal values; requires at least two finite entries.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidState(format!(
                "grid size must be at least 2, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidState(format!(
                "non-finite height {} at node {i}",
                values[i]
            )));
        }
        Ok(Self { values })
    }

    /// Like [`FilmState::new`] but additionally requires every entry to be > 0.
    pub fn positive(values: Vec<f64>) -> Result<Self> {
        let state = Self::new(values)?;
        state.check_positive()?;
        Ok(state)
    }

    /// The flat film `h ≡ 1`.
    pub fn flat(n: usize) -> Result<Self> {
        Self::new(vec![1.0; n])
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn check_positive(&self) -> Result<()> {
        match self.values.iter().position(|&v| v <= 0.0) {
            Some(i) => Err(Error::Domain(format!(
                "height {} at node {i} is not strictly positive",
                self.values[i]
            ))),
            None => Ok(()),
        }
    }
}

/// One value per interval `I_α = [x_α, x_{α+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeField {
    values: Vec<f64>,
}

impl EdgeField {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// `(i + d) mod n` without integer division for the usual `|d| < n`.
#[inline]
fn wrap_index(i: usize, d: isize, n: usize) -> usize {
    let mut j = i as isize + d;
    let n = n as isize;
    while j < 0 {
        j += n;
    }
    while j >= n {
        j -= n;
    }
    j as usize
}

#[inline]
fn prev(i: usize, n: usize) -> usize {
    if i == 0 {
        n - 1
    } else {
        i - 1
    }
}

#[inline]
fn next(i: usize, n: usize) -> usize {
    if i + 1 == n {
        0
    } else {
        i + 1
    }
}

/// `out = A h`.
pub fn forward_difference_into(h: &[f64], out: &mut [f64]) {
    let n = h.len();
    let scale = n as f64;
    for a in 0..n {
        out[a] = scale * (h[next(a, n)] - h[a]);
    }
}

/// `out = Aᵀ v`.
pub fn forward_difference_transpose_into(v: &[f64], out: &mut [f64]) {
    let n = v.len();
    let scale = n as f64;
    for i in 0..n {
        out[i] = scale * (v[prev(i, n)] - v[i]);
    }
}

/// `out = C b`.
pub fn central_difference_into(b: &[f64], out: &mut [f64]) {
    let n = b.len();
    let scale = n as f64;
    for j in 0..n {
        out[j] = scale * (b[next(j, n)] - b[prev(j, n)]);
    }
}

/// `out = Cᵀ v`.
pub fn central_difference_transpose_into(v: &[f64], out: &mut [f64]) {
    let n = v.len();
    let scale = n as f64;
    for i in 0..n {
        out[i] = scale * (v[prev(i, n)] - v[next(i, n)]);
    }
}

pub fn apply_forward_difference(h: &FilmState) -> EdgeField {
    let mut out = vec![0.0; h.n()];
    forward_difference_into(h.values(), &mut out);
    EdgeField::new(out)
}

pub fn apply_forward_difference_transpose(v: &EdgeField) -> Vec<f64> {
    let mut out = vec![0.0; v.n()];
    forward_difference_transpose_into(v.values(), &mut out);
    out
}

pub fn apply_central_difference(b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; b.len()];
    central_difference_into(b, &mut out);
    out
}

pub fn apply_central_difference_transpose(v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    central_difference_transpose_into(v, &mut out);
    out
}

/// `out = Aᵀ A h = -N² (h_{i+1} - 2 h_i + h_{i-1})`.
pub fn neg_laplacian_into(h: &[f64], out: &mut [f64]) {
    let n = h.len();
    let n2 = (n * n) as f64;
    for i in 0..n {
        out[i] = -n2 * (h[next(i, n)] - 2.0 * h[i] + h[prev(i, n)]);
    }
}

/// A square matrix whose nonzeros lie on the cyclic diagonals `-w..=w`.
///
/// Entry `(i, k)` of the storage is the coefficient multiplying column
/// `(i + k - w) mod n`. For `n < 2w + 1` several offsets share a column;
/// every consumer sums them, so small grids are represented exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct CyclicBand {
    n: usize,
    half_width: usize,
    entries: Vec<f64>,
}

impl CyclicBand {
    pub fn zeros(n: usize, half_width: usize) -> Self {
        Self {
            n,
            half_width,
            entries: vec![0.0; n * (2 * half_width + 1)],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    #[inline]
    fn stride(&self) -> usize {
        2 * self.half_width + 1
    }

    /// Coefficient on cyclic offset `d` in row `i`.
    #[inline]
    pub fn get(&self, i: usize, d: isize) -> f64 {
        self.entries[i * self.stride() + (d + self.half_width as isize) as usize]
    }

    #[inline]
    pub fn set(&mut self, i: usize, d: isize, value: f64) {
        let s = self.stride();
        self.entries[i * s + (d + self.half_width as isize) as usize] = value;
    }

    #[inline]
    fn column(&self, i: usize, d: isize) -> usize {
        wrap_index(i, d, self.n)
    }

    pub fn matvec_into(&self, x: &[f64], out: &mut [f64]) {
        let w = self.half_width as isize;
        for (i, o) in out.iter_mut().enumerate().take(self.n) {
            let mut acc = 0.0;
            for d in -w..=w {
                acc += self.get(i, d) * x[self.column(i, d)];
            }
            *o = acc;
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.matvec_into(x, &mut out);
        out
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.n;
        let w = self.half_width as isize;
        let mut dense = vec![0.0; n * n];
        for i in 0..n {
            for d in -w..=w {
                dense[i * n + self.column(i, d)] += self.get(i, d);
            }
        }
        dense
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let w = self.half_width as isize;
        let mut sums = vec![0.0; self.n];
        for i in 0..self.n {
            for d in -w..=w {
                sums[self.column(i, d)] += self.get(i, d);
            }
        }
        sums
    }
}

/// The stiff drift matrix `L` of either scheme:
/// `Aᵀ diag(g) A AᵀA` (edge metric) or `Cᵀ diag(M(h)) C AᵀA` (node mobility).
#[derive(Debug, Clone, PartialEq)]
pub struct DriftMatrix {
    scheme: Scheme,
    band: CyclicBand,
}

impl DriftMatrix {
    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn band(&self) -> &CyclicBand {
        &self.band
    }

    pub fn n(&self) -> usize {
        self.band.n
    }

    /// Assembles `L` in place from a strictly positive metric diagonal.
    /// `metric` is edge-indexed for [`Scheme::GruenRumpf`] and node-indexed
    /// for [`Scheme::CentralDifference`].
    pub fn assemble(&mut self, scheme: Scheme, metric: &[f64]) {
        let n = metric.len();
        let w = match scheme {
            Scheme::GruenRumpf => 2,
            Scheme::CentralDifference => 3,
        };
        if self.band.n != n || self.band.half_width != w {
            self.band = CyclicBand::zeros(n, w);
        }
        self.scheme = scheme;
        let n4 = (n as f64).powi(4);
        let band = &mut self.band;
        match scheme {
            Scheme::GruenRumpf => {
                // L_{i,i+d} for d = -2..2 with left edge i-1 and right edge i.
                for i in 0..n {
                    let gl = metric[prev(i, n)];
                    let gr = metric[i];
                    band.set(i, -2, n4 * gl);
                    band.set(i, -1, n4 * (-3.0 * gl - gr));
                    band.set(i, 0, n4 * 3.0 * (gl + gr));
                    band.set(i, 1, n4 * (-gl - 3.0 * gr));
                    band.set(i, 2, n4 * gr);
                }
            }
            Scheme::CentralDifference => {
                for i in 0..n {
                    let ml = metric[prev(i, n)];
                    let mr = metric[next(i, n)];
                    band.set(i, -3, n4 * ml);
                    band.set(i, -2, -2.0 * n4 * ml);
                    band.set(i, -1, -n4 * mr);
                    band.set(i, 0, 2.0 * n4 * (ml + mr));
                    band.set(i, 1, -n4 * ml);
                    band.set(i, 2, -2.0 * n4 * mr);
                    band.set(i, 3, n4 * mr);
                }
            }
        }
    }

    fn empty(scheme: Scheme) -> Self {
        Self {
            scheme,
            band: CyclicBand::zeros(0, 0),
        }
    }
}

/// Builds `L = Aᵀ diag(g) A (AᵀA)` for the edge metric or
/// `L = Cᵀ diag(M(h)) C (AᵀA)` for the node mobility.
pub fn discrete_bilaplacian_drift(
    h: &FilmState,
    metric_diag: &[f64],
    scheme: Scheme,
) -> Result<DriftMatrix> {
    if metric_diag.len() != h.n() {
        return Err(Error::InvalidArgument(format!(
            "metric diagonal has length {} but the grid has {} nodes",
            metric_diag.len(),
            h.n()
        )));
    }
    if let Some(i) = metric_diag.iter().position(|&g| !(g > 0.0) || !g.is_finite()) {
        return Err(Error::Domain(format!(
            "metric entry {} at index {i} is not strictly positive",
            metric_diag[i]
        )));
    }
    let mut l = DriftMatrix::empty(scheme);
    l.assemble(scheme, metric_diag);
    Ok(l)
}

/// Relative residual accepted without refinement.
const RESIDUAL_TARGET: f64 = 1e-13;
/// Relative residual above which a solve is reported as failed.
const RESIDUAL_LIMIT: f64 = 1e-10;
/// Pivot ratio beyond which a factorization is treated as singular.
const CONDITION_LIMIT: f64 = 1e13;

/// Solves `(Id + dt L) u = rhs`, reusing its buffers across calls.
///
/// Strictly diagonally dominant systems with `N ≥ 4w` go through an O(N)
/// bordered band elimination; anything else falls back to dense LU with
/// partial pivoting. Every answer is checked against the residual bound,
/// with one round of iterative refinement, before it is returned.
#[derive(Debug, Default, Clone)]
pub struct ImplicitSolver {
    system: Vec<f64>,
    load: Vec<f64>,
    delta: Vec<f64>,
    residual: Vec<f64>,
    correction: Vec<f64>,
    pad: Vec<f64>,
    band2: BandLu<2, 5>,
    band3: BandLu<3, 7>,
    dense: DenseLu,
    used_dense: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Method {
    Band,
    Dense,
}

impl ImplicitSolver {
    pub fn new() -> Self {
        Self::default()
    }

    /// Whether the previous solve used the dense fallback.
    pub fn used_dense(&self) -> bool {
        self.used_dense
    }

    pub fn solve(&mut self, l: &DriftMatrix, dt: f64, rhs: &[f64], out: &mut [f64]) -> Result<()> {
        match l.band.half_width {
            2 => self.solve_width::<2, 5>(l, dt, rhs, out),
            3 => self.solve_width::<3, 7>(l, dt, rhs, out),
            w => Err(Error::InvalidArgument(format!("unsupported band half-width {w}"))),
        }
    }

    fn solve_width<const W: usize, const S: usize>(
        &mut self,
        l: &DriftMatrix,
        dt: f64,
        rhs: &[f64],
        out: &mut [f64],
    ) -> Result<()> {
        let n = l.n();
        if rhs.len() != n || out.len() != n {
            return Err(Error::InvalidArgument(format!(
                "right-hand side of length {} for a {n}x{n} system",
                rhs.len()
            )));
        }
        if !(dt >= 0.0) || !dt.is_finite() {
            return Err(Error::InvalidArgument(format!("time step must be >= 0, got {dt}")));
        }
        if dt == 0.0 {
            out.copy_from_slice(rhs);
            return Ok(());
        }
        self.system.clear();
        self.system.extend(l.band.entries.iter().map(|&v| dt * v));

        // Solve for the increment δ = rhs − u from (Id + dt L) δ = dt L rhs.
        // Constants are then reproduced exactly and the mean error scales
        // with |δ| rather than |u|.
        let mut load = std::mem::take(&mut self.load);
        load.resize(n, 0.0);
        band_matvec::<S>(self.system.as_chunks::<S>().0, rhs, &mut self.pad, &mut load);
        let mut dominant = true;
        let mut op_norm = 0.0f64;
        for row in self.system.as_chunks_mut::<S>().0 {
            row[W] += 1.0;
            let total: f64 = row.iter().map(|v| v.abs()).sum();
            let diag = row[W].abs();
            dominant &= diag > total - diag;
            op_norm = op_norm.max(total);
        }
        if load.iter().all(|&v| v == 0.0) {
            out.copy_from_slice(rhs);
            self.load = load;
            self.used_dense = false;
            return Ok(());
        }
        let method = if n >= 4 * W && n >= 8 && dominant {
            Method::Band
        } else {
            Method::Dense
        };
        self.used_dense = method == Method::Dense;
        let mut delta = std::mem::take(&mut self.delta);
        delta.resize(n, 0.0);
        let result = self.solve_increment::<W, S>(method, op_norm, rhs, &load, &mut delta);
        if result.is_ok() {
            for ((o, &r), &d) in out.iter_mut().zip(rhs).zip(&delta) {
                *o = r - d;
            }
        }
        self.load = load;
        self.delta = delta;
        result
    }

    fn factor<const W: usize, const S: usize>(&mut self, method: Method) -> Result<()> {
        let sys = self.system.as_chunks::<S>().0;
        match method {
            Method::Dense => self.dense.factor::<S>(sys),
            Method::Band if W == 2 => self.band2.factor(self.system.as_chunks::<5>().0),
            Method::Band => self.band3.factor(self.system.as_chunks::<7>().0),
        }
    }

    fn apply_inverse<const W: usize, const S: usize>(&mut self, method: Method, b: &[f64], x: &mut [f64]) {
        match method {
            Method::Dense => self.dense.solve(b, x),
            Method::Band if W == 2 => self.band2.solve(self.system.as_chunks::<5>().0, b, x),
            Method::Band => self.band3.solve(self.system.as_chunks::<7>().0, b, x),
        }
    }

    fn solve_increment<const W: usize, const S: usize>(
        &mut self,
        method: Method,
        op_norm: f64,
        rhs: &[f64],
        load: &[f64],
        delta: &mut [f64],
    ) -> Result<()> {
        let n = rhs.len();
        self.factor::<W, S>(method)?;
        self.apply_inverse::<W, S>(method, load, delta);
        // Backward-error scale of the original system: for dt·‖L‖ ≲ 1 this
        // is ‖rhs‖ up to a factor 2.
        let rhs_norm = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let u_norm = |d: &[f64]| {
            rhs.iter()
                .zip(d)
                .fold(0.0f64, |m, (r, x)| m.max((r - x).abs()))
        };
        let mut residual = std::mem::take(&mut self.residual);
        residual.resize(n, 0.0);
        let sys = self.system.as_chunks::<S>().0;
        let mut res = band_residual::<S>(sys, delta, load, &mut self.pad, &mut residual);
        let mut scale = rhs_norm + op_norm * u_norm(delta);
        if res > RESIDUAL_TARGET * scale {
            let mut correction = std::mem::take(&mut self.correction);
            correction.resize(n, 0.0);
            self.apply_inverse::<W, S>(method, &residual, &mut correction);
            for (o, c) in delta.iter_mut().zip(&correction) {
                *o += c;
            }
            self.correction = correction;
            let sys = self.system.as_chunks::<S>().0;
            res = band_residual::<S>(sys, delta, load, &mut self.pad, &mut residual);
            scale = rhs_norm + op_norm * u_norm(delta);
        }
        self.residual = residual;
        if !(res <= RESIDUAL_LIMIT * scale) {
            return Err(Error::Solver(format!(
                "residual {res:.3e} exceeds {RESIDUAL_LIMIT:e} x (|rhs| + |S||u|) = {:.3e}",
                RESIDUAL_LIMIT * scale
            )));
        }
        Ok(())
    }
}

/// `out = S x` for a cyclic band matrix; `pad` receives `x` extended
/// periodically by `S / 2` entries on both sides.
fn band_matvec<const S: usize>(sys: &[[f64; S]], x: &[f64], pad: &mut Vec<f64>, out: &mut [f64]) {
    let n = x.len();
    let w = S / 2;
    pad.clear();
    if n >= w {
        pad.extend_from_slice(&x[n - w..]);
        pad.extend_from_slice(x);
        pad.extend_from_slice(&x[..w]);
    } else {
        pad.extend((0..n + 2 * w).map(|j| x[wrap_index(j, -(w as isize), n)]));
    }
    for ((row, window), o) in sys.iter().zip(pad.windows(S)).zip(out.iter_mut()) {
        let window: &[f64; S] = window.try_into().expect("window of band width");
        let mut acc = 0.0;
        for k in 0..S {
            acc += row[k] * window[k];
        }
        *o = acc;
    }
}

/// `r = b − S x`; returns `max |r_i|`.
fn band_residual<const S: usize>(
    sys: &[[f64; S]],
    x: &[f64],
    b: &[f64],
    pad: &mut Vec<f64>,
    r: &mut [f64],
) -> f64 {
    band_matvec::<S>(sys, x, pad, r);
    let mut norm = 0.0f64;
    for (ri, &bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
        norm = norm.max(ri.abs());
    }
    norm
}

/// Bordered elimination of a cyclic band matrix with half-width `W`
/// (`S = 2W + 1`): the leading `m = N − W` block is a plain band matrix
/// factorized without pivoting, the last `W` unknowns are recovered from
/// the `W × W` Schur complement. Needs `N ≥ 3W`.
#[derive(Debug, Clone)]
struct BandLu<const W: usize, const S: usize> {
    m: usize,
    /// Doolittle factors of the leading block; entry `k` of row `i` is
    /// column `i + k − W`.
    lu: Vec<[f64; S]>,
    /// `P⁻¹ Q`, the leading block's inverse applied to the border columns.
    y: Vec<[f64; W]>,
    /// Pivoted LU of the Schur complement.
    schur: [[f64; W]; W],
    perm: [usize; W],
}

impl<const W: usize, const S: usize> Default for BandLu<W, S> {
    fn default() -> Self {
        Self {
            m: 0,
            lu: Vec::new(),
            y: Vec::new(),
            schur: [[0.0; W]; W],
            perm: [0; W],
        }
    }
}

impl<const W: usize, const S: usize> BandLu<W, S> {
    fn factor(&mut self, sys: &[[f64; S]]) -> Result<()> {
        let n = sys.len();
        let m = n - W;
        self.m = m;
        self.lu.clear();
        self.lu.extend_from_slice(&sys[..m]);
        self.y.clear();
        self.y.resize(m, [0.0; W]);
        // Entries that wrap or leave the leading block form the border Q.
        for i in 0..W {
            for k in 0..(W - i) {
                self.y[i][i + k] = self.lu[i][k];
                self.lu[i][k] = 0.0;
            }
        }
        for i in (m - W)..m {
            for k in (m - i + W)..S {
                self.y[i][i + k - W - m] = self.lu[i][k];
                self.lu[i][k] = 0.0;
            }
        }
        // Entries outside the block are zero, so the last rows need no
        // special casing beyond staying inside the array.
        for k in 0..m {
            let (head, rest) = self.lu.split_at_mut(k + 1);
            let upper = &head[k];
            let pivot = upper[W];
            if !(pivot.abs() > 0.0) {
                return Err(Error::Solver(format!("zero pivot in band elimination at row {k}")));
            }
            let inv = 1.0 / pivot;
            for (o, row) in rest.iter_mut().take(W).enumerate() {
                // Row k + o + 1 holds column k at index W − o − 1.
                let f = row[W - o - 1] * inv;
                row[W - o - 1] = f;
                for j in 0..W {
                    row[W - o + j] -= f * upper[W + 1 + j];
                }
            }
        }
        self.y_substitute();
        let mut schur = [[0.0; W]; W];
        for (r, srow) in schur.iter_mut().enumerate() {
            let i = m + r;
            for k in 0..S {
                let col = wrap_index(i, k as isize - W as isize, n);
                if col >= m {
                    srow[col - m] += sys[i][k];
                } else {
                    for c in 0..W {
                        srow[c] -= sys[i][k] * self.y[col][c];
                    }
                }
            }
        }
        let mut perm = [0usize; W];
        let (mut max_pivot, mut min_pivot) = (0.0f64, f64::INFINITY);
        for (k, p) in perm.iter_mut().enumerate() {
            *p = (k..W)
                .max_by(|&a, &b| schur[a][k].abs().total_cmp(&schur[b][k].abs()))
                .unwrap_or(k);
            schur.swap(k, *p);
            let pivot = schur[k][k];
            max_pivot = max_pivot.max(pivot.abs());
            min_pivot = min_pivot.min(pivot.abs());
            if pivot == 0.0 {
                return Err(Error::Solver("singular border block".into()));
            }
            for r in (k + 1)..W {
                let f = schur[r][k] / pivot;
                schur[r][k] = f;
                for c in (k + 1)..W {
                    schur[r][c] -= f * schur[k][c];
                }
            }
        }
        if max_pivot / min_pivot > CONDITION_LIMIT {
            return Err(Error::Solver(format!(
                "ill-conditioned border block: pivot ratio {:.3e}",
                max_pivot / min_pivot
            )));
        }
        self.schur = schur;
        self.perm = perm;
        Ok(())
    }

    /// Overwrites the border columns `Q` held in `y` with `P⁻¹ Q`.
    fn y_substitute(&mut self) {
        let m = self.m;
        let (lu, y) = (&self.lu, &mut self.y);
        for i in 1..m {
            let mut acc = y[i];
            for o in 0..W.min(i) {
                let f = lu[i][W - 1 - o];
                let prev = y[i - 1 - o];
                for c in 0..W {
                    acc[c] -= f * prev[c];
                }
            }
            y[i] = acc;
        }
        for i in (0..m).rev() {
            let mut acc = y[i];
            for j in 0..W.min(m - 1 - i) {
                let f = lu[i][W + 1 + j];
                let next = y[i + 1 + j];
                for c in 0..W {
                    acc[c] -= f * next[c];
                }
            }
            let inv = 1.0 / lu[i][W];
            for v in acc.iter_mut() {
                *v *= inv;
            }
            y[i] = acc;
        }
    }

    /// `x = S⁻¹ b`, using `x` as scratch for the leading block.
    fn solve(&self, sys: &[[f64; S]], b: &[f64], x: &mut [f64]) {
        let n = sys.len();
        let m = self.m;
        let lu = &self.lu[..m];
        let (z, tail) = x.split_at_mut(m);
        z.copy_from_slice(&b[..m]);
        for i in 1..W {
            for off in 1..=i {
                z[i] -= lu[i][W - off] * z[i - off];
            }
        }
        for i in W..m {
            let row = &lu[i];
            let prev: &[f64; W] = z[i - W..i].try_into().expect("band window");
            let mut acc = z[i];
            for o in 0..W {
                acc -= row[o] * prev[o];
            }
            z[i] = acc;
        }
        for i in (m - W..m).rev() {
            let row = &lu[i];
            let mut acc = z[i];
            for j in 1..m - i {
                acc -= row[W + j] * z[i + j];
            }
            z[i] = acc / row[W];
        }
        for i in (0..m - W).rev() {
            let row = &lu[i];
            let next: &[f64; W] = z[i + 1..i + 1 + W].try_into().expect("band window");
            let mut acc = z[i];
            for j in 0..W {
                acc -= row[W + 1 + j] * next[j];
            }
            z[i] = acc / row[W];
        }
        let mut border = [0.0; W];
        for (r, v) in border.iter_mut().enumerate() {
            let i = m + r;
            let mut acc = b[i];
            for k in 0..S {
                let col = wrap_index(i, k as isize - W as isize, n);
                if col < m {
                    acc -= sys[i][k] * z[col];
                }
            }
            *v = acc;
        }
        for (k, &p) in self.perm.iter().enumerate() {
            border.swap(k, p);
        }
        for r in 0..W {
            for c in 0..r {
                border[r] -= self.schur[r][c] * border[c];
            }
        }
        for r in (0..W).rev() {
            for c in (r + 1)..W {
                border[r] -= self.schur[r][c] * border[c];
            }
            border[r] /= self.schur[r][r];
        }
        for (zi, yi) in z.iter_mut().zip(&self.y) {
            for c in 0..W {
                *zi -= yi[c] * border[c];
            }
        }
        tail.copy_from_slice(&border);
    }
}

/// Dense LU with partial pivoting.
#[derive(Debug, Default, Clone)]
struct DenseLu {
    n: usize,
    a: Vec<f64>,
    pivots: Vec<usize>,
}

impl DenseLu {
    fn factor<const S: usize>(&mut self, sys: &[[f64; S]]) -> Result<()> {
        let n = sys.len();
        let w = S / 2;
        self.n = n;
        self.a.clear();
        self.a.resize(n * n, 0.0);
        for (i, row) in sys.iter().enumerate() {
            for (k, &v) in row.iter().enumerate() {
                self.a[i * n + wrap_index(i, k as isize - w as isize, n)] += v;
            }
        }
        self.pivots.clear();
        let a = &mut self.a;
        let (mut max_pivot, mut min_pivot) = (0.0f64, f64::INFINITY);
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|r| (r, a[r * n + k].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            self.pivots.push(p);
            if pmax == 0.0 {
                return Err(Error::Solver(format!("singular system: zero pivot column {k}")));
            }
            if p != k {
                for c in 0..n {
                    a.swap(k * n + c, p * n + c);
                }
            }
            let pivot = a[k * n + k];
            max_pivot = max_pivot.max(pivot.abs());
            min_pivot = min_pivot.min(pivot.abs());
            for r in (k + 1)..n {
                let f = a[r * n + k] / pivot;
                a[r * n + k] = f;
                if f != 0.0 {
                    for c in (k + 1)..n {
                        a[r * n + c] -= f * a[k * n + c];
                    }
                }
            }
        }
        if max_pivot / min_pivot > CONDITION_LIMIT {
            return Err(Error::Solver(format!(
                "ill-conditioned system: pivot ratio {:.3e} exceeds {CONDITION_LIMIT:e}",
                max_pivot / min_pivot
            )));
        }
        Ok(())
    }

    fn solve(&self, b: &[f64], x: &mut [f64]) {
        let n = self.n;
        let a = &self.a;
        x.copy_from_slice(b);
        for (k, &p) in self.pivots.iter().enumerate() {
            x.swap(k, p);
        }
        for i in 0..n {
            let mut acc = x[i];
            for k in 0..i {
                acc -= a[i * n + k] * x[k];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for k in (i + 1)..n {
                acc -= a[i * n + k] * x[k];
            }
            x[i] = acc / a[i * n + i];
        }
    }
}

/// Solves `(Id + dt L) u = rhs` with a fresh solver.
pub fn solve_implicit(l: &DriftMatrix, dt: f64, rhs: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; rhs.len()];
    ImplicitSolver::new().solve(l, dt, rhs, &mut out)?;
    Ok(out)
}
