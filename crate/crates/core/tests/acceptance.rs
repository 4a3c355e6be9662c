//! Acceptance suite. Prints one `PASS`/`FAIL` line per criterion and a
//! summary. Set `THINFILM_ACCEPTANCE=1,4,9` to run a subset.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thinfilm::cli::runner::{final_states, two_time_run};
use thinfilm::cli::InitialState;
use thinfilm::diagnostics::{
    entropy_balance_from_partials, exit_time_stats_from, ks_two_sample, l1_bootstrap_se, l1_distance,
    repulsion_tail_fit, shared_joint_histograms, single_point, two_point_spatial, EntropyTracker,
    JOINT_BINS,
};
use thinfilm::integrator::{default_dt, drive_trajectory, SimParams, Termination};
use thinfilm::ldp::{gamma_window, rate_upper_bound, truncated_integrals, LdpAnsatz};
use thinfilm::mobility::{
    cd_ito_divergence_check, cd_ito_divergence_tolerance, gr_edge_derivative, gr_inverse_metric,
    harmonic_edge_terms, verify_gr_identity, Mobility,
};
use thinfilm::sampler::sample_batch;
use thinfilm::{FilmState, Result, Scheme};

const IDENTITY_TOL: f64 = 1e-10;
const METRIC_TOL: f64 = 1e-10;
const ITO_TOL: f64 = 1e-6;
const MASS_TOL: f64 = 1e-9;
const KS_DELTA_X: f64 = 0.1;
/// Order-of-magnitude band around the touch-down anchor 8.2e-4.
const EXIT_ANCHOR: f64 = 8.2e-4;
const ENTROPY_SIGMAS: f64 = 3.0;
const REPULSION_GAMMA: (f64, f64) = (1.7, 2.3);
const REPULSION_C2: f64 = 0.4704;
const REPULSION_C2_BAND: f64 = 0.3;
const LDP_DOUBLING_TOL: f64 = 1e-6;
const L1_SIGMAS: f64 = 2.0;
const TWO_TIME_LAG: f64 = 4e-6;

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = fn() -> Result<Outcome>;

fn within(elapsed: Duration, limit: f64) -> (bool, String) {
    let s = elapsed.as_secs_f64();
    (s < limit, format!("runtime {s:.2}s (limit {limit}s)"))
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_state(r: &mut ChaCha8Rng, n: usize) -> FilmState {
    FilmState::new((0..n).map(|_| r.random_range(0.1..3.0)).collect()).unwrap()
}

fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 50)
}

fn metric_oracle(a: f64, b: f64, m: f64) -> f64 {
    let f = |t: f64| ((1.0 - t) * a + t * b).powf(-m);
    1.0 / simpson(&f, 0.0, 1.0, 1e-14 * a.min(b).powf(-m))
}

fn c1_identity() -> Result<Outcome> {
    let start = Instant::now();
    let mut r = rng(101);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = [4, 16, 64][r.random_range(0..3)];
        let m = r.random_range(2.1..6.0);
        let h = random_state(&mut r, n);
        let rel = verify_gr_identity(&h, m)? / (n as f64 * h.max());
        worst = worst.max(rel);
    }
    let (fast, time) = within(start.elapsed(), 1.0);
    Ok(Outcome {
        pass: worst < IDENTITY_TOL && fast,
        detail: format!("worst relative residual {worst:.2e} over 1000 cases (tol {IDENTITY_TOL:e}); {time}"),
    })
}

fn c2_metric() -> Result<Outcome> {
    let start = Instant::now();
    let mut r = rng(102);
    let mut metric_err = 0.0f64;
    let mut ito_err = 0.0f64;
    for _ in 0..1000 {
        let (a, b) = (r.random_range(0.05..4.0), r.random_range(0.05..4.0));
        let m = r.random_range(2.0..6.0);
        let want = metric_oracle(a, b, m);
        metric_err = metric_err.max((gr_inverse_metric(a, b, m)? - want).abs() / want);
    }
    for _ in 0..1000 {
        let (hl, hr) = (r.random_range(0.2..3.0), r.random_range(0.2..3.0));
        let closed = Mobility::new(3.0)?.edge_terms(hl, hr).1;
        let general = harmonic_edge_terms(hl, hr, 3.0).1;
        let g = |x: f64, y: f64| gr_inverse_metric(x, y, 3.0).unwrap();
        let e = 1e-4;
        let dr = (-g(hl, hr + 2.0 * e) + 8.0 * g(hl, hr + e) - 8.0 * g(hl, hr - e) + g(hl, hr - 2.0 * e)) / (12.0 * e);
        let dl = (-g(hl + 2.0 * e, hr) + 8.0 * g(hl + e, hr) - 8.0 * g(hl - e, hr) + g(hl - 2.0 * e, hr)) / (12.0 * e);
        let fd = dr - dl;
        let scale = dr.abs().max(dl.abs());
        let api = gr_edge_derivative(hl, hr, 3.0)?;
        for (x, y) in [(closed, general), (closed, fd), (general, fd), (api, closed)] {
            ito_err = ito_err.max((x - y).abs() / scale);
        }
    }
    let (fast, time) = within(start.elapsed(), 5.0);
    Ok(Outcome {
        pass: metric_err < METRIC_TOL && ito_err < ITO_TOL && fast,
        detail: format!(
            "metric vs quadrature {metric_err:.2e} (tol {METRIC_TOL:e}); Itô closed/general/FD {ito_err:.2e} (tol {ITO_TOL:e}); {time}"
        ),
    })
}

fn c3_cd_divergence() -> Result<Outcome> {
    let start = Instant::now();
    let mut r = rng(103);
    let mut worst = 0.0f64;
    for n in [4, 8, 16] {
        for m in [2.0, 3.0] {
            for _ in 0..50 {
                let h = random_state(&mut r, n);
                worst = worst.max(cd_ito_divergence_check(&h, m)? / cd_ito_divergence_tolerance(&h, m)?);
            }
        }
    }
    let (fast, time) = within(start.elapsed(), 5.0);
    Ok(Outcome {
        pass: worst <= 1.0 && fast,
        detail: format!("worst residual/tolerance {worst:.2e} over 300 states; {time}"),
    })
}

fn c4_mass() -> Result<Outcome> {
    let start = Instant::now();
    let mut parts = Vec::new();
    let mut pass = true;
    for scheme in [Scheme::GruenRumpf, Scheme::CentralDifference] {
        let mut p = SimParams::new(32, 3.0, 1.0, 0.0, scheme, 104);
        p.t_final = 1e4 * p.dt;
        let mut worst = 0.0f64;
        let (term, steps) = drive_trajectory(&p, &FilmState::flat(32)?, 0, |_, _, h| {
            worst = worst.max((h.iter().sum::<f64>() / 32.0 - 1.0).abs());
        })?;
        pass &= worst < MASS_TOL;
        parts.push(format!("{scheme} max drift {worst:.2e} over {steps} steps ({term:?})"));
    }
    let (fast, time) = within(start.elapsed(), 60.0);
    Ok(Outcome {
        pass: pass && fast,
        detail: format!("{}; tol {MASS_TOL:e}; {time}", parts.join(", ")),
    })
}

fn c5_invariance() -> Result<Outcome> {
    let (n, count) = (32, 2000);
    let reference = sample_batch(n, 1.0, count, 505)?;
    let ref_single = single_point(&reference.samples);
    let ref_two = two_point_spatial(&reference.samples, KS_DELTA_X)?;
    let mut pass = true;
    let mut parts = Vec::new();
    for scheme in [Scheme::GruenRumpf, Scheme::CentralDifference] {
        let p = SimParams::new(n, 3.0, 1.0, 1e-3, scheme, 506);
        let results = final_states(&p, InitialState::Flat, count)?;
        let kept: Vec<FilmState> = results
            .into_iter()
            .filter(|(_, t, _)| *t == Termination::Completed)
            .map(|(_, _, h)| h)
            .collect();
        let discarded = count - kept.len();
        if scheme == Scheme::GruenRumpf {
            pass &= discarded == 0;
        }
        let single = ks_two_sample(&single_point(&kept), &ref_single)?;
        let two = ks_two_sample(&two_point_spatial(&kept, KS_DELTA_X)?, &ref_two)?;
        pass &= single.passes() && two.passes();
        parts.push(format!(
            "{scheme}: single D={:.4} two-point D={:.4} (crit {:.4}), discarded {discarded}/{count} ({:.1}%)",
            single.statistic,
            two.statistic,
            single.critical,
            100.0 * discarded as f64 / count as f64
        ));
    }
    Ok(Outcome { pass, detail: parts.join("; ") })
}

fn c6_positivity() -> Result<Outcome> {
    let mut pass = true;
    let mut parts = Vec::new();
    let run = |n: usize, m: f64, beta: f64, dt: Option<f64>, scheme: Scheme, count: usize, seed: u64| -> Result<_> {
        let mut p = SimParams::new(n, m, beta, 1e-3, scheme, seed);
        if let Some(dt) = dt {
            p.dt = dt;
        }
        let results = final_states(&p, InitialState::Flat, count)?;
        Ok(exit_time_stats_from(results.iter().map(|(_, t, _)| t)))
    };
    let gr = run(16, 3.0, 1.0, None, Scheme::GruenRumpf, 100, 601)?;
    pass &= gr.touched == 0 && gr.solver_failures == 0;
    parts.push(format!("GR m=3 N=16: {}/{} touch-downs, {} solver failures", gr.touched, gr.total, gr.solver_failures));
    let cd = run(16, 3.0, 1.0, None, Scheme::CentralDifference, 100, 601)?;
    let mean = cd.mean.unwrap_or(f64::NAN);
    pass &= cd.touched > 0 && mean >= EXIT_ANCHOR / 10.0 && mean <= EXIT_ANCHOR * 10.0;
    parts.push(format!(
        "CD m=3 N=16: fraction {:.2}, mean exit {mean:.3e} ± {:.1e}",
        cd.fraction(),
        cd.std_error.unwrap_or(f64::NAN)
    ));
    // N = 2 at β = 0.02: the touch-down costs energy 8β, so the boundary is
    // reachable within the horizon for m < 3.
    let two = run(2, 2.0, 0.02, Some(1e-8), Scheme::GruenRumpf, 200, 602)?;
    let three = run(2, 3.0, 0.02, Some(1e-8), Scheme::GruenRumpf, 200, 602)?;
    pass &= two.touched > 0 && three.touched == 0 && three.solver_failures == 0;
    parts.push(format!(
        "N=2 β=0.02: m=2 {}/{} touch-downs, m=3 {}/{}",
        two.touched, two.total, three.touched, three.total
    ));
    Ok(Outcome { pass, detail: parts.join("; ") })
}

fn c7_entropy() -> Result<Outcome> {
    let mut p = SimParams::new(8, 3.0, 1.0, 1e-6, Scheme::GruenRumpf, 707);
    p.dt = 1e-10;
    let partials = (0..1000u64)
        .into_par_iter()
        .map(|j| {
            let h0 = FilmState::flat(8)?;
            let mut tracker = EntropyTracker::new(3.0, 8, 1)?;
            let mut failure = None;
            let mut last = (0.0, h0.values().to_vec());
            let (term, _) = drive_trajectory(&p, &h0, j, |k, t, h| {
                if let Err(e) = tracker.observe(k, t, h) {
                    failure.get_or_insert(e);
                }
                last = (t, h.to_vec());
            })?;
            if let Some(e) = failure {
                return Err(e);
            }
            if term != Termination::Completed {
                return Err(thinfilm::Error::InvalidArgument(format!("trajectory {j} ended with {term:?}")));
            }
            tracker.finish(last.0, &last.1)
        })
        .collect::<Result<Vec<_>>>()?;
    let r = entropy_balance_from_partials(&partials, 8, 1.0)?;
    let diff = r.lhs - r.rhs;
    let want_rhs = 0.5 + 2.0 * 512.0 * r.t;
    Ok(Outcome {
        pass: diff.abs() <= ENTROPY_SIGMAS * r.combined_se && (r.rhs - want_rhs).abs() < 1e-12,
        detail: format!(
            "lhs {:.8} rhs {:.8} diff {diff:.2e}, {:.2} combined SE (SE {:.2e}, trapezoid bias {:.1e})",
            r.lhs,
            r.rhs,
            diff.abs() / r.combined_se,
            r.combined_se,
            r.trapezoid_bias
        ),
    })
}

fn c8_repulsion() -> Result<Outcome> {
    let start = Instant::now();
    let batch = sample_batch(512, 1.0, 20_000, 808)?;
    let values = single_point(&batch.samples);
    let fit = repulsion_tail_fit(&values, 0.5)?;
    let (lo, hi) = REPULSION_GAMMA;
    let c2_ok = (fit.c2 / REPULSION_C2 - 1.0).abs() <= REPULSION_C2_BAND;
    let gamma_ok = fit.gamma >= lo && fit.gamma <= hi;
    // Diagnostic only: all nodes pooled, narrower window.
    let pooled: Vec<f64> = batch.samples.iter().flat_map(|s| s.values().iter().copied()).collect();
    let narrow = repulsion_tail_fit(&pooled, 0.2)?;
    let (fast, time) = within(start.elapsed(), 300.0);
    Ok(Outcome {
        pass: gamma_ok && c2_ok && fast,
        detail: format!(
            "node 0, h_max 0.5: gamma {:.3} (band [{lo}, {hi}]), c2 {:.4} (band {:.4}..{:.4}); \
             pooled nodes, h_max 0.2: gamma {:.3}, c2 {:.4}; {time}",
            fit.gamma,
            fit.c2,
            REPULSION_C2 * (1.0 - REPULSION_C2_BAND),
            REPULSION_C2 * (1.0 + REPULSION_C2_BAND),
            narrow.gamma,
            narrow.c2
        ),
    })
}

fn c9_ldp() -> Result<Outcome> {
    let start = Instant::now();
    let mut mismatches = Vec::new();
    for k in 1..=900 {
        let m = 1.0 + 0.01 * k as f64;
        let empty = gamma_window(m)?.is_none();
        if empty != (m >= 8.0 - 1e-9) {
            mismatches.push(m);
        }
    }
    let a = LdpAnsatz { m: 3.0, gamma: 0.8, eta: 0.75, t: 1.0 };
    let b = rate_upper_bound(&a)?;
    let (j1, j2, t1, t2) = truncated_integrals(&a, 2.0 * b.radius)?;
    let doubled = b.time_factor1 * (j1 + t1) + b.time_factor2 * (j2 + t2);
    let rel = ((doubled - b.bound) / b.bound).abs();
    let (fast, time) = within(start.elapsed(), 10.0);
    Ok(Outcome {
        pass: mismatches.is_empty() && b.bound.is_finite() && b.bound > 0.0 && rel < LDP_DOUBLING_TOL && fast,
        detail: format!(
            "window mismatches {:?}; bound {:.10e} at X={:e} (tails converged: {}), doubling change {rel:.1e} (tol {LDP_DOUBLING_TOL:e}); {time}",
            mismatches, b.bound, b.radius, b.tail_converged
        ),
    })
}

fn c10_two_time() -> Result<Outcome> {
    let mut rows = Vec::new();
    for n in [16, 32, 64] {
        let gr = SimParams::new(n, 3.0, 1.0, TWO_TIME_LAG, Scheme::GruenRumpf, 1010);
        let cd = SimParams { scheme: Scheme::CentralDifference, ..gr.clone() };
        let (gp, gd) = two_time_run(&gr, 2000)?;
        let (cp, cdisc) = two_time_run(&cd, 2000)?;
        let (hg, hc) = shared_joint_histograms(&gp, &cp, JOINT_BINS)?;
        let l1 = l1_distance(&hg, &hc)?;
        let sd = l1_bootstrap_se(&gp, &cp, JOINT_BINS, 200, 1010)?;
        rows.push((n, l1, sd, gd, cdisc));
    }
    let mut pass = true;
    for w in rows.windows(2) {
        let margin = L1_SIGMAS * (w[0].2 * w[0].2 + w[1].2 * w[1].2).sqrt();
        pass &= w[1].1 <= w[0].1 + margin;
    }
    let detail = rows
        .iter()
        .map(|(n, l1, sd, gd, cd)| format!("N={n}: l1 {l1:.4} ± {sd:.4} (discarded gr {gd}, cd {cd})"))
        .collect::<Vec<_>>()
        .join("; ");
    Ok(Outcome {
        pass,
        detail: format!("{detail}; dt=1e-10·(50/N)⁴, lag {TWO_TIME_LAG:e}, margin {L1_SIGMAS}σ"),
    })
}

fn c11_determinism() -> Result<Outcome> {
    let runs: [(&str, &[&str]); 9] = [
        ("simulate", &["--n", "8", "--mobility-exponent", "3", "--beta", "1", "--dt", "1e-8", "--t-final", "1e-6", "--scheme", "central-difference", "--seed", "1", "--samples", "1", "--record-stride", "10"]),
        ("sample-invariant", &["--n", "32", "--beta", "1", "--samples", "500", "--seed", "2"]),
        ("invariance", &["--n", "8", "--mobility-exponent", "3", "--beta", "1", "--dt", "1e-8", "--t-final", "2e-6", "--samples", "100", "--seed", "3"]),
        ("exit-time", &["--n", "8", "--mobility-exponent", "3", "--beta", "1", "--dt", "1e-8", "--t-final", "1e-5", "--scheme", "central-difference", "--samples", "50", "--seed", "4"]),
        ("repulsion", &["--n", "64", "--beta", "1", "--samples", "2000", "--seed", "5"]),
        ("entropy-balance", &["--n", "8", "--mobility-exponent", "3", "--beta", "1", "--dt", "1e-9", "--t-final", "1e-7", "--scheme", "gruen-rumpf", "--samples", "50", "--seed", "6"]),
        ("two-time", &["--n", "8", "--mobility-exponent", "3", "--beta", "1", "--dt", "1e-8", "--delta-t", "1e-6", "--samples", "100", "--seed", "7"]),
        ("ldp-feasibility", &["--m-min", "1.1", "--m-max", "10", "--m-step", "0.1"]),
        ("ldp-rate", &["--mobility-exponent", "3", "--gamma", "0.8", "--eta", "0.75", "--t-final", "1"]),
    ];
    let root = std::env::temp_dir().join(format!("thinfilm-acceptance-{}", std::process::id()));
    let mut failures = Vec::new();
    let mut files = 0;
    for (kind, args) in runs {
        let a = run_cli(&root.join(format!("{kind}-1a")), kind, args, "1")?;
        let b = run_cli(&root.join(format!("{kind}-1b")), kind, args, "1")?;
        let c = run_cli(&root.join(format!("{kind}-4")), kind, args, "4")?;
        files += a.len();
        if a.is_empty() || a != b || a != c {
            failures.push(kind);
        }
    }
    let _ = std::fs::remove_dir_all(&root);
    Ok(Outcome {
        pass: failures.is_empty(),
        detail: format!("9 commands, {files} artifacts, reruns and threads {{1, 4}}; differing: {failures:?}"),
    })
}

fn run_cli(dir: &Path, kind: &str, args: &[&str], threads: &str) -> Result<BTreeMap<String, Vec<u8>>> {
    let out = Command::new(env!("CARGO_BIN_EXE_thinfilm"))
        .arg(kind)
        .args(args)
        .args(["--threads", threads, "--out"])
        .arg(dir)
        .output()
        .map_err(|source| thinfilm::Error::Io { path: dir.to_path_buf(), source })?;
    if !out.status.success() {
        return Err(thinfilm::Error::InvalidArgument(format!(
            "{kind} failed: {}",
            String::from_utf8_lossy(&out.stderr).trim()
        )));
    }
    let mut files = BTreeMap::new();
    let entries = std::fs::read_dir(dir).map_err(|source| thinfilm::Error::Io { path: dir.to_path_buf(), source })?;
    for entry in entries.flatten() {
        let path = entry.path();
        let bytes = std::fs::read(&path).map_err(|source| thinfilm::Error::Io { path: path.clone(), source })?;
        files.insert(entry.file_name().to_string_lossy().into_owned(), bytes);
    }
    Ok(files)
}

fn main() {
    let criteria: [(u32, &str, Criterion); 11] = [
        (1, "metric identity", c1_identity),
        (2, "metric and Itô oracles", c2_metric),
        (3, "central-difference Itô term", c3_cd_divergence),
        (4, "mass conservation", c4_mass),
        (5, "invariance", c5_invariance),
        (6, "positivity dichotomy", c6_positivity),
        (7, "entropy balance", c7_entropy),
        (8, "entropic repulsion", c8_repulsion),
        (9, "LDP windows and bound", c9_ldp),
        (10, "two-scheme convergence", c10_two_time),
        (11, "determinism", c11_determinism),
    ];
    let selected: Option<Vec<u32>> = std::env::var("THINFILM_ACCEPTANCE")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    println!("default dt at N=32: {:e}", default_dt(32));
    let (mut passed, mut failed) = (0, 0);
    for (id, name, f) in criteria {
        if selected.as_ref().is_some_and(|s| !s.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let outcome = f().unwrap_or_else(|e| Outcome { pass: false, detail: format!("error: {e}") });
        let secs = start.elapsed().as_secs_f64();
        let tag = if outcome.pass { "PASS" } else { "FAIL" };
        println!("{tag} criterion {id:>2} ({name}): {} [{secs:.1}s]", outcome.detail);
        if outcome.pass {
            passed += 1;
        } else {
            failed += 1;
        }
    }
    println!("acceptance: {passed} passed, {failed} failed");
}
