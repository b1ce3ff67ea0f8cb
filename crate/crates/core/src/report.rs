//! Verification suite: twelve numbered checks that cross-validate the Monte
//! Carlo simulators, the exact finite-state engines, and the contour
//! quadrature against each other and against closed forms. Used by both the
//! CLI `report all` subcommand and the acceptance integration test.

use crate::boson::{survival_exact, transient_qboson_run, StackState};
use crate::configspace::{duality_h, BosonConfig, ParticleConfig};
use crate::error::{Error, Result};
use crate::exact::{
    birth_death_survival, ctmc_uniformize, explore_ctmc, qhahn_exact_distribution,
    swap_exact_apply, TruncatedDistribution,
};
use crate::moments::{
    beta_moment_quad, plan_q_nested, plan_shift_nested, qhahn_moment_quad, TimeKind,
};
use crate::polymer::{
    beta_log_pair, fpp_fill, fpp_fill_modified, modified_lattice_fill, polymer_fill,
    polymer_swap, zero_temp_pair, BetaParams,
};
use crate::qhahn_sim::{
    qhahn_continuous_run, qhahn_discrete_run, qtasep_run, ContParams, NuSeq, QParams,
    SimState,
};
use crate::qkernel::{PhiDist, Support};
use crate::rng::replica_stream;
use crate::stats::{
    bonferroni, chisq_two_sample, ks_two_sample, moment_ci, EmpiricalDist,
};
use crate::swap::{
    backward_continuous_run, backward_discrete_iterate, stationary_run,
    BackwardSchedule, StationaryParams,
};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::HashMap;
use std::time::Instant;

/// Configuration of a verification run.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ReportConfig {
    pub seed: u64,
    /// Scale Monte Carlo replica counts down tenfold for smoke runs;
    /// SE-based thresholds adapt automatically.
    pub fast: bool,
}

impl ReportConfig {
    pub fn new(seed: u64, fast: bool) -> Self {
        ReportConfig { seed, fast }
    }

    fn reps(&self, base: usize) -> usize {
        if self.fast {
            (base / 10).max(100)
        } else {
            base
        }
    }

    fn stream(&self, criterion: u64, stream: u64) -> u64 {
        self.seed
            .wrapping_mul(1_000_003)
            .wrapping_add(criterion << 24)
            .wrapping_add(stream)
    }
}

/// Outcome of one numbered check.
#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: usize,
    pub name: String,
    pub pass: bool,
    pub seconds: f64,
    pub notes: Vec<String>,
}

pub const CRITERION_NAMES: [&str; 12] = [
    "jump-distribution suite (normalization, symmetry, point mass)",
    "exact swap identity in total variation",
    "duality: MC observable vs exact dual probability",
    "moment quadrature vs exact dual moments and closed form",
    "continuous-time limit of the discrete chain",
    "backward flow rescales (nu, t) multiplicatively",
    "zero-parameter backward flow on TASEP",
    "stationarity of the superposition process",
    "single-particle observable vs birth-death survival",
    "convergence of moments from a non-step start",
    "beta polymer: moments, swap, and shift identities",
    "zero-temperature scaling and FPP shift identity",
];

/// Run one numbered check (1-based).
pub fn run_criterion(id: usize, cfg: &ReportConfig) -> Result<CriterionResult> {
    if !(1..=12).contains(&id) {
        return Err(Error::Validation(format!("criterion id {id} outside 1..=12")));
    }
    let start = Instant::now();
    let mut notes = Vec::new();
    let pass = match id {
        1 => c1_phi_suite(cfg, &mut notes)?,
        2 => c2_swap_exact(cfg, &mut notes)?,
        3 => c3_duality(cfg, &mut notes)?,
        4 => c4_moment_quadrature(cfg, &mut notes)?,
        5 => c5_continuous_limit(cfg, &mut notes)?,
        6 => c6_backward_flow(cfg, &mut notes)?,
        7 => c7_tasep_backward(cfg, &mut notes)?,
        8 => c8_stationarity(cfg, &mut notes)?,
        9 => c9_single_particle(cfg, &mut notes)?,
        10 => c10_convergence(cfg, &mut notes)?,
        11 => c11_beta_polymer(cfg, &mut notes)?,
        12 => c12_zero_temperature(cfg, &mut notes)?,
        _ => unreachable!(),
    };
    Ok(CriterionResult {
        id,
        name: CRITERION_NAMES[id - 1].to_string(),
        pass,
        seconds: start.elapsed().as_secs_f64(),
        notes,
    })
}

/// Run all twelve checks in order.
pub fn run_all(cfg: &ReportConfig) -> Result<Vec<CriterionResult>> {
    (1..=12).map(|id| run_criterion(id, cfg)).collect()
}

// ---------------------------------------------------------------------------
// shared helpers

fn par_replicas<T, F>(reps: usize, seed: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng) -> Result<T> + Sync,
{
    (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replica_stream(seed, rep as u64);
            f(&mut rng)
        })
        .collect()
}

fn positions(cfg: &ParticleConfig, k: usize) -> Vec<i64> {
    (1..=k).map(|n| cfg.position(n)).collect()
}

/// Chi-square compare coordinate marginals of two replica samples; one test
/// per coordinate at the given per-test level.
fn marginals_agree(
    notes: &mut Vec<String>,
    label: &str,
    a: &[Vec<i64>],
    b: &[Vec<i64>],
    alpha_each: f64,
) -> Result<bool> {
    let k = a[0].len();
    let mut ok = true;
    for i in 0..k {
        let da = EmpiricalDist::from_discrete(a.iter().map(|v| v[i]));
        let db = EmpiricalDist::from_discrete(b.iter().map(|v| v[i]));
        let r = chisq_two_sample(&da, &db, 10, alpha_each)?;
        notes.push(format!(
            "{label} x_{}: chi2 = {:.3}, p = {:.3e} -> {}",
            i + 1,
            r.statistic,
            r.p_value.unwrap_or(f64::NAN),
            if r.pass { "ok" } else { "FAIL" }
        ));
        ok &= r.pass;
    }
    Ok(ok)
}

/// Two-sample mean comparison: pass iff the means differ by at most
/// `z` combined standard errors.
fn means_agree(a: &[f64], b: &[f64], z: f64) -> (f64, f64, f64, bool) {
    let stats = |s: &[f64]| {
        let n = s.len() as f64;
        let m = s.iter().sum::<f64>() / n;
        let v = s.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
        (m, v / n)
    };
    let (ma, va) = stats(a);
    let (mb, vb) = stats(b);
    let se = (va + vb).sqrt();
    (ma, mb, se, (ma - mb).abs() <= z * se)
}

fn note_ci(
    notes: &mut Vec<String>,
    label: &str,
    sample: &[f64],
    exact: f64,
    z: f64,
    leak: f64,
) -> bool {
    let r = moment_ci(sample, exact, z, leak);
    notes.push(format!(
        "{label}: mc = {:.6}, exact = {exact:.6}, z = {:.2} -> {}",
        r.statistic,
        r.z_score.unwrap_or(f64::NAN),
        if r.pass { "ok" } else { "FAIL" }
    ));
    r.pass
}

// ---------------------------------------------------------------------------
// criterion 1: jump-distribution suite

fn c1_phi_suite(_cfg: &ReportConfig, notes: &mut Vec<String>) -> Result<bool> {
    let qs = [0.05, 0.3, 0.5, 0.7, 0.9];
    let nus = [0.0, 0.1, 0.3, 0.5, 0.7];
    let fracs = [0.0, 0.2, 0.45, 0.7, 0.9];
    let (mut worst_norm, mut worst_sym) = (0.0f64, 0.0f64);
    let mut points = 0usize;
    let mut point_mass_exact = true;
    for &q in &qs {
        for &nu in &nus {
            for &s in &fracs {
                let mu = nu + (1.0 - nu) * s;
                points += 1;
                for m in [0usize, 1, 5, 20] {
                    let d = PhiDist::new(q, mu, nu, Support::Finite(m))?;
                    let total: f64 = d.weights().iter().sum();
                    worst_norm = worst_norm.max((total - 1.0).abs());
                    for y in [0usize, 2, 7, 20] {
                        let dy = PhiDist::new(q, mu, nu, Support::Finite(y))?;
                        let lhs: f64 = (0..=m)
                            .map(|j| q.powi((j * y) as i32) * d.weight(j))
                            .sum();
                        let rhs: f64 = (0..=y)
                            .map(|k| q.powi((k * m) as i32) * dy.weight(k))
                            .sum();
                        worst_sym = worst_sym.max((lhs - rhs).abs());
                    }
                }
            }
            // mu = nu collapses to the point mass at zero, exactly
            for m in [1usize, 7, 20] {
                let d = PhiDist::new(q, nu, nu, Support::Finite(m))?;
                if d.weight(0) != 1.0 || (1..=m).any(|j| d.weight(j) != 0.0) {
                    point_mass_exact = false;
                }
            }
        }
    }
    notes.push(format!(
        "{points} parameter points; worst |normalization - 1| = {worst_norm:.2e}"
    ));
    notes.push(format!("worst symmetry-identity residual = {worst_sym:.2e}"));
    notes.push(format!(
        "mu = nu point mass exact: {}",
        if point_mass_exact { "ok" } else { "FAIL" }
    ));
    Ok(points >= 125 && worst_norm < 1e-12 && worst_sym < 1e-12 && point_mass_exact)
}

// ---------------------------------------------------------------------------
// criterion 2: exact swap identity

fn c2_swap_exact(_cfg: &ReportConfig, notes: &mut Vec<String>) -> Result<bool> {
    let qs = [0.3, 0.7];
    let nusets: [[f64; 4]; 2] = [[0.5, 0.4, 0.3, 0.25], [0.45, 0.35, 0.28, 0.22]];
    let gamma = 1.3;
    let jmax = 60usize;
    let make = |q: f64, head: &[f64]| -> Result<QParams> {
        QParams::new(
            q,
            NuSeq::Explicit {
                head: head.to_vec(),
                tail: *head.last().unwrap(),
            },
            gamma,
        )
    };
    // enumerate every distinct forward computation: (q, nuset, swap-site, t)
    let mut jobs: Vec<(usize, usize, Option<usize>, usize)> = Vec::new();
    for qi in 0..qs.len() {
        for vi in 0..nusets.len() {
            for t in 1..=3usize {
                jobs.push((qi, vi, None, t));
                for n in 1..=3usize {
                    jobs.push((qi, vi, Some(n), t));
                }
            }
        }
    }
    let dists: HashMap<(usize, usize, Option<usize>, usize), TruncatedDistribution<ParticleConfig>> =
        jobs.par_iter()
            .map(|&(qi, vi, sw, t)| {
                let mut head = nusets[vi].to_vec();
                if let Some(n) = sw {
                    head.swap(n - 1, n);
                }
                let params = make(qs[qi], &head)?;
                Ok(((qi, vi, sw, t), qhahn_exact_distribution(&params, t, jmax)?))
            })
            .collect::<Result<_>>()?;
    let (mut worst_tv, mut worst_leak) = (0.0f64, 0.0f64);
    let mut ok = true;
    for qi in 0..qs.len() {
        for vi in 0..nusets.len() {
            let params = make(qs[qi], &nusets[vi])?;
            for t in 1..=3usize {
                let base = &dists[&(qi, vi, None, t)];
                for n in 1..=3usize {
                    let lhs = swap_exact_apply(base, n, &params)?;
                    let rhs = &dists[&(qi, vi, Some(n), t)];
                    let tv = lhs.tv_distance(rhs);
                    let leak = (lhs.leak() + rhs.leak()) / 2.0;
                    worst_tv = worst_tv.max(tv - leak);
                    worst_leak = worst_leak.max(lhs.leak().max(rhs.leak()));
                    if tv >= 1e-10 + leak || leak >= 1e-8 {
                        ok = false;
                        notes.push(format!(
                            "q = {}, set {vi}, t = {t}, n = {n}: TV = {tv:.3e}, leak = {leak:.3e} -> FAIL",
                            qs[qi]
                        ));
                    }
                }
            }
        }
    }
    notes.push(format!(
        "36 combinations; worst (TV - mean leak) = {worst_tv:.2e}, worst leak = {worst_leak:.2e}"
    ));
    Ok(ok)
}

// ---------------------------------------------------------------------------
// criteria 3 & 4 share a parameter/observable grid

fn grid_params() -> Result<Vec<QParams>> {
    Ok(vec![
        QParams::new(
            0.4,
            NuSeq::Explicit {
                head: vec![0.45, 0.4, 0.35, 0.3],
                tail: 0.3,
            },
            1.8,
        )?,
        QParams::new(
            0.25,
            NuSeq::Explicit {
                head: vec![0.5, 0.42, 0.36, 0.3],
                tail: 0.3,
            },
            1.5,
        )?,
    ])
}

fn grid_nvecs() -> Vec<Vec<u32>> {
    vec![
        vec![1],
        vec![2],
        vec![4],
        vec![2, 1],
        vec![4, 2],
        vec![3, 2, 1],
    ]
}

fn c3_duality(cfg: &ReportConfig, notes: &mut Vec<String>) -> Result<bool> {
    let reps = cfg.reps(100_000);
    let nvecs = grid_nvecs();
    let mut ok = true;
    for (si, params) in grid_params()?.iter().enumerate() {
        let q = params.q;
        for t in [1usize, 2, 4] {
            let seed = cfg.stream(3, (si * 10 + t) as u64);
            let samples: Vec<Vec<f64>> = par_replicas(reps, seed, |rng| {
                let mut st = SimState::step();
                qhahn_discrete_run(&mut st, params, t, rng)?;
                nvecs
                    .iter()
                    .map(|nv| {
                        Ok(duality_h(
                            &st.config,
                            &BosonConfig::from_unsorted(nv.clone())?,
                            q,
                        ))
                    })
                    .collect()
            })?;
            for (k, nv) in nvecs.iter().enumerate() {
                let exact =
                    crate::exact::boson_exact_moment(&BosonConfig::from_unsorted(nv.clone())?, t, params)?;
                let col: Vec<f64> = samples.iter().map(|row| row[k]).collect();
                ok &= note_ci(
                    notes,
                    &format!("set {si}, t = {t}, parts {nv:?}"),
                    &col,
                    exact,
                    4.0,
                    0.0,
                );
            }
        }
    }
    Ok(ok)
}

fn c4_moment_quadrature(_cfg: &ReportConfig, notes: &mut Vec<String>) -> Result<bool> {
    let nvecs = grid_nvecs();
    let mut ok = true;
    let mut worst_rel = 0.0f64;
    for (si, params) in grid_params()?.iter().enumerate() {
        let q = params.q;
        // closed form at ell = 1, n = 1
        let mut worst_closed = 0.0f64;
        let plan1 = plan_q_nested(&[params.nu(1)], q, 1)?;
        for t in 0..=4usize {
            let quad = qhahn_moment_quad(&[1], TimeKind::Discrete(t), params, &plan1)?;
            let closed =
                ((1.0 - params.gamma * params.nu(1)) / (1.0 - params.nu(1))).powi(t as i32);
            worst_closed = worst_closed.max((quad - closed).abs());
        }
        notes.push(format!(
            "set {si}: closed-form residual at ell = 1 over t <= 4: {worst_closed:.2e}"
        ));
        ok &= worst_closed < 1e-10;
        for t in [1usize, 2, 4] {
            for nv in &nvecs {
                let ell = nv.len();
                let poles: Vec<f64> = (1..=nv[0] as usize).map(|j| params.nu(j)).collect();
                let plan = match plan_q_nested(&poles, q, ell) {
                    Ok(p) => p,
                    Err(_) => {
                        notes.push(format!(
                            "set {si}, t = {t}, parts {nv:?}: contour infeasible, skipped"
                        ));
                        continue;
                    }
                };
                // deeply nested contours crowd the pole at the origin, so the
                // trapezoid rule needs more nodes there for the same accuracy
                let plan = if ell >= 3 { plan.with_nodes(768) } else { plan };
                let nvu: Vec<usize> = nv.iter().map(|&n| n as usize).collect();
                let quad = qhahn_moment_quad(&nvu, TimeKind::Discrete(t), params, &plan)?;
                let exact = crate::exact::boson_exact_moment(
                    &BosonConfig::from_unsorted(nv.clone())?,
                    t,
                    params,
                )?;
                let rel = (quad - exact).abs() / exact.abs().max(1e-12);
                worst_rel = worst_rel.max(rel);
                if rel >= 1e-6 {
                    ok = false;
                    notes.push(format!(
                        "set {si}, t = {t}, parts {nv:?}: quad {quad} vs exact {exact} (rel {rel:.2e}) -> FAIL"
                    ));
                }
            }
        }
    }
    notes.push(format!(
        "worst relative quadrature error on the grid: {worst_rel:.2e}"
    ));
    Ok(ok)
}

// ---------------------------------------------------------------------------
// criterion 5: continuous-time limit

fn c5_continuous_limit(cfg: &ReportConfig, notes: &mut Vec<String>) -> Result<bool> {
    let (q, nu, eps) = (0.5f64, 0.3f64, 0.004f64);
    let reps = cfg.reps(100_000);
    let steps = (1.0 / eps).round() as usize;
    let disc_params = QParams::new(q, NuSeq::Homogeneous(nu), 1.0 + eps / nu)?;
    let cont_params = ContParams::new(q, NuSeq::Homogeneous(nu))?;
    let a: Vec<Vec<i64>> = par_replicas(reps, cfg.stream(5, 0), |rng| {
        let mut st = SimState::step();
        qhahn_discrete_run(&mut st, &disc_params, steps, rng)?;
        Ok(positions(&st.config, 3))
    })?;
    let b: Vec<Vec<i64>> = par_replicas(reps, cfg.stream(5, 1), |rng| {
        let mut st = SimState::step();
        qhahn_continuous_run(&mut st, &cont_params, 1.0, rng)?;
        Ok(positions(&st.config, 3))
    })?;
    marginals_agree(notes, "discrete (gamma = 1 + eps/nu) vs continuous", &a, &b, bonferroni(1e-3, 3))
}

// ---------------------------------------------------------------------------
// criterion 6: backward flow

fn c6_backward_flow(cfg: &ReportConfig, notes: &mut Vec<String>) -> Result<bool> {
    let (q, nu, t_param, tau) = (0.5f64, 0.3f64, 2.0f64, 0.5f64);
    let reps = cfg.reps(100_000);
    let cont = ContParams::new(q, NuSeq::Homogeneous(nu))?;
    let cont_scaled = ContParams::new(q, NuSeq::Homogeneous(nu * (-tau).exp()))?;

    // A: evolve to t, then run the backward process for tau
    let a: Vec<Vec<i64>> = par_replicas(reps, cfg.stream(6, 0), |rng| {
        let mut st = SimState::step();
        qhahn_continuous_run(&mut st, &cont, t_param, rng)?;
        let sched = BackwardSchedule::new(nu)?;
        let out = backward_continuous_run(&st.config, q, sched, 0.0, tau, rng)?;
        Ok(positions(&out, 4))
    })?;
    // B: direct target measure with rescaled (nu, t)
    let b: Vec<Vec<i64>> = par_replicas(reps, cfg.stream(6, 1), |rng| {
        let mut st = SimState::step();
        qhahn_continuous_run(&mut st, &cont_scaled, t_param * (-tau).exp(), rng)?;
        Ok(positions(&st.config, 4))
    })?;
    let mut ok = marginals_agree(
        notes,
        "backward(tau = 0.5) vs rescaled measure",
        &a,
        &b,
        bonferroni(1e-3, 8),
    )?;

    // C: discrete sweep construction at r = 0.995 vs the thinning simulator
    let r = 0.995f64;
    let sweeps = (tau / -r.ln()).round() as usize;
    notes.push(format!("sweep construction: r = {r}, {sweeps} sweeps"));
    let c: Vec<Vec<i64>> = par_replicas(reps, cfg.stream(6, 2), |rng| {
        let mut st = SimState::step();
        qhahn_continuous_run(&mut st, &cont, t_param, rng)?;
        let out = backward_discrete_iterate(&st.config, q, nu, r, sweeps, rng)?;
        Ok(positions(&out, 4))
    })?;
    ok &= marginals_agree(
        notes,
        "thinning simulator vs discrete sweeps",
        &a,
        &c,
        bonferroni(1e-3, 8),
    )?;
    Ok(ok)
}

// ---------------------------------------------------------------------------
// criterion 7: zero-parameter backward flow on TASEP

fn c7_tasep_backward(cfg: &ReportConfig, notes: &mut Vec<String>) -> Result<bool> {
    let reps = cfg.reps(100_000);
    let tau = 2.0f64.ln();
    let a: Vec<Vec<i64>> = par_replicas(reps, cfg.stream(7, 0), |rng| {
        let mut st = SimState::step();
        qtasep_run(&mut st, 0.0, 2.0, rng)?;
        let sched = BackwardSchedule::new(0.0)?;
        let out = backward_continuous_run(&st.config, 0.0, sched, 0.0, tau, rng)?;
        Ok(positions(&out, 4))
    })?;
    let b: Vec<Vec<i64>> = par_replicas(reps, cfg.stream(7, 1), |rng| {
        let mut st = SimState::step();
        qtasep_run(&mut st, 0.0, 1.0, rng)?;
        Ok(positions(&st.config, 4))
    })?;
    marginals_agree(
        notes,
        "backward TASEP(2) for ln 2 vs TASEP(1)",
        &a,
        &b,
        bonferroni(1e-3, 4),
    )
}

// ---------------------------------------------------------------------------
// criterion 8: stationarity

fn c8_stationarity(cfg: &ReportConfig, notes: &mut Vec<String>) -> Result<bool> {
    let (q, t_param) = (0.5, 2.0);
    let reps = cfg.reps(100_000);
    let base: Vec<Vec<i64>> = par_replicas(reps, cfg.stream(8, 0), |rng| {
        let mut st = SimState::step();
        qtasep_run(&mut st, q, t_param, rng)?;
        Ok(positions(&st.config, 5))
    })?;
    let mut ok = true;
    for (ti, tau) in [1.0f64, 3.0].into_iter().enumerate() {
        let evolved: Vec<Vec<i64>> = par_replicas(reps, cfg.stream(8, 1 + ti as u64), |rng| {
            let mut st = SimState::step();
            qtasep_run(&mut st, q, t_param, rng)?;
            st.time = 0.0;
            stationary_run(&mut st, StationaryParams::new(q, t_param)?, tau, rng)?;
            Ok(positions(&st.config, 5))
        })?;
        ok &= marginals_agree(
            notes,
            &format!("tau = {tau}"),
            &base,
            &evolved,
            bonferroni(1e-3, 10),
        )?;
    }
    Ok(ok)
}

// ---------------------------------------------------------------------------
// criterion 9: single-particle observable

fn c9_single_particle(cfg: &ReportConfig, notes: &mut Vec<String>) -> Result<bool> {
    let (q, t_param) = (0.5, 2.0);
    let reps = cfg.reps(100_000);
    let sp = StationaryParams::new(q, t_param)?;
    let mut ok = true;
    for (ti, tau) in [1.0f64, 2.0, 5.0].into_iter().enumerate() {
        // observables q^{x_n + n} under the superposition process from step
        let h: Vec<Vec<f64>> = par_replicas(reps, cfg.stream(9, ti as u64), |rng| {
            let mut st = SimState::step();
            stationary_run(&mut st, sp, tau, rng)?;
            Ok((1..=3usize)
                .map(|n| q.powi((st.config.position(n) + n as i64) as i32))
                .collect())
        })?;
        for n in 1..=3usize {
            // matching survival probability of the single dual walker
            let seed = cfg.stream(9, 100 + (ti * 10 + n) as u64);
            let surv: Vec<f64> = par_replicas(reps, seed, |rng| {
                let s = StackState::from_config(&BosonConfig::new(vec![n as u32])?);
                let out = transient_qboson_run(&s, q, t_param, tau, Some(60), rng)?;
                Ok(if out.surviving() { 1.0 } else { 0.0 })
            })?;
            let col: Vec<f64> = h.iter().map(|row| row[n - 1]).collect();
            let (ma, mb, se, pass) = means_agree(&col, &surv, 4.0);
            notes.push(format!(
                "tau = {tau}, n = {n}: observable {ma:.5} vs walker survival {mb:.5} (se {se:.1e}) -> {}",
                if pass { "ok" } else { "FAIL" }
            ));
            ok &= pass;
        }
    }
    // large tau: compare against the exact limiting survival probability
    let tau = 20.0;
    let h: Vec<Vec<f64>> = par_replicas(reps, cfg.stream(9, 500), |rng| {
        let mut st = SimState::step();
        stationary_run(&mut st, sp, tau, rng)?;
        Ok((1..=3usize)
            .map(|n| q.powi((st.config.position(n) + n as i64) as i32))
            .collect())
    })?;
    for n in 1..=3usize {
        let col: Vec<f64> = h.iter().map(|row| row[n - 1]).collect();
        let limit = birth_death_survival(q, t_param, n);
        ok &= note_ci(notes, &format!("tau = 20, n = {n} vs Poisson limit"), &col, limit, 4.0, 0.0);
    }
    Ok(ok)
}

// ---------------------------------------------------------------------------
// criterion 10: convergence from a non-step start

/// Exact E prod q^{x_{m_i}(t) + m_i} for the continuous-time chain with
/// single-step right jumps, via uniformization of its left-moving dual
/// stack chain: survival P(lowest part >= 1 at the horizon).
fn qtasep_dual_survival(parts: &[u32], q: f64, horizon: f64) -> Result<f64> {
    let mut init: Vec<u32> = parts.to_vec();
    init.sort_unstable_by(|a, b| b.cmp(a));
    let moves = |s: &Vec<u32>| {
        let mut out = Vec::new();
        let mut i = 0usize;
        while i < s.len() {
            let k = s[i];
            let mut j = i;
            while j < s.len() && s[j] == k {
                j += 1;
            }
            if k >= 1 {
                let mut t = s.clone();
                t[j - 1] = k - 1; // lower the last entry of the block: stays sorted
                out.push((t, 1.0 - q.powi((j - i) as i32)));
            }
            i = j;
        }
        out
    };
    let (states, ctmc, _) = explore_ctmc(&[init], moves, |_| true, 100_000)?;
    let mut p0 = vec![0.0; states.len()];
    p0[0] = 1.0;
    let (probs, _leak) = ctmc_uniformize(&ctmc, &p0, 0.0, horizon, 1e-12)?;
    Ok(states
        .iter()
        .zip(&probs)
        .filter(|(s, _)| *s.last().unwrap() >= 1)
        .map(|(_, p)| p)
        .sum())
}

fn c10_convergence(cfg: &ReportConfig, notes: &mut Vec<String>) -> Result<bool> {
    let (q, t_param, tau) = (0.5, 2.0, 30.0);
    let reps = cfg.reps(100_000);
    let sp = StationaryParams::new(q, t_param)?;
    let init = ParticleConfig::from_head(vec![5, 3, 0, -2, -4])?;
    let mvecs: Vec<Vec<u32>> = vec![vec![1], vec![2], vec![2, 1], vec![3, 2, 1]];
    let h: Vec<Vec<f64>> = par_replicas(reps, cfg.stream(10, 0), |rng| {
        let mut st = SimState::new(init.clone());
        stationary_run(&mut st, sp, tau, rng)?;
        mvecs
            .iter()
            .map(|mv| {
                Ok(duality_h(
                    &st.config,
                    &BosonConfig::from_unsorted(mv.clone())?,
                    q,
                ))
            })
            .collect()
    })?;
    let mut ok = true;
    for (k, mv) in mvecs.iter().enumerate() {
        let target = qtasep_dual_survival(mv, q, t_param)?;
        let col: Vec<f64> = h.iter().map(|row| row[k]).collect();
        ok &= note_ci(
            notes,
            &format!("parts {mv:?}: MC at tau = {tau} vs dual value"),
            &col,
            target,
            4.0,
            0.0,
        );
        let (s_exact, drift) = survival_exact(
            &BosonConfig::from_unsorted(mv.clone())?,
            q,
            t_param,
            None,
        )?;
        let gap = (s_exact - target).abs();
        notes.push(format!(
            "parts {mv:?}: harmonic solve {s_exact:.8} vs dual value {target:.8} (gap {gap:.2e}, drift {drift:.2e}) -> {}",
            if gap < 1e-4 { "ok" } else { "FAIL" }
        ));
        ok &= gap < 1e-4;
    }
    Ok(ok)
}

// ---------------------------------------------------------------------------
// criterion 11: beta polymer

fn beta_test_params() -> Result<BetaParams> {
    BetaParams::new(vec![1.1, 1.5, 2.2, 2.9, 3.6], 0.7)
}

fn c11_beta_polymer(cfg: &ReportConfig, notes: &mut Vec<String>) -> Result<bool> {
    let p = beta_test_params()?;
    let (nu1, gamma) = (p.nu(1), p.gamma());
    let reps = cfg.reps(100_000);
    let mut ok = true;

    // E Z(t, 1) = ((nu_1 - gamma)/nu_1)^t for t <= 4
    let z1: Vec<Vec<f64>> = par_replicas(reps, cfg.stream(11, 0), |rng| {
        let sheet = polymer_fill(4, 1, &p, rng)?;
        Ok((1..=4usize).map(|t| sheet.value(t, 1)).collect())
    })?;
    for t in 1..=4usize {
        let exact = ((nu1 - gamma) / nu1).powi(t as i32);
        let col: Vec<f64> = z1.iter().map(|r| r[t - 1]).collect();
        ok &= note_ci(notes, &format!("E Z({t},1) closed form"), &col, exact, 4.0, 0.0);
    }

    // quadrature vs MC for k <= 2, t <= 4
    let nvecs: Vec<Vec<usize>> = vec![vec![1], vec![2], vec![3], vec![2, 1], vec![3, 2]];
    let zz: Vec<Vec<f64>> = par_replicas(reps, cfg.stream(11, 1), |rng| {
        let sheet = polymer_fill(4, 3, &p, rng)?;
        let mut row = Vec::new();
        for t in [2usize, 4] {
            for nv in &nvecs {
                row.push(nv.iter().map(|&n| sheet.value(t, n)).product());
            }
        }
        Ok(row)
    })?;
    let nus_slice: Vec<f64> = (1..=3usize).map(|n| p.nu(n)).collect();
    let mut col_idx = 0usize;
    for t in [2usize, 4] {
        for nv in &nvecs {
            let ell = nv.len();
            // wide shift-nested contours need extra nodes once t grows, since
            // the integrand oscillates faster along the outer circle
            let plan = plan_shift_nested(&nus_slice[..nv[0]], ell)?.with_nodes(1024);
            let quad = beta_moment_quad(nv, t, &nus_slice, gamma, &plan)?;
            let col: Vec<f64> = zz.iter().map(|r| r[col_idx]).collect();
            ok &= note_ci(
                notes,
                &format!("E prod Z({t}, {nv:?}) quadrature"),
                &col,
                quad,
                4.0,
                0.0,
            );
            col_idx += 1;
        }
    }

    // swap identity: operator output vs environment with transposed params
    let (t, n) = (3usize, 2usize);
    let swapped = {
        let mut nus: Vec<f64> = (1..=4usize).map(|i| p.nu(i)).collect();
        nus.swap(n - 1, n);
        BetaParams::new(nus, gamma)?
    };
    let a: Vec<f64> = par_replicas(reps, cfg.stream(11, 2), |rng| {
        let sheet = polymer_fill(t, n + 1, &p, rng)?;
        polymer_swap(&sheet, t, n, &p, rng)
    })?;
    let b: Vec<f64> = par_replicas(reps, cfg.stream(11, 3), |rng| {
        Ok(polymer_fill(t, n, &swapped, rng)?.value(t, n))
    })?;
    let r = ks_two_sample(
        &EmpiricalDist::from_continuous(a),
        &EmpiricalDist::from_continuous(b),
        1e-3,
    )?;
    notes.push(format!(
        "swap KS at (t, n) = ({t}, {n}): D = {:.4}, p = {:.3e} -> {}",
        r.statistic,
        r.p_value.unwrap_or(f64::NAN),
        if r.pass { "ok" } else { "FAIL" }
    ));
    ok &= r.pass;

    // shift identity at s in {1, 2}: three lattice points each
    for s in [1usize, 2] {
        let shifted = BetaParams::new((1..=3usize).map(|i| p.nu(i + s)).collect(), gamma)?;
        let a: Vec<Vec<f64>> = par_replicas(reps, cfg.stream(11, 10 + s as u64), |rng| {
            modified_lattice_fill(3, s, 3, &p, rng)
        })?;
        let b: Vec<Vec<f64>> = par_replicas(reps, cfg.stream(11, 20 + s as u64), |rng| {
            Ok(polymer_fill(3, 3, &shifted, rng)?.row(3)[1..].to_vec())
        })?;
        for n in 1..=3usize {
            let r = ks_two_sample(
                &EmpiricalDist::from_continuous(a.iter().map(|v| v[n - 1])),
                &EmpiricalDist::from_continuous(b.iter().map(|v| v[n - 1])),
                bonferroni(1e-3, 3),
            )?;
            notes.push(format!(
                "shift s = {s}, Z(3,{n}): KS D = {:.4}, p = {:.3e} -> {}",
                r.statistic,
                r.p_value.unwrap_or(f64::NAN),
                if r.pass { "ok" } else { "FAIL" }
            ));
            ok &= r.pass;
        }
    }
    Ok(ok)
}

// ---------------------------------------------------------------------------
// criterion 12: zero temperature

fn c12_zero_temperature(cfg: &ReportConfig, notes: &mut Vec<String>) -> Result<bool> {
    let p = beta_test_params()?;
    let reps = cfg.reps(100_000);
    let mut ok = true;

    // scaling of a single edge family at eps = 1e-3
    let (alpha, beta) = (p.nu(1) - p.gamma(), p.gamma());
    let eps = 1e-3;
    let a: Vec<f64> = par_replicas(reps, cfg.stream(12, 0), |rng| {
        let (lb, _) = beta_log_pair(eps * alpha, eps * beta, rng)?;
        Ok(-eps * lb)
    })?;
    let b: Vec<f64> = par_replicas(reps, cfg.stream(12, 1), |rng| {
        Ok(zero_temp_pair(alpha, beta, rng)?.0)
    })?;
    let r = ks_two_sample(
        &EmpiricalDist::from_continuous(a),
        &EmpiricalDist::from_continuous(b),
        1e-3,
    )?;
    notes.push(format!(
        "edge-weight scaling at eps = {eps}: KS D = {:.4}, p = {:.3e} -> {}",
        r.statistic,
        r.p_value.unwrap_or(f64::NAN),
        if r.pass { "ok" } else { "FAIL" }
    ));
    ok &= r.pass;

    // FPP shift identity at s = 1, three lattice points
    let s = 1usize;
    let shifted = BetaParams::new((1..=3usize).map(|i| p.nu(i + s)).collect(), p.gamma())?;
    let a: Vec<Vec<f64>> = par_replicas(reps, cfg.stream(12, 2), |rng| {
        fpp_fill_modified(4, s, 3, &p, rng)
    })?;
    let b: Vec<Vec<f64>> = par_replicas(reps, cfg.stream(12, 3), |rng| {
        Ok(fpp_fill(4, 3, &shifted, rng)?.row(4)[1..].to_vec())
    })?;
    for n in 1..=3usize {
        let r = ks_two_sample(
            &EmpiricalDist::from_continuous(a.iter().map(|v| v[n - 1])),
            &EmpiricalDist::from_continuous(b.iter().map(|v| v[n - 1])),
            bonferroni(1e-3, 3),
        )?;
        notes.push(format!(
            "FPP shift s = 1, F(4,{n}): KS D = {:.4}, p = {:.3e} -> {}",
            r.statistic,
            r.p_value.unwrap_or(f64::NAN),
            if r.pass { "ok" } else { "FAIL" }
        ));
        ok &= r.pass;
    }
    Ok(ok)
}
