//! Swap operators and the left-jump dynamics they generate: the single-site
//! swap, the sequential sweep with geometric parameters, its continuous-time
//! limit, and the stationary superposition of forward and backward jumps.

use std::collections::HashMap;

use crate::configspace::ParticleConfig;
use crate::error::{Error, Result};
use crate::qhahn_sim::{rng_f64_open, QParams, SimState};
use crate::qkernel::{PhiDist, RateKind, RateTable, Support};
use crate::rng::Rng;

/// Swap operator at index n: particle n is redrawn inside
/// (x_{n+1}, x_n] from phi_{q, nu_{n+1}/nu_n, nu_{n+1}}(. | x_n - x_{n+1} - 1).
/// Requires nu_{n+1} < nu_n strictly; never moves x_n to the right and does
/// not look at x_{n-1}.
pub fn swap_apply(
    x: &ParticleConfig,
    n: usize,
    params: &QParams,
    rng: &mut Rng,
) -> Result<ParticleConfig> {
    swap_apply_impl(x, n, params.q, params.nu(n), params.nu(n + 1), false, rng)
}

/// Swap with the order precondition relaxed to nu_{n+1} <= nu_n; equal
/// parameters give the identity map.
pub fn swap_apply_algebraic(
    x: &ParticleConfig,
    n: usize,
    params: &QParams,
    rng: &mut Rng,
) -> Result<ParticleConfig> {
    swap_apply_impl(x, n, params.q, params.nu(n), params.nu(n + 1), true, rng)
}

fn swap_apply_impl(
    x: &ParticleConfig,
    n: usize,
    q: f64,
    nu_n: f64,
    nu_n1: f64,
    allow_equal: bool,
    rng: &mut Rng,
) -> Result<ParticleConfig> {
    if n < 1 {
        return Err(Error::Validation("swap index must be >= 1".into()));
    }
    if nu_n1 > nu_n || (nu_n1 == nu_n && !allow_equal) {
        return Err(Error::ParameterOrder(format!(
            "swap at n = {n} needs nu_{} = {nu_n1} < nu_{n} = {nu_n}",
            n + 1
        )));
    }
    if nu_n1 == nu_n {
        return Ok(x.clone());
    }
    let gap = x
        .gap(n + 1)
        .expect("n + 1 >= 2, so the gap is finite");
    if gap == 0 {
        return Ok(x.clone());
    }
    let dist = PhiDist::new(q, nu_n1 / nu_n, nu_n1, Support::Finite(gap))?;
    let j = dist.sample_rng(rng);
    let new_pos = x.position(n + 1) + 1 + j as i64;
    x.with_move(n, new_pos)
}

/// Transition row of the swap operator at gap m: entry j is the probability
/// that x_n lands on x_{n+1} + 1 + j.
pub fn swap_kernel_row(
    q: f64,
    nu_n: f64,
    nu_n1: f64,
    gap: usize,
) -> Result<Vec<f64>> {
    if nu_n1 >= nu_n {
        return Err(Error::ParameterOrder(format!(
            "swap kernel needs nu_{{n+1}} = {nu_n1} < nu_n = {nu_n}"
        )));
    }
    let dist = PhiDist::new(q, nu_n1 / nu_n, nu_n1, Support::Finite(gap))?;
    Ok(dist.weights().to_vec())
}

/// One sequential left-jump sweep with geometric parameters: for
/// n = 1, 2, ... particle n moves to x_{n+1} + 1 + j with j drawn from
/// phi_{q, r^n, nu r^n}(. | x_n - x_{n+1} - 1). Each update reads the
/// not-yet-updated x_{n+1}, and the sweep stops at the packed tail.
pub fn backward_discrete_sweep(
    x: &ParticleConfig,
    q: f64,
    nu: f64,
    r: f64,
    rng: &mut Rng,
) -> Result<ParticleConfig> {
    if !(0.0 < r && r < 1.0) {
        return Err(Error::Domain(format!("r = {r} outside (0, 1)")));
    }
    if !(0.0..1.0).contains(&nu) {
        return Err(Error::Domain(format!("nu = {nu} outside [0, 1)")));
    }
    let mut cur = x.clone();
    let mut n = 1;
    let mut rn = r;
    while n <= cur.head().len() {
        let gap = cur.gap(n + 1).expect("finite gap");
        if gap > 0 {
            let dist = PhiDist::new(q, rn, nu * rn, Support::Finite(gap))?;
            let j = dist.sample_rng(rng);
            let new_pos = cur.position(n + 1) + 1 + j as i64;
            cur = cur.with_move(n, new_pos)?;
        }
        n += 1;
        rn *= r;
    }
    Ok(cur)
}

/// `sweeps` sequential sweeps with the parameter nu decaying by r after each
/// one, i.e. the product of sweep operators at nu, r nu, r^2 nu, ....
/// With r = 1 - eps and sweeps = floor(tau/eps) this approximates the
/// continuous left-jump process run from 0 to tau.
pub fn backward_discrete_iterate(
    x: &ParticleConfig,
    q: f64,
    nu0: f64,
    r: f64,
    sweeps: usize,
    rng: &mut Rng,
) -> Result<ParticleConfig> {
    let mut cur = x.clone();
    let mut nu = nu0;
    for _ in 0..sweeps {
        cur = backward_discrete_sweep(&cur, q, nu, r, rng)?;
        nu *= r;
    }
    Ok(cur)
}

/// Time-inhomogeneous left-jump process: the effective nu at clock time s is
/// nu0 * exp(-s).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BackwardSchedule {
    pub nu0: f64,
}

impl BackwardSchedule {
    pub fn new(nu0: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&nu0) {
            return Err(Error::Domain(format!("nu0 = {nu0} outside [0, 1)")));
        }
        Ok(BackwardSchedule { nu0 })
    }

    pub fn nu_at(&self, s: f64) -> f64 {
        self.nu0 * (-s).exp()
    }

    pub fn homogeneous(&self) -> bool {
        self.nu0 == 0.0
    }
}

/// Left-jump rates of particle n at gap g and parameter nu: entry j' is the
/// rate of landing on x_{n+1} + 1 + j', equal to n * psi_bullet(j' | g).
fn backward_table(q: f64, nu: f64, gap: usize) -> Result<RateTable> {
    RateTable::new(RateKind::PsiBullet, q, nu, Support::Finite(gap))
}

/// Total left-jump rate of a configuration at parameter nu:
/// sum over n of n * (total psi_bullet mass at gap_n).
fn backward_total_rate(
    x: &ParticleConfig,
    q: f64,
    nu: f64,
    per_particle: Option<&mut Vec<f64>>,
) -> Result<f64> {
    let mut totals: Vec<f64> = Vec::new();
    for n in 1..=x.head().len() {
        let gap = x.gap(n + 1).expect("finite gap");
        if gap == 0 {
            totals.push(0.0);
        } else {
            let t = backward_table(q, nu, gap)?;
            totals.push(n as f64 * t.total());
        }
    }
    let sum = totals.iter().sum();
    if let Some(out) = per_particle {
        *out = totals;
    }
    Ok(sum)
}

/// Runs the continuous left-jump process from clock time tau0 to tau1.
///
/// Homogeneous schedules (nu0 = 0) are simulated exactly event-by-event:
/// the rates do not depend on the clock. Inhomogeneous schedules are
/// simulated by thinning against a measured piecewise-constant majorant:
/// lookahead windows of length 0.01 * (tau1 - tau0), majorant
/// 1.05 * max of the total rate at the window's endpoints and midpoint,
/// window halved and retried whenever the actual rate exceeds it.
pub fn backward_continuous_run(
    x: &ParticleConfig,
    q: f64,
    schedule: BackwardSchedule,
    tau0: f64,
    tau1: f64,
    rng: &mut Rng,
) -> Result<ParticleConfig> {
    if !(0.0 <= tau0 && tau0 <= tau1) {
        return Err(Error::Validation(format!(
            "need 0 <= tau0 <= tau1, got tau0 = {tau0}, tau1 = {tau1}"
        )));
    }
    if schedule.homogeneous() {
        backward_run_homogeneous(x, q, tau0, tau1, rng)
    } else {
        backward_run_thinned(x, q, schedule, tau0, tau1, rng)
    }
}

fn pick_index(weights: &[f64], total: f64, rng: &mut Rng) -> usize {
    let mut u = rng_f64_open(rng) * total;
    for (k, w) in weights.iter().enumerate() {
        if u < *w {
            return k;
        }
        u -= w;
    }
    weights.len() - 1
}

fn backward_run_homogeneous(
    x: &ParticleConfig,
    q: f64,
    tau0: f64,
    tau1: f64,
    rng: &mut Rng,
) -> Result<ParticleConfig> {
    let mut cur = x.clone();
    let mut s = tau0;
    let mut tables: HashMap<usize, RateTable> = HashMap::new();
    loop {
        let mut totals = Vec::new();
        let total = backward_total_rate(&cur, q, 0.0, Some(&mut totals))?;
        if total <= 0.0 {
            return Ok(cur);
        }
        s += -rng_f64_open(rng).ln() / total;
        if s > tau1 {
            return Ok(cur);
        }
        let n = pick_index(&totals, total, rng) + 1;
        let gap = cur.gap(n + 1).expect("finite gap");
        if !tables.contains_key(&gap) {
            tables.insert(gap, backward_table(q, 0.0, gap)?);
        }
        let jp = tables[&gap].sample(rng);
        let new_pos = cur.position(n + 1) + 1 + jp as i64;
        cur = cur.with_move(n, new_pos)?;
    }
}

fn backward_run_thinned(
    x: &ParticleConfig,
    q: f64,
    schedule: BackwardSchedule,
    tau0: f64,
    tau1: f64,
    rng: &mut Rng,
) -> Result<ParticleConfig> {
    let base_window = 0.01 * (tau1 - tau0);
    if base_window == 0.0 {
        return Ok(x.clone());
    }
    let mut cur = x.clone();
    let mut s = tau0;
    'outer: while s < tau1 {
        let mut window = base_window.min(tau1 - s);
        let mut shrinks = 0;
        loop {
            // measured majorant over [s, s + window] for the current config
            let w_end = s + window;
            let m0 = backward_total_rate(&cur, q, schedule.nu_at(s), None)?;
            let m1 =
                backward_total_rate(&cur, q, schedule.nu_at(s + window / 2.0), None)?;
            let m2 = backward_total_rate(&cur, q, schedule.nu_at(w_end), None)?;
            let majorant = 1.05 * m0.max(m1).max(m2);
            if majorant <= 0.0 {
                // no particle can move; rates only shrink as nu decays
                return Ok(cur);
            }
            let mut t = s;
            loop {
                t += -rng_f64_open(rng).ln() / majorant;
                if t > w_end {
                    s = w_end;
                    continue 'outer;
                }
                let mut totals = Vec::new();
                let actual =
                    backward_total_rate(&cur, q, schedule.nu_at(t), Some(&mut totals))?;
                if actual > majorant {
                    shrinks += 1;
                    if shrinks > 20 {
                        return Err(Error::MajorantViolation {
                            shrinks,
                            detail: format!(
                                "total rate {actual} exceeds measured majorant {majorant} at clock {t}"
                            ),
                        });
                    }
                    window /= 2.0;
                    break; // re-measure over the shrunk window
                }
                if rng_f64_open(rng) * majorant < actual {
                    let n = pick_index(&totals, actual, rng) + 1;
                    let gap = cur.gap(n + 1).expect("finite gap");
                    let table = backward_table(q, schedule.nu_at(t), gap)?;
                    let jp = table.sample(rng);
                    let new_pos = cur.position(n + 1) + 1 + jp as i64;
                    cur = cur.with_move(n, new_pos)?;
                    s = t;
                    continue 'outer; // config changed: new majorant
                }
                // rejected: keep thinning within the same window
            }
        }
    }
    Ok(cur)
}

/// Fixed-parameter superposition process: right jumps by one at rate
/// 1 - q^{gap} (the leader at rate 1) plus left jumps of particle n into
/// x_{n+1} + 1 + j' at rate (n / t_param) * psi_bullet_{q,0}(j' | gap).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StationaryParams {
    pub q: f64,
    pub t_param: f64,
}

impl StationaryParams {
    pub fn new(q: f64, t_param: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&q) {
            return Err(Error::Domain(format!("q = {q} outside [0, 1)")));
        }
        if !(t_param > 0.0) {
            return Err(Error::Domain(format!("t_param = {t_param} must be > 0")));
        }
        Ok(StationaryParams { q, t_param })
    }
}

/// Runs the superposition process until `tau_end`, exact event-driven.
pub fn stationary_run(
    state: &mut SimState,
    sp: StationaryParams,
    tau_end: f64,
    rng: &mut Rng,
) -> Result<()> {
    if tau_end < state.time {
        return Err(Error::Validation(format!(
            "tau_end = {tau_end} is before current time {}",
            state.time
        )));
    }
    let q = sp.q;
    let mut tables: HashMap<usize, RateTable> = HashMap::new();
    loop {
        let cur = &state.config;
        let n_active = cur.head().len() + 1;
        // rate layout: entries 0..n_active are right moves of particles
        // 1..=n_active, entries n_active.. are left totals of 1..=head len
        let mut rates: Vec<f64> = Vec::with_capacity(2 * n_active);
        rates.push(1.0); // leader right rate
        for i in 2..=n_active {
            let gap = cur.gap(i).expect("finite gap");
            rates.push(1.0 - q.powi(gap as i32));
        }
        for n in 1..=cur.head().len() {
            let gap = cur.gap(n + 1).expect("finite gap");
            // total psi_bullet mass at nu = 0 is exactly gap
            rates.push(n as f64 / sp.t_param * gap as f64);
        }
        let total: f64 = rates.iter().sum();
        let dt = -rng_f64_open(rng).ln() / total;
        if state.time + dt > tau_end {
            state.time = tau_end;
            return Ok(());
        }
        state.time += dt;
        let idx = pick_index(&rates, total, rng);
        if idx < n_active {
            let particle = idx + 1;
            let new_pos = cur.position(particle) + 1;
            state.config = cur.with_move(particle, new_pos)?;
        } else {
            let n = idx - n_active + 1;
            let gap = cur.gap(n + 1).expect("finite gap");
            if !tables.contains_key(&gap) {
                tables.insert(gap, backward_table(q, 0.0, gap)?);
            }
            let jp = tables[&gap].sample(rng);
            let new_pos = cur.position(n + 1) + 1 + jp as i64;
            state.config = cur.with_move(n, new_pos)?;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qhahn_sim::NuSeq;
    use crate::qkernel::{phi_weight, psi_bullet_rate};
    use crate::rng::replica_stream;

    fn params_with(nus: Vec<f64>, q: f64) -> QParams {
        QParams::new(
            q,
            NuSeq::Explicit {
                head: nus,
                tail: 0.05,
            },
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn swap_requires_decreasing_nu() {
        let x = ParticleConfig::from_head(vec![3, 0]).unwrap();
        let p = params_with(vec![0.2, 0.4], 0.5);
        let mut rng = replica_stream(21, 0);
        match swap_apply(&x, 1, &p, &mut rng) {
            Err(Error::ParameterOrder(_)) => {}
            other => panic!("expected parameter-order error, got {other:?}"),
        }
    }

    #[test]
    fn swap_equal_nu_is_identity_in_algebraic_mode() {
        let x = ParticleConfig::from_head(vec![5, 1]).unwrap();
        let p = params_with(vec![0.3, 0.3], 0.5);
        let mut rng = replica_stream(22, 0);
        assert!(swap_apply(&x, 1, &p, &mut rng).is_err());
        let y = swap_apply_algebraic(&x, 1, &p, &mut rng).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn swap_adjacent_particles_fixed() {
        // x_n = x_{n+1} + 1: single-point support, x unchanged
        let x = ParticleConfig::from_head(vec![0, -1]).unwrap();
        let p = params_with(vec![0.4, 0.2], 0.5);
        for r in 0..20 {
            let mut rng = replica_stream(23, r);
            assert_eq!(swap_apply(&x, 1, &p, &mut rng).unwrap(), x);
        }
    }

    #[test]
    fn swap_kernel_matches_phi_row() {
        // gap 3, q = 0.5, nu_n = 0.4, nu_{n+1} = 0.2
        let row = swap_kernel_row(0.5, 0.4, 0.2, 3).unwrap();
        assert_eq!(row.len(), 4);
        for (j, &w) in row.iter().enumerate() {
            let direct =
                phi_weight(0.5, 0.2 / 0.4, 0.2, j, Support::Finite(3)).unwrap();
            assert!((w - direct).abs() < 1e-14);
        }
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn swap_never_moves_right_and_keeps_ordering() {
        let x = ParticleConfig::from_head(vec![8, 3, 1]).unwrap();
        let p = params_with(vec![0.5, 0.3, 0.1], 0.4);
        for r in 0..200 {
            let mut rng = replica_stream(24, r);
            for n in 1..=3 {
                let y = swap_apply(&x, n, &p, &mut rng).unwrap();
                assert!(y.check_invariants());
                assert!(y.position(n) <= x.position(n));
                assert!(y.position(n) > x.position(n + 1));
            }
        }
    }

    #[test]
    fn sweep_fixes_step_configuration() {
        let step = ParticleConfig::step();
        let mut rng = replica_stream(25, 0);
        let y = backward_discrete_sweep(&step, 0.5, 0.3, 0.9, &mut rng).unwrap();
        assert_eq!(y, step);
    }

    #[test]
    fn sweep_output_is_valid_and_weakly_left() {
        let x = ParticleConfig::from_head(vec![7, 4, 0, -2]).unwrap();
        for r in 0..100 {
            let mut rng = replica_stream(26, r);
            let y = backward_discrete_sweep(&x, 0.4, 0.2, 0.95, &mut rng).unwrap();
            assert!(y.check_invariants());
            for n in 1..=4 {
                assert!(y.position(n) <= x.position(n));
            }
        }
    }

    #[test]
    fn backward_homogeneous_step_is_absorbing() {
        let step = ParticleConfig::step();
        let mut rng = replica_stream(27, 0);
        let y = backward_continuous_run(
            &step,
            0.5,
            BackwardSchedule::new(0.0).unwrap(),
            0.0,
            5.0,
            &mut rng,
        )
        .unwrap();
        assert_eq!(y, step);
    }

    #[test]
    fn backward_total_rate_is_weighted_gap_sum() {
        // nu = 0: total rate is sum over n of n * gap_{n+1}
        let x = ParticleConfig::from_head(vec![7, 4, 0, -2]).unwrap();
        let total = backward_total_rate(&x, 0.45, 0.0, None).unwrap();
        let expect: f64 = (1..=4)
            .map(|n| n as f64 * x.gap(n + 1).unwrap() as f64)
            .sum();
        assert!((total - expect).abs() < 1e-10, "{total} vs {expect}");
    }

    #[test]
    fn backward_hammersley_rates_at_q_nu_zero() {
        // every admissible left landing site has rate exactly n
        for m in 1..6 {
            for jp in 0..m {
                let r = psi_bullet_rate(0.0, 0.0, jp, m).unwrap();
                assert_eq!(r, 1.0);
            }
        }
    }

    #[test]
    fn backward_thinned_runs_and_moves_left() {
        let x = ParticleConfig::from_head(vec![9, 5, 2]).unwrap();
        let sched = BackwardSchedule::new(0.3).unwrap();
        let mut moved = false;
        for r in 0..50 {
            let mut rng = replica_stream(28, r);
            let y =
                backward_continuous_run(&x, 0.5, sched, 0.0, 1.0, &mut rng).unwrap();
            assert!(y.check_invariants());
            for n in 1..=3 {
                assert!(y.position(n) <= x.position(n));
            }
            moved |= y != x;
        }
        assert!(moved);
    }

    #[test]
    fn stationary_run_preserves_invariants() {
        let sp = StationaryParams::new(0.5, 2.0).unwrap();
        let mut rng = replica_stream(29, 0);
        let mut st = SimState::new(ParticleConfig::from_head(vec![4, 1]).unwrap());
        stationary_run(&mut st, sp, 4.0, &mut rng).unwrap();
        assert_eq!(st.time, 4.0);
        assert!(st.config.check_invariants());
    }

    #[test]
    fn stationary_large_tparam_is_qtasep_like() {
        // with t_param huge, left rates vanish; x_1 + 1 ~ Poisson(tau)
        let sp = StationaryParams::new(0.5, 1e12).unwrap();
        let tau = 2.0;
        let reps = 4000;
        let mut sum = 0.0;
        for r in 0..reps {
            let mut rng = replica_stream(30, r);
            let mut st = SimState::step();
            stationary_run(&mut st, sp, tau, &mut rng).unwrap();
            sum += (st.config.position(1) + 1) as f64;
        }
        let mean = sum / reps as f64;
        assert!((mean - tau).abs() < 4.0 * (tau / reps as f64).sqrt());
    }
}
