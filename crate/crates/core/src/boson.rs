//! Dual zero-range ("stacked particle") dynamics on sites 0, 1, 2, ...:
//! the discrete left-moving chain dual to the forward particle system, the
//! matching dual swap operator, the transient continuous-time chain with an
//! absorbing site 0, and exact survival probabilities for it.

use std::collections::{BTreeMap, HashMap};

use crate::configspace::BosonConfig;
use crate::error::{Error, Result};
use crate::qhahn_sim::{rng_f64_open, QParams};
use crate::qkernel::{PhiDist, RateKind, RateTable, Support};
use crate::rng::Rng;

/// Occupancy representation: site -> particle count, zero-count sites absent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StackState {
    counts: BTreeMap<usize, usize>,
    total: usize,
}

impl StackState {
    pub fn from_config(c: &BosonConfig) -> Self {
        let mut counts = BTreeMap::new();
        for &p in c.parts() {
            *counts.entry(p as usize).or_insert(0) += 1;
        }
        StackState {
            counts,
            total: c.len(),
        }
    }

    pub fn to_config(&self) -> BosonConfig {
        let mut parts: Vec<u32> = Vec::with_capacity(self.total);
        for (&site, &n) in self.counts.iter().rev() {
            parts.extend(std::iter::repeat(site as u32).take(n));
        }
        BosonConfig::new(parts).expect("sorted by construction")
    }

    pub fn count(&self, site: usize) -> usize {
        self.counts.get(&site).copied().unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.total
    }

    /// Occupied sites in increasing order.
    pub fn occupied(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.counts.iter().map(|(&k, &n)| (k, n))
    }

    /// Moves `n` particles from `from` to `to`.
    fn transfer(&mut self, from: usize, to: usize, n: usize) {
        if n == 0 {
            return;
        }
        let have = self.count(from);
        assert!(have >= n, "cannot move {n} particles from site {from} holding {have}");
        if have == n {
            self.counts.remove(&from);
        } else {
            self.counts.insert(from, have - n);
        }
        *self.counts.entry(to).or_insert(0) += n;
    }

    /// True when every particle sits at site 0.
    pub fn absorbed(&self) -> bool {
        self.counts.keys().all(|&k| k == 0)
    }

    /// True when no particle has reached site 0.
    pub fn surviving(&self) -> bool {
        self.count(0) == 0
    }
}

/// One parallel update of the left-moving dual chain: independently at each
/// occupied site k >= 1, j ~ phi_{q, gamma nu_k, nu_k}(. | y_k) particles
/// move to site k - 1. Pre-step occupancies everywhere; site 0 is inert.
pub fn qhahn_boson_step(
    s: &StackState,
    params: &QParams,
    rng: &mut Rng,
) -> Result<StackState> {
    let mut next = s.clone();
    let moves: Vec<(usize, usize)> = s
        .occupied()
        .filter(|&(k, _)| k >= 1)
        .map(|(k, y)| {
            let nu = params.nu(k);
            let dist =
                PhiDist::new(params.q, params.gamma * nu, nu, Support::Finite(y))?;
            Ok((k, dist.sample_rng(rng)))
        })
        .collect::<Result<_>>()?;
    for (k, j) in moves {
        next.transfer(k, k - 1, j);
    }
    Ok(next)
}

/// Dual swap at site k: draws j ~ phi_{q, nu_{k+1}/nu_k, nu_{k+1}}(. | y_k)
/// and moves y_k - j particles from k to k + 1. Requires nu_{k+1} < nu_k.
pub fn dual_swap_apply(
    s: &StackState,
    k: usize,
    params: &QParams,
    rng: &mut Rng,
) -> Result<StackState> {
    dual_swap_impl(s, k, params, false, rng)
}

/// Dual swap with nu_{k+1} = nu_k allowed (identity map in that case).
pub fn dual_swap_apply_algebraic(
    s: &StackState,
    k: usize,
    params: &QParams,
    rng: &mut Rng,
) -> Result<StackState> {
    dual_swap_impl(s, k, params, true, rng)
}

fn dual_swap_impl(
    s: &StackState,
    k: usize,
    params: &QParams,
    allow_equal: bool,
    rng: &mut Rng,
) -> Result<StackState> {
    let (nu_k, nu_k1) = (params.nu(k), params.nu(k + 1));
    if nu_k1 > nu_k || (nu_k1 == nu_k && !allow_equal) {
        return Err(Error::ParameterOrder(format!(
            "dual swap at k = {k} needs nu_{} = {nu_k1} < nu_{k} = {nu_k}",
            k + 1
        )));
    }
    let y = s.count(k);
    if nu_k1 == nu_k || y == 0 {
        return Ok(s.clone());
    }
    let dist = PhiDist::new(params.q, nu_k1 / nu_k, nu_k1, Support::Finite(y))?;
    let j = dist.sample_rng(rng);
    let mut next = s.clone();
    next.transfer(k, k + 1, y - j);
    Ok(next)
}

/// Continuous-time transient chain: at each occupied site k >= 1, one
/// particle moves to k - 1 at rate 1 - q^{y_k}, and y_k - j particles move
/// to k + 1 at rate (k / t_param) * psi_bullet_{q,0}(j | y_k). Site 0
/// absorbs.
///
/// Runs until `tau_end`, until every particle is frozen at 0, or — when
/// `escape_cap` is set — until the lowest occupied site reaches the cap.
/// The cap exists because the up-rate k/t grows with the site index, so
/// surviving trajectories accelerate without bound; stopping at a high cap
/// misclassifies survival with probability at most 1 - S(cap), which is
/// negligible at the default cap.
pub fn transient_qboson_run(
    s: &StackState,
    q: f64,
    t_param: f64,
    tau_end: f64,
    escape_cap: Option<usize>,
    rng: &mut Rng,
) -> Result<StackState> {
    if !(0.0..1.0).contains(&q) {
        return Err(Error::Domain(format!("q = {q} outside [0, 1)")));
    }
    if !(t_param > 0.0) {
        return Err(Error::Domain(format!("t_param = {t_param} must be > 0")));
    }
    let mut cur = s.clone();
    let mut tau = 0.0;
    let mut right_tables: HashMap<usize, RateTable> = HashMap::new();
    loop {
        if let Some(cap) = escape_cap {
            if cur.occupied().next().map_or(false, |(k, _)| k >= cap) {
                return Ok(cur);
            }
        }
        // move layout per occupied site k >= 1: (left move, right move)
        let mut rates: Vec<(usize, bool, f64)> = Vec::new();
        for (k, y) in cur.occupied() {
            if k == 0 {
                continue;
            }
            rates.push((k, true, 1.0 - q.powi(y as i32)));
            // total psi_bullet mass at nu = 0 equals y
            rates.push((k, false, k as f64 / t_param * y as f64));
        }
        let total: f64 = rates.iter().map(|r| r.2).sum();
        if total <= 0.0 {
            return Ok(cur);
        }
        tau += -rng_f64_open(rng).ln() / total;
        if tau > tau_end {
            return Ok(cur);
        }
        let mut u = rng_f64_open(rng) * total;
        let mut chosen = rates.len() - 1;
        for (i, r) in rates.iter().enumerate() {
            if u < r.2 {
                chosen = i;
                break;
            }
            u -= r.2;
        }
        let (k, left, _) = rates[chosen];
        if left {
            cur.transfer(k, k - 1, 1);
        } else {
            let y = cur.count(k);
            if !right_tables.contains_key(&y) {
                right_tables.insert(
                    y,
                    RateTable::new(RateKind::PsiBullet, q, 0.0, Support::Finite(y))?,
                );
            }
            let j = right_tables[&y].sample(rng);
            cur.transfer(k, k + 1, y - j);
        }
    }
}

/// All states m_1 >= m_2 >= ... >= m_ell >= 0 with m_1 <= cap, as sorted
/// part vectors.
fn enumerate_states(ell: usize, cap: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0usize; ell];
    fn rec(pos: usize, maxv: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if pos == cur.len() {
            out.push(cur.clone());
            return;
        }
        for v in 0..=maxv {
            cur[pos] = v;
            rec(pos + 1, v, cur, out);
        }
    }
    rec(0, cap, &mut cur, &mut out);
    out
}

/// Transitions of the transient chain out of state `parts` (sorted
/// decreasing): list of (new sorted state, rate).
fn transient_moves(
    parts: &[usize],
    q: f64,
    t_param: f64,
) -> Result<Vec<(Vec<usize>, f64)>> {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &p in parts {
        *counts.entry(p).or_insert(0) += 1;
    }
    let mut out = Vec::new();
    let rebuild = |counts: &BTreeMap<usize, usize>| -> Vec<usize> {
        let mut v: Vec<usize> = Vec::with_capacity(parts.len());
        for (&site, &n) in counts.iter().rev() {
            v.extend(std::iter::repeat(site).take(n));
        }
        v
    };
    for (&k, &y) in counts.iter() {
        if k == 0 {
            continue;
        }
        // one particle left
        let mut c = counts.clone();
        c.insert(k, y - 1);
        if y == 1 {
            c.remove(&k);
        }
        *c.entry(k - 1).or_insert(0) += 1;
        out.push((rebuild(&c), 1.0 - q.powi(y as i32)));
        // y - j particles right, j = 0..y-1
        for j in 0..y {
            let rate = k as f64 / t_param
                * crate::qkernel::psi_bullet_rate(q, 0.0, j, y)?;
            let mut c = counts.clone();
            if j == 0 {
                c.remove(&k);
            } else {
                c.insert(k, j);
            }
            *c.entry(k + 1).or_insert(0) += y - j;
            out.push((rebuild(&c), rate));
        }
    }
    Ok(out)
}

/// Exact survival probability of the transient chain: the probability,
/// starting from `start`, that no particle is ever absorbed at site 0.
///
/// Solves the harmonicity system on {m : m_1 <= R} with S = 0 whenever
/// m_ell = 0 and S = S_{ell-1}(m_2..m_ell) on the cap m_1 = R (recursively,
/// with the empty-state value 1). Returns (S, |S_R - S_{R+5}|) as an
/// empirical truncation diagnostic.
pub fn survival_exact(
    start: &BosonConfig,
    q: f64,
    t_param: f64,
    r_cap: Option<usize>,
) -> Result<(f64, f64)> {
    let r = r_cap.unwrap_or_else(|| default_r(q, t_param));
    let max_part = start.max_part() as usize;
    if r <= max_part {
        return Err(Error::Validation(format!(
            "truncation cap R = {r} must exceed the largest part {max_part}"
        )));
    }
    let parts: Vec<usize> = start.parts().iter().map(|&p| p as usize).collect();
    let s_r = survival_solve(&parts, q, t_param, r)?;
    let s_r5 = survival_solve(&parts, q, t_param, r + 5)?;
    let drift = (s_r - s_r5).abs();
    if drift > 1e-4 {
        return Err(Error::NonConvergence(format!(
            "survival value moved by {drift} under R -> R+5; increase R = {r}"
        )));
    }
    Ok((s_r5, drift))
}

/// Default truncation cap, measured to put the R-stability drift below 1e-6
/// for the parameter ranges exercised here.
pub fn default_r(q: f64, t_param: f64) -> usize {
    (40.0 * ((1.0 - q) * t_param).max(1.0)).ceil() as usize
}

fn survival_solve(start: &[usize], q: f64, t_param: f64, r: usize) -> Result<f64> {
    let ell = start.len();
    if ell == 0 {
        return Ok(1.0);
    }
    let (index, values) = survival_table(ell, q, t_param, r)?;
    Ok(values[index[&start.to_vec()]])
}

/// Solves the harmonicity system for every state with `ell` particles and
/// m_1 <= r; lower particle counts are solved once and shared by all cap
/// states.
fn survival_table(
    ell: usize,
    q: f64,
    t_param: f64,
    r: usize,
) -> Result<(HashMap<Vec<usize>, usize>, Vec<f64>)> {
    let lower: Option<(HashMap<Vec<usize>, usize>, Vec<f64>)> = if ell > 1 {
        Some(survival_table(ell - 1, q, t_param, r)?)
    } else {
        None
    };
    let states = enumerate_states(ell, r);
    let index: HashMap<Vec<usize>, usize> = states
        .iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), i))
        .collect();
    let n = states.len();
    let mut fixed: Vec<Option<f64>> = vec![None; n];
    for (i, st) in states.iter().enumerate() {
        if st[ell - 1] == 0 {
            fixed[i] = Some(0.0);
        } else if st[0] == r {
            fixed[i] = Some(match &lower {
                Some((li, lv)) => lv[li[&st[1..].to_vec()]],
                None => 1.0,
            });
        }
    }
    let moves: Vec<Option<Vec<(usize, f64)>>> = states
        .iter()
        .enumerate()
        .map(|(i, st)| -> Result<_> {
            if fixed[i].is_some() {
                return Ok(None);
            }
            let mv = transient_moves(st, q, t_param)?
                .into_iter()
                .map(|(to, rate)| (index[&to], rate))
                .collect();
            Ok(Some(mv))
        })
        .collect::<Result<_>>()?;

    let mut values: Vec<f64> = (0..n).map(|i| fixed[i].unwrap_or(0.5)).collect();
    if ell <= 2 {
        // dense linear solve
        let unknowns: Vec<usize> = (0..n).filter(|&i| fixed[i].is_none()).collect();
        let pos: HashMap<usize, usize> = unknowns
            .iter()
            .enumerate()
            .map(|(p, &i)| (i, p))
            .collect();
        let m = unknowns.len();
        let mut a = nalgebra::DMatrix::<f64>::zeros(m, m);
        let mut b = nalgebra::DVector::<f64>::zeros(m);
        for (row, &i) in unknowns.iter().enumerate() {
            let mv = moves[i].as_ref().unwrap();
            let total: f64 = mv.iter().map(|m| m.1).sum();
            a[(row, row)] = -total;
            for &(to, rate) in mv {
                match fixed[to] {
                    Some(v) => b[row] -= rate * v,
                    None => a[(row, pos[&to])] += rate,
                }
            }
        }
        let x = a
            .lu()
            .solve(&b)
            .ok_or_else(|| Error::NonConvergence("singular harmonicity system".into()))?;
        for (p, &i) in unknowns.iter().enumerate() {
            values[i] = x[p];
        }
        return Ok((index, values));
    }

    // Gauss-Seidel; the system is strictly substochastic towards the
    // absorbing boundary, so the sweeps contract
    let mut iter = 0;
    loop {
        let mut delta: f64 = 0.0;
        for i in 0..n {
            if fixed[i].is_some() {
                continue;
            }
            let mv = moves[i].as_ref().unwrap();
            let total: f64 = mv.iter().map(|m| m.1).sum();
            let acc: f64 = mv.iter().map(|&(to, rate)| rate * values[to]).sum();
            let new = acc / total;
            delta = delta.max((new - values[i]).abs());
            values[i] = new;
        }
        iter += 1;
        if delta < 1e-13 {
            break;
        }
        if iter > 200_000 {
            return Err(Error::NonConvergence(format!(
                "harmonicity sweep stalled with residual {delta}"
            )));
        }
    }
    Ok((index, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qhahn_sim::NuSeq;
    use crate::rng::replica_stream;

    fn hom_params(q: f64, nu: f64, gamma: f64) -> QParams {
        QParams::new(q, NuSeq::Homogeneous(nu), gamma).unwrap()
    }

    #[test]
    fn stack_round_trip() {
        let c = BosonConfig::new(vec![4, 2, 2, 0]).unwrap();
        let s = StackState::from_config(&c);
        assert_eq!(s.count(2), 2);
        assert_eq!(s.count(3), 0);
        assert_eq!(s.total(), 4);
        assert_eq!(s.to_config(), c);
        assert!(!s.surviving());
        assert!(!s.absorbed());
    }

    #[test]
    fn boson_step_absorbing_and_frozen_cases() {
        let mut rng = replica_stream(41, 0);
        // all at 0: absorbing
        let s = StackState::from_config(&BosonConfig::new(vec![0, 0]).unwrap());
        let p = hom_params(0.5, 0.3, 2.0);
        assert_eq!(qhahn_boson_step(&s, &p, &mut rng).unwrap(), s);
        // gamma = 1: phi_{q,nu,nu} is a point mass at 0, nothing moves
        let s = StackState::from_config(&BosonConfig::new(vec![5, 3, 3]).unwrap());
        let p1 = hom_params(0.5, 0.3, 1.0);
        for _ in 0..20 {
            assert_eq!(qhahn_boson_step(&s, &p1, &mut rng).unwrap(), s);
        }
    }

    #[test]
    fn boson_single_particle_step_law() {
        // one particle at k: position after one step is k - j, j ~ phi(.|1)
        let q = 0.5;
        let p = hom_params(q, 0.3, 2.0);
        let stay = crate::qkernel::phi_weight(
            q,
            p.gamma * 0.3,
            0.3,
            0,
            Support::Finite(1),
        )
        .unwrap();
        let s = StackState::from_config(&BosonConfig::new(vec![4]).unwrap());
        let reps = 40_000;
        let mut stayed = 0;
        for r in 0..reps {
            let mut rng = replica_stream(42, r);
            let s2 = qhahn_boson_step(&s, &p, &mut rng).unwrap();
            if s2.count(4) == 1 {
                stayed += 1;
            } else {
                assert_eq!(s2.count(3), 1);
            }
        }
        let freq = stayed as f64 / reps as f64;
        let se = (stay * (1.0 - stay) / reps as f64).sqrt();
        assert!((freq - stay).abs() < 4.0 * se);
    }

    #[test]
    fn dual_swap_edge_cases() {
        let p = QParams::new(
            0.5,
            NuSeq::Explicit {
                head: vec![0.4, 0.2],
                tail: 0.1,
            },
            1.0,
        )
        .unwrap();
        let mut rng = replica_stream(43, 0);
        // empty site: identity
        let s = StackState::from_config(&BosonConfig::new(vec![3]).unwrap());
        assert_eq!(dual_swap_apply(&s, 1, &p, &mut rng).unwrap(), s);
        // equal nus: identity only in algebraic mode
        let peq = hom_params(0.5, 0.3, 1.0);
        let s13 = StackState::from_config(&BosonConfig::new(vec![1, 1]).unwrap());
        assert!(dual_swap_apply(&s13, 1, &peq, &mut rng).is_err());
        assert_eq!(
            dual_swap_apply_algebraic(&s13, 1, &peq, &mut rng).unwrap(),
            s13
        );
        // conservation
        let s2 = StackState::from_config(&BosonConfig::new(vec![2, 1, 1]).unwrap());
        for _ in 0..50 {
            let out = dual_swap_apply(&s2, 1, &p, &mut rng).unwrap();
            assert_eq!(out.total(), 3);
            assert_eq!(out.to_config().parts().len(), 3);
        }
    }

    #[test]
    fn transient_all_at_zero_is_absorbing() {
        let s = StackState::from_config(&BosonConfig::new(vec![0, 0, 0]).unwrap());
        let mut rng = replica_stream(44, 0);
        let out = transient_qboson_run(&s, 0.5, 2.0, 100.0, None, &mut rng).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn transient_conserves_particles() {
        let s = StackState::from_config(&BosonConfig::new(vec![3, 2]).unwrap());
        for r in 0..30 {
            let mut rng = replica_stream(45, r);
            let out = transient_qboson_run(&s, 0.4, 1.5, 5.0, Some(100), &mut rng).unwrap();
            assert_eq!(out.total(), 2);
        }
    }

    #[test]
    fn survival_zero_on_boundary() {
        let c = BosonConfig::new(vec![3, 0]).unwrap();
        let (s, _) = survival_exact(&c, 0.5, 2.0, Some(20)).unwrap();
        assert_eq!(s, 0.0);
    }

    #[test]
    fn survival_single_particle_closed_form() {
        // S(n) = P(Poisson((1-q) t) <= n - 1)
        let (q, t) = (0.5, 2.0);
        let lam = (1.0 - q) * t;
        for n in 1..=4u32 {
            let c = BosonConfig::new(vec![n]).unwrap();
            let (s, drift) = survival_exact(&c, q, t, None).unwrap();
            let mut cdf = 0.0;
            let mut term = (-lam).exp();
            for j in 0..n {
                cdf += term;
                term *= lam / (j + 1) as f64;
            }
            assert!(drift < 1e-6, "drift {drift}");
            assert!(
                (s - cdf).abs() < 1e-9,
                "n = {n}: exact {s} vs closed form {cdf}"
            );
        }
    }

    #[test]
    fn survival_two_particles_sane_and_stable() {
        let (q, t) = (0.5, 2.0);
        let c21 = BosonConfig::new(vec![2, 1]).unwrap();
        let (s21, d21) = survival_exact(&c21, q, t, None).unwrap();
        assert!(d21 < 1e-6);
        assert!(s21 > 0.0 && s21 < 1.0);
        // survival grows when particles start higher
        let c32 = BosonConfig::new(vec![3, 2]).unwrap();
        let (s32, _) = survival_exact(&c32, q, t, None).unwrap();
        assert!(s32 > s21);
        // and is below the single-particle value of its lowest particle
        let c1 = BosonConfig::new(vec![1]).unwrap();
        let (s1, _) = survival_exact(&c1, q, t, None).unwrap();
        assert!(s21 < s1);
    }

    #[test]
    fn transient_single_particle_matches_exact_survival() {
        // Monte Carlo survival frequency to a long horizon vs the harmonic
        // solve, single particle at n = 2
        let (q, t_param) = (0.5, 2.0);
        let c = BosonConfig::new(vec![2]).unwrap();
        let (s_exact, _) = survival_exact(&c, q, t_param, None).unwrap();
        let start = StackState::from_config(&c);
        let reps = 20_000;
        let mut alive = 0;
        for r in 0..reps {
            let mut rng = replica_stream(46, r);
            let out =
                transient_qboson_run(&start, q, t_param, 50.0, Some(60), &mut rng).unwrap();
            if out.surviving() {
                alive += 1;
            }
        }
        let freq = alive as f64 / reps as f64;
        let se = (s_exact * (1.0 - s_exact) / reps as f64).sqrt();
        assert!(
            (freq - s_exact).abs() < 4.0 * se + 1e-3,
            "freq {freq} vs exact {s_exact}"
        );
    }
}
