//! Exact finite-state engines: forward recursion for the discrete-time
//! particle chain with explicit truncation-leak accounting, exact moments
//! via the dual left-moving chain, CTMC uniformization on finite spaces,
//! and closed-form oracles used to pin down the stochastic code.

use std::collections::HashMap;
use std::hash::Hash;

use crate::configspace::{duality_h, BosonConfig, ParticleConfig};
use crate::error::{Error, Result};
use crate::qhahn_sim::QParams;
use crate::qkernel::{PhiDist, Support};

/// A sub-probability distribution on a finite set of states plus an upper
/// bound `leak` on the mass lost to truncation: masses sum to >= 1 - leak.
#[derive(Debug, Clone)]
pub struct TruncatedDistribution<S: Eq + Hash + Clone> {
    masses: HashMap<S, f64>,
    leak: f64,
}

impl<S: Eq + Hash + Clone> TruncatedDistribution<S> {
    pub fn point_mass(s: S) -> Self {
        let mut masses = HashMap::new();
        masses.insert(s, 1.0);
        TruncatedDistribution { masses, leak: 0.0 }
    }

    pub fn empty() -> Self {
        TruncatedDistribution {
            masses: HashMap::new(),
            leak: 0.0,
        }
    }

    pub fn add(&mut self, s: S, mass: f64) {
        debug_assert!(mass >= 0.0);
        *self.masses.entry(s).or_insert(0.0) += mass;
    }

    pub fn add_leak(&mut self, mass: f64) {
        self.leak += mass;
    }

    pub fn mass(&self, s: &S) -> f64 {
        self.masses.get(s).copied().unwrap_or(0.0)
    }

    pub fn leak(&self) -> f64 {
        self.leak
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.values().sum()
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&S, f64)> {
        self.masses.iter().map(|(s, &m)| (s, m))
    }

    /// Expectation of `f` against the stored mass; off by at most
    /// `leak * sup|f|`.
    pub fn expectation(&self, f: impl Fn(&S) -> f64) -> f64 {
        self.masses.iter().map(|(s, &m)| m * f(s)).sum()
    }

    /// Total-variation distance between the stored masses. The honest bound
    /// on the true TV distance is this value plus (leak_a + leak_b) / 2.
    pub fn tv_distance(&self, other: &Self) -> f64 {
        let mut d = 0.0;
        for (s, m) in self.iter() {
            d += (m - other.mass(s)).abs();
        }
        for (s, m) in other.iter() {
            if !self.masses.contains_key(s) {
                d += m;
            }
        }
        d / 2.0
    }

    /// Marginal distribution of a statistic of the state.
    pub fn marginal<T: Eq + Hash + Clone>(
        &self,
        f: impl Fn(&S) -> T,
    ) -> TruncatedDistribution<T> {
        let mut out = TruncatedDistribution::empty();
        out.leak = self.leak;
        for (s, m) in self.iter() {
            out.add(f(s), m);
        }
        out
    }

    /// True when every mass is nonnegative and masses + leak cover 1.
    pub fn check_invariants(&self) -> bool {
        self.masses.values().all(|&m| m >= 0.0)
            && self.total_mass() + self.leak >= 1.0 - 1e-12
            && self.total_mass() <= 1.0 + 1e-12
    }
}

/// Masses below this floor are swept into the leak during exact forward
/// recursions; keeps reachable sets desk-scale without hiding the error.
const MASS_FLOOR: f64 = 1e-18;

/// Exact distribution of the discrete-time chain at time `t`, started from
/// step. The leader's unbounded jump is capped at `jmax`; the capped tail
/// mass (and any mass pruned below the floor) is reported as leak.
pub fn qhahn_exact_distribution(
    params: &QParams,
    t: usize,
    jmax: usize,
) -> Result<TruncatedDistribution<ParticleConfig>> {
    let mut dist = TruncatedDistribution::point_mass(ParticleConfig::step());
    let phi_inf = PhiDist::new(
        params.q,
        params.gamma * params.nu(1),
        params.nu(1),
        Support::Infinite,
    )?;
    // leader weights 0..=jmax and the exactly-capped tail
    let inf_weights: Vec<f64> = (0..=jmax).map(|j| phi_inf.weight(j)).collect();
    let inf_tail = (1.0 - inf_weights.iter().sum::<f64>()).max(0.0);

    let mut phi_cache: HashMap<(usize, usize), PhiDist> = HashMap::new();
    for _ in 0..t {
        let mut next = TruncatedDistribution::empty();
        next.add_leak(dist.leak());
        for (cfg, mass) in dist.iter() {
            next.add_leak(mass * inf_tail);
            let n_active = cfg.head().len() + 1;
            let positions: Vec<i64> =
                (1..=n_active).map(|i| cfg.position(i)).collect();
            // DFS over jump vectors with branch pruning into the leak
            let mut stack: Vec<(usize, Vec<i64>, f64)> =
                vec![(0, Vec::new(), mass)];
            while let Some((i, newpos, w)) = stack.pop() {
                if i == n_active {
                    next.add(ParticleConfig::from_head(newpos)?, w);
                    continue;
                }
                if i == 0 {
                    for (j, &wj) in inf_weights.iter().enumerate() {
                        let ww = w * wj;
                        if ww < MASS_FLOOR {
                            next.add_leak(ww);
                            continue;
                        }
                        stack.push((1, vec![positions[0] + j as i64], ww));
                    }
                } else {
                    let gap = (positions[i - 1] - positions[i] - 1) as usize;
                    let key = (i + 1, gap);
                    if !phi_cache.contains_key(&key) {
                        let nu = params.nu(i + 1);
                        phi_cache.insert(
                            key,
                            PhiDist::new(
                                params.q,
                                params.gamma * nu,
                                nu,
                                Support::Finite(gap),
                            )?,
                        );
                    }
                    let weights = phi_cache[&key].weights();
                    for (j, &wj) in weights.iter().enumerate() {
                        let ww = w * wj;
                        if ww < MASS_FLOOR {
                            next.add_leak(ww);
                            continue;
                        }
                        let mut np = newpos.clone();
                        np.push(positions[i] + j as i64);
                        stack.push((i + 1, np, ww));
                    }
                }
            }
        }
        dist = next;
    }
    Ok(dist)
}

/// Applies the swap operator at index `n` exactly to a distribution:
/// x_n is redistributed over (x_{n+1}, x_n] by the phi row at the gap.
pub fn swap_exact_apply(
    dist: &TruncatedDistribution<ParticleConfig>,
    n: usize,
    params: &QParams,
) -> Result<TruncatedDistribution<ParticleConfig>> {
    let (nu_n, nu_n1) = (params.nu(n), params.nu(n + 1));
    if nu_n1 >= nu_n {
        return Err(Error::ParameterOrder(format!(
            "exact swap needs nu_{} = {nu_n1} < nu_{n} = {nu_n}",
            n + 1
        )));
    }
    let mut out = TruncatedDistribution::empty();
    out.add_leak(dist.leak());
    let mut rows: HashMap<usize, PhiDist> = HashMap::new();
    for (cfg, mass) in dist.iter() {
        let gap = cfg.gap(n + 1).expect("n + 1 >= 2");
        if gap == 0 {
            out.add(cfg.clone(), mass);
            continue;
        }
        if !rows.contains_key(&gap) {
            rows.insert(
                gap,
                PhiDist::new(params.q, nu_n1 / nu_n, nu_n1, Support::Finite(gap))?,
            );
        }
        let base = cfg.position(n + 1) + 1;
        for (j, &w) in rows[&gap].weights().iter().enumerate() {
            out.add(cfg.with_move(n, base + j as i64)?, mass * w);
        }
    }
    Ok(out)
}

/// Applies one sequential left-jump sweep with geometric parameters exactly
/// (same law as the sampling version in `swap`).
pub fn sweep_exact_apply(
    dist: &TruncatedDistribution<ParticleConfig>,
    q: f64,
    nu: f64,
    r: f64,
) -> Result<TruncatedDistribution<ParticleConfig>> {
    let mut out = TruncatedDistribution::empty();
    out.add_leak(dist.leak());
    for (cfg, mass) in dist.iter() {
        // expand the sweep state-by-state: (partially swept config, weight)
        let mut frontier: Vec<(ParticleConfig, f64)> = vec![(cfg.clone(), mass)];
        let mut n = 1;
        loop {
            let depth = frontier.iter().map(|(c, _)| c.head().len()).max();
            match depth {
                Some(d) if n <= d => {}
                _ => break,
            }
            let rn = r.powi(n as i32);
            let mut next_frontier = Vec::new();
            for (c, w) in frontier {
                let gap = c.gap(n + 1).unwrap_or(0);
                if gap == 0 {
                    next_frontier.push((c, w));
                    continue;
                }
                let row = PhiDist::new(q, rn, nu * rn, Support::Finite(gap))?;
                let base = c.position(n + 1) + 1;
                for (j, &wj) in row.weights().iter().enumerate() {
                    next_frontier.push((c.with_move(n, base + j as i64)?, w * wj));
                }
            }
            frontier = next_frontier;
            n += 1;
        }
        for (c, w) in frontier {
            out.add(c, w);
        }
    }
    Ok(out)
}

/// q-moment E prod_j q^{x_{n_j} + n_j} read off a truncated distribution;
/// the omitted mass contributes at most `leak` since the observable is in
/// [0, 1].
pub fn qmoment_of(
    dist: &TruncatedDistribution<ParticleConfig>,
    nvec: &BosonConfig,
    q: f64,
) -> f64 {
    dist.expectation(|cfg| duality_h(cfg, nvec, q))
}

/// Exact value of E prod_j q^{x_{n_j}(t) + n_j} for the discrete chain
/// started from step, computed as the absorption-avoidance probability
/// P(lowest dual particle still above 0 at time t) of the left-moving dual
/// chain started from `nvec`. Finite computation: the dual chain only moves
/// left, so its state space is bounded by the initial parts.
pub fn boson_exact_moment(
    nvec: &BosonConfig,
    t: usize,
    params: &QParams,
) -> Result<f64> {
    if nvec.min_part() == 0 {
        return Ok(0.0);
    }
    let mut dist = TruncatedDistribution::point_mass(nvec.clone());
    let mut phi_cache: HashMap<(usize, usize), PhiDist> = HashMap::new();
    for _ in 0..t {
        let mut next = TruncatedDistribution::empty();
        for (cfg, mass) in dist.iter() {
            // occupancies, sites descending
            let mut sites: Vec<(usize, usize)> = Vec::new();
            for &p in cfg.parts() {
                let p = p as usize;
                match sites.last_mut() {
                    Some((site, n)) if *site == p => *n += 1,
                    _ => sites.push((p, 1)),
                }
            }
            // product over occupied sites k >= 1 of independent phi draws
            let mut frontier: Vec<(Vec<u32>, f64)> = vec![(Vec::new(), mass)];
            for &(k, y) in &sites {
                if k == 0 {
                    for (parts, _) in frontier.iter_mut() {
                        parts.extend(std::iter::repeat(0u32).take(y));
                    }
                    continue;
                }
                let key = (k, y);
                if !phi_cache.contains_key(&key) {
                    let nu = params.nu(k);
                    phi_cache.insert(
                        key,
                        PhiDist::new(
                            params.q,
                            params.gamma * nu,
                            nu,
                            Support::Finite(y),
                        )?,
                    );
                }
                let weights = phi_cache[&key].weights().to_vec();
                let mut grown = Vec::with_capacity(frontier.len() * weights.len());
                for (parts, w) in frontier {
                    for (j, &wj) in weights.iter().enumerate() {
                        let mut p2 = parts.clone();
                        p2.extend(std::iter::repeat(k as u32).take(y - j));
                        p2.extend(std::iter::repeat((k - 1) as u32).take(j));
                        grown.push((p2, w * wj));
                    }
                }
                frontier = grown;
            }
            for (parts, w) in frontier {
                next.add(BosonConfig::from_unsorted(parts)?, w);
            }
        }
        dist = next;
    }
    Ok(dist
        .iter()
        .filter(|(c, _)| c.min_part() >= 1)
        .map(|(_, m)| m)
        .sum())
}

/// A CTMC on an indexed finite state space: `rows[i]` lists the
/// off-diagonal rates (target, rate) out of state i. Transitions leaving
/// the space must already be dropped by the caller (they become leak).
#[derive(Debug, Clone)]
pub struct FiniteCtmc {
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl FiniteCtmc {
    pub fn max_exit_rate(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.iter().map(|x| x.1).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Distribution of the chain at `horizon` by uniformization: the
/// Poisson(lambda * horizon)-weighted power series of the uniformized
/// kernel, truncated when the remaining Poisson tail drops below `tol`.
/// The dropped tail is added to the returned leak.
pub fn ctmc_uniformize(
    ctmc: &FiniteCtmc,
    initial: &[f64],
    initial_leak: f64,
    horizon: f64,
    tol: f64,
) -> Result<(Vec<f64>, f64)> {
    let n = ctmc.rows.len();
    if initial.len() != n {
        return Err(Error::Validation(format!(
            "initial vector has {} entries for {} states",
            initial.len(),
            n
        )));
    }
    let lambda = ctmc.max_exit_rate().max(1e-300);
    let lt = lambda * horizon;
    let mut p = initial.to_vec();
    let mut acc = vec![0.0; n];
    // Poisson(lt) weights by recurrence
    let mut weight = (-lt).exp();
    let mut cum = 0.0;
    let mut k = 0usize;
    loop {
        for i in 0..n {
            acc[i] += weight * p[i];
        }
        cum += weight;
        if 1.0 - cum < tol {
            break;
        }
        if k > 10_000_000 {
            return Err(Error::NonConvergence(
                "uniformization series did not close".into(),
            ));
        }
        // p <- p * (I + G / lambda)
        let mut next = p.clone();
        for (i, row) in ctmc.rows.iter().enumerate() {
            let exit: f64 = row.iter().map(|x| x.1).sum();
            next[i] -= p[i] * exit / lambda;
            for &(j, rate) in row {
                next[j] += p[i] * rate / lambda;
            }
        }
        p = next;
        k += 1;
        weight *= lt / k as f64;
    }
    if acc.iter().any(|&m| m < -1e-12) {
        return Err(Error::Validation(
            "uniformization produced negative mass; rate misconfiguration".into(),
        ));
    }
    Ok((acc, initial_leak + (1.0 - cum).max(0.0)))
}

/// Breadth-first exploration of a countable chain from `init`, keeping
/// states allowed by `keep`; rates into dropped states are truncated (the
/// caller accounts for them as leak via the returned escape rates).
/// Returns (states, ctmc, per-state escape rate).
pub fn explore_ctmc<S: Eq + Hash + Clone>(
    init: &[S],
    moves: impl Fn(&S) -> Vec<(S, f64)>,
    keep: impl Fn(&S) -> bool,
    state_cap: usize,
) -> Result<(Vec<S>, FiniteCtmc, Vec<f64>)> {
    let mut states: Vec<S> = Vec::new();
    let mut index: HashMap<S, usize> = HashMap::new();
    let mut queue: std::collections::VecDeque<usize> = Default::default();
    for s in init {
        if !index.contains_key(s) {
            index.insert(s.clone(), states.len());
            states.push(s.clone());
            queue.push_back(states.len() - 1);
        }
    }
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut escapes: Vec<f64> = Vec::new();
    while let Some(i) = queue.pop_front() {
        debug_assert_eq!(rows.len(), i);
        let mut row = Vec::new();
        let mut escape = 0.0;
        for (to, rate) in moves(&states[i]) {
            if rate == 0.0 {
                continue;
            }
            if !keep(&to) {
                escape += rate;
                continue;
            }
            let j = *index.entry(to.clone()).or_insert_with(|| {
                states.push(to.clone());
                queue.push_back(states.len() - 1);
                states.len() - 1
            });
            row.push((j, rate));
        }
        rows.push(row);
        escapes.push(escape);
        if states.len() > state_cap {
            return Err(Error::SizeGuard(format!(
                "reachable set exceeded the cap of {state_cap} states"
            )));
        }
    }
    Ok((states, FiniteCtmc { rows }, escapes))
}

/// P(Poisson((1-q) * t_param) <= n - 1): the survival probability of the
/// single dual particle started at site n (down-rate 1 - q, up-rate k / t).
pub fn birth_death_survival(q: f64, t_param: f64, n: usize) -> f64 {
    let lam = (1.0 - q) * t_param;
    let mut cdf = 0.0;
    let mut term = (-lam).exp();
    for j in 0..n {
        cdf += term;
        term *= lam / (j + 1) as f64;
    }
    cdf
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qhahn_sim::NuSeq;

    fn hom_params(q: f64, nu: f64, gamma: f64) -> QParams {
        QParams::new(q, NuSeq::Homogeneous(nu), gamma).unwrap()
    }

    #[test]
    fn exact_t0_is_point_mass_at_step() {
        let p = hom_params(0.5, 0.3, 2.0);
        let d = qhahn_exact_distribution(&p, 0, 40).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.mass(&ParticleConfig::step()), 1.0);
        assert_eq!(d.leak(), 0.0);
        assert!(d.check_invariants());
    }

    #[test]
    fn exact_t1_matches_leader_jump_law() {
        let p = hom_params(0.5, 0.3, 2.0);
        let d = qhahn_exact_distribution(&p, 1, 40).unwrap();
        assert!(d.check_invariants());
        let phi = PhiDist::new(0.5, 0.6, 0.3, Support::Infinite).unwrap();
        for j in 0..20usize {
            let cfg = ParticleConfig::from_head(vec![-1 + j as i64]).unwrap();
            assert!(
                (d.mass(&cfg) - phi.weight(j)).abs() < 1e-14,
                "j = {j}"
            );
        }
    }

    #[test]
    fn exact_moment_matches_iid_jump_oracle() {
        // E q^{x_1(t)+1} = ((1 - gamma nu)/(1 - nu))^t
        let (q, nu, gamma) = (0.5, 0.3, 2.0);
        let p = hom_params(q, nu, gamma);
        let n1 = BosonConfig::new(vec![1]).unwrap();
        for t in 0..=4usize {
            let d = qhahn_exact_distribution(&p, t, 60).unwrap();
            let m = qmoment_of(&d, &n1, q);
            let expect = ((1.0 - gamma * nu) / (1.0 - nu)).powi(t as i32);
            assert!(
                (m - expect).abs() < 1e-10 + d.leak(),
                "t = {t}: {m} vs {expect}"
            );
        }
    }

    #[test]
    fn boson_moment_edge_cases() {
        let p = hom_params(0.5, 0.3, 2.0);
        // n_ell = 0: observable vanishes
        let n0 = BosonConfig::new(vec![3, 0]).unwrap();
        assert_eq!(boson_exact_moment(&n0, 2, &p).unwrap(), 0.0);
        // t = 0 with all parts positive: 1
        let n = BosonConfig::new(vec![2, 1]).unwrap();
        assert_eq!(boson_exact_moment(&n, 0, &p).unwrap(), 1.0);
        // single particle closed form
        let stay: f64 = (1.0 - 2.0 * 0.3) / (1.0 - 0.3);
        for t in 1..=5usize {
            let m = boson_exact_moment(&BosonConfig::new(vec![1]).unwrap(), t, &p)
                .unwrap();
            assert!((m - stay.powi(t as i32)).abs() < 1e-12);
        }
    }

    #[test]
    fn forward_and_dual_moments_agree() {
        // the same q-moment from the forward recursion and from the dual
        // chain, small grid
        let p = hom_params(0.4, 0.25, 2.5);
        for t in 0..=3usize {
            let d = qhahn_exact_distribution(&p, t, 60).unwrap();
            for nvec in [
                BosonConfig::new(vec![1]).unwrap(),
                BosonConfig::new(vec![2]).unwrap(),
                BosonConfig::new(vec![2, 1]).unwrap(),
                BosonConfig::new(vec![3, 2, 1]).unwrap(),
                BosonConfig::new(vec![2, 2, 1]).unwrap(),
            ] {
                let forward = qmoment_of(&d, &nvec, p.q);
                let dual = boson_exact_moment(&nvec, t, &p).unwrap();
                assert!(
                    (forward - dual).abs() < 1e-10 + d.leak(),
                    "t = {t}, n = {nvec:?}: {forward} vs {dual}"
                );
            }
        }
    }

    #[test]
    fn uniformize_zero_generator_is_identity() {
        let ctmc = FiniteCtmc {
            rows: vec![vec![], vec![]],
        };
        let (p, leak) =
            ctmc_uniformize(&ctmc, &[0.3, 0.7], 0.0, 5.0, 1e-12).unwrap();
        assert!((p[0] - 0.3).abs() < 1e-12 && (p[1] - 0.7).abs() < 1e-12);
        assert!(leak <= 1e-12);
    }

    #[test]
    fn uniformize_two_state_closed_form() {
        // rates a: 0->1, b: 1->0; p_00(t) = b/(a+b) + a/(a+b) e^{-(a+b)t}
        let (a, b, t) = (0.7, 0.4, 1.3);
        let ctmc = FiniteCtmc {
            rows: vec![vec![(1, a)], vec![(0, b)]],
        };
        let (p, _) = ctmc_uniformize(&ctmc, &[1.0, 0.0], 0.0, t, 1e-14).unwrap();
        let expect = b / (a + b) + a / (a + b) * (-(a + b) * t).exp();
        assert!((p[0] - expect).abs() < 1e-12);
        assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniformize_qtasep_single_particle_moment() {
        // E q^{x_1(t)+1} = e^{-(1-q)t} for q-TASEP; single particle is a
        // Poisson counter truncated far out
        let (q, t) = (0.5f64, 2.0);
        let cap = 80usize;
        let (states, ctmc, _) = explore_ctmc(
            &[0usize],
            |&k| vec![(k + 1, 1.0)],
            |&k| k <= cap,
            10_000,
        )
        .unwrap();
        let mut init = vec![0.0; states.len()];
        init[0] = 1.0;
        let (p, leak) = ctmc_uniformize(&ctmc, &init, 0.0, t, 1e-13).unwrap();
        let m: f64 = states
            .iter()
            .zip(&p)
            .map(|(&k, &mass)| mass * q.powi(k as i32))
            .sum();
        assert!(leak < 1e-10);
        assert!((m - (-(1.0 - q) * t).exp()).abs() < 1e-10);
    }

    #[test]
    fn swap_theorem_exact_small_grid() {
        // chain with nus swapped at (n, n+1) == chain then swap operator:
        // total variation within 1e-10 plus reported leak
        let q = 0.45;
        let jmax = 60;
        for (n, t) in [(1usize, 1usize), (1, 2), (2, 2), (3, 3), (1, 3)] {
            let mut nus = vec![0.5, 0.4, 0.3, 0.25, 0.2];
            let params = QParams::new(
                q,
                NuSeq::Explicit {
                    head: nus.clone(),
                    tail: 0.1,
                },
                1.3,
            )
            .unwrap();
            nus.swap(n - 1, n);
            let params_swapped = QParams::new(
                q,
                NuSeq::Explicit {
                    head: nus,
                    tail: 0.1,
                },
                1.3,
            )
            .unwrap();
            let d = qhahn_exact_distribution(&params, t, jmax).unwrap();
            let lhs = swap_exact_apply(&d, n, &params).unwrap();
            let rhs = qhahn_exact_distribution(&params_swapped, t, jmax).unwrap();
            let tv = lhs.tv_distance(&rhs);
            let allow = 1e-10 + (lhs.leak() + rhs.leak()) / 2.0;
            assert!(
                tv < allow,
                "n = {n}, t = {t}: tv = {tv:.3e}, allowance = {allow:.3e}"
            );
        }
    }

    #[test]
    fn sweep_exact_matches_sampling_frequencies() {
        use crate::rng::replica_stream;
        use crate::swap::backward_discrete_sweep;
        let (q, nu, r) = (0.5, 0.3, 0.9);
        let x = ParticleConfig::from_head(vec![3, 1]).unwrap();
        let exact =
            sweep_exact_apply(&TruncatedDistribution::point_mass(x.clone()), q, nu, r)
                .unwrap();
        assert!((exact.total_mass() - 1.0).abs() < 1e-12);
        let reps = 60_000usize;
        let mut counts: HashMap<ParticleConfig, usize> = HashMap::new();
        for rep in 0..reps {
            let mut rng = replica_stream(51, rep as u64);
            let y = backward_discrete_sweep(&x, q, nu, r, &mut rng).unwrap();
            *counts.entry(y).or_insert(0) += 1;
        }
        for (cfg, mass) in exact.iter() {
            let freq =
                counts.get(cfg).copied().unwrap_or(0) as f64 / reps as f64;
            let se = (mass * (1.0 - mass) / reps as f64).sqrt();
            assert!(
                (freq - mass).abs() < 4.0 * se + 1e-4,
                "{cfg:?}: freq {freq} vs exact {mass}"
            );
        }
    }

    #[test]
    fn birth_death_survival_values() {
        assert_eq!(birth_death_survival(0.5, 2.0, 0), 0.0);
        // h(1) = e^{-(1-q)t}
        assert!(
            (birth_death_survival(0.5, 2.0, 1) - (-1.0f64).exp()).abs() < 1e-14
        );
        // monotone to 1
        let mut prev = 0.0;
        for n in 0..200 {
            let h = birth_death_survival(0.3, 3.0, n);
            assert!(h >= prev);
            prev = h;
        }
        assert!((prev - 1.0).abs() < 1e-12);
    }
}
