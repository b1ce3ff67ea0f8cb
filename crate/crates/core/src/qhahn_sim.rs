//! Forward particle dynamics: the discrete-time parallel-update chain, its
//! continuous-time limit, and the q-TASEP special case.
//!
//! All simulators act on [`ParticleConfig`] values and draw randomness from a
//! caller-supplied stream, so replica fan-out stays deterministic.

use std::collections::HashMap;

use crate::configspace::ParticleConfig;
use crate::error::{Error, Result};
use crate::qkernel::{PhiDist, RateKind, RateTable, Support};
use crate::rng::Rng;

/// Inhomogeneity profile for the per-particle parameters nu_i, i >= 1.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum NuSeq {
    /// nu_i = nu for all i.
    Homogeneous(f64),
    /// nu_i = nu * r^{i-1}.
    Geometric { nu: f64, r: f64 },
    /// Explicit leading values, then a constant tail.
    Explicit { head: Vec<f64>, tail: f64 },
}

impl NuSeq {
    /// nu_i for 1-based particle index `i`.
    pub fn nu(&self, i: usize) -> f64 {
        debug_assert!(i >= 1);
        match self {
            NuSeq::Homogeneous(nu) => *nu,
            NuSeq::Geometric { nu, r } => nu * r.powi(i as i32 - 1),
            NuSeq::Explicit { head, tail } => {
                head.get(i - 1).copied().unwrap_or(*tail)
            }
        }
    }

    /// Supremum of the sequence.
    pub fn sup(&self) -> f64 {
        match self {
            NuSeq::Homogeneous(nu) => *nu,
            NuSeq::Geometric { nu, r } => {
                if *r <= 1.0 {
                    *nu
                } else {
                    f64::INFINITY
                }
            }
            NuSeq::Explicit { head, tail } => head
                .iter()
                .copied()
                .fold(*tail, f64::max),
        }
    }

    /// Whether nu_i depends on i; used to key jump-weight caches.
    fn homogeneous(&self) -> bool {
        match self {
            NuSeq::Homogeneous(_) => true,
            NuSeq::Geometric { r, .. } => *r == 1.0,
            NuSeq::Explicit { head, tail } => {
                head.iter().all(|v| v == tail)
            }
        }
    }
}

/// Parameters of the discrete-time chain: 0 <= q < 1, nu_i in [0, 1),
/// 1 <= gamma <= 1 / sup nu_i. Particle i jumps by j with weight
/// phi_{q, gamma nu_i, nu_i}(j | gap_i).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct QParams {
    pub q: f64,
    pub nus: NuSeq,
    pub gamma: f64,
}

impl QParams {
    pub fn new(q: f64, nus: NuSeq, gamma: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&q) {
            return Err(Error::Domain(format!("q = {q} outside [0, 1)")));
        }
        let sup = nus.sup();
        if !(0.0..1.0).contains(&sup) {
            return Err(Error::Domain(format!(
                "sup nu_i = {sup} outside [0, 1)"
            )));
        }
        match &nus {
            NuSeq::Homogeneous(nu) => {
                if !(0.0..1.0).contains(nu) {
                    return Err(Error::Domain(format!("nu = {nu} outside [0, 1)")));
                }
            }
            NuSeq::Geometric { nu, r } => {
                if !(0.0..1.0).contains(nu) || !(*r > 0.0 && *r <= 1.0) {
                    return Err(Error::Domain(format!(
                        "geometric nu sequence needs nu in [0,1), 0 < r <= 1; got nu = {nu}, r = {r}"
                    )));
                }
            }
            NuSeq::Explicit { head, tail } => {
                for v in head.iter().chain(std::iter::once(tail)) {
                    if !(0.0..1.0).contains(v) {
                        return Err(Error::Domain(format!(
                            "nu value {v} outside [0, 1)"
                        )));
                    }
                }
            }
        }
        if !(gamma >= 1.0) || gamma * sup > 1.0 + 1e-15 {
            return Err(Error::Domain(format!(
                "gamma = {gamma} outside [1, 1/sup nu] = [1, {}]",
                1.0 / sup
            )));
        }
        Ok(QParams { q, nus, gamma })
    }

    pub fn nu(&self, i: usize) -> f64 {
        self.nus.nu(i)
    }
}

/// A configuration together with its clock. `time` counts steps for the
/// discrete chain and is continuous otherwise.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SimState {
    pub config: ParticleConfig,
    pub time: f64,
}

impl SimState {
    pub fn step() -> Self {
        SimState {
            config: ParticleConfig::step(),
            time: 0.0,
        }
    }

    pub fn new(config: ParticleConfig) -> Self {
        SimState { config, time: 0.0 }
    }
}

/// Jump-size tables for the discrete chain, memoised per (particle, gap).
/// For homogeneous nu the particle index is dropped from the key.
pub struct PhiCache {
    q: f64,
    gamma: f64,
    nus: NuSeq,
    keyed_by_particle: bool,
    finite: HashMap<(usize, usize), PhiDist>,
    infinite: Option<PhiDist>,
}

impl PhiCache {
    pub fn new(params: &QParams) -> Self {
        PhiCache {
            q: params.q,
            gamma: params.gamma,
            nus: params.nus.clone(),
            keyed_by_particle: !params.nus.homogeneous(),
            finite: HashMap::new(),
            infinite: None,
        }
    }

    fn finite_dist(&mut self, particle: usize, gap: usize) -> Result<&PhiDist> {
        let key = (if self.keyed_by_particle { particle } else { 0 }, gap);
        if !self.finite.contains_key(&key) {
            let nu = self.nus.nu(particle);
            let dist =
                PhiDist::new(self.q, self.gamma * nu, nu, Support::Finite(gap))?;
            self.finite.insert(key, dist);
        }
        Ok(self.finite.get(&key).unwrap())
    }

    fn infinite_dist(&mut self) -> Result<&PhiDist> {
        if self.infinite.is_none() {
            let nu = self.nus.nu(1);
            self.infinite =
                Some(PhiDist::new(self.q, self.gamma * nu, nu, Support::Infinite)?);
        }
        Ok(self.infinite.as_ref().unwrap())
    }
}

/// One parallel update of the discrete chain. All jump sizes are drawn
/// against the pre-step gaps, then applied simultaneously. Only particles
/// 1..=N+1 can move when the head has length N: every deeper particle sits
/// at its step position with gap 0.
pub fn qhahn_discrete_step(
    state: &mut SimState,
    cache: &mut PhiCache,
    rng: &mut Rng,
) -> Result<()> {
    let n_head = state.config.head().len();
    let mut jumps: Vec<usize> = Vec::with_capacity(n_head + 1);
    // particle 1: unbounded jump
    jumps.push(cache.infinite_dist()?.sample_rng(rng));
    for i in 2..=n_head + 1 {
        let gap = state.config.gap(i).expect("i >= 2 has a finite gap");
        if gap == 0 {
            jumps.push(0);
        } else {
            jumps.push(cache.finite_dist(i, gap)?.sample_rng(rng));
        }
    }
    let mut head: Vec<i64> = (1..=n_head + 1)
        .map(|i| state.config.position(i))
        .collect();
    for (k, j) in jumps.iter().enumerate() {
        head[k] += *j as i64;
    }
    state.config = ParticleConfig::from_head(head)?;
    state.time += 1.0;
    Ok(())
}

/// Runs `steps` parallel updates.
pub fn qhahn_discrete_run(
    state: &mut SimState,
    params: &QParams,
    steps: usize,
    rng: &mut Rng,
) -> Result<()> {
    let mut cache = PhiCache::new(params);
    for _ in 0..steps {
        qhahn_discrete_step(state, &mut cache, rng)?;
    }
    Ok(())
}

/// Parameters of the continuous-time chain. In the homogeneous case
/// particle i jumps by j at rate psi_{q,nu}(j | gap_i); in the geometric
/// case the rate is nu_i * psi_{q,nu_i}(j | gap_i) with nu_i = nu r^{i-1}.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ContParams {
    pub q: f64,
    pub nus: NuSeq,
}

impl ContParams {
    pub fn new(q: f64, nus: NuSeq) -> Result<Self> {
        if !(0.0..1.0).contains(&q) {
            return Err(Error::Domain(format!("q = {q} outside [0, 1)")));
        }
        let sup = nus.sup();
        if !(0.0..1.0).contains(&sup) && sup != 0.0 {
            return Err(Error::Domain(format!(
                "sup nu_i = {sup} outside [0, 1)"
            )));
        }
        Ok(ContParams { q, nus })
    }

    /// Multiplier in front of psi for particle i: 1 when homogeneous,
    /// nu_i otherwise.
    fn scale(&self, i: usize) -> f64 {
        if self.nus.homogeneous() {
            1.0
        } else {
            self.nus.nu(i)
        }
    }
}

/// Event-driven simulation of the continuous-time chain on [t, t_end].
/// Exponential clocks are resampled after every event, which is valid by
/// memorylessness and keeps the per-particle rate tables in sync with the
/// gaps they depend on.
pub fn qhahn_continuous_run(
    state: &mut SimState,
    params: &ContParams,
    t_end: f64,
    rng: &mut Rng,
) -> Result<()> {
    if t_end < state.time {
        return Err(Error::Validation(format!(
            "t_end = {t_end} is before current time {}",
            state.time
        )));
    }
    let mut tables: HashMap<(usize, usize), RateTable> = HashMap::new();
    // particle 1 always has infinite gap; total rate psi(.|inf) summed
    let infinite_table =
        RateTable::new(RateKind::Psi, params.q, params.nus.nu(1), Support::Infinite)?;

    loop {
        let n_head = state.config.head().len();
        // per-particle total rates for particles 1..=n_head+1
        let mut totals: Vec<f64> = Vec::with_capacity(n_head + 1);
        totals.push(params.scale(1) * infinite_table.total());
        for i in 2..=n_head + 1 {
            let gap = state.config.gap(i).expect("finite gap");
            if gap == 0 {
                totals.push(0.0);
            } else {
                let key = (
                    if params.nus.homogeneous() { 0 } else { i },
                    gap,
                );
                if !tables.contains_key(&key) {
                    let t = RateTable::new(
                        RateKind::Psi,
                        params.q,
                        params.nus.nu(i),
                        Support::Finite(gap),
                    )?;
                    tables.insert(key, t);
                }
                totals.push(params.scale(i) * tables[&key].total());
            }
        }
        let total: f64 = totals.iter().sum();
        if total <= 0.0 {
            state.time = t_end;
            return Ok(());
        }
        let dt = -rng_f64_open(rng).ln() / total;
        if state.time + dt > t_end {
            state.time = t_end;
            return Ok(());
        }
        state.time += dt;
        // pick the particle, then the jump size
        let mut u = rng_f64_open(rng) * total;
        let mut particle = n_head + 1;
        for (k, r) in totals.iter().enumerate() {
            if u < *r {
                particle = k + 1;
                break;
            }
            u -= r;
        }
        let jump = if particle == 1 {
            infinite_table.sample(rng)
        } else {
            let gap = state.config.gap(particle).expect("finite gap");
            let key = (
                if params.nus.homogeneous() { 0 } else { particle },
                gap,
            );
            tables[&key].sample(rng)
        };
        let new_pos = state.config.position(particle) + jump as i64;
        state.config = state.config.with_move(particle, new_pos)?;
    }
}

/// q-TASEP on [t, t_end]: particle i hops right by one at rate
/// 1 - q^{gap_i}, the leader at rate 1.
pub fn qtasep_run(
    state: &mut SimState,
    q: f64,
    t_end: f64,
    rng: &mut Rng,
) -> Result<()> {
    if !(0.0..1.0).contains(&q) {
        return Err(Error::Domain(format!("q = {q} outside [0, 1)")));
    }
    if t_end < state.time {
        return Err(Error::Validation(format!(
            "t_end = {t_end} is before current time {}",
            state.time
        )));
    }
    loop {
        let n_head = state.config.head().len();
        let mut rates: Vec<f64> = Vec::with_capacity(n_head + 1);
        rates.push(1.0);
        for i in 2..=n_head + 1 {
            let gap = state.config.gap(i).expect("finite gap");
            rates.push(1.0 - q.powi(gap as i32));
        }
        let total: f64 = rates.iter().sum();
        let dt = -rng_f64_open(rng).ln() / total;
        if state.time + dt > t_end {
            state.time = t_end;
            return Ok(());
        }
        state.time += dt;
        let mut u = rng_f64_open(rng) * total;
        let mut particle = n_head + 1;
        for (k, r) in rates.iter().enumerate() {
            if u < *r {
                particle = k + 1;
                break;
            }
            u -= r;
        }
        let new_pos = state.config.position(particle) + 1;
        state.config = state.config.with_move(particle, new_pos)?;
    }
}

/// Uniform draw in (0, 1); never returns 0, so -ln(u) is finite.
pub(crate) fn rng_f64_open(rng: &mut Rng) -> f64 {
    use rand::Rng as _;
    loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            return u;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::replica_stream;

    #[test]
    fn nu_seq_values() {
        let g = NuSeq::Geometric { nu: 0.4, r: 0.5 };
        assert_eq!(g.nu(1), 0.4);
        assert_eq!(g.nu(3), 0.1);
        assert_eq!(g.sup(), 0.4);
        let e = NuSeq::Explicit {
            head: vec![0.3, 0.2],
            tail: 0.1,
        };
        assert_eq!(e.nu(2), 0.2);
        assert_eq!(e.nu(7), 0.1);
        assert_eq!(e.sup(), 0.3);
        assert!(!e.homogeneous());
        assert!(NuSeq::Homogeneous(0.5).homogeneous());
    }

    #[test]
    fn qparams_validation() {
        assert!(QParams::new(0.5, NuSeq::Homogeneous(0.4), 2.0).is_ok());
        assert!(QParams::new(0.5, NuSeq::Homogeneous(0.4), 3.0).is_err());
        assert!(QParams::new(0.5, NuSeq::Homogeneous(0.4), 0.5).is_err());
        assert!(QParams::new(1.0, NuSeq::Homogeneous(0.4), 1.0).is_err());
        assert!(QParams::new(0.5, NuSeq::Homogeneous(1.0), 1.0).is_err());
    }

    #[test]
    fn discrete_step_preserves_invariants() {
        let params =
            QParams::new(0.4, NuSeq::Homogeneous(0.3), 2.0).unwrap();
        let mut rng = replica_stream(11, 0);
        let mut state = SimState::step();
        let mut cache = PhiCache::new(&params);
        for t in 1..=40 {
            qhahn_discrete_step(&mut state, &mut cache, &mut rng).unwrap();
            assert!(state.config.check_invariants());
            assert_eq!(state.time, t as f64);
            // particles deeper than t+1 cannot have moved
            assert!(state.config.head().len() <= t + 1);
        }
    }

    #[test]
    fn discrete_ordering_strict_under_inhomogeneous_nu() {
        let params = QParams::new(
            0.3,
            NuSeq::Explicit {
                head: vec![0.5, 0.4, 0.3],
                tail: 0.2,
            },
            1.5,
        )
        .unwrap();
        let mut rng = replica_stream(12, 0);
        let mut state = SimState::step();
        qhahn_discrete_run(&mut state, &params, 30, &mut rng).unwrap();
        assert!(state.config.check_invariants());
    }

    #[test]
    fn continuous_run_preserves_invariants() {
        let params =
            ContParams::new(0.5, NuSeq::Homogeneous(0.3)).unwrap();
        let mut rng = replica_stream(13, 0);
        let mut state = SimState::step();
        qhahn_continuous_run(&mut state, &params, 3.0, &mut rng).unwrap();
        assert_eq!(state.time, 3.0);
        assert!(state.config.check_invariants());
        // leader moves at rate psi(.|inf) summed, so it should have moved by t=3
        assert!(state.config.position(1) > 0);
    }

    #[test]
    fn continuous_at_nu_zero_is_time_sped_qtasep() {
        // psi_{q,0}(j|m) = [j = 1] (1 - q^m)/(1 - q): the nu = 0 chain is
        // q-TASEP with time multiplied by 1/(1-q). Compare E x_1 at matched
        // times.
        let q = 0.5;
        let t = 1.0;
        let reps = 4000;
        let params = ContParams::new(q, NuSeq::Homogeneous(0.0)).unwrap();
        let mut sum_a = 0.0;
        let mut sum_b = 0.0;
        for r in 0..reps {
            let mut rng = replica_stream(14, r);
            let mut st = SimState::step();
            qhahn_continuous_run(&mut st, &params, t, &mut rng).unwrap();
            sum_a += st.config.position(1) as f64;

            let mut rng = replica_stream(15, r);
            let mut st = SimState::step();
            qtasep_run(&mut st, q, t / (1.0 - q), &mut rng).unwrap();
            sum_b += st.config.position(1) as f64;
        }
        let ma = sum_a / reps as f64;
        let mb = sum_b / reps as f64;
        // x_1(t) is Poisson(t/(1-q)) - 1; SE ~ sqrt(2/reps * 2)
        assert!(
            (ma - mb).abs() < 0.15,
            "nu=0 mean {ma} vs rescaled q-TASEP mean {mb}"
        );
        assert!((ma - (t / (1.0 - q) - 1.0)).abs() < 0.11);
    }

    #[test]
    fn qtasep_leader_is_poisson() {
        // x_1(t) + 1 ~ Poisson(t)
        let t = 2.0;
        let reps = 6000;
        let mut sum = 0.0;
        for r in 0..reps {
            let mut rng = replica_stream(16, r);
            let mut st = SimState::step();
            qtasep_run(&mut st, 0.6, t, &mut rng).unwrap();
            sum += (st.config.position(1) + 1) as f64;
        }
        let mean = sum / reps as f64;
        assert!((mean - t).abs() < 4.0 * (t / reps as f64).sqrt());
    }
}
