//! The q-deformed beta-binomial distribution, the continuous-time rate
//! families `psi` / `psi_bullet`, and the associated difference operators.
//!
//! All weights are evaluated in linear space with pairwise products; in the
//! validated parameter regime every factor lies in (0, 2) so this is
//! well-conditioned. An extended-precision (double-double) product path is
//! available behind a flag for very large supports.

use crate::error::{Error, Result};
use crate::rng::Rng;
use rand::Rng as _;

/// Support size of a jump distribution: a finite gap or the infinite gap of
/// the first particle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Support {
    Finite(usize),
    Infinite,
}

impl Support {
    pub fn contains(&self, j: usize) -> bool {
        match self {
            Support::Finite(m) => j <= *m,
            Support::Infinite => true,
        }
    }
}

impl std::fmt::Display for Support {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Support::Finite(m) => write!(f, "{m}"),
            Support::Infinite => write!(f, "inf"),
        }
    }
}

/// `(x;q)_k = (1-x)(1-qx)...(1-q^{k-1}x)`.
pub fn qpoch(x: f64, q: f64, k: usize) -> f64 {
    let mut p = 1.0;
    let mut qi = 1.0;
    for _ in 0..k {
        p *= 1.0 - x * qi;
        qi *= q;
    }
    p
}

/// `(x;q)_inf`, truncated once the running factor is within 1e-16 of 1.
pub fn qpoch_inf(x: f64, q: f64) -> f64 {
    debug_assert!((0.0..1.0).contains(&q));
    let mut p = 1.0;
    let mut xq = x;
    loop {
        p *= 1.0 - xq;
        xq *= q;
        if xq.abs() < 1e-16 {
            return p;
        }
    }
}

/// Partial products `(x;q)_k` for `k = 0..=K`, shared by repeated weight
/// evaluations at a fixed parameter point.
#[derive(Debug, Clone)]
pub struct QPochhammerCache {
    pub base: f64,
    pub argument: f64,
    pub values: Vec<f64>,
}

impl QPochhammerCache {
    pub fn new(argument: f64, base: f64, max_k: usize) -> Result<Self> {
        if !(0.0..1.0).contains(&base) || base == 0.0 {
            return Err(Error::Domain(format!("q-Pochhammer base must be in (0,1), got {base}")));
        }
        let mut values = Vec::with_capacity(max_k + 1);
        values.push(1.0);
        let mut qi = 1.0;
        for _ in 0..max_k {
            let last = *values.last().unwrap();
            values.push(last * (1.0 - argument * qi));
            qi *= base;
        }
        Ok(Self { base, argument, values })
    }

    pub fn get(&self, k: usize) -> f64 {
        self.values[k]
    }
}

// ---------------------------------------------------------------------------
// Double-double product accumulation (extended-precision fallback).
// ---------------------------------------------------------------------------

#[derive(Clone, Copy)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    fn mul_f64(self, b: f64) -> Dd {
        let p = self.hi * b;
        let e = self.hi.mul_add(b, -p);
        let lo = self.lo * b + e;
        let hi = p + lo;
        Dd { hi, lo: p - hi + lo }
    }

    fn div(self, b: Dd) -> f64 {
        let q1 = self.hi / b.hi;
        // one refinement step: r = a - q1*b
        let r = self.hi - q1 * b.hi + (self.lo - q1 * b.lo);
        q1 + r / b.hi
    }
}

fn dd_product(factors: impl Iterator<Item = f64>) -> Dd {
    factors.fold(Dd::ONE, Dd::mul_f64)
}

fn check_q(q: f64) -> Result<()> {
    if !(0.0..1.0).contains(&q) {
        return Err(Error::Domain(format!("q must be in [0,1), got {q}")));
    }
    Ok(())
}

/// `x^k` with the `0^0 = 1` convention.
fn powi0(x: f64, k: usize) -> f64 {
    if k == 0 {
        1.0
    } else {
        x.powi(k as i32)
    }
}

/// Weight of the q-deformed beta-binomial distribution at `j`, support `0..=m`.
///
/// The leading factor `mu^j (nu/mu;q)_j` is evaluated as the product of
/// `(mu - nu q^i)`, which is also correct at `mu = 0`.
pub fn phi_weight(q: f64, mu: f64, nu: f64, j: usize, m: Support) -> Result<f64> {
    phi_weight_impl(q, mu, nu, j, m, false)
}

/// Same weight via double-double product accumulation; use for supports of
/// several hundred where plain f64 products lose digits.
pub fn phi_weight_extended(q: f64, mu: f64, nu: f64, j: usize, m: Support) -> Result<f64> {
    phi_weight_impl(q, mu, nu, j, m, true)
}

fn phi_weight_impl(q: f64, mu: f64, nu: f64, j: usize, m: Support, extended: bool) -> Result<f64> {
    check_q(q)?;
    if !m.contains(j) {
        return Err(Error::Domain(format!("j = {j} outside support 0..={m}")));
    }
    // numerator factors: (mu - nu q^i) for i < j, then (mu;q)_{m-j} factors;
    // denominator: (nu;q)_m and (q;q)_j (q;q)_{m-j} against (q;q)_m.
    match m {
        Support::Finite(m) => {
            let num = |_: ()| {
                let head = (0..j).map(|i| mu - nu * q.powi(i as i32));
                let mid = (0..m - j).map(|i| 1.0 - mu * q.powi(i as i32));
                // (q;q)_m / (q;q)_{m-j} = prod_{i=m-j+1}^{m} (1-q^i)
                let tail = (m - j + 1..=m).map(|i| 1.0 - q.powi(i as i32));
                head.chain(mid).chain(tail)
            };
            let den = |_: ()| {
                let a = (0..m).map(|i| 1.0 - nu * q.powi(i as i32));
                let b = (1..=j).map(|i| 1.0 - q.powi(i as i32));
                a.chain(b)
            };
            if extended {
                Ok(dd_product(num(())).div(dd_product(den(()))))
            } else {
                Ok(num(()).product::<f64>() / den(()).product::<f64>())
            }
        }
        Support::Infinite => {
            if mu >= 1.0 {
                return Err(Error::Domain(
                    "phi(.|inf) requires mu < 1 (mass escapes to infinity at mu = 1)".into(),
                ));
            }
            let head: f64 = (0..j).map(|i| mu - nu * q.powi(i as i32)).product();
            let qq_j = qpoch(q, q, j);
            Ok(head / qq_j * qpoch_inf(mu, q) / qpoch_inf(nu, q))
        }
    }
}

fn validate_regime(q: f64, mu: f64, nu: f64) -> Result<()> {
    check_q(q)?;
    if !(0.0..=1.0).contains(&mu) {
        return Err(Error::Validation(format!(
            "nonnegativity regime requires 0 <= mu <= 1, got mu = {mu}"
        )));
    }
    if nu > mu {
        return Err(Error::Validation(format!(
            "nonnegativity regime requires nu <= mu, got nu = {nu} > mu = {mu}"
        )));
    }
    Ok(())
}

/// The q-deformed beta-binomial distribution `phi_{q,mu,nu}( . | m)`.
///
/// Weights are materialized at construction; for `m = Infinite` the
/// materialization stops once the geometric tail bound drops below 1e-14,
/// and the bound is reported via [`PhiDist::tail_bound`].
#[derive(Debug, Clone)]
pub struct PhiDist {
    pub q: f64,
    pub mu: f64,
    pub nu: f64,
    pub m: Support,
    weights: Vec<f64>,
    tail_bound: f64,
    extended: bool,
}

impl PhiDist {
    /// Construct in the validated nonnegativity regime `0 <= mu <= 1, nu <= mu`.
    pub fn new(q: f64, mu: f64, nu: f64, m: Support) -> Result<Self> {
        validate_regime(q, mu, nu)?;
        Self::build(q, mu, nu, m, false)
    }

    /// Construct without the nonnegativity validation (algebraic evaluation;
    /// weights may be negative).
    pub fn new_algebraic(q: f64, mu: f64, nu: f64, m: Support) -> Result<Self> {
        check_q(q)?;
        Self::build(q, mu, nu, m, false)
    }

    /// Validated construction with double-double products for large supports.
    pub fn new_extended(q: f64, mu: f64, nu: f64, m: Support) -> Result<Self> {
        validate_regime(q, mu, nu)?;
        Self::build(q, mu, nu, m, true)
    }

    fn build(q: f64, mu: f64, nu: f64, m: Support, extended: bool) -> Result<Self> {
        let (weights, tail_bound) = match m {
            Support::Finite(mm) => {
                let w: Vec<f64> = if extended || mu >= 1.0 {
                    // direct per-weight evaluation; covers mu = 1 (point mass
                    // at m) and algebraic parameters where the recurrence
                    // denominator 1 - mu q^{m-j-1} can vanish
                    (0..=mm)
                        .map(|j| phi_weight_impl(q, mu, nu, j, m, extended))
                        .collect::<Result<_>>()?
                } else {
                    // O(m) ratio recurrence, safe for mu < 1
                    let mut w = Vec::with_capacity(mm + 1);
                    w.push(qpoch(mu, q, mm) / qpoch(nu, q, mm));
                    for j in 0..mm {
                        let num = (mu - nu * q.powi(j as i32))
                            * (1.0 - q.powi((mm - j) as i32));
                        let den = (1.0 - q.powi(j as i32 + 1))
                            * (1.0 - mu * q.powi((mm - j - 1) as i32));
                        let next = w[j] * num / den;
                        w.push(next);
                    }
                    w
                };
                (w, 0.0)
            }
            Support::Infinite => {
                if mu >= 1.0 {
                    return Err(Error::Domain(
                        "phi(.|inf) requires mu < 1 (mass escapes to infinity at mu = 1)".into(),
                    ));
                }
                let mut w = vec![phi_weight(q, mu, nu, 0, m)?];
                let mut qj = 1.0; // q^j
                loop {
                    let j = w.len() - 1;
                    // w(j+1)/w(j) = (mu - nu q^j) / (1 - q^{j+1})
                    let ratio = (mu - nu * qj) / (1.0 - qj * q);
                    // upper bound on all later ratios
                    let rho = (mu + nu.abs() * qj) / (1.0 - qj * q);
                    let last = w[j] * ratio;
                    w.push(last);
                    qj *= q;
                    if rho < 1.0 {
                        let tail = last.abs() * rho / (1.0 - rho);
                        if tail < 1e-14 {
                            break (w, tail);
                        }
                    }
                    if w.len() > 100_000 {
                        return Err(Error::NonConvergence(
                            "phi(.|inf) tail did not close; parameters too close to mu = 1".into(),
                        ));
                    }
                }
            }
        };
        Ok(Self { q, mu, nu, m, weights, tail_bound, extended })
    }

    pub fn weight(&self, j: usize) -> f64 {
        if j < self.weights.len() {
            self.weights[j]
        } else if self.m == Support::Infinite {
            phi_weight_impl(self.q, self.mu, self.nu, j, self.m, self.extended).unwrap_or(0.0)
        } else {
            0.0
        }
    }

    /// Materialized weights (for `m = Infinite`: up to the truncation index).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Upper bound on the probability mass beyond the materialized weights.
    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    /// Inverse-CDF sample from a uniform variate `u` in `[0,1)`.
    pub fn sample(&self, u: f64) -> usize {
        debug_assert!((0.0..1.0).contains(&u));
        let mut cum = 0.0;
        for (j, &w) in self.weights.iter().enumerate() {
            cum += w;
            if u < cum {
                return j;
            }
        }
        // Infinite support: accumulate past the truncation point (total mass
        // is 1, so this terminates almost surely).
        let mut j = self.weights.len() - 1;
        let mut w = *self.weights.last().unwrap();
        let mut qj = powi0(self.q, j);
        loop {
            w *= (self.mu - self.nu * qj) / (1.0 - qj * self.q);
            qj *= self.q;
            j += 1;
            cum += w;
            if u < cum || w < f64::MIN_POSITIVE {
                return j;
            }
        }
    }

    pub fn sample_rng(&self, rng: &mut Rng) -> usize {
        self.sample(rng.gen::<f64>())
    }
}

/// `psi_{q,nu}(j|m)`: the continuous-time q-Hahn right-jump rate, `1 <= j <= m`.
pub fn psi_rate(q: f64, nu: f64, j: usize, m: Support) -> Result<f64> {
    check_q(q)?;
    if j < 1 || !m.contains(j) {
        return Err(Error::Domain(format!("psi support is 1 <= j <= {m}, got j = {j}")));
    }
    match m {
        Support::Infinite => Ok(powi0(nu, j - 1) / (1.0 - q.powi(j as i32))),
        Support::Finite(m) => Ok(powi0(nu, j - 1) / (1.0 - q.powi(j as i32))
            * (qpoch(q, q, m) / qpoch(q, q, m - j))
            * (qpoch(nu, q, m - j) / qpoch(nu, q, m))),
    }
}

/// `psi_bullet_{q,nu}(j'|m)`: the left-jump rate family, `0 <= j' <= m-1`.
pub fn psi_bullet_rate(q: f64, nu: f64, jprime: usize, m: usize) -> Result<f64> {
    check_q(q)?;
    if m == 0 || jprime > m - 1 {
        return Err(Error::Domain(format!(
            "psi_bullet support is 0 <= j' <= m-1 with m = {m}, got j' = {jprime}"
        )));
    }
    Ok(1.0 / (1.0 - q.powi((m - jprime) as i32))
        * (qpoch(q, q, m) / qpoch(q, q, jprime))
        * (qpoch(nu, q, jprime) / qpoch(nu, q, m)))
}

/// Which rate family a [`RateTable`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateKind {
    Psi,
    PsiBullet,
}

/// Materialized jump rates for one particle/site at a given gap, with the
/// total rate precomputed for event-driven simulation.
#[derive(Debug, Clone)]
pub struct RateTable {
    pub kind: RateKind,
    pub q: f64,
    pub nu: f64,
    pub m: Support,
    /// Indexed by jump size minus the support offset (1 for psi, 0 for psi_bullet).
    pub rates: Vec<f64>,
    total: f64,
}

impl RateTable {
    pub fn new(kind: RateKind, q: f64, nu: f64, m: Support) -> Result<Self> {
        check_q(q)?;
        if !(0.0..1.0).contains(&nu) {
            return Err(Error::Domain(format!("rate tables require nu in [0,1), got {nu}")));
        }
        let rates: Vec<f64> = match (kind, m) {
            (RateKind::Psi, Support::Finite(m)) => {
                (1..=m).map(|j| psi_rate(q, nu, j, Support::Finite(m))).collect::<Result<_>>()?
            }
            (RateKind::Psi, Support::Infinite) => {
                // rates nu^{j-1}/(1-q^j); geometric tail in nu
                let mut r = Vec::new();
                let mut j = 1usize;
                loop {
                    let rate = psi_rate(q, nu, j, Support::Infinite)?;
                    r.push(rate);
                    // tail <= nu^j / ((1-q)(1-nu))
                    let tail = powi0(nu, j) / ((1.0 - q) * (1.0 - nu));
                    if tail < 1e-16 {
                        break r;
                    }
                    j += 1;
                }
            }
            (RateKind::PsiBullet, Support::Finite(m)) => {
                (0..m).map(|jp| psi_bullet_rate(q, nu, jp, m)).collect::<Result<_>>()?
            }
            (RateKind::PsiBullet, Support::Infinite) => {
                return Err(Error::Domain("psi_bullet requires a finite support".into()))
            }
        };
        let total = rates.iter().sum();
        Ok(Self { kind, q, nu, m, rates, total })
    }

    pub fn offset(&self) -> usize {
        match self.kind {
            RateKind::Psi => 1,
            RateKind::PsiBullet => 0,
        }
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    /// Jump size sampled proportionally to the rates.
    pub fn sample(&self, rng: &mut Rng) -> usize {
        let mut u = rng.gen::<f64>() * self.total;
        for (i, &r) in self.rates.iter().enumerate() {
            u -= r;
            if u < 0.0 {
                return i + self.offset();
            }
        }
        self.rates.len() - 1 + self.offset()
    }
}

/// The difference operator: `((mu-nu)/(1-nu)) f(n-1) + ((1-mu)/(1-nu)) f(n)`.
pub fn nabla_apply(mu: f64, nu: f64, f: impl Fn(i64) -> f64, n: i64) -> Result<f64> {
    if nu == 1.0 {
        return Err(Error::Domain("nabla_{mu,nu} is undefined at nu = 1".into()));
    }
    Ok((mu - nu) / (1.0 - nu) * f(n - 1) + (1.0 - mu) / (1.0 - nu) * f(n))
}

/// The free-evolution operator of the beta polymer: `p f(n-1) + (1-p) f(n)`.
pub fn nabla_beta_apply(p: f64, f: impl Fn(i64) -> f64, n: i64) -> f64 {
    p * f(n - 1) + (1.0 - p) * f(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::replica_stream;

    #[test]
    fn qpoch_cache_matches_direct() {
        let c = QPochhammerCache::new(0.3, 0.5, 10).unwrap();
        for k in 0..=10 {
            assert!((c.get(k) - qpoch(0.3, 0.5, k)).abs() < 1e-15);
        }
        assert_eq!(c.get(0), 1.0);
        // all values in (0,1] for argument in [0,1)
        assert!(c.values.iter().all(|&v| v > 0.0 && v <= 1.0));
    }

    #[test]
    fn phi_single_point_supports() {
        // m = 0: single-point support
        assert_eq!(phi_weight(0.5, 0.3, 0.1, 0, Support::Finite(0)).unwrap(), 1.0);
        // mu = nu: point mass at 0
        for j in 1..5 {
            let w = phi_weight(0.5, 0.3, 0.3, j, Support::Finite(6)).unwrap();
            assert!(w.abs() < 1e-15, "phi_{{mu=nu}}({j}) = {w}");
        }
    }

    #[test]
    fn phi_hand_evaluated_j0_m1() {
        // j=0, m=1: (mu;q)_1/(nu;q)_1 = (1-mu)/(1-nu)
        let w = phi_weight(0.5, 0.3, 0.1, 0, Support::Finite(1)).unwrap();
        assert!((w - 0.7 / 0.9).abs() < 1e-15);
    }

    #[test]
    fn phi_domain_errors() {
        assert!(phi_weight(0.5, 0.3, 0.1, 3, Support::Finite(2)).is_err());
        assert!(phi_weight(1.5, 0.3, 0.1, 0, Support::Finite(2)).is_err());
        assert!(PhiDist::new(0.5, 0.3, 0.4, Support::Finite(2)).is_err());
        // algebraic mode accepts the same parameters
        assert!(PhiDist::new_algebraic(0.5, 0.3, 0.4, Support::Finite(2)).is_ok());
    }

    #[test]
    fn phi_normalization_finite() {
        for &q in &[0.2, 0.5, 0.8] {
            for &mu in &[0.1, 0.5, 0.95] {
                for &nu in &[-0.3, 0.0, mu * 0.9] {
                    for m in [0, 1, 5, 20, 40] {
                        let d = PhiDist::new(q, mu, nu, Support::Finite(m)).unwrap();
                        let s: f64 = d.weights().iter().sum();
                        assert!((s - 1.0).abs() < 1e-12, "q={q} mu={mu} nu={nu} m={m}: {s}");
                        assert!(d.weights().iter().all(|&w| w >= 0.0));
                    }
                }
            }
        }
    }

    #[test]
    fn phi_normalization_infinite() {
        for &(q, mu, nu) in &[(0.5, 0.3, 0.1), (0.8, 0.9, 0.2), (0.3, 0.6, -0.5)] {
            let d = PhiDist::new(q, mu, nu, Support::Infinite).unwrap();
            let s: f64 = d.weights().iter().sum();
            assert!((s - 1.0).abs() < 1e-12 + d.tail_bound(), "q={q} mu={mu} nu={nu}: {s}");
        }
    }

    #[test]
    fn phi_symmetry_identity() {
        // sum_j q^{jy} phi(j|m) = sum_k q^{km} phi(k|y)
        for &(q, mu, nu) in &[(0.5, 0.3, 0.1), (0.2, 0.9, 0.5), (0.8, 0.6, -0.2)] {
            for m in [0usize, 1, 3, 7] {
                for y in [0usize, 2, 5] {
                    let dm = PhiDist::new(q, mu, nu, Support::Finite(m)).unwrap();
                    let dy = PhiDist::new(q, mu, nu, Support::Finite(y)).unwrap();
                    let lhs: f64 =
                        (0..=m).map(|j| q.powi((j * y) as i32) * dm.weight(j)).sum();
                    let rhs: f64 =
                        (0..=y).map(|k| q.powi((k * m) as i32) * dy.weight(k)).sum();
                    assert!((lhs - rhs).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn phi_symmetry_identity_infinite() {
        // sum_j q^{jy} phi(j|inf) = phi(0|y)
        let (q, mu, nu) = (0.5, 0.4, 0.2);
        let d = PhiDist::new(q, mu, nu, Support::Infinite).unwrap();
        for y in [1usize, 3, 8] {
            let lhs: f64 = d
                .weights()
                .iter()
                .enumerate()
                .map(|(j, &w)| q.powi((j * y) as i32) * w)
                .sum();
            let rhs = phi_weight(q, mu, nu, 0, Support::Finite(y)).unwrap();
            assert!((lhs - rhs).abs() < 1e-13 + d.tail_bound());
        }
    }

    #[test]
    fn phi_extended_agrees_with_plain() {
        let m = 150;
        let plain = PhiDist::new(0.9, 0.7, 0.3, Support::Finite(m)).unwrap();
        let ext = PhiDist::new_extended(0.9, 0.7, 0.3, Support::Finite(m)).unwrap();
        for j in 0..=m {
            let (a, b) = (plain.weight(j), ext.weight(j));
            let scale = a.abs().max(1e-300);
            assert!((a - b).abs() / scale < 1e-9);
        }
        let s: f64 = ext.weights().iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn phi_sample_point_masses() {
        let pm = PhiDist::new(0.5, 0.3, 0.3, Support::Finite(5)).unwrap();
        let m0 = PhiDist::new(0.5, 0.3, 0.1, Support::Finite(0)).unwrap();
        for &u in &[0.0, 0.4, 0.999] {
            assert_eq!(pm.sample(u), 0);
            assert_eq!(m0.sample(u), 0);
        }
    }

    #[test]
    fn phi_sample_frequencies_match_weights() {
        let d = PhiDist::new(0.5, 0.6, 0.2, Support::Finite(6)).unwrap();
        let mut rng = replica_stream(42, 0);
        let n = 200_000usize;
        let mut counts = vec![0usize; 7];
        for _ in 0..n {
            counts[d.sample_rng(&mut rng)] += 1;
        }
        for j in 0..=6 {
            let p = d.weight(j);
            let se = (p * (1.0 - p) / n as f64).sqrt();
            let diff = (counts[j] as f64 / n as f64 - p).abs();
            assert!(diff < 4.0 * se + 1e-9, "j={j}: diff {diff} vs 4se {}", 4.0 * se);
        }
    }

    #[test]
    fn psi_matches_expansion_relation() {
        // psi_{q,nu}(j|m) = nu^{j-1} psi_bullet_{q,nu}(m-j|m)
        for &q in &[0.2, 0.5, 0.9] {
            for &nu in &[0.0, 0.3, 0.7] {
                for m in 1..=8usize {
                    for j in 1..=m {
                        let lhs = psi_rate(q, nu, j, Support::Finite(m)).unwrap();
                        let rhs =
                            powi0(nu, j - 1) * psi_bullet_rate(q, nu, m - j, m).unwrap();
                        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
                    }
                }
            }
        }
    }

    #[test]
    fn psi_bullet_sums_to_m_at_nu_zero() {
        for &q in &[0.2, 0.5, 0.9] {
            for m in 1..=8usize {
                let s: f64 = (0..m).map(|jp| psi_bullet_rate(q, 0.0, jp, m).unwrap()).sum();
                assert!((s - m as f64).abs() < 1e-10, "q={q} m={m}: {s}");
            }
        }
    }

    #[test]
    fn psi_at_q_nu_zero_limits() {
        // limit q -> 0, nu = 0: psi = 1_{j=1}, psi_bullet = 1
        let q = 1e-12;
        for m in 1..=5usize {
            assert!((psi_rate(q, 0.0, 1, Support::Finite(m)).unwrap() - 1.0).abs() < 1e-10);
            for j in 2..=m {
                assert_eq!(psi_rate(q, 0.0, j, Support::Finite(m)).unwrap(), 0.0);
            }
            for jp in 0..m {
                assert!((psi_bullet_rate(q, 0.0, jp, m).unwrap() - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn psi_infinite_support() {
        let (q, nu) = (0.5, 0.3);
        for j in 1..=5usize {
            let r = psi_rate(q, nu, j, Support::Infinite).unwrap();
            assert!((r - powi0(nu, j - 1) / (1.0 - q.powi(j as i32))).abs() < 1e-15);
        }
        assert!(psi_rate(q, nu, 0, Support::Finite(3)).is_err());
        assert!(psi_bullet_rate(q, nu, 3, 3).is_err());
        assert!(psi_bullet_rate(q, nu, 0, 0).is_err());
    }

    #[test]
    fn rate_table_totals() {
        let t = RateTable::new(RateKind::PsiBullet, 0.5, 0.0, Support::Finite(4)).unwrap();
        assert!((t.total() - 4.0).abs() < 1e-10);
        let t = RateTable::new(RateKind::Psi, 0.5, 0.0, Support::Infinite).unwrap();
        assert!((t.total() - 1.0 / (1.0 - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn nabla_basics() {
        // mu = nu leaves f unchanged
        let v = nabla_apply(0.3, 0.3, |n| (n * n) as f64, 4).unwrap();
        assert_eq!(v, 16.0);
        // constant functions are fixed points
        let v = nabla_apply(0.6, 0.2, |_| 3.5, 0).unwrap();
        assert!((v - 3.5).abs() < 1e-15);
        // identity function, hand arithmetic
        let v = nabla_apply(0.6, 0.2, |n| n as f64, 5).unwrap();
        assert!((v - 4.5).abs() < 1e-15);
        assert!(nabla_apply(0.6, 1.0, |n| n as f64, 5).is_err());
        // beta variant
        let v = nabla_beta_apply(0.25, |n| n as f64, 4);
        assert!((v - 3.75).abs() < 1e-15);
    }
}
