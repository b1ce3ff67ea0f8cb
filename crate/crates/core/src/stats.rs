//! Statistical comparison harness: empirical distributions, total-variation
//! distance, chi-square and Kolmogorov-Smirnov two-sample tests, and moment
//! comparisons with Monte Carlo error bars.

use crate::error::{Error, Result};
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use std::collections::{BTreeMap, HashMap};
use std::hash::Hash;

/// Empirical distribution of a sample: binned counts for discrete data or a
/// sorted sample for continuous data.
#[derive(Debug, Clone)]
pub enum EmpiricalDist {
    Discrete { counts: BTreeMap<i64, u64>, n: usize },
    Continuous { sorted: Vec<f64> },
}

impl EmpiricalDist {
    pub fn from_discrete<I: IntoIterator<Item = i64>>(values: I) -> Self {
        let mut counts = BTreeMap::new();
        let mut n = 0usize;
        for v in values {
            *counts.entry(v).or_insert(0u64) += 1;
            n += 1;
        }
        EmpiricalDist::Discrete { counts, n }
    }

    pub fn from_continuous<I: IntoIterator<Item = f64>>(values: I) -> Self {
        let mut sorted: Vec<f64> = values.into_iter().collect();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        EmpiricalDist::Continuous { sorted }
    }

    pub fn len(&self) -> usize {
        match self {
            EmpiricalDist::Discrete { n, .. } => *n,
            EmpiricalDist::Continuous { sorted } => sorted.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Counts sum to the sample size (discrete case).
    pub fn check_invariants(&self) -> bool {
        match self {
            EmpiricalDist::Discrete { counts, n } => {
                counts.values().sum::<u64>() as usize == *n
            }
            EmpiricalDist::Continuous { sorted } => {
                sorted.windows(2).all(|w| w[0] <= w[1])
            }
        }
    }
}

/// Outcome of one statistical comparison, serializable for report emission.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub test: String,
    pub statistic: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z_score: Option<f64>,
    pub threshold: f64,
    pub pass: bool,
    pub n_a: usize,
    pub n_b: usize,
    pub leak_allowance: f64,
}

/// Total-variation distance between two probability mass assignments on a
/// countable support: half the sum of absolute differences.
pub fn tv_distance<S: Eq + Hash + Clone>(a: &HashMap<S, f64>, b: &HashMap<S, f64>) -> f64 {
    let mut sum = 0.0;
    for (s, &pa) in a {
        sum += (pa - b.get(s).copied().unwrap_or(0.0)).abs();
    }
    for (s, &pb) in b {
        if !a.contains_key(s) {
            sum += pb.abs();
        }
    }
    sum / 2.0
}

/// Per-test significance level under a Bonferroni correction for `m`
/// simultaneous comparisons.
pub fn bonferroni(alpha: f64, m: usize) -> f64 {
    alpha / m.max(1) as f64
}

/// Two-sample chi-square test on discrete samples; adjacent bins are pooled
/// until each pooled bin holds at least `min_bin` combined observations.
pub fn chisq_two_sample(
    a: &EmpiricalDist,
    b: &EmpiricalDist,
    min_bin: u64,
    alpha: f64,
) -> Result<ComparisonReport> {
    let (ca, na) = match a {
        EmpiricalDist::Discrete { counts, n } => (counts, *n),
        _ => return Err(Error::Validation("chi-square needs discrete samples".into())),
    };
    let (cb, nb) = match b {
        EmpiricalDist::Discrete { counts, n } => (counts, *n),
        _ => return Err(Error::Validation("chi-square needs discrete samples".into())),
    };
    if na == 0 || nb == 0 {
        return Err(Error::Validation("empty sample".into()));
    }
    // union of supports in order, then pool adjacent bins
    let mut keys: Vec<i64> = ca.keys().chain(cb.keys()).copied().collect();
    keys.sort_unstable();
    keys.dedup();
    let mut bins: Vec<(u64, u64)> = Vec::new();
    let (mut acc_a, mut acc_b) = (0u64, 0u64);
    for k in keys {
        acc_a += ca.get(&k).copied().unwrap_or(0);
        acc_b += cb.get(&k).copied().unwrap_or(0);
        if acc_a + acc_b >= min_bin {
            bins.push((acc_a, acc_b));
            acc_a = 0;
            acc_b = 0;
        }
    }
    if acc_a + acc_b > 0 {
        if let Some(last) = bins.last_mut() {
            last.0 += acc_a;
            last.1 += acc_b;
        }
    }
    if bins.len() < 2 {
        return Err(Error::Validation(format!(
            "only {} bin(s) survive pooling at min_bin = {min_bin}",
            bins.len()
        )));
    }
    let k1 = (nb as f64 / na as f64).sqrt();
    let k2 = 1.0 / k1;
    let mut stat = 0.0;
    for &(x, y) in &bins {
        let (x, y) = (x as f64, y as f64);
        let d = k1 * x - k2 * y;
        stat += d * d / (x + y);
    }
    let dof = (bins.len() - 1) as f64;
    let p = 1.0
        - ChiSquared::new(dof)
            .map_err(|e| Error::Domain(format!("chi-square dof {dof}: {e}")))?
            .cdf(stat);
    Ok(ComparisonReport {
        test: format!("chisq_two_sample(dof={dof})"),
        statistic: stat,
        p_value: Some(p),
        z_score: None,
        threshold: alpha,
        pass: p >= alpha,
        n_a: na,
        n_b: nb,
        leak_allowance: 0.0,
    })
}

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value.
pub fn ks_two_sample(a: &EmpiricalDist, b: &EmpiricalDist, alpha: f64) -> Result<ComparisonReport> {
    let xs = match a {
        EmpiricalDist::Continuous { sorted } => sorted,
        _ => return Err(Error::Validation("KS needs continuous samples".into())),
    };
    let ys = match b {
        EmpiricalDist::Continuous { sorted } => sorted,
        _ => return Err(Error::Validation("KS needs continuous samples".into())),
    };
    let (na, nb) = (xs.len(), ys.len());
    if na == 0 || nb == 0 {
        return Err(Error::Validation("empty sample".into()));
    }
    // sweep the merged order, tracking the gap between the two empirical CDFs
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < na || j < nb {
        let t = if j >= nb || (i < na && xs[i] <= ys[j]) {
            xs[i]
        } else {
            ys[j]
        };
        while i < na && xs[i] <= t {
            i += 1;
        }
        while j < nb && ys[j] <= t {
            j += 1;
        }
        let gap = (i as f64 / na as f64 - j as f64 / nb as f64).abs();
        if gap > d {
            d = gap;
        }
    }
    let n_eff = (na as f64 * nb as f64) / (na + nb) as f64;
    let lambda = (n_eff.sqrt() + 0.12 + 0.11 / n_eff.sqrt()) * d;
    let p = kolmogorov_tail(lambda);
    Ok(ComparisonReport {
        test: "ks_two_sample".into(),
        statistic: d,
        p_value: Some(p),
        z_score: None,
        threshold: alpha,
        pass: p >= alpha,
        n_a: na,
        n_b: nb,
        leak_allowance: 0.0,
    })
}

/// Tail of the Kolmogorov distribution, `Q(lambda) = 2 sum (-1)^{k-1}
/// exp(-2 k^2 lambda^2)`.
fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 1e-8 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64) * (k as f64) * lambda * lambda).exp();
        sum += sign * term;
        sign = -sign;
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Compare a sample mean against an exact value: passes iff the mean lies
/// within `z` standard errors of the exact value. An optional truncation
/// leak widens the acceptance band.
pub fn moment_ci(sample: &[f64], exact: f64, z: f64, leak_allowance: f64) -> ComparisonReport {
    let n = sample.len();
    let mean = sample.iter().sum::<f64>() / n as f64;
    let var = sample.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n as f64 - 1.0);
    let se = (var / n as f64).sqrt();
    // absolute epsilon guards degenerate samples (zero variance) against
    // pure floating-point fuzz in the exact value
    let eps = 1e-12 * exact.abs().max(1.0);
    let z_score = if se > 0.0 {
        (mean - exact) / se
    } else if (mean - exact).abs() <= leak_allowance + eps {
        0.0
    } else {
        f64::INFINITY
    };
    let pass = (mean - exact).abs() <= z * se + leak_allowance + eps;
    ComparisonReport {
        test: "moment_ci".into(),
        statistic: mean,
        p_value: None,
        z_score: Some(z_score),
        threshold: z,
        pass,
        n_a: n,
        n_b: 0,
        leak_allowance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::replica_stream;
    use rand::Rng;

    #[test]
    fn tv_distance_basics() {
        let mut a = HashMap::new();
        a.insert(0u32, 1.0);
        let same = a.clone();
        assert_eq!(tv_distance(&a, &same), 0.0);
        let mut b = HashMap::new();
        b.insert(0u32, 0.5);
        b.insert(1u32, 0.5);
        assert!((tv_distance(&a, &b) - 0.5).abs() < 1e-15);
        let mut c = HashMap::new();
        c.insert(5u32, 1.0);
        assert!((tv_distance(&a, &c) - 1.0).abs() < 1e-15);
    }

    fn geometric<R: Rng>(p: f64, rng: &mut R) -> i64 {
        let mut k = 0i64;
        while rng.gen::<f64>() >= p {
            k += 1;
        }
        k
    }

    #[test]
    fn chisq_identical_sample_is_zero() {
        let mut rng = replica_stream(1, 0);
        let vals: Vec<i64> = (0..10_000).map(|_| geometric(0.5, &mut rng)).collect();
        let a = EmpiricalDist::from_discrete(vals.clone());
        let b = EmpiricalDist::from_discrete(vals);
        assert!(a.check_invariants());
        let r = chisq_two_sample(&a, &b, 10, 1e-3).unwrap();
        assert!(r.statistic.abs() < 1e-12);
        assert!(r.pass);
    }

    #[test]
    fn chisq_rejects_different_laws() {
        let mut rng = replica_stream(2, 0);
        let a = EmpiricalDist::from_discrete(
            (0..100_000).map(|_| geometric(0.5, &mut rng)).collect::<Vec<_>>(),
        );
        let b = EmpiricalDist::from_discrete(
            (0..100_000).map(|_| geometric(0.6, &mut rng)).collect::<Vec<_>>(),
        );
        let r = chisq_two_sample(&a, &b, 10, 1e-3).unwrap();
        assert!(!r.pass, "p = {:?}", r.p_value);
    }

    #[test]
    fn chisq_insufficient_bins_errors() {
        let a = EmpiricalDist::from_discrete(vec![0i64; 50]);
        let b = EmpiricalDist::from_discrete(vec![0i64; 50]);
        assert!(chisq_two_sample(&a, &b, 10, 1e-3).is_err());
    }

    #[test]
    fn chisq_calibration_under_null() {
        // rejection frequency at alpha = 0.05 over 100 repetitions should be
        // within 2 sqrt(alpha (1-alpha) / 100) of alpha
        let mut rejections = 0;
        for rep in 0..100u64 {
            let mut rng = replica_stream(100, rep);
            let a = EmpiricalDist::from_discrete(
                (0..20_000).map(|_| geometric(0.4, &mut rng)).collect::<Vec<_>>(),
            );
            let b = EmpiricalDist::from_discrete(
                (0..20_000).map(|_| geometric(0.4, &mut rng)).collect::<Vec<_>>(),
            );
            if !chisq_two_sample(&a, &b, 10, 0.05).unwrap().pass {
                rejections += 1;
            }
        }
        let band = 2.0 * (0.05f64 * 0.95 / 100.0).sqrt();
        assert!(
            (rejections as f64 / 100.0 - 0.05).abs() <= band,
            "{rejections} rejections in 100"
        );
    }

    #[test]
    fn ks_identical_sample_is_zero() {
        let mut rng = replica_stream(3, 0);
        let vals: Vec<f64> = (0..1000).map(|_| rng.gen::<f64>()).collect();
        let a = EmpiricalDist::from_continuous(vals.clone());
        let b = EmpiricalDist::from_continuous(vals);
        let r = ks_two_sample(&a, &b, 1e-3).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!(r.pass);
    }

    #[test]
    fn ks_calibration_under_null() {
        let mut rejections = 0;
        for rep in 0..100u64 {
            let mut rng = replica_stream(200, rep);
            let a = EmpiricalDist::from_continuous(
                (0..5_000).map(|_| rng.gen::<f64>()).collect::<Vec<_>>(),
            );
            let b = EmpiricalDist::from_continuous(
                (0..5_000).map(|_| rng.gen::<f64>()).collect::<Vec<_>>(),
            );
            if !ks_two_sample(&a, &b, 0.05).unwrap().pass {
                rejections += 1;
            }
        }
        let band = 2.0 * (0.05f64 * 0.95 / 100.0).sqrt();
        assert!(
            (rejections as f64 / 100.0 - 0.05).abs() <= band,
            "{rejections} rejections in 100"
        );
    }

    #[test]
    fn ks_detects_shifted_law() {
        let mut rng = replica_stream(4, 0);
        let a = EmpiricalDist::from_continuous(
            (0..50_000).map(|_| rng.gen::<f64>()).collect::<Vec<_>>(),
        );
        let b = EmpiricalDist::from_continuous(
            (0..50_000).map(|_| rng.gen::<f64>() + 0.05).collect::<Vec<_>>(),
        );
        assert!(!ks_two_sample(&a, &b, 1e-3).unwrap().pass);
    }

    #[test]
    fn moment_ci_behaviour() {
        let mut rng = replica_stream(5, 0);
        // Poisson(2) via inversion of exponential gaps
        let sample: Vec<f64> = (0..100_000)
            .map(|_| {
                let mut k = 0.0;
                let mut acc = -(rng.gen::<f64>().max(1e-300)).ln();
                while acc < 2.0 {
                    k += 1.0;
                    acc += -(rng.gen::<f64>().max(1e-300)).ln();
                }
                k
            })
            .collect();
        let r = moment_ci(&sample, 2.0, 4.0, 0.0);
        assert!(r.pass, "z = {:?}", r.z_score);
        // an exact value 10 SD away must fail
        let se = (2.0f64 / 100_000.0).sqrt();
        let r2 = moment_ci(&sample, 2.0 + 10.0 * se, 4.0, 0.0);
        assert!(!r2.pass);
    }

    #[test]
    fn report_serializes_to_schema() {
        let r = moment_ci(&[1.0, 2.0, 3.0], 2.0, 4.0, 0.0);
        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(json["test"], "moment_ci");
        assert!(json.get("p_value").is_none());
        assert!(json["z_score"].is_number());
        assert_eq!(json["n_a"], 3);
        assert_eq!(json["pass"], true);
    }

    #[test]
    fn bonferroni_divides() {
        assert_eq!(bonferroni(1e-3, 5), 2e-4);
        assert_eq!(bonferroni(1e-3, 0), 1e-3);
    }
}
