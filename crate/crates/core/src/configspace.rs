//! Particle configurations on the integers and stack configurations on the
//! nonnegative integers, with the duality functional linking them.
//!
//! A particle configuration is densely packed far to the left and empty far
//! to the right; only the prefix of particles that deviate from the step
//! configuration (`x_k = -k`) is stored.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;

/// A configuration from `Conf_fin(Z)`: particles at strictly decreasing
/// positions `x_1 > x_2 > ...` with `x_k = -k` for all `k` beyond the stored
/// head. Indices are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParticleConfig {
    head: Vec<i64>,
}

impl ParticleConfig {
    /// The step configuration: `x_k = -k` for every `k`.
    pub fn step() -> Self {
        Self { head: Vec::new() }
    }

    /// Build from explicit deviating positions `x_1 > x_2 > ... > x_N`.
    pub fn from_head(head: Vec<i64>) -> Result<Self> {
        for w in head.windows(2) {
            if w[0] <= w[1] {
                return Err(Error::Validation(format!(
                    "positions must be strictly decreasing, got {} <= {}",
                    w[0], w[1]
                )));
            }
        }
        if let Some((k, &x)) = head.iter().enumerate().find(|&(k, &x)| x + (k as i64) + 1 < 0) {
            return Err(Error::Validation(format!(
                "x_{} = {} is left of its step position -{}",
                k + 1,
                x,
                k + 1
            )));
        }
        let mut c = Self { head };
        c.normalize();
        Ok(c)
    }

    /// Drop trailing head entries that sit at their step positions.
    fn normalize(&mut self) {
        while let Some(&last) = self.head.last() {
            if last == -(self.head.len() as i64) {
                self.head.pop();
            } else {
                break;
            }
        }
    }

    /// Position of particle `n` (1-based).
    pub fn position(&self, n: usize) -> i64 {
        assert!(n >= 1, "particle indices are 1-based");
        if n <= self.head.len() {
            self.head[n - 1]
        } else {
            -(n as i64)
        }
    }

    /// First index such that all particles from it on are at step positions.
    pub fn tail_start(&self) -> usize {
        self.head.len() + 1
    }

    /// The stored deviating prefix.
    pub fn head(&self) -> &[i64] {
        &self.head
    }

    /// Gap in front of particle `n`: `x_{n-1} - x_n - 1`, infinite for `n = 1`.
    pub fn gap(&self, n: usize) -> Option<usize> {
        assert!(n >= 1);
        if n == 1 {
            None
        } else {
            Some((self.position(n - 1) - self.position(n) - 1) as usize)
        }
    }

    /// Finite gaps `g_2, g_3, ..., g_len` (the convention `g_1 = infinity` is
    /// kept implicit).
    pub fn gaps(&self, len: usize) -> Vec<usize> {
        (2..=len + 1).map(|n| self.gap(n).unwrap()).collect()
    }

    /// Move particle `n` to `new_pos`, checking the ordering constraint
    /// `x_{n+1} < new_pos < x_{n-1}` (no upper constraint for `n = 1`).
    pub fn with_move(&self, n: usize, new_pos: i64) -> Result<Self> {
        if new_pos <= self.position(n + 1) {
            return Err(Error::Validation(format!(
                "move of particle {n} to {new_pos} collides with x_{} = {}",
                n + 1,
                self.position(n + 1)
            )));
        }
        if n > 1 && new_pos >= self.position(n - 1) {
            return Err(Error::Validation(format!(
                "move of particle {n} to {new_pos} collides with x_{} = {}",
                n - 1,
                self.position(n - 1)
            )));
        }
        let mut head = self.head.clone();
        if n > head.len() {
            head.extend((head.len() + 1..=n).map(|k| -(k as i64)));
        }
        head[n - 1] = new_pos;
        let mut c = Self { head };
        c.normalize();
        Ok(c)
    }

    /// Runtime check of the `Conf_fin(Z)` invariants; used in debug asserts.
    pub fn check_invariants(&self) -> bool {
        self.head.windows(2).all(|w| w[0] > w[1])
            && self.head.iter().enumerate().all(|(k, &x)| x + (k as i64) + 1 >= 0)
            && self.head.last().map_or(true, |&x| x != -(self.head.len() as i64))
    }

    /// Text encoding `N;x_1,x_2,...,x_N` (the step configuration is `0;`).
    pub fn encode(&self) -> String {
        let coords: Vec<String> = self.head.iter().map(|x| x.to_string()).collect();
        format!("{};{}", self.head.len(), coords.join(","))
    }

    pub fn decode(s: &str) -> Result<Self> {
        let (n, rest) = s
            .split_once(';')
            .ok_or_else(|| Error::Parse(format!("missing ';' in configuration {s:?}")))?;
        let n: usize =
            n.trim().parse().map_err(|e| Error::Parse(format!("bad particle count: {e}")))?;
        let head: Vec<i64> = if rest.trim().is_empty() {
            Vec::new()
        } else {
            rest.split(',')
                .map(|t| t.trim().parse().map_err(|e| Error::Parse(format!("bad position: {e}"))))
                .collect::<Result<_>>()?
        };
        if head.len() != n {
            return Err(Error::Parse(format!("expected {n} positions, found {}", head.len())));
        }
        Self::from_head(head)
    }
}

impl fmt::Display for ParticleConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.encode())
    }
}

/// A weakly decreasing tuple `n_1 >= ... >= n_l >= 0` of sites in `Z_{>=0}`:
/// an `l`-particle stack configuration.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BosonConfig {
    parts: Vec<u32>,
}

impl BosonConfig {
    pub fn new(parts: Vec<u32>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::Validation("BosonConfig needs at least one part".into()));
        }
        if parts.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Validation(format!("parts must be weakly decreasing: {parts:?}")));
        }
        Ok(Self { parts })
    }

    /// Sort-and-wrap constructor for unordered site lists.
    pub fn from_unsorted(mut parts: Vec<u32>) -> Result<Self> {
        parts.sort_unstable_by(|a, b| b.cmp(a));
        Self::new(parts)
    }

    pub fn parts(&self) -> &[u32] {
        &self.parts
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// Lowest occupied site.
    pub fn min_part(&self) -> u32 {
        *self.parts.last().unwrap()
    }

    pub fn max_part(&self) -> u32 {
        self.parts[0]
    }

    /// Comma-separated text encoding.
    pub fn encode(&self) -> String {
        self.parts.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(",")
    }

    pub fn decode(s: &str) -> Result<Self> {
        let parts: Vec<u32> = s
            .split(',')
            .map(|t| t.trim().parse().map_err(|e| Error::Parse(format!("bad part: {e}"))))
            .collect::<Result<_>>()?;
        Self::new(parts)
    }
}

impl fmt::Display for BosonConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.encode())
    }
}

/// The duality functional `H(x, n) = prod_i q^{x_{n_i} + n_i}` when the lowest
/// part is positive, and `0` otherwise.
pub fn duality_h(x: &ParticleConfig, n: &BosonConfig, q: f64) -> f64 {
    if n.min_part() == 0 {
        return 0.0;
    }
    n.parts()
        .iter()
        .map(|&ni| {
            let exp = x.position(ni as usize) + ni as i64;
            q.powi(exp as i32)
        })
        .product()
}
