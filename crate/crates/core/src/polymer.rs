//! Multiparameter beta polymer on the strict-weak lattice: environment
//! sampling, the two-term partition-function recursion, swap operators,
//! modified-lattice partition functions with shifted parameters, and the
//! zero-temperature first-passage percolation analogue.

use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma};

/// Parameters of the beta polymer environment: level parameters `nus[n-1]`
/// (1-based levels) and a global `gamma`, with `nu_n > gamma > 0` and no two
/// level parameters differing by an integer.
#[derive(Debug, Clone)]
pub struct BetaParams {
    nus: Vec<f64>,
    gamma: f64,
}

impl BetaParams {
    pub fn new(nus: Vec<f64>, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(Error::Validation(format!("gamma = {gamma} must be > 0")));
        }
        if nus.is_empty() {
            return Err(Error::Validation("empty level-parameter list".into()));
        }
        for (i, &nu) in nus.iter().enumerate() {
            if !(nu > gamma) {
                return Err(Error::Validation(format!(
                    "nu_{} = {nu} must exceed gamma = {gamma}",
                    i + 1
                )));
            }
        }
        for i in 0..nus.len() {
            for j in 0..i {
                let d = nus[i] - nus[j];
                if (d - d.round()).abs() <= 1e-9 {
                    return Err(Error::Validation(format!(
                        "nu_{} - nu_{} = {d} is within 1e-9 of an integer",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(Self { nus, gamma })
    }

    /// Level parameter for 1-based level `n`.
    pub fn nu(&self, n: usize) -> f64 {
        self.nus[n - 1]
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn levels(&self) -> usize {
        self.nus.len()
    }

    /// Require `nu_1 < nu_2 < ... < nu_upto` (needed by swap and shift ops).
    pub fn require_increasing(&self, upto: usize) -> Result<()> {
        if upto > self.nus.len() {
            return Err(Error::Validation(format!(
                "need {upto} level parameters, have {}",
                self.nus.len()
            )));
        }
        for n in 1..upto {
            if !(self.nus[n - 1] < self.nus[n]) {
                return Err(Error::ParameterOrder(format!(
                    "nu_{} = {} >= nu_{} = {}",
                    n,
                    self.nus[n - 1],
                    n + 1,
                    self.nus[n]
                )));
            }
        }
        Ok(())
    }
}

/// Draw `(B, 1-B)` with `B ~ Beta(a, b)` via the gamma-ratio construction,
/// carried out in log space so that very small shape parameters (which send
/// the gamma variates below the smallest positive double) stay usable.
pub fn beta_pair<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> Result<(f64, f64)> {
    let (lx, ly) = (ln_gamma_sample(a, rng)?, ln_gamma_sample(b, rng)?);
    let m = lx.max(ly);
    let lse = m + ((lx - m).exp() + (ly - m).exp()).ln();
    // return an exactly complementary pair so convex combinations of equal
    // endpoints reproduce the endpoint to the last bit
    if lx >= ly {
        let ob = (ly - lse).exp();
        Ok((1.0 - ob, ob))
    } else {
        let b = (lx - lse).exp();
        Ok((b, 1.0 - b))
    }
}

/// Draw `(log B, log(1-B))` with `B ~ Beta(a, b)`, exact in log space.
pub fn beta_log_pair<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> Result<(f64, f64)> {
    let (lx, ly) = (ln_gamma_sample(a, rng)?, ln_gamma_sample(b, rng)?);
    let m = lx.max(ly);
    let lse = m + ((lx - m).exp() + (ly - m).exp()).ln();
    Ok((lx - lse, ly - lse))
}

/// Log of a Gamma(shape, 1) sample. For shape >= 1 this is the log of a
/// direct rejection-sampled draw; for shape < 1 it uses the boost
/// Gamma(a) =d Gamma(a+1) * U^{1/a} in log space, which never underflows.
fn ln_gamma_sample<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> Result<f64> {
    if !(shape > 0.0) {
        return Err(Error::Domain(format!("gamma shape {shape} must be > 0")));
    }
    if shape >= 1.0 {
        let g: f64 = Gamma::new(shape, 1.0)
            .map_err(|e| Error::Domain(format!("gamma sampler: {e}")))?
            .sample(rng);
        Ok(g.ln())
    } else {
        let g: f64 = Gamma::new(shape + 1.0, 1.0)
            .map_err(|e| Error::Domain(format!("gamma sampler: {e}")))?
            .sample(rng);
        let u: f64 = loop {
            let u = rng.gen::<f64>();
            if u > 0.0 {
                break u;
            }
        };
        Ok(g.ln() + u.ln() / shape)
    }
}

/// Partition functions `Z(t, n)` for `t = 0..=t_max`, `n = 0..=n_max`, with
/// the conventions `Z(t, 0) = 0` and `Z(0, n) = 1` for `n >= 1`.
#[derive(Debug, Clone)]
pub struct PolymerSheet {
    z: Vec<Vec<f64>>,
}

impl PolymerSheet {
    pub fn t_max(&self) -> usize {
        self.z.len() - 1
    }

    pub fn n_max(&self) -> usize {
        self.z[0].len() - 1
    }

    pub fn value(&self, t: usize, n: usize) -> f64 {
        self.z[t][n]
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.z[t]
    }

    /// Bounds `0 <= Z <= 1`, boundary conventions, `Z(t,n) = 1` above the
    /// diagonal, and monotonicity of each row in the level index.
    pub fn check_invariants(&self) -> bool {
        for (t, row) in self.z.iter().enumerate() {
            if row[0] != 0.0 {
                return false;
            }
            for (n, &v) in row.iter().enumerate().skip(1) {
                if !(0.0..=1.0 + 1e-12).contains(&v) {
                    return false;
                }
                if (t == 0 || n > t) && (v - 1.0).abs() > 1e-12 {
                    return false;
                }
                if n >= 2 && row[n] < row[n - 1] - 1e-12 {
                    return false;
                }
            }
        }
        true
    }
}

/// Fill a polymer sheet with a fresh environment: independent
/// `B_{t,n} ~ Beta(nu_n - gamma, gamma)` and the recursion
/// `Z(t,n) = B_{t,n} Z(t-1,n) + (1 - B_{t,n}) Z(t-1,n-1)`.
pub fn polymer_fill<R: Rng + ?Sized>(
    t_max: usize,
    n_max: usize,
    params: &BetaParams,
    rng: &mut R,
) -> Result<PolymerSheet> {
    if n_max == 0 {
        return Err(Error::Validation("n_max must be >= 1".into()));
    }
    if params.levels() < n_max {
        return Err(Error::Validation(format!(
            "need {n_max} level parameters, have {}",
            params.levels()
        )));
    }
    let mut z = vec![vec![0.0; n_max + 1]; t_max + 1];
    for n in 1..=n_max {
        z[0][n] = 1.0;
    }
    for t in 1..=t_max {
        for n in 1..=n_max {
            let (b, ob) = beta_pair(params.nu(n) - params.gamma, params.gamma, rng)?;
            z[t][n] = b * z[t - 1][n] + ob * z[t - 1][n - 1];
        }
    }
    Ok(PolymerSheet { z })
}

/// Swap operator at level `n`: draw `B~ ~ Beta(nu_{n+1} - nu_n, nu_n)`
/// independent of the environment and return the replacement value
/// `B~ Z(t, n+1) + (1 - B~) Z(t, n)`; all other entries are unchanged.
pub fn polymer_swap<R: Rng + ?Sized>(
    sheet: &PolymerSheet,
    t: usize,
    n: usize,
    params: &BetaParams,
    rng: &mut R,
) -> Result<f64> {
    if n + 1 > sheet.n_max() {
        return Err(Error::Validation(format!(
            "swap at level {n} needs level {} in the sheet",
            n + 1
        )));
    }
    if params.levels() < n + 1 {
        return Err(Error::Validation(format!(
            "need {} level parameters, have {}",
            n + 1,
            params.levels()
        )));
    }
    if !(params.nu(n) < params.nu(n + 1)) {
        return Err(Error::ParameterOrder(format!(
            "nu_{n} = {} >= nu_{} = {}",
            params.nu(n),
            n + 1,
            params.nu(n + 1)
        )));
    }
    let (b, ob) = beta_pair(params.nu(n + 1) - params.nu(n), params.nu(n), rng)?;
    Ok(b * sheet.value(t, n + 1) + ob * sheet.value(t, n))
}

/// Partition functions `Z^(s)(t, n)` for `n = 1..=n_max` on the lattice with
/// `s` extra layers appended after column `t`: layer `s'` uses independent
/// `B^(s')_n ~ Beta(nu_{n+s'} - nu_{s'}, nu_{s'})`, with the diagonal edge
/// from level `n+1` carrying `B` and the horizontal edge carrying `1 - B`.
pub fn modified_lattice_fill<R: Rng + ?Sized>(
    t: usize,
    s: usize,
    n_max: usize,
    params: &BetaParams,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if s > 0 {
        params.require_increasing(n_max + s)?;
    }
    let base = polymer_fill(t, n_max + s, params, rng)?;
    // cur[i] = current-layer value at level i+1
    let mut cur: Vec<f64> = base.row(t)[1..].to_vec();
    for sp in 1..=s {
        let width = cur.len() - 1;
        let mut next = Vec::with_capacity(width);
        for n in 1..=width {
            let (b, ob) =
                beta_pair(params.nu(n + sp) - params.nu(sp), params.nu(sp), rng)?;
            next.push(b * cur[n] + ob * cur[n - 1]);
        }
        cur = next;
    }
    Ok(cur)
}

/// Draw the zero-temperature weight pair for a beta edge family with shapes
/// `(eps*alpha, eps*beta)` as `eps -> 0`: a shared Bernoulli `xi` with
/// `P(xi = 1) = beta/(alpha + beta)` and independent exponentials, giving
/// `(xi E_alpha, (1 - xi) E_beta)` for the (`B`, `1 - B`) edges respectively.
pub fn zero_temp_pair<R: Rng + ?Sized>(alpha: f64, beta: f64, rng: &mut R) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(Error::Domain(format!(
            "exponential rates must be positive, got ({alpha}, {beta})"
        )));
    }
    let xi = rng.gen::<f64>() < beta / (alpha + beta);
    if xi {
        let e: f64 = Exp::new(alpha)
            .map_err(|e| Error::Domain(format!("exp sampler: {e}")))?
            .sample(rng);
        Ok((e, 0.0))
    } else {
        let e: f64 = Exp::new(beta)
            .map_err(|e| Error::Domain(format!("exp sampler: {e}")))?
            .sample(rng);
        Ok((0.0, e))
    }
}

/// First-passage times `F(t, n)` for `t = 0..=t_max`, `n = 0..=n_max`, with
/// `F(0, n) = 0` for `n >= 1` and `F(t, 0) = +inf`.
#[derive(Debug, Clone)]
pub struct FppSheet {
    f: Vec<Vec<f64>>,
}

impl FppSheet {
    pub fn t_max(&self) -> usize {
        self.f.len() - 1
    }

    pub fn n_max(&self) -> usize {
        self.f[0].len() - 1
    }

    pub fn value(&self, t: usize, n: usize) -> f64 {
        self.f[t][n]
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.f[t]
    }

    /// Nonnegativity, boundary conventions, zero above the diagonal, and
    /// each row nonincreasing in the level index.
    pub fn check_invariants(&self) -> bool {
        for (t, row) in self.f.iter().enumerate() {
            if row[0] != f64::INFINITY {
                return false;
            }
            for (n, &v) in row.iter().enumerate().skip(1) {
                if !(v >= 0.0) {
                    return false;
                }
                if n > t && v != 0.0 {
                    return false;
                }
                if n >= 2 && row[n] > row[n - 1] + 1e-12 {
                    return false;
                }
            }
        }
        true
    }
}

/// Fill the zero-temperature sheet: per lattice cell `(t, n)` draw the
/// weight pair for the bulk family `(alpha, beta) = (nu_n - gamma, gamma)`
/// and apply the min-plus recursion
/// `F(t,n) = min(h + F(t-1,n), d + F(t-1,n-1))`, where `h` sits on the
/// horizontal edge (the positive-temperature `B` edge) and `d` on the
/// diagonal edge (the `1 - B` edge). Implemented independently of the
/// polymer fill so the two can cross-check each other.
pub fn fpp_fill<R: Rng + ?Sized>(
    t_max: usize,
    n_max: usize,
    params: &BetaParams,
    rng: &mut R,
) -> Result<FppSheet> {
    if n_max == 0 {
        return Err(Error::Validation("n_max must be >= 1".into()));
    }
    if params.levels() < n_max {
        return Err(Error::Validation(format!(
            "need {n_max} level parameters, have {}",
            params.levels()
        )));
    }
    let mut f = vec![vec![0.0; n_max + 1]; t_max + 1];
    for row in f.iter_mut() {
        row[0] = f64::INFINITY;
    }
    for t in 1..=t_max {
        for n in 1..=n_max {
            let (h, d) = zero_temp_pair(params.nu(n) - params.gamma, params.gamma, rng)?;
            f[t][n] = (h + f[t - 1][n]).min(d + f[t - 1][n - 1]);
        }
    }
    Ok(FppSheet { f })
}

/// First-passage times `F^(s)(t, n)` for `n = 1..=n_max` on the modified
/// lattice: `s` extra min-plus layers with weight families
/// `(nu_{n+s'} - nu_{s'}, nu_{s'})`, diagonal edge carrying the `B`-side
/// weight and horizontal edge the `1 - B`-side weight.
pub fn fpp_fill_modified<R: Rng + ?Sized>(
    t: usize,
    s: usize,
    n_max: usize,
    params: &BetaParams,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if s > 0 {
        params.require_increasing(n_max + s)?;
    }
    let base = fpp_fill(t, n_max + s, params, rng)?;
    let mut cur: Vec<f64> = base.row(t)[1..].to_vec();
    for sp in 1..=s {
        let width = cur.len() - 1;
        let mut next = Vec::with_capacity(width);
        for n in 1..=width {
            let (diag, horiz) =
                zero_temp_pair(params.nu(n + sp) - params.nu(sp), params.nu(sp), rng)?;
            next.push((diag + cur[n]).min(horiz + cur[n - 1]));
        }
        cur = next;
    }
    Ok(cur)
}
