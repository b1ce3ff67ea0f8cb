//! Product-quadrature evaluation of the nested-contour moment formulas:
//! q-moments of the discrete and continuous particle chains and joint
//! moments of the beta polymer. Contours are circles centered on the real
//! axis, so integrands come in conjugate pairs and outputs are real up to
//! roundoff.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::qhahn_sim::QParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum NestingKind {
    /// circle A encircles q * circle B for A < B; 0 and 1 outside
    QNested,
    /// circle A encircles circle B shifted by +1 for A < B; 0 outside
    ShiftNested,
}

/// A family of nested circles |z - center| = radii[i], radii decreasing.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ContourPlan {
    pub center: f64,
    pub radii: Vec<f64>,
    pub nodes: usize,
    pub kind: NestingKind,
}

impl ContourPlan {
    pub fn ell(&self) -> usize {
        self.radii.len()
    }

    pub fn with_nodes(mut self, nodes: usize) -> Self {
        self.nodes = nodes;
        self
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut p = self.clone();
        for r in &mut p.radii {
            *r *= factor;
        }
        p
    }

    /// Re-checks the geometric constraints (used after perturbing radii).
    pub fn check(&self, q: f64, poles: &[f64]) -> Result<()> {
        let c = self.center;
        let ell = self.ell();
        let inner = self.radii[ell - 1];
        for &p in poles {
            if (p - c).abs() >= inner {
                return Err(Error::InfeasibleContour(format!(
                    "pole at {p} not inside the innermost circle (center {c}, radius {inner})"
                )));
            }
        }
        for i in 0..ell - 1 {
            if self.radii[i] <= self.radii[i + 1] {
                return Err(Error::InfeasibleContour(
                    "radii are not strictly decreasing".into(),
                ));
            }
        }
        match self.kind {
            NestingKind::QNested => {
                if self.radii[0] >= c.min(1.0 - c) {
                    return Err(Error::InfeasibleContour(format!(
                        "outer radius {} does not keep 0 and 1 outside (center {c})",
                        self.radii[0]
                    )));
                }
                for i in 0..ell - 1 {
                    // circle i must contain q * circle (i+1)
                    if (1.0 - q) * c + q * self.radii[i + 1] >= self.radii[i] {
                        return Err(Error::InfeasibleContour(format!(
                            "circle {} does not contain q * circle {}",
                            i + 1,
                            i + 2
                        )));
                    }
                }
            }
            NestingKind::ShiftNested => {
                if self.radii[0] >= c {
                    return Err(Error::InfeasibleContour(format!(
                        "outer radius {} does not keep 0 outside (center {c})",
                        self.radii[0]
                    )));
                }
                for i in 0..ell - 1 {
                    if self.radii[i + 1] + 1.0 >= self.radii[i] {
                        return Err(Error::InfeasibleContour(format!(
                            "circle {} does not contain circle {} shifted by 1",
                            i + 1,
                            i + 2
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

fn default_nodes(ell: usize) -> usize {
    if ell <= 3 {
        256
    } else {
        64
    }
}

/// Circles around the poles `nus` with circle A containing q * circle B for
/// A < B and 0, 1 outside all of them. Existence mirrors the requirement
/// min nu > q * max nu.
pub fn plan_q_nested(nus: &[f64], q: f64, ell: usize) -> Result<ContourPlan> {
    if ell == 0 || ell > 4 {
        return Err(Error::Validation(format!("ell = {ell} outside 1..=4")));
    }
    if nus.is_empty() {
        return Err(Error::Validation("no pole locations given".into()));
    }
    let lo = nus.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = nus.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(lo > 0.0 && hi < 1.0) {
        return Err(Error::InfeasibleContour(format!(
            "poles must lie in (0, 1), got range [{lo}, {hi}]"
        )));
    }
    let center = (lo + hi) / 2.0;
    // unrolled recursion: rho_1 = base + margin * (1 - q^ell)/(1 - q), so
    // the largest workable margin follows from rho_1 < min(center, 1-center)
    let maxdev = (hi - lo) / 2.0;
    let qp = q.powi(ell as i32 - 1);
    let base = center * (1.0 - qp) + qp * maxdev;
    let margin_sum = if q == 0.0 {
        ell as f64
    } else {
        (1.0 - q.powi(ell as i32)) / (1.0 - q)
    };
    let margin_max = (center.min(1.0 - center) - base) / margin_sum;
    // the spread-proportional floor makes widely spread poles infeasible
    // exactly when nu_min is too close to q * nu_max; otherwise take half
    // the available slack so every contour keeps clear of every pole
    let margin = (0.02 * (hi - lo)).max(0.5 * margin_max.max(0.0));
    let mut radii = vec![0.0; ell];
    radii[ell - 1] = maxdev + margin;
    for i in (0..ell - 1).rev() {
        radii[i] = (1.0 - q) * center + q * radii[i + 1] + margin;
    }
    let plan = ContourPlan {
        center,
        radii,
        nodes: default_nodes(ell),
        kind: NestingKind::QNested,
    };
    plan.check(q, nus).map_err(|e| {
        Error::InfeasibleContour(format!(
            "no q-nested circle family for poles [{lo}, {hi}] at q = {q} \
             (needs min nu > q * max nu): {e}"
        ))
    })?;
    Ok(plan)
}

/// Circles around the poles `nus` with circle A containing circle B + 1 for
/// A < B and 0 outside; requires the poles to sit further than ~ell from 0.
pub fn plan_shift_nested(nus: &[f64], ell: usize) -> Result<ContourPlan> {
    if ell == 0 || ell > 4 {
        return Err(Error::Validation(format!("ell = {ell} outside 1..=4")));
    }
    if nus.is_empty() {
        return Err(Error::Validation("no pole locations given".into()));
    }
    let lo = nus.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = nus.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(lo > 0.0) {
        return Err(Error::InfeasibleContour(format!(
            "poles must be positive, got min {lo}"
        )));
    }
    let center = (lo + hi) / 2.0;
    // rho_1 = maxdev + (ell-1) + ell * margin must stay below center so the
    // outermost contour excludes the origin; spend half the slack on margin,
    // capped so contours stay reasonably snug around the poles
    let maxdev = (hi - lo) / 2.0;
    let margin_max = (center - maxdev - (ell as f64 - 1.0)) / ell as f64;
    let margin = (0.02 * (hi - lo))
        .max(0.02)
        .max((0.5 * margin_max.max(0.0)).min(0.5));
    let mut radii = vec![0.0; ell];
    radii[ell - 1] = maxdev + margin;
    for i in (0..ell - 1).rev() {
        radii[i] = radii[i + 1] + 1.0 + margin;
    }
    let plan = ContourPlan {
        center,
        radii,
        nodes: default_nodes(ell),
        kind: NestingKind::ShiftNested,
    };
    plan.check(0.0, nus).map_err(|e| {
        Error::InfeasibleContour(format!(
            "no shift-nested circle family for poles [{lo}, {hi}] with {ell} \
             variables; rescaling all nu upwards by ~{} would fix it: {e}",
            (ell as f64 + 1.0 - lo).max(0.0)
        ))
    })?;
    Ok(plan)
}

/// Evaluates the ell-fold contour integral
/// prefactor * prod_{A<B} cross(z_A, z_B) * prod_i per_var(i, z_i)
/// with each dz/(2 pi i) on its circle, by the product trapezoidal rule.
fn contour_quadrature(
    plan: &ContourPlan,
    per_var: &(dyn Fn(usize, Complex64) -> Complex64 + Sync),
    cross: &(dyn Fn(Complex64, Complex64) -> Complex64 + Sync),
    prefactor: Complex64,
) -> Complex64 {
    let ell = plan.ell();
    let m = plan.nodes;
    // nodes and weights per variable; the dz/(2 pi i) factor becomes
    // rho * e^{i theta} / m
    let mut zs: Vec<Vec<Complex64>> = Vec::with_capacity(ell);
    let mut ws: Vec<Vec<Complex64>> = Vec::with_capacity(ell);
    for i in 0..ell {
        let rho = plan.radii[i];
        let mut zrow = Vec::with_capacity(m);
        let mut wrow = Vec::with_capacity(m);
        for k in 0..m {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / m as f64;
            let e = Complex64::new(theta.cos(), theta.sin());
            let z = Complex64::new(plan.center, 0.0) + rho * e;
            zrow.push(z);
            wrow.push(per_var(i, z) * rho * e / m as f64);
        }
        zs.push(zrow);
        ws.push(wrow);
    }
    // parallel over the outermost index, deterministic reduction by index
    let partials: Vec<Complex64> = (0..m)
        .into_par_iter()
        .map(|k0| {
            let mut idx = vec![0usize; ell];
            idx[0] = k0;
            let mut acc = Complex64::new(0.0, 0.0);
            loop {
                let mut v = Complex64::new(1.0, 0.0);
                for i in 0..ell {
                    v *= ws[i][idx[i]];
                }
                for a in 0..ell {
                    for b in a + 1..ell {
                        v *= cross(zs[a][idx[a]], zs[b][idx[b]]);
                    }
                }
                acc += v;
                // advance indices 1..ell (index 0 is fixed per partial)
                let mut pos = ell - 1;
                loop {
                    if pos == 0 {
                        return acc;
                    }
                    idx[pos] += 1;
                    if idx[pos] < m {
                        break;
                    }
                    idx[pos] = 0;
                    pos -= 1;
                }
            }
        })
        .collect();
    prefactor * partials.iter().sum::<Complex64>()
}

/// Clock type for the particle-chain moment formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeKind {
    Discrete(usize),
    /// Continuous time: (t_param, nu); only the homogeneous chain.
    Continuous(f64),
}

/// Evaluates E prod_j q^{x_{n_j}(t) + n_j} for the chain started from step:
/// (-1)^ell q^{ell(ell-1)/2} times the integral of
/// prod_{A<B} (z_A - z_B)/(z_A - q z_B) *
/// prod_i [ time-factor(z_i) * 1/(z_i(1-z_i)) *
///          prod_{j<=n_i} (1-z_i)/(1-z_i/nu_j) ].
/// `nvec` need not be sorted; entries must be >= 1 (an entry 0 makes the
/// observable vanish identically and returns 0).
pub fn qhahn_moment_quad(
    nvec: &[usize],
    time: TimeKind,
    params: &QParams,
    plan: &ContourPlan,
) -> Result<f64> {
    if plan.kind != NestingKind::QNested {
        return Err(Error::Validation(
            "particle-chain moments need a q-nested plan".into(),
        ));
    }
    if nvec.len() != plan.ell() {
        return Err(Error::Validation(format!(
            "nvec has {} entries for an ell = {} plan",
            nvec.len(),
            plan.ell()
        )));
    }
    if nvec.iter().any(|&n| n == 0) {
        return Ok(0.0);
    }
    let q = params.q;
    let gamma = params.gamma;
    let n_max = *nvec.iter().max().unwrap();
    let nus: Vec<f64> = (1..=n_max).map(|j| params.nu(j)).collect();
    let per_var = |i: usize, z: Complex64| -> Complex64 {
        let one = Complex64::new(1.0, 0.0);
        let time_factor = match time {
            TimeKind::Discrete(t) => {
                ((one - gamma * z) / (one - z)).powi(t as i32)
            }
            TimeKind::Continuous(t_param) => {
                // homogeneous nu; nu(1) is the shared value
                (-(t_param / params.nu(1)) * z / (one - z)).exp()
            }
        };
        let mut v = time_factor / (z * (one - z));
        for &nu_j in nus.iter().take(nvec[i]) {
            v *= (one - z) / (one - z / nu_j);
        }
        v
    };
    let cross =
        |za: Complex64, zb: Complex64| -> Complex64 { (za - zb) / (za - q * zb) };
    let ell = plan.ell();
    let sign = if ell % 2 == 0 { 1.0 } else { -1.0 };
    let prefactor =
        Complex64::new(sign * q.powi((ell * (ell - 1) / 2) as i32), 0.0);
    let value = contour_quadrature(plan, &per_var, &cross, prefactor);
    if value.im.abs() > 1e-8 {
        return Err(Error::NonConvergence(format!(
            "imaginary part {} of a real moment; quadrature under-resolved",
            value.im
        )));
    }
    Ok(value.re)
}

/// Same moment with the node count doubled until the value moves by less
/// than `tol`; errors out if two doublings are not enough.
pub fn qhahn_moment_quad_converged(
    nvec: &[usize],
    time: TimeKind,
    params: &QParams,
    plan: &ContourPlan,
    tol: f64,
) -> Result<f64> {
    let mut prev = qhahn_moment_quad(nvec, time, params, plan)?;
    let mut p = plan.clone();
    for _ in 0..2 {
        let nodes = p.nodes * 2;
        p = p.with_nodes(nodes);
        let next = qhahn_moment_quad(nvec, time, params, &p)?;
        if (next - prev).abs() <= tol {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::NonConvergence(format!(
        "moment quadrature still moving by more than {tol} at {} nodes",
        p.nodes
    )))
}

/// Joint moment E Z(t, n_1) ... Z(t, n_k) of the beta polymer:
/// integral of prod_{A<B} (z_A - z_B)/(z_A - z_B - 1) *
/// prod_j [ prod_{i<=n_j} z_j/(z_j - nu_i) * ((z_j - gamma)/z_j)^t / z_j ].
pub fn beta_moment_quad(
    nvec: &[usize],
    t: usize,
    nus: &[f64],
    gamma: f64,
    plan: &ContourPlan,
) -> Result<f64> {
    if plan.kind != NestingKind::ShiftNested {
        return Err(Error::Validation(
            "beta-polymer moments need a shift-nested plan".into(),
        ));
    }
    if nvec.len() != plan.ell() {
        return Err(Error::Validation(format!(
            "nvec has {} entries for a k = {} plan",
            nvec.len(),
            plan.ell()
        )));
    }
    // zero entries are allowed: the corresponding variable simply carries no
    // pole factors, which is what corner evaluations of the two-body
    // boundary conditions need
    let n_max = *nvec.iter().max().unwrap_or(&0);
    if nus.len() < n_max {
        return Err(Error::Validation(format!(
            "need nu_1..nu_{n_max} for nvec {nvec:?}"
        )));
    }
    let per_var = |j: usize, z: Complex64| -> Complex64 {
        let mut v = ((z - gamma) / z).powi(t as i32) / z;
        for &nu_i in nus.iter().take(nvec[j]) {
            v *= z / (z - nu_i);
        }
        v
    };
    let cross = |za: Complex64, zb: Complex64| -> Complex64 {
        (za - zb) / (za - zb - Complex64::new(1.0, 0.0))
    };
    let value =
        contour_quadrature(plan, &per_var, &cross, Complex64::new(1.0, 0.0));
    if value.im.abs() > 1e-8 {
        return Err(Error::NonConvergence(format!(
            "imaginary part {} of a real moment; quadrature under-resolved",
            value.im
        )));
    }
    Ok(value.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qhahn_sim::NuSeq;

    fn hom_params(q: f64, nu: f64, gamma: f64) -> QParams {
        QParams::new(q, NuSeq::Homogeneous(nu), gamma).unwrap()
    }

    #[test]
    fn q_nested_plan_feasibility() {
        // homogeneous small case: feasible
        let p = plan_q_nested(&[0.3], 0.5, 1).unwrap();
        assert!(p.radii[0] < 0.3);
        // close nus at high q: run the recursion
        assert!(plan_q_nested(&[0.3, 0.31], 0.9, 3).is_ok());
        // wide spread at q = 0.5 violates min nu > q max nu
        match plan_q_nested(&[0.05, 0.9], 0.5, 2) {
            Err(Error::InfeasibleContour(_)) => {}
            other => panic!("expected infeasible plan, got {other:?}"),
        }
    }

    #[test]
    fn shift_nested_plan_feasibility() {
        assert!(plan_shift_nested(&[5.0, 5.5], 2).is_ok());
        // poles too close to 0 for two shifted circles
        assert!(plan_shift_nested(&[0.8], 2).is_err());
    }

    #[test]
    fn discrete_single_moment_closed_form() {
        let (q, nu, gamma) = (0.5, 0.3, 2.0);
        let params = hom_params(q, nu, gamma);
        let plan = plan_q_nested(&[nu], q, 1).unwrap();
        for t in 0..=5usize {
            let m =
                qhahn_moment_quad(&[1], TimeKind::Discrete(t), &params, &plan)
                    .unwrap();
            let expect = ((1.0 - gamma * nu) / (1.0 - nu)).powi(t as i32);
            assert!(
                (m - expect).abs() < 1e-10,
                "t = {t}: {m} vs {expect}"
            );
        }
    }

    #[test]
    fn continuous_single_moment_closed_form() {
        // E q^{x_1(t)+1} = exp(-t/(1-nu)) for the continuous chain
        let (q, nu) = (0.5, 0.3);
        let params = hom_params(q, nu, 1.0);
        let plan = plan_q_nested(&[nu], q, 1).unwrap();
        for &t in &[0.5, 1.0, 2.0] {
            let m = qhahn_moment_quad(
                &[1],
                TimeKind::Continuous(t),
                &params,
                &plan,
            )
            .unwrap();
            let expect = (-t / (1.0 - nu)).exp();
            assert!((m - expect).abs() < 1e-10, "t = {t}: {m} vs {expect}");
        }
    }

    #[test]
    fn zero_entry_vanishes() {
        let params = hom_params(0.5, 0.3, 2.0);
        let plan = plan_q_nested(&[0.3], 0.5, 2).unwrap();
        let m = qhahn_moment_quad(&[1, 0], TimeKind::Discrete(2), &params, &plan)
            .unwrap();
        assert_eq!(m, 0.0);
    }

    #[test]
    fn discrete_moments_match_exact_dual() {
        use crate::configspace::BosonConfig;
        use crate::exact::boson_exact_moment;
        let (q, gamma) = (0.4, 1.8);
        let nus = NuSeq::Explicit {
            head: vec![0.45, 0.4, 0.35, 0.3],
            tail: 0.3,
        };
        let params = QParams::new(q, nus, gamma).unwrap();
        for nvec in [vec![1usize], vec![2], vec![2, 1], vec![3, 2], vec![3, 2, 1]] {
            let n_max = *nvec.iter().max().unwrap();
            let poles: Vec<f64> = (1..=n_max).map(|j| params.nu(j)).collect();
            let plan = plan_q_nested(&poles, q, nvec.len()).unwrap();
            for t in 0..=4usize {
                let quad = qhahn_moment_quad(
                    &nvec,
                    TimeKind::Discrete(t),
                    &params,
                    &plan,
                )
                .unwrap();
                let parts: Vec<u32> = nvec.iter().map(|&n| n as u32).collect();
                let exact = boson_exact_moment(
                    &BosonConfig::new(parts).unwrap(),
                    t,
                    &params,
                )
                .unwrap();
                assert!(
                    (quad - exact).abs() <= 1e-6 * exact.abs().max(1e-12),
                    "nvec {nvec:?}, t = {t}: quad {quad} vs exact {exact}"
                );
            }
        }
    }

    #[test]
    fn quadrature_is_spectrally_convergent_and_deformation_invariant() {
        let (q, nu, gamma) = (0.5, 0.3, 2.0);
        let params = hom_params(q, nu, gamma);
        let plan = plan_q_nested(&[nu], q, 2).unwrap();
        let reference = qhahn_moment_quad(
            &[2, 1],
            TimeKind::Discrete(3),
            &params,
            &plan.clone().with_nodes(512),
        )
        .unwrap();
        // node-count convergence: already converged at modest M
        let coarse = qhahn_moment_quad(
            &[2, 1],
            TimeKind::Discrete(3),
            &params,
            &plan.clone().with_nodes(96),
        )
        .unwrap();
        assert!((coarse - reference).abs() < 1e-9);
        // radial perturbation staying feasible
        let grown = plan.scaled(1.05);
        grown.check(q, &[nu]).unwrap();
        let v = qhahn_moment_quad(&[2, 1], TimeKind::Discrete(3), &params, &grown)
            .unwrap();
        assert!((v - reference).abs() < 1e-9);
    }

    #[test]
    fn converged_wrapper_accepts_smooth_case() {
        let params = hom_params(0.5, 0.3, 2.0);
        let plan = plan_q_nested(&[0.3], 0.5, 1).unwrap().with_nodes(64);
        let v = qhahn_moment_quad_converged(
            &[2],
            TimeKind::Discrete(3),
            &params,
            &plan,
            1e-8,
        )
        .unwrap();
        assert!(v.is_finite() && v > 0.0 && v < 1.0);
    }

    #[test]
    fn beta_single_moment_residue() {
        // k = 1, n = 1: E Z(t,1) = ((nu_1 - gamma)/nu_1)^t
        let nus = [5.0, 5.4, 5.8];
        let gamma = 0.7;
        let plan = plan_shift_nested(&nus[..1], 1).unwrap();
        for t in 0..=4usize {
            let m = beta_moment_quad(&[1], t, &nus, gamma, &plan).unwrap();
            let expect = ((nus[0] - gamma) / nus[0]).powi(t as i32);
            assert!(
                (m - expect).abs() < 1e-10,
                "t = {t}: {m} vs {expect}"
            );
        }
    }

    #[test]
    fn beta_pair_moment_t1_hand_value() {
        // t = 1: Z(1,1) = B_{1,1}, Z(1,2) = 1, so E Z(1,1) Z(1,2) = E B_{1,1}
        let nus = [5.0, 5.4];
        let gamma = 0.7;
        let plan = plan_shift_nested(&nus, 2).unwrap();
        let m = beta_moment_quad(&[2, 1], 1, &nus, gamma, &plan).unwrap();
        let expect = (nus[0] - gamma) / nus[0];
        assert!((m - expect).abs() < 1e-9, "{m} vs {expect}");
    }
}

