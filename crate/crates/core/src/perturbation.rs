//! Continuity of invariant measures under kernel perturbations: weak and
//! strong continuity norms, Hölder and Lipschitz envelopes, and the Neumann
//! expansion through the generalized potential.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::Serialize;

use crate::ergodicity::{estimate_rate, generalized_potential, invariant_measure, resolvent, RateStatus};
use crate::error::{Error, Result};
use crate::kernel::{certify_family, DiscretizedKernel};
use crate::weighted_space::{dual_distance, ensure_same_grid, SignedDensity, WeightSpec};

/// Kernels `P_eps` indexed by `eps`, sorted by `|eps|`, with `P_0` present.
#[derive(Debug, Clone)]
pub struct KernelFamily {
    members: Vec<(f64, DiscretizedKernel)>,
}

impl KernelFamily {
    pub fn new(mut members: Vec<(f64, DiscretizedKernel)>) -> Result<Self> {
        if !members.iter().any(|(e, _)| *e == 0.0) {
            return Err(Error::InvalidParameter("family needs an eps = 0 member".into()));
        }
        if members.iter().any(|(e, _)| !e.is_finite()) {
            return Err(Error::InvalidParameter("non-finite eps".into()));
        }
        let grid = members[0].1.grid().clone();
        for (_, k) in &members {
            ensure_same_grid(&grid, k.grid())?;
        }
        members.sort_by(|a, b| a.0.abs().total_cmp(&b.0.abs()).then(a.0.total_cmp(&b.0)));
        for w in members.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::InvalidParameter(format!("duplicate eps {}", w[0].0)));
            }
        }
        Ok(KernelFamily { members })
    }

    /// Builds `eps -> make(eps)` on `{0} ∪ eps`.
    pub fn from_fn(eps: &[f64], mut make: impl FnMut(f64) -> Result<DiscretizedKernel>) -> Result<Self> {
        let mut members = vec![(0.0, make(0.0).map_err(|e| Error::at_eps(0.0, e))?)];
        for &e in eps.iter().filter(|e| **e != 0.0) {
            members.push((e, make(e).map_err(|err| Error::at_eps(e, err))?));
        }
        Self::new(members)
    }

    pub fn base(&self) -> &DiscretizedKernel {
        &self.members[0].1
    }

    pub fn members(&self) -> &[(f64, DiscretizedKernel)] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn kernels(&self) -> Vec<&DiscretizedKernel> {
        self.members.iter().map(|(_, k)| k).collect()
    }
}

/// Geometric ladder `start * 2^{-k}`, `k = 0..rungs`.
pub fn eps_ladder(start: f64, rungs: usize) -> Vec<f64> {
    (0..rungs).map(|k| start * 0.5f64.powi(k as i32)).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct PerturbationReport {
    pub eps: f64,
    /// `beta` of the middle norm and of `beta_gap`.
    pub beta: f64,
    pub cont_norm_01: f64,
    pub cont_norm_beta1: f64,
    pub cont_norm_11: f64,
    pub tv_gap: f64,
    pub beta_gap: f64,
}

/// Continuity norms of `P_eps - P_0` and gaps of `pi_eps - pi_0`, one row per member.
pub fn continuity_profile(family: &KernelFamily, beta: WeightSpec) -> Result<Vec<PerturbationReport>> {
    continuity_profile_with_measures(family, beta).map(|(r, _)| r)
}

/// As [`continuity_profile`], also returning the invariant measures in member order.
pub fn continuity_profile_with_measures(
    family: &KernelFamily,
    beta: WeightSpec,
) -> Result<(Vec<PerturbationReport>, Vec<SignedDensity>)> {
    let w0 = beta.with_beta(0.0);
    let w1 = beta.with_beta(1.0);
    let p0 = family.base();
    let pis = family
        .members
        .iter()
        .map(|(e, k)| invariant_measure(k).map_err(|err| Error::at_eps(*e, err)))
        .collect::<Result<Vec<_>>>()?;
    let mut reports = Vec::with_capacity(family.len());
    for ((eps, k), pi) in family.members.iter().zip(&pis) {
        let d = k.sub(p0)?;
        reports.push(PerturbationReport {
            eps: *eps,
            beta: beta.beta,
            cont_norm_01: d.operator_norm(w0, w1)?,
            cont_norm_beta1: d.operator_norm(beta, w1)?,
            cont_norm_11: d.operator_norm(w1, w1)?,
            tv_gap: dual_distance(pi, &pis[0], w0)?,
            beta_gap: dual_distance(pi, &pis[0], beta)?,
        });
    }
    Ok((reports, pis))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CheckStatus {
    Ok,
    /// Fewer than four usable samples.
    InsufficientSignal,
}

/// Gaps below this are indistinguishable from solver noise.
const GAP_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, Serialize)]
pub struct HolderBoundCheck {
    pub rho: f64,
    pub delta: f64,
    /// `1 - ln rho / ln delta`.
    pub eta: f64,
    /// Slope of `log tv_gap` against `log cont_norm_01`.
    pub fitted_exponent: f64,
    /// Smallest `D` with `tv_gap <= D cont_norm_01^eta` on every sample.
    pub d_hat: f64,
    pub envelope_holds: bool,
    /// `eps` of the sample that sets `d_hat`.
    pub worst_eps: f64,
    pub samples: usize,
    pub status: CheckStatus,
}

pub fn holder_exponent(rho: f64, delta: f64) -> f64 {
    1.0 - rho.ln() / delta.ln()
}

pub fn check_holder_bound(profile: &[PerturbationReport], delta: f64, rho: f64) -> Result<HolderBoundCheck> {
    if !(delta > 0.0 && delta < 1.0 && rho > 0.0 && rho < 1.0) {
        return Err(Error::Domain(format!("need delta, rho in (0,1), got {delta}, {rho}")));
    }
    let eta = holder_exponent(rho, delta);
    let usable: Vec<&PerturbationReport> = profile
        .iter()
        .filter(|p| p.eps != 0.0 && p.cont_norm_01 > 0.0 && p.tv_gap > GAP_FLOOR)
        .collect();
    let mut check = HolderBoundCheck {
        rho,
        delta,
        eta,
        fitted_exponent: f64::NAN,
        d_hat: f64::NAN,
        envelope_holds: false,
        worst_eps: f64::NAN,
        samples: usable.len(),
        status: CheckStatus::InsufficientSignal,
    };
    if usable.len() < 4 {
        return Ok(check);
    }
    let lx: Vec<f64> = usable.iter().map(|p| p.cont_norm_01.ln()).collect();
    let ly: Vec<f64> = usable.iter().map(|p| p.tv_gap.ln()).collect();
    check.fitted_exponent = crate::ergodicity::least_squares(&lx, &ly).0;
    let (worst_eps, d_hat) = usable
        .iter()
        .map(|p| (p.eps, p.tv_gap / p.cont_norm_01.powf(eta)))
        .fold((f64::NAN, 0.0), |acc, s| if s.1 > acc.1 { s } else { acc });
    check.d_hat = d_hat;
    check.worst_eps = worst_eps;
    check.envelope_holds = usable
        .iter()
        .all(|p| p.tv_gap <= d_hat * p.cont_norm_01.powf(eta) * (1.0 + 1e-12));
    check.status = CheckStatus::Ok;
    Ok(check)
}

#[derive(Debug, Clone, Serialize)]
pub struct LipschitzCheck {
    /// `max beta_gap / cont_norm_beta1`.
    pub c_hat: f64,
    pub ratios: Vec<(f64, f64)>,
    /// Samples dropped for a vanishing denominator.
    pub excluded: Vec<f64>,
    pub status: CheckStatus,
}

pub fn check_lipschitz_bound(profile: &[PerturbationReport], beta: WeightSpec) -> Result<LipschitzCheck> {
    if let Some(p) = profile.iter().find(|p| p.beta != beta.beta) {
        return Err(Error::InvalidParameter(format!(
            "profile built with beta = {}, asked for {}",
            p.beta, beta.beta
        )));
    }
    let mut ratios = Vec::new();
    let mut excluded = Vec::new();
    for p in profile.iter().filter(|p| p.eps != 0.0) {
        if p.cont_norm_beta1 > GAP_FLOOR {
            ratios.push((p.eps, p.beta_gap / p.cont_norm_beta1));
        } else {
            excluded.push(p.eps);
        }
    }
    let c_hat = ratios.iter().map(|r| r.1).fold(0.0, f64::max);
    let status = if ratios.is_empty() {
        CheckStatus::InsufficientSignal
    } else {
        CheckStatus::Ok
    };
    Ok(LipschitzCheck {
        c_hat,
        ratios,
        excluded,
        status,
    })
}

/// `radius * M * M0` from resolvent norms on `|z - 1| = radius`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ResolventConstant {
    pub radius: f64,
    /// `sup_{z, eps} ||(zI - P_eps)^{-1}||_1`.
    pub m: f64,
    /// `sup_z ||(zI - P_0)^{-1}||_beta`.
    pub m0: f64,
    pub bound: f64,
}

pub fn resolvent_constant(family: &KernelFamily, beta: WeightSpec, radius: f64, n_points: usize) -> Result<ResolventConstant> {
    if !(radius > 0.0 && radius < 1.0) || n_points < 2 {
        return Err(Error::InvalidParameter("need radius in (0,1) and >= 2 contour points".into()));
    }
    let w1 = beta.with_beta(1.0);
    let mut m = 0.0_f64;
    let mut m0 = 0.0_f64;
    // conjugate symmetry: the upper half circle suffices
    for k in 0..=n_points / 2 {
        let theta = 2.0 * std::f64::consts::PI * k as f64 / n_points as f64;
        let z = Complex64::new(1.0, 0.0) + Complex64::from_polar(radius, theta);
        for (eps, p) in family.members() {
            let r = resolvent(p, z).map_err(|e| Error::at_eps(*eps, e))?;
            m = m.max(r.operator_norm(w1, w1)?);
            if *eps == 0.0 {
                m0 = m0.max(r.operator_norm(beta, beta)?);
            }
        }
    }
    Ok(ResolventConstant {
        radius,
        m,
        m0,
        bound: radius * m * m0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExpansionStatus {
    Converged,
    /// `||D R||_1 >= 1`: the series is not guaranteed to converge.
    Divergent,
}

#[derive(Debug, Clone)]
pub struct KartashovExpansion {
    pub order: usize,
    pub partial_sum: SignedDensity,
    /// `||(P_eps - P_0) R||_1`.
    pub q: f64,
    /// `q^{n+1} / (1 - q) * pi_0(V)`; infinite when divergent.
    pub tail_bound: f64,
    /// `int pi_0 (D R)^k` for `k = 1..=order`.
    pub term_masses: Vec<f64>,
    /// `||pi_0 (D R)^k||` in the dual of `B_1`, `k = 0..=order`.
    pub term_norms: Vec<f64>,
    pub total_mass: f64,
    pub status: ExpansionStatus,
}

impl KartashovExpansion {
    /// Largest ratio of successive term norms.
    pub fn measured_ratio(&self) -> f64 {
        self.term_norms
            .windows(2)
            .filter(|w| w[0] > 0.0)
            .map(|w| w[1] / w[0])
            .fold(0.0, f64::max)
    }
}

/// `pi_0 sum_{k<=order} (D R)^k` with `D = P_eps - P_0` and `R` the potential of `P_0`.
pub fn kartashov_expansion(
    p0: &DiscretizedKernel,
    peps: &DiscretizedKernel,
    order: usize,
    w: WeightSpec,
) -> Result<KartashovExpansion> {
    ensure_same_grid(p0.grid(), peps.grid())?;
    let pot = generalized_potential(p0)?;
    let d = peps.sub(p0)?;
    let dr = d.compose(&pot.kernel)?;
    let w1 = w.with_beta(1.0);
    let q = dr.operator_norm(w1, w1)?;
    let grid = p0.grid();
    let pi0 = &pot.invariant;
    let mut term = DVector::from_vec(pi0.masses());
    let mut sum = term.clone();
    let mut term_masses = Vec::with_capacity(order);
    let mut term_norms = vec![pi0.dual_norm(w1)];
    for _ in 0..order {
        term = dr.operator().tr_mul(&term);
        let t = SignedDensity::from_masses(grid, term.as_slice())?;
        term_masses.push(t.total_mass());
        term_norms.push(t.dual_norm(w1));
        sum += &term;
    }
    let partial_sum = SignedDensity::from_masses(grid, sum.as_slice())?;
    let (status, tail_bound) = if q < 1.0 {
        (ExpansionStatus::Converged, q.powi(order as i32 + 1) / (1.0 - q) * pi0.dual_norm(w1))
    } else {
        (ExpansionStatus::Divergent, f64::INFINITY)
    };
    Ok(KartashovExpansion {
        order,
        total_mass: partial_sum.total_mass(),
        partial_sum,
        q,
        tail_bound,
        term_masses,
        term_norms,
        status,
    })
}

/// `Delta_N = ||P_0^N - P_eps^N||_1` and, when `Delta_N < 1 - rho`, the
/// strong-stability ratio `Delta_N / (1 - rho - Delta_N)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StrongStability {
    pub n_steps: usize,
    pub delta_n: f64,
    pub bound: Option<f64>,
}

pub fn strong_stability_diagnostic(
    p0: &DiscretizedKernel,
    peps: &DiscretizedKernel,
    n_steps: usize,
    rho: f64,
    w: WeightSpec,
) -> Result<StrongStability> {
    let w1 = w.with_beta(1.0);
    let delta_n = p0
        .power(n_steps as i64)?
        .sub(&peps.power(n_steps as i64)?)?
        .operator_norm(w1, w1)?;
    let bound = (delta_n < 1.0 - rho).then(|| delta_n / (1.0 - rho - delta_n));
    Ok(StrongStability {
        n_steps,
        delta_n,
        bound,
    })
}

/// Largest sampled `|eps|` such that every member with `|eps'| <= |eps|`
/// certifies drift and has a fitted rate below one.
pub fn operational_eps1(family: &KernelFamily, w: WeightSpec, n_steps: usize, l_cap: f64) -> Result<Option<f64>> {
    let mut best = None;
    let mut prefix: Vec<&DiscretizedKernel> = Vec::new();
    for (eps, k) in family.members() {
        prefix.push(k);
        let (_, fam) = certify_family(&prefix, w.with_beta(1.0), n_steps, l_cap)?;
        let rate = estimate_rate(k, w.with_beta(1.0)).map_err(|e| Error::at_eps(*eps, e))?;
        if !fam.all_certified || rate.status == RateStatus::NotDecaying {
            break;
        }
        best = Some(eps.abs());
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ar::{build_kernel, ArKernelSpec, NoiseFamily, NoiseModel};
    use crate::weighted_space::Grid;
    use approx::assert_relative_eq;
    use std::sync::Arc;

    fn ar_spec(grid: Arc<Grid>, r: f64) -> ArKernelSpec {
        ArKernelSpec::new(0.5, NoiseModel::new(NoiseFamily::student_t(3.0), r).unwrap(), grid)
            .unwrap()
            .with_tau_trunc(1e-3)
    }

    fn ar_family(spec: &ArKernelSpec, eps: &[f64]) -> KernelFamily {
        KernelFamily::from_fn(eps, |e| build_kernel(&spec.with_alpha(spec.alpha + e)?)).unwrap()
    }

    #[test]
    fn eta_formula() {
        assert_relative_eq!(holder_exponent(0.9, 0.5), 1.0 - 0.9f64.ln() / 0.5f64.ln(), max_relative = 1e-15);
        assert!((holder_exponent(0.9, 0.5) - 0.848).abs() < 1e-3);
    }

    #[test]
    fn family_needs_base_member() {
        let g = Grid::uniform(81, 40.0).unwrap();
        let s = ar_spec(g, 1.0);
        let k = build_kernel(&s).unwrap();
        assert!(KernelFamily::new(vec![(0.1, k.clone())]).is_err());
        assert!(KernelFamily::new(vec![(0.0, k.clone()), (0.0, k)]).is_err());
    }

    #[test]
    fn profile_of_base_is_zero_and_norms_nest() {
        let g = Grid::uniform(161, 40.0).unwrap();
        let s = ar_spec(g, 1.5);
        let fam = ar_family(&s, &eps_ladder(0.2, 5));
        let prof = continuity_profile(&fam, WeightSpec::new(1.5, 0.5).unwrap()).unwrap();
        assert_eq!(prof[0].eps, 0.0);
        assert_eq!(prof[0].cont_norm_11, 0.0);
        assert_eq!(prof[0].tv_gap, 0.0);
        for p in &prof {
            assert!(p.cont_norm_01 <= p.cont_norm_beta1 + 1e-15);
            assert!(p.cont_norm_beta1 <= p.cont_norm_11 + 1e-15);
            assert!(p.tv_gap <= p.beta_gap + 1e-15);
        }
        for w in prof[1..].windows(2) {
            assert!(w[0].tv_gap < w[1].tv_gap);
            assert!(w[0].cont_norm_01 < w[1].cont_norm_01);
        }
    }

    #[test]
    fn holder_check_statuses() {
        let row = |eps: f64, c: f64, g: f64| PerturbationReport {
            eps,
            beta: 0.0,
            cont_norm_01: c,
            cont_norm_beta1: c,
            cont_norm_11: c,
            tv_gap: g,
            beta_gap: g,
        };
        let prof: Vec<_> = (1..=5).map(|k| row(k as f64, k as f64 * 0.01, (k as f64 * 0.01).powf(0.9))).collect();
        let c = check_holder_bound(&prof, 0.5, 0.9).unwrap();
        assert_eq!(c.status, CheckStatus::Ok);
        assert!((c.fitted_exponent - 0.9).abs() < 1e-12);
        assert!(c.envelope_holds);
        let flat: Vec<_> = (1..=5).map(|k| row(k as f64, 0.1, 0.0)).collect();
        assert_eq!(check_holder_bound(&flat, 0.5, 0.9).unwrap().status, CheckStatus::InsufficientSignal);
        assert!(check_holder_bound(&prof, 1.0, 0.9).is_err());
    }

    #[test]
    fn lipschitz_excludes_zero_denominators() {
        let prof = vec![
            PerturbationReport { eps: 0.0, beta: 0.5, cont_norm_01: 0.0, cont_norm_beta1: 0.0, cont_norm_11: 0.0, tv_gap: 0.0, beta_gap: 0.0 },
            PerturbationReport { eps: 0.1, beta: 0.5, cont_norm_01: 0.1, cont_norm_beta1: 0.2, cont_norm_11: 0.3, tv_gap: 0.1, beta_gap: 0.3 },
            PerturbationReport { eps: 0.2, beta: 0.5, cont_norm_01: 0.0, cont_norm_beta1: 0.0, cont_norm_11: 0.0, tv_gap: 0.0, beta_gap: 0.1 },
        ];
        let c = check_lipschitz_bound(&prof, WeightSpec::new(1.5, 0.5).unwrap()).unwrap();
        assert_relative_eq!(c.c_hat, 1.5);
        assert_eq!(c.excluded, vec![0.2]);
        assert!(check_lipschitz_bound(&prof, WeightSpec::new(1.5, 1.0).unwrap()).is_err());
    }

    #[test]
    fn kartashov_order_zero_and_masses() {
        let g = Grid::uniform(201, 40.0).unwrap();
        let s = ar_spec(g, 1.0);
        let p0 = build_kernel(&s).unwrap();
        let pe = build_kernel(&s.with_alpha(0.502).unwrap()).unwrap();
        let w = WeightSpec::new(1.0, 1.0).unwrap();
        let e0 = kartashov_expansion(&p0, &pe, 0, w).unwrap();
        let pi0 = invariant_measure(&p0).unwrap();
        assert!(dual_distance(&e0.partial_sum, &pi0, w.with_beta(0.0)).unwrap() < 1e-12);
        let e8 = kartashov_expansion(&p0, &pe, 8, w).unwrap();
        assert_eq!(e8.status, ExpansionStatus::Converged, "q = {}", e8.q);
        assert!(e8.term_masses.iter().all(|m| m.abs() < 1e-10));
        assert!((e8.total_mass - 1.0).abs() < 1e-10);
        let exact = invariant_measure(&pe).unwrap();
        let tv = dual_distance(&e8.partial_sum, &exact, w.with_beta(0.0)).unwrap();
        assert!(tv <= e8.tail_bound, "{tv} vs {}", e8.tail_bound);
        assert!(e8.measured_ratio() <= e8.q + 1e-12);
    }

    #[test]
    fn kartashov_reports_divergence() {
        let g = Grid::uniform(121, 40.0).unwrap();
        let s = ar_spec(g, 1.0);
        let p0 = build_kernel(&s).unwrap();
        let pe = build_kernel(&s.with_alpha(0.9).unwrap()).unwrap();
        let e = kartashov_expansion(&p0, &pe, 4, WeightSpec::new(1.0, 1.0).unwrap()).unwrap();
        assert_eq!(e.status, ExpansionStatus::Divergent);
        assert!(e.tail_bound.is_infinite());
    }

    #[test]
    fn strong_stability_gate() {
        let g = Grid::uniform(121, 40.0).unwrap();
        let s = ar_spec(g, 1.0);
        let p0 = build_kernel(&s).unwrap();
        let w = WeightSpec::new(1.0, 1.0).unwrap();
        let same = strong_stability_diagnostic(&p0, &p0, 2, 0.7, w).unwrap();
        assert_eq!(same.delta_n, 0.0);
        assert_eq!(same.bound, Some(0.0));
        let far = build_kernel(&s.with_alpha(-0.5).unwrap()).unwrap();
        assert!(strong_stability_diagnostic(&p0, &far, 1, 0.7, w).unwrap().bound.is_none());
    }

    #[test]
    fn resolvent_constant_dominates_lipschitz_ratio() {
        let g = Grid::uniform(121, 40.0).unwrap();
        let s = ar_spec(g, 1.5);
        let fam = ar_family(&s, &eps_ladder(0.02, 3));
        let beta = WeightSpec::new(1.5, 0.5).unwrap();
        let prof = continuity_profile(&fam, beta).unwrap();
        let lip = check_lipschitz_bound(&prof, beta).unwrap();
        let rc = resolvent_constant(&fam, beta, 0.2, 8).unwrap();
        assert!(rc.m >= 1.0 / 0.2 - 1e-9);
        assert!(lip.c_hat <= rc.bound, "{} vs {:?}", lip.c_hat, rc);
    }

    #[test]
    fn eps1_on_a_small_family() {
        let g = Grid::uniform(161, 40.0).unwrap();
        let s = ar_spec(g, 1.0);
        let fam = ar_family(&s, &[0.1, 0.2]);
        let e1 = operational_eps1(&fam, WeightSpec::new(1.0, 1.0).unwrap(), 1, 100.0).unwrap();
        assert_eq!(e1, Some(0.2));
    }
}
