//! The AR(1) chain `X_n = alpha X_{n-1} + noise_n` on a truncated grid:
//! kernels, their alpha-derivatives, the strong-continuity counterexample
//! and the Taylor expansion of the invariant measure in alpha.

pub mod noise;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::ergodicity::{generalized_potential, PotentialOperator};
use crate::error::{Error, Result};
use crate::kernel::DiscretizedKernel;
use crate::weighted_space::{dual_distance, Grid, SignedDensity, WeightSpec};

pub use noise::{NoiseFamily, NoiseModel};

#[derive(Debug, Clone)]
pub struct ArKernelSpec {
    pub alpha: f64,
    pub noise: NoiseModel,
    pub grid: Arc<Grid>,
    /// Allowed noise mass outside `[-X, X]`.
    pub tau_trunc: f64,
    /// Largest allowed `|1 - raw row sum|` before renormalization.
    pub max_row_defect: f64,
}

impl ArKernelSpec {
    pub fn new(alpha: f64, noise: NoiseModel, grid: Arc<Grid>) -> Result<Self> {
        let spec = ArKernelSpec {
            alpha,
            noise,
            grid,
            tau_trunc: 1e-8,
            max_row_defect: 0.5,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_tau_trunc(mut self, tau: f64) -> Self {
        self.tau_trunc = tau;
        self
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        let mut s = self.clone();
        s.alpha = alpha;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.abs() < 1.0) {
            return Err(Error::Domain(format!("|alpha| must be < 1, got {}", self.alpha)));
        }
        if !(self.tau_trunc > 0.0) || !(self.max_row_defect > 0.0 && self.max_row_defect < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "need tau_trunc > 0 and max_row_defect in (0,1), got {} and {}",
                self.tau_trunc, self.max_row_defect
            )));
        }
        Ok(())
    }
}

/// Mass lost to the finite domain.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TruncationReport {
    /// `P(|noise| > X)`.
    pub noise_tail: f64,
    /// `max_i |1 - sum_j w_j nu(x_j - alpha x_i)|`.
    pub max_row_defect: f64,
    pub worst_row: usize,
}

pub fn build_kernel(spec: &ArKernelSpec) -> Result<DiscretizedKernel> {
    build_kernel_with_report(spec).map(|(k, _)| k)
}

/// Builds `nu(x_j - alpha x_i)` with every row rescaled to unit mass.
pub fn build_kernel_with_report(spec: &ArKernelSpec) -> Result<(DiscretizedKernel, TruncationReport)> {
    spec.validate()?;
    let noise_tail = spec.noise.family.tail_mass(spec.grid.x_max());
    if noise_tail > spec.tau_trunc {
        return Err(Error::NoiseTruncation {
            defect: noise_tail,
            limit: spec.tau_trunc,
        });
    }
    let raw = raw_derivative(spec, 0);
    let sums = row_sums(&raw);
    let (worst_row, max_row_defect) = sums
        .iter()
        .map(|s| (1.0 - s).abs())
        .enumerate()
        .fold((0, 0.0), |acc, (i, d)| if d > acc.1 { (i, d) } else { acc });
    if max_row_defect > spec.max_row_defect {
        return Err(Error::Truncation {
            row: worst_row,
            defect: max_row_defect,
            limit: spec.max_row_defect,
        });
    }
    let op = divide_rows(raw, &sums);
    let kernel = DiscretizedKernel::from_operator(spec.grid.clone(), op, true)?;
    Ok((
        kernel,
        TruncationReport {
            noise_tail,
            max_row_defect,
            worst_row,
        },
    ))
}

/// `(-x_i)^k nu^{(k)}(x_j - alpha x_i) w_j`, the k-th alpha-derivative of
/// the unnormalized operator.
fn raw_derivative(spec: &ArKernelSpec, k: usize) -> DMatrix<f64> {
    let x = spec.grid.nodes();
    let w = spec.grid.weights();
    let n = x.len();
    let a = spec.alpha;
    DMatrix::from_fn(n, n, |i, j| {
        let z = x[j] - a * x[i];
        let d = if k == 0 {
            spec.noise.pdf(z)
        } else {
            spec.noise.derivative(k, z)
        };
        (-x[i]).powi(k as i32) * d * w[j]
    })
}

fn row_sums(m: &DMatrix<f64>) -> Vec<f64> {
    (0..m.nrows()).map(|i| m.row(i).sum()).collect()
}

fn divide_rows(mut m: DMatrix<f64>, s: &[f64]) -> DMatrix<f64> {
    for (i, si) in s.iter().enumerate() {
        m.row_mut(i).scale_mut(1.0 / si);
    }
    m
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Operators `d^j/dalpha^j P_alpha` for `j = 0..=k` of the row-normalized
/// family, by the quotient rule applied to `P s = A`.
fn derivative_chain(spec: &ArKernelSpec, k: usize) -> Vec<DMatrix<f64>> {
    let raws: Vec<DMatrix<f64>> = (0..=k).map(|j| raw_derivative(spec, j)).collect();
    let sums: Vec<Vec<f64>> = raws.iter().map(row_sums).collect();
    let mut out: Vec<DMatrix<f64>> = Vec::with_capacity(k + 1);
    for j in 0..=k {
        let mut m = raws[j].clone();
        for l in 1..=j {
            let c = binomial(j, l);
            let prev = &out[j - l];
            for i in 0..m.nrows() {
                let f = c * sums[l][i];
                for jj in 0..m.ncols() {
                    m[(i, jj)] -= f * prev[(i, jj)];
                }
            }
        }
        out.push(divide_rows(m, &sums[0]));
    }
    out
}

/// `P_{k,alpha}`, the k-th alpha-derivative of the discretized kernel.
pub fn derivative_kernel(spec: &ArKernelSpec, k: usize) -> Result<DiscretizedKernel> {
    if k == 0 {
        return build_kernel(spec);
    }
    derivative_kernels(spec, k).map(|mut v| v.pop().expect("non-empty chain"))
}

/// `[P_alpha, P_{1,alpha}, ..., P_{k,alpha}]`.
pub fn derivative_kernels(spec: &ArKernelSpec, k: usize) -> Result<Vec<DiscretizedKernel>> {
    let top = spec.noise.floor_r() + 1;
    if k > top {
        return Err(Error::InvalidParameter(format!(
            "derivative order {k} exceeds floor(r)+1 = {top}"
        )));
    }
    if k > 0 {
        spec.noise.eligibility()?;
    }
    // run the truncation checks
    build_kernel(spec)?;
    derivative_chain(spec, k)
        .into_iter()
        .enumerate()
        .map(|(j, m)| DiscretizedKernel::from_operator(spec.grid.clone(), m, j == 0))
        .collect()
}

/// `||(P_{k-1,alpha+h} - P_{k-1,alpha}) / h - P_{k,alpha}||_{beta,beta'}`.
pub fn finite_difference_defect(spec: &ArKernelSpec, k: usize, h: f64, from: WeightSpec, to: WeightSpec) -> Result<f64> {
    if k == 0 || h == 0.0 {
        return Err(Error::InvalidParameter("need k >= 1 and h != 0".into()));
    }
    let base = derivative_kernels(spec, k)?;
    let shifted = derivative_kernel(&spec.with_alpha(spec.alpha + h)?, k - 1)?;
    let fd = shifted.sub(&base[k - 1])?.scale(1.0 / h);
    fd.sub(&base[k])?.operator_norm(from, to)
}

/// Modulus of continuity of `alpha -> P_{k,alpha}` in `||.||_{beta,beta'}`.
#[derive(Debug, Clone, Serialize)]
pub struct HolderModulus {
    pub k: usize,
    pub beta: f64,
    pub beta_prime: f64,
    /// `r (beta' - beta) - k`.
    pub sigma: f64,
    /// `(alpha, alpha', ||P_{k,alpha} - P_{k,alpha'}|| / |alpha - alpha'|^sigma)`.
    pub ratios: Vec<(f64, f64, f64)>,
    pub max_ratio: f64,
    /// `max_j A_j` over the derivative orders used.
    pub a_const: f64,
    /// `max (P_alpha V^b) / V^b` over the alphas and `b in {beta, beta'}`.
    pub b_const: f64,
    pub bound: f64,
}

pub fn holder_modulus_check(
    spec: &ArKernelSpec,
    k: usize,
    beta: f64,
    beta_prime: f64,
    pairs: &[(f64, f64)],
) -> Result<HolderModulus> {
    let r = spec.noise.r;
    let sigma = r * (beta_prime - beta) - k as f64;
    if !(beta >= 0.0 && beta_prime <= 1.0) || !(sigma > 0.0 && sigma <= 1.0) {
        return Err(Error::Domain(format!(
            "need 0 <= beta, beta' <= 1 and sigma = r(beta'-beta)-k in (0,1], got sigma = {sigma}"
        )));
    }
    if pairs.is_empty() {
        return Err(Error::InvalidParameter("no alpha pairs given".into()));
    }
    let from = WeightSpec::new(r, beta)?;
    let to = WeightSpec::new(r, beta_prime)?;
    let mut ratios = Vec::with_capacity(pairs.len());
    let mut b_const = 0.0_f64;
    for &(a, b) in pairs {
        if a == b {
            return Err(Error::InvalidParameter(format!("pair ({a}, {b}) is not distinct")));
        }
        let pa = derivative_kernel(&spec.with_alpha(a)?, k)?;
        let pb = derivative_kernel(&spec.with_alpha(b)?, k)?;
        let norm = pa.sub(&pb)?.operator_norm(from, to)?;
        ratios.push((a, b, norm / (a - b).abs().powf(sigma)));
        for alpha in [a, b] {
            let p = build_kernel(&spec.with_alpha(alpha)?)?;
            for w in [from, to] {
                b_const = b_const.max(p.operator_norm(w, w)?);
            }
        }
    }
    let max_ratio = ratios.iter().map(|t| t.2).fold(0.0, f64::max);
    let a_const = spec.noise.ratio_bounds[..=(k + 1).min(spec.noise.ratio_bounds.len() - 1)]
        .iter()
        .cloned()
        .fold(0.0, f64::max);
    Ok(HolderModulus {
        k,
        beta,
        beta_prime,
        sigma,
        ratios,
        max_ratio,
        a_const,
        b_const,
        bound: 2.0 * a_const * b_const,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CounterexampleStatus {
    Ok,
    /// No `a` on the ladder gave `|I_a| > 0.01`.
    Degenerate,
}

#[derive(Debug, Clone, Serialize)]
pub struct CounterexampleResult {
    pub alpha0: f64,
    pub a: f64,
    pub i_a: f64,
    /// `(alpha, [(P_alpha f)(x) - (P_alpha0 f)(x)] / V(x))` at `x = a / (alpha - alpha0)`.
    pub ratios: Vec<(f64, f64)>,
    /// `alpha0 * I_a`.
    pub limit: f64,
    /// `|last ratio - limit|`.
    pub limit_check: f64,
    pub status: CounterexampleStatus,
}

const A_LADDER: [f64; 6] = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0];
const QUAD_TOL: f64 = 1e-14;

fn quad(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    quadrature::integrate(f, a, b, QUAD_TOL).integral
}

/// Compares `P_alpha f` and `P_alpha0 f` at `x = a / (alpha - alpha0)` for a
/// sign-alternating band test function, by adaptive quadrature off the grid.
pub fn run_counterexample(noise: &NoiseModel, alpha0: f64, alphas: &[f64]) -> Result<CounterexampleResult> {
    if !(alpha0 > 0.0 && alpha0 < 1.0) {
        return Err(Error::Domain(format!("alpha0 must lie in (0,1), got {alpha0}")));
    }
    if alphas.is_empty() {
        return Err(Error::InvalidParameter("empty alpha list".into()));
    }
    for w in alphas.windows(2) {
        if !(w[1] < w[0]) {
            return Err(Error::InvalidParameter("alphas must be strictly decreasing".into()));
        }
    }
    if let Some(&bad) = alphas.iter().find(|&&a| !(a > alpha0 && a < 1.0)) {
        return Err(Error::InvalidParameter(format!("alpha {bad} not in (alpha0, 1)")));
    }
    let nu = |y: f64| noise.pdf(y);
    let mass = |lo: f64, hi: f64| quad(nu, lo, hi);
    let i_of = |a: f64| mass(-a, a) - mass(-2.0 * a, -a) - mass(a, 2.0 * a);

    let found = A_LADDER.iter().map(|&a| (a, i_of(a))).find(|&(_, i)| i.abs() > 0.01);
    let (a, i_a, status) = match found {
        Some((a, i)) => (a, i, CounterexampleStatus::Ok),
        None => (A_LADDER[0], i_of(A_LADDER[0]), CounterexampleStatus::Degenerate),
    };
    // int_lo^hi (y + c) nu(y) dy
    let band = |lo: f64, hi: f64, c: f64| quad(|y| (y + c) * nu(y), lo, hi);
    let ratios: Vec<(f64, f64)> = alphas
        .iter()
        .map(|&alpha| {
            let x = a / (alpha - alpha0);
            let p_alpha = band(0.0, a, alpha * x) - band(-2.0 * a, -a, alpha * x);
            let p_alpha0 = band(a, 2.0 * a, alpha0 * x) - band(-a, 0.0, alpha0 * x);
            (alpha, (p_alpha - p_alpha0) / (1.0 + x))
        })
        .collect();
    let limit = alpha0 * i_a;
    let limit_check = (ratios.last().expect("non-empty").1 - limit).abs();
    Ok(CounterexampleResult {
        alpha0,
        a,
        i_a,
        ratios,
        limit,
        limit_check,
        status,
    })
}

/// `pi_alpha` and the derivative measures `mu_{alpha,j}`, `j = 1..=order`.
#[derive(Debug, Clone)]
pub struct ExpansionCoefficients {
    pub alpha: f64,
    pub beta_r: f64,
    pub pi: SignedDensity,
    pub mu: Vec<SignedDensity>,
    /// `|int mu_j|`.
    pub masses: Vec<f64>,
    /// `||mu_j||` in the dual of `B_{beta_r}`.
    pub dual_norms: Vec<f64>,
    pub potential_residual: f64,
}

impl ExpansionCoefficients {
    pub fn order(&self) -> usize {
        self.mu.len()
    }

    /// `pi + sum_{j <= order} eps^j / j! mu_j`.
    pub fn partial_sum(&self, eps: f64, order: usize) -> Result<SignedDensity> {
        if order > self.mu.len() {
            return Err(Error::InvalidParameter(format!(
                "order {order} exceeds the {} computed coefficients",
                self.mu.len()
            )));
        }
        let mut acc = self.pi.clone();
        let mut c = 1.0;
        for (j, m) in self.mu.iter().take(order).enumerate() {
            c *= eps / (j + 1) as f64;
            acc = acc.axpy(c, m)?;
        }
        Ok(acc)
    }

    /// `sup_A |pi_{alpha+eps}(A) - partial(A)| / eps^order`.
    pub fn remainder(&self, exact: &SignedDensity, eps: f64, order: usize) -> Result<f64> {
        let partial = self.partial_sum(eps, order)?;
        let defect = exact.axpy(-1.0, &partial)?;
        Ok(defect.sup_set_mass() / eps.abs().powi(order as i32))
    }
}

/// Derivatives of `alpha -> pi_alpha` from `mu_j (I - P) = sum_{l<j} C(j,l) mu_l P_{j-l}`,
/// each solved on zero-mass measures with the generalized potential.
pub fn taylor_expansion(spec: &ArKernelSpec, order: usize, beta_r: f64) -> Result<ExpansionCoefficients> {
    spec.noise.eligibility()?;
    let fl = spec.noise.floor_r();
    if order > fl {
        return Err(Error::Ineligible(format!(
            "order {order} exceeds floor(r) = {fl} for r = {}",
            spec.noise.r
        )));
    }
    let upper = 1.0 - fl as f64 / spec.noise.r;
    if !(beta_r > 0.0 && beta_r < upper) {
        return Err(Error::Domain(format!("beta_r must lie in (0, {upper:.4}), got {beta_r}")));
    }
    let kernels = derivative_kernels(spec, order)?;
    let pot: PotentialOperator = generalized_potential(&kernels[0])?;
    let grid = &spec.grid;
    let w = WeightSpec::new(spec.noise.r, beta_r)?;
    let mut masses: Vec<DVector<f64>> = vec![DVector::from_vec(pot.invariant.masses())];
    for j in 1..=order {
        let mut rhs = DVector::zeros(grid.len());
        for l in 0..j {
            rhs += kernels[j - l].operator().tr_mul(&masses[l]) * binomial(j, l);
        }
        let mu = pot.kernel.operator().tr_mul(&rhs);
        masses.push(mu);
    }
    let mu: Vec<SignedDensity> = masses[1..]
        .iter()
        .map(|m| SignedDensity::from_masses(grid, m.as_slice()))
        .collect::<Result<_>>()?;
    Ok(ExpansionCoefficients {
        alpha: spec.alpha,
        beta_r,
        masses: mu.iter().map(|m| m.total_mass().abs()).collect(),
        dual_norms: mu.iter().map(|m| m.dual_norm(w)).collect(),
        mu,
        pi: pot.invariant.clone(),
        potential_residual: pot.identity_residual,
    })
}

/// TV distance between `mu_1` and the central difference `(pi_{alpha+h} - pi_{alpha-h}) / 2h`.
pub fn central_difference_gap(spec: &ArKernelSpec, coeffs: &ExpansionCoefficients, h: f64) -> Result<f64> {
    let plus = crate::ergodicity::invariant_measure(&build_kernel(&spec.with_alpha(spec.alpha + h)?)?)?;
    let minus = crate::ergodicity::invariant_measure(&build_kernel(&spec.with_alpha(spec.alpha - h)?)?)?;
    let fd = plus.axpy(-1.0, &minus)?.scaled(0.5 / h);
    dual_distance(&fd, &coeffs.mu[0], WeightSpec { r: 1.0, beta: 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ergodicity::invariant_measure;
    use crate::weighted_space::WeightedFunction;

    fn t3(r: f64) -> NoiseModel {
        NoiseModel::new(NoiseFamily::student_t(3.0), r).unwrap()
    }

    fn spec(alpha: f64, n: usize, x: f64, r: f64) -> ArKernelSpec {
        ArKernelSpec::new(alpha, t3(r), Grid::uniform(n, x).unwrap())
            .unwrap()
            .with_tau_trunc(1e-3)
    }

    #[test]
    fn alpha_zero_rows_are_the_noise() {
        let s = spec(0.0, 201, 40.0, 1.5);
        let k = build_kernel(&s).unwrap();
        let g = &s.grid;
        let x = g.nodes();
        for i in [0, 50, 100, 200] {
            for (j, &xj) in x.iter().enumerate() {
                let rel = (k.density(i, j) - s.noise.pdf(xj)).abs() / s.noise.pdf(xj);
                assert!(rel < 1e-3, "{rel}");
                assert_eq!(k.density(i, j), k.density(0, j));
            }
        }
    }

    #[test]
    fn raw_row_sums_are_one_in_the_interior() {
        let g = Grid::uniform(601, 12.0).unwrap();
        let s = ArKernelSpec::new(0.5, NoiseModel::new(NoiseFamily::gaussian(1.0), 1.0).unwrap(), g).unwrap();
        let (_, rep) = build_kernel_with_report(&s).unwrap();
        assert!(rep.noise_tail < 1e-8);
        let raw = raw_derivative(&s, 0);
        for (i, x) in s.grid.nodes().iter().enumerate() {
            if x.abs() < 8.0 {
                assert!((raw.row(i).sum() - 1.0).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn two_steps_equal_one_step_with_aggregated_noise() {
        let g = Grid::uniform(801, 12.0).unwrap();
        let gauss = |sd: f64| NoiseModel::new(NoiseFamily::gaussian(sd), 1.0).unwrap();
        let s = ArKernelSpec::new(0.5, gauss(1.0), g.clone()).unwrap();
        let two = build_kernel(&s).unwrap().power(2).unwrap();
        // X_2 = 0.25 X_0 + 0.5 e_1 + e_2, noise variance 1.25
        let oracle = ArKernelSpec::new(0.25, gauss(1.25f64.sqrt()), g).unwrap();
        let one = build_kernel(&oracle).unwrap();
        let mid: Vec<usize> = (0..801).filter(|&i| s.grid.nodes()[i].abs() <= 6.0).collect();
        let mut worst = 0.0_f64;
        for &i in &mid {
            for j in 0..801 {
                worst = worst.max((two.density(i, j) - one.density(i, j)).abs());
            }
        }
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn noise_truncation_is_reported() {
        let s = ArKernelSpec::new(0.5, t3(1.0), Grid::uniform(101, 10.0).unwrap()).unwrap();
        assert!(matches!(build_kernel(&s), Err(Error::NoiseTruncation { .. })));
    }

    #[test]
    fn row_defect_is_reported() {
        let g = Grid::uniform(101, 10.0).unwrap();
        let mut s = ArKernelSpec::new(0.5, NoiseModel::new(NoiseFamily::Gaussian { mean: 9.0, sd: 0.1 }, 1.0).unwrap(), g).unwrap();
        s.tau_trunc = 1.0;
        assert!(matches!(build_kernel(&s), Err(Error::Truncation { .. })));
    }

    #[test]
    fn alpha_out_of_range() {
        assert!(ArKernelSpec::new(1.0, t3(1.0), Grid::uniform(10, 1.0).unwrap()).is_err());
        assert!(spec(0.3, 11, 40.0, 1.5).with_alpha(-1.2).is_err());
    }

    #[test]
    fn first_derivative_kills_constants() {
        let s = spec(0.4, 301, 60.0, 1.5);
        let d1 = derivative_kernel(&s, 1).unwrap();
        let one = d1.apply(&WeightedFunction::constant(&s.grid, 1.0)).unwrap();
        assert!(one.values().iter().all(|v| v.abs() < 1e-12));
        let d2 = derivative_kernel(&s, 2).unwrap();
        let one = d2.apply(&WeightedFunction::constant(&s.grid, 1.0)).unwrap();
        assert!(one.values().iter().all(|v| v.abs() < 1e-10));
        assert_eq!(derivative_kernel(&s, 0).unwrap().operator(), build_kernel(&s).unwrap().operator());
    }

    #[test]
    fn derivative_order_and_eligibility() {
        let s = spec(0.4, 51, 40.0, 1.5);
        assert!(derivative_kernel(&s, 3).is_err());
        let g = Grid::uniform(51, 12.0).unwrap();
        let gs = ArKernelSpec::new(0.4, NoiseModel::new(NoiseFamily::gaussian(1.0), 1.5).unwrap(), g).unwrap();
        assert!(matches!(derivative_kernel(&gs, 1), Err(Error::Ineligible(_))));
        assert!(derivative_kernel(&gs, 0).is_ok());
    }

    #[test]
    fn finite_differences_converge() {
        let s = spec(0.4, 201, 40.0, 1.5);
        let from = WeightSpec::new(1.5, 0.0).unwrap();
        let to = WeightSpec::new(1.5, 1.0).unwrap();
        let d: Vec<f64> = [1e-2, 5e-3, 2.5e-3]
            .iter()
            .map(|&h| finite_difference_defect(&s, 1, h, from, to).unwrap())
            .collect();
        assert!(d[1] < d[0] && d[2] < d[1], "{d:?}");
        assert!(d[0] / d[2] > 3.0, "{d:?}");
    }

    #[test]
    fn holder_modulus_ratio_is_bounded() {
        let s = spec(0.5, 241, 60.0, 1.5);
        let pairs: Vec<(f64, f64)> = [0.1, 0.05, 0.025, 0.0125].iter().map(|d| (0.5, 0.5 + d)).collect();
        let h = holder_modulus_check(&s, 0, 0.0, 0.5, &pairs).unwrap();
        assert!((h.sigma - 0.75).abs() < 1e-12);
        let lo = h.ratios.iter().map(|t| t.2).fold(f64::MAX, f64::min);
        assert!(h.max_ratio / lo < 2.0, "{:?}", h.ratios);
        assert!(h.max_ratio <= h.bound);
        assert!(holder_modulus_check(&s, 0, 0.0, 1.0, &pairs).is_err());
        assert!(holder_modulus_check(&s, 0, 0.0, 0.5, &[(0.5, 0.5)]).is_err());
    }

    #[test]
    fn counterexample_limit() {
        let alphas: Vec<f64> = (0..7).map(|k| 0.5 + 0.2 * 0.5f64.powi(k)).collect();
        let res = run_counterexample(&t3(1.0), 0.5, &alphas).unwrap();
        assert_eq!(res.status, CounterexampleStatus::Ok);
        assert_eq!(res.a, 1.0);
        // closed-form t_3 masses
        let t = NoiseFamily::student_t(3.0);
        let i_a = (t.cdf(1.0) - t.cdf(-1.0)) - 2.0 * (t.cdf(2.0) - t.cdf(1.0));
        assert!((res.i_a - i_a).abs() < 1e-10);
        assert!(res.limit_check / res.limit.abs() < 1e-3);
        // a skewed density still converges to its own limit
        let skew = NoiseModel::new(NoiseFamily::StudentT { dof: 3.0, loc: 0.7, scale: 1.3 }, 1.0).unwrap();
        let res = run_counterexample(&skew, 0.5, &alphas).unwrap();
        let first = (res.ratios[0].1 - res.limit).abs();
        assert!(res.limit_check < first);
        assert!(run_counterexample(&t3(1.0), 0.5, &[]).is_err());
        assert!(run_counterexample(&t3(1.0), 0.5, &[0.6, 0.7]).is_err());
    }

    #[test]
    fn taylor_first_order_matches_finite_differences() {
        let s = spec(0.5, 301, 60.0, 1.5);
        let c = taylor_expansion(&s, 1, 0.2).unwrap();
        assert!(c.masses[0] < 1e-12);
        let gaps: Vec<f64> = [1e-2, 5e-3].iter().map(|&h| central_difference_gap(&s, &c, h).unwrap()).collect();
        assert!(gaps[1] < gaps[0] / 3.0, "{gaps:?}");
        assert!(taylor_expansion(&s, 2, 0.2).is_err());
        assert!(taylor_expansion(&s, 1, 0.4).is_err());
    }

    #[test]
    fn taylor_second_order_improves() {
        let s = spec(0.5, 301, 60.0, 2.5);
        let c = taylor_expansion(&s, 2, 0.1).unwrap();
        assert!(c.masses.iter().all(|m| *m < 1e-12));
        let eps = 0.04;
        let exact = invariant_measure(&build_kernel(&s.with_alpha(0.5 + eps).unwrap()).unwrap()).unwrap();
        let tv = |o: usize| {
            dual_distance(&exact, &c.partial_sum(eps, o).unwrap(), WeightSpec { r: 1.0, beta: 0.0 }).unwrap()
        };
        assert!(tv(2) < tv(1) && tv(1) < tv(0));
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(4, 2), 6.0);
        assert_eq!(binomial(5, 0), 1.0);
        assert_eq!(binomial(5, 5), 1.0);
    }
}
