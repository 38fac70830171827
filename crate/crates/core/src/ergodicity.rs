//! Invariant measures, geometric rates, resolvents, the contour-integral
//! eigenprojection and the generalized potential `R = (I - P + Pi)^{-1}`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{operator_norm_of, DiscretizedKernel};
use crate::weighted_space::{Grid, SignedDensity, WeightSpec, WeightedFunction};

/// Shift used by the inverse iteration on the adjoint.
const INVERSE_SHIFT: f64 = 1e-7;
/// Subdominant moduli this close to 1 are treated as a second unit eigenvalue.
const UNIQUENESS_TOL: f64 = 1e-8;
/// Negative masses beyond this fraction of the largest mass are a failure.
const NEGATIVITY_TOL: f64 = 1e-10;

/// Result of the invariant-measure solve.
#[derive(Debug, Clone)]
pub struct InvariantSolution {
    pub density: SignedDensity,
    /// `||m P - m||_1` in node masses.
    pub fixed_point_residual: f64,
    /// Estimated spectral radius of `P - Pi`.
    pub subdominant_modulus: f64,
}

impl InvariantSolution {
    /// `pi(V^beta)`.
    pub fn moment(&self, w: WeightSpec) -> f64 {
        self.density.dual_norm(w)
    }
}

/// The invariant probability density of a Markov kernel.
pub fn invariant_measure(p: &DiscretizedKernel) -> Result<SignedDensity> {
    solve_invariant(p).map(|s| s.density)
}

pub fn solve_invariant(p: &DiscretizedKernel) -> Result<InvariantSolution> {
    if !p.is_markov() {
        return Err(Error::InvalidParameter("invariant measure needs a Markov kernel".into()));
    }
    let grid = p.grid();
    let n = grid.len();
    let op = p.operator();

    let modulus = subdominant_modulus(op);
    if modulus >= 1.0 - UNIQUENESS_TOL {
        return Err(Error::NonUnique { modulus });
    }

    // inverse iteration on M^T with a shift just above 1
    let mut shifted = op.transpose();
    for i in 0..n {
        shifted[(i, i)] -= 1.0 + INVERSE_SHIFT;
    }
    let lu = shifted.lu();
    let mut m = DVector::from_column_slice(grid.weights()) / (2.0 * grid.x_max());
    for _ in 0..8 {
        let next = lu
            .solve(&m)
            .ok_or_else(|| Error::Singular("shifted adjoint is singular".into()))?;
        let s = next.sum();
        if !(s.is_finite() && s != 0.0) {
            return Err(Error::Discretization("inverse iteration broke down".into()));
        }
        let next = next / s;
        let change = (&next - &m).abs().sum();
        m = next;
        if change < 1e-15 {
            break;
        }
    }
    let top = m.iter().cloned().fold(0.0, f64::max);
    let bottom = m.iter().cloned().fold(0.0, f64::min);
    if bottom < -NEGATIVITY_TOL * top {
        return Err(Error::Discretization(format!(
            "invariant vector has negative mass {bottom:.3e} (max {top:.3e})"
        )));
    }
    let residual = (op.tr_mul(&m) - &m).abs().sum();
    let density = SignedDensity::from_masses(grid, m.as_slice())?;
    Ok(InvariantSolution {
        density,
        fixed_point_residual: residual,
        subdominant_modulus: modulus,
    })
}

/// Spectral radius of `M` restricted to functions with `pi(f) = 0`,
/// estimated by power iteration on `f -> Mf - mean(Mf)` with a fixed start.
///
/// The deflation uses the uniform row average, which kills the constant
/// direction exactly without knowing `pi`.
fn subdominant_modulus(op: &DMatrix<f64>) -> f64 {
    let n = op.nrows();
    if n < 2 {
        return 0.0;
    }
    let mut v = DVector::from_fn(n, |i, _| (1.3 * i as f64).sin() + (0.7 * i as f64).cos());
    let center = |v: &mut DVector<f64>| {
        let mean = v.mean();
        v.add_scalar_mut(-mean);
    };
    center(&mut v);
    let burn = 40;
    let measure = 40;
    let mut log_growth = 0.0;
    for it in 0..burn + measure {
        let norm = v.norm();
        if norm == 0.0 || !norm.is_finite() {
            return 0.0;
        }
        v /= norm;
        let mut next = op * &v;
        center(&mut next);
        if it >= burn {
            let g = next.norm();
            if g == 0.0 {
                return 0.0;
            }
            log_growth += g.ln();
        }
        v = next;
    }
    (log_growth / measure as f64).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RateStatus {
    /// `d_n` decays geometrically over the fit window.
    Fitted,
    /// `d_n` fell below the numerical floor before the window started.
    Immediate,
    /// The fitted rate is not below one.
    NotDecaying,
}

#[derive(Debug, Clone, Copy)]
pub struct RateConfig {
    /// First `n` used in the fit.
    pub burn_in: usize,
    /// Last `n` considered.
    pub max_n: usize,
    /// `d_n` below this value is treated as numerically zero.
    pub floor: f64,
}

impl Default for RateConfig {
    fn default() -> Self {
        RateConfig {
            burn_in: 5,
            max_n: 40,
            floor: 1e-11,
        }
    }
}

/// Fitted `||P^n - Pi||_beta <= c kappa^n`.
#[derive(Debug, Clone, Serialize)]
pub struct RateEstimate {
    pub kappa_hat: f64,
    /// Smallest `c` with `d_n <= c kappa_hat^n` over the window.
    pub c_hat: f64,
    /// Intercept of the least-squares line, `exp(b)`.
    pub c_fit: f64,
    pub fit_window: (usize, usize),
    /// `max |log d_n - line_n| / |line_n|` over the window.
    pub residual: f64,
    /// `(n, d_n)` for `n = 1..`.
    pub diagnostics: Vec<(usize, f64)>,
    pub status: RateStatus,
}

pub fn estimate_rate(p: &DiscretizedKernel, w: WeightSpec) -> Result<RateEstimate> {
    estimate_rate_with(p, w, RateConfig::default())
}

pub fn estimate_rate_with(p: &DiscretizedKernel, w: WeightSpec, cfg: RateConfig) -> Result<RateEstimate> {
    if cfg.burn_in == 0 || cfg.max_n < cfg.burn_in + 2 {
        return Err(Error::InvalidParameter("rate window needs 1 <= burn_in < max_n - 1".into()));
    }
    let pi = invariant_measure(p)?;
    let grid = p.grid();
    let masses = pi.masses();
    let n = grid.len();
    // (P - Pi)^k = P^k - Pi avoids the cancellation in P^k - Pi
    let deflated = p.operator() - DMatrix::from_fn(n, n, |_, j| masses[j]);
    let mut q = deflated.clone();
    let mut diagnostics = Vec::new();
    for k in 1..=cfg.max_n {
        if k > 1 {
            q = &q * &deflated;
        }
        let d = operator_norm_of(grid, &q, w, w)?;
        diagnostics.push((k, d));
        if d < cfg.floor {
            break;
        }
    }
    let window: Vec<(usize, f64)> = diagnostics
        .iter()
        .cloned()
        .filter(|&(k, d)| k >= cfg.burn_in && d >= cfg.floor)
        .collect();
    if window.len() < 3 {
        // fast mixing: use whatever lies above the floor from n = 1
        let early: Vec<(usize, f64)> = diagnostics.iter().cloned().filter(|&(_, d)| d >= cfg.floor).collect();
        let kappa = match early.last() {
            None => 0.0,
            Some(&(k, d)) => (d / diagnostics[0].1.max(cfg.floor)).powf(1.0 / k as f64).min(cfg.floor.powf(1.0 / (k + 1) as f64)),
        };
        return Ok(RateEstimate {
            kappa_hat: kappa,
            c_hat: diagnostics[0].1 / kappa.max(f64::MIN_POSITIVE),
            c_fit: diagnostics[0].1,
            fit_window: (1, early.last().map(|e| e.0).unwrap_or(1)),
            residual: 0.0,
            diagnostics,
            status: RateStatus::Immediate,
        });
    }
    let (slope, intercept) = least_squares(
        &window.iter().map(|&(k, _)| k as f64).collect::<Vec<_>>(),
        &window.iter().map(|&(_, d)| d.ln()).collect::<Vec<_>>(),
    );
    let kappa_hat = slope.exp();
    let residual = window
        .iter()
        .map(|&(k, d)| {
            let line = intercept + slope * k as f64;
            (d.ln() - line).abs() / line.abs().max(f64::MIN_POSITIVE)
        })
        .fold(0.0, f64::max);
    let c_hat = window
        .iter()
        .map(|&(k, d)| d / kappa_hat.powi(k as i32))
        .fold(0.0, f64::max);
    let status = if kappa_hat < 1.0 {
        RateStatus::Fitted
    } else {
        RateStatus::NotDecaying
    };
    Ok(RateEstimate {
        kappa_hat,
        c_hat,
        c_fit: intercept.exp(),
        fit_window: (window[0].0, window[window.len() - 1].0),
        residual,
        diagnostics,
        status,
    })
}

/// Ordinary least squares `y = slope x + intercept`.
pub(crate) fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// `(zI - P)^{-1}` as a complex operator matrix.
#[derive(Debug, Clone)]
pub struct Resolvent {
    grid: Arc<Grid>,
    z: Complex64,
    matrix: DMatrix<Complex64>,
}

impl Resolvent {
    pub fn z(&self) -> Complex64 {
        self.z
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    /// `||(zI - P)^{-1}||_{beta, beta'}` for complex `f`: the row sums of moduli.
    pub fn operator_norm(&self, from: WeightSpec, to: WeightSpec) -> Result<f64> {
        let moduli = self.matrix.map(|c| c.norm());
        operator_norm_of(&self.grid, &moduli, from, to)
    }

    /// Real part as a kernel; exact for real `z`.
    pub fn real_part(&self) -> DiscretizedKernel {
        DiscretizedKernel::from_operator(self.grid.clone(), self.matrix.map(|c| c.re), false)
            .expect("resolvent has grid dimensions")
    }
}

pub fn resolvent(p: &DiscretizedKernel, z: Complex64) -> Result<Resolvent> {
    let n = p.grid().len();
    let mut a: DMatrix<Complex64> = p.operator().map(|v| Complex64::new(-v, 0.0));
    for i in 0..n {
        a[(i, i)] += z;
    }
    let proximity = |residual: f64| Error::SpectralProximity {
        re: z.re,
        im: z.im,
        residual,
    };
    let inv = a.clone().lu().try_inverse().ok_or_else(|| proximity(f64::INFINITY))?;
    let check = &a * &inv;
    let mut residual = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            residual = residual.max((check[(i, j)] - Complex64::new(target, 0.0)).norm());
        }
    }
    if !residual.is_finite() || residual > 1e-8 {
        return Err(proximity(residual));
    }
    Ok(Resolvent {
        grid: p.grid().clone(),
        z,
        matrix: inv,
    })
}

/// `(1/2 pi i) oint_Gamma (zI - P)^{-1} dz` over the circle `|z - center| = radius`
/// by the trapezoid rule on `n_points` equispaced nodes.
pub fn spectral_projection(
    p: &DiscretizedKernel,
    center: Complex64,
    radius: f64,
    n_points: usize,
) -> Result<DiscretizedKernel> {
    if n_points < 4 || !(radius > 0.0) {
        return Err(Error::InvalidParameter("contour needs radius > 0 and >= 4 points".into()));
    }
    let n = p.grid().len();
    let mut acc: DMatrix<Complex64> = DMatrix::zeros(n, n);
    // a real kernel and a contour symmetric about the real axis give
    // conjugate pairs; only the upper half needs solving when center is real
    let symmetric = center.im == 0.0 && n_points.is_multiple_of(2);
    let last = if symmetric { n_points / 2 } else { n_points - 1 };
    for k in 0..=last {
        let theta = 2.0 * std::f64::consts::PI * k as f64 / n_points as f64;
        let e = Complex64::from_polar(1.0, theta);
        let z = center + radius * e;
        let r = resolvent(p, z).map_err(|err| Error::Contour(format!("at theta = {theta:.4}: {err}")))?;
        let factor = if symmetric && k != 0 && k != n_points / 2 { 2.0 } else { 1.0 };
        let coeff = e * (radius * factor / n_points as f64);
        acc += r.matrix.map(|c| c * coeff);
    }
    let pi_op = acc.map(|c| c.re);
    let proj = DiscretizedKernel::from_operator(p.grid().clone(), pi_op, false)?;

    let sq = proj.compose(&proj)?.sub(&proj)?;
    let w = WeightSpec { r: 1.0, beta: 1.0 };
    let defect = sq.operator_norm(w, w)?;
    let rank = proj.operator().trace();
    if defect > 1e-8 || (rank - 1.0).abs() > 1e-6 {
        return Err(Error::SeparationFailure {
            defect: defect.max((rank - 1.0).abs()),
        });
    }
    Ok(proj)
}

/// The generalized potential `R = (I - P + Pi)^{-1}` with `Pi f = pi(f) 1`.
#[derive(Debug, Clone)]
pub struct PotentialOperator {
    pub kernel: DiscretizedKernel,
    pub invariant: SignedDensity,
    /// `max |((I - P + Pi) R - I)_ij|`.
    pub identity_residual: f64,
    /// `max_i |(R 1)_i - 1|`.
    pub constant_residual: f64,
    /// `max_j |(pi R)_j - pi_j|` in masses.
    pub invariance_residual: f64,
}

impl PotentialOperator {
    /// The rank-one projector `Pi`.
    pub fn projector(&self) -> DiscretizedKernel {
        DiscretizedKernel::rank_one(&self.invariant)
    }

    /// `mu R` for a signed measure `mu`.
    pub fn apply_left(&self, mu: &SignedDensity) -> Result<SignedDensity> {
        self.kernel.adjoint_apply(mu)
    }
}

pub fn generalized_potential(p: &DiscretizedKernel) -> Result<PotentialOperator> {
    let pi = invariant_measure(p)?;
    let grid = p.grid();
    let n = grid.len();
    let m = pi.masses();
    let a = DMatrix::from_fn(n, n, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        id - p.operator()[(i, j)] + m[j]
    });
    let r = a
        .clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Singular("I - P + Pi is singular".into()))?;
    let identity_residual = (&a * &r - DMatrix::<f64>::identity(n, n)).abs().max();
    let ones = DVector::from_element(n, 1.0);
    let constant_residual = (&r * &ones - &ones).abs().max();
    let mv = DVector::from_vec(m);
    let invariance_residual = (r.tr_mul(&mv) - &mv).abs().max();
    if !identity_residual.is_finite() || identity_residual > 1e-6 {
        return Err(Error::Singular(format!(
            "potential solve residual {identity_residual:.3e}"
        )));
    }
    Ok(PotentialOperator {
        kernel: DiscretizedKernel::from_operator(grid.clone(), r, false)?,
        invariant: pi,
        identity_residual,
        constant_residual,
        invariance_residual,
    })
}

/// `(P f)` against the constant function, used by the rank-one checks.
pub fn project_function(pi: &SignedDensity, f: &WeightedFunction) -> Result<WeightedFunction> {
    let v = crate::weighted_space::integrate(f, pi)?;
    Ok(WeightedFunction::constant(pi.grid(), v))
}
