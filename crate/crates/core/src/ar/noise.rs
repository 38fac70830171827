//! Noise densities for the AR(1) recursion, with their derivatives.

use rand::Rng;
use rand_distr::{Distribution, Normal, StudentT};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal as NormalDist, StudentsT};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum NoiseFamily {
    /// `N(mean, sd^2)`.
    Gaussian { mean: f64, sd: f64 },
    /// `c_k (1 + z^2/k)^{-(k+1)/2} / scale` with `z = (x - loc)/scale`.
    StudentT { dof: f64, loc: f64, scale: f64 },
}

impl NoiseFamily {
    pub fn gaussian(sd: f64) -> Self {
        NoiseFamily::Gaussian { mean: 0.0, sd }
    }

    pub fn student_t(dof: f64) -> Self {
        NoiseFamily::StudentT {
            dof,
            loc: 0.0,
            scale: 1.0,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            NoiseFamily::Gaussian { mean, sd } => {
                if !(sd > 0.0 && sd.is_finite() && mean.is_finite()) {
                    return Err(Error::InvalidParameter(format!("bad gaussian parameters ({mean}, {sd})")));
                }
            }
            NoiseFamily::StudentT { dof, loc, scale } => {
                if !(dof > 0.0 && scale > 0.0 && dof.is_finite() && scale.is_finite() && loc.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "bad student-t parameters (dof {dof}, loc {loc}, scale {scale})"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            NoiseFamily::Gaussian { .. } => "gaussian",
            NoiseFamily::StudentT { .. } => "student-t",
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            NoiseFamily::Gaussian { mean, sd } => {
                let z = (x - mean) / sd;
                (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
            }
            NoiseFamily::StudentT { dof, loc, scale } => {
                let z = (x - loc) / scale;
                student_const(dof) / scale * (1.0 + z * z / dof).powf(-(dof + 1.0) / 2.0)
            }
        }
    }

    /// `nu^{(j)}(x)` for any `j >= 0`.
    pub fn derivative(&self, j: usize, x: f64) -> f64 {
        if j == 0 {
            return self.pdf(x);
        }
        match *self {
            NoiseFamily::Gaussian { mean, sd } => {
                let z = (x - mean) / sd;
                let sign = if j.is_multiple_of(2) { 1.0 } else { -1.0 };
                sign * hermite_he(j, z) * self.pdf(x) / sd.powi(j as i32)
            }
            NoiseFamily::StudentT { dof, loc, scale } => {
                let z = (x - loc) / scale;
                let coeffs = student_taylor(dof, z, j);
                let fact: f64 = (1..=j).map(|k| k as f64).product();
                student_const(dof) / scale * fact * coeffs[j] / scale.powi(j as i32)
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            NoiseFamily::Gaussian { mean, sd } => NormalDist::new(mean, sd).unwrap().cdf(x),
            NoiseFamily::StudentT { dof, loc, scale } => StudentsT::new(loc, scale, dof).unwrap().cdf(x),
        }
    }

    /// Mass of `nu` outside `[-x_max, x_max]`.
    pub fn tail_mass(&self, x_max: f64) -> f64 {
        match *self {
            NoiseFamily::Gaussian { mean, sd } => {
                let d = NormalDist::new(mean, sd).unwrap();
                d.cdf(-x_max) + d.sf(x_max)
            }
            NoiseFamily::StudentT { dof, loc, scale } => {
                let d = StudentsT::new(loc, scale, dof).unwrap();
                d.cdf(-x_max) + d.sf(x_max)
            }
        }
    }

    pub fn mean(&self) -> Option<f64> {
        match *self {
            NoiseFamily::Gaussian { mean, .. } => Some(mean),
            NoiseFamily::StudentT { dof, loc, .. } => (dof > 1.0).then_some(loc),
        }
    }

    /// `E|noise|^r`, infinite when the moment does not exist.
    pub fn abs_moment(&self, r: f64) -> f64 {
        match *self {
            NoiseFamily::Gaussian { mean: 0.0, sd } => {
                sd.powf(r) * 2f64.powf(r / 2.0) * (ln_gamma((r + 1.0) / 2.0)).exp()
                    / std::f64::consts::PI.sqrt()
            }
            NoiseFamily::StudentT { dof, loc: 0.0, scale } => {
                if r >= dof {
                    return f64::INFINITY;
                }
                let lg = ln_gamma((r + 1.0) / 2.0) + ln_gamma((dof - r) / 2.0) - ln_gamma(dof / 2.0);
                scale.powf(r) * dof.powf(r / 2.0) * lg.exp() / std::f64::consts::PI.sqrt()
            }
            NoiseFamily::StudentT { dof, .. } if r >= dof => f64::INFINITY,
            _ => self.abs_moment_numeric(r),
        }
    }

    fn abs_moment_numeric(&self, r: f64) -> f64 {
        // x = loc + scale tan(theta) maps R onto (-pi/2, pi/2)
        let (loc, scale) = match *self {
            NoiseFamily::Gaussian { mean, sd } => (mean, sd),
            NoiseFamily::StudentT { loc, scale, .. } => (loc, scale),
        };
        let h = std::f64::consts::FRAC_PI_2;
        let f = |th: f64| {
            let c = th.cos();
            if c <= 0.0 {
                return 0.0;
            }
            let x = loc + scale * th.tan();
            let val = x.abs().powf(r) * self.pdf(x) * scale / (c * c);
            if val.is_finite() {
                val
            } else {
                0.0
            }
        };
        // split at x = 0 where |x|^r is not smooth
        let th0 = (-loc / scale).atan();
        quadrature::integrate(f, -h, th0, 1e-13).integral + quadrature::integrate(f, th0, h, 1e-13).integral
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            NoiseFamily::Gaussian { mean, sd } => Normal::new(mean, sd).unwrap().sample(rng),
            NoiseFamily::StudentT { dof, loc, scale } => {
                loc + scale * StudentT::new(dof).unwrap().sample(rng)
            }
        }
    }
}

fn student_const(dof: f64) -> f64 {
    (ln_gamma((dof + 1.0) / 2.0) - ln_gamma(dof / 2.0)).exp() / (dof * std::f64::consts::PI).sqrt()
}

/// Probabilists' Hermite polynomial `He_n(z)`.
fn hermite_he(n: usize, z: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, z);
    if n == 0 {
        return prev;
    }
    for k in 1..n {
        let next = z * cur - k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Taylor coefficients at `z` of `(1 + (z+t)^2/k)^{-(k+1)/2}` up to order `n`.
fn student_taylor(dof: f64, z: f64, n: usize) -> Vec<f64> {
    let p = -(dof + 1.0) / 2.0;
    let u = [1.0 + z * z / dof, 2.0 * z / dof, 1.0 / dof];
    let mut w = vec![0.0; n + 1];
    w[0] = u[0].powf(p);
    for m in 1..=n {
        let mut acc = 0.0;
        for j in 1..=m.min(2) {
            acc += ((p + 1.0) * j as f64 - m as f64) * u[j] * w[m - j];
        }
        w[m] = acc / (m as f64 * u[0]);
    }
    w
}

/// A noise density together with the moment order `r` of the weight
/// `V = (1+|x|)^r` it is used with.
#[derive(Debug, Clone, Serialize)]
pub struct NoiseModel {
    pub family: NoiseFamily,
    pub r: f64,
    /// `E|noise|^r`.
    pub moment_r: f64,
    /// `A_j = sup |nu^{(j)}| / nu` for `j = 0..=floor(r)+1`; `A_0 = 1`.
    pub ratio_bounds: Vec<f64>,
}

impl NoiseModel {
    pub fn new(family: NoiseFamily, r: f64) -> Result<Self> {
        family.validate()?;
        if !(r >= 1.0 && r.is_finite()) {
            return Err(Error::InvalidParameter(format!("moment order r must be >= 1, got {r}")));
        }
        let moment_r = family.abs_moment(r);
        if !moment_r.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "{} noise has no finite moment of order {r}",
                family.name()
            )));
        }
        let top = r.floor() as usize + 1;
        let ratio_bounds = (0..=top).map(|j| ratio_bound(&family, j)).collect();
        Ok(NoiseModel {
            family,
            r,
            moment_r,
            ratio_bounds,
        })
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.family.pdf(x)
    }

    pub fn derivative(&self, j: usize, x: f64) -> f64 {
        self.family.derivative(j, x)
    }

    pub fn floor_r(&self) -> usize {
        self.r.floor() as usize
    }

    /// Positive density, finite ratio bounds up to `floor(r)+1` and non-integer `r`.
    pub fn is_expansion_eligible(&self) -> bool {
        self.r.fract() != 0.0 && self.ratio_bounds.iter().all(|a| a.is_finite())
    }

    pub fn eligibility(&self) -> Result<()> {
        if self.r.fract() == 0.0 {
            return Err(Error::Ineligible(format!("moment order r = {} is an integer", self.r)));
        }
        if let Some(j) = self.ratio_bounds.iter().position(|a| !a.is_finite()) {
            return Err(Error::Ineligible(format!(
                "sup |nu^({j})|/nu is infinite for {} noise",
                self.family.name()
            )));
        }
        Ok(())
    }

    /// `max_j A_j`.
    pub fn ratio_bound_max(&self) -> f64 {
        self.ratio_bounds.iter().cloned().fold(0.0, f64::max)
    }

    /// Default cap on the drift constant, `10 (1 + E|noise|^r)`.
    pub fn default_l_cap(&self) -> f64 {
        10.0 * (1.0 + self.moment_r)
    }
}

fn ratio_bound(family: &NoiseFamily, j: usize) -> f64 {
    if j == 0 {
        return 1.0;
    }
    match *family {
        // |He_j(z)| is unbounded
        NoiseFamily::Gaussian { .. } => f64::INFINITY,
        NoiseFamily::StudentT { dof, loc, scale } => {
            // the ratio is a rational function of z decaying at infinity;
            // scan then refine around the best node
            let zmax = 20.0 * (dof.sqrt() + 1.0);
            let steps = 40_000;
            let ratio = |z: f64| {
                let x = loc + scale * z;
                (family.derivative(j, x) / family.pdf(x)).abs()
            };
            let mut best = (0.0, 0.0);
            for s in 0..=steps {
                let z = -zmax + 2.0 * zmax * s as f64 / steps as f64;
                let v = ratio(z);
                if v > best.1 {
                    best = (z, v);
                }
            }
            let mut h = 2.0 * zmax / steps as f64;
            let mut z = best.0;
            for _ in 0..60 {
                let (l, r) = (ratio(z - h), ratio(z + h));
                if l > best.1 {
                    z -= h;
                    best.1 = l;
                } else if r > best.1 {
                    z += h;
                    best.1 = r;
                } else {
                    h *= 0.5;
                }
            }
            best.1
        }
    }
}
