//! Discretized integral operators and the drift certificate.
//!
//! A kernel is stored through its operator matrix `M_ij = w_j K_ij`, so that
//! `(Tf)_i = sum_j M_ij f_j`, compositions are plain matrix products and the
//! adjoint acts on node masses `m_i = w_i p_i` as `m -> m M`.

use std::io::{BufRead, Write};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::weighted_space::{ensure_same_grid, Grid, SignedDensity, WeightSpec, WeightedFunction};

/// Tolerance on `sum_j M_ij = 1` for kernels flagged as Markov.
pub const MARKOV_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct DiscretizedKernel {
    grid: Arc<Grid>,
    op: DMatrix<f64>,
    is_markov: bool,
}

impl DiscretizedKernel {
    /// Kernel from its operator matrix `M_ij = w_j K_ij`.
    pub fn from_operator(grid: Arc<Grid>, op: DMatrix<f64>, is_markov: bool) -> Result<Self> {
        let n = grid.len();
        if op.nrows() != n || op.ncols() != n {
            return Err(Error::Domain(format!(
                "operator is {}x{}, grid has {n} nodes",
                op.nrows(),
                op.ncols()
            )));
        }
        let k = DiscretizedKernel {
            grid,
            op,
            is_markov,
        };
        if is_markov {
            let defect = k.markov_defect();
            if defect > MARKOV_TOL {
                return Err(Error::Domain(format!(
                    "kernel flagged Markov but violates stochasticity by {defect:.3e}"
                )));
            }
        }
        Ok(k)
    }

    /// Kernel from its density matrix `K_ij = k(x_i, y_j)`.
    pub fn from_density(grid: Arc<Grid>, density: DMatrix<f64>, is_markov: bool) -> Result<Self> {
        let mut op = density;
        for (j, w) in grid.weights().iter().enumerate() {
            op.column_mut(j).scale_mut(*w);
        }
        Self::from_operator(grid, op, is_markov)
    }

    pub fn identity(grid: &Arc<Grid>) -> Self {
        DiscretizedKernel {
            grid: grid.clone(),
            op: DMatrix::identity(grid.len(), grid.len()),
            is_markov: true,
        }
    }

    /// The rank-one operator `f -> p(f) 1`.
    pub fn rank_one(p: &SignedDensity) -> Self {
        let grid = p.grid().clone();
        let n = grid.len();
        let masses = p.masses();
        let op = DMatrix::from_fn(n, n, |_, j| masses[j]);
        let is_markov = masses.iter().all(|m| *m >= 0.0)
            && (masses.iter().sum::<f64>() - 1.0).abs() <= MARKOV_TOL;
        DiscretizedKernel {
            grid,
            op,
            is_markov,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn operator(&self) -> &DMatrix<f64> {
        &self.op
    }

    pub fn into_operator(self) -> DMatrix<f64> {
        self.op
    }

    pub fn is_markov(&self) -> bool {
        self.is_markov
    }

    /// Density entry `K_ij`.
    pub fn density(&self, i: usize, j: usize) -> f64 {
        self.op[(i, j)] / self.grid.weights()[j]
    }

    /// Largest violation of `K >= 0` and `sum_j w_j K_ij = 1`.
    pub fn markov_defect(&self) -> f64 {
        let mut worst = 0.0_f64;
        for row in self.op.row_iter() {
            let mut s = 0.0;
            for &v in row.iter() {
                if v < 0.0 {
                    worst = worst.max(-v);
                }
                s += v;
            }
            worst = worst.max((s - 1.0).abs());
        }
        worst
    }

    /// `(Tf)_i = sum_j w_j K_ij f_j`.
    pub fn apply(&self, f: &WeightedFunction) -> Result<WeightedFunction> {
        ensure_same_grid(&self.grid, f.grid())?;
        let v = DVector::from_column_slice(f.values());
        let out = &self.op * v;
        WeightedFunction::new(self.grid.clone(), out.as_slice().to_vec())
    }

    /// `(pT)_j = sum_i w_i p_i K_ij`, a density again.
    pub fn adjoint_apply(&self, p: &SignedDensity) -> Result<SignedDensity> {
        ensure_same_grid(&self.grid, p.grid())?;
        let m = DVector::from_vec(p.masses());
        let out = self.op.tr_mul(&m);
        SignedDensity::from_masses(&self.grid, out.as_slice())
    }

    /// `||T||_{beta, beta'}`, the exact supremum over the discretization,
    /// attained at `f_j = sign(K_ij) V(x_j)^beta`.
    pub fn operator_norm(&self, from: WeightSpec, to: WeightSpec) -> Result<f64> {
        operator_norm_of(&self.grid, &self.op, from, to)
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &DiscretizedKernel) -> Result<DiscretizedKernel> {
        ensure_same_grid(&self.grid, &other.grid)?;
        Ok(DiscretizedKernel {
            grid: self.grid.clone(),
            op: &self.op * &other.op,
            is_markov: self.is_markov && other.is_markov,
        })
    }

    pub fn sub(&self, other: &DiscretizedKernel) -> Result<DiscretizedKernel> {
        ensure_same_grid(&self.grid, &other.grid)?;
        Ok(DiscretizedKernel {
            grid: self.grid.clone(),
            op: &self.op - &other.op,
            is_markov: false,
        })
    }

    pub fn add(&self, other: &DiscretizedKernel) -> Result<DiscretizedKernel> {
        ensure_same_grid(&self.grid, &other.grid)?;
        Ok(DiscretizedKernel {
            grid: self.grid.clone(),
            op: &self.op + &other.op,
            is_markov: false,
        })
    }

    pub fn scale(&self, c: f64) -> DiscretizedKernel {
        DiscretizedKernel {
            grid: self.grid.clone(),
            op: &self.op * c,
            is_markov: self.is_markov && c == 1.0,
        }
    }

    /// `T^n`; `n = 0` is the identity.
    pub fn power(&self, n: i64) -> Result<DiscretizedKernel> {
        if n < 0 {
            return Err(Error::InvalidParameter(format!("negative power {n}")));
        }
        let mut n = n as u64;
        let mut result: Option<DMatrix<f64>> = None;
        let mut base = self.op.clone();
        while n > 0 {
            if n & 1 == 1 {
                result = Some(match result {
                    None => base.clone(),
                    Some(r) => &r * &base,
                });
            }
            n >>= 1;
            if n > 0 {
                base = &base * &base;
            }
        }
        Ok(DiscretizedKernel {
            grid: self.grid.clone(),
            op: result.unwrap_or_else(|| DMatrix::identity(self.grid.len(), self.grid.len())),
            is_markov: self.is_markov,
        })
    }

    /// Certifies `T^N V^beta <= delta^N V^beta + L` on the grid.
    ///
    /// On a truncated domain any `delta` works with a large enough `L`, so
    /// the certificate takes the smallest `delta^N` at which the boundary
    /// nodes (largest weight) are no longer the unique maximizers of
    /// `T^N V - delta^N V`; this is the largest secant slope between a
    /// boundary node and an interior node. If the resulting `L` exceeds
    /// `l_cap`, `delta` is raised until `L = l_cap`.
    pub fn fit_drift(&self, w: WeightSpec, n_steps: usize, l_cap: f64) -> Result<DriftCertificate> {
        if !self.is_markov {
            return Err(Error::InvalidParameter("fit_drift needs a Markov kernel".into()));
        }
        if n_steps == 0 {
            return Err(Error::InvalidParameter("drift needs N >= 1".into()));
        }
        if !(l_cap > 0.0) {
            return Err(Error::InvalidParameter(format!("L_cap must be positive, got {l_cap}")));
        }
        let v = self.grid.weight_values(w);
        let pn = self.power(n_steps as i64)?;
        let g = &pn.op * DVector::from_column_slice(&v);
        let v_top = v.iter().cloned().fold(f64::MIN, f64::max);
        let top: Vec<usize> = (0..v.len()).filter(|&i| v[i] >= v_top * (1.0 - 1e-14)).collect();

        let mut slope = 0.0_f64;
        for &e in &top {
            for i in 0..v.len() {
                if v[i] < v[e] * (1.0 - 1e-14) {
                    slope = slope.max((g[e] - g[i]) / (v[e] - v[i]));
                }
            }
        }
        let intercept = |t: f64| (0..v.len()).map(|i| g[i] - t * v[i]).fold(f64::MIN, f64::max);
        let mut t = slope;
        if intercept(t) > l_cap {
            t = (0..v.len())
                .map(|i| (g[i] - l_cap) / v[i])
                .fold(t, f64::max);
        }
        let delta = t.max(0.0).powf(1.0 / n_steps as f64);
        // recompute with the rounded delta so the residual is exact
        let t = delta.powi(n_steps as i32);
        let l = intercept(t).max(f64::MIN_POSITIVE);
        let residual = (0..v.len())
            .map(|i| (g[i] - t * v[i] - l).max(0.0))
            .fold(0.0, f64::max);
        let status = if delta < 1.0 && l <= l_cap * (1.0 + 1e-12) {
            DriftStatus::Certified
        } else {
            DriftStatus::Failed
        };
        Ok(DriftCertificate {
            n_steps,
            delta,
            l,
            residual,
            status,
        })
    }

    /// Kernel density as CSV: a one-line header `n=..,x_max=..,r=..`
    /// followed by `n` rows of `K_ij`. Only uniform trapezoid grids
    /// round-trip through this format.
    pub fn write_csv<W: Write>(&self, mut out: W, r: f64) -> Result<()> {
        let n = self.grid.len();
        writeln!(out, "n={n},x_max={},r={r}", self.grid.x_max())?;
        for i in 0..n {
            let row: Vec<String> = (0..n).map(|j| format!("{}", self.density(i, j))).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Reads the format of [`write_csv`](Self::write_csv). Returns the kernel and `r`.
    pub fn read_csv<R: BufRead>(input: R, is_markov: bool) -> Result<(Self, f64)> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty kernel file".into()))??;
        let mut n = None;
        let mut x_max = None;
        let mut r = None;
        for field in header.trim().split(',') {
            let (key, val) = field
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("bad header field {field:?}")))?;
            match key.trim() {
                "n" => n = val.trim().parse::<usize>().ok(),
                "x_max" => x_max = val.trim().parse::<f64>().ok(),
                "r" => r = val.trim().parse::<f64>().ok(),
                other => return Err(Error::Parse(format!("unknown header key {other:?}"))),
            }
        }
        let (n, x_max, r) = match (n, x_max, r) {
            (Some(n), Some(x), Some(r)) => (n, x, r),
            _ => return Err(Error::Parse("header must carry n, x_max and r".into())),
        };
        let grid = Grid::uniform(n, x_max)?;
        let mut dens = DMatrix::zeros(n, n);
        for i in 0..n {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse(format!("missing row {i}")))??;
            let vals: Vec<&str> = line.trim().split(',').collect();
            if vals.len() != n {
                return Err(Error::Parse(format!("row {i} has {} entries", vals.len())));
            }
            for (j, s) in vals.iter().enumerate() {
                dens[(i, j)] = s
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {i}: {e}")))?;
            }
        }
        Ok((Self::from_density(grid, dens, is_markov)?, r))
    }
}

pub(crate) fn operator_norm_of(
    grid: &Grid,
    op: &DMatrix<f64>,
    from: WeightSpec,
    to: WeightSpec,
) -> Result<f64> {
    if from.r != to.r {
        return Err(Error::InvalidParameter(format!(
            "operator norm needs a common r, got {} and {}",
            from.r, to.r
        )));
    }
    let vin = grid.weight_values(from);
    let vout = grid.weight_values(to);
    let mut best = 0.0_f64;
    for (i, row) in op.row_iter().enumerate() {
        let s: f64 = row.iter().zip(&vin).map(|(m, v)| m.abs() * v).sum();
        best = best.max(s / vout[i]);
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DriftStatus {
    Certified,
    Failed,
}

/// Constants `(N, delta, L)` of the drift inequality `P^N V <= delta^N V + L`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DriftCertificate {
    pub n_steps: usize,
    pub delta: f64,
    pub l: f64,
    pub residual: f64,
    pub status: DriftStatus,
}

impl DriftCertificate {
    pub fn is_certified(&self) -> bool {
        self.status == DriftStatus::Certified
    }

    /// Pointwise re-check with given constants; returns the largest violation.
    pub fn recheck(kernel: &DiscretizedKernel, w: WeightSpec, n_steps: usize, delta: f64, l: f64) -> Result<f64> {
        let v = WeightedFunction::weight(kernel.grid(), w);
        let g = kernel.power(n_steps as i64)?.apply(&v)?;
        let t = delta.powi(n_steps as i32);
        Ok(g
            .values()
            .iter()
            .zip(v.values())
            .map(|(gi, vi)| (gi - t * vi - l).max(0.0))
            .fold(0.0, f64::max))
    }
}

/// Worst-case certificate over a family: the largest `delta` and `L`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FamilyCertificate {
    pub delta: f64,
    pub l: f64,
    pub max_residual: f64,
    pub all_certified: bool,
}

/// Combines per-member certificates and re-checks every member against the
/// common `(delta, L)`.
pub fn certify_family(
    kernels: &[&DiscretizedKernel],
    w: WeightSpec,
    n_steps: usize,
    l_cap: f64,
) -> Result<(Vec<DriftCertificate>, FamilyCertificate)> {
    let certs = kernels
        .iter()
        .map(|k| k.fit_drift(w, n_steps, l_cap))
        .collect::<Result<Vec<_>>>()?;
    let delta = certs.iter().map(|c| c.delta).fold(0.0, f64::max);
    let l = certs.iter().map(|c| c.l).fold(0.0, f64::max);
    let mut max_residual = 0.0_f64;
    for k in kernels {
        max_residual = max_residual.max(DriftCertificate::recheck(k, w, n_steps, delta, l)?);
    }
    let all_certified = certs.iter().all(|c| c.is_certified()) && delta < 1.0;
    Ok((
        certs,
        FamilyCertificate {
            delta,
            l,
            max_residual,
            all_certified,
        },
    ))
}
