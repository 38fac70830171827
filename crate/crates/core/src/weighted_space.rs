//! Grids on a truncated real line, the weights `V(x) = (1+|x|)^r`, and the
//! weighted norms used throughout the crate.
//!
//! Functions live in `B_beta`, normed by `sup V^{-beta} |f|`. Measures are
//! stored as densities against Lebesgue measure; the pairing with a function
//! and all dual distances are evaluated with the grid's quadrature weights.

use std::io::{BufRead, Write};
use std::sync::Arc;

use crate::error::{Error, Result};

/// Relative tolerance on `sum(w) = 2 X_max`.
const WEIGHT_SUM_TOL: f64 = 1e-10;

/// Quadrature grid on `[-x_max, x_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    x_max: f64,
}

impl Grid {
    /// Composite trapezoid rule on `n` equispaced nodes covering `[-x_max, x_max]`.
    pub fn uniform(n: usize, x_max: f64) -> Result<Arc<Grid>> {
        if n < 2 {
            return Err(Error::Domain(format!("grid needs at least 2 nodes, got {n}")));
        }
        if !(x_max > 0.0 && x_max.is_finite()) {
            return Err(Error::Domain(format!("x_max must be positive, got {x_max}")));
        }
        let h = 2.0 * x_max / (n - 1) as f64;
        let mut nodes: Vec<f64> = (0..n).map(|i| -x_max + i as f64 * h).collect();
        // pin the endpoints and the symmetry exactly
        nodes[n - 1] = x_max;
        for i in 0..n / 2 {
            let v = 0.5 * (nodes[n - 1 - i] - nodes[i]);
            nodes[i] = -v;
            nodes[n - 1 - i] = v;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        let mut weights = vec![h; n];
        weights[0] = 0.5 * h;
        weights[n - 1] = 0.5 * h;
        Ok(Arc::new(Grid {
            nodes,
            weights,
            x_max,
        }))
    }

    /// Grid from explicit nodes and weights, validated against the grid invariants.
    pub fn from_parts(nodes: Vec<f64>, weights: Vec<f64>, x_max: f64) -> Result<Arc<Grid>> {
        if nodes.is_empty() {
            return Err(Error::Domain("empty grid".into()));
        }
        if nodes.len() != weights.len() {
            return Err(Error::Domain(format!(
                "{} nodes but {} weights",
                nodes.len(),
                weights.len()
            )));
        }
        if !(x_max > 0.0 && x_max.is_finite()) {
            return Err(Error::Domain(format!("x_max must be positive, got {x_max}")));
        }
        if nodes.windows(2).any(|p| p[1] <= p[0]) {
            return Err(Error::Domain("nodes must be strictly increasing".into()));
        }
        if nodes.iter().any(|x| x.abs() > x_max * (1.0 + 1e-12)) {
            return Err(Error::Domain("node outside [-x_max, x_max]".into()));
        }
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::Domain("quadrature weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 2.0 * x_max).abs() > WEIGHT_SUM_TOL * 2.0 * x_max {
            return Err(Error::Domain(format!(
                "weights sum to {total}, expected {}",
                2.0 * x_max
            )));
        }
        Ok(Arc::new(Grid {
            nodes,
            weights,
            x_max,
        }))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    /// Index of the node closest to `x`.
    pub fn nearest(&self, x: f64) -> usize {
        match self
            .nodes
            .binary_search_by(|probe| probe.partial_cmp(&x).unwrap())
        {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) if i == self.nodes.len() => i - 1,
            Err(i) => {
                if (self.nodes[i] - x).abs() < (x - self.nodes[i - 1]).abs() {
                    i
                } else {
                    i - 1
                }
            }
        }
    }

    /// Values of `V^beta` at the nodes.
    pub fn weight_values(&self, w: WeightSpec) -> Vec<f64> {
        self.nodes.iter().map(|&x| w.weight(x)).collect()
    }
}

/// Returns an error unless both grids are the same grid.
pub(crate) fn ensure_same_grid(a: &Arc<Grid>, b: &Arc<Grid>) -> Result<()> {
    if Arc::ptr_eq(a, b) || **a == **b {
        Ok(())
    } else {
        Err(Error::Domain("objects live on different grids".into()))
    }
}

/// Weight `V(x)^beta` with `V(x) = (1+|x|)^r`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WeightSpec {
    pub r: f64,
    pub beta: f64,
}

impl WeightSpec {
    pub fn new(r: f64, beta: f64) -> Result<Self> {
        if !(r >= 1.0 && r.is_finite()) {
            return Err(Error::InvalidParameter(format!("moment order r must be >= 1, got {r}")));
        }
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::InvalidParameter(format!("beta must lie in [0,1], got {beta}")));
        }
        Ok(WeightSpec { r, beta })
    }

    /// Same `r`, different exponent.
    pub fn with_beta(self, beta: f64) -> Self {
        WeightSpec { r: self.r, beta }
    }

    /// `V(x)`.
    pub fn v(&self, x: f64) -> f64 {
        (1.0 + x.abs()).powf(self.r)
    }

    /// `V(x)^beta`.
    pub fn weight(&self, x: f64) -> f64 {
        if self.beta == 0.0 {
            1.0
        } else {
            (1.0 + x.abs()).powf(self.r * self.beta)
        }
    }
}

/// A function sampled at the grid nodes.
#[derive(Debug, Clone)]
pub struct WeightedFunction {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl WeightedFunction {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Domain(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(WeightedFunction { grid, values })
    }

    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().iter().map(|&x| f(x)).collect();
        WeightedFunction {
            grid: grid.clone(),
            values,
        }
    }

    pub fn constant(grid: &Arc<Grid>, c: f64) -> Self {
        WeightedFunction {
            grid: grid.clone(),
            values: vec![c; grid.len()],
        }
    }

    /// `V^beta` itself.
    pub fn weight(grid: &Arc<Grid>, w: WeightSpec) -> Self {
        Self::from_fn(grid, |x| w.weight(x))
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_triples(out, &self.grid, &self.values)
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let (grid, values) = read_triples(input)?;
        Ok(WeightedFunction { grid, values })
    }
}

/// A signed measure given by its Lebesgue density at the grid nodes.
#[derive(Debug, Clone)]
pub struct SignedDensity {
    grid: Arc<Grid>,
    density: Vec<f64>,
}

impl SignedDensity {
    pub fn new(grid: Arc<Grid>, density: Vec<f64>) -> Result<Self> {
        if density.len() != grid.len() {
            return Err(Error::Domain(format!(
                "{} density values for a grid of {} nodes",
                density.len(),
                grid.len()
            )));
        }
        Ok(SignedDensity { grid, density })
    }

    pub fn from_fn(grid: &Arc<Grid>, p: impl Fn(f64) -> f64) -> Self {
        let density = grid.nodes().iter().map(|&x| p(x)).collect();
        SignedDensity {
            grid: grid.clone(),
            density,
        }
    }

    /// Zero measure.
    pub fn zero(grid: &Arc<Grid>) -> Self {
        SignedDensity {
            grid: grid.clone(),
            density: vec![0.0; grid.len()],
        }
    }

    /// Builds a density from node masses `m_i = w_i p(x_i)`.
    pub fn from_masses(grid: &Arc<Grid>, masses: &[f64]) -> Result<Self> {
        if masses.len() != grid.len() {
            return Err(Error::Domain("mass vector length does not match grid".into()));
        }
        let density = masses
            .iter()
            .zip(grid.weights())
            .map(|(m, w)| m / w)
            .collect();
        Ok(SignedDensity {
            grid: grid.clone(),
            density,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    /// Node masses `w_i p(x_i)`.
    pub fn masses(&self) -> Vec<f64> {
        self.density
            .iter()
            .zip(self.grid.weights())
            .map(|(p, w)| p * w)
            .collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.density
            .iter()
            .zip(self.grid.weights())
            .map(|(p, w)| p * w)
            .sum()
    }

    /// `sup_A |mu(A)|`, the larger of the positive and negative parts.
    /// Equals half the total variation for a zero-mass measure.
    pub fn sup_set_mass(&self) -> f64 {
        let (mut pos, mut neg) = (0.0, 0.0);
        for (p, w) in self.density.iter().zip(self.grid.weights()) {
            let m = p * w;
            if m > 0.0 {
                pos += m;
            } else {
                neg -= m;
            }
        }
        f64::max(pos, neg)
    }

    /// `mu(V^beta)` against the absolute value, i.e. the `B'_beta` norm.
    pub fn dual_norm(&self, w: WeightSpec) -> f64 {
        self.grid
            .nodes()
            .iter()
            .zip(self.grid.weights())
            .zip(&self.density)
            .map(|((&x, &wi), p)| wi * p.abs() * w.weight(x))
            .sum()
    }

    pub fn scaled(&self, c: f64) -> Self {
        SignedDensity {
            grid: self.grid.clone(),
            density: self.density.iter().map(|p| c * p).collect(),
        }
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: f64, other: &SignedDensity) -> Result<Self> {
        ensure_same_grid(&self.grid, &other.grid)?;
        Ok(SignedDensity {
            grid: self.grid.clone(),
            density: self
                .density
                .iter()
                .zip(&other.density)
                .map(|(a, b)| a + c * b)
                .collect(),
        })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_triples(out, &self.grid, &self.density)
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let (grid, density) = read_triples(input)?;
        Ok(SignedDensity { grid, density })
    }
}

/// `sup_i V(x_i)^{-beta} |f(x_i)|`.
pub fn weighted_norm(f: &WeightedFunction, w: WeightSpec) -> f64 {
    f.grid
        .nodes()
        .iter()
        .zip(&f.values)
        .map(|(&x, v)| v.abs() / w.weight(x))
        .fold(0.0, f64::max)
}

/// Distance between two measures against the unit ball of `B_beta`:
/// `sum_i w_i |p_i - q_i| V(x_i)^beta`. With `beta = 0` this is the total
/// variation `sup_{|f| <= 1} |p(f) - q(f)|`.
pub fn dual_distance(p: &SignedDensity, q: &SignedDensity, w: WeightSpec) -> Result<f64> {
    ensure_same_grid(&p.grid, &q.grid)?;
    let grid = &p.grid;
    Ok(grid
        .nodes()
        .iter()
        .zip(grid.weights())
        .zip(p.density.iter().zip(&q.density))
        .map(|((&x, &wi), (a, b))| wi * (a - b).abs() * w.weight(x))
        .sum())
}

/// The pairing `p(f) = sum_i w_i p_i f(x_i)`.
pub fn integrate(f: &WeightedFunction, p: &SignedDensity) -> Result<f64> {
    ensure_same_grid(&f.grid, &p.grid)?;
    Ok(p.grid
        .weights()
        .iter()
        .zip(p.density.iter().zip(&f.values))
        .map(|(w, (d, v))| w * d * v)
        .sum())
}

fn write_triples<W: Write>(mut out: W, grid: &Grid, values: &[f64]) -> Result<()> {
    writeln!(out, "x,w,value")?;
    for ((x, w), v) in grid.nodes().iter().zip(grid.weights()).zip(values) {
        writeln!(out, "{x},{w},{v}")?;
    }
    Ok(())
}

fn read_triples<R: BufRead>(input: R) -> Result<(Arc<Grid>, Vec<f64>)> {
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    let mut values = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || (lineno == 0 && line.starts_with('x')) {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::Parse(format!("line {}: expected 3 columns", lineno + 1)));
        }
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
        };
        nodes.push(parse(fields[0])?);
        weights.push(parse(fields[1])?);
        values.push(parse(fields[2])?);
    }
    let x_max = nodes
        .iter()
        .fold(0.0_f64, |m, x| m.max(x.abs()));
    let grid = Grid::from_parts(nodes, weights, x_max)?;
    Ok((grid, values))
}
