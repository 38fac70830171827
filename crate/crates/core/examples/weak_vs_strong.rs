//! `||P_alpha - P_alpha0||_{0,1}` shrinks as alpha -> alpha0, while the
//! test-function ratio stays at `alpha0 * I_a`, so the strong norm does not.

use ergoperturb::ar::{build_kernel, run_counterexample, ArKernelSpec, NoiseFamily, NoiseModel};
use ergoperturb::{Grid, WeightSpec};

fn main() -> ergoperturb::Result<()> {
    let alpha0 = 0.5;
    let alphas: Vec<f64> = (0..7).map(|k| alpha0 + 0.2 * 0.5f64.powi(k)).collect();
    let noise = NoiseModel::new(NoiseFamily::student_t(3.0), 1.0)?;
    let grid = Grid::uniform(501, 100.0)?;
    let spec = ArKernelSpec::new(alpha0, noise.clone(), grid)?.with_tau_trunc(1e-4);
    let p0 = build_kernel(&spec)?;

    let ce = run_counterexample(&noise, alpha0, &alphas)?;
    println!("a = {}, I_a = {:.6}, limit alpha0 * I_a = {:.6}", ce.a, ce.i_a, ce.limit);
    let (w0, w1) = (WeightSpec::new(1.0, 0.0)?, WeightSpec::new(1.0, 1.0)?);
    for (alpha, ratio) in &ce.ratios {
        let d = build_kernel(&spec.with_alpha(*alpha)?)?.sub(&p0)?;
        println!(
            "alpha = {alpha:.6}  ratio = {ratio:.6}  ||.||_01 = {:.3e}  ||.||_11 (grid) = {:.3e}",
            d.operator_norm(w0, w1)?,
            d.operator_norm(w1, w1)?
        );
    }
    Ok(())
}
