//! The eigenprojection at 1 from a contour integral of the resolvent, compared
//! with the rank-one projector of the invariant measure.

use ergoperturb::ar::{build_kernel, ArKernelSpec, NoiseFamily, NoiseModel};
use ergoperturb::ergodicity::{estimate_rate, generalized_potential, spectral_projection};
use ergoperturb::{DiscretizedKernel, Grid, WeightSpec};
use num_complex::Complex64;

fn main() -> ergoperturb::Result<()> {
    let noise = NoiseModel::new(NoiseFamily::student_t(3.0), 1.0)?;
    let spec = ArKernelSpec::new(0.5, noise, Grid::uniform(241, 60.0)?)?.with_tau_trunc(1e-3);
    let p = build_kernel(&spec)?;
    let v = WeightSpec::new(1.0, 1.0)?;

    let kappa = estimate_rate(&p, v)?.kappa_hat;
    let radius = (1.0 - kappa) / 2.0;
    let proj = spectral_projection(&p, Complex64::new(1.0, 0.0), radius, 64)?;
    let pot = generalized_potential(&p)?;
    let outer = DiscretizedKernel::rank_one(&pot.invariant);

    println!("contour radius {radius:.4}");
    println!("||Pi^2 - Pi||_1      = {:.2e}", proj.compose(&proj)?.sub(&proj)?.operator_norm(v, v)?);
    println!("||Pi - 1 x pi||_1    = {:.2e}", proj.sub(&outer)?.operator_norm(v, v)?);
    println!("R 1 = 1 residual     = {:.2e}", pot.constant_residual);
    println!("pi R = pi residual   = {:.2e}", pot.invariance_residual);
    Ok(())
}
