//! Drift constants `P V <= delta V + L` for AR(1) kernels with Student-t noise.

use ergoperturb::ar::{build_kernel, ArKernelSpec, NoiseFamily, NoiseModel};
use ergoperturb::kernel::certify_family;
use ergoperturb::{Grid, WeightSpec};

fn main() -> ergoperturb::Result<()> {
    let grid = Grid::uniform(501, 100.0)?;
    let noise = NoiseModel::new(NoiseFamily::student_t(3.0), 1.0)?;
    let v = WeightSpec::new(1.0, 1.0)?;

    let alphas = [-0.6, -0.3, 0.0, 0.3, 0.6];
    let kernels = alphas
        .iter()
        .map(|&a| build_kernel(&ArKernelSpec::new(a, noise.clone(), grid.clone())?.with_tau_trunc(1e-4)))
        .collect::<ergoperturb::Result<Vec<_>>>()?;
    let refs: Vec<_> = kernels.iter().collect();
    let (certs, family) = certify_family(&refs, v, 1, noise.default_l_cap())?;

    println!("{:>6} {:>10} {:>10} {:>10}", "alpha", "delta", "L", "residual");
    for (a, c) in alphas.iter().zip(&certs) {
        println!("{a:>6} {:>10.5} {:>10.5} {:>10.2e}", c.delta, c.l, c.residual);
    }
    println!(
        "family: delta = {:.5}, L = {:.5}, worst recheck violation = {:.2e}",
        family.delta, family.l, family.max_residual
    );
    Ok(())
}
