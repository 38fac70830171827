//! Neumann expansion of `pi_eps` through the generalized potential of `P_0`.

use ergoperturb::ar::{build_kernel, ArKernelSpec, NoiseFamily, NoiseModel};
use ergoperturb::ergodicity::invariant_measure;
use ergoperturb::perturbation::kartashov_expansion;
use ergoperturb::{dual_distance, Grid, WeightSpec};

fn main() -> ergoperturb::Result<()> {
    let noise = NoiseModel::new(NoiseFamily::student_t(3.0), 1.0)?;
    let spec = ArKernelSpec::new(0.5, noise, Grid::uniform(501, 100.0)?)?.with_tau_trunc(1e-4);
    let p0 = build_kernel(&spec)?;
    let v = WeightSpec::new(1.0, 1.0)?;
    for eps in [0.02, 0.01, 0.005, 0.0025] {
        let pe = build_kernel(&spec.with_alpha(0.5 + eps)?)?;
        let exp = kartashov_expansion(&p0, &pe, 8, v)?;
        let tv = dual_distance(&exp.partial_sum, &invariant_measure(&pe)?, v.with_beta(0.0))?;
        println!(
            "eps = {eps}: ||DR|| = {:.3}, tv = {:.2e}, tail bound = {:.2e}, {:?}",
            exp.q, tv, exp.tail_bound, exp.status
        );
    }
    Ok(())
}
