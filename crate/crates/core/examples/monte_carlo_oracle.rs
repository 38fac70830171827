//! Simulated AR(1) histograms against the quadrature invariant measure.

use ergoperturb::ar::{ArKernelSpec, NoiseFamily, NoiseModel};
use ergoperturb::harness::mc_oracle;
use ergoperturb::Grid;

fn main() -> ergoperturb::Result<()> {
    let gaussian = ArKernelSpec::new(0.5, NoiseModel::new(NoiseFamily::gaussian(1.0), 1.0)?, Grid::uniform(601, 12.0)?)?;
    let student = ArKernelSpec::new(0.3, NoiseModel::new(NoiseFamily::student_t(3.0), 1.0)?, Grid::uniform(501, 100.0)?)?
        .with_tau_trunc(1e-4);
    for (name, spec) in [("gaussian, alpha 0.5", gaussian), ("student-t, alpha 0.3", student)] {
        for n in [10_000, 100_000, 1_000_000] {
            let r = mc_oracle(&spec, n, 1000, 2024)?;
            println!("{name}: N = {n:>8}  tv = {:.4}  sampling scale = {:.4}", r.tv_distance, r.half_width);
        }
    }
    Ok(())
}
