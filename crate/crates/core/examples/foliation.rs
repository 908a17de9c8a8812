//! CMC capillary leaves near a conical pole of a perturbed metric, with
//! the coefficient Psi and its t = 0 limit.

use capillary_lab::capillary::CapillaryConfig;
use capillary_lab::experiments::{default_perturbed_metric, halving, solve_foliation};
use capillary_lab::fit::richardson_halving;
use capillary_lab::metric::Vec3;
use capillary_lab::profile::ProfileCurve;

fn main() -> capillary_lab::Result<()> {
    let metric = default_perturbed_metric(Vec3::new(0.2, -0.1, 1.0))?;
    let cfg = CapillaryConfig::euclidean(ProfileCurve::cone(0.8, 2.0)?).with_ambient(metric);
    let run = solve_foliation(&cfg, None, [15, 16], &halving(6))?;
    println!("{:>10} {:>14} {:>12} {:>12}", "t", "lambda", "t Psi", "identity");
    for ((leaf, tpsi), id) in run.leaves.iter().zip(run.t_psi()).zip(&run.identity) {
        println!("{:>10.6} {:>14.6e} {:>12.8} {:>12.3e}", leaf.t, leaf.lambda, tpsi, id);
    }
    println!("t Psi -> {:.8}", richardson_halving(&run.t_psi(), 1));
    Ok(())
}
