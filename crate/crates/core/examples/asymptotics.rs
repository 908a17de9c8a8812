//! Fitted orders of the small-parameter expansions near a pole.

use capillary_lab::asymptotics::{first_variation_check, plane_angle_expansion};
use capillary_lab::capillary::CapillaryConfig;
use capillary_lab::experiments::{default_perturbation, default_perturbed_metric, halving};
use capillary_lab::metric::Vec3;
use capillary_lab::profile::ProfileCurve;

fn main() -> capillary_lab::Result<()> {
    let ts = halving(6);
    for k in [1, 2] {
        let fit = plane_angle_expansion(&default_perturbation(), k, &ts)?;
        println!("plane angle, k = {k}: order {:.4}", fit.order);
    }
    let metric = default_perturbed_metric(Vec3::new(0.2, -0.1, 1.0))?;
    let cfg = CapillaryConfig::euclidean(ProfileCurve::cone(0.8, 2.0)?).with_ambient(metric);
    let fv = first_variation_check(&cfg, &ts, 64)?;
    println!(
        "first variation: flux order {:.4}, pointwise order {:.4}",
        fv.flux.order, fv.pointwise.order
    );
    Ok(())
}
