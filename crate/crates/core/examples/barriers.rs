//! Conical barrier sections for an admissible apex metric and the
//! spherical-pole dispatch for a stretched one.

use capillary_lab::barrier::{conical_barrier, spherical_dispatch, ConicalBarrierOutcome};
use capillary_lab::capillary::CapillaryConfig;
use capillary_lab::cone::sample_admissible_metrics;
use capillary_lab::metric::{AmbientMetric, Mat3, Vec3};
use capillary_lab::profile::ProfileCurve;

fn main() -> capillary_lab::Result<()> {
    let g0 = sample_admissible_metrics(0.8, 1, 7, 20_000)?[0];
    let cone = CapillaryConfig::euclidean(ProfileCurve::cone(0.8, 2.0)?).with_ambient(AmbientMetric::constant(g0)?);
    for t in [0.2, 0.1, 0.05] {
        match conical_barrier(&cone, t, 11, 12)? {
            ConicalBarrierOutcome::Constructed(b) => println!(
                "t {t:.2}: H in [{:.4}, {:.4}], angle margin {:.3e}, certified {}",
                b.min_mean_curvature, b.max_mean_curvature, b.min_angle_margin, b.certified
            ),
            other => println!("t {t:.2}: {other:?}"),
        }
    }

    let stretched = AmbientMetric::constant(Mat3::from_diagonal(&Vec3::new(1.0, 1.0, 1.3)))?;
    let cap = CapillaryConfig::euclidean(ProfileCurve::sphere_cap(1.0, 0.8)?).with_ambient(stretched);
    println!("{:?}", spherical_dispatch(&cap)?);
    Ok(())
}
