//! Curvature of the three kinds of ambient metric at a sample point.

use capillary_lab::metric::{AmbientMetric, Mat3, PerturbationTerm, ScalarField, Vec3};

fn main() -> capillary_lab::Result<()> {
    let p = Vec3::new(0.2, -0.1, 1.5);
    let perturbed = AmbientMetric::perturbed(
        Mat3::identity(),
        vec![PerturbationTerm {
            tensor: Mat3::new(0.3, 0.1, 0.0, 0.1, -0.2, 0.05, 0.0, 0.05, 0.4),
            field: ScalarField::Gaussian {
                center: Vec3::new(0.0, 0.0, 1.5),
                width: 0.7,
                amplitude: 1.0,
            },
        }],
    )?;
    let (ex, ey) = (Vec3::x(), Vec3::y());
    for (name, metric) in [
        ("euclidean", AmbientMetric::Euclidean),
        ("hyperbolic", AmbientMetric::Hyperbolic),
        ("perturbed", perturbed),
    ] {
        let curv = metric.curvature(&p)?;
        println!(
            "{name:<10} scalar {:+.6}  K(e1, e2) {:+.6}  Ric(e3) {:+.6}",
            curv.scalar,
            curv.sectional(&ex, &ey),
            curv.ricci_of(&Vec3::z())
        );
    }
    Ok(())
}
