//! Finite-difference surface geometry: a unit sphere in flat space and a
//! horosphere in the half-space model.

use capillary_lab::metric::{AmbientMetric, Vec3};
use capillary_lab::surface::{NormalSide, ParametricSurface, Vec2};

fn main() -> capillary_lab::Result<()> {
    let sphere = ParametricSurface::new(
        |u, v| Vec3::new(u.sin() * v.cos(), u.sin() * v.sin(), u.cos()),
        1.0,
        NormalSide::Positive,
    );
    let geo = sphere.geometry(&AmbientMetric::Euclidean, Vec2::new(1.0, 0.3))?;
    println!(
        "sphere: H = {:.8} |A|^2 = {:.8}",
        geo.mean_curvature,
        geo.second_form_norm_sq()
    );
    println!(
        "        K = {:.8}",
        sphere.gauss_curvature(&AmbientMetric::Euclidean, Vec2::new(1.0, 0.3))?
    );

    // Horizontal planes x3 = c are horospheres: umbilic with |H| = 2.
    let horosphere = ParametricSurface::new(|x, y| Vec3::new(x, y, 2.0), 1.0, NormalSide::Positive);
    let geo = horosphere.geometry(&AmbientMetric::Hyperbolic, Vec2::new(0.1, 0.2))?;
    println!(
        "horosphere: H = {:.8} traceless |A|^2 = {:.2e}",
        geo.mean_curvature,
        geo.traceless_norm_sq()
    );
    Ok(())
}
