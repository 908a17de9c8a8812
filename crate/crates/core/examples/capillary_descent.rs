//! Energy descent to the flat capillary disk in a cylinder, then the
//! stability spectrum of the result.

use capillary_lab::capillary::{
    contact_angles, criticality, minimize_capillary, stability, CapillaryConfig, DescentOptions,
};
use capillary_lab::graph::GraphSurface;
use capillary_lab::profile::ProfileCurve;

fn main() -> capillary_lab::Result<()> {
    let cfg = CapillaryConfig::euclidean(ProfileCurve::cylinder(1.0, 2.0)?.with_top(2.0));
    let init = GraphSurface::from_reference(cfg.body.clone(), 8, 11, |x, y| 1.0 + 0.15 * x - 0.1 * x * y)?;
    let out = minimize_capillary(&cfg, &init, None, &DescentOptions::default())?;
    for r in out.history.iter().step_by(10) {
        println!(
            "iter {:>4}  energy {:.12}  residual {:.3e}",
            r.iteration, r.energy, r.residual
        );
    }
    let crit = criticality(&cfg, &out.surface)?;
    let worst_angle = contact_angles(&cfg, &out.surface)?
        .iter()
        .fold(0.0f64, |m, (_, gamma, bar)| m.max((gamma - bar).abs()));
    println!(
        "converged {}: H = {:.3e} (spread {:.3e}), max |gamma - gamma_bar| = {:.3e}",
        out.converged, crit.mean_curvature, crit.mean_curvature_spread, worst_angle
    );
    let st = stability(&cfg, &out.surface)?;
    println!("mu1 = {:.3e}, Q(1, 1) = {:.3e}", st.mu1, st.q_one_one);
    Ok(())
}
