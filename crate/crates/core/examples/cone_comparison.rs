//! Image-cone comparison for a few apex metrics, including rejection
//! sampling of admissible ones.

use capillary_lab::cone::{cone_comparison, sample_admissible_metrics};
use capillary_lab::metric::{Mat3, Vec3};

fn main() -> capillary_lab::Result<()> {
    let abar = 0.8;
    let stretched = Mat3::from_diagonal(&Vec3::new(1.0, 1.0, 1.3));
    let mut metrics = vec![("identity", Mat3::identity()), ("diag(1, 1, 1.3)", stretched)];
    for (i, g0) in sample_admissible_metrics(abar, 3, 42, 100_000)?.into_iter().enumerate() {
        metrics.push((["sampled 1", "sampled 2", "sampled 3"][i], g0));
    }
    for (name, g0) in metrics {
        let r = cone_comparison(&g0, abar, 360)?;
        println!(
            "{name:<16} a1 {:.4} a2 {:.4} status {:?} claims {:?}",
            r.a1, r.a2, r.status, r.claim_margins
        );
        if let (Some(angle), Some(margin)) = (r.min_dihedral_angle, r.dihedral_margin) {
            println!("{:<16} min dihedral angle {angle:.6}, margin {margin:+.3e}", "");
        }
    }
    Ok(())
}
