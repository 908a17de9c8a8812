//! Turning integral of separating curves on a cone: levels give exactly
//! 2 pi, wiggly curves give more.

use capillary_lab::curves::{turning_integral, BoundaryCurve, CurveShape};
use capillary_lab::profile::ProfileCurve;

fn main() -> capillary_lab::Result<()> {
    let cone = ProfileCurve::cone(0.8, 2.0)?;
    let level = turning_integral(&cone, &BoundaryCurve::level(1.0))?;
    println!("level circle:   {level:.12}  (2 pi = {:.12})", std::f64::consts::TAU);
    for amp in [0.05, 0.1, 0.2, 0.4] {
        let curve = BoundaryCurve::new(CurveShape::Fourier {
            rho0: 1.0,
            rho_cos: vec![0.0, amp],
            rho_sin: vec![amp / 2.0],
            theta_cos: vec![],
            theta_sin: vec![0.1],
            winding: 1,
        })?;
        println!("amplitude {amp:.2}: {:.12}", turning_integral(&cone, &curve)?);
    }
    Ok(())
}
