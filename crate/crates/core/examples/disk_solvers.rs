//! Neumann and Robin solves on the unit disk, including a Fredholm
//! incompatibility certificate.

use capillary_lab::disc::{laplace_neumann_solve, robin_solve, DiskField, DiskGrid, RobinOutcome};
use nalgebra::DVector;

fn main() -> capillary_lab::Result<()> {
    let grid = DiskGrid::flat(32, 21)?;
    // Delta u = 0, d_nu u = cos(2 theta): u = r^2 cos(2 theta) / 2.
    let g = grid.sample_boundary(|t| (2.0 * t).cos());
    let (u, rep) = laplace_neumann_solve(&grid, &DiskField::new(DVector::zeros(grid.len())), &g)?;
    let exact = grid.sample(|x, y| 0.5 * (x * x - y * y));
    println!(
        "neumann: residual {:.2e}, L2 error {:.2e}",
        rep.residual,
        grid.l2_distance(&u, &exact)
    );

    let h = grid.sample_boundary(|t| 1.0 + 0.5 * t.sin());
    let f1 = grid.sample(|x, _| x);
    let f2 = grid.sample_boundary(|t| t.cos());
    match robin_solve(&grid, &f1, &f2, &h)? {
        RobinOutcome::Solved { particular, .. } => {
            println!("robin:   solved, mean {:.6}", grid.integrate(&particular) / grid.area())
        }
        other => println!("robin:   {other:?}"),
    }

    // h = 0 and a source with nonzero mean: constants obstruct the solve.
    let zero = DVector::zeros(grid.n_theta());
    match robin_solve(&grid, &grid.sample(|_, _| 1.0), &zero, &zero)? {
        RobinOutcome::Incompatible { violated, nullspace } => {
            println!(
                "certificate: {} null vector(s), pairing {:.10}",
                nullspace.len(),
                violated[0].pairing
            )
        }
        other => println!("unexpected: {other:?}"),
    }
    Ok(())
}
