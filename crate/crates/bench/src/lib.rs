//! Shared scenario builders for the criterion benches: representative
//! domains and probe fields sized so a full bench run stays in seconds.

use std::sync::Arc;

use tcx_core::fields::{DomainRef, TensorField, Valence};
use tcx_core::mesh::{build_domain, Chart, GridSpec, MaskRule};
use tcx_core::probe::polynomial_probe;

/// Full cube on the 3-axis chart, `n` nodes per axis over [−1, 1]³.
pub fn box3(n: usize) -> DomainRef {
    let grid = GridSpec::cube(3, n, -1.0, 1.0).unwrap();
    Arc::new(build_domain(grid, MaskRule::Full, Chart::Cartesian3).unwrap())
}

/// Planar annulus with radii 0.5 / 1.8, `n` nodes per axis.
pub fn annulus(n: usize) -> DomainRef {
    let spacing = 3.6 / (n - 1) as f64;
    let grid = GridSpec::new(vec![n, n], vec![-1.8, -1.8], vec![spacing; 2]).unwrap();
    let rule = MaskRule::Annulus {
        r_in: 0.5,
        r_out: 1.8,
    };
    Arc::new(build_domain(grid, rule, Chart::Cartesian2).unwrap())
}

/// Spherical shell with radii 0.8 / 1.9, `n` nodes per axis.
pub fn shell(n: usize) -> DomainRef {
    let spacing = 4.0 / (n - 1) as f64;
    let grid = GridSpec::new(vec![n; 3], vec![-2.0; 3], vec![spacing; 3]).unwrap();
    let rule = MaskRule::SphericalShell {
        r_in: 0.8,
        r_out: 1.9,
    };
    Arc::new(build_domain(grid, rule, Chart::Cartesian3).unwrap())
}

/// Seeded degree-≤3 polynomial probe field.
pub fn probe(domain: &DomainRef, valence: Valence, seed: u64) -> TensorField {
    polynomial_probe(domain, valence, seed)
}

/// Point-vortex gradient rows on the annulus, stored as raw samples so
/// checks take the finite-difference path rather than the symbolic one.
pub fn vortex(domain: &DomainRef) -> TensorField {
    let d = domain.clone();
    TensorField::from_fn(domain.clone(), Valence::Tensor20, move |c, node| {
        let p = d.node_position(node);
        let r2 = p[0] * p[0] + p[1] * p[1];
        match c {
            0 => -p[1] / r2,
            1 => p[0] / r2,
            _ => 0.0,
        }
    })
}
