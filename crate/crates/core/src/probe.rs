//! Seeded polynomial probe fields for verification drivers.
//!
//! Operator-identity checks need input fields that are smooth, generic
//! (no accidental symmetry that could mask a sign error), and exactly
//! reproducible. A probe fills every component of a field with a random
//! polynomial of total degree ≤ 3; coefficients are drawn from a
//! counter-based stream seeded explicitly, so a `(domain shape, valence,
//! seed)` triple always yields bit-identical data. Seeds recorded in
//! verification reports therefore pin down the exact inputs checked.
//!
//! Degree 3 is the sweet spot: low enough that composed central stencils
//! see polynomial data they differentiate exactly or near-exactly, high
//! enough that every mixed third partial is exercised.

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::fields::{DomainRef, TensorField, Valence};

/// Exponent tuples of every monomial with total degree ≤ 3 in `n`
/// variables, in lexicographic order: 10 monomials for n = 2, 20 for
/// n = 3. The enumeration order is part of the determinism contract —
/// coefficients are consumed in this order.
fn monomial_exponents(n: usize) -> Vec<Vec<u32>> {
    fn rec(n: usize, budget: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        for e in 0..=budget {
            prefix.push(e);
            rec(n, budget - e, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, 3, &mut Vec::new(), &mut out);
    out
}

/// Coefficient table for one probe: `comps × monomials` values drawn
/// uniformly from [−1, 1], component-major.
fn coefficient_table(comps: usize, monomials: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Uniform::new_inclusive(-1.0f64, 1.0);
    (0..comps)
        .map(|_| (0..monomials).map(|_| unit.sample(&mut rng)).collect())
        .collect()
}

/// A degree-≤3 polynomial field with seed-determined coefficients in
/// [−1, 1] on every component.
pub fn polynomial_probe(domain: &DomainRef, valence: Valence, seed: u64) -> TensorField {
    let n = domain.dim();
    let monos = monomial_exponents(n);
    let comps = valence.component_count(n);
    let coef = coefficient_table(comps, monos.len(), seed);
    let pos_domain = domain.clone();
    TensorField::from_fn(domain.clone(), valence, |c, node| {
        let p = pos_domain.node_position(node);
        monos
            .iter()
            .zip(&coef[c])
            .map(|(exps, &a)| {
                a * exps
                    .iter()
                    .zip(&p)
                    .map(|(&e, &x)| x.powi(e as i32))
                    .product::<f64>()
            })
            .sum()
    })
}
