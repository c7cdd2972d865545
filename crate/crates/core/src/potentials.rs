//! Potential reconstruction: constructive inverses for the first-column
//! operators, valid once a compatibility check has vouched for the data.
//!
//! Three constructions cover the gradient-type kinds, the planar rotated
//! gradient, and the tensor curl:
//!
//! * gradient kinds integrate the rows edgewise along a breadth-first
//!   spanning tree of masked-in grid edges (trapezoid rule per edge),
//!   anchoring the potential to zero at a caller-chosen base node — no
//!   linear algebra, and the error stays local and second order;
//! * the planar rotated-gradient kind first rotates each row back into
//!   gradient form and then reuses the spanning tree;
//! * the tensor curl is inverted through the scalar-valued form side:
//!   the field is relabeled as an ℝ³-valued 2-form β, the cone homotopy
//!   (Kβ)(x) = ∫₀¹ t · β(x₀ + t(x−x₀))(x−x₀, ·) dt is evaluated per
//!   value component with composite Simpson quadrature along the radial
//!   segment (multilinear interpolation off-grid), and the resulting
//!   1-form is relabeled back into a second-order tensor. The domain
//!   must be star-shaped about the declared center x₀; that property is
//!   declared by the caller, not inferred.
//!
//! Every entry point first runs the matching [`crate::compat::check`]
//! and refuses data whose verdict is not `compatible`: the period
//! integrals in that check are exactly what rules out locally integrable
//! fields with no global potential. Pass loosened tolerances through
//! [`CheckOptions`] when the input is known to carry discretization
//! error larger than the defaults.
//!
//! All reconstructions are deterministic: the tree is built in a fixed
//! breadth-first order and the quadrature loops visit nodes in storage
//! order, so re-running with the same inputs reproduces the same bits.

use std::borrow::Cow;
use std::collections::VecDeque;

use crate::calculus::MetricChart;
use crate::compat::{self, interp_raw, CheckKind, CheckOptions, Verdict};
use crate::error::{Error, Result};
use crate::fields::{TensorField, Valence};
use crate::isomorphisms::{self, IsoFamily, IsoId};
use crate::mesh::Chart;

/// Default number of Simpson panels along the radial segment of the
/// homotopy quadrature.
pub const DEFAULT_PANELS: usize = 64;

/// Which gradient-type operator the input is an image of.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradKind {
    /// `grad`: rows of a second-order tensor are chart gradients of a
    /// vector field.
    Rows,
    /// `Grad`: a two-point field is the componentwise chart gradient of a
    /// point map.
    TwoPoint,
    /// `surfGrad`: a two-point field on the spherical chart is the
    /// surface gradient of an ℝ³ point map.
    Surface,
    /// `displacement`: an ℝᵐ-valued 1-form (or the equivalent two-point
    /// field) is the differential of a point map.
    Displacement,
}

impl GradKind {
    pub fn name(&self) -> &'static str {
        match self {
            GradKind::Rows => "grad",
            GradKind::TwoPoint => "Grad",
            GradKind::Surface => "surfGrad",
            GradKind::Displacement => "displacement",
        }
    }

    pub fn parse(token: &str) -> Result<GradKind> {
        match token {
            "grad" => Ok(GradKind::Rows),
            "Grad" => Ok(GradKind::TwoPoint),
            "surfGrad" => Ok(GradKind::Surface),
            "displacement" => Ok(GradKind::Displacement),
            other => Err(Error::UnknownId {
                kind: other.into(),
                what: "potential kind".into(),
            }),
        }
    }
}

/// Reconstruct the potential of a gradient-type image by path integration.
///
/// Runs the matching compatibility check first and refuses any verdict
/// other than `compatible`. The potential is anchored to zero (per row)
/// at `base`, a grid multi-index that must lie in the field's support.
/// On the spherical chart (`surfGrad` and `displacement` kinds) the rows
/// are first scaled by the diagonal metric so that the integration runs
/// in plain chart coordinates.
pub fn reconstruct_grad(
    kind: GradKind,
    t: &TensorField,
    base: &[usize],
    opts: &CheckOptions,
) -> Result<TensorField> {
    let n = t.dim();
    let chart = t.domain.chart;
    let mismatch = |expected: &str| -> Error {
        Error::ValenceMismatch {
            op: format!("reconstruct {}", kind.name()),
            expected: expected.into(),
            got: t.valence.name(n),
        }
    };

    // Screen the input shape and build the field the gate check sees.
    let gate: Cow<'_, TensorField> = match kind {
        GradKind::Rows => {
            if !matches!(t.valence, Valence::Tensor20) {
                return Err(mismatch("tensor20"));
            }
            Cow::Borrowed(t)
        }
        GradKind::TwoPoint => {
            if !matches!(t.valence, Valence::TwoPoint(_)) {
                return Err(mismatch("twopoint"));
            }
            Cow::Borrowed(t)
        }
        GradKind::Surface => {
            if !matches!(chart, Chart::Spherical) {
                return Err(Error::ChartMismatch {
                    op: "reconstruct surfGrad".into(),
                    expected: "spherical".into(),
                    got: chart.name().into(),
                });
            }
            if !matches!(t.valence, Valence::TwoPoint(3)) {
                return Err(mismatch("twopoint with three value components"));
            }
            Cow::Borrowed(t)
        }
        GradKind::Displacement => match t.valence {
            Valence::TwoPoint(_) => Cow::Borrowed(t),
            // An ℝᵐ-valued 1-form stores the same components in the same
            // order as the corresponding two-point field; relabel it so
            // the displacement-gradient check accepts it.
            Valence::Form(1, m) => Cow::Owned(TensorField {
                domain: t.domain.clone(),
                valence: Valence::TwoPoint(m),
                data: t.data.clone(),
                exprs: t.exprs.clone(),
                erosion: t.erosion,
            }),
            _ => return Err(mismatch("twopoint or an ℝᵐ-valued 1-form")),
        },
    };

    let check_kind = match kind {
        GradKind::Rows => {
            if n == 3 {
                CheckKind::GradRows3
            } else {
                CheckKind::GradRows2
            }
        }
        GradKind::TwoPoint => {
            if n == 3 {
                CheckKind::GradTwoPoint3
            } else {
                CheckKind::GradTwoPoint2
            }
        }
        GradKind::Surface => CheckKind::SurfGradImage,
        GradKind::Displacement => CheckKind::DispGrad,
    };
    let report = compat::check(check_kind, &gate, None, opts)?;
    if report.verdict != Verdict::Compatible {
        return Err(Error::NotCompatible {
            verdict: report.verdict.name().to_string(),
        });
    }

    // On the spherical chart the stored components carry inverse-metric
    // weights; lowering the chart leg turns them into plain coordinate
    // gradients, which is what edgewise integration inverts.
    let lower = matches!(kind, GradKind::Surface)
        || (matches!(kind, GradKind::Displacement) && matches!(chart, Chart::Spherical));
    let integrand: Cow<'_, TensorField> = if lower {
        let mc = opts.metric.unwrap_or_else(|| MetricChart::cartesian(chart));
        Cow::Owned(isomorphisms::forward(
            IsoId {
                family: IsoFamily::Surface,
                k: 1,
            },
            &gate,
            Some(&mc),
        )?)
    } else {
        gate
    };

    let rows = integrand.data.len() / n;
    let out_valence = match kind {
        GradKind::Rows => Valence::Vector,
        _ => Valence::Point(rows),
    };
    spanning_tree_potential(&integrand, base, out_valence)
}

/// Reconstruct a tensor potential `W` with `curlT(W) ≈ T` via the cone
/// homotopy, valid on domains star-shaped about `star_center`.
///
/// `panels` is the composite-Simpson panel count along each radial
/// segment (odd counts are rounded up; use [`DEFAULT_PANELS`] when in
/// doubt). Nodes whose radial segment leaves the region where `T` is
/// trusted come back as NaN.
#[allow(non_snake_case)] // matches the operator's established spelling
pub fn reconstruct_curlT(
    t: &TensorField,
    star_center: Option<&[f64]>,
    panels: usize,
    opts: &CheckOptions,
) -> Result<TensorField> {
    if t.dim() != 3 || !matches!(t.valence, Valence::Tensor20) {
        return Err(Error::ValenceMismatch {
            op: "reconstruct curlT".into(),
            expected: "tensor20 on a 3-axis chart".into(),
            got: t.valence.name(t.dim()),
        });
    }
    let x0 = star_center.ok_or(Error::StarCenterMissing)?;
    if x0.len() != 3 {
        return Err(Error::UnknownId {
            kind: format!("{} coordinates on a 3-axis chart", x0.len()),
            what: "star center".into(),
        });
    }
    let report = compat::check(CheckKind::CurlTImage3, t, None, opts)?;
    if report.verdict != Verdict::Compatible {
        return Err(Error::NotCompatible {
            verdict: report.verdict.name().to_string(),
        });
    }

    // Relabel T as an ℝ³-valued 2-form; closedness of β is exactly the
    // divergence identity the gate check just certified.
    let beta = isomorphisms::forward(
        IsoId {
            family: IsoFamily::Bimath,
            k: 2,
        },
        t,
        None,
    )?;

    let m = {
        let p = panels.max(2);
        p + (p & 1) // composite Simpson needs an even panel count
    };
    let h = 1.0 / m as f64;
    let domain = &t.domain;
    let nodes = domain.grid.node_count();
    let mut data = vec![vec![f64::NAN; nodes]; 9];
    for node in 0..nodes {
        if !domain.mask[node] {
            continue;
        }
        let x = domain.node_position(node);
        let v = [x[0] - x0[0], x[1] - x0[1], x[2] - x0[2]];
        let mut acc = [0.0f64; 9];
        for s in 0..=m {
            let ts = s as f64 * h;
            let w = if s == 0 || s == m {
                1.0
            } else if s % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let p = [x0[0] + ts * v[0], x0[1] + ts * v[1], x0[2] + ts * v[2]];
            let mut b = [0.0f64; 9];
            for (c, slot) in b.iter_mut().enumerate() {
                *slot = interp_raw(domain, &beta.data[c], &p);
            }
            for i in 0..3 {
                // Antisymmetric matrix of the i-th value component from
                // the stored increasing pairs (12), (13), (23).
                let b12 = b[i * 3];
                let b13 = b[i * 3 + 1];
                let b23 = b[i * 3 + 2];
                // (Kβ)_J = ∫₀¹ t Σ_K v^K β_{KJ} dt, radial direction v.
                acc[i * 3] += w * ts * (-v[1] * b12 - v[2] * b13);
                acc[i * 3 + 1] += w * ts * (v[0] * b12 - v[2] * b23);
                acc[i * 3 + 2] += w * ts * (v[0] * b13 + v[1] * b23);
            }
        }
        for (c, row) in data.iter_mut().enumerate() {
            row[node] = acc[c] * h / 3.0;
        }
    }
    let alpha = TensorField {
        domain: t.domain.clone(),
        valence: Valence::Form(1, 3),
        data,
        exprs: None,
        erosion: t.erosion,
    };
    isomorphisms::inverse(
        IsoId {
            family: IsoFamily::Bimath,
            k: 1,
        },
        &alpha,
        None,
    )
}

/// Reconstruct the vector potential of a planar rotated-gradient image.
///
/// The stored rows are `(Y,₂, −Y,₁)` per row, so `(−T^{I2}, T^{I1})` are
/// the plain gradient rows of `Yᴵ`; those are integrated along the
/// spanning tree exactly as in [`reconstruct_grad`].
pub fn reconstruct_s(t: &TensorField, base: &[usize], opts: &CheckOptions) -> Result<TensorField> {
    if t.dim() != 2 || !matches!(t.valence, Valence::Tensor20) {
        return Err(Error::ValenceMismatch {
            op: "reconstruct s".into(),
            expected: "tensor20 on a 2-axis chart".into(),
            got: t.valence.name(t.dim()),
        });
    }
    let report = compat::check(CheckKind::SImage2, t, None, opts)?;
    if report.verdict != Verdict::Compatible {
        return Err(Error::NotCompatible {
            verdict: report.verdict.name().to_string(),
        });
    }
    let mut data = Vec::with_capacity(4);
    for i in 0..2 {
        data.push(t.data[i * 2 + 1].iter().map(|v| -v).collect());
        data.push(t.data[i * 2].clone());
    }
    let rows = TensorField {
        domain: t.domain.clone(),
        valence: Valence::Tensor20,
        data,
        exprs: None,
        erosion: t.erosion,
    };
    spanning_tree_potential(&rows, base, Valence::Vector)
}

/// Integrate `rows` (component layout `row * n + axis`) along a
/// breadth-first spanning tree of grid edges inside the field's support,
/// one trapezoid per edge, anchoring every row to zero at `base`.
fn spanning_tree_potential(
    rows_field: &TensorField,
    base: &[usize],
    out_valence: Valence,
) -> Result<TensorField> {
    let domain = &rows_field.domain;
    let grid = &domain.grid;
    let n = grid.dim();
    debug_assert_eq!(rows_field.data.len() % n, 0);
    let rows = rows_field.data.len() / n;

    if base.len() != n || base.iter().zip(&grid.dims).any(|(&b, &d)| b >= d) {
        return Err(Error::UnknownId {
            kind: format!("{base:?} on a grid with dims {:?}", grid.dims),
            what: "base node".into(),
        });
    }
    let support = rows_field.support();
    let base_flat = grid.flat(base);
    if !support[base_flat] {
        return Err(Error::BaseOutsideMask { node: base_flat });
    }

    let nodes = grid.node_count();
    let mut pot = vec![vec![f64::NAN; nodes]; rows];
    let mut seen = vec![false; nodes];
    for row in pot.iter_mut() {
        row[base_flat] = 0.0;
    }
    seen[base_flat] = true;
    let mut queue = VecDeque::from([base_flat]);
    while let Some(u) = queue.pop_front() {
        let iu = grid.unflat(u);
        for ax in 0..n {
            for dir in [-1i64, 1] {
                let c = iu[ax] as i64 + dir;
                if c < 0 || c as usize >= grid.dims[ax] {
                    continue;
                }
                let mut iv = iu.clone();
                iv[ax] = c as usize;
                let v = grid.flat(&iv);
                if seen[v] || !support[v] {
                    continue;
                }
                let dx = dir as f64 * grid.spacing[ax];
                for (row, row_pot) in pot.iter_mut().enumerate() {
                    let comp = &rows_field.data[row * n + ax];
                    row_pot[v] = row_pot[u] + 0.5 * (comp[u] + comp[v]) * dx;
                }
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }

    let unreached = (0..nodes).filter(|&f| support[f] && !seen[f]).count();
    if unreached > 0 {
        return Err(Error::DisconnectedMask {
            components: support_components(grid, &support),
        });
    }

    Ok(TensorField {
        domain: rows_field.domain.clone(),
        valence: out_valence,
        data: pot,
        exprs: None,
        erosion: rows_field.erosion,
    })
}

/// Count edge-connected components of a node set (used only to make a
/// disconnection error informative).
fn support_components(grid: &crate::mesh::GridSpec, support: &[bool]) -> usize {
    let n = grid.dim();
    let nodes = grid.node_count();
    let mut seen = vec![false; nodes];
    let mut components = 0;
    for start in 0..nodes {
        if !support[start] || seen[start] {
            continue;
        }
        components += 1;
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            let iu = grid.unflat(u);
            for ax in 0..n {
                for dir in [-1i64, 1] {
                    let c = iu[ax] as i64 + dir;
                    if c < 0 || c as usize >= grid.dims[ax] {
                        continue;
                    }
                    let mut iv = iu.clone();
                    iv[ax] = c as usize;
                    let v = grid.flat(&iv);
                    if support[v] && !seen[v] {
                        seen[v] = true;
                        queue.push_back(v);
                    }
                }
            }
        }
    }
    components
}
