//! The bridge between tensor complexes and vector-valued form complexes:
//! component relabelings that are linear bijections (some weighted by the
//! Levi-Civita symbol or by the surface metric), and the checker that a
//! tensor operator and a form operator commute through a pair of them.
//!
//! Because symmetric and curvature-type valences store independent
//! components only — in an order chosen to match the corresponding form
//! or tensor components — most of these maps copy arrays verbatim; the
//! rest permute with ±1 signs or scale by metric coefficients. None of
//! them differentiates, so forward∘inverse is bitwise the identity for
//! the pure relabelings and exact to round-off for the metric-weighted
//! surface family.

use crate::calculus::{self, MetricChart, OperatorId};
use crate::error::{Error, Result};
use crate::fields::{TensorField, Valence};
use crate::geometry;
use crate::mesh::Chart;

/// The eight families of complex isomorphisms. Between them they cover the
/// classical scalar/vector chains, the 3D and 2D second-order-tensor
/// chains, the two-point chains (flat and surface), and the two elasticity
/// chains into the curvature-symmetry valences.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IsoFamily {
    /// `imath`: 3D scalar/vector fields ↔ scalar-valued forms.
    Imath,
    /// `bimath`: 3D second-order tensors ↔ ℝ³-valued forms.
    Bimath,
    /// `I`: 3D two-point tensors ↔ ℝ³-valued forms.
    TwoPoint3,
    /// `j`: 2D second-order tensors ↔ ℝ²-valued forms.
    Planar,
    /// `J`: 2D two-point tensors ↔ ℝᵐ-valued forms.
    PlanarTwoPoint,
    /// `Jsurf`: surface two-point tensors ↔ ℝᵐ-valued forms,
    /// metric-weighted.
    Surface,
    /// `iota`: 3D elasticity fields ↔ the curvature-complex valences.
    Elast3,
    /// `gamma`: 2D elasticity fields ↔ the curvature-complex valences.
    Elast2,
}

/// One isomorphism: a family plus its position `k` along the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IsoId {
    pub family: IsoFamily,
    pub k: usize,
}

/// Every defined isomorphism, chain order within each family.
pub fn all_isos() -> Vec<IsoId> {
    use IsoFamily::*;
    let families: [(IsoFamily, usize); 8] = [
        (Imath, 3),
        (Bimath, 3),
        (TwoPoint3, 3),
        (Planar, 2),
        (PlanarTwoPoint, 2),
        (Surface, 2),
        (Elast3, 3),
        (Elast2, 2),
    ];
    let mut v = Vec::new();
    for (family, max_k) in families {
        for k in 0..=max_k {
            v.push(IsoId { family, k });
        }
    }
    v
}

impl IsoId {
    /// Stable identifier, e.g. `imath2`, `Jsurf1`, `iota3`.
    pub fn name(&self) -> String {
        let prefix = match self.family {
            IsoFamily::Imath => "imath",
            IsoFamily::Bimath => "bimath",
            IsoFamily::TwoPoint3 => "I",
            IsoFamily::Planar => "j",
            IsoFamily::PlanarTwoPoint => "J",
            IsoFamily::Surface => "Jsurf",
            IsoFamily::Elast3 => "iota",
            IsoFamily::Elast2 => "gamma",
        };
        format!("{prefix}{}", self.k)
    }

    /// Parse a stable identifier. Case-sensitive: `j1` and `J1` are
    /// different maps.
    pub fn parse(s: &str) -> Result<IsoId> {
        let bad = || Error::UnknownId {
            kind: s.to_string(),
            what: "isomorphism".to_string(),
        };
        // Longest prefixes first so `Jsurf`/`imath`/`iota` win over `J`/`I`.
        let table: [(&str, IsoFamily, usize); 8] = [
            ("imath", IsoFamily::Imath, 3),
            ("bimath", IsoFamily::Bimath, 3),
            ("iota", IsoFamily::Elast3, 3),
            ("gamma", IsoFamily::Elast2, 2),
            ("Jsurf", IsoFamily::Surface, 2),
            ("I", IsoFamily::TwoPoint3, 3),
            ("j", IsoFamily::Planar, 2),
            ("J", IsoFamily::PlanarTwoPoint, 2),
        ];
        for (prefix, family, max_k) in table {
            if let Some(rest) = s.strip_prefix(prefix) {
                let k: usize = rest.parse().map_err(|_| bad())?;
                if k > max_k {
                    return Err(bad());
                }
                return Ok(IsoId { family, k });
            }
        }
        Err(bad())
    }

    /// Chart dimension the family lives on.
    pub fn chart_dim(&self) -> usize {
        match self.family {
            IsoFamily::Imath | IsoFamily::Bimath | IsoFamily::TwoPoint3 | IsoFamily::Elast3 => 3,
            _ => 2,
        }
    }
}

/// Pointwise weighting a map applies on top of its permutation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Weight {
    /// Pure relabeling.
    None,
    /// Multiply component (·, J) by the diagonal metric entry G_JJ.
    MetricDiag,
    /// Multiply every component by √det G.
    SqrtDet,
}

/// Full description of one map: input/output valences, the signed
/// permutation (`perm[out] = (in, sign)`), and any metric weighting.
struct IsoSpec {
    input: Valence,
    output: Valence,
    perm: Vec<(usize, f64)>,
    weight: Weight,
}

fn identity_perm(count: usize) -> Vec<(usize, f64)> {
    (0..count).map(|c| (c, 1.0)).collect()
}

/// The signed permutation sending a 3-vector of value-rows to the 2-form
/// components: (·|12) = row 3, (·|13) = −row 2, (·|23) = row 1.
fn eps_rows(rows: usize) -> Vec<(usize, f64)> {
    let mut perm = Vec::with_capacity(rows * 3);
    for r in 0..rows {
        perm.push((3 * r + 2, 1.0));
        perm.push((3 * r + 1, -1.0));
        perm.push((3 * r, 1.0));
    }
    perm
}

/// Build the descriptor for `iso`. `m` is the value dimension of the field
/// being mapped; only the two-point families consult it.
fn spec(iso: IsoId, m: usize) -> IsoSpec {
    use Valence::*;
    let plain = |input: Valence, output: Valence, count: usize| IsoSpec {
        input,
        output,
        perm: identity_perm(count),
        weight: Weight::None,
    };
    match (iso.family, iso.k) {
        (IsoFamily::Imath, 0) => plain(Scalar, Form(0, 1), 1),
        (IsoFamily::Imath, 1) => plain(Vector, Form(1, 1), 3),
        (IsoFamily::Imath, 2) => IsoSpec {
            input: Vector,
            output: Form(2, 1),
            perm: eps_rows(1),
            weight: Weight::None,
        },
        (IsoFamily::Imath, _) => plain(Scalar, Form(3, 1), 1),
        (IsoFamily::Bimath, 0) => plain(Vector, Form(0, 3), 3),
        (IsoFamily::Bimath, 1) => plain(Tensor20, Form(1, 3), 9),
        (IsoFamily::Bimath, 2) => IsoSpec {
            input: Tensor20,
            output: Form(2, 3),
            perm: eps_rows(3),
            weight: Weight::None,
        },
        (IsoFamily::Bimath, _) => plain(Vector, Form(3, 3), 3),
        (IsoFamily::TwoPoint3, 0) => plain(Point(3), Form(0, 3), 3),
        (IsoFamily::TwoPoint3, 1) => plain(TwoPoint(3), Form(1, 3), 9),
        (IsoFamily::TwoPoint3, 2) => IsoSpec {
            input: TwoPoint(3),
            output: Form(2, 3),
            perm: eps_rows(3),
            weight: Weight::None,
        },
        (IsoFamily::TwoPoint3, _) => plain(Point(3), Form(3, 3), 3),
        (IsoFamily::Planar, 0) => plain(Vector, Form(0, 2), 2),
        (IsoFamily::Planar, 1) => plain(Tensor20, Form(1, 2), 4),
        (IsoFamily::Planar, _) => plain(Vector, Form(2, 2), 2),
        (IsoFamily::PlanarTwoPoint, 0) => plain(Point(m), Form(0, m), m),
        (IsoFamily::PlanarTwoPoint, 1) => plain(TwoPoint(m), Form(1, m), 2 * m),
        (IsoFamily::PlanarTwoPoint, _) => plain(Point(m), Form(2, m), m),
        (IsoFamily::Surface, 0) => plain(Point(m), Form(0, m), m),
        (IsoFamily::Surface, 1) => IsoSpec {
            input: TwoPoint(m),
            output: Form(1, m),
            perm: identity_perm(2 * m),
            weight: Weight::MetricDiag,
        },
        (IsoFamily::Surface, _) => IsoSpec {
            input: Point(m),
            output: Form(2, m),
            perm: identity_perm(m),
            weight: Weight::SqrtDet,
        },
        (IsoFamily::Elast3, 0) => plain(Vector, Vector, 3),
        (IsoFamily::Elast3, 1) => plain(Tensor02Sym, Tensor02Sym, 6),
        (IsoFamily::Elast3, 2) => plain(Tensor02Sym, Curv4, 6),
        (IsoFamily::Elast3, _) => plain(Vector, Curv5, 3),
        (IsoFamily::Elast2, 0) => plain(Vector, Vector, 2),
        (IsoFamily::Elast2, 1) => plain(Tensor02Sym, Tensor02Sym, 3),
        (IsoFamily::Elast2, _) => plain(Scalar, Curv4, 1),
    }
}

/// Value dimension to instantiate a two-point family with, read off the
/// field being mapped (forward: its input valence; inverse: its output).
fn value_dim(v: Valence, n: usize) -> usize {
    match v {
        Valence::Point(m) | Valence::TwoPoint(m) | Valence::Form(_, m) => m,
        _ => n,
    }
}

fn check_chart(iso: IsoId, field: &TensorField, metric: Option<&MetricChart>) -> Result<()> {
    if field.dim() != iso.chart_dim() {
        return Err(Error::ChartMismatch {
            op: iso.name(),
            expected: format!("a {}-axis chart", iso.chart_dim()),
            got: field.domain.chart.name().to_string(),
        });
    }
    if iso.family == IsoFamily::Surface {
        if field.domain.chart != Chart::Spherical {
            return Err(Error::ChartMismatch {
                op: iso.name(),
                expected: "spherical".to_string(),
                got: field.domain.chart.name().to_string(),
            });
        }
        if iso.k > 0 && metric.is_none() {
            return Err(Error::MetricRequired { op: iso.name() });
        }
    }
    Ok(())
}

fn map_field(
    iso: IsoId,
    field: &TensorField,
    metric: Option<&MetricChart>,
    forward: bool,
) -> Result<TensorField> {
    check_chart(iso, field, metric)?;
    let n = field.dim();
    let m = value_dim(field.valence, n);
    let s = spec(iso, m);
    let (from, to) = if forward {
        (s.input, s.output)
    } else {
        (s.output, s.input)
    };
    if field.valence != from {
        return Err(Error::ValenceMismatch {
            op: iso.name(),
            expected: from.name(n),
            got: field.valence.name(n),
        });
    }

    let mut data = vec![Vec::new(); s.perm.len()];
    if forward {
        for (out, &(inp, sign)) in s.perm.iter().enumerate() {
            let mut arr = field.data[inp].clone();
            if sign < 0.0 {
                for v in arr.iter_mut() {
                    *v = -*v;
                }
            }
            data[out] = arr;
        }
    } else {
        for (out, &(inp, sign)) in s.perm.iter().enumerate() {
            let mut arr = field.data[out].clone();
            if sign < 0.0 {
                for v in arr.iter_mut() {
                    *v = -*v;
                }
            }
            data[inp] = arr;
        }
    }

    if s.weight != Weight::None {
        let mc = metric.expect("checked in check_chart");
        for (comp, arr) in data.iter_mut().enumerate() {
            for (node, v) in arr.iter_mut().enumerate() {
                if field.domain.mask[node] {
                    let p = field.domain.node_position(node);
                    // Components are (i, J) row-major; J = comp % 2 on the
                    // 2-axis chart.
                    let w = match s.weight {
                        Weight::MetricDiag => mc.metric_diag(&p)[comp % 2],
                        _ => mc.sqrt_det(&p),
                    };
                    if forward {
                        *v *= w;
                    } else {
                        *v /= w;
                    }
                }
            }
        }
    }

    Ok(TensorField {
        domain: field.domain.clone(),
        valence: to,
        data,
        exprs: None,
        erosion: field.erosion,
    })
}

/// Apply an isomorphism. Pure relabeling (no differentiation); the
/// metric is consulted only by the weighted surface maps.
pub fn forward(
    iso: IsoId,
    field: &TensorField,
    metric: Option<&MetricChart>,
) -> Result<TensorField> {
    map_field(iso, field, metric, true)
}

/// Apply the inverse of an isomorphism; exact mirror of [`forward`].
pub fn inverse(
    iso: IsoId,
    field: &TensorField,
    metric: Option<&MetricChart>,
) -> Result<TensorField> {
    map_field(iso, field, metric, false)
}

/// The operator on the form side of a commuting square: the exterior
/// derivative, the codifferential, or one of the curvature-complex
/// operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormOp {
    ExtD,
    Codiff,
    CalabiD0,
    CalabiD1,
    CalabiD2,
}

impl FormOp {
    pub fn name(&self) -> &'static str {
        match self {
            FormOp::ExtD => "d",
            FormOp::Codiff => "delta",
            FormOp::CalabiD0 => "D0",
            FormOp::CalabiD1 => "D1",
            FormOp::CalabiD2 => "D2",
        }
    }

    pub fn parse(s: &str) -> Result<FormOp> {
        match s {
            "d" => Ok(FormOp::ExtD),
            "delta" => Ok(FormOp::Codiff),
            "D0" => Ok(FormOp::CalabiD0),
            "D1" => Ok(FormOp::CalabiD1),
            "D2" => Ok(FormOp::CalabiD2),
            _ => Err(Error::UnknownId {
                kind: s.to_string(),
                what: "form-side operator".to_string(),
            }),
        }
    }

    /// Derivative order (erosion the application consumes).
    pub fn order(&self) -> usize {
        match self {
            FormOp::CalabiD1 => 2,
            _ => 1,
        }
    }

    /// Apply the operator. The curvature-complex branches consult the
    /// metric chart (defaulting to the flat chart of the field's domain).
    pub fn apply(&self, field: &TensorField, metric: Option<&MetricChart>) -> Result<TensorField> {
        match self {
            FormOp::ExtD => calculus::apply(OperatorId::ExtD, field, metric),
            FormOp::Codiff => calculus::apply(OperatorId::Codiff, field, metric),
            _ => {
                let mc = metric
                    .copied()
                    .unwrap_or_else(|| MetricChart::cartesian(field.domain.chart));
                match self {
                    FormOp::CalabiD0 => geometry::killing_d0(field, &mc),
                    FormOp::CalabiD1 => geometry::calabi_d1(field, &mc),
                    _ => geometry::calabi_d2(field, &mc),
                }
            }
        }
    }
}

/// Residual of one commuting square:
/// ‖op_form(iso_in(probe)) − sign·iso_out(op_tensor(probe))‖_∞ over the
/// common valid interior. `sign` is +1 except where a chain is mapped
/// against the codifferential with an explicit −1 (the planar and
/// two-point div squares).
pub fn diagram_residual(
    iso_pair: (IsoId, IsoId),
    op_tensor: OperatorId,
    op_form: FormOp,
    sign: f64,
    probe: &TensorField,
    metric: Option<&MetricChart>,
) -> Result<f64> {
    let (iso_in, iso_out) = iso_pair;
    let form_in = forward(iso_in, probe, metric)?;
    let lhs = op_form.apply(&form_in, metric)?;
    let tensor_out = calculus::apply(op_tensor, probe, metric)?;
    let mut rhs = forward(iso_out, &tensor_out, metric)?;
    if sign != 1.0 {
        for arr in rhs.data.iter_mut() {
            for v in arr.iter_mut() {
                *v *= sign;
            }
        }
    }
    let diff = lhs.sub(&rhs).map_err(|e| Error::NonChainingPair {
        first: format!("{}∘{}", op_form.name(), iso_in.name()),
        second: format!("{}∘{}", iso_out.name(), op_tensor.name()),
        why: e.to_string(),
    })?;
    Ok(diff.linf())
}

/// One commuting square of a diagram: the probe enters at `probe`
/// valence, runs through `op_tensor` on the tensor side and `op_form`
/// after `iso_in` on the form side, and the results are compared through
/// `iso_out` with the given sign.
#[derive(Debug, Clone, Copy)]
pub struct DiagramSquare {
    pub iso_in: IsoId,
    pub op_tensor: OperatorId,
    pub op_form: FormOp,
    pub iso_out: IsoId,
    pub sign: f64,
    pub probe: Valence,
}

/// A named commutation diagram: a chain of squares on one chart.
pub struct Diagram {
    pub name: &'static str,
    pub chart: Chart,
    pub squares: Vec<DiagramSquare>,
}

/// The full registry of commutation diagrams the verifier runs.
pub fn diagrams() -> Vec<Diagram> {
    use IsoFamily::*;
    use OperatorId::*;
    use Valence::*;
    let sq = |family: IsoFamily,
              k_in: usize,
              op_tensor: OperatorId,
              op_form: FormOp,
              sign: f64,
              probe: Valence| DiagramSquare {
        iso_in: IsoId { family, k: k_in },
        op_tensor,
        op_form,
        iso_out: IsoId {
            family,
            k: if op_form == FormOp::Codiff {
                k_in - 1
            } else {
                k_in + 1
            },
        },
        sign,
        probe,
    };
    let d = FormOp::ExtD;
    let delta = FormOp::Codiff;
    vec![
        Diagram {
            name: "classical-forms",
            chart: Chart::Cartesian3,
            squares: vec![
                sq(Imath, 0, GradV, d, 1.0, Scalar),
                sq(Imath, 1, CurlV, d, 1.0, Vector),
                sq(Imath, 2, DivV, d, 1.0, Vector),
            ],
        },
        Diagram {
            name: "gcd-forms",
            chart: Chart::Cartesian3,
            squares: vec![
                sq(Bimath, 0, GradT, d, 1.0, Vector),
                sq(Bimath, 1, CurlT, d, 1.0, Tensor20),
                sq(Bimath, 2, DivT, d, 1.0, Tensor20),
            ],
        },
        Diagram {
            name: "GCD-forms",
            chart: Chart::Cartesian3,
            squares: vec![
                sq(TwoPoint3, 0, Grad2p, d, 1.0, Point(3)),
                sq(TwoPoint3, 1, CurlT2p, d, 1.0, TwoPoint(3)),
                sq(TwoPoint3, 2, Div2p, d, 1.0, TwoPoint(3)),
            ],
        },
        Diagram {
            name: "gc-forms",
            chart: Chart::Cartesian2,
            squares: vec![
                sq(Planar, 0, GradT, d, 1.0, Vector),
                sq(Planar, 1, C2d, d, 1.0, Tensor20),
            ],
        },
        Diagram {
            name: "sd-forms",
            chart: Chart::Cartesian2,
            squares: vec![
                sq(Planar, 2, S2d, delta, 1.0, Vector),
                sq(Planar, 1, DivT, delta, -1.0, Tensor20),
            ],
        },
        Diagram {
            name: "GC-forms",
            chart: Chart::Cartesian2,
            squares: vec![
                sq(PlanarTwoPoint, 0, Grad2p, d, 1.0, Point(2)),
                sq(PlanarTwoPoint, 1, C2d2p, d, 1.0, TwoPoint(2)),
            ],
        },
        Diagram {
            name: "SD-forms",
            chart: Chart::Cartesian2,
            squares: vec![
                sq(PlanarTwoPoint, 2, S2d2p, delta, 1.0, Point(2)),
                sq(PlanarTwoPoint, 1, Div2p, delta, -1.0, TwoPoint(2)),
            ],
        },
        Diagram {
            name: "surface-GC",
            chart: Chart::Spherical,
            squares: vec![
                sq(Surface, 0, SurfGrad, d, 1.0, Point(3)),
                sq(Surface, 1, SurfC, d, 1.0, TwoPoint(3)),
            ],
        },
        Diagram {
            name: "elasticity3d-calabi",
            chart: Chart::Cartesian3,
            squares: vec![
                sq(Elast3, 0, GradS, FormOp::CalabiD0, 1.0, Vector),
                sq(Elast3, 1, CurlCurl, FormOp::CalabiD1, 1.0, Tensor02Sym),
                sq(Elast3, 2, DivT, FormOp::CalabiD2, 1.0, Tensor02Sym),
            ],
        },
        Diagram {
            name: "elasticity2d-calabi",
            chart: Chart::Cartesian2,
            squares: vec![
                sq(Elast2, 0, GradS, FormOp::CalabiD0, 1.0, Vector),
                sq(Elast2, 1, Dc, FormOp::CalabiD1, 1.0, Tensor02Sym),
            ],
        },
    ]
}
