//! Compatibility checkers: local differential residuals combined with
//! period integrals over homology generators, condensed into a verdict.
//!
//! Each check answers "is this field the image of a potential?" in two
//! parts. The local part applies the annihilating differential operator of
//! the relevant complex (a gradient-candidate must have vanishing curl, a
//! stress-candidate a vanishing divergence, a strain-candidate a vanishing
//! incompatibility). That alone certifies a potential only on contractible
//! domains: the vortex rows on an annulus and the radial inverse-square
//! rows on a spherical shell pass every pointwise test yet admit no global
//! potential. The period part integrates the candidate over the domain's
//! independent loops and closed surfaces, where those obstructions live.
//!
//! Verdicts follow a banded rule so discretization error cannot flip a
//! clear-cut answer: every value within tolerance is `compatible`, any
//! value more than ten times its tolerance is `incompatible`, and the band
//! in between — or any failure to evaluate — is `inconclusive`. All raw
//! numbers are reported so callers can re-threshold without re-running.
//!
//! When the input field carries closed-form component expressions, the
//! local residual is evaluated by exact differentiation instead of
//! stencils, so fields like the vortex rows report a local residual at
//! round-off rather than at truncation-error scale.

use serde::Serialize;

use crate::calculus::{self, MetricChart, OperatorId};
use crate::error::{Error, Result};
use crate::fields::{sym_index, TensorField, Valence};
use crate::isomorphisms::{self, IsoFamily, IsoId};
use crate::mesh::{Chain1, Chain2, Chart, Domain};

const NOTE_SYMBOLIC: &str =
    "local residual evaluated by exact differentiation of the field's stored expressions";
const NOTE_LOCAL_ONLY: &str = "local-only check: no period integrals apply to this criterion";
const NOTE_BITMAP: &str = "bitmap mask rule has no canonical generators; supply loops or \
                           surfaces explicitly to resolve the period part";
const NOTE_MOMENT_ARM: &str = "moment arms are chart coordinates measured from the origin";
const NOTE_NAN: &str =
    "a residual or period failed to evaluate (NaN); see coverage and the raw values";
const NOTE_EMPTY: &str = "erosion left no interior nodes to evaluate";

/// Three-way answer of a compatibility check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Compatible,
    Incompatible,
    Inconclusive,
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Compatible => "compatible",
            Verdict::Incompatible => "incompatible",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

/// Period integrals of one chain: the chain id plus one value per free row
/// (or per strain family member).
#[derive(Debug, Clone, Serialize)]
pub struct PeriodRow {
    pub chain: String,
    pub values: Vec<f64>,
}

/// Full result of a compatibility check. Serializes to the JSON report the
/// CLI writes.
#[derive(Debug, Clone, Serialize)]
pub struct CompatReport {
    /// Check kind token, e.g. `grad3d`.
    pub check: String,
    pub verdict: Verdict,
    /// Max |local residual| over the evaluated nodes (NaN if any evaluated
    /// node failed).
    pub local_residual_linf: f64,
    /// Fraction of masked-in nodes the local residual covered.
    pub coverage: f64,
    pub periods: Vec<PeriodRow>,
    pub tol_local: f64,
    pub tol_period: f64,
    pub notes: Vec<String>,
}

/// The sixteen check kinds. Tokens are case-sensitive: lower-case names
/// check row fields (the chart leg is the second index), capitalized names
/// check their two-point analogues.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckKind {
    /// `grad3d`: rows of a 3D gradient — transposed curl + tangent loops.
    GradRows3,
    /// `curlT3d`: transposed-curl image — divergence + force fluxes.
    CurlTImage3,
    /// `Grad3d`: two-point gradient image.
    GradTwoPoint3,
    /// `CurlT3d`: two-point transposed-curl image.
    CurlTImageTwoPoint3,
    /// `grad2d`: rows of a planar gradient — planar curl + tangent loops.
    GradRows2,
    /// `s2d`: planar rotated-gradient image — divergence + normal loops.
    SImage2,
    /// `Grad2d`: planar two-point gradient image.
    GradTwoPoint2,
    /// `S2d`: planar two-point rotated-gradient image.
    SImageTwoPoint2,
    /// `surfGrad`: surface gradient image on the spherical chart.
    SurfGradImage,
    /// `dispgrad`: displacement gradient; the local operator follows the
    /// chart (flat 3D, flat 2D, or spherical).
    DispGrad,
    /// `linstrain3d`: linear strain — curl∘curl plus both line-integral
    /// families (displacement and rotation periods).
    LinStrain3,
    /// `linstrain2d`: planar linear strain — the planar incompatibility
    /// operator plus the same two families.
    LinStrain2,
    /// `beltrami`: symmetric stress — divergence plus force *and* moment
    /// fluxes.
    Beltrami,
    /// `curlTstress`: stress-function candidate — divergence + force
    /// fluxes, row or two-point valence.
    CurlTStress,
    /// `greenC`: deformation-tensor candidate — curvature residual only.
    GreenMetric,
    /// `shell`: first/second fundamental form pair — Gauss and Codazzi
    /// residuals only.
    Shell,
}

/// Every kind, in the order of the `CheckKind` docs.
pub const ALL_CHECKS: [CheckKind; 16] = [
    CheckKind::GradRows3,
    CheckKind::CurlTImage3,
    CheckKind::GradTwoPoint3,
    CheckKind::CurlTImageTwoPoint3,
    CheckKind::GradRows2,
    CheckKind::SImage2,
    CheckKind::GradTwoPoint2,
    CheckKind::SImageTwoPoint2,
    CheckKind::SurfGradImage,
    CheckKind::DispGrad,
    CheckKind::LinStrain3,
    CheckKind::LinStrain2,
    CheckKind::Beltrami,
    CheckKind::CurlTStress,
    CheckKind::GreenMetric,
    CheckKind::Shell,
];

impl CheckKind {
    pub fn name(&self) -> &'static str {
        match self {
            CheckKind::GradRows3 => "grad3d",
            CheckKind::CurlTImage3 => "curlT3d",
            CheckKind::GradTwoPoint3 => "Grad3d",
            CheckKind::CurlTImageTwoPoint3 => "CurlT3d",
            CheckKind::GradRows2 => "grad2d",
            CheckKind::SImage2 => "s2d",
            CheckKind::GradTwoPoint2 => "Grad2d",
            CheckKind::SImageTwoPoint2 => "S2d",
            CheckKind::SurfGradImage => "surfGrad",
            CheckKind::DispGrad => "dispgrad",
            CheckKind::LinStrain3 => "linstrain3d",
            CheckKind::LinStrain2 => "linstrain2d",
            CheckKind::Beltrami => "beltrami",
            CheckKind::CurlTStress => "curlTstress",
            CheckKind::GreenMetric => "greenC",
            CheckKind::Shell => "shell",
        }
    }

    pub fn parse(s: &str) -> Result<CheckKind> {
        ALL_CHECKS
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownId {
                kind: "check".into(),
                what: s.into(),
            })
    }
}

/// Options shared by every check. `loops`/`surfaces` override the domain's
/// canonical generators when present (an explicit empty list skips the
/// period part deliberately); `metric` supplies the sphere radius on the
/// spherical chart (radius 1 otherwise); `khat` is the ambient curvature
/// constant of the geometric kinds.
#[derive(Debug, Clone)]
pub struct CheckOptions {
    pub tol_local: f64,
    pub tol_period: f64,
    pub khat: f64,
    pub metric: Option<MetricChart>,
    pub loops: Option<Vec<Chain1>>,
    pub surfaces: Option<Vec<Chain2>>,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            tol_local: 1e-6,
            tol_period: 1e-6,
            khat: 0.0,
            metric: None,
            loops: None,
            surfaces: None,
        }
    }
}

/// Contraction direction for [`line_integral`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineMode {
    /// Contract the chart leg with the segment tangent (circulation).
    Tangent,
    /// Contract with the tangent rotated +90° (planar flux); 2D only.
    Normal,
}

fn require_valid_loop(domain: &Domain, chain: &Chain1) -> Result<()> {
    let violations = domain.validate_chain1(chain);
    if violations.is_empty() {
        return Ok(());
    }
    for (i, p) in chain.vertices.iter().enumerate() {
        if p.len() == domain.dim() && !domain.contains_point(p) {
            return Err(Error::LoopExitsMask { vertex: i });
        }
    }
    Err(Error::InvalidChain(violations))
}

/// Composite-trapezoid line integral of a row field along a closed
/// polyline: one value per free row, the chart leg contracted with the
/// chord vector (tangent mode) or its +90° rotation (normal mode). Values
/// are interpolated multilinearly at the polyline vertices.
pub fn line_integral(t: &TensorField, chain: &Chain1, mode: LineMode) -> Result<Vec<f64>> {
    let domain = &t.domain;
    let n = domain.dim();
    require_valid_loop(domain, chain)?;
    if mode == LineMode::Normal && n != 2 {
        return Err(Error::ChartMismatch {
            op: "line_integral(normal)".into(),
            expected: "cartesian2".into(),
            got: domain.chart.name().into(),
        });
    }
    let comps = t.data.len();
    let rows_ok = !matches!(
        t.valence,
        Valence::Tensor02Sym | Valence::Curv4 | Valence::Form(..)
    ) && comps % n == 0;
    if !rows_ok {
        return Err(Error::ValenceMismatch {
            op: "line_integral".into(),
            expected: "a field whose last leg is a plain chart index".into(),
            got: t.valence.name(n),
        });
    }
    let rows = comps / n;
    let mut vals = vec![0.0; rows];
    let mut prev = t.interp_all(&chain.vertices[0]);
    for w in chain.vertices.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let cur = t.interp_all(b);
        let seg: Vec<f64> = (0..n).map(|ax| b[ax] - a[ax]).collect();
        let dir = match mode {
            LineMode::Tangent => seg,
            LineMode::Normal => vec![-seg[1], seg[0]],
        };
        for r in 0..rows {
            let mut s = 0.0;
            for (ax, d) in dir.iter().enumerate() {
                s += 0.5 * (prev[r * n + ax] + cur[r * n + ax]) * d;
            }
            vals[r] += s;
        }
        prev = cur;
    }
    Ok(vals)
}

/// Centroid-rule flux of a second-order field through a closed oriented
/// triangulated surface: per triangle, the interpolated value at the
/// centroid contracted with the area-weighted normal ½(B−A)×(C−A). Returns
/// the 3 force components, plus the 3 moment components (arms from the
/// chart origin) when `moment` is set.
pub fn surface_integral(t: &TensorField, surf: &Chain2, moment: bool) -> Result<Vec<f64>> {
    let domain = &t.domain;
    if domain.dim() != 3 {
        return Err(Error::ChartMismatch {
            op: "surface_integral".into(),
            expected: "cartesian3".into(),
            got: domain.chart.name().into(),
        });
    }
    let comp_of: fn(usize, usize) -> usize = match t.valence {
        Valence::Tensor20 | Valence::TwoPoint(3) => |i, l| i * 3 + l,
        Valence::Tensor02Sym => |i, l| sym_index(3, (i + 1).min(l + 1), (i + 1).max(l + 1)),
        _ => {
            return Err(Error::ValenceMismatch {
                op: "surface_integral".into(),
                expected: "tensor20, twopoint(3), or tensor02sym".into(),
                got: t.valence.name(3),
            })
        }
    };
    let violations = domain.validate_chain2(surf);
    if !violations.is_empty() {
        if let Some(v) = violations.iter().find(|m| m.contains("orientation")) {
            return Err(Error::SurfaceOrientation(v.clone()));
        }
        return Err(Error::InvalidChain(violations));
    }
    let mut out = vec![0.0; if moment { 6 } else { 3 }];
    for tri in &surf.triangles {
        let a = &surf.vertices[tri[0]];
        let b = &surf.vertices[tri[1]];
        let c = &surf.vertices[tri[2]];
        let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
        let nvec = [
            0.5 * (u[1] * v[2] - u[2] * v[1]),
            0.5 * (u[2] * v[0] - u[0] * v[2]),
            0.5 * (u[0] * v[1] - u[1] * v[0]),
        ];
        let cen = [
            (a[0] + b[0] + c[0]) / 3.0,
            (a[1] + b[1] + c[1]) / 3.0,
            (a[2] + b[2] + c[2]) / 3.0,
        ];
        let vals = t.interp_all(&cen);
        let mut tr = [0.0; 3];
        for (i, ti) in tr.iter_mut().enumerate() {
            for (l, nl) in nvec.iter().enumerate() {
                *ti += vals[comp_of(i, l)] * nl;
            }
        }
        for i in 0..3 {
            out[i] += tr[i];
        }
        if moment {
            for k in 0..3 {
                let (i, j) = ((k + 1) % 3, (k + 2) % 3);
                out[3 + k] += cen[i] * tr[j] - cen[j] * tr[i];
            }
        }
    }
    Ok(out)
}

/// Multilinear interpolation of a raw node array (mirror of the field
/// interpolator, for stencil derivative arrays that live outside a field).
pub(crate) fn interp_raw(domain: &Domain, arr: &[f64], p: &[f64]) -> f64 {
    let Some((corner, local)) = domain.cell_of(p) else {
        return f64::NAN;
    };
    let d = domain.dim();
    let mut acc = 0.0;
    for bits in 0..(1usize << d) {
        let mut w = 1.0;
        let mut idx = corner.clone();
        for a in 0..d {
            if (bits >> a) & 1 == 1 {
                idx[a] += 1;
                w *= local[a];
            } else {
                w *= 1.0 - local[a];
            }
        }
        if w != 0.0 {
            acc += w * arr[domain.grid.flat(&idx)];
        }
    }
    acc
}

/// Stencil derivative arrays ∂ₖT of every component, indexed
/// `[component][axis]`, for the strain line-integral families.
fn component_derivatives(t: &TensorField) -> Vec<Vec<Vec<f64>>> {
    let n = t.dim();
    t.data
        .iter()
        .map(|arr| {
            (0..n)
                .map(|k| calculus::d1(&t.domain.grid, arr, k))
                .collect()
        })
        .collect()
}

/// Both strain line-integral families around one loop, for a symmetric
/// strain candidate T. Family one (one value per free row I):
/// ∮ [T_IJ − Xᴷ(T_IJ,ᴷ − T_JK,ᴵ)] dXᴶ — the displacement periods. Family
/// two (one value per index pair I<J): ∮ (T_IK,J − T_JK,I) dXᴷ — the
/// rotation periods. Derivatives are stencil arrays interpolated at the
/// loop vertices; the moment arm Xᴷ is the exact vertex coordinate.
fn strain_periods(
    t: &TensorField,
    dt: &[Vec<Vec<f64>>],
    chain: &Chain1,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let domain = &t.domain;
    let n = domain.dim();
    require_valid_loop(domain, chain)?;
    let pairs: Vec<(usize, usize)> = (1..=n)
        .flat_map(|i| ((i + 1)..=n).map(move |j| (i, j)))
        .collect();

    // W1 is the family-one integrand matrix (free row i, contracted leg j);
    // W2 the family-two matrix (pair q, contracted leg k). Both 0-based
    // row-major.
    let eval = |p: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let tv: Vec<f64> = (0..t.data.len()).map(|c| t.interp(c, p)).collect();
        let dv: Vec<Vec<f64>> = dt
            .iter()
            .map(|per_comp| per_comp.iter().map(|arr| interp_raw(domain, arr, p)).collect())
            .collect();
        let slot = |i: usize, j: usize| sym_index(n, i.min(j), i.max(j));
        let mut w1 = vec![0.0; n * n];
        for i in 1..=n {
            for j in 1..=n {
                let mut v = tv[slot(i, j)];
                for k in 1..=n {
                    let t_ij_k = dv[slot(i, j)][k - 1];
                    let t_jk_i = dv[slot(j, k)][i - 1];
                    v -= p[k - 1] * (t_ij_k - t_jk_i);
                }
                w1[(i - 1) * n + (j - 1)] = v;
            }
        }
        let mut w2 = vec![0.0; pairs.len() * n];
        for (q, &(i, j)) in pairs.iter().enumerate() {
            for k in 1..=n {
                let t_ik_j = dv[slot(i, k)][j - 1];
                let t_jk_i = dv[slot(j, k)][i - 1];
                w2[q * n + (k - 1)] = t_ik_j - t_jk_i;
            }
        }
        (w1, w2)
    };

    let mut f1 = vec![0.0; n];
    let mut f2 = vec![0.0; pairs.len()];
    let (mut w1p, mut w2p) = eval(&chain.vertices[0]);
    for w in chain.vertices.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let (w1c, w2c) = eval(b);
        for ax in 0..n {
            let dx = b[ax] - a[ax];
            for (i, f) in f1.iter_mut().enumerate() {
                *f += 0.5 * (w1p[i * n + ax] + w1c[i * n + ax]) * dx;
            }
            for (q, f) in f2.iter_mut().enumerate() {
                *f += 0.5 * (w2p[q * n + ax] + w2c[q * n + ax]) * dx;
            }
        }
        w1p = w1c;
        w2p = w2c;
    }
    Ok((f1, f2))
}

/// How a kind's period part is integrated.
enum PeriodPlan {
    None,
    Tangent,
    Normal,
    Flux { moments: bool },
    Strain,
}

fn period_plan(kind: CheckKind) -> PeriodPlan {
    use CheckKind::*;
    match kind {
        GradRows3 | GradTwoPoint3 | GradRows2 | GradTwoPoint2 | SurfGradImage | DispGrad => {
            PeriodPlan::Tangent
        }
        SImage2 | SImageTwoPoint2 => PeriodPlan::Normal,
        CurlTImage3 | CurlTImageTwoPoint3 | CurlTStress => PeriodPlan::Flux { moments: false },
        Beltrami => PeriodPlan::Flux { moments: true },
        LinStrain3 | LinStrain2 => PeriodPlan::Strain,
        GreenMetric | Shell => PeriodPlan::None,
    }
}

/// The annihilating operator whose residual is the local part of `kind`.
fn local_op(kind: CheckKind, field: &TensorField) -> Result<OperatorId> {
    use CheckKind::*;
    let n = field.dim();
    let chart = field.domain.chart;
    let need = |want: usize| -> Result<()> {
        if n == want {
            Ok(())
        } else {
            Err(Error::ChartMismatch {
                op: format!("compat:{}", kind.name()),
                expected: if want == 3 { "cartesian3" } else { "cartesian2" }.into(),
                got: chart.name().into(),
            })
        }
    };
    let need_sym = || -> Result<()> {
        if field.valence == Valence::Tensor02Sym {
            Ok(())
        } else {
            Err(Error::ValenceMismatch {
                op: format!("compat:{}", kind.name()),
                expected: "tensor02sym".into(),
                got: field.valence.name(n),
            })
        }
    };
    match kind {
        GradRows3 => {
            need(3)?;
            Ok(OperatorId::CurlT)
        }
        CurlTImage3 => {
            need(3)?;
            Ok(OperatorId::DivT)
        }
        GradTwoPoint3 => {
            need(3)?;
            Ok(OperatorId::CurlT2p)
        }
        CurlTImageTwoPoint3 => {
            need(3)?;
            Ok(OperatorId::Div2p)
        }
        GradRows2 => {
            need(2)?;
            Ok(OperatorId::C2d)
        }
        SImage2 => {
            need(2)?;
            Ok(OperatorId::DivT)
        }
        GradTwoPoint2 => {
            need(2)?;
            Ok(OperatorId::C2d2p)
        }
        SImageTwoPoint2 => {
            need(2)?;
            Ok(OperatorId::Div2p)
        }
        SurfGradImage => Ok(OperatorId::SurfC),
        DispGrad => Ok(match chart {
            Chart::Cartesian3 => OperatorId::CurlT2p,
            Chart::Cartesian2 => OperatorId::C2d2p,
            Chart::Spherical => OperatorId::SurfC,
        }),
        LinStrain3 => {
            need(3)?;
            need_sym()?;
            Ok(OperatorId::CurlCurl)
        }
        LinStrain2 => {
            need(2)?;
            need_sym()?;
            Ok(OperatorId::Dc)
        }
        Beltrami => {
            need(3)?;
            need_sym()?;
            Ok(OperatorId::DivT)
        }
        CurlTStress => {
            need(3)?;
            Ok(match field.valence {
                Valence::TwoPoint(_) => OperatorId::Div2p,
                _ => OperatorId::DivT,
            })
        }
        GreenMetric | Shell => unreachable!("geometry kinds bypass local_op"),
    }
}

/// The field whose tangent circulation realizes the period part. On the
/// spherical chart the chart leg is lowered with the metric first, so the
/// contraction with coordinate chords is the invariant line element.
fn tangent_integrand(
    kind: CheckKind,
    field: &TensorField,
    mc: &MetricChart,
) -> Result<TensorField> {
    let on_sphere = matches!(kind, CheckKind::SurfGradImage)
        || (kind == CheckKind::DispGrad && field.domain.chart == Chart::Spherical);
    if on_sphere {
        isomorphisms::forward(
            IsoId {
                family: IsoFamily::Surface,
                k: 1,
            },
            field,
            Some(mc),
        )
    } else {
        Ok(field.clone())
    }
}

/// Max |value| over the residual's trusted support, with NaN detection, and
/// the support size.
fn strict_linf(r: &TensorField) -> (f64, usize) {
    let support = r.support();
    let count = support.iter().filter(|&&b| b).count();
    let mut m = 0.0f64;
    let mut nan = false;
    for arr in &r.data {
        for (node, &live) in support.iter().enumerate() {
            if live {
                let v = arr[node];
                if v.is_nan() {
                    nan = true;
                } else {
                    m = m.max(v.abs());
                }
            }
        }
    }
    (if nan { f64::NAN } else { m }, count)
}

fn source_loops(
    domain: &Domain,
    user: &Option<Vec<Chain1>>,
    notes: &mut Vec<String>,
    missing: &mut bool,
) -> Result<Vec<Chain1>> {
    if let Some(u) = user {
        return Ok(u.clone());
    }
    match domain.canonical_generators() {
        Ok((loops, _)) => Ok(loops),
        Err(Error::GeneratorsNeedNamedRule) => {
            notes.push(NOTE_BITMAP.into());
            *missing = true;
            Ok(vec![])
        }
        Err(e) => Err(e),
    }
}

fn source_surfaces(
    domain: &Domain,
    user: &Option<Vec<Chain2>>,
    notes: &mut Vec<String>,
    missing: &mut bool,
) -> Result<Vec<Chain2>> {
    if let Some(u) = user {
        return Ok(u.clone());
    }
    match domain.canonical_generators() {
        Ok((_, surfaces)) => Ok(surfaces),
        Err(Error::GeneratorsNeedNamedRule) => {
            notes.push(NOTE_BITMAP.into());
            *missing = true;
            Ok(vec![])
        }
        Err(e) => Err(e),
    }
}

/// Run one compatibility check. `second` is the second-fundamental-form
/// field of the `shell` kind and must be absent otherwise. The local
/// residual uses exact differentiation when the field carries expressions,
/// stencils otherwise; periods are integrated over the user chains when
/// given, else over the domain's canonical generators.
pub fn check(
    kind: CheckKind,
    field: &TensorField,
    second: Option<&TensorField>,
    opts: &CheckOptions,
) -> Result<CompatReport> {
    let domain = field.domain.clone();
    let mc = opts
        .metric
        .unwrap_or_else(|| MetricChart::cartesian(domain.chart));
    let mut notes: Vec<String> = Vec::new();

    if kind != CheckKind::Shell && second.is_some() {
        return Err(Error::ValenceMismatch {
            op: format!("compat:{}", kind.name()),
            expected: "one input field".into(),
            got: "a second field".into(),
        });
    }

    // Local residuals (two fields for the shell kind: Gauss and Codazzi).
    let locals: Vec<TensorField> = match kind {
        CheckKind::GreenMetric => {
            notes.push(NOTE_LOCAL_ONLY.into());
            vec![crate::geometry::nonlinear_compat_residual(field, opts.khat)?]
        }
        CheckKind::Shell => {
            notes.push(NOTE_LOCAL_ONLY.into());
            let theta = second.ok_or_else(|| Error::ValenceMismatch {
                op: "compat:shell".into(),
                expected: "metric and second-form fields".into(),
                got: "one field".into(),
            })?;
            let (gauss, codazzi) = crate::geometry::gauss_codazzi_residual(field, theta, opts.khat)?;
            vec![gauss, codazzi]
        }
        _ => {
            let op = local_op(kind, field)?;
            match calculus::apply_symbolic(op, field, Some(&mc))? {
                Some(r) => {
                    notes.push(NOTE_SYMBOLIC.into());
                    vec![r]
                }
                None => vec![calculus::apply(op, field, Some(&mc))?],
            }
        }
    };

    let mask_count = domain.mask.iter().filter(|&&b| b).count().max(1);
    let mut local_linf = 0.0f64;
    let mut min_support = usize::MAX;
    for r in &locals {
        let (v, count) = strict_linf(r);
        min_support = min_support.min(count);
        if v.is_nan() {
            local_linf = f64::NAN;
        } else if !local_linf.is_nan() {
            local_linf = local_linf.max(v);
        }
    }
    let coverage = min_support as f64 / mask_count as f64;

    // Period integrals.
    let mut periods: Vec<PeriodRow> = Vec::new();
    let mut missing_chains = false;
    match period_plan(kind) {
        PeriodPlan::None => {}
        PeriodPlan::Tangent => {
            let loops = source_loops(&domain, &opts.loops, &mut notes, &mut missing_chains)?;
            if !loops.is_empty() {
                let integrand = tangent_integrand(kind, field, &mc)?;
                for lp in &loops {
                    periods.push(PeriodRow {
                        chain: lp.id.clone(),
                        values: line_integral(&integrand, lp, LineMode::Tangent)?,
                    });
                }
            }
        }
        PeriodPlan::Normal => {
            let loops = source_loops(&domain, &opts.loops, &mut notes, &mut missing_chains)?;
            for lp in &loops {
                periods.push(PeriodRow {
                    chain: lp.id.clone(),
                    values: line_integral(field, lp, LineMode::Normal)?,
                });
            }
        }
        PeriodPlan::Strain => {
            let loops = source_loops(&domain, &opts.loops, &mut notes, &mut missing_chains)?;
            if !loops.is_empty() {
                let dt = component_derivatives(field);
                for lp in &loops {
                    let (disp, rot) = strain_periods(field, &dt, lp)?;
                    periods.push(PeriodRow {
                        chain: format!("{}:displacement", lp.id),
                        values: disp,
                    });
                    periods.push(PeriodRow {
                        chain: format!("{}:rotation", lp.id),
                        values: rot,
                    });
                }
            }
        }
        PeriodPlan::Flux { moments } => {
            let surfaces =
                source_surfaces(&domain, &opts.surfaces, &mut notes, &mut missing_chains)?;
            if moments && !surfaces.is_empty() {
                notes.push(NOTE_MOMENT_ARM.into());
            }
            for s in &surfaces {
                periods.push(PeriodRow {
                    chain: s.id.clone(),
                    values: surface_integral(field, s, moments)?,
                });
            }
        }
    }

    // Verdict: any value far out of band → incompatible; failures to
    // evaluate → inconclusive; everything in band → compatible.
    let mut any_over = !local_linf.is_nan() && local_linf > 10.0 * opts.tol_local;
    let mut any_nan = local_linf.is_nan();
    let mut all_within = !local_linf.is_nan() && local_linf <= opts.tol_local;
    for row in &periods {
        for &v in &row.values {
            if v.is_nan() {
                any_nan = true;
                all_within = false;
            } else {
                if v.abs() > 10.0 * opts.tol_period {
                    any_over = true;
                }
                if v.abs() > opts.tol_period {
                    all_within = false;
                }
            }
        }
    }
    if min_support == 0 {
        notes.push(NOTE_EMPTY.into());
    }
    let verdict = if any_over {
        Verdict::Incompatible
    } else if any_nan || min_support == 0 {
        if any_nan {
            notes.push(NOTE_NAN.into());
        }
        Verdict::Inconclusive
    } else if missing_chains {
        Verdict::Inconclusive
    } else if all_within {
        Verdict::Compatible
    } else {
        Verdict::Inconclusive
    };

    Ok(CompatReport {
        check: kind.name().to_string(),
        verdict,
        local_residual_linf: local_linf,
        coverage,
        periods,
        tol_local: opts.tol_local,
        tol_period: opts.tol_period,
        notes,
    })
}
