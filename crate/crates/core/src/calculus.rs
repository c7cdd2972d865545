//! Central-difference realizations of every first- and second-order
//! operator in the tensor complexes, plus the exterior derivative and the
//! codifferential on ℝᵐ-valued forms.
//!
//! Everything is built from one primitive: the 2nd-order central difference
//! along a grid axis. Second derivatives are composed first-order stencils
//! (the pure second along an axis uses the ±2h/4h² five-point pattern this
//! composition produces), never wider one-shot stencils. Because central
//! stencils along different axes commute exactly, the composition of any
//! two successive operators in a complex vanishes to round-off — the
//! discrete counterpart of the exact-sequence property — and every such
//! identity here is inherited rather than engineered case by case.
//!
//! Nodes where a stencil would reach outside the mask receive NaN; the
//! [`TensorField::erosion`] counter tracks how far outputs are trustworthy.
//! No one-sided differences are used: outputs exist only on
//! interior-evaluable nodes, and the lost boundary ring is the price of
//! exact algebra.

use crate::error::{Error, Result};
use crate::fields::{increasing_multi_indices, sym_index, TensorField, Valence};
use crate::mesh::{Chart, GridSpec};

/// Chart plus the metric parameters the surface operators need. Flat
/// charts carry the identity metric; the spherical chart carries the
/// sphere radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricChart {
    pub chart: Chart,
    /// Sphere radius for [`Chart::Spherical`]; ignored on flat charts.
    pub radius: f64,
}

impl MetricChart {
    pub fn cartesian(chart: Chart) -> MetricChart {
        MetricChart {
            chart,
            radius: 1.0,
        }
    }

    pub fn spherical(radius: f64) -> MetricChart {
        MetricChart {
            chart: Chart::Spherical,
            radius,
        }
    }

    /// Lower metric components at a chart point, as the diagonal (the
    /// charts used here are orthogonal). Spherical: G₁₁ = R²sin²x2,
    /// G₂₂ = R².
    pub fn metric_diag(&self, p: &[f64]) -> Vec<f64> {
        match self.chart {
            Chart::Cartesian2 => vec![1.0, 1.0],
            Chart::Cartesian3 => vec![1.0, 1.0, 1.0],
            Chart::Spherical => {
                let s = p[1].sin();
                let r2 = self.radius * self.radius;
                vec![r2 * s * s, r2]
            }
        }
    }

    /// √det G at a chart point. Spherical: R² sin x2.
    pub fn sqrt_det(&self, p: &[f64]) -> f64 {
        match self.chart {
            Chart::Cartesian2 | Chart::Cartesian3 => 1.0,
            Chart::Spherical => self.radius * self.radius * p[1].sin(),
        }
    }
}

/// Operator identifiers, one per arrow of the complexes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorId {
    /// Scalar gradient: f ↦ f,_I.
    GradV,
    /// Vector curl (3D): (curl Y)ᴵ = ε_{IJK} Yᴷ,_J.
    CurlV,
    /// Vector divergence: Yᴶ,_J.
    DivV,
    /// Tensor gradient: (𝐠𝐫𝐚𝐝 Y)ᴵᴶ = Yᴵ,_J.
    GradT,
    /// Row-wise transposed curl (3D): (𝐜𝐮𝐫𝐥ᵀT)ᴵᴶ = ε_{JKL} Tᴵᴸ,_K.
    CurlT,
    /// Tensor divergence: (𝐝𝐢𝐯 T)ᴵ = Tᴵᴶ,_J (tensor20 or symmetric).
    DivT,
    /// Two-point gradient (flat): (𝖦𝗋𝖺𝖽 U)ⁱᴶ = Uⁱ,_J.
    Grad2p,
    /// Two-point transposed curl (3D): ε_{JKL} Fⁱᴸ,_K.
    CurlT2p,
    /// Two-point divergence: Fⁱᴶ,_J.
    Div2p,
    /// 2D tensor rotated divergence: (𝐜T)ᴵ = Tᴵ²,₁ − Tᴵ¹,₂.
    C2d,
    /// 2D tensor rotated gradient: (𝐬Y)ᴵᴶ = δ¹ᴶ Yᴵ,₂ − δ²ᴶ Yᴵ,₁.
    S2d,
    /// 2D two-point rotated divergence: (𝐂F)ⁱ = Fⁱ²,₁ − Fⁱ¹,₂.
    C2d2p,
    /// 2D two-point rotated gradient: (𝐒U)ⁱᴶ = δ¹ᴶ Uⁱ,₂ − δ²ᴶ Uⁱ,₁.
    S2d2p,
    /// Symmetric gradient: ½(Yᴵ,_J + Yᴶ,_I).
    GradS,
    /// Incompatibility (3D): (𝐜𝐮𝐫𝐥∘𝐜𝐮𝐫𝐥 T)ᴵᴶ = ε_{IKL} ε_{JMN} Tᴸᴺ,_{KM}.
    CurlCurl,
    /// 2D Airy-type second-order divergence: T¹¹,₂₂ − 2T¹²,₁₂ + T²²,₁₁.
    Dc,
    /// 2D Airy-type second-order gradient: (f,₂₂, −f,₁₂, f,₁₁).
    Ds,
    /// Surface two-point gradient (spherical chart): Gᴵᴶ Uⁱ,_J.
    SurfGrad,
    /// Surface two-point rotated divergence (spherical chart):
    /// [(G₂_K Fⁱᴷ),₁ − (G₁_K Fⁱᴷ),₂]/√det G.
    SurfC,
    /// Exterior derivative on forms.
    ExtD,
    /// Codifferential on forms (orthonormal chart only).
    Codiff,
}

impl OperatorId {
    /// Stable operator name used by files, reports, and the CLI.
    pub fn name(&self) -> &'static str {
        match self {
            OperatorId::GradV => "grad_v",
            OperatorId::CurlV => "curl_v",
            OperatorId::DivV => "div_v",
            OperatorId::GradT => "grad_t",
            OperatorId::CurlT => "curlT",
            OperatorId::DivT => "div_t",
            OperatorId::Grad2p => "Grad2p",
            OperatorId::CurlT2p => "CurlT2p",
            OperatorId::Div2p => "Div2p",
            OperatorId::C2d => "c2d",
            OperatorId::S2d => "s2d",
            OperatorId::C2d2p => "C2d",
            OperatorId::S2d2p => "S2d",
            OperatorId::GradS => "gradS",
            OperatorId::CurlCurl => "curlcurl",
            OperatorId::Dc => "Dc",
            OperatorId::Ds => "Ds",
            OperatorId::SurfGrad => "surfGrad",
            OperatorId::SurfC => "surfC",
            OperatorId::ExtD => "d_k",
            OperatorId::Codiff => "delta_k",
        }
    }

    /// Inverse of [`OperatorId::name`]; also accepts the bare aliases `d`
    /// and `delta` for the form operators.
    pub fn parse(s: &str) -> Result<OperatorId> {
        let all = [
            OperatorId::GradV,
            OperatorId::CurlV,
            OperatorId::DivV,
            OperatorId::GradT,
            OperatorId::CurlT,
            OperatorId::DivT,
            OperatorId::Grad2p,
            OperatorId::CurlT2p,
            OperatorId::Div2p,
            OperatorId::C2d,
            OperatorId::S2d,
            OperatorId::C2d2p,
            OperatorId::S2d2p,
            OperatorId::GradS,
            OperatorId::CurlCurl,
            OperatorId::Dc,
            OperatorId::Ds,
            OperatorId::SurfGrad,
            OperatorId::SurfC,
            OperatorId::ExtD,
            OperatorId::Codiff,
        ];
        match s {
            "d" => return Ok(OperatorId::ExtD),
            "delta" => return Ok(OperatorId::Codiff),
            _ => {}
        }
        all.iter()
            .find(|op| op.name() == s)
            .copied()
            .ok_or_else(|| Error::UnknownId {
                kind: s.to_string(),
                what: "operator".to_string(),
            })
    }

    /// Derivative order the operator consumes.
    pub fn order(&self) -> usize {
        match self {
            OperatorId::CurlCurl | OperatorId::Dc | OperatorId::Ds => 2,
            _ => 1,
        }
    }

    /// Output valence for a given input valence on an `n`-axis chart, or a
    /// valence-mismatch error. This is the single source of truth for what
    /// each operator accepts.
    pub fn output_valence(&self, input: Valence, n: usize) -> Result<Valence> {
        use OperatorId::*;
        use Valence::*;
        let fail = |expected: &str| {
            Err(Error::ValenceMismatch {
                op: self.name().to_string(),
                expected: expected.to_string(),
                got: input.name(n),
            })
        };
        match (self, input, n) {
            (GradV, Scalar, _) => Ok(Vector),
            (GradV, _, _) => fail("scalar"),
            (CurlV, Vector, 3) => Ok(Vector),
            (CurlV, _, _) => fail("vector on a 3-axis chart"),
            (DivV, Vector, _) => Ok(Scalar),
            (DivV, _, _) => fail("vector"),
            (GradT, Vector, _) => Ok(Tensor20),
            (GradT, _, _) => fail("vector"),
            (CurlT, Tensor20, 3) => Ok(Tensor20),
            (CurlT, _, _) => fail("tensor20 on a 3-axis chart"),
            (DivT, Tensor20, _) | (DivT, Tensor02Sym, _) => Ok(Vector),
            (DivT, _, _) => fail("tensor20 or tensor02sym"),
            (Grad2p, Point(m), _) => Ok(TwoPoint(m)),
            (Grad2p, _, _) => fail("point"),
            (CurlT2p, TwoPoint(m), 3) => Ok(TwoPoint(m)),
            (CurlT2p, _, _) => fail("twopoint on a 3-axis chart"),
            (Div2p, TwoPoint(m), _) => Ok(Point(m)),
            (Div2p, _, _) => fail("twopoint"),
            (C2d, Tensor20, 2) => Ok(Vector),
            (C2d, _, _) => fail("tensor20 on a 2-axis chart"),
            (S2d, Vector, 2) => Ok(Tensor20),
            (S2d, _, _) => fail("vector on a 2-axis chart"),
            (C2d2p, TwoPoint(m), 2) => Ok(Point(m)),
            (C2d2p, _, _) => fail("twopoint on a 2-axis chart"),
            (S2d2p, Point(m), 2) => Ok(TwoPoint(m)),
            (S2d2p, _, _) => fail("point on a 2-axis chart"),
            (GradS, Vector, _) => Ok(Tensor02Sym),
            (GradS, _, _) => fail("vector"),
            (CurlCurl, Tensor02Sym, 3) => Ok(Tensor02Sym),
            (CurlCurl, Tensor20, 3) => Ok(Tensor20),
            (CurlCurl, _, _) => fail("tensor02sym or tensor20 on a 3-axis chart"),
            (Dc, Tensor02Sym, 2) => Ok(Scalar),
            (Dc, _, _) => fail("tensor02sym on a 2-axis chart"),
            (Ds, Scalar, 2) => Ok(Tensor02Sym),
            (Ds, _, _) => fail("scalar on a 2-axis chart"),
            (SurfGrad, Point(m), 2) => Ok(TwoPoint(m)),
            (SurfGrad, _, _) => fail("point on a 2-axis chart"),
            (SurfC, TwoPoint(m), 2) => Ok(Point(m)),
            (SurfC, _, _) => fail("twopoint on a 2-axis chart"),
            (ExtD, Form(k, m), _) if k < n => Ok(Form(k + 1, m)),
            (ExtD, _, _) => fail("form(k,m) with k < n"),
            (Codiff, Form(k, m), _) if k >= 1 => Ok(Form(k - 1, m)),
            (Codiff, _, _) => fail("form(k,m) with k >= 1"),
        }
    }

    /// True for the two operators that live on the spherical chart and
    /// need the metric.
    pub fn is_surface(&self) -> bool {
        matches!(self, OperatorId::SurfGrad | OperatorId::SurfC)
    }
}

/// Central difference of a flat component array along an axis. NaN at
/// nodes missing a neighbor; NaN inputs propagate.
pub(crate) fn d1(grid: &GridSpec, arr: &[f64], axis: usize) -> Vec<f64> {
    let stride: usize = grid.dims[axis + 1..].iter().product();
    let da = grid.dims[axis];
    let inv2h = 1.0 / (2.0 * grid.spacing[axis]);
    let mut out = vec![f64::NAN; arr.len()];
    for (f, slot) in out.iter_mut().enumerate() {
        let ia = (f / stride) % da;
        if ia >= 1 && ia + 1 < da {
            *slot = (arr[f + stride] - arr[f - stride]) * inv2h;
        }
    }
    out
}

/// Composed second derivative: d1 along `a`, then d1 along `b`. For a = b
/// this yields the ±2h/4h² pattern of two chained central stencils.
pub(crate) fn d2(grid: &GridSpec, arr: &[f64], a: usize, b: usize) -> Vec<f64> {
    d1(grid, &d1(grid, arr, a), b)
}

/// Look up a tensor20 component array (1-based indices).
fn t20<'a>(f: &'a TensorField, n: usize, i: usize, j: usize) -> &'a [f64] {
    &f.data[(i - 1) * n + (j - 1)]
}

/// Look up a symmetric component array (1-based indices, either order).
fn t02s<'a>(f: &'a TensorField, n: usize, i: usize, j: usize) -> &'a [f64] {
    &f.data[sym_index(n, i.min(j), i.max(j))]
}

/// Row accessor covering both tensor kinds `div_t` accepts.
fn row_comp<'a>(f: &'a TensorField, n: usize, i: usize, j: usize) -> &'a [f64] {
    match f.valence {
        Valence::Tensor02Sym => t02s(f, n, i, j),
        _ => t20(f, n, i, j),
    }
}

/// Chart admissibility shared by the stencil and symbolic paths: surface
/// operators demand the spherical chart plus a metric, the codifferential
/// and all remaining tensor operators demand a flat chart.
fn chart_gate(op: OperatorId, chart: Chart, metric: Option<&MetricChart>) -> Result<()> {
    if op.is_surface() {
        if chart != Chart::Spherical {
            return Err(Error::ChartMismatch {
                op: op.name().to_string(),
                expected: "spherical".to_string(),
                got: chart.name().to_string(),
            });
        }
        if metric.is_none() {
            return Err(Error::MetricRequired {
                op: op.name().to_string(),
            });
        }
    } else if op == OperatorId::Codiff {
        if !chart.is_cartesian() {
            return Err(Error::CodifferentialChart);
        }
    } else if op != OperatorId::ExtD && !chart.is_cartesian() {
        return Err(Error::ChartMismatch {
            op: op.name().to_string(),
            expected: "cartesian".to_string(),
            got: chart.name().to_string(),
        });
    }
    Ok(())
}

/// Apply an operator to a field. `metric` is consulted only by the surface
/// operators; every other operator requires a flat (Cartesian) chart.
pub fn apply(
    op: OperatorId,
    field: &TensorField,
    metric: Option<&MetricChart>,
) -> Result<TensorField> {
    let n = field.dim();
    chart_gate(op, field.domain.chart, metric)?;

    let out_valence = op.output_valence(field.valence, n)?;
    let grid = &field.domain.grid;
    let erosion = field.erosion + op.order();
    if !field.domain.eroded(erosion).iter().any(|&b| b) {
        return Err(Error::NoInterior);
    }

    let comps: Vec<Vec<f64>> = match op {
        OperatorId::GradV => (0..n).map(|j| d1(grid, &field.data[0], j)).collect(),
        OperatorId::DivV => {
            vec![sum_arrays((0..n).map(|j| d1(grid, &field.data[j], j)))]
        }
        OperatorId::CurlV => {
            // (curl Y)ᴵ = ε_{IJK} Yᴷ,_J with ε₁₂₃ = +1, 0-based cyclic.
            (0..3)
                .map(|i| {
                    let (j, k) = ((i + 1) % 3, (i + 2) % 3);
                    sub_arrays(d1(grid, &field.data[k], j), d1(grid, &field.data[j], k))
                })
                .collect()
        }
        OperatorId::GradT => {
            let mut out = Vec::with_capacity(n * n);
            for i in 0..n {
                for j in 0..n {
                    out.push(d1(grid, &field.data[i], j));
                }
            }
            out
        }
        OperatorId::Grad2p | OperatorId::S2d2p | OperatorId::SurfGrad => {
            let m = field.data.len();
            let mut out = Vec::with_capacity(m * n);
            for i in 0..m {
                match op {
                    OperatorId::Grad2p => {
                        for j in 0..n {
                            out.push(d1(grid, &field.data[i], j));
                        }
                    }
                    OperatorId::S2d2p => {
                        // (𝐒U)ⁱ¹ = Uⁱ,₂ ; (𝐒U)ⁱ² = −Uⁱ,₁
                        out.push(d1(grid, &field.data[i], 1));
                        out.push(neg_array(d1(grid, &field.data[i], 0)));
                    }
                    _ => {
                        // (𝖦𝗋𝖺𝖽U)ⁱᴵ = Gᴵᴶ Uⁱ,_J, diagonal inverse metric.
                        let mc = metric.unwrap();
                        for cap_i in 0..n {
                            let mut arr = d1(grid, &field.data[i], cap_i);
                            scale_by_metric(&mut arr, field, mc, cap_i, MetricUse::Inverse);
                            out.push(arr);
                        }
                    }
                }
            }
            out
        }
        OperatorId::S2d => {
            let mut out = Vec::with_capacity(4);
            for i in 0..2 {
                out.push(d1(grid, &field.data[i], 1));
                out.push(neg_array(d1(grid, &field.data[i], 0)));
            }
            out
        }
        OperatorId::CurlT | OperatorId::CurlT2p => {
            // out(i,J) = ε_{JKL} T(i,L),_K — same row-wise stencil for both
            // tensor kinds, rows indexed by the first leg.
            let rows = field.data.len() / 3;
            let mut out = Vec::with_capacity(field.data.len());
            for i in 0..rows {
                for j in 0..3 {
                    let (k, l) = ((j + 1) % 3, (j + 2) % 3);
                    out.push(sub_arrays(
                        d1(grid, &field.data[i * 3 + l], k),
                        d1(grid, &field.data[i * 3 + k], l),
                    ));
                }
            }
            out
        }
        OperatorId::DivT => (1..=n)
            .map(|i| sum_arrays((1..=n).map(|j| d1(grid, row_comp(field, n, i, j), j - 1))))
            .collect(),
        OperatorId::Div2p => {
            let m = field.data.len() / n;
            (0..m)
                .map(|i| sum_arrays((0..n).map(|j| d1(grid, &field.data[i * n + j], j))))
                .collect()
        }
        OperatorId::C2d | OperatorId::C2d2p => {
            let rows = field.data.len() / 2;
            (0..rows)
                .map(|i| {
                    sub_arrays(
                        d1(grid, &field.data[i * 2 + 1], 0),
                        d1(grid, &field.data[i * 2], 1),
                    )
                })
                .collect()
        }
        OperatorId::GradS => {
            let mut out = Vec::new();
            for i in 1..=n {
                for j in i..=n {
                    let a = d1(grid, &field.data[i - 1], j - 1);
                    let b = d1(grid, &field.data[j - 1], i - 1);
                    out.push(avg_arrays(a, b));
                }
            }
            out
        }
        OperatorId::CurlCurl => {
            // ε_{IKL} ε_{JMN} Tᴸᴺ,_{KM}: four composed-stencil terms per
            // output component. First-layer d1 results are shared.
            let comp = |i: usize, j: usize| -> &[f64] {
                match field.valence {
                    Valence::Tensor02Sym => t02s(field, 3, i + 1, j + 1),
                    _ => t20(field, 3, i + 1, j + 1),
                }
            };
            let mut first: std::collections::HashMap<(usize, usize, usize), Vec<f64>> =
                std::collections::HashMap::new();
            let mut second = |l: usize, nn: usize, k: usize, m: usize| -> Vec<f64> {
                let key = (l, nn, k);
                let base = first
                    .entry(key)
                    .or_insert_with(|| d1(grid, comp(l, nn), k));
                d1(grid, base, m)
            };
            let eps = |i: usize| [( (i + 1) % 3, (i + 2) % 3, 1.0), ((i + 2) % 3, (i + 1) % 3, -1.0)];
            let pairs: Vec<(usize, usize)> = match out_valence {
                Valence::Tensor02Sym => (0..3).flat_map(|i| (i..3).map(move |j| (i, j))).collect(),
                _ => (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).collect(),
            };
            let mut out = Vec::with_capacity(pairs.len());
            for (i, j) in pairs {
                let mut acc: Option<Vec<f64>> = None;
                for (k, l, s1) in eps(i) {
                    for (m, nn, s2) in eps(j) {
                        let term = second(l, nn, k, m);
                        acc = Some(match acc {
                            None => scaled(term, s1 * s2),
                            Some(a) => add_scaled(a, term, s1 * s2),
                        });
                    }
                }
                out.push(acc.unwrap());
            }
            out
        }
        OperatorId::Dc => {
            let a = d2(grid, t02s(field, 2, 1, 1), 1, 1);
            let b = d2(grid, t02s(field, 2, 1, 2), 0, 1);
            let c = d2(grid, t02s(field, 2, 2, 2), 0, 0);
            vec![add_scaled(add_scaled(a, b, -2.0), c, 1.0)]
        }
        OperatorId::Ds => {
            vec![
                d2(grid, &field.data[0], 1, 1),
                neg_array(d2(grid, &field.data[0], 0, 1)),
                d2(grid, &field.data[0], 0, 0),
            ]
        }
        OperatorId::SurfC => {
            // Products with the lower metric are formed pointwise, then
            // differenced, then scaled by 1/√det G.
            let mc = metric.unwrap();
            let m = field.data.len() / 2;
            let nodes = grid.node_count();
            let mut gdiag = vec![[0.0f64; 2]; nodes];
            let mut inv_sqrt = vec![f64::NAN; nodes];
            for node in 0..nodes {
                if field.domain.mask[node] {
                    let p = field.domain.node_position(node);
                    let g = mc.metric_diag(&p);
                    gdiag[node] = [g[0], g[1]];
                    inv_sqrt[node] = 1.0 / mc.sqrt_det(&p);
                }
            }
            let mut out = Vec::with_capacity(m);
            for i in 0..m {
                let mut p1 = field.data[i * 2].clone();
                let mut p2 = field.data[i * 2 + 1].clone();
                for node in 0..nodes {
                    p1[node] *= gdiag[node][0];
                    p2[node] *= gdiag[node][1];
                }
                let mut arr = sub_arrays(d1(grid, &p2, 0), d1(grid, &p1, 1));
                for node in 0..nodes {
                    arr[node] *= inv_sqrt[node];
                }
                out.push(arr);
            }
            out
        }
        OperatorId::ExtD => {
            let Valence::Form(k, m) = field.valence else {
                unreachable!()
            };
            let in_idx = increasing_multi_indices(n, k);
            let out_idx = increasing_multi_indices(n, k + 1);
            let pos = |idx: &[usize]| in_idx.iter().position(|v| v == idx).unwrap();
            let mut out = Vec::with_capacity(m * out_idx.len());
            for i in 0..m {
                for idx in &out_idx {
                    let mut acc: Option<Vec<f64>> = None;
                    for (q, &iq) in idx.iter().enumerate() {
                        let rest: Vec<usize> = idx
                            .iter()
                            .enumerate()
                            .filter(|(r, _)| *r != q)
                            .map(|(_, &v)| v)
                            .collect();
                        let sign = if q % 2 == 0 { 1.0 } else { -1.0 };
                        let term = d1(grid, &field.data[i * in_idx.len() + pos(&rest)], iq - 1);
                        acc = Some(match acc {
                            None => scaled(term, sign),
                            Some(a) => add_scaled(a, term, sign),
                        });
                    }
                    out.push(acc.unwrap());
                }
            }
            out
        }
        OperatorId::Codiff => {
            let Valence::Form(k, m) = field.valence else {
                unreachable!()
            };
            let in_idx = increasing_multi_indices(n, k);
            let out_idx = increasing_multi_indices(n, k - 1);
            let mut out = Vec::with_capacity(m * out_idx.len());
            for i in 0..m {
                for idx in &out_idx {
                    // (δβ)_{I₁…} = −β_{J I₁…},_J, reconstructing the
                    // component with J prepended by antisymmetry.
                    let mut acc: Option<Vec<f64>> = None;
                    for j in 1..=n {
                        let mut full = vec![j];
                        full.extend_from_slice(idx);
                        let Some((slot, sign)) = antisym_lookup(&full, &in_idx) else {
                            continue;
                        };
                        let term = d1(grid, &field.data[i * in_idx.len() + slot], j - 1);
                        acc = Some(match acc {
                            None => scaled(term, -sign),
                            Some(a) => add_scaled(a, term, -sign),
                        });
                    }
                    out.push(acc.unwrap_or_else(|| vec![0.0; grid.node_count()]));
                }
            }
            out
        }
    };

    Ok(TensorField {
        domain: field.domain.clone(),
        valence: out_valence,
        data: comps,
        exprs: None,
        erosion,
    })
}

/// Apply an operator by exact differentiation of the field's attached
/// expressions instead of stencils. Returns `Ok(None)` when the field
/// carries no expressions or the operator has no symbolic kernel (the
/// form-valued operators). The output keeps the input's erosion: exact
/// derivatives lose no boundary ring, so checks on expression-backed
/// fields cover every masked-in node and report residuals at round-off
/// rather than stencil accuracy. Kernels mirror the stencil bodies above
/// index for index; the agreement tests below keep them locked together.
pub fn apply_symbolic(
    op: OperatorId,
    field: &TensorField,
    metric: Option<&MetricChart>,
) -> Result<Option<TensorField>> {
    use crate::expr::{add, div, mul, neg, pow, sub, Expr};

    let Some(exprs) = field.exprs.as_ref() else {
        return Ok(None);
    };
    debug_assert_eq!(exprs.len(), field.data.len());
    let n = field.dim();
    chart_gate(op, field.domain.chart, metric)?;
    let out_valence = op.output_valence(field.valence, n)?;

    let d = |c: usize, k: usize| exprs[c].derivative(k);
    let dd = |c: usize, k: usize, m: usize| exprs[c].derivative(k).derivative(m);
    // Component slot of a two-index field, 1-based, honoring symmetric
    // storage — the expression list is parallel to `data`.
    let slot2 = |i: usize, j: usize| -> usize {
        match field.valence {
            Valence::Tensor02Sym => sym_index(n, i.min(j), i.max(j)),
            _ => (i - 1) * n + (j - 1),
        }
    };
    // Diagonal metric entries and area factor of the spherical chart as
    // expressions in x2 (the polar angle).
    let spherical_metric = || {
        let r2 = metric.map_or(1.0, |m| m.radius * m.radius);
        let s = Expr::Sin(Box::new(Expr::Var(1)));
        (
            mul(Expr::Const(r2), pow(s.clone(), 2)),
            Expr::Const(r2),
            mul(Expr::Const(r2), s),
        )
    };

    let out_exprs: Vec<Expr> = match op {
        OperatorId::GradV => (0..n).map(|j| d(0, j)).collect(),
        OperatorId::DivV => vec![(0..n).map(|j| d(j, j)).fold(Expr::Const(0.0), add)],
        OperatorId::CurlV => (0..3)
            .map(|i| {
                let (j, k) = ((i + 1) % 3, (i + 2) % 3);
                sub(d(k, j), d(j, k))
            })
            .collect(),
        OperatorId::GradT | OperatorId::Grad2p => {
            let m = field.data.len();
            let mut out = Vec::with_capacity(m * n);
            for i in 0..m {
                for j in 0..n {
                    out.push(d(i, j));
                }
            }
            out
        }
        OperatorId::S2d | OperatorId::S2d2p => {
            let m = field.data.len();
            let mut out = Vec::with_capacity(m * 2);
            for i in 0..m {
                out.push(d(i, 1));
                out.push(neg(d(i, 0)));
            }
            out
        }
        OperatorId::SurfGrad => {
            let (g11, g22, _) = spherical_metric();
            let m = field.data.len();
            let mut out = Vec::with_capacity(m * 2);
            for i in 0..m {
                out.push(div(d(i, 0), g11.clone()));
                out.push(div(d(i, 1), g22.clone()));
            }
            out
        }
        OperatorId::CurlT | OperatorId::CurlT2p => {
            let rows = field.data.len() / 3;
            let mut out = Vec::with_capacity(field.data.len());
            for i in 0..rows {
                for j in 0..3 {
                    let (k, l) = ((j + 1) % 3, (j + 2) % 3);
                    out.push(sub(d(i * 3 + l, k), d(i * 3 + k, l)));
                }
            }
            out
        }
        OperatorId::DivT => (1..=n)
            .map(|i| {
                (1..=n)
                    .map(|j| d(slot2(i, j), j - 1))
                    .fold(Expr::Const(0.0), add)
            })
            .collect(),
        OperatorId::Div2p => {
            let m = field.data.len() / n;
            (0..m)
                .map(|i| {
                    (0..n)
                        .map(|j| d(i * n + j, j))
                        .fold(Expr::Const(0.0), add)
                })
                .collect()
        }
        OperatorId::C2d | OperatorId::C2d2p => {
            let rows = field.data.len() / 2;
            (0..rows)
                .map(|i| sub(d(i * 2 + 1, 0), d(i * 2, 1)))
                .collect()
        }
        OperatorId::GradS => {
            let mut out = Vec::new();
            for i in 1..=n {
                for j in i..=n {
                    out.push(mul(
                        Expr::Const(0.5),
                        add(d(i - 1, j - 1), d(j - 1, i - 1)),
                    ));
                }
            }
            out
        }
        OperatorId::CurlCurl => {
            let eps =
                |i: usize| [((i + 1) % 3, (i + 2) % 3, 1.0), ((i + 2) % 3, (i + 1) % 3, -1.0)];
            let pairs: Vec<(usize, usize)> = match out_valence {
                Valence::Tensor02Sym => {
                    (0..3).flat_map(|i| (i..3).map(move |j| (i, j))).collect()
                }
                _ => (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).collect(),
            };
            let mut out = Vec::with_capacity(pairs.len());
            for (i, j) in pairs {
                let mut acc = Expr::Const(0.0);
                for (k, l, s1) in eps(i) {
                    for (m, nn, s2) in eps(j) {
                        let term = dd(slot2(l + 1, nn + 1), k, m);
                        acc = if s1 * s2 > 0.0 {
                            add(acc, term)
                        } else {
                            sub(acc, term)
                        };
                    }
                }
                out.push(acc);
            }
            out
        }
        OperatorId::Dc => {
            let a = dd(sym_index(2, 1, 1), 1, 1);
            let b = dd(sym_index(2, 1, 2), 0, 1);
            let c = dd(sym_index(2, 2, 2), 0, 0);
            vec![add(sub(a, mul(Expr::Const(2.0), b)), c)]
        }
        OperatorId::Ds => vec![dd(0, 1, 1), neg(dd(0, 0, 1)), dd(0, 0, 0)],
        OperatorId::SurfC => {
            let (g11, g22, sq) = spherical_metric();
            let m = field.data.len() / 2;
            let mut out = Vec::with_capacity(m);
            for i in 0..m {
                let p1 = mul(g11.clone(), exprs[i * 2].clone());
                let p2 = mul(g22.clone(), exprs[i * 2 + 1].clone());
                out.push(div(
                    sub(p2.derivative(0), p1.derivative(1)),
                    sq.clone(),
                ));
            }
            out
        }
        OperatorId::ExtD | OperatorId::Codiff => return Ok(None),
    };

    let nodes = field.domain.grid.node_count();
    let mut data = Vec::with_capacity(out_exprs.len());
    for e in &out_exprs {
        let mut arr = vec![f64::NAN; nodes];
        for (node, v) in arr.iter_mut().enumerate() {
            if field.domain.mask[node] {
                *v = e.eval(&field.domain.node_position(node));
            }
        }
        data.push(arr);
    }
    Ok(Some(TensorField {
        domain: field.domain.clone(),
        valence: out_valence,
        data,
        exprs: Some(out_exprs),
        erosion: field.erosion,
    }))
}

/// Sort a general multi-index into increasing order, returning the slot in
/// `table` and the permutation sign; None when an index repeats.
fn antisym_lookup(idx: &[usize], table: &[Vec<usize>]) -> Option<(usize, f64)> {
    let mut v: Vec<usize> = idx.to_vec();
    let mut sign = 1.0;
    // Insertion sort, counting swaps.
    for i in 1..v.len() {
        let mut j = i;
        while j > 0 && v[j - 1] > v[j] {
            v.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    if v.windows(2).any(|w| w[0] == w[1]) {
        return None;
    }
    table.iter().position(|t| *t == v).map(|slot| (slot, sign))
}

enum MetricUse {
    Inverse,
}

/// Multiply a component array in place by a diagonal metric entry at each
/// node (inverse metric for the raised-index surface gradient).
fn scale_by_metric(
    arr: &mut [f64],
    field: &TensorField,
    mc: &MetricChart,
    axis: usize,
    _use: MetricUse,
) {
    for (node, slot) in arr.iter_mut().enumerate() {
        if field.domain.mask[node] {
            let p = field.domain.node_position(node);
            let g = mc.metric_diag(&p);
            *slot /= g[axis];
        }
    }
}

fn sum_arrays(mut parts: impl Iterator<Item = Vec<f64>>) -> Vec<f64> {
    let mut acc = parts.next().expect("at least one term");
    for p in parts {
        for (a, b) in acc.iter_mut().zip(&p) {
            *a += b;
        }
    }
    acc
}

fn sub_arrays(mut a: Vec<f64>, b: Vec<f64>) -> Vec<f64> {
    for (x, y) in a.iter_mut().zip(&b) {
        *x -= y;
    }
    a
}

fn avg_arrays(mut a: Vec<f64>, b: Vec<f64>) -> Vec<f64> {
    for (x, y) in a.iter_mut().zip(&b) {
        *x = 0.5 * (*x + y);
    }
    a
}

fn neg_array(mut a: Vec<f64>) -> Vec<f64> {
    for x in a.iter_mut() {
        *x = -*x;
    }
    a
}

fn scaled(mut a: Vec<f64>, s: f64) -> Vec<f64> {
    for x in a.iter_mut() {
        *x *= s;
    }
    a
}

fn add_scaled(mut a: Vec<f64>, b: Vec<f64>, s: f64) -> Vec<f64> {
    for (x, y) in a.iter_mut().zip(&b) {
        *x += s * y;
    }
    a
}

/// ‖second(first(probe))‖_∞ over the common interior: the discrete
/// exact-sequence residual for one adjacent operator pair.
pub fn composition_residual(
    first: OperatorId,
    second: OperatorId,
    probe: &TensorField,
    metric: Option<&MetricChart>,
) -> Result<f64> {
    let n = probe.dim();
    let mid_valence = first.output_valence(probe.valence, n)?;
    if let Err(e) = second.output_valence(mid_valence, n) {
        return Err(Error::NonChainingPair {
            first: first.name().to_string(),
            second: second.name().to_string(),
            why: e.to_string(),
        });
    }
    let mid = apply(first, probe, metric)?;
    let out = apply(second, &mid, metric)?;
    Ok(out.linf())
}

/// One operator chain of a named complex: the valence fed to its head
/// plus the operators applied in order.
#[derive(Debug, Clone)]
pub struct ComplexChain {
    pub start: Valence,
    pub ops: Vec<OperatorId>,
}

/// A named operator complex on its natural flat chart. Every two
/// successive operators in each chain annihilate smooth data up to
/// round-off; [`composition_residual`] measures exactly that.
///
/// Most complexes are a single chain. The planar elasticity complex
/// carries both of its classical presentations — the strain side
/// (symmetric gradient, then the scalar incompatibility operator) and
/// the stress-function side (the Airy second-gradient, then the row
/// divergence) — as two chains under one id.
#[derive(Debug, Clone)]
pub struct OperatorComplex {
    pub id: &'static str,
    pub chart: Chart,
    pub chains: Vec<ComplexChain>,
}

/// The ten named complexes the toolkit ships.
pub fn complexes() -> Vec<OperatorComplex> {
    use OperatorId::*;
    let chain = |start: Valence, ops: &[OperatorId]| ComplexChain {
        start,
        ops: ops.to_vec(),
    };
    vec![
        OperatorComplex {
            id: "gcd",
            chart: Chart::Cartesian3,
            chains: vec![chain(Valence::Vector, &[GradT, CurlT, DivT])],
        },
        OperatorComplex {
            id: "GCD",
            chart: Chart::Cartesian3,
            chains: vec![chain(Valence::Point(3), &[Grad2p, CurlT2p, Div2p])],
        },
        OperatorComplex {
            id: "gc",
            chart: Chart::Cartesian2,
            chains: vec![chain(Valence::Vector, &[GradT, C2d])],
        },
        OperatorComplex {
            id: "sd",
            chart: Chart::Cartesian2,
            chains: vec![chain(Valence::Vector, &[S2d, DivT])],
        },
        OperatorComplex {
            id: "GC",
            chart: Chart::Cartesian2,
            chains: vec![chain(Valence::Point(2), &[Grad2p, C2d2p])],
        },
        OperatorComplex {
            id: "SD",
            chart: Chart::Cartesian2,
            chains: vec![chain(Valence::Point(2), &[S2d2p, Div2p])],
        },
        OperatorComplex {
            id: "elasticity3d",
            chart: Chart::Cartesian3,
            chains: vec![chain(Valence::Vector, &[GradS, CurlCurl, DivT])],
        },
        OperatorComplex {
            id: "elasticity2d",
            chart: Chart::Cartesian2,
            chains: vec![
                chain(Valence::Vector, &[GradS, Dc]),
                chain(Valence::Scalar, &[Ds, DivT]),
            ],
        },
        OperatorComplex {
            id: "derham",
            chart: Chart::Cartesian3,
            chains: vec![chain(Valence::Form(0, 1), &[ExtD, ExtD, ExtD])],
        },
        OperatorComplex {
            id: "codifferential",
            chart: Chart::Cartesian3,
            chains: vec![chain(Valence::Form(3, 1), &[Codiff, Codiff, Codiff])],
        },
    ]
}

/// Look a named complex up by its id token.
pub fn complex_by_id(id: &str) -> Result<OperatorComplex> {
    complexes()
        .into_iter()
        .find(|c| c.id == id)
        .ok_or_else(|| Error::UnknownId {
            kind: "complex".into(),
            what: id.into(),
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::fields::DomainRef;
    use crate::mesh::{build_domain, Chart, GridSpec, MaskRule};
    use std::sync::Arc;

    fn square(n: usize) -> DomainRef {
        Arc::new(
            build_domain(
                GridSpec::cube(2, n, -2.0, 2.0).unwrap(),
                MaskRule::Full,
                Chart::Cartesian2,
            )
            .unwrap(),
        )
    }

    fn cube(n: usize) -> DomainRef {
        Arc::new(
            build_domain(
                GridSpec::cube(3, n, -2.0, 2.0).unwrap(),
                MaskRule::Full,
                Chart::Cartesian3,
            )
            .unwrap(),
        )
    }

    fn sphere_patch(n: usize) -> DomainRef {
        let lo = 0.4;
        let hi = std::f64::consts::PI - 0.4;
        let h = (hi - lo) / (n as f64 - 1.0);
        Arc::new(
            build_domain(
                GridSpec::new(vec![n, n], vec![0.2, lo], vec![h, h]).unwrap(),
                MaskRule::Full,
                Chart::Spherical,
            )
            .unwrap(),
        )
    }

    fn sample(d: &DomainRef, v: Valence, comps: &[(&str, &str)]) -> TensorField {
        let pairs: Vec<(String, Expr)> = comps
            .iter()
            .map(|(n, e)| (n.to_string(), Expr::parse(e).unwrap()))
            .collect();
        TensorField::sample(d.clone(), v, &pairs).unwrap()
    }

    /// A fixed degree-3 polynomial vector probe (3D).
    fn poly_vector3(d: &DomainRef) -> TensorField {
        sample(
            d,
            Valence::Vector,
            &[
                ("1", "x1^2*x2 - x3^3 + 2*x2*x3"),
                ("2", "x1*x2*x3 + x2^2 - x1"),
                ("3", "x3^2*x1 - x2^3 + x1^2"),
            ],
        )
    }

    #[test]
    fn grad_of_constant_vanishes() {
        let d = square(16);
        let y = sample(&d, Valence::Vector, &[("1", "3"), ("2", "-1")]);
        let g = apply(OperatorId::GradT, &y, None).unwrap();
        assert_eq!(g.valence, Valence::Tensor20);
        assert_eq!(g.erosion, 1);
        assert_eq!(g.linf(), 0.0);
    }

    #[test]
    fn curl_t_of_grad_t_vanishes_to_round_off() {
        let d = cube(12);
        let y = poly_vector3(&d);
        let r = composition_residual(OperatorId::GradT, OperatorId::CurlT, &y, None).unwrap();
        assert!(r <= 1e-12, "residual {r}");
    }

    #[test]
    fn airy_pair_annihilates_symmetric_gradients() {
        // D_c(𝐠𝐫𝐚𝐝ˢ Y) = 0 for Y = (X¹(X²)², (X¹)³).
        let d = square(16);
        let y = sample(&d, Valence::Vector, &[("1", "x1*x2^2"), ("2", "x1^3")]);
        let r = composition_residual(OperatorId::GradS, OperatorId::Dc, &y, None).unwrap();
        assert!(r <= 1e-10, "residual {r}");
    }

    #[test]
    fn div_t_of_outer_product_is_four_x() {
        // Tᴵᴶ = XᴵXᴶ in 3D: (𝐝𝐢𝐯 T)ᴵ = Σ_J ∂_J(XᴵXᴶ) = Xᴵ + 3Xᴵ = 4Xᴵ,
        // exact for central differences on quadratics.
        let d = cube(10);
        let mut comps = vec![];
        let names = ["1", "2", "3"];
        for i in 0..3 {
            for j in 0..3 {
                comps.push((
                    format!("{}{}", i + 1, j + 1),
                    Expr::parse(&format!("x{}*x{}", i + 1, j + 1)).unwrap(),
                ));
            }
        }
        let t = TensorField::sample(d.clone(), Valence::Tensor20, &comps).unwrap();
        let div = apply(OperatorId::DivT, &t, None).unwrap();
        let support = div.support();
        for node in 0..d.grid.node_count() {
            if support[node] {
                let p = d.node_position(node);
                for i in 0..3 {
                    assert!(
                        (div.value(i, node) - 4.0 * p[i]).abs() < 1e-12,
                        "node {node} comp {i}: {} vs {}",
                        div.value(i, node),
                        4.0 * p[i]
                    );
                }
            }
        }
        let _ = names;
    }

    #[test]
    fn elasticity_3d_compositions_vanish() {
        let d = cube(12);
        let y = poly_vector3(&d);
        let r1 = composition_residual(OperatorId::GradS, OperatorId::CurlCurl, &y, None).unwrap();
        assert!(r1 <= 1e-10, "gradS→curlcurl residual {r1}");
        let e = apply(OperatorId::GradS, &y, None).unwrap();
        let r2 = composition_residual(OperatorId::CurlCurl, OperatorId::DivT, &e, None).unwrap();
        assert!(r2 <= 1e-10, "curlcurl→div residual {r2}");
    }

    #[test]
    fn planar_pairs_vanish() {
        let d = square(16);
        let y = sample(
            &d,
            Valence::Vector,
            &[("1", "x1^3 - 2*x1*x2^2"), ("2", "x2^3 + x1^2*x2")],
        );
        // gc pair: 𝐠𝐫𝐚𝐝 then 𝐜.
        let r1 = composition_residual(OperatorId::GradT, OperatorId::C2d, &y, None).unwrap();
        assert!(r1 <= 1e-12, "grad→c residual {r1}");
        // sd pair: 𝐬 then 𝐝𝐢𝐯.
        let r2 = composition_residual(OperatorId::S2d, OperatorId::DivT, &y, None).unwrap();
        assert!(r2 <= 1e-12, "s→div residual {r2}");
        // Airy gradient then divergence.
        let f = sample(&d, Valence::Scalar, &[("0", "x1^3*x2 + x2^3 - x1^2*x2^2")]);
        let r3 = composition_residual(OperatorId::Ds, OperatorId::DivT, &f, None).unwrap();
        assert!(r3 <= 1e-10, "Ds→div residual {r3}");
    }

    #[test]
    fn named_complexes_compose_to_zero_on_polynomial_probes() {
        let all = complexes();
        assert_eq!(all.len(), 10);
        for complex in &all {
            let d = if complex.chart.dim() == 3 {
                cube(17)
            } else {
                square(17)
            };
            for (ci, chain) in complex.chains.iter().enumerate() {
                // Each adjacent pair gets an independent generic probe of
                // the valence that position of the chain accepts.
                let mut v = chain.start;
                for (k, pair) in chain.ops.windows(2).enumerate() {
                    let p = crate::probe::polynomial_probe(&d, v, 7 + 13 * ci as u64 + k as u64);
                    let r = composition_residual(pair[0], pair[1], &p, None).unwrap();
                    assert!(
                        r <= 1e-10,
                        "{}: pair {} → {} residual {r}",
                        complex.id,
                        pair[0].name(),
                        pair[1].name()
                    );
                    v = pair[0].output_valence(v, d.dim()).unwrap();
                }
            }
        }
        assert!(complex_by_id("gcd").is_ok());
        assert!(matches!(
            complex_by_id("nosuch"),
            Err(Error::UnknownId { .. })
        ));
    }

    #[test]
    fn classical_vector_pairs_vanish() {
        let d = cube(12);
        let f = sample(&d, Valence::Scalar, &[("0", "x1^2*x2 - x3^3 + x1*x2*x3")]);
        let r1 = composition_residual(OperatorId::GradV, OperatorId::CurlV, &f, None).unwrap();
        assert!(r1 <= 1e-12, "grad→curl residual {r1}");
        let y = poly_vector3(&d);
        let r2 = composition_residual(OperatorId::CurlV, OperatorId::DivV, &y, None).unwrap();
        assert!(r2 <= 1e-12, "curl→div residual {r2}");
    }

    #[test]
    fn two_point_pairs_vanish() {
        let d = cube(12);
        let u = sample(
            &d,
            Valence::Point(3),
            &[
                ("1", "x1^2*x3 - x2^3"),
                ("2", "x1*x2 + x3^2"),
                ("3", "x2*x3*x1"),
            ],
        );
        let r1 = composition_residual(OperatorId::Grad2p, OperatorId::CurlT2p, &u, None).unwrap();
        assert!(r1 <= 1e-12, "Grad→CurlT residual {r1}");
        let f = apply(OperatorId::Grad2p, &u, None).unwrap();
        let r2 = composition_residual(OperatorId::CurlT2p, OperatorId::Div2p, &f, None).unwrap();
        assert!(r2 <= 1e-12, "CurlT→Div residual {r2}");

        let d2 = square(16);
        let u2 = sample(
            &d2,
            Valence::Point(3),
            &[("1", "x1^2*x2"), ("2", "x2^3 - x1"), ("3", "x1*x2")],
        );
        let r3 = composition_residual(OperatorId::Grad2p, OperatorId::C2d2p, &u2, None).unwrap();
        assert!(r3 <= 1e-12, "2D Grad→C residual {r3}");
        let r4 = composition_residual(OperatorId::S2d2p, OperatorId::Div2p, &u2, None).unwrap();
        assert!(r4 <= 1e-12, "2D S→Div residual {r4}");
    }

    #[test]
    fn exterior_derivative_matches_hand_case_and_nilpotency() {
        let d = square(16);
        let f = sample(&d, Valence::Form(0, 1), &[("1|", "x1*x2")]);
        let df = apply(OperatorId::ExtD, &f, None).unwrap();
        assert_eq!(df.valence, Valence::Form(1, 1));
        let support = df.support();
        for node in 0..d.grid.node_count() {
            if support[node] {
                let p = d.node_position(node);
                assert!((df.value(0, node) - p[1]).abs() < 1e-12);
                assert!((df.value(1, node) - p[0]).abs() < 1e-12);
            }
        }
        let ddf = apply(OperatorId::ExtD, &df, None).unwrap();
        assert!(ddf.linf() <= 1e-12);

        // 3D, vector-valued, with a degree-3 component.
        let d3 = cube(12);
        let a = sample(
            &d3,
            Valence::Form(1, 3),
            &[
                ("1|1", "x1^2*x2"),
                ("1|3", "x2*x3^2"),
                ("2|2", "x3^3 - x1*x2"),
                ("3|1", "x1*x2*x3"),
            ],
        );
        let da = apply(OperatorId::ExtD, &a, None).unwrap();
        let dda = apply(OperatorId::ExtD, &da, None).unwrap();
        assert!(dda.linf() <= 1e-12, "d∘d = {}", dda.linf());
        // Top form: no further d.
        assert!(apply(OperatorId::ExtD, &dda, None).is_err());
    }

    #[test]
    fn codifferential_matches_hand_case_and_nilpotency() {
        let d = square(16);
        let one = sample(
            &d,
            Valence::Form(1, 1),
            &[("1|1", "x1"), ("1|2", "x2")],
        );
        let delta = apply(OperatorId::Codiff, &one, None).unwrap();
        assert_eq!(delta.valence, Valence::Form(0, 1));
        let support = delta.support();
        for node in 0..d.grid.node_count() {
            if support[node] {
                assert!((delta.value(0, node) + 2.0).abs() < 1e-12);
            }
        }

        let d3 = cube(12);
        let two = sample(
            &d3,
            Valence::Form(2, 1),
            &[
                ("1|12", "x1^2*x3 - x2^2"),
                ("1|13", "x2^3 + x1*x3"),
                ("1|23", "x1*x2*x3"),
            ],
        );
        let dd = apply(OperatorId::Codiff, &two, None).unwrap();
        let ddd = apply(OperatorId::Codiff, &dd, None).unwrap();
        assert!(ddd.linf() <= 1e-12, "δ∘δ = {}", ddd.linf());
        // Constant 1-form: δ gives zero.
        let c = sample(&d, Valence::Form(1, 1), &[("1|1", "4"), ("1|2", "-7")]);
        assert_eq!(apply(OperatorId::Codiff, &c, None).unwrap().linf(), 0.0);
        // k = 0 rejected.
        let f0 = sample(&d, Valence::Form(0, 1), &[("1|", "x1")]);
        assert!(apply(OperatorId::Codiff, &f0, None).is_err());
    }

    #[test]
    fn codifferential_requires_cartesian_chart() {
        let d = sphere_patch(12);
        let one = sample(&d, Valence::Form(1, 1), &[("1|1", "x1"), ("1|2", "x2")]);
        assert!(matches!(
            apply(OperatorId::Codiff, &one, None),
            Err(Error::CodifferentialChart)
        ));
    }

    #[test]
    fn surface_operators_demand_chart_and_metric() {
        let d = sphere_patch(12);
        let u = sample(
            &d,
            Valence::Point(3),
            &[
                ("1", "sin(x2)*cos(x1)"),
                ("2", "sin(x2)*sin(x1)"),
                ("3", "cos(x2)"),
            ],
        );
        assert!(matches!(
            apply(OperatorId::SurfGrad, &u, None),
            Err(Error::MetricRequired { .. })
        ));
        let flat = sample(&square(8), Valence::Point(3), &[("1", "x1")]);
        let mc = MetricChart::spherical(2.0);
        assert!(matches!(
            apply(OperatorId::SurfGrad, &flat, Some(&mc)),
            Err(Error::ChartMismatch { .. })
        ));
        // Tensor ops refuse the spherical chart.
        let y = sample(&d, Valence::Vector, &[("1", "x1"), ("2", "x2")]);
        assert!(matches!(
            apply(OperatorId::GradT, &y, None),
            Err(Error::ChartMismatch { .. })
        ));
    }

    #[test]
    fn surface_pair_vanishes_on_trig_fields() {
        let d = sphere_patch(24);
        let mc = MetricChart::spherical(1.7);
        let u = sample(
            &d,
            Valence::Point(3),
            &[
                ("1", "sin(x2)*cos(x1)"),
                ("2", "sin(x2)*sin(x1) + cos(x2)"),
                ("3", "cos(x2)*cos(x1)"),
            ],
        );
        let r =
            composition_residual(OperatorId::SurfGrad, OperatorId::SurfC, &u, Some(&mc)).unwrap();
        assert!(r <= 1e-10, "surface GC residual {r}");
    }

    #[test]
    fn curlcurl_preserves_symmetric_storage_and_erosion() {
        let d = cube(12);
        let y = poly_vector3(&d);
        let e = apply(OperatorId::GradS, &y, None).unwrap();
        assert_eq!(e.valence, Valence::Tensor02Sym);
        let q = apply(OperatorId::CurlCurl, &e, None).unwrap();
        assert_eq!(q.valence, Valence::Tensor02Sym);
        assert_eq!(q.erosion, 3);
        // Component (1,1) differentiates along axes 1 and 2 only, so the
        // NaN fringe shows up near the axis-1 boundary.
        let edge = d.grid.flat(&[6, 1, 6]);
        assert!(q.data[0][edge].is_nan());
        let mid = d.grid.flat(&[6, 6, 6]);
        assert!(q.data[0][mid].is_finite());
    }

    #[test]
    fn trig_fields_converge_at_second_order() {
        // Error against the closed-form derivative drops 4× ± 20% per
        // halving of h.
        let mut errs = vec![];
        for n in [17usize, 33, 65] {
            let d = square(n);
            let f = sample(&d, Valence::Scalar, &[("0", "sin(x1)*cos(x2)")]);
            let g = apply(OperatorId::GradV, &f, None).unwrap();
            let support = g.support();
            let mut worst = 0.0f64;
            for node in 0..d.grid.node_count() {
                if support[node] {
                    let p = d.node_position(node);
                    let exact = [p[0].cos() * p[1].cos(), -p[0].sin() * p[1].sin()];
                    for c in 0..2 {
                        worst = worst.max((g.value(c, node) - exact[c]).abs());
                    }
                }
            }
            errs.push(worst);
        }
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!(
                (3.2..=4.8).contains(&ratio),
                "convergence ratio {ratio}, errors {errs:?}"
            );
        }
    }

    #[test]
    fn non_chaining_pair_is_rejected() {
        let d = cube(10);
        let y = poly_vector3(&d);
        assert!(matches!(
            composition_residual(OperatorId::GradT, OperatorId::GradT, &y, None),
            Err(Error::NonChainingPair { .. })
        ));
    }

    #[test]
    fn operator_names_round_trip() {
        for op in [
            OperatorId::GradV,
            OperatorId::CurlV,
            OperatorId::DivV,
            OperatorId::GradT,
            OperatorId::CurlT,
            OperatorId::DivT,
            OperatorId::Grad2p,
            OperatorId::CurlT2p,
            OperatorId::Div2p,
            OperatorId::C2d,
            OperatorId::S2d,
            OperatorId::C2d2p,
            OperatorId::S2d2p,
            OperatorId::GradS,
            OperatorId::CurlCurl,
            OperatorId::Dc,
            OperatorId::Ds,
            OperatorId::SurfGrad,
            OperatorId::SurfC,
            OperatorId::ExtD,
            OperatorId::Codiff,
        ] {
            assert_eq!(OperatorId::parse(op.name()).unwrap(), op);
        }
        assert_eq!(OperatorId::parse("d").unwrap(), OperatorId::ExtD);
        assert_eq!(OperatorId::parse("delta").unwrap(), OperatorId::Codiff);
        assert!(OperatorId::parse("nabla").is_err());
    }

    /// A field of generic quadratics with expressions attached, distinct
    /// on every component.
    fn quad_field(d: &DomainRef, v: Valence, salt: usize) -> TensorField {
        let n = d.dim();
        let monos: &[&str] = if n == 2 {
            &["1", "x1", "x2", "x1^2", "x1*x2", "x2^2"]
        } else {
            &[
                "1", "x1", "x2", "x3", "x1^2", "x1*x2", "x1*x3", "x2^2", "x2*x3", "x3^2",
            ]
        };
        let comps: Vec<(String, Expr)> = v
            .component_names(n)
            .iter()
            .enumerate()
            .map(|(c, name)| {
                let terms: Vec<String> = monos
                    .iter()
                    .enumerate()
                    .map(|(t, m)| {
                        let k = ((c * 7 + t * 3 + salt) % 11) as f64 / 7.0 - 0.6;
                        format!("{k}*{m}")
                    })
                    .collect();
                (name.clone(), Expr::parse(&terms.join(" + ")).unwrap())
            })
            .collect();
        TensorField::sample(d.clone(), v, &comps).unwrap()
    }

    /// First- and second-order central stencils are exact on quadratics,
    /// so the symbolic and stencil kernels must agree to round-off for
    /// every flat-chart operator — the lock that keeps the two paths from
    /// drifting apart.
    #[test]
    fn symbolic_kernels_match_stencils_on_quadratics() {
        use OperatorId::*;
        let cases: Vec<(OperatorId, Valence, usize)> = vec![
            (GradV, Valence::Scalar, 3),
            (DivV, Valence::Vector, 3),
            (CurlV, Valence::Vector, 3),
            (GradT, Valence::Vector, 3),
            (CurlT, Valence::Tensor20, 3),
            (DivT, Valence::Tensor20, 3),
            (DivT, Valence::Tensor02Sym, 3),
            (Grad2p, Valence::Point(3), 3),
            (CurlT2p, Valence::TwoPoint(3), 3),
            (Div2p, Valence::TwoPoint(3), 3),
            (GradS, Valence::Vector, 3),
            (CurlCurl, Valence::Tensor02Sym, 3),
            (CurlCurl, Valence::Tensor20, 3),
            (GradT, Valence::Vector, 2),
            (C2d, Valence::Tensor20, 2),
            (S2d, Valence::Vector, 2),
            (DivT, Valence::Tensor02Sym, 2),
            (Grad2p, Valence::Point(2), 2),
            (C2d2p, Valence::TwoPoint(2), 2),
            (S2d2p, Valence::Point(2), 2),
            (Div2p, Valence::TwoPoint(2), 2),
            (GradS, Valence::Vector, 2),
            (Dc, Valence::Tensor02Sym, 2),
            (Ds, Valence::Scalar, 2),
        ];
        for (i, (op, v, dim)) in cases.into_iter().enumerate() {
            let d = if dim == 3 { cube(9) } else { square(9) };
            let f = quad_field(&d, v, i);
            let sten = apply(op, &f, None).unwrap();
            let symb = apply_symbolic(op, &f, None).unwrap().unwrap();
            assert_eq!(symb.valence, sten.valence);
            assert_eq!(symb.erosion, f.erosion, "{}: erosion must not grow", op.name());
            let diff = symb.sub(&sten).unwrap();
            assert!(
                diff.linf() <= 1e-10,
                "{} on {}d: symbolic vs stencil {}",
                op.name(),
                dim,
                diff.linf()
            );
        }
    }

    /// Hand-differentiated spot check of the symbolic surface curl:
    /// F¹₁ = x2 alone gives (𝖢F)¹ = −(sin x2 + 2·x2·cos x2), independent
    /// of the radius.
    #[test]
    fn symbolic_surface_curl_matches_hand_differentiation() {
        let d = sphere_patch(9);
        let mc = MetricChart::spherical(1.7);
        let f = TensorField::sample(
            d.clone(),
            Valence::TwoPoint(3),
            &[("11".to_string(), Expr::parse("x2").unwrap())],
        )
        .unwrap();
        let symb = apply_symbolic(OperatorId::SurfC, &f, Some(&mc))
            .unwrap()
            .unwrap();
        for node in 0..d.grid.node_count() {
            if !d.mask[node] {
                continue;
            }
            let p = d.node_position(node);
            let expected = -(p[1].sin() + 2.0 * p[1] * p[1].cos());
            assert!((symb.data[0][node] - expected).abs() < 1e-12);
            assert!(symb.data[1][node].abs() < 1e-12);
            assert!(symb.data[2][node].abs() < 1e-12);
        }
    }

    /// The symbolic surface kernels inherit the analytic identity
    /// 𝖢 ∘ 𝖦𝗋𝖺𝖽 = 0, quotient-rule trees and all.
    #[test]
    fn symbolic_surface_kernels_compose_to_zero() {
        let d = sphere_patch(9);
        let mc = MetricChart::spherical(1.3);
        let u = TensorField::sample(
            d.clone(),
            Valence::Point(3),
            &[
                ("1".to_string(), Expr::parse("sin(x1)*cos(x2)").unwrap()),
                ("2".to_string(), Expr::parse("x1*x2 + 0.3*x2^2").unwrap()),
                ("3".to_string(), Expr::parse("cos(x1 + 2*x2)").unwrap()),
            ],
        )
        .unwrap();
        let f = apply_symbolic(OperatorId::SurfGrad, &u, Some(&mc))
            .unwrap()
            .unwrap();
        let c = apply_symbolic(OperatorId::SurfC, &f, Some(&mc))
            .unwrap()
            .unwrap();
        assert!(c.linf() < 1e-10, "composition {}", c.linf());
    }

    /// Fields without expressions and operators without symbolic kernels
    /// both decline quietly.
    #[test]
    fn symbolic_path_declines_when_inapplicable() {
        let d = square(7);
        let plain = crate::probe::polynomial_probe(&d, Valence::Vector, 3);
        assert!(apply_symbolic(OperatorId::GradT, &plain, None)
            .unwrap()
            .is_none());
        let form = TensorField::sample(
            d,
            Valence::Form(1, 1),
            &[("1|1".to_string(), Expr::parse("x1*x2").unwrap())],
        )
        .unwrap();
        assert!(apply_symbolic(OperatorId::ExtD, &form, None)
            .unwrap()
            .is_none());
    }
}
