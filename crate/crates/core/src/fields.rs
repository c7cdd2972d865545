//! Typed tensor-valued grid functions and their pointwise algebra.
//!
//! Every field couples a domain reference with one flat array per
//! component, in a canonical component order frozen per valence. Symmetric
//! and curvature-type valences store independent components only, so the
//! index-pair relabelings between tensors and forms stay pure renamings.
//! Masked-out nodes hold a quiet NaN sentinel; operators only ever read
//! masked-in nodes, and the accessors assert that in debug builds.

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::mesh::Domain;
use std::sync::Arc;

/// Shared-ownership handle fields use to reference their domain.
pub type DomainRef = Arc<Domain>;

/// Field valence: which tensor space the values live in.
///
/// `Point(m)` carries values in ℝᵐ with no chart leg; `TwoPoint(m)` has one
/// value leg and one chart leg (F^{iJ}); `Form(k, m)` is an ℝᵐ-valued
/// k-form with strictly increasing chart multi-indices. `Curv4` holds the
/// independent components of a tensor with the symmetries of a curvature
/// tensor (a symmetric bivector pairing); `Curv5` its three-index-cycle
/// sibling with one extra derivative leg.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Valence {
    Scalar,
    Vector,
    Point(usize),
    Tensor20,
    Tensor02Sym,
    TwoPoint(usize),
    Form(usize, usize),
    Curv4,
    Curv5,
}

impl Valence {
    /// Stable valence string. Two-point and point valences append the value
    /// dimension only when it differs from the chart dimension `n`.
    pub fn name(&self, n: usize) -> String {
        match self {
            Valence::Scalar => "scalar".into(),
            Valence::Vector => "vector".into(),
            Valence::Point(m) if *m == n => "point".into(),
            Valence::Point(m) => format!("point({m})"),
            Valence::Tensor20 => "tensor20".into(),
            Valence::Tensor02Sym => "tensor02sym".into(),
            Valence::TwoPoint(m) if *m == n => "twopoint".into(),
            Valence::TwoPoint(m) => format!("twopoint({m})"),
            Valence::Form(k, m) => format!("form({k},{m})"),
            Valence::Curv4 => "curv4".into(),
            Valence::Curv5 => "curv5".into(),
        }
    }

    /// Parse a valence string; `n` is the chart dimension supplying
    /// defaults for omitted value dimensions.
    pub fn parse(s: &str, n: usize) -> Result<Valence> {
        let bad = || Error::UnknownId {
            kind: s.to_string(),
            what: "valence".to_string(),
        };
        let args = |t: &str| -> Result<Vec<usize>> {
            t.split(',')
                .map(|x| x.trim().parse::<usize>().map_err(|_| bad()))
                .collect()
        };
        if let Some(p) = s.find('(') {
            let inner = s[p + 1..].strip_suffix(')').ok_or_else(bad)?;
            let head = &s[..p];
            let a = args(inner)?;
            return match (head, a.len()) {
                ("point", 1) => Ok(Valence::Point(a[0])),
                ("twopoint", 1) => Ok(Valence::TwoPoint(a[0])),
                ("form", 2) => Ok(Valence::Form(a[0], a[1])),
                ("form", 1) => Ok(Valence::Form(a[0], 1)),
                _ => Err(bad()),
            };
        }
        match s {
            "scalar" => Ok(Valence::Scalar),
            "vector" => Ok(Valence::Vector),
            "point" => Ok(Valence::Point(n)),
            "tensor20" => Ok(Valence::Tensor20),
            "tensor02sym" => Ok(Valence::Tensor02Sym),
            "twopoint" => Ok(Valence::TwoPoint(n)),
            "curv4" => Ok(Valence::Curv4),
            "curv5" => Ok(Valence::Curv5),
            _ => Err(bad()),
        }
    }

    /// Canonical component names for chart dimension `n`.
    pub fn component_names(&self, n: usize) -> Vec<String> {
        match self {
            Valence::Scalar => vec!["0".into()],
            Valence::Vector => (1..=n).map(|i| i.to_string()).collect(),
            Valence::Point(m) => (1..=*m).map(|i| i.to_string()).collect(),
            Valence::Tensor20 => {
                let mut v = Vec::new();
                for i in 1..=n {
                    for j in 1..=n {
                        v.push(format!("{i}{j}"));
                    }
                }
                v
            }
            Valence::Tensor02Sym => {
                let mut v = Vec::new();
                for i in 1..=n {
                    for j in i..=n {
                        v.push(format!("{i}{j}"));
                    }
                }
                v
            }
            Valence::TwoPoint(m) => {
                let mut v = Vec::new();
                for i in 1..=*m {
                    for j in 1..=n {
                        v.push(format!("{i}{j}"));
                    }
                }
                v
            }
            Valence::Form(k, m) => {
                let mut v = Vec::new();
                for i in 1..=*m {
                    for idx in increasing_multi_indices(n, *k) {
                        let tail: String = idx.iter().map(|d| d.to_string()).collect();
                        v.push(format!("{i}|{tail}"));
                    }
                }
                v
            }
            Valence::Curv4 => {
                if n == 2 {
                    vec!["1212".into()]
                } else {
                    ["2323", "3123", "1223", "1313", "2113", "1212"]
                        .iter()
                        .map(|s| s.to_string())
                        .collect()
                }
            }
            Valence::Curv5 => ["12323", "21313", "31212"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        }
    }

    /// Number of stored components for chart dimension `n`.
    pub fn component_count(&self, n: usize) -> usize {
        self.component_names(n).len()
    }
}

/// All strictly increasing `k`-element multi-indices over 1..=n, in
/// lexicographic order.
pub fn increasing_multi_indices(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for v in start..=n {
            cur.push(v);
            rec(n, k, v + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, k, 1, &mut Vec::new(), &mut out);
    out
}

/// Position of the ordered pair (i ≤ j) in the upper-triangle component
/// order of `Tensor02Sym`, 1-based indices.
pub fn sym_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(1 <= i && i <= j && j <= n);
    // Row i starts after rows 1..i, each row r holding n - r + 1 entries.
    let before: usize = (1..i).map(|r| n - r + 1).sum();
    before + (j - i)
}

/// Map an antisymmetric chart index pair (I, J), 1-based, to its bivector
/// slot and sign. 3D slots: (2,3)→1, (3,1)→2, (1,2)→3; 2D: (1,2)→1.
/// Returns None when I == J.
pub fn bivector_slot(n: usize, i: usize, j: usize) -> Option<(usize, f64)> {
    if i == j {
        return None;
    }
    if n == 2 {
        return Some(if (i, j) == (1, 2) { (1, 1.0) } else { (1, -1.0) });
    }
    match (i, j) {
        (2, 3) => Some((1, 1.0)),
        (3, 2) => Some((1, -1.0)),
        (3, 1) => Some((2, 1.0)),
        (1, 3) => Some((2, -1.0)),
        (1, 2) => Some((3, 1.0)),
        (2, 1) => Some((3, -1.0)),
        _ => None,
    }
}

/// Position of the symmetric bivector-slot pair (a, b) in the canonical
/// curvature component order, 1-based slots. The 3D order (2323, 3123,
/// 1223, 1313, 2113, 1212) walks the lower triangle column-major:
/// (1,1),(2,1),(3,1),(2,2),(3,2),(3,3).
pub fn curv4_index(n: usize, a: usize, b: usize) -> usize {
    let (hi, lo) = (a.max(b), a.min(b));
    if n == 2 {
        debug_assert!(hi == 1 && lo == 1);
        return 0;
    }
    let offset = [0usize, 3, 5][lo - 1];
    offset + (hi - lo)
}

/// Tensor-valued grid function.
#[derive(Debug, Clone)]
pub struct TensorField {
    pub domain: DomainRef,
    pub valence: Valence,
    /// One flat node-major array per component, canonical order.
    pub data: Vec<Vec<f64>>,
    /// Optional closed-form descriptors, parallel to `data`. Present when
    /// the field was sampled from expressions; lets downstream consumers
    /// differentiate analytically instead of by stencils.
    pub exprs: Option<Vec<Expr>>,
    /// Total derivative order consumed producing this field. Sampled
    /// fields have 0; each stencil application adds its order. Values are
    /// trustworthy exactly on `domain.eroded(erosion)`.
    pub erosion: usize,
}

impl TensorField {
    /// Chart dimension of the underlying domain.
    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Field of zeros on the masked-in nodes (sentinel elsewhere).
    pub fn zeros(domain: DomainRef, valence: Valence) -> TensorField {
        let n = domain.dim();
        let count = valence.component_count(n);
        let nodes = domain.grid.node_count();
        let data = (0..count)
            .map(|_| {
                (0..nodes)
                    .map(|f| if domain.mask[f] { 0.0 } else { f64::NAN })
                    .collect()
            })
            .collect();
        TensorField {
            domain,
            valence,
            data,
            exprs: None,
            erosion: 0,
        }
    }

    /// Nodes this field's values are valid on: the mask eroded once per
    /// derivative order consumed.
    pub fn support(&self) -> Vec<bool> {
        self.domain.eroded(self.erosion)
    }

    /// Max absolute value over this field's own support.
    pub fn linf(&self) -> f64 {
        self.linf_on(&self.support())
    }

    /// Build a field by evaluating `f(component, node) -> value` at every
    /// masked-in node.
    pub fn from_fn(
        domain: DomainRef,
        valence: Valence,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> TensorField {
        let mut out = TensorField::zeros(domain, valence);
        let nodes = out.domain.grid.node_count();
        for c in 0..out.data.len() {
            for node in 0..nodes {
                if out.domain.mask[node] {
                    out.data[c][node] = f(c, node);
                }
            }
        }
        out
    }

    /// Sample closed-form component expressions onto the grid. Missing
    /// components are implicitly zero; unknown names and expressions whose
    /// variables exceed the chart dimension are rejected. The expressions
    /// are retained on the field.
    pub fn sample(
        domain: DomainRef,
        valence: Valence,
        components: &[(String, Expr)],
    ) -> Result<TensorField> {
        let n = domain.dim();
        let names = valence.component_names(n);
        let mut slots: Vec<Expr> = vec![Expr::Const(0.0); names.len()];
        for (name, expr) in components {
            let idx = names
                .iter()
                .position(|m| m == name)
                .ok_or_else(|| Error::UnknownId {
                    kind: name.clone(),
                    what: format!("component of valence {}", valence.name(n)),
                })?;
            if let Some(v) = expr.max_var() {
                if v >= n {
                    return Err(Error::ExprArity {
                        component: name.clone(),
                        var: v + 1,
                        dim: n,
                    });
                }
            }
            slots[idx] = expr.clone();
        }
        let nodes = domain.grid.node_count();
        let mut data = Vec::with_capacity(slots.len());
        for expr in &slots {
            let mut arr = vec![f64::NAN; nodes];
            for (node, slot) in arr.iter_mut().enumerate() {
                if domain.mask[node] {
                    *slot = expr.eval(&domain.node_position(node));
                }
            }
            data.push(arr);
        }
        Ok(TensorField {
            domain,
            valence,
            data,
            exprs: Some(slots),
            erosion: 0,
        })
    }

    /// Canonical component names for this field.
    pub fn component_names(&self) -> Vec<String> {
        self.valence.component_names(self.dim())
    }

    /// Index of a named component.
    pub fn component_index(&self, name: &str) -> Result<usize> {
        self.component_names()
            .iter()
            .position(|m| m == name)
            .ok_or_else(|| Error::UnknownId {
                kind: name.to_string(),
                what: format!("component of valence {}", self.valence.name(self.dim())),
            })
    }

    /// Value of component `c` at a masked-in node.
    #[inline]
    pub fn value(&self, c: usize, node: usize) -> f64 {
        debug_assert!(
            self.domain.mask[node],
            "read of masked-out node {node} (sentinel)"
        );
        self.data[c][node]
    }

    /// Tensor20 value by 1-based index pair.
    #[inline]
    pub fn t20(&self, i: usize, j: usize, node: usize) -> f64 {
        let n = self.dim();
        self.value((i - 1) * n + (j - 1), node)
    }

    /// Symmetric (0,2) value by 1-based index pair in either order.
    #[inline]
    pub fn t02s(&self, i: usize, j: usize, node: usize) -> f64 {
        let (i, j) = (i.min(j), i.max(j));
        self.value(sym_index(self.dim(), i, j), node)
    }

    /// Curvature-type value R_{ijkl} by 1-based chart indices, applying
    /// the bivector antisymmetry signs. Zero when i == j or k == l.
    pub fn curv4(&self, i: usize, j: usize, k: usize, l: usize, node: usize) -> f64 {
        let n = self.dim();
        let (Some((a, sa)), Some((b, sb))) = (bivector_slot(n, i, j), bivector_slot(n, k, l))
        else {
            return 0.0;
        };
        sa * sb * self.value(curv4_index(n, a, b), node)
    }

    /// Pointwise transpose of a tensor20 field.
    pub fn transpose(&self) -> Result<TensorField> {
        if self.valence != Valence::Tensor20 {
            return Err(Error::ValenceMismatch {
                op: "transpose".into(),
                expected: "tensor20".into(),
                got: self.valence.name(self.dim()),
            });
        }
        let n = self.dim();
        let mut out = self.clone();
        out.exprs = self.exprs.as_ref().map(|e| {
            let mut t = e.clone();
            for i in 0..n {
                for j in 0..n {
                    t[j * n + i] = e[i * n + j].clone();
                }
            }
            t
        });
        for i in 0..n {
            for j in 0..n {
                out.data[j * n + i] = self.data[i * n + j].clone();
            }
        }
        Ok(out)
    }

    /// Traction of a tensor20 field against a constant unit vector N:
    /// (traction)ᴶ = Nᴵ Tᴵᴶ pointwise.
    pub fn traction(&self, n_dir: &[f64]) -> Result<TensorField> {
        if self.valence != Valence::Tensor20 {
            return Err(Error::ValenceMismatch {
                op: "traction".into(),
                expected: "tensor20".into(),
                got: self.valence.name(self.dim()),
            });
        }
        let n = self.dim();
        let len: f64 = n_dir.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (len - 1.0).abs() > 1e-12 || n_dir.len() != n {
            return Err(Error::NonUnitNormal(len));
        }
        let nodes = self.domain.grid.node_count();
        let mut out = TensorField::zeros(self.domain.clone(), Valence::Vector);
        out.erosion = self.erosion;
        for j in 0..n {
            for node in 0..nodes {
                if self.domain.mask[node] {
                    let mut s = 0.0;
                    for i in 0..n {
                        s += n_dir[i] * self.data[i * n + j][node];
                    }
                    out.data[j][node] = s;
                }
            }
        }
        Ok(out)
    }

    /// Contraction on the chart leg: tensor20 ⟨T,Y⟩ᴵ = Tᴵᴶ Yᴶ, or
    /// twopoint ⟨F,Y⟩ⁱ = Fⁱᴶ Yᴶ (output valence `Point`).
    pub fn contract(&self, y: &TensorField) -> Result<TensorField> {
        if y.valence != Valence::Vector {
            return Err(Error::ValenceMismatch {
                op: "contract".into(),
                expected: "vector".into(),
                got: y.valence.name(y.dim()),
            });
        }
        if !self.domain.same_discretization(&y.domain) {
            return Err(Error::DomainMismatch);
        }
        let n = self.dim();
        let (rows, out_valence) = match self.valence {
            Valence::Tensor20 => (n, Valence::Vector),
            Valence::TwoPoint(m) => (m, Valence::Point(m)),
            _ => {
                return Err(Error::ValenceMismatch {
                    op: "contract".into(),
                    expected: "tensor20 or twopoint".into(),
                    got: self.valence.name(n),
                })
            }
        };
        let nodes = self.domain.grid.node_count();
        let mut out = TensorField::zeros(self.domain.clone(), out_valence);
        out.erosion = self.erosion.max(y.erosion);
        for i in 0..rows {
            for node in 0..nodes {
                if self.domain.mask[node] {
                    let mut s = 0.0;
                    for j in 0..n {
                        s += self.data[i * n + j][node] * y.data[j][node];
                    }
                    out.data[i][node] = s;
                }
            }
        }
        Ok(out)
    }

    /// Multilinear interpolation of component `c` at a chart point. The
    /// caller is responsible for the point lying in a fully masked-in cell
    /// (see [`Domain::contains_point`]); otherwise NaN may surface.
    pub fn interp(&self, c: usize, p: &[f64]) -> f64 {
        let Some((corner, local)) = self.domain.cell_of(p) else {
            return f64::NAN;
        };
        let d = self.dim();
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
                acc += w * self.data[c][self.domain.grid.flat(&idx)];
            }
        }
        acc
    }

    /// Interpolate every component at a chart point.
    pub fn interp_all(&self, p: &[f64]) -> Vec<f64> {
        (0..self.data.len()).map(|c| self.interp(c, p)).collect()
    }

    /// Max absolute value over the nodes selected by `support` (typically
    /// an eroded mask). Ignores nodes outside the field's own mask.
    pub fn linf_on(&self, support: &[bool]) -> f64 {
        let mut m: f64 = 0.0;
        for c in 0..self.data.len() {
            for (node, &live) in support.iter().enumerate() {
                if live && self.domain.mask[node] {
                    m = m.max(self.data[c][node].abs());
                }
            }
        }
        m
    }

    /// Componentwise difference (self − other) on the shared mask.
    pub fn sub(&self, other: &TensorField) -> Result<TensorField> {
        if self.valence != other.valence {
            return Err(Error::ValenceMismatch {
                op: "sub".into(),
                expected: self.valence.name(self.dim()),
                got: other.valence.name(other.dim()),
            });
        }
        if !self.domain.same_discretization(&other.domain) {
            return Err(Error::DomainMismatch);
        }
        let mut out = self.clone();
        out.exprs = None;
        out.erosion = self.erosion.max(other.erosion);
        for c in 0..out.data.len() {
            for node in 0..out.data[c].len() {
                if self.domain.mask[node] {
                    out.data[c][node] -= other.data[c][node];
                }
            }
        }
        Ok(out)
    }
}
