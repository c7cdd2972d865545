//! Discrete domains: uniform grids with inclusion masks, plus validated
//! integration chains and canonical homology generators for stock shapes.
//!
//! A domain is a uniform Cartesian grid over a 2- or 3-axis chart together
//! with a node mask selecting the body. Holes in the mask realize nontrivial
//! topology (rings, tori, shells) without leaving structured grids, which
//! keeps every differential operator stencil-local and the homology
//! computation cubical. Integration chains — closed polylines and closed
//! oriented triangulations — carry the period integrals; their vertices are
//! free points in chart coordinates, not grid nodes.

use crate::error::{Error, Result};

/// Coordinate chart the grid axes refer to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chart {
    /// Flat plane, coordinates (x1, x2), identity metric.
    Cartesian2,
    /// Flat space, coordinates (x1, x2, x3), identity metric.
    Cartesian3,
    /// Round-sphere chart: x1 = azimuth, x2 = polar angle. The grid must
    /// keep x2 inside [[`PHI_MIN`], [`PHI_MAX`]] so stencils never touch a
    /// coordinate pole. The sphere radius is not part of the domain; it is
    /// supplied wherever a metric is needed.
    Spherical,
}

/// Lower polar-angle bound for spherical-chart grids.
pub const PHI_MIN: f64 = 0.3;
/// Upper polar-angle bound for spherical-chart grids.
pub const PHI_MAX: f64 = std::f64::consts::PI - 0.3;

impl Chart {
    /// Number of grid axes this chart carries.
    pub fn dim(&self) -> usize {
        match self {
            Chart::Cartesian2 | Chart::Spherical => 2,
            Chart::Cartesian3 => 3,
        }
    }

    /// Stable identifier used in files and reports.
    pub fn name(&self) -> &'static str {
        match self {
            Chart::Cartesian2 => "cartesian2",
            Chart::Cartesian3 => "cartesian3",
            Chart::Spherical => "spherical",
        }
    }

    /// Inverse of [`Chart::name`].
    pub fn parse(s: &str) -> Result<Chart> {
        match s {
            "cartesian2" => Ok(Chart::Cartesian2),
            "cartesian3" => Ok(Chart::Cartesian3),
            "spherical" => Ok(Chart::Spherical),
            _ => Err(Error::UnknownId {
                kind: s.to_string(),
                what: "chart".to_string(),
            }),
        }
    }

    /// True for charts whose metric is the identity in these coordinates.
    pub fn is_cartesian(&self) -> bool {
        matches!(self, Chart::Cartesian2 | Chart::Cartesian3)
    }
}

/// Uniform grid layout: per-axis node counts, origin, and spacing.
///
/// Nodes are addressed row-major with the last axis fastest: in 3D the flat
/// index of (i, j, k) is `(i*d1 + j)*d2 + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub dims: Vec<usize>,
    pub origin: Vec<f64>,
    pub spacing: Vec<f64>,
}

impl GridSpec {
    pub fn new(dims: Vec<usize>, origin: Vec<f64>, spacing: Vec<f64>) -> Result<GridSpec> {
        let g = GridSpec {
            dims,
            origin,
            spacing,
        };
        g.validate()?;
        Ok(g)
    }

    /// Evenly spaced grid with `n` nodes per axis spanning `[lo, hi]` on
    /// every axis of a `dim`-axis chart.
    pub fn cube(dim: usize, n: usize, lo: f64, hi: f64) -> Result<GridSpec> {
        let h = (hi - lo) / (n as f64 - 1.0);
        GridSpec::new(vec![n; dim], vec![lo; dim], vec![h; dim])
    }

    fn validate(&self) -> Result<()> {
        let d = self.dims.len();
        if d != 2 && d != 3 {
            return Err(Error::BadAxisCount(d));
        }
        if self.origin.len() != d || self.spacing.len() != d {
            return Err(Error::BadAxisCount(self.origin.len().max(self.spacing.len())));
        }
        for (axis, &len) in self.dims.iter().enumerate() {
            if len < 4 {
                return Err(Error::GridTooSmall { axis, len });
            }
        }
        for (axis, &h) in self.spacing.iter().enumerate() {
            if !(h > 0.0) || !h.is_finite() {
                return Err(Error::BadSpacing { axis, value: h });
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    /// Total node count.
    pub fn node_count(&self) -> usize {
        self.dims.iter().product()
    }

    /// Flat index of a multi-index.
    pub fn flat(&self, idx: &[usize]) -> usize {
        let mut f = 0;
        for (a, &i) in idx.iter().enumerate() {
            f = f * self.dims[a] + i;
        }
        f
    }

    /// Multi-index of a flat index.
    pub fn unflat(&self, mut flat: usize) -> Vec<usize> {
        let d = self.dim();
        let mut idx = vec![0; d];
        for a in (0..d).rev() {
            idx[a] = flat % self.dims[a];
            flat /= self.dims[a];
        }
        idx
    }

    /// Chart coordinates of a node.
    pub fn position(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter()
            .enumerate()
            .map(|(a, &i)| self.origin[a] + i as f64 * self.spacing[a])
            .collect()
    }

    /// Physical extent of axis `a` (distance from first to last node).
    pub fn extent(&self, a: usize) -> f64 {
        (self.dims[a] - 1) as f64 * self.spacing[a]
    }

    /// Largest spacing across axes.
    pub fn max_spacing(&self) -> f64 {
        self.spacing.iter().cloned().fold(0.0, f64::max)
    }
}

/// Region descriptor that selects masked-in nodes.
///
/// Named rules are centered on the chart coordinate origin, except
/// `BoxMinusBox`, which removes the central quarter-to-three-quarter
/// fraction of the grid's bounding box along every axis. `Bitmap` carries an
/// explicit row-major node mask.
#[derive(Debug, Clone, PartialEq)]
pub enum MaskRule {
    Full,
    Annulus { r_in: f64, r_out: f64 },
    SolidTorus { major: f64, minor: f64 },
    SphericalShell { r_in: f64, r_out: f64 },
    BoxMinusBox,
    Bitmap(Vec<bool>),
}

impl MaskRule {
    /// Stable rule name (bitmaps serialize separately).
    pub fn name(&self) -> &'static str {
        match self {
            MaskRule::Full => "full",
            MaskRule::Annulus { .. } => "annulus",
            MaskRule::SolidTorus { .. } => "solid-torus",
            MaskRule::SphericalShell { .. } => "spherical-shell",
            MaskRule::BoxMinusBox => "box-minus-box",
            MaskRule::Bitmap(_) => "bitmap",
        }
    }

    /// Parse a rule from `name` or `name(a,b)` text, e.g. `annulus(0.5,1.8)`.
    pub fn parse(s: &str) -> Result<MaskRule> {
        let s = s.trim();
        let bad = |msg: &str| Error::UnknownId {
            kind: s.to_string(),
            what: format!("mask rule ({msg})"),
        };
        let (head, args) = match s.find('(') {
            None => (s, vec![]),
            Some(p) => {
                let inner = s[p + 1..]
                    .strip_suffix(')')
                    .ok_or_else(|| bad("missing `)`"))?;
                let vals: std::result::Result<Vec<f64>, _> =
                    inner.split(',').map(|t| t.trim().parse::<f64>()).collect();
                (&s[..p], vals.map_err(|_| bad("bad numeric argument"))?)
            }
        };
        let two = |args: &[f64]| -> Result<(f64, f64)> {
            if args.len() == 2 {
                Ok((args[0], args[1]))
            } else {
                Err(bad("expected two arguments"))
            }
        };
        match head {
            "full" => Ok(MaskRule::Full),
            "annulus" => two(&args).map(|(r_in, r_out)| MaskRule::Annulus { r_in, r_out }),
            "solid-torus" => two(&args).map(|(major, minor)| MaskRule::SolidTorus { major, minor }),
            "spherical-shell" => {
                two(&args).map(|(r_in, r_out)| MaskRule::SphericalShell { r_in, r_out })
            }
            "box-minus-box" => Ok(MaskRule::BoxMinusBox),
            _ => Err(bad("unknown name")),
        }
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        let ok = match self {
            MaskRule::Full | MaskRule::BoxMinusBox | MaskRule::Bitmap(_) => true,
            MaskRule::Annulus { .. } => dim == 2,
            MaskRule::SolidTorus { .. } | MaskRule::SphericalShell { .. } => dim == 3,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::RuleDimension {
                rule: self.name().to_string(),
                dim,
            })
        }
    }

    /// Membership test in chart coordinates. `grid` supplies the bounding
    /// box for fraction-based rules. Not meaningful for `Bitmap`.
    fn contains(&self, p: &[f64], grid: &GridSpec) -> bool {
        match self {
            MaskRule::Full => true,
            MaskRule::Annulus { r_in, r_out } => {
                let r = p[0].hypot(p[1]);
                *r_in <= r && r <= *r_out
            }
            MaskRule::SolidTorus { major, minor } => {
                let rho = p[0].hypot(p[1]) - major;
                rho * rho + p[2] * p[2] <= minor * minor
            }
            MaskRule::SphericalShell { r_in, r_out } => {
                let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
                *r_in <= r && r <= *r_out
            }
            MaskRule::BoxMinusBox => {
                let in_hole = (0..grid.dim()).all(|a| {
                    let f = (p[a] - grid.origin[a]) / grid.extent(a);
                    (0.25..=0.75).contains(&f)
                });
                !in_hole
            }
            MaskRule::Bitmap(_) => true,
        }
    }
}

/// Closed polyline in chart coordinates. The vertex list stores the closure
/// explicitly: the last vertex repeats the first.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain1 {
    pub id: String,
    pub vertices: Vec<Vec<f64>>,
}

impl Chain1 {
    /// Number of line segments (vertices minus one).
    pub fn segments(&self) -> usize {
        self.vertices.len().saturating_sub(1)
    }
}

/// Closed oriented triangulated surface in chart coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain2 {
    pub id: String,
    pub vertices: Vec<Vec<f64>>,
    pub triangles: Vec<[usize; 3]>,
}

/// Grid + mask + chart: the discrete body all fields live on.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    pub grid: GridSpec,
    pub chart: Chart,
    /// Row-major node mask; true = node belongs to the body.
    pub mask: Vec<bool>,
    /// Rule the mask was built from; kept for serialization and for
    /// canonical generators.
    pub rule: MaskRule,
    /// Nodes whose full face-neighbor stencil is masked-in (one cross
    /// erosion of the mask). Derivative stencils of order p are evaluable
    /// on `eroded(p)`.
    pub interior: Vec<bool>,
}

/// Build a domain from a grid, a mask rule, and a chart.
///
/// Rejects grids with fewer than 4 nodes on any axis, masks that are empty
/// or not edge-connected, bitmap lengths that disagree with the grid, rules
/// applied in the wrong dimension, and spherical grids that reach within
/// 0.3 radians of a coordinate pole.
pub fn build_domain(grid: GridSpec, rule: MaskRule, chart: Chart) -> Result<Domain> {
    grid.validate()?;
    if grid.dim() != chart.dim() {
        return Err(Error::BadAxisCount(grid.dim()));
    }
    rule.check_dim(grid.dim())?;
    if chart == Chart::Spherical {
        let lo = grid.origin[1];
        let hi = grid.origin[1] + grid.extent(1);
        if lo < PHI_MIN - 1e-12 || hi > PHI_MAX + 1e-12 {
            return Err(Error::PoleRange {
                lo: PHI_MIN,
                hi: PHI_MAX,
            });
        }
    }

    let n = grid.node_count();
    let mask: Vec<bool> = match &rule {
        MaskRule::Bitmap(bits) => {
            if bits.len() != n {
                return Err(Error::BitmapLength {
                    got: bits.len(),
                    want: n,
                });
            }
            bits.clone()
        }
        r => (0..n)
            .map(|f| r.contains(&grid.position(&grid.unflat(f)), &grid))
            .collect(),
    };

    let in_count = mask.iter().filter(|&&b| b).count();
    if in_count == 0 {
        return Err(Error::EmptyMask);
    }
    let components = count_components(&grid, &mask);
    if components != 1 {
        return Err(Error::DisconnectedMask { components });
    }

    let interior = erode_once(&grid, &mask);
    Ok(Domain {
        grid,
        chart,
        mask,
        rule,
        interior,
    })
}

/// Count edge-connected components of the masked-in node set.
fn count_components(grid: &GridSpec, mask: &[bool]) -> usize {
    let n = grid.node_count();
    let mut seen = vec![false; n];
    let mut components = 0;
    let mut stack = Vec::new();
    for start in 0..n {
        if !mask[start] || seen[start] {
            continue;
        }
        components += 1;
        seen[start] = true;
        stack.push(start);
        while let Some(f) = stack.pop() {
            let idx = grid.unflat(f);
            for a in 0..grid.dim() {
                for step in [-1isize, 1] {
                    let i = idx[a] as isize + step;
                    if i < 0 || i as usize >= grid.dims[a] {
                        continue;
                    }
                    let mut nb = idx.clone();
                    nb[a] = i as usize;
                    let g = grid.flat(&nb);
                    if mask[g] && !seen[g] {
                        seen[g] = true;
                        stack.push(g);
                    }
                }
            }
        }
    }
    components
}

/// One cross erosion: keep nodes whose 2·dim face neighbors all exist and
/// are masked-in.
fn erode_once(grid: &GridSpec, mask: &[bool]) -> Vec<bool> {
    let n = grid.node_count();
    let mut out = vec![false; n];
    for f in 0..n {
        if !mask[f] {
            continue;
        }
        let idx = grid.unflat(f);
        let mut ok = true;
        'probe: for a in 0..grid.dim() {
            for step in [-1isize, 1] {
                let i = idx[a] as isize + step;
                if i < 0 || i as usize >= grid.dims[a] {
                    ok = false;
                    break 'probe;
                }
                let mut nb = idx.clone();
                nb[a] = i as usize;
                if !mask[grid.flat(&nb)] {
                    ok = false;
                    break 'probe;
                }
            }
        }
        out[f] = ok;
    }
    out
}

impl Domain {
    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    /// Chart coordinates of a flat node index.
    pub fn node_position(&self, flat: usize) -> Vec<f64> {
        self.grid.position(&self.grid.unflat(flat))
    }

    /// Mask eroded `order` times (order 0 returns the mask itself). A
    /// composed central stencil of total derivative order p is evaluable
    /// exactly on `eroded(p)`.
    pub fn eroded(&self, order: usize) -> Vec<bool> {
        let mut m = self.mask.clone();
        for _ in 0..order {
            m = erode_once(&self.grid, &m);
        }
        m
    }

    /// True when both domains discretize the same body the same way.
    pub fn same_discretization(&self, other: &Domain) -> bool {
        self.chart == other.chart && self.grid == other.grid && self.mask == other.mask
    }

    /// Locate the grid cell containing a chart point: returns the cell's
    /// low-corner multi-index and the local coordinates in [0,1]^dim.
    /// Points on the upper boundary clamp into the last cell. Returns None
    /// outside the grid's bounding box (beyond a round-off margin).
    pub fn cell_of(&self, p: &[f64]) -> Option<(Vec<usize>, Vec<f64>)> {
        if p.len() != self.dim() {
            return None;
        }
        let g = &self.grid;
        let mut corner = vec![0usize; g.dim()];
        let mut local = vec![0f64; g.dim()];
        for a in 0..g.dim() {
            let t = (p[a] - g.origin[a]) / g.spacing[a];
            let last = (g.dims[a] - 1) as f64;
            if t < -1e-9 || t > last + 1e-9 {
                return None;
            }
            let c = (t.floor().max(0.0) as usize).min(g.dims[a] - 2);
            corner[a] = c;
            local[a] = (t - c as f64).clamp(0.0, 1.0);
        }
        Some((corner, local))
    }

    /// True when the point sits in a cell all of whose corners are
    /// masked-in, i.e. where multilinear interpolation is meaningful.
    pub fn contains_point(&self, p: &[f64]) -> bool {
        let Some((corner, _)) = self.cell_of(p) else {
            return false;
        };
        let d = self.dim();
        for bits in 0..(1usize << d) {
            let mut idx = corner.clone();
            for (a, ia) in idx.iter_mut().enumerate() {
                *ia += (bits >> a) & 1;
            }
            if !self.mask[self.grid.flat(&idx)] {
                return false;
            }
        }
        true
    }

    /// Canonical generators of H₁ and H₂ for the named mask rules:
    /// the centerline circle for annulus and solid torus, the mid-fraction
    /// rectangle loop (2D) or box surface (3D) for box-minus-box, and the
    /// mid-radius triangulated sphere for spherical shell. Contractible
    /// rules return empty lists. Bitmap domains have no canonical
    /// generators.
    pub fn canonical_generators(&self) -> Result<(Vec<Chain1>, Vec<Chain2>)> {
        const LOOP_SEGMENTS: usize = 4096;
        match &self.rule {
            MaskRule::Bitmap(_) => Err(Error::GeneratorsNeedNamedRule),
            MaskRule::Full => Ok((vec![], vec![])),
            MaskRule::Annulus { r_in, r_out } => {
                let r = 0.5 * (r_in + r_out);
                Ok((vec![circle_loop("h1-0", r, LOOP_SEGMENTS, 2)], vec![]))
            }
            MaskRule::SolidTorus { major, .. } => {
                Ok((vec![circle_loop("h1-0", *major, LOOP_SEGMENTS, 3)], vec![]))
            }
            MaskRule::SphericalShell { r_in, r_out } => {
                let r = 0.5 * (r_in + r_out);
                Ok((vec![], vec![icosphere("h2-0", ICOSPHERE_LEVEL, r)]))
            }
            MaskRule::BoxMinusBox => {
                let g = &self.grid;
                let frac = |a: usize, f: f64| g.origin[a] + f * g.extent(a);
                if self.dim() == 2 {
                    let corners = [
                        [frac(0, 0.125), frac(1, 0.125)],
                        [frac(0, 0.875), frac(1, 0.125)],
                        [frac(0, 0.875), frac(1, 0.875)],
                        [frac(0, 0.125), frac(1, 0.875)],
                    ];
                    Ok((
                        vec![polygon_loop("h1-0", &corners, g.max_spacing())],
                        vec![],
                    ))
                } else {
                    let lo = [frac(0, 0.125), frac(1, 0.125), frac(2, 0.125)];
                    let hi = [frac(0, 0.875), frac(1, 0.875), frac(2, 0.875)];
                    Ok((vec![], vec![box_surface("h2-0", lo, hi)]))
                }
            }
        }
    }

    /// Check a polyline against the closed-loop invariants. Violations are
    /// data, not errors.
    pub fn validate_chain1(&self, c: &Chain1) -> Vec<String> {
        let mut v = Vec::new();
        if c.vertices.len() < 3 {
            v.push("loop has fewer than 3 vertices".to_string());
            return v;
        }
        if c.vertices.first() != c.vertices.last() {
            v.push("not closed: first vertex differs from last".to_string());
        }
        for (i, p) in c.vertices.iter().enumerate() {
            if p.len() != self.dim() {
                v.push(format!("vertex {i} has {} coordinates, chart has {}", p.len(), self.dim()));
                return v;
            }
            if !self.contains_point(p) {
                v.push(format!("vertex {i} lies outside the masked-in region"));
            }
        }
        let limit = 2.0 * self.grid.max_spacing();
        for w in c.vertices.windows(2) {
            let d2: f64 = w[0]
                .iter()
                .zip(&w[1])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if d2.sqrt() >= limit {
                v.push(format!(
                    "segment longer than twice the max spacing ({:.3} >= {:.3})",
                    d2.sqrt(),
                    limit
                ));
                break;
            }
        }
        v
    }

    /// Check a triangulated surface: every vertex masked-in, every
    /// undirected edge shared by exactly two triangles with opposite
    /// induced orientations (closed, consistently oriented).
    pub fn validate_chain2(&self, s: &Chain2) -> Vec<String> {
        let mut v = Vec::new();
        for (i, p) in s.vertices.iter().enumerate() {
            if p.len() != self.dim() {
                v.push(format!("vertex {i} has {} coordinates, chart has {}", p.len(), self.dim()));
                return v;
            }
            if !self.contains_point(p) {
                v.push(format!("vertex {i} lies outside the masked-in region"));
            }
        }
        for (t, tri) in s.triangles.iter().enumerate() {
            for &k in tri {
                if k >= s.vertices.len() {
                    v.push(format!("triangle {t} references missing vertex {k}"));
                    return v;
                }
            }
        }
        // Count each directed edge; a closed consistently oriented surface
        // uses every directed edge exactly once and its reverse exactly once.
        use std::collections::HashMap;
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in &s.triangles {
            for e in [(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])] {
                *directed.entry(e).or_insert(0) += 1;
            }
        }
        let mut reported = 0;
        for (&(a, b), &n) in &directed {
            if a > b {
                continue;
            }
            let m = directed.get(&(b, a)).copied().unwrap_or(0);
            if n != 1 || m != 1 {
                v.push(format!(
                    "orientation mismatch on edge ({a},{b}): directed uses {n} and {m}"
                ));
                reported += 1;
                if reported >= 8 {
                    v.push("further edge violations suppressed".to_string());
                    break;
                }
            }
        }
        v
    }
}

/// Circle of radius `r` about the coordinate origin in the x1–x2 plane,
/// closed explicitly (last vertex repeats the first). `dim` = 2 embeds in
/// the plane, 3 at x3 = 0.
fn circle_loop(id: &str, r: f64, segments: usize, dim: usize) -> Chain1 {
    let mut vertices = Vec::with_capacity(segments + 1);
    for k in 0..segments {
        let a = 2.0 * std::f64::consts::PI * k as f64 / segments as f64;
        let mut p = vec![r * a.cos(), r * a.sin()];
        if dim == 3 {
            p.push(0.0);
        }
        vertices.push(p);
    }
    vertices.push(vertices[0].clone());
    Chain1 {
        id: id.to_string(),
        vertices,
    }
}

/// Closed polygon through the given corners, each side subdivided so no
/// segment exceeds `max_step`.
fn polygon_loop(id: &str, corners: &[[f64; 2]], max_step: f64) -> Chain1 {
    let mut vertices: Vec<Vec<f64>> = Vec::new();
    let m = corners.len();
    for i in 0..m {
        let a = corners[i];
        let b = corners[(i + 1) % m];
        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
        let steps = (len / max_step).ceil().max(1.0) as usize;
        for s in 0..steps {
            let t = s as f64 / steps as f64;
            vertices.push(vec![a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    vertices.push(vertices[0].clone());
    Chain1 {
        id: id.to_string(),
        vertices,
    }
}

/// Axis-aligned box surface from corner `lo` to corner `hi`, triangulated
/// into 12 outward-oriented triangles.
fn box_surface(id: &str, lo: [f64; 3], hi: [f64; 3]) -> Chain2 {
    let mut vertices = Vec::with_capacity(8);
    for bits in 0..8usize {
        vertices.push(vec![
            if bits & 1 == 0 { lo[0] } else { hi[0] },
            if bits & 2 == 0 { lo[1] } else { hi[1] },
            if bits & 4 == 0 { lo[2] } else { hi[2] },
        ]);
    }
    let triangles = vec![
        [0, 2, 3],
        [0, 3, 1],
        [4, 5, 7],
        [4, 7, 6],
        [0, 1, 5],
        [0, 5, 4],
        [2, 6, 7],
        [2, 7, 3],
        [0, 4, 6],
        [0, 6, 2],
        [1, 3, 7],
        [1, 7, 5],
    ];
    Chain2 {
        id: id.to_string(),
        vertices,
        triangles,
    }
}

/// Subdivision level used for canonical shell generators: 20·4⁵ = 20480
/// triangles, fine enough for percent-level flux quadrature.
pub const ICOSPHERE_LEVEL: usize = 5;

/// Geodesic sphere of the given radius about the origin: a regular
/// icosahedron subdivided `level` times, every vertex pushed to the sphere.
/// Outward-oriented and antipodally symmetric, so centroid-rule moment
/// fluxes of affine integrands cancel pairwise to round-off.
pub fn icosphere(id: &str, level: usize, radius: f64) -> Chain2 {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let raw: [[f64; 3]; 12] = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let norm = (1.0 + t * t).sqrt();
    let mut vertices: Vec<[f64; 3]> = raw
        .iter()
        .map(|p| [p[0] / norm, p[1] / norm, p[2] / norm])
        .collect();
    let mut triangles: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];

    use std::collections::HashMap;
    for _ in 0..level {
        let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, vs: &mut Vec<[f64; 3]>| -> usize {
            let key = (a.min(b), a.max(b));
            if let Some(&m) = cache.get(&key) {
                return m;
            }
            let p = [
                vs[a][0] + vs[b][0],
                vs[a][1] + vs[b][1],
                vs[a][2] + vs[b][2],
            ];
            let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            vs.push([p[0] / n, p[1] / n, p[2] / n]);
            let m = vs.len() - 1;
            cache.insert(key, m);
            m
        };
        let mut next = Vec::with_capacity(triangles.len() * 4);
        for tri in &triangles {
            let ab = midpoint(tri[0], tri[1], &mut vertices);
            let bc = midpoint(tri[1], tri[2], &mut vertices);
            let ca = midpoint(tri[2], tri[0], &mut vertices);
            next.push([tri[0], ab, ca]);
            next.push([tri[1], bc, ab]);
            next.push([tri[2], ca, bc]);
            next.push([ab, bc, ca]);
        }
        triangles = next;
    }

    Chain2 {
        id: id.to_string(),
        vertices: vertices
            .iter()
            .map(|p| vec![p[0] * radius, p[1] * radius, p[2] * radius])
            .collect(),
        triangles,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full_square(n: usize) -> Domain {
        build_domain(
            GridSpec::cube(2, n, -2.0, 2.0).unwrap(),
            MaskRule::Full,
            Chart::Cartesian2,
        )
        .unwrap()
    }

    #[test]
    fn full_square_is_all_in_with_eroded_interior() {
        let d = full_square(32);
        assert_eq!(d.mask.iter().filter(|&&b| b).count(), 32 * 32);
        assert_eq!(d.interior.iter().filter(|&&b| b).count(), 30 * 30);
        let (loops, surfaces) = d.canonical_generators().unwrap();
        assert!(loops.is_empty() && surfaces.is_empty());
    }

    #[test]
    fn grid_validation_rejects_bad_specs() {
        assert!(matches!(
            GridSpec::new(vec![3, 8], vec![0.0, 0.0], vec![0.1, 0.1]),
            Err(Error::GridTooSmall { axis: 0, len: 3 })
        ));
        assert!(matches!(
            GridSpec::new(vec![8], vec![0.0], vec![0.1]),
            Err(Error::BadAxisCount(1))
        ));
        assert!(matches!(
            GridSpec::new(vec![8, 8], vec![0.0, 0.0], vec![0.1, 0.0]),
            Err(Error::BadSpacing { axis: 1, .. })
        ));
    }

    #[test]
    fn flat_index_is_row_major_last_axis_fastest() {
        let g = GridSpec::new(vec![4, 5, 6], vec![0.0; 3], vec![1.0; 3]).unwrap();
        assert_eq!(g.flat(&[0, 0, 0]), 0);
        assert_eq!(g.flat(&[0, 0, 1]), 1);
        assert_eq!(g.flat(&[0, 1, 0]), 6);
        assert_eq!(g.flat(&[1, 0, 0]), 30);
        for f in [0usize, 1, 17, 29, 30, 119] {
            assert_eq!(g.flat(&g.unflat(f)), f);
        }
    }

    #[test]
    fn annulus_is_connected_and_its_loop_validates() {
        let d = build_domain(
            GridSpec::cube(2, 64, -2.0, 2.0).unwrap(),
            MaskRule::parse("annulus(0.5,1.8)").unwrap(),
            Chart::Cartesian2,
        )
        .unwrap();
        let (loops, surfaces) = d.canonical_generators().unwrap();
        assert_eq!(loops.len(), 1);
        assert!(surfaces.is_empty());
        assert_eq!(loops[0].segments(), 4096);
        // Loop sits on the mid-radius circle.
        let p = &loops[0].vertices[17];
        assert!((p[0].hypot(p[1]) - 1.15).abs() < 1e-12);
        assert!(d.validate_chain1(&loops[0]).is_empty());
    }

    #[test]
    fn coarse_solid_torus_builds_connected() {
        // 16³ on [−2,2]³ leaves only two masked-in z-levels; the domain must
        // still build (homology needs no interior nodes).
        let d = build_domain(
            GridSpec::cube(3, 16, -2.0, 2.0).unwrap(),
            MaskRule::parse("solid-torus(1.0,0.4)").unwrap(),
            Chart::Cartesian3,
        )
        .unwrap();
        assert!(d.mask.iter().any(|&b| b));
        let (loops, surfaces) = d.canonical_generators().unwrap();
        assert_eq!(loops.len(), 1);
        assert!(surfaces.is_empty());
        assert!(d.validate_chain1(&loops[0]).is_empty());
    }

    #[test]
    fn shell_generator_is_closed_oriented_and_contained() {
        let d = build_domain(
            GridSpec::cube(3, 48, -2.0, 2.0).unwrap(),
            MaskRule::parse("spherical-shell(0.5,1.5)").unwrap(),
            Chart::Cartesian3,
        )
        .unwrap();
        let (loops, surfaces) = d.canonical_generators().unwrap();
        assert!(loops.is_empty());
        assert_eq!(surfaces.len(), 1);
        let s = &surfaces[0];
        assert_eq!(s.triangles.len(), 20 * 4usize.pow(ICOSPHERE_LEVEL as u32));
        assert_eq!(d.validate_chain2(s), Vec::<String>::new());
        // Euler characteristic of a sphere.
        let e = s.triangles.len() * 3 / 2;
        assert_eq!(s.vertices.len() + s.triangles.len(), 2 + e);
    }

    #[test]
    fn icosphere_is_outward_oriented_and_antipodal() {
        let s = icosphere("t", 3, 1.0);
        // Signed volume via the divergence theorem must be positive and
        // close to the sphere volume (level 3 inscribes to within 1%).
        let mut vol = 0.0;
        for tri in &s.triangles {
            let a = &s.vertices[tri[0]];
            let b = &s.vertices[tri[1]];
            let c = &s.vertices[tri[2]];
            vol += (a[0] * (b[1] * c[2] - b[2] * c[1])
                + a[1] * (b[2] * c[0] - b[0] * c[2])
                + a[2] * (b[0] * c[1] - b[1] * c[0]))
                / 6.0;
        }
        assert!(vol > 0.0);
        assert!((vol - 4.0 * std::f64::consts::PI / 3.0).abs() < 0.05);
        // Every vertex has its exact antipode in the list.
        for v in &s.vertices {
            let found = s
                .vertices
                .iter()
                .any(|w| (0..3).all(|k| (v[k] + w[k]).abs() < 1e-12));
            assert!(found, "no antipode for {v:?}");
        }
    }

    #[test]
    fn box_minus_box_generators_validate_in_both_dimensions() {
        let d2 = build_domain(
            GridSpec::cube(2, 32, -1.0, 1.0).unwrap(),
            MaskRule::BoxMinusBox,
            Chart::Cartesian2,
        )
        .unwrap();
        assert!(d2.mask.iter().any(|&b| !b), "hole must remove nodes");
        let (loops, _) = d2.canonical_generators().unwrap();
        assert_eq!(loops.len(), 1);
        assert!(d2.validate_chain1(&loops[0]).is_empty());

        let d3 = build_domain(
            GridSpec::cube(3, 24, -1.0, 1.0).unwrap(),
            MaskRule::BoxMinusBox,
            Chart::Cartesian3,
        )
        .unwrap();
        let (loops3, surfaces3) = d3.canonical_generators().unwrap();
        assert!(loops3.is_empty());
        assert_eq!(surfaces3.len(), 1);
        assert!(d3.validate_chain2(&surfaces3[0]).is_empty());
        // Box surface outward: signed volume positive.
        let s = &surfaces3[0];
        let mut vol = 0.0;
        for tri in &s.triangles {
            let a = &s.vertices[tri[0]];
            let b = &s.vertices[tri[1]];
            let c = &s.vertices[tri[2]];
            vol += (a[0] * (b[1] * c[2] - b[2] * c[1])
                + a[1] * (b[2] * c[0] - b[0] * c[2])
                + a[2] * (b[0] * c[1] - b[1] * c[0]))
                / 6.0;
        }
        assert!(vol > 0.0, "box surface must be outward oriented, vol={vol}");
    }

    #[test]
    fn disconnected_bitmap_is_rejected() {
        let g = GridSpec::new(vec![8, 8], vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let mut bits = vec![false; 64];
        bits[g.flat(&[0, 0])] = true;
        bits[g.flat(&[7, 7])] = true;
        let err = build_domain(g, MaskRule::Bitmap(bits), Chart::Cartesian2).unwrap_err();
        assert!(matches!(err, Error::DisconnectedMask { components: 2 }));
    }

    #[test]
    fn bitmap_domains_have_no_canonical_generators() {
        let g = GridSpec::new(vec![8, 8], vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let d = build_domain(g, MaskRule::Bitmap(vec![true; 64]), Chart::Cartesian2).unwrap();
        assert!(matches!(
            d.canonical_generators(),
            Err(Error::GeneratorsNeedNamedRule)
        ));
    }

    #[test]
    fn rule_dimension_mismatch_is_rejected() {
        let g3 = GridSpec::cube(3, 8, -2.0, 2.0).unwrap();
        assert!(matches!(
            build_domain(
                g3,
                MaskRule::Annulus {
                    r_in: 0.5,
                    r_out: 1.8
                },
                Chart::Cartesian3
            ),
            Err(Error::RuleDimension { .. })
        ));
    }

    #[test]
    fn spherical_grid_must_avoid_poles() {
        let bad = GridSpec::new(
            vec![16, 16],
            vec![0.0, 0.1],
            vec![0.1, 0.1],
        )
        .unwrap();
        assert!(matches!(
            build_domain(bad, MaskRule::Full, Chart::Spherical),
            Err(Error::PoleRange { .. })
        ));
        let ok = GridSpec::new(
            vec![16, 16],
            vec![0.0, 0.5],
            vec![0.1, 0.1],
        )
        .unwrap();
        assert!(build_domain(ok, MaskRule::Full, Chart::Spherical).is_ok());
    }

    #[test]
    fn validate_chain1_reports_violations() {
        let d = full_square(16);
        let open = Chain1 {
            id: "open".into(),
            vertices: vec![vec![0.0, 0.0], vec![0.1, 0.0], vec![0.1, 0.1]],
        };
        let v = d.validate_chain1(&open);
        assert!(v.iter().any(|m| m.contains("not closed")), "{v:?}");

        let outside = Chain1 {
            id: "out".into(),
            vertices: vec![vec![0.0, 0.0], vec![5.0, 0.0], vec![0.0, 0.0]],
        };
        let v = d.validate_chain1(&outside);
        assert!(v.iter().any(|m| m.contains("outside")), "{v:?}");
        assert!(v.iter().any(|m| m.contains("longer than twice")), "{v:?}");
    }

    #[test]
    fn flipped_face_breaks_orientation() {
        let d = build_domain(
            GridSpec::cube(3, 16, -2.0, 2.0).unwrap(),
            MaskRule::Full,
            Chart::Cartesian3,
        )
        .unwrap();
        // Octahedron: vertices on the axes, 8 faces.
        let vertices = vec![
            vec![1.0, 0.0, 0.0],
            vec![-1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, -1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![0.0, 0.0, -1.0],
        ];
        let mut triangles = vec![
            [0, 2, 4],
            [2, 1, 4],
            [1, 3, 4],
            [3, 0, 4],
            [2, 0, 5],
            [1, 2, 5],
            [3, 1, 5],
            [0, 3, 5],
        ];
        let good = Chain2 {
            id: "oct".into(),
            vertices: vertices.clone(),
            triangles: triangles.clone(),
        };
        assert!(d.validate_chain2(&good).is_empty());
        triangles[0] = [2, 0, 4];
        let bad = Chain2 {
            id: "oct-flip".into(),
            vertices,
            triangles,
        };
        let v = d.validate_chain2(&bad);
        assert!(
            v.iter().any(|m| m.contains("orientation mismatch")),
            "{v:?}"
        );
    }

    #[test]
    fn erosion_is_monotone() {
        let d = build_domain(
            GridSpec::cube(2, 32, -2.0, 2.0).unwrap(),
            MaskRule::Annulus {
                r_in: 0.4,
                r_out: 1.9,
            },
            Chart::Cartesian2,
        )
        .unwrap();
        let e1 = d.eroded(1);
        let e2 = d.eroded(2);
        for f in 0..d.grid.node_count() {
            assert!(!e1[f] || d.mask[f], "eroded(1) ⊄ mask at {f}");
            assert!(!e2[f] || e1[f], "eroded(2) ⊄ eroded(1) at {f}");
        }
        assert_eq!(e1, d.interior);
    }

    #[test]
    fn cell_lookup_and_containment() {
        let d = full_square(8); // [-2,2]², h = 4/7
        let (corner, local) = d.cell_of(&[0.0, 0.0]).unwrap();
        assert_eq!(corner.len(), 2);
        assert!(local.iter().all(|&t| (0.0..=1.0).contains(&t)));
        assert!(d.contains_point(&[0.0, 0.0]));
        assert!(d.contains_point(&[2.0, 2.0])); // upper corner clamps
        assert!(!d.contains_point(&[2.1, 0.0]));
        assert!(d.cell_of(&[0.0, -2.3]).is_none());
    }

    #[test]
    fn mask_rule_parsing_round_trips() {
        for (txt, want) in [
            ("full", MaskRule::Full),
            (
                "annulus(0.5, 1.8)",
                MaskRule::Annulus {
                    r_in: 0.5,
                    r_out: 1.8,
                },
            ),
            (
                "solid-torus(1.0,0.4)",
                MaskRule::SolidTorus {
                    major: 1.0,
                    minor: 0.4,
                },
            ),
            (
                "spherical-shell(0.5,1.5)",
                MaskRule::SphericalShell {
                    r_in: 0.5,
                    r_out: 1.5,
                },
            ),
            ("box-minus-box", MaskRule::BoxMinusBox),
        ] {
            assert_eq!(MaskRule::parse(txt).unwrap(), want);
        }
        assert!(MaskRule::parse("annulus(0.5)").is_err());
        assert!(MaskRule::parse("blob").is_err());
    }
}
