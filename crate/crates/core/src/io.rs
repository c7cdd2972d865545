//! File formats: `tdom-1` (domains), `tchn-1` (chain bundles), and
//! `tfld-1` (fields with an inline domain).
//!
//! All three are JSON documents with an explicit `format` tag. Reals use
//! the shortest representation that round-trips float64 bit-exactly; NaN
//! sentinels in component arrays serialize as JSON `null`. Writers are
//! atomic: content lands in a sibling temporary file that is renamed over
//! the target, so readers never observe a half-written document.

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::fields::{DomainRef, TensorField, Valence};
use crate::mesh::{build_domain, Chain1, Chain2, Chart, Domain, GridSpec, MaskRule};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;
use std::sync::Arc;

#[derive(Serialize, Deserialize)]
struct GridDto {
    dims: Vec<usize>,
    origin: Vec<f64>,
    spacing: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RuleDto {
    name: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    params: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct DomainDto {
    format: String,
    grid: GridDto,
    chart: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mask_rule: Option<RuleDto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bitmap: Option<Vec<u8>>,
}

#[derive(Serialize, Deserialize)]
struct LoopDto {
    id: String,
    vertices: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct SurfaceDto {
    id: String,
    vertices: Vec<Vec<f64>>,
    triangles: Vec<[usize; 3]>,
}

#[derive(Serialize, Deserialize)]
struct ChainsDto {
    format: String,
    #[serde(default)]
    loops: Vec<LoopDto>,
    #[serde(default)]
    surfaces: Vec<SurfaceDto>,
}

#[derive(Serialize, Deserialize)]
struct FieldDto {
    format: String,
    domain: DomainDto,
    valence: String,
    components: BTreeMap<String, Vec<Option<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    exprs: Option<BTreeMap<String, String>>,
    /// Derivative order consumed by the producer; 0 (omitted) for sampled
    /// fields, positive for saved operator outputs.
    #[serde(default, skip_serializing_if = "is_zero")]
    erosion: usize,
}

fn is_zero(v: &usize) -> bool {
    *v == 0
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn json_err(path: &Path, source: serde_json::Error) -> Error {
    Error::Json {
        path: path.display().to_string(),
        source,
    }
}

fn format_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Format {
        path: path.display().to_string(),
        msg: msg.into(),
    }
}

/// Serialize a value to `path` atomically: write a sibling temp file, then
/// rename it over the target.
fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let base = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".to_string());
    let tmp = dir.join(format!(".{base}.tmp-{}", std::process::id()));
    let mut f = std::fs::File::create(&tmp).map_err(|e| io_err(&tmp, e))?;
    serde_json::to_writer(&mut f, value).map_err(|e| json_err(&tmp, e))?;
    f.write_all(b"\n").map_err(|e| io_err(&tmp, e))?;
    f.sync_all().map_err(|e| io_err(&tmp, e))?;
    drop(f);
    std::fs::rename(&tmp, path).map_err(|e| io_err(path, e))?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| json_err(path, e))
}

fn domain_to_dto(d: &Domain) -> DomainDto {
    let (mask_rule, bitmap) = match &d.rule {
        MaskRule::Bitmap(bits) => (
            None,
            Some(bits.iter().map(|&b| u8::from(b)).collect::<Vec<u8>>()),
        ),
        MaskRule::Full => (
            Some(RuleDto {
                name: "full".into(),
                params: vec![],
            }),
            None,
        ),
        MaskRule::Annulus { r_in, r_out } => (
            Some(RuleDto {
                name: "annulus".into(),
                params: vec![*r_in, *r_out],
            }),
            None,
        ),
        MaskRule::SolidTorus { major, minor } => (
            Some(RuleDto {
                name: "solid-torus".into(),
                params: vec![*major, *minor],
            }),
            None,
        ),
        MaskRule::SphericalShell { r_in, r_out } => (
            Some(RuleDto {
                name: "spherical-shell".into(),
                params: vec![*r_in, *r_out],
            }),
            None,
        ),
        MaskRule::BoxMinusBox => (
            Some(RuleDto {
                name: "box-minus-box".into(),
                params: vec![],
            }),
            None,
        ),
    };
    DomainDto {
        format: "tdom-1".into(),
        grid: GridDto {
            dims: d.grid.dims.clone(),
            origin: d.grid.origin.clone(),
            spacing: d.grid.spacing.clone(),
        },
        chart: d.chart.name().to_string(),
        mask_rule,
        bitmap,
    }
}

fn domain_from_dto(dto: &DomainDto, path: &Path) -> Result<Domain> {
    if dto.format != "tdom-1" {
        return Err(format_err(
            path,
            format!("expected format tdom-1, got `{}`", dto.format),
        ));
    }
    let grid = GridSpec::new(
        dto.grid.dims.clone(),
        dto.grid.origin.clone(),
        dto.grid.spacing.clone(),
    )?;
    let chart = Chart::parse(&dto.chart)?;
    let rule = match (&dto.mask_rule, &dto.bitmap) {
        (Some(r), None) => {
            let spec = if r.params.is_empty() {
                r.name.clone()
            } else {
                let args: Vec<String> = r.params.iter().map(|p| p.to_string()).collect();
                format!("{}({})", r.name, args.join(","))
            };
            MaskRule::parse(&spec)?
        }
        (None, Some(bits)) => MaskRule::Bitmap(bits.iter().map(|&b| b != 0).collect()),
        _ => {
            return Err(format_err(
                path,
                "exactly one of `mask_rule` and `bitmap` must be present",
            ))
        }
    };
    build_domain(grid, rule, chart)
}

/// Write a domain as a `tdom-1` document.
pub fn write_domain(path: &Path, d: &Domain) -> Result<()> {
    write_json_atomic(path, &domain_to_dto(d))
}

/// Read a `tdom-1` document and rebuild the domain (mask recomputed from
/// the rule, or taken from the stored bitmap).
pub fn read_domain(path: &Path) -> Result<Domain> {
    let dto: DomainDto = read_json(path)?;
    domain_from_dto(&dto, path)
}

/// Write loops and surfaces as a `tchn-1` document.
pub fn write_chains(path: &Path, loops: &[Chain1], surfaces: &[Chain2]) -> Result<()> {
    let dto = ChainsDto {
        format: "tchn-1".into(),
        loops: loops
            .iter()
            .map(|c| LoopDto {
                id: c.id.clone(),
                vertices: c.vertices.clone(),
            })
            .collect(),
        surfaces: surfaces
            .iter()
            .map(|s| SurfaceDto {
                id: s.id.clone(),
                vertices: s.vertices.clone(),
                triangles: s.triangles.clone(),
            })
            .collect(),
    };
    write_json_atomic(path, &dto)
}

/// Read a `tchn-1` document.
pub fn read_chains(path: &Path) -> Result<(Vec<Chain1>, Vec<Chain2>)> {
    let dto: ChainsDto = read_json(path)?;
    if dto.format != "tchn-1" {
        return Err(format_err(
            path,
            format!("expected format tchn-1, got `{}`", dto.format),
        ));
    }
    Ok((
        dto.loops
            .into_iter()
            .map(|l| Chain1 {
                id: l.id,
                vertices: l.vertices,
            })
            .collect(),
        dto.surfaces
            .into_iter()
            .map(|s| Chain2 {
                id: s.id,
                vertices: s.vertices,
                triangles: s.triangles,
            })
            .collect(),
    ))
}

/// Write a field as a `tfld-1` document with its domain inline. NaN
/// sentinels become JSON `null`.
pub fn write_field(path: &Path, f: &TensorField) -> Result<()> {
    let names = f.component_names();
    let mut components = BTreeMap::new();
    for (c, name) in names.iter().enumerate() {
        let arr: Vec<Option<f64>> = f.data[c]
            .iter()
            .map(|&v| if v.is_nan() { None } else { Some(v) })
            .collect();
        components.insert(name.clone(), arr);
    }
    let exprs = f.exprs.as_ref().map(|es| {
        names
            .iter()
            .zip(es)
            .map(|(name, e)| (name.clone(), e.to_string()))
            .collect::<BTreeMap<String, String>>()
    });
    let dto = FieldDto {
        format: "tfld-1".into(),
        domain: domain_to_dto(&f.domain),
        valence: f.valence.name(f.dim()).to_string(),
        components,
        exprs,
        erosion: f.erosion,
    };
    write_json_atomic(path, &dto)
}

/// Read a `tfld-1` document, rebuilding the inline domain. The component
/// set must match the valence's canonical names exactly.
pub fn read_field(path: &Path) -> Result<TensorField> {
    let dto: FieldDto = read_json(path)?;
    if dto.format != "tfld-1" {
        return Err(format_err(
            path,
            format!("expected format tfld-1, got `{}`", dto.format),
        ));
    }
    let domain: DomainRef = Arc::new(domain_from_dto(&dto.domain, path)?);
    let n = domain.dim();
    let valence = Valence::parse(&dto.valence, n)?;
    let names = valence.component_names(n);
    if dto.components.len() != names.len()
        || names.iter().any(|name| !dto.components.contains_key(name))
    {
        return Err(Error::ComponentCount {
            valence: dto.valence.clone(),
            expected: names.len(),
            got: dto.components.len(),
        });
    }
    let nodes = domain.grid.node_count();
    let mut data = Vec::with_capacity(names.len());
    for name in &names {
        let arr = &dto.components[name];
        if arr.len() != nodes {
            return Err(format_err(
                path,
                format!(
                    "component `{name}` has {} values, grid has {nodes} nodes",
                    arr.len()
                ),
            ));
        }
        data.push(arr.iter().map(|v| v.unwrap_or(f64::NAN)).collect());
    }
    let exprs = match &dto.exprs {
        None => None,
        Some(map) => {
            let mut slots = vec![Expr::Const(0.0); names.len()];
            for (name, text) in map {
                let idx = names
                    .iter()
                    .position(|m| m == name)
                    .ok_or_else(|| format_err(path, format!("expr for unknown component `{name}`")))?;
                slots[idx] = Expr::parse(text)?;
            }
            Some(slots)
        }
    };
    Ok(TensorField {
        domain,
        valence,
        data,
        exprs,
        erosion: dto.erosion,
    })
}

/// SHA-256 of a file's bytes, lowercase hex. Used for input digests in
/// reports.
pub fn sha256_hex(path: &Path) -> Result<String> {
    use sha2::{Digest, Sha256};
    let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
    let mut h = Sha256::new();
    h.update(&bytes);
    let out = h.finalize();
    Ok(out.iter().map(|b| format!("{b:02x}")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::icosphere;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("tcx-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    fn annulus() -> DomainRef {
        Arc::new(
            build_domain(
                GridSpec::cube(2, 32, -2.0, 2.0).unwrap(),
                MaskRule::Annulus {
                    r_in: 0.5,
                    r_out: 1.8,
                },
                Chart::Cartesian2,
            )
            .unwrap(),
        )
    }

    #[test]
    fn domain_round_trip_named_rule() {
        let d = annulus();
        let p = tmp("dom-annulus.json");
        write_domain(&p, &d).unwrap();
        let back = read_domain(&p).unwrap();
        assert!(back.same_discretization(&d));
        assert_eq!(back.rule, d.rule);
    }

    #[test]
    fn domain_round_trip_bitmap() {
        let g = GridSpec::new(vec![6, 5], vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let mut bits = vec![false; 30];
        for f in 6..24 {
            bits[f] = true;
        }
        let d = build_domain(g, MaskRule::Bitmap(bits), Chart::Cartesian2).unwrap();
        let p = tmp("dom-bitmap.json");
        write_domain(&p, &d).unwrap();
        let back = read_domain(&p).unwrap();
        assert!(back.same_discretization(&d));
    }

    #[test]
    fn field_round_trip_is_bit_exact_with_nan_nulls() {
        let d = annulus();
        let f = TensorField::sample(
            d,
            Valence::Tensor02Sym,
            &[
                ("11".into(), Expr::parse("sin(x1)*x2 + pi").unwrap()),
                ("12".into(), Expr::parse("x1/3 - exp(x2/7)").unwrap()),
                ("22".into(), Expr::parse("sqrt(x1^2 + x2^2)").unwrap()),
            ],
        )
        .unwrap();
        let p = tmp("fld-sym.json");
        write_field(&p, &f).unwrap();
        let back = read_field(&p).unwrap();
        assert_eq!(back.valence, f.valence);
        for c in 0..f.data.len() {
            for node in 0..f.data[c].len() {
                let (a, b) = (f.data[c][node], back.data[c][node]);
                assert!(
                    (a.is_nan() && b.is_nan()) || a.to_bits() == b.to_bits(),
                    "component {c} node {node}: {a} vs {b}"
                );
            }
        }
        // Masked-out nodes were written as nulls.
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.contains("null"));
        // Exprs survive the trip.
        let es = back.exprs.unwrap();
        let node = back
            .domain
            .mask
            .iter()
            .position(|&b| b)
            .unwrap();
        let x = back.domain.node_position(node);
        assert!((es[0].eval(&x) - back.data[0][node]).abs() < 1e-15);
    }

    #[test]
    fn chain_round_trip() {
        let s = icosphere("h2-0", 1, 1.0);
        let loop1 = Chain1 {
            id: "h1-0".into(),
            vertices: vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]],
        };
        let p = tmp("chains.json");
        write_chains(&p, &[loop1.clone()], &[s.clone()]).unwrap();
        let (loops, surfaces) = read_chains(&p).unwrap();
        assert_eq!(loops, vec![loop1]);
        assert_eq!(surfaces, vec![s]);
    }

    #[test]
    fn wrong_format_tag_is_rejected() {
        let p = tmp("bad-tag.json");
        std::fs::write(
            &p,
            r#"{"format":"tdom-9","grid":{"dims":[4,4],"origin":[0,0],"spacing":[1,1]},"chart":"cartesian2","mask_rule":{"name":"full"}}"#,
        )
        .unwrap();
        assert!(matches!(read_domain(&p), Err(Error::Format { .. })));
        let q = tmp("not-json.json");
        std::fs::write(&q, "plainly not json").unwrap();
        assert!(matches!(read_domain(&q), Err(Error::Json { .. })));
    }

    #[test]
    fn missing_component_is_rejected() {
        let d = annulus();
        let f = TensorField::zeros(d, Valence::Vector);
        let p = tmp("fld-missing.json");
        write_field(&p, &f).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let chopped = text.replace("\"1\":", "\"9\":");
        std::fs::write(&p, chopped).unwrap();
        assert!(matches!(
            read_field(&p),
            Err(Error::ComponentCount { .. })
        ));
    }

    #[test]
    fn sha256_digest_is_stable() {
        let p = tmp("digest.bin");
        std::fs::write(&p, b"abc").unwrap();
        assert_eq!(
            sha256_hex(&p).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
