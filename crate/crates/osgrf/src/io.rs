//! File formats shared by the library and the command-line front-end.
//!
//! Field specs, pseudo-norm specs and candidate families are JSON;
//! realizations are a JSON header plus a raw little-endian f64 payload;
//! tabular outputs are CSV. Loaders validate everything they read: the
//! inputs are untrusted files.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::besov::ExponentEstimate;
use crate::estimate::{Candidate, CandidateFamily, ScaleStats, SearchResult};
use crate::grid::GridNd;
use crate::linalg::{jordan_additive_decompose, AnisotropyMatrix};
use crate::pseudonorm::{ProfileKind, PseudoNorm, PseudoNormKind, RadialProfile};
use crate::synthesis::{FieldRealization, FieldSpec, GridGeometry, SpectralSettings, Variogram};
use crate::wavelet::{BranchType, DiagonalAnisotropy, WaveletCoefficientSet};

/// Hard ceiling on loaded grid cells: rejects absurd headers before any
/// allocation.
const MAX_CELLS: usize = 1 << 26;
const MAX_DIM: usize = 8;

#[derive(Debug)]
pub enum IoError {
    /// Structurally or semantically invalid input data.
    Invalid(String),
    Json(serde_json::Error),
    Io(std::io::Error),
}

impl fmt::Display for IoError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Invalid(m) => write!(f, "{m}"),
            Self::Json(e) => write!(f, "malformed JSON: {e}"),
            Self::Io(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for IoError {}

impl From<serde_json::Error> for IoError {
    fn from(e: serde_json::Error) -> Self {
        Self::Json(e)
    }
}

impl From<std::io::Error> for IoError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e)
    }
}

fn invalid(msg: impl Into<String>) -> IoError {
    IoError::Invalid(msg.into())
}

// ---------------------------------------------------------------------------
// JSON schemas
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PseudoNormJson {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_in: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_out: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quad_tol: Option<f64>,
    /// Row-major homogeneity matrix; optional for diagonal-sum.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub homogeneity: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridJson {
    pub n: Vec<usize>,
    pub dx: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralJson {
    pub lattice_n: usize,
    pub refine_rings: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldSpecJson {
    pub d: usize,
    pub e0: Vec<Vec<f64>>,
    pub h0: f64,
    pub pseudo_norm: PseudoNormJson,
    pub grid: GridJson,
    pub spectral: SpectralJson,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RealizationHeaderJson {
    pub d: usize,
    pub dims: Vec<usize>,
    pub dx: Vec<f64>,
    pub e0: Vec<Vec<f64>>,
    pub h0: f64,
    pub pseudo_norm: PseudoNormJson,
    pub spectral: SpectralJson,
    pub seed: u64,
    pub replicate: u32,
    pub endianness: String,
    pub dtype: String,
    pub payload: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FamilyJson {
    #[serde(default)]
    pub description: String,
    pub members: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntryJson {
    pub replicate: u32,
    pub header: String,
    pub payload: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestJson {
    pub spec_hash: String,
    pub seed: u64,
    pub replicates: u32,
    pub files: Vec<ManifestEntryJson>,
}

// ---------------------------------------------------------------------------
// Matrix helpers
// ---------------------------------------------------------------------------

fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>, IoError> {
    let d = rows.len();
    if d == 0 || d > MAX_DIM {
        return Err(invalid(format!("matrix dimension {d} out of range 1..={MAX_DIM}")));
    }
    let mut flat = Vec::with_capacity(d * d);
    for row in rows {
        if row.len() != d {
            return Err(invalid("matrix rows have inconsistent lengths"));
        }
        for &v in row {
            if !v.is_finite() {
                return Err(invalid("matrix entries must be finite"));
            }
            flat.push(v);
        }
    }
    Ok(DMatrix::from_row_slice(d, d, &flat))
}

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect())
        .collect()
}

// ---------------------------------------------------------------------------
// Pseudo-norm
// ---------------------------------------------------------------------------

pub fn pseudo_norm_from_json(j: &PseudoNormJson) -> Result<PseudoNorm, IoError> {
    match j.kind.as_str() {
        "diagonal-sum" => {
            let lambda = j
                .lambda
                .as_ref()
                .ok_or_else(|| invalid("diagonal-sum pseudo-norm needs `lambda`"))?;
            if lambda.is_empty() || lambda.len() > MAX_DIM {
                return Err(invalid("lambda length out of range"));
            }
            let power = j.power.unwrap_or(1.0);
            let scale = j.scale.unwrap_or(1.0);
            let weights = j.weights.clone().unwrap_or_else(|| vec![1.0; lambda.len()]);
            if weights.len() != lambda.len() {
                return Err(invalid("weights length must match lambda"));
            }
            if !(power >= 1.0) || !power.is_finite() || !(scale > 0.0) || !scale.is_finite() {
                return Err(invalid("power must be >= 1 and scale > 0"));
            }
            let rho = PseudoNorm::diagonal_sum_weighted(lambda, power, scale, &weights)
                .map_err(|e| invalid(format!("invalid pseudo-norm: {e}")))?;
            if let Some(h) = &j.homogeneity {
                let m = matrix_from_rows(h)?;
                let diff = crate::linalg::max_abs_diff(rho.homogeneity().entries(), &m);
                if diff > 1e-10 {
                    return Err(invalid(
                        "homogeneity matrix inconsistent with diagonal-sum lambda",
                    ));
                }
            }
            Ok(rho)
        }
        "integral" => {
            let h = j
                .homogeneity
                .as_ref()
                .ok_or_else(|| invalid("integral pseudo-norm needs `homogeneity`"))?;
            let e = AnisotropyMatrix::new(matrix_from_rows(h)?)
                .map_err(|e| invalid(format!("invalid homogeneity matrix: {e}")))?;
            let r_in = j.r_in.ok_or_else(|| invalid("integral pseudo-norm needs `r_in`"))?;
            let r_out = j
                .r_out
                .ok_or_else(|| invalid("integral pseudo-norm needs `r_out`"))?;
            let kind = match j.profile.as_deref().unwrap_or("smooth-bump") {
                "smooth-bump" => ProfileKind::SmoothBump,
                "indicator" => ProfileKind::Indicator,
                other => return Err(invalid(format!("unknown profile `{other}`"))),
            };
            if !r_in.is_finite() || !r_out.is_finite() {
                return Err(invalid("profile radii must be finite"));
            }
            let profile = RadialProfile::new(kind, r_in, r_out)
                .map_err(|e| invalid(format!("invalid profile: {e}")))?;
            let quad_tol = j.quad_tol.unwrap_or(1e-8);
            if !(quad_tol > 0.0) || !quad_tol.is_finite() {
                return Err(invalid("quad_tol must be positive"));
            }
            PseudoNorm::integral(e, profile, quad_tol)
                .map_err(|e| invalid(format!("invalid pseudo-norm: {e}")))
        }
        other => Err(invalid(format!("unknown pseudo-norm kind `{other}`"))),
    }
}

pub fn pseudo_norm_to_json(rho: &PseudoNorm) -> PseudoNormJson {
    match rho.kind() {
        PseudoNormKind::DiagonalSum {
            lambda,
            power,
            scale,
            weights,
        } => PseudoNormJson {
            kind: "diagonal-sum".into(),
            lambda: Some(lambda.clone()),
            power: Some(*power),
            scale: Some(*scale),
            weights: Some(weights.clone()),
            profile: None,
            r_in: None,
            r_out: None,
            quad_tol: None,
            homogeneity: Some(matrix_to_rows(rho.homogeneity().entries())),
        },
        PseudoNormKind::Integral { profile, quad_tol } => PseudoNormJson {
            kind: "integral".into(),
            lambda: None,
            power: None,
            scale: None,
            weights: None,
            profile: Some(
                match profile.kind {
                    ProfileKind::SmoothBump => "smooth-bump",
                    ProfileKind::Indicator => "indicator",
                }
                .into(),
            ),
            r_in: Some(profile.r_in),
            r_out: Some(profile.r_out),
            quad_tol: Some(*quad_tol),
            homogeneity: Some(matrix_to_rows(rho.homogeneity().entries())),
        },
    }
}

// ---------------------------------------------------------------------------
// Field spec
// ---------------------------------------------------------------------------

fn grid_from_json(g: &GridJson, d: usize) -> Result<GridGeometry, IoError> {
    if g.n.len() != d || g.dx.len() != d {
        return Err(invalid("grid axes must match the spec dimension"));
    }
    let cells: usize = g.n.iter().try_fold(1usize, |acc, &n| {
        acc.checked_mul(n).filter(|&c| c <= MAX_CELLS)
    })
    .ok_or_else(|| invalid(format!("grid exceeds the {MAX_CELLS}-cell limit")))?;
    if cells == 0 {
        return Err(invalid("grid axes must be positive"));
    }
    if g.dx.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
        return Err(invalid("grid spacings must be positive and finite"));
    }
    Ok(GridGeometry {
        n: g.n.clone(),
        dx: g.dx.clone(),
    })
}

fn spectral_from_json(s: &SpectralJson) -> Result<SpectralSettings, IoError> {
    if s.lattice_n == 0 || s.lattice_n > (1 << 15) {
        return Err(invalid("lattice_n out of range"));
    }
    if s.refine_rings > 64 {
        return Err(invalid("refine_rings out of range"));
    }
    Ok(SpectralSettings {
        lattice_n: s.lattice_n,
        refine_rings: s.refine_rings,
    })
}

pub fn field_spec_from_json(j: &FieldSpecJson) -> Result<FieldSpec, IoError> {
    if j.d == 0 || j.d > MAX_DIM {
        return Err(invalid(format!("dimension {} out of range", j.d)));
    }
    if !j.h0.is_finite() {
        return Err(invalid("h0 must be finite"));
    }
    let e0m = matrix_from_rows(&j.e0)?;
    if e0m.nrows() != j.d {
        return Err(invalid("e0 dimension does not match d"));
    }
    let e0 = AnisotropyMatrix::new(e0m).map_err(|e| invalid(format!("invalid e0: {e}")))?;
    let rho = pseudo_norm_from_json(&j.pseudo_norm)?;
    let spec = FieldSpec {
        e0,
        h0: j.h0,
        rho,
        grid: grid_from_json(&j.grid, j.d)?,
        spectral: spectral_from_json(&j.spectral)?,
        seed: j.seed,
    };
    spec.validate()
        .map_err(|e| invalid(format!("invalid field spec: {e}")))?;
    Ok(spec)
}

pub fn field_spec_to_json(spec: &FieldSpec) -> FieldSpecJson {
    FieldSpecJson {
        d: spec.dim(),
        e0: matrix_to_rows(spec.e0.entries()),
        h0: spec.h0,
        pseudo_norm: pseudo_norm_to_json(&spec.rho),
        grid: GridJson {
            n: spec.grid.n.clone(),
            dx: spec.grid.dx.clone(),
        },
        spectral: SpectralJson {
            lattice_n: spec.spectral.lattice_n,
            refine_rings: spec.spectral.refine_rings,
        },
        seed: spec.seed,
    }
}

/// Parses a field spec from raw JSON bytes.
pub fn field_spec_from_slice(bytes: &[u8]) -> Result<FieldSpec, IoError> {
    let j: FieldSpecJson = serde_json::from_slice(bytes)?;
    field_spec_from_json(&j)
}

pub fn load_field_spec(path: &Path) -> Result<FieldSpec, IoError> {
    field_spec_from_slice(&fs::read(path)?)
}

pub fn save_field_spec(path: &Path, spec: &FieldSpec) -> Result<(), IoError> {
    let j = field_spec_to_json(spec);
    fs::write(path, serde_json::to_string_pretty(&j)?)?;
    Ok(())
}

/// Hex SHA-256 of raw spec bytes, recorded in manifests.
pub fn spec_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let digest = h.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

// ---------------------------------------------------------------------------
// Realizations
// ---------------------------------------------------------------------------

fn payload_bytes(values: &GridNd) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 8);
    for v in values.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Reassembles a realization from raw header and payload bytes.
pub fn realization_from_parts(
    header_bytes: &[u8],
    payload: &[u8],
) -> Result<FieldRealization, IoError> {
    let h: RealizationHeaderJson = serde_json::from_slice(header_bytes)?;
    if h.endianness != "little" {
        return Err(invalid(format!("unsupported endianness `{}`", h.endianness)));
    }
    if h.dtype != "f64" {
        return Err(invalid(format!("unsupported dtype `{}`", h.dtype)));
    }
    let spec = field_spec_from_json(&FieldSpecJson {
        d: h.d,
        e0: h.e0.clone(),
        h0: h.h0,
        pseudo_norm: h.pseudo_norm.clone(),
        grid: GridJson {
            n: h.dims.clone(),
            dx: h.dx.clone(),
        },
        spectral: h.spectral.clone(),
        seed: h.seed,
    })?;
    let cells: usize = h.dims.iter().product();
    let expect = cells
        .checked_mul(8)
        .ok_or_else(|| invalid("payload size overflow"))?;
    if payload.len() != expect {
        return Err(invalid(format!(
            "payload has {} bytes, header implies {expect}",
            payload.len()
        )));
    }
    let mut data = Vec::with_capacity(cells);
    for chunk in payload.chunks_exact(8) {
        let v = f64::from_le_bytes(chunk.try_into().expect("chunk of 8"));
        if !v.is_finite() {
            return Err(invalid("payload contains non-finite values"));
        }
        data.push(v);
    }
    let values = GridNd::from_vec(&h.dims, data)
        .map_err(|e| invalid(format!("payload shape mismatch: {e}")))?;
    Ok(FieldRealization {
        values,
        spec: Arc::new(spec),
        replicate: h.replicate,
    })
}

pub fn realization_header_json(r: &FieldRealization, payload_name: &str) -> RealizationHeaderJson {
    let spec = field_spec_to_json(&r.spec);
    RealizationHeaderJson {
        d: spec.d,
        dims: spec.grid.n.clone(),
        dx: spec.grid.dx.clone(),
        e0: spec.e0,
        h0: spec.h0,
        pseudo_norm: spec.pseudo_norm,
        spectral: spec.spectral,
        seed: spec.seed,
        replicate: r.replicate,
        endianness: "little".into(),
        dtype: "f64".into(),
        payload: payload_name.into(),
    }
}

/// Writes header + payload into `dir`; returns (header, payload) names.
pub fn write_realization(dir: &Path, r: &FieldRealization) -> Result<(String, String), IoError> {
    let header_name = format!("realization_{:05}.json", r.replicate);
    let payload_name = format!("realization_{:05}.bin", r.replicate);
    let header = realization_header_json(r, &payload_name);
    fs::write(
        dir.join(&header_name),
        serde_json::to_string_pretty(&header)?,
    )?;
    fs::write(dir.join(&payload_name), payload_bytes(&r.values))?;
    Ok((header_name, payload_name))
}

/// Reads one realization given its header path; the payload is resolved
/// relative to the header's directory.
pub fn read_realization(header_path: &Path) -> Result<FieldRealization, IoError> {
    let header_bytes = fs::read(header_path)?;
    let h: RealizationHeaderJson = serde_json::from_slice(&header_bytes)?;
    if h.payload.contains("..") || h.payload.contains('/') || h.payload.contains('\\') {
        return Err(invalid("payload name must be a bare file name"));
    }
    let dir = header_path.parent().unwrap_or_else(|| Path::new("."));
    let payload = fs::read(dir.join(&h.payload))
        .map_err(|e| invalid(format!("cannot read payload `{}`: {e}", h.payload)))?;
    realization_from_parts(&header_bytes, &payload)
}

/// All realization headers under a directory, sorted by name.
pub fn list_realization_headers(dir: &Path) -> Result<Vec<PathBuf>, IoError> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if name.starts_with("realization_") && name.ends_with(".json") {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

pub fn write_manifest(dir: &Path, manifest: &ManifestJson) -> Result<(), IoError> {
    fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(manifest)?,
    )?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Candidate families
// ---------------------------------------------------------------------------

/// Parses a candidate family from JSON bytes. Diagonal members map
/// directly; non-diagonal members are admitted when their real
/// diagonalizable part is diagonal in the grid axes and are flagged as
/// outside the commuting hypothesis of the search.
pub fn family_from_slice(bytes: &[u8]) -> Result<CandidateFamily, IoError> {
    let j: FamilyJson = serde_json::from_slice(bytes)?;
    if j.members.is_empty() {
        return Err(invalid("candidate family has no members"));
    }
    if j.members.len() > 4096 {
        return Err(invalid("candidate family too large"));
    }
    let mut members = Vec::with_capacity(j.members.len());
    for rows in &j.members {
        let m = matrix_from_rows(rows)?;
        let d = m.nrows() as f64;
        if (m.trace() - d).abs() > 1e-8 {
            return Err(invalid(format!(
                "candidate matrices must have trace {d}, got {}",
                m.trace()
            )));
        }
        let diagonal = crate::linalg::is_diagonal(&m, 1e-12);
        let lambda: Vec<f64> = if diagonal {
            (0..m.nrows()).map(|i| m[(i, i)]).collect()
        } else {
            let parts = jordan_additive_decompose(&m)
                .map_err(|e| invalid(format!("candidate decomposition failed: {e}")))?;
            if !crate::linalg::is_diagonal(&parts.d, 1e-8) {
                return Err(invalid(
                    "candidate's real diagonalizable part is not aligned with the grid axes",
                ));
            }
            (0..parts.d.nrows()).map(|i| parts.d[(i, i)]).collect()
        };
        let anisotropy = DiagonalAnisotropy::new(&lambda)
            .map_err(|e| invalid(format!("invalid candidate: {e}")))?;
        members.push(Candidate {
            parameter: lambda[0],
            anisotropy,
            outside_hypothesis: !diagonal,
        });
    }
    for a in 0..members.len() {
        for b in a + 1..members.len() {
            if members[a].anisotropy == members[b].anisotropy
                && members[a].outside_hypothesis == members[b].outside_hypothesis
            {
                return Err(invalid("candidate family members must be pairwise distinct"));
            }
        }
    }
    Ok(CandidateFamily {
        members,
        description: j.description,
    })
}

pub fn load_family(path: &Path) -> Result<CandidateFamily, IoError> {
    family_from_slice(&fs::read(path)?)
}

// ---------------------------------------------------------------------------
// Tabular and JSON outputs
// ---------------------------------------------------------------------------

pub fn write_variogram_csv(path: &Path, v: &Variogram) -> Result<(), IoError> {
    let mut f = fs::File::create(path)?;
    let d = v.lags.first().map(|h| h.len()).unwrap_or(0);
    let heads: Vec<String> = (1..=d).map(|a| format!("h_{a}")).collect();
    writeln!(f, "{},v,stderr", heads.join(","))?;
    for (i, h) in v.lags.iter().enumerate() {
        let hs: Vec<String> = h.iter().map(|x| x.to_string()).collect();
        writeln!(f, "{},{},{}", hs.join(","), v.v[i], v.stderr[i])?;
    }
    Ok(())
}

pub fn write_coefficients_csv(path: &Path, set: &WaveletCoefficientSet) -> Result<(), IoError> {
    let mut f = fs::File::create(path)?;
    let d = set.grid_dims.len();
    let gammas: Vec<String> = (1..=d).map(|a| format!("gamma_{a}")).collect();
    let ks: Vec<String> = (1..=d).map(|a| format!("k_{a}")).collect();
    writeln!(f, "j,G,{},{},value", gammas.join(","), ks.join(","))?;
    for b in set.branches() {
        let g: String = b.g.iter().map(|t| t.as_char()).collect();
        let gam: Vec<String> = b.gamma.iter().map(|x| x.to_string()).collect();
        for idx in b.values.indices() {
            let kcols: Vec<String> = idx.iter().map(|x| x.to_string()).collect();
            writeln!(
                f,
                "{},{},{},{},{}",
                b.j,
                g,
                gam.join(","),
                kcols.join(","),
                b.values.get(&idx)
            )?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoeffBranchMeta {
    pub j: u32,
    pub g: String,
    pub gamma: Vec<u32>,
    pub dims: Vec<usize>,
    pub canonical: bool,
    pub file: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoeffSetHeaderJson {
    pub lambda: Vec<f64>,
    pub filter_order: usize,
    pub grid_dims: Vec<usize>,
    pub endianness: String,
    pub dtype: String,
    pub branches: Vec<CoeffBranchMeta>,
}

/// Binary grid-per-branch export: one JSON header plus one raw f64 file
/// per branch.
pub fn write_coefficient_branches(
    dir: &Path,
    stem: &str,
    set: &WaveletCoefficientSet,
) -> Result<(), IoError> {
    let mut metas = Vec::new();
    for (i, b) in set.branches().iter().enumerate() {
        let file = format!("{stem}_branch_{i:04}.bin");
        fs::write(dir.join(&file), payload_bytes(&b.values))?;
        metas.push(CoeffBranchMeta {
            j: b.j,
            g: b.g.iter().map(|t| t.as_char()).collect(),
            gamma: b.gamma.clone(),
            dims: b.values.dims().to_vec(),
            canonical: b.canonical,
            file,
        });
    }
    let header = CoeffSetHeaderJson {
        lambda: set.anisotropy.lambda().to_vec(),
        filter_order: set.filter_order,
        grid_dims: set.grid_dims.clone(),
        endianness: "little".into(),
        dtype: "f64".into(),
        branches: metas,
    };
    fs::write(
        dir.join(format!("{stem}_coefficients.json")),
        serde_json::to_string_pretty(&header)?,
    )?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExponentEstimateJson {
    pub lambda: Vec<f64>,
    pub p: f64,
    pub q: f64,
    pub alpha_hat: f64,
    pub stderr: f64,
    pub j_lo: u32,
    pub j_hi: u32,
    pub axis_exponents: Vec<f64>,
    pub sj_fit_alpha: f64,
    pub per_scale: Vec<(u32, f64)>,
}

pub fn estimate_to_json(e: &ExponentEstimate) -> ExponentEstimateJson {
    ExponentEstimateJson {
        lambda: e.anisotropy.lambda().to_vec(),
        p: e.p,
        q: e.q,
        alpha_hat: e.alpha_hat,
        stderr: e.slope_stderr,
        j_lo: e.j_range.0,
        j_hi: e.j_range.1,
        axis_exponents: e.axis_exponents.clone(),
        sj_fit_alpha: e.sj_fit_alpha,
        per_scale: e.per_scale.clone(),
    }
}

pub fn write_estimate_json(path: &Path, e: &ExponentEstimate) -> Result<(), IoError> {
    fs::write(path, serde_json::to_string_pretty(&estimate_to_json(e))?)?;
    Ok(())
}

/// (j, log2 S_j) regression table for external plotting.
pub fn write_scale_table_csv(path: &Path, e: &ExponentEstimate) -> Result<(), IoError> {
    let mut f = fs::File::create(path)?;
    writeln!(f, "j,log2_Sj")?;
    for (j, sj) in &e.per_scale {
        writeln!(f, "{},{}", j, sj.log2())?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchResultJson {
    pub p: f64,
    pub q: f64,
    pub argmax_lambda: Vec<f64>,
    pub h_hat: f64,
    pub tent_h: f64,
    pub tent_r2: f64,
    pub argmax_votes: Vec<(f64, usize)>,
    pub candidates: Vec<SearchCandidateJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchCandidateJson {
    pub lambda: Vec<f64>,
    pub parameter: f64,
    pub outside_hypothesis: bool,
    pub alpha_hat: f64,
    pub stderr: f64,
    pub estimate: ExponentEstimateJson,
}

pub fn search_to_json(r: &SearchResult) -> SearchResultJson {
    SearchResultJson {
        p: r.p,
        q: r.q,
        argmax_lambda: r.argmax.lambda().to_vec(),
        h_hat: r.h_hat,
        tent_h: r.tent_h,
        tent_r2: r.tent_r2,
        argmax_votes: r.argmax_votes.clone(),
        candidates: r
            .per_candidate
            .iter()
            .zip(&r.curve)
            .map(|((cand, est), point)| SearchCandidateJson {
                lambda: cand.anisotropy.lambda().to_vec(),
                parameter: cand.parameter,
                outside_hypothesis: cand.outside_hypothesis,
                alpha_hat: point.alpha_hat,
                stderr: point.stderr,
                estimate: estimate_to_json(est),
            })
            .collect(),
    }
}

pub fn write_search_json(path: &Path, r: &SearchResult) -> Result<(), IoError> {
    fs::write(path, serde_json::to_string_pretty(&search_to_json(r))?)?;
    Ok(())
}

/// lambda, alpha_hat, stderr, alpha_predicted plotting table.
pub fn write_curve_csv(path: &Path, r: &SearchResult) -> Result<(), IoError> {
    let mut f = fs::File::create(path)?;
    writeln!(f, "lambda,alpha_hat,stderr,alpha_predicted")?;
    for p in &r.curve {
        writeln!(f, "{},{},{},{}", p.parameter, p.alpha_hat, p.stderr, p.alpha_tent)?;
    }
    Ok(())
}

pub fn write_normalized_stats_csv(path: &Path, rows: &[ScaleStats]) -> Result<(), IoError> {
    let mut f = fs::File::create(path)?;
    writeln!(f, "j,mean_p,max_norm,n_j")?;
    for r in rows {
        writeln!(f, "{},{},{},{}", r.j, r.mean_p, r.max_norm, r.n_j)?;
    }
    Ok(())
}
