//! Anisotropic multiresolution analysis: per-scale index sets, the
//! separable anisotropic discrete wavelet transform, and its inverse.
//!
//! The analyzing anisotropy is a diagonal matrix diag(lambda) with trace
//! d. At scale j, every axis r carries either the scaling branch (F) at
//! dyadic level floor((j-1) lambda_r) or a wavelet branch (M) at a level
//! in [floor((j-1) lambda_r), floor(j lambda_r)); the all-F combination
//! belongs to scale 0 only. Coefficients are stored in the convention
//! c = <f, 2^{Tr} Psi> where Tr is the sum of the per-axis levels, i.e.
//! 2^{Tr/2} times the orthonormal-basis coefficient.
//!
//! On a finite periodized grid the per-axis levels are clipped at the grid
//! resolution; clipped scales are flagged as closure branches. They
//! complete the transform (Parseval, perfect reconstruction) but are not
//! part of the mathematical per-scale index sets used for estimation.

use std::collections::HashMap;
use std::fmt;

use rayon::prelude::*;

use crate::grid::GridNd;

#[derive(Debug, Clone, PartialEq)]
pub enum WaveletError {
    /// Analysis anisotropy must be strictly positive with trace d.
    BadAnisotropy(String),
    /// Grid dims must be powers of two covering the deepest cascade.
    BadGrid(String),
    /// Unsupported filter order.
    BadFilterOrder(usize),
    /// Filter support exceeds a grid axis.
    FilterTooLong { support: usize, axis_len: usize },
    /// Reconstruction needs the complete coefficient ladder.
    IncompleteSet(String),
}

impl fmt::Display for WaveletError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::BadAnisotropy(m) | Self::BadGrid(m) | Self::IncompleteSet(m) => write!(f, "{m}"),
            Self::BadFilterOrder(o) => write!(f, "no filter table for order {o} (1..=6)"),
            Self::FilterTooLong { support, axis_len } => write!(
                f,
                "filter support {support} exceeds grid axis of length {axis_len}"
            ),
        }
    }
}

impl std::error::Error for WaveletError {}

/// Diagonal analysis anisotropy with trace d.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalAnisotropy {
    lambda: Vec<f64>,
}

impl DiagonalAnisotropy {
    pub fn new(lambda: &[f64]) -> Result<Self, WaveletError> {
        if lambda.is_empty() || lambda.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return Err(WaveletError::BadAnisotropy(format!(
                "anisotropy exponents must be positive, got {lambda:?}"
            )));
        }
        let d = lambda.len() as f64;
        let sum: f64 = lambda.iter().sum();
        if (sum - d).abs() > 1e-10 {
            return Err(WaveletError::BadAnisotropy(format!(
                "anisotropy exponents must sum to {d}, got {sum}"
            )));
        }
        Ok(Self {
            lambda: lambda.to_vec(),
        })
    }

    pub fn isotropic(d: usize) -> Self {
        Self {
            lambda: vec![1.0; d],
        }
    }

    /// Skips the trace normalization (rescaling experiments: diag(k l)
    /// analyses relate to diag(l) by an exact exponent rescaling).
    pub fn new_unnormalized(lambda: &[f64]) -> Result<Self, WaveletError> {
        if lambda.is_empty() || lambda.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return Err(WaveletError::BadAnisotropy(format!(
                "anisotropy exponents must be positive, got {lambda:?}"
            )));
        }
        Ok(Self {
            lambda: lambda.to_vec(),
        })
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn dim(&self) -> usize {
        self.lambda.len()
    }

    /// Dyadic level floor(j * lambda), with a snap window so that products
    /// like 5 * 1.2 that land within rounding of an integer floor to it.
    pub fn level(&self, axis: usize, j: u32) -> u32 {
        snapped_floor(f64::from(j) * self.lambda[axis])
    }
}

pub(crate) fn snapped_floor(x: f64) -> u32 {
    let r = x.round();
    if (x - r).abs() < 1e-9 {
        r as u32
    } else {
        x.floor() as u32
    }
}

/// Per-axis branch type: scaling (F) or wavelet (M).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BranchType {
    F,
    M,
}

impl BranchType {
    pub fn as_char(self) -> char {
        match self {
            Self::F => 'F',
            Self::M => 'M',
        }
    }
}

/// Full address of one coefficient.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WaveletIndex {
    pub j: u32,
    pub g: Vec<BranchType>,
    pub gamma: Vec<u32>,
    pub k: Vec<i64>,
}

impl WaveletIndex {
    /// Checks the structural constraints tying (j, G, gamma) together.
    pub fn is_valid(&self, aniso: &DiagonalAnisotropy) -> bool {
        if self.g.len() != aniso.dim() || self.gamma.len() != aniso.dim() {
            return false;
        }
        if self.j == 0 {
            return self.g.iter().all(|&g| g == BranchType::F)
                && self.gamma.iter().all(|&g| g == 0);
        }
        if self.g.iter().all(|&g| g == BranchType::F) {
            return false;
        }
        for r in 0..aniso.dim() {
            let lo = aniso.level(r, self.j - 1);
            let hi = aniso.level(r, self.j);
            match self.g[r] {
                BranchType::F => {
                    if self.gamma[r] != lo {
                        return false;
                    }
                }
                BranchType::M => {
                    if self.gamma[r] < lo || self.gamma[r] >= hi {
                        return false;
                    }
                }
            }
        }
        true
    }
}

/// Enumerates the mathematical per-scale index set for scale j: all
/// admissible (G, gamma) pairs, with no grid clipping.
pub fn build_index_set(
    aniso: &DiagonalAnisotropy,
    j: u32,
) -> Vec<(Vec<BranchType>, Vec<u32>)> {
    let d = aniso.dim();
    if j == 0 {
        return vec![(vec![BranchType::F; d], vec![0; d])];
    }
    let mut out = Vec::new();
    // Per axis: the F option at the previous level, or one M option per
    // level in [floor((j-1) lambda), floor(j lambda)).
    let mut options: Vec<Vec<(BranchType, u32)>> = Vec::with_capacity(d);
    for r in 0..d {
        let lo = aniso.level(r, j - 1);
        let hi = aniso.level(r, j);
        let mut axis_opts = vec![(BranchType::F, lo)];
        for level in lo..hi {
            axis_opts.push((BranchType::M, level));
        }
        options.push(axis_opts);
    }
    let mut pick = vec![0usize; d];
    'outer: loop {
        let g: Vec<BranchType> = (0..d).map(|r| options[r][pick[r]].0).collect();
        if g.iter().any(|&b| b == BranchType::M) {
            let gamma: Vec<u32> = (0..d).map(|r| options[r][pick[r]].1).collect();
            out.push((g, gamma));
        }
        let mut r = d;
        loop {
            if r == 0 {
                break 'outer;
            }
            r -= 1;
            pick[r] += 1;
            if pick[r] < options[r].len() {
                break;
            }
            pick[r] = 0;
        }
    }
    out
}

/// Orthonormal Daubechies filter bank; `order` = vanishing moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Filters {
    pub order: usize,
    /// Scaling (low-pass) filter, sum = sqrt(2).
    pub lo: Vec<f64>,
    /// Wavelet (high-pass) filter, quadrature mirror of `lo`.
    pub hi: Vec<f64>,
}

impl Filters {
    pub fn daubechies(order: usize) -> Result<Self, WaveletError> {
        let lo: Vec<f64> = match order {
            1 => vec![std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2],
            2 => vec![
                0.48296291314453414337,
                0.83651630373780790558,
                0.22414386804201338103,
                -0.12940952255126038117,
            ],
            3 => vec![
                0.332670552950082616,
                0.80689150931109257649,
                0.4598775021184915701,
                -0.1350110200102545887,
                -0.085441273882026661693,
                0.035226291885709536603,
            ],
            4 => vec![
                0.23037781330889650086,
                0.71484657055291564709,
                0.63088076792985890788,
                -0.027983769416859854211,
                -0.18703481171909308408,
                0.030841381835560763627,
                0.032883011666885199735,
                -0.010597401785069032105,
            ],
            5 => vec![
                0.16010239797419291448,
                0.60382926979718967054,
                0.72430852843777292773,
                0.13842814590132073151,
                -0.24229488706638203186,
                -0.032244869584638374648,
                0.077571493840045713523,
                -0.0062414902127982742742,
                -0.012580751999081999469,
                0.003335725285473771278,
            ],
            6 => vec![
                0.11154074335010946362,
                0.49462389039845308568,
                0.75113390802109535068,
                0.31525035170919762909,
                -0.22626469396543982008,
                -0.12976686756726193556,
                0.097501605587323049102,
                0.027522865530305728626,
                -0.031582039317486029565,
                0.00055384220116149613925,
                0.0047772575109455106396,
                -0.0010773010853084795649,
            ],
            _ => return Err(WaveletError::BadFilterOrder(order)),
        };
        let n = lo.len();
        let hi: Vec<f64> = (0..n)
            .map(|k| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                sign * lo[n - 1 - k]
            })
            .collect();
        Ok(Self { order, lo, hi })
    }

    /// Test hook: corrupts one low-pass tap, breaking orthonormality.
    pub fn with_flipped_tap(mut self) -> Self {
        self.lo[0] = -self.lo[0];
        self
    }

    pub fn support(&self) -> usize {
        self.lo.len()
    }
}

/// Coefficients of one (j, G, gamma) branch over its spatial grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchData {
    pub j: u32,
    pub g: Vec<BranchType>,
    pub gamma: Vec<u32>,
    /// True when the whole scale j is unclipped on this grid, i.e. the
    /// branch belongs to the mathematical index set I^j.
    pub canonical: bool,
    /// Stored values <f, 2^{Tr} Psi_k>, indexed by k over the branch grid
    /// of extent 2^{gamma_r} per axis.
    pub values: GridNd,
}

impl BranchData {
    pub fn trace(&self) -> u32 {
        self.gamma.iter().sum()
    }

    pub fn g_code(&self) -> String {
        self.g.iter().map(|b| b.as_char()).collect()
    }

    /// Per-axis count of positions whose atom support stays inside the
    /// period. Coefficients beyond these counts wrap around the torus;
    /// when the synthesized field carries sub-fundamental frequencies the
    /// wrap-crossing atoms see a seam and are not exchangeable with the
    /// interior ones.
    pub fn interior_counts(&self, grid_dims: &[usize], filter_len: usize) -> Vec<usize> {
        self.gamma
            .iter()
            .enumerate()
            .map(|(r, &g)| {
                let n = grid_dims[r];
                let depth = n.trailing_zeros() - g;
                let stride = 1usize << depth;
                let span = (stride - 1) * (filter_len - 1) + 1;
                if span > n {
                    return 0;
                }
                (n - span) / stride + 1
            })
            .collect()
    }
}

/// The complete transform of one grid: every branch of the (possibly
/// clipped) ladder, ordered by (j, G, gamma).
#[derive(Debug, Clone)]
pub struct WaveletCoefficientSet {
    pub anisotropy: DiagonalAnisotropy,
    pub filter_order: usize,
    pub grid_dims: Vec<usize>,
    branches: Vec<BranchData>,
}

impl WaveletCoefficientSet {
    pub fn branches(&self) -> &[BranchData] {
        &self.branches
    }

    pub fn branch_mut(&mut self, index: usize) -> &mut BranchData {
        &mut self.branches[index]
    }

    pub fn branches_at(&self, j: u32) -> impl Iterator<Item = &BranchData> {
        self.branches.iter().filter(move |b| b.j == j)
    }

    /// Scales that are fully unclipped on this grid (usable for
    /// estimation).
    pub fn max_canonical_scale(&self) -> u32 {
        self.branches
            .iter()
            .filter(|b| b.canonical && b.j > 0)
            .map(|b| b.j)
            .max()
            .unwrap_or(0)
    }

    pub fn max_scale(&self) -> u32 {
        self.branches.iter().map(|b| b.j).max().unwrap_or(0)
    }

    /// Looks up one stored coefficient; k is taken on the branch torus.
    pub fn coefficient(&self, idx: &WaveletIndex) -> Option<f64> {
        let b = self
            .branches
            .iter()
            .find(|b| b.j == idx.j && b.g == idx.g && b.gamma == idx.gamma)?;
        let dims = b.values.dims();
        let mut pos = Vec::with_capacity(dims.len());
        for (r, &k) in idx.k.iter().enumerate() {
            let n = dims[r] as i64;
            pos.push(k.rem_euclid(n) as usize);
        }
        Some(b.values.get(&pos))
    }

    /// Total number of stored coefficients.
    pub fn len(&self) -> usize {
        self.branches.iter().map(|b| b.values.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }
}

/// One periodized analysis step along `axis`: returns (approx, detail),
/// each of half the extent along that axis.
fn analysis_step(input: &GridNd, axis: usize, filters: &Filters) -> (GridNd, GridNd) {
    let mut dims_out = input.dims().to_vec();
    let len = dims_out[axis];
    let half = len / 2;
    dims_out[axis] = half;
    let mut approx = GridNd::zeros(&dims_out);
    let mut detail = GridNd::zeros(&dims_out);
    let mut line = vec![0.0; len];
    let mut a_line = vec![0.0; half];
    let mut d_line = vec![0.0; half];
    for li in 0..input.line_count(axis) {
        input.gather_line(axis, li, &mut line);
        for i in 0..half {
            let mut a = 0.0;
            let mut dv = 0.0;
            for (k, (&h, &g)) in filters.lo.iter().zip(&filters.hi).enumerate() {
                let s = line[(2 * i + k) % len];
                a += h * s;
                dv += g * s;
            }
            a_line[i] = a;
            d_line[i] = dv;
        }
        approx.scatter_line(axis, li, &a_line);
        detail.scatter_line(axis, li, &d_line);
    }
    (approx, detail)
}

/// Adjoint of `analysis_step`: merges (approx, detail) back to the full
/// extent along `axis`.
fn synthesis_step(approx: &GridNd, detail: &GridNd, axis: usize, filters: &Filters) -> GridNd {
    let mut dims_out = approx.dims().to_vec();
    let half = dims_out[axis];
    let len = half * 2;
    dims_out[axis] = len;
    let mut out = GridNd::zeros(&dims_out);
    let mut a_line = vec![0.0; half];
    let mut d_line = vec![0.0; half];
    let mut line = vec![0.0; len];
    for li in 0..approx.line_count(axis) {
        approx.gather_line(axis, li, &mut a_line);
        detail.gather_line(axis, li, &mut d_line);
        line.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..half {
            let a = a_line[i];
            let dv = d_line[i];
            for (k, (&h, &g)) in filters.lo.iter().zip(&filters.hi).enumerate() {
                line[(2 * i + k) % len] += h * a + g * dv;
            }
        }
        out.scatter_line(axis, li, &line);
    }
    out
}

/// Per-axis 1-D detail coefficients of every line of the grid along
/// `axis`, by dyadic level (coarse levels first). Level t holds the
/// orthonormal detail coefficients of the periodized cascade with atoms of
/// extent ~2^{-t} of the axis; sample-unit normalization (no cell-volume
/// factor).
pub fn axis_detail_levels(
    grid: &GridNd,
    axis: usize,
    filter_order: usize,
) -> Result<Vec<(u32, Vec<f64>)>, WaveletError> {
    let filters = Filters::daubechies(filter_order)?;
    let n = grid.dims()[axis];
    if n < 2 || !n.is_power_of_two() {
        return Err(WaveletError::BadGrid(format!(
            "axis length must be a power of two >= 2, got {n}"
        )));
    }
    if filters.support() > n {
        return Err(WaveletError::FilterTooLong {
            support: filters.support(),
            axis_len: n,
        });
    }
    let levels = n.trailing_zeros();
    let mut out: Vec<(u32, Vec<f64>)> = (0..levels).map(|t| (t, Vec::new())).collect();
    let mut line = vec![0.0; n];
    for li in 0..grid.line_count(axis) {
        grid.gather_line(axis, li, &mut line);
        let mut approx = line.clone();
        for t in (0..levels).rev() {
            let len = approx.len();
            let half = len / 2;
            let mut next = vec![0.0; half];
            let mut detail = vec![0.0; half];
            for i in 0..half {
                let mut a = 0.0;
                let mut dv = 0.0;
                for (k, (&h, &g)) in filters.lo.iter().zip(&filters.hi).enumerate() {
                    let s = approx[(2 * i + k) % len];
                    a += h * s;
                    dv += g * s;
                }
                next[i] = a;
                detail[i] = dv;
            }
            out[t as usize].1.extend_from_slice(&detail);
            approx = next;
        }
    }
    Ok(out)
}

/// Grid-ladder levels: per-axis dyadic level of scale j clipped at the
/// grid resolution.
fn ladder_levels(aniso: &DiagonalAnisotropy, j_levels: &[u32], j: u32) -> Vec<u32> {
    (0..aniso.dim())
        .map(|r| aniso.level(r, j).min(j_levels[r]))
        .collect()
}

/// Branch descriptors for scale j of the grid ladder, plus the canonical
/// flag (true when no clipping is active at j).
fn ladder_scale(
    aniso: &DiagonalAnisotropy,
    grid_levels: &[u32],
    j: u32,
) -> (Vec<(Vec<BranchType>, Vec<u32>)>, bool) {
    let d = aniso.dim();
    if j == 0 {
        return (vec![(vec![BranchType::F; d], vec![0; d])], true);
    }
    let canonical = (0..d).all(|r| aniso.level(r, j) <= grid_levels[r]);
    let lo = ladder_levels(aniso, grid_levels, j - 1);
    let hi = ladder_levels(aniso, grid_levels, j);
    let mut options: Vec<Vec<(BranchType, u32)>> = Vec::with_capacity(d);
    for r in 0..d {
        let mut axis_opts = vec![(BranchType::F, lo[r])];
        for level in lo[r]..hi[r] {
            axis_opts.push((BranchType::M, level));
        }
        options.push(axis_opts);
    }
    let mut out = Vec::new();
    let mut pick = vec![0usize; d];
    'outer: loop {
        let g: Vec<BranchType> = (0..d).map(|r| options[r][pick[r]].0).collect();
        if g.iter().any(|&b| b == BranchType::M) {
            let gamma: Vec<u32> = (0..d).map(|r| options[r][pick[r]].1).collect();
            out.push((g, gamma));
        }
        let mut r = d;
        loop {
            if r == 0 {
                break 'outer;
            }
            r -= 1;
            pick[r] += 1;
            if pick[r] < options[r].len() {
                break;
            }
            pick[r] = 0;
        }
    }
    (out, canonical)
}

fn grid_levels_of(dims: &[usize]) -> Result<Vec<u32>, WaveletError> {
    dims.iter()
        .map(|&n| {
            if n < 2 || !n.is_power_of_two() {
                Err(WaveletError::BadGrid(format!(
                    "grid axes must be powers of two >= 2 (full dyadic cascade), got {n}"
                )))
            } else {
                Ok(n.trailing_zeros())
            }
        })
        .collect()
}

/// Scale at which the clipped ladder has absorbed the whole grid.
fn ladder_end(aniso: &DiagonalAnisotropy, grid_levels: &[u32]) -> u32 {
    let mut j = 0;
    loop {
        let levels = ladder_levels(aniso, grid_levels, j);
        if levels == grid_levels {
            return j;
        }
        j += 1;
        assert!(j < 10_000, "ladder does not terminate");
    }
}

/// Cache of approximation tensors keyed by per-axis levels.
struct ApproxCascade<'a> {
    filters: &'a Filters,
    grid_levels: Vec<u32>,
    cache: HashMap<Vec<u32>, GridNd>,
}

impl<'a> ApproxCascade<'a> {
    fn new(fine: GridNd, grid_levels: Vec<u32>, filters: &'a Filters) -> Self {
        let mut cache = HashMap::new();
        cache.insert(grid_levels.clone(), fine);
        Self {
            filters,
            grid_levels,
            cache,
        }
    }

    /// Approximation tensor at the given per-axis levels (levels[r] <=
    /// grid level r), computed by cascading low-pass steps and cached.
    fn approx(&mut self, levels: &[u32]) -> GridNd {
        if let Some(g) = self.cache.get(levels) {
            return g.clone();
        }
        let axis = (0..levels.len())
            .find(|&r| levels[r] < self.grid_levels[r])
            .expect("levels below grid");
        let mut parent = levels.to_vec();
        parent[axis] += 1;
        let parent_grid = self.approx(&parent);
        let (approx, _) = analysis_step(&parent_grid, axis, self.filters);
        self.cache.insert(levels.to_vec(), approx.clone());
        approx
    }
}

/// Separable anisotropic wavelet transform of a periodized grid.
///
/// Scales are enumerated along the grid ladder until the grid is fully
/// absorbed; `j_max` truncates the enumeration earlier (such a truncated
/// set is valid for estimation but cannot be reconstructed). The grid
/// values are read in the unit-torus convention: the stored coefficient
/// approximates <f, 2^{Tr} Psi> under the cell-volume-weighted inner
/// product.
pub fn anisotropic_wavelet_transform(
    grid: &GridNd,
    aniso: &DiagonalAnisotropy,
    j_max: u32,
    filter_order: usize,
) -> Result<WaveletCoefficientSet, WaveletError> {
    let filters = Filters::daubechies(filter_order)?;
    anisotropic_wavelet_transform_with_filters(grid, aniso, j_max, &filters)
}

/// Transform with an explicit filter bank (test hook for fault injection).
pub fn anisotropic_wavelet_transform_with_filters(
    grid: &GridNd,
    aniso: &DiagonalAnisotropy,
    j_max: u32,
    filters: &Filters,
) -> Result<WaveletCoefficientSet, WaveletError> {
    if grid.ndim() != aniso.dim() {
        return Err(WaveletError::BadGrid(format!(
            "grid has {} axes, anisotropy {}",
            grid.ndim(),
            aniso.dim()
        )));
    }
    let grid_levels = grid_levels_of(grid.dims())?;
    for &n in grid.dims() {
        if filters.support() > n {
            return Err(WaveletError::FilterTooLong {
                support: filters.support(),
                axis_len: n,
            });
        }
    }
    // Unit-torus convention: samples become fine-level orthonormal
    // scaling coefficients after the cell-volume normalization.
    let vol_sqrt = grid
        .dims()
        .iter()
        .map(|&n| (n as f64).sqrt())
        .product::<f64>()
        .recip();
    let mut fine = grid.clone();
    fine.scale(vol_sqrt);
    let mut cascade = ApproxCascade::new(fine, grid_levels.clone(), filters);
    let j_end = ladder_end(aniso, &grid_levels).min(j_max);

    // Walk the ladder coarse-to-fine, materializing every branch. The
    // cascade cache is built serially; per-branch detail steps then run in
    // parallel.
    let mut descriptors: Vec<(u32, Vec<BranchType>, Vec<u32>, bool)> = Vec::new();
    for j in 0..=j_end {
        let (branches, canonical) = ladder_scale(aniso, &grid_levels, j);
        for (g, gamma) in branches {
            descriptors.push((j, g, gamma, canonical));
        }
    }
    // Prime the cache with every approx tensor the branches need.
    for (_, g, gamma, _) in &descriptors {
        let levels: Vec<u32> = gamma
            .iter()
            .zip(g)
            .map(|(&gm, &b)| gm + u32::from(b == BranchType::M))
            .collect();
        cascade.approx(&levels);
    }
    let cache = cascade.cache;
    let branches: Vec<BranchData> = descriptors
        .into_par_iter()
        .map(|(j, g, gamma, canonical)| {
            let levels: Vec<u32> = gamma
                .iter()
                .zip(&g)
                .map(|(&gm, &b)| gm + u32::from(b == BranchType::M))
                .collect();
            let mut tensor = cache.get(&levels).expect("cache primed").clone();
            for (r, &b) in g.iter().enumerate() {
                if b == BranchType::M {
                    let (_, detail) = analysis_step(&tensor, r, filters);
                    tensor = detail;
                }
            }
            // Stored normalization: 2^{Tr/2} times the orthonormal value.
            let tr: u32 = gamma.iter().sum();
            tensor.scale(2f64.powf(f64::from(tr) / 2.0));
            BranchData {
                j,
                g,
                gamma,
                canonical,
                values: tensor,
            }
        })
        .collect();
    Ok(WaveletCoefficientSet {
        anisotropy: aniso.clone(),
        filter_order: filters.order,
        grid_dims: grid.dims().to_vec(),
        branches,
    })
}

/// Inverse of the anisotropic transform: rebuilds the sample grid from a
/// complete coefficient ladder.
pub fn reconstruct(
    coeffs: &WaveletCoefficientSet,
    dims: &[usize],
) -> Result<GridNd, WaveletError> {
    if dims != coeffs.grid_dims.as_slice() {
        return Err(WaveletError::BadGrid(format!(
            "requested dims {:?} do not match the transform's {:?}",
            dims, coeffs.grid_dims
        )));
    }
    let aniso = &coeffs.anisotropy;
    let d = aniso.dim();
    let filters = Filters::daubechies(coeffs.filter_order)?;
    let grid_levels = grid_levels_of(dims)?;
    let j_end = ladder_end(aniso, &grid_levels);

    // Index branches by (j, G, gamma) with orthonormal scaling restored.
    let mut by_key: HashMap<(u32, Vec<BranchType>, Vec<u32>), GridNd> = HashMap::new();
    for b in &coeffs.branches {
        let mut v = b.values.clone();
        v.scale(2f64.powf(-f64::from(b.trace()) / 2.0));
        by_key.insert((b.j, b.g.clone(), b.gamma.clone()), v);
    }
    let take = |map: &mut HashMap<(u32, Vec<BranchType>, Vec<u32>), GridNd>,
                j: u32,
                g: &[BranchType],
                gamma: &[u32]|
     -> Result<GridNd, WaveletError> {
        map.remove(&(j, g.to_vec(), gamma.to_vec())).ok_or_else(|| {
            WaveletError::IncompleteSet(format!(
                "missing branch j={j} G={} gamma={gamma:?}",
                g.iter().map(|b| b.as_char()).collect::<String>()
            ))
        })
    };

    let mut current = take(
        &mut by_key,
        0,
        &vec![BranchType::F; d],
        &vec![0u32; d],
    )?;
    for j in 1..=j_end {
        let lo = ladder_levels(aniso, &grid_levels, j - 1);
        let hi = ladder_levels(aniso, &grid_levels, j);
        let (scale_branches, _) = ladder_scale(aniso, &grid_levels, j);
        // Pieces of the scale, keyed by per-axis (is_wavelet, level).
        let mut pieces: HashMap<Vec<(BranchType, u32)>, GridNd> = HashMap::new();
        pieces.insert(
            lo.iter().map(|&l| (BranchType::F, l)).collect(),
            current,
        );
        for (g, gamma) in &scale_branches {
            let tensor = take(&mut by_key, j, g, gamma)?;
            let key: Vec<(BranchType, u32)> =
                g.iter().copied().zip(gamma.iter().copied()).collect();
            pieces.insert(key, tensor);
        }
        // Merge axis by axis: combine the F piece with the M pieces at
        // each level, lifting every group to the next scale's level.
        for axis in 0..d {
            let mut merged: HashMap<Vec<(BranchType, u32)>, GridNd> = HashMap::new();
            // Group keys by the signature of the other axes.
            let mut groups: HashMap<Vec<(BranchType, u32)>, Vec<Vec<(BranchType, u32)>>> =
                HashMap::new();
            for key in pieces.keys() {
                let mut sig = key.clone();
                sig.remove(axis);
                groups.entry(sig).or_default().push(key.clone());
            }
            for (sig, keys) in groups {
                // The F piece at the base level plus details at levels
                // lo[axis]..hi[axis] synthesize the F piece at hi[axis].
                let f_key: Vec<(BranchType, u32)> = {
                    let mut k = sig.clone();
                    k.insert(axis, (BranchType::F, lo[axis]));
                    k
                };
                let mut acc = pieces
                    .get(&f_key)
                    .cloned()
                    .expect("scale pieces cover the F branch");
                for level in lo[axis]..hi[axis] {
                    let m_key: Vec<(BranchType, u32)> = {
                        let mut k = sig.clone();
                        k.insert(axis, (BranchType::M, level));
                        k
                    };
                    let detail = pieces
                        .get(&m_key)
                        .cloned()
                        .expect("scale pieces cover every detail level");
                    acc = synthesis_step(&acc, &detail, axis, &filters);
                }
                let mut out_key = sig.clone();
                out_key.insert(axis, (BranchType::F, hi[axis]));
                debug_assert_eq!(keys.len(), 1 + (hi[axis] - lo[axis]) as usize);
                merged.insert(out_key, acc);
            }
            pieces = merged;
        }
        debug_assert_eq!(pieces.len(), 1);
        current = pieces
            .into_values()
            .next()
            .expect("merged scale yields one tensor");
    }
    // Undo the unit-torus sample normalization.
    let vol_sqrt = dims
        .iter()
        .map(|&n| (n as f64).sqrt())
        .product::<f64>()
        .recip();
    current.scale(1.0 / vol_sqrt);
    Ok(current)
}
