//! Spectral synthesis of operator-scaling Gaussian random fields and
//! statistical checks of their scaling law.
//!
//! A realization is a Riemann-sum discretization of the harmonizable
//! representation: complex circular Gaussian weights on a frequency
//! lattice, Hermitian-symmetrized so the field is real, with amplitude
//! sqrt(cell volume) * rho(xi)^(-H0 - Tr(E0)/2). The kernel
//! (e^{i<x,xi>} - 1) pins X(0) = 0 exactly. The origin cell of the lattice
//! is replaced by dyadic annular refinement rings: the spectral density
//! blows up at 0 and a plain lattice biases the low frequencies.
//!
//! Randomness is counter-based per (seed, replicate, cell), so replicates
//! are bit-identical regardless of evaluation order or thread count.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::grid::GridNd;
use crate::linalg::{AnisotropyMatrix, LinalgError};
use crate::pseudonorm::{PseudoNorm, PseudoNormError};
use crate::rng::CounterRng;
use crate::stats;

type C64 = Complex<f64>;

/// Cells per hole half-width when discretizing a refinement ring.
const RING_RESOLUTION: i64 = 4;

/// Spectral folding radius: the sampled field cannot distinguish a
/// frequency from its aliases, so the out-of-band spectrum at
/// xi + 2 pi j / dx, |j|_inf <= FOLD_RADIUS, is folded into each cell.
/// Without folding the increment variance at small lags is systematically
/// short of the scaling law.
const FOLD_RADIUS: i64 = 2;

/// Cells within this many lattice steps of a coordinate hyperplane get an
/// in-cell average of the spectral density instead of the midpoint value:
/// pseudo-norms of the power-sum family are not smooth across the axes and
/// the midpoint rule is biased there.
const RIDGE_HALO: i64 = 2;

/// Sub-divisions per axis for in-cell density averaging.
const SUBCELLS: usize = 5;

/// Sub-masses per coordinate-plane cell along its degenerate axis. Cells
/// with k_r = 0 hold spectral mass exactly where the increment filter
/// 2 - 2cos(h_r xi_r) vanishes; leaving it at the midpoint starves the
/// variogram along axis r at large lags.
const PLANE_SPLIT: usize = 4;

/// Stream labels separating the main-lattice draws from the ring and
/// plane draws.
const STREAM_MAIN: u64 = 0;
const STREAM_RING: u64 = 1;
const STREAM_PLANE: u64 = 2;

#[derive(Debug, Clone, PartialEq)]
pub enum SynthesisError {
    /// Existence condition violated: H0 must lie in (0, rho_min(E0)).
    InvalidHurst { h0: f64, rho_min: f64 },
    /// The anisotropy must be normalized to Tr(E0) = d.
    TraceNotNormalized { trace: f64, d: usize },
    /// The pseudo-norm homogeneity must equal the transpose of E0.
    HomogeneityMismatch { max_diff: f64 },
    /// Frequency lattice does not cover the grid's Nyquist band.
    LatticeTooSmall { lattice: usize, grid: usize },
    /// Grid geometry is inconsistent (dims/spacings/dimension).
    BadGeometry(String),
    /// Variogram requested at a displacement that is not on the grid.
    OffGridLag(Vec<f64>),
    /// Too few realizations, or realizations from different specs.
    BadRealizations(String),
    Pseudo(PseudoNormError),
    Linalg(LinalgError),
}

impl fmt::Display for SynthesisError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::InvalidHurst { h0, rho_min } => write!(
                f,
                "field exists only for H0 in (0, rho_min(E0)) = (0, {rho_min}), got {h0}"
            ),
            Self::TraceNotNormalized { trace, d } => {
                write!(f, "anisotropy must have trace {d}, got {trace}")
            }
            Self::HomogeneityMismatch { max_diff } => write!(
                f,
                "pseudo-norm homogeneity must equal E0 transposed (max diff {max_diff})"
            ),
            Self::LatticeTooSmall { lattice, grid } => write!(
                f,
                "frequency lattice ({lattice} per axis) smaller than grid ({grid}): Nyquist band not covered"
            ),
            Self::BadGeometry(msg) => write!(f, "{msg}"),
            Self::OffGridLag(h) => write!(f, "lag {h:?} is not on the sample grid"),
            Self::BadRealizations(msg) => write!(f, "{msg}"),
            Self::Pseudo(e) => write!(f, "{e}"),
            Self::Linalg(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for SynthesisError {}

impl From<PseudoNormError> for SynthesisError {
    fn from(e: PseudoNormError) -> Self {
        Self::Pseudo(e)
    }
}

impl From<LinalgError> for SynthesisError {
    fn from(e: LinalgError) -> Self {
        Self::Linalg(e)
    }
}

/// Sample-grid geometry: points x = m .* dx for m in [0, n) per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct GridGeometry {
    pub n: Vec<usize>,
    pub dx: Vec<f64>,
}

/// Frequency discretization: a uniform lattice of `lattice_n` cells per
/// axis over the Nyquist band plus `refine_rings` dyadic rings replacing
/// the origin cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpectralSettings {
    pub lattice_n: usize,
    pub refine_rings: usize,
}

impl Default for SpectralSettings {
    fn default() -> Self {
        Self {
            lattice_n: 256,
            refine_rings: 8,
        }
    }
}

/// Full description of a synthesizable field: anisotropy, Hurst index,
/// pseudo-norm, grid, spectral discretization and seed.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSpec {
    pub e0: AnisotropyMatrix,
    pub h0: f64,
    pub rho: PseudoNorm,
    pub grid: GridGeometry,
    pub spectral: SpectralSettings,
    pub seed: u64,
}

impl FieldSpec {
    pub fn validate(&self) -> Result<(), SynthesisError> {
        let d = self.e0.dim();
        if self.grid.n.len() != d || self.grid.dx.len() != d || self.rho.dim() != d {
            return Err(SynthesisError::BadGeometry(format!(
                "dimension mismatch: anisotropy is {d}-dimensional, grid has {} axes, pseudo-norm {}",
                self.grid.n.len(),
                self.rho.dim()
            )));
        }
        if self.grid.n.iter().any(|&n| n < 2) || self.grid.dx.iter().any(|&s| !(s > 0.0)) {
            return Err(SynthesisError::BadGeometry(
                "grid needs n >= 2 and dx > 0 per axis".into(),
            ));
        }
        let trace = self.e0.trace();
        if (trace - d as f64).abs() > 1e-10 {
            return Err(SynthesisError::TraceNotNormalized { trace, d });
        }
        if !(self.h0 > 0.0 && self.h0 < self.e0.rho_min()) {
            return Err(SynthesisError::InvalidHurst {
                h0: self.h0,
                rho_min: self.e0.rho_min(),
            });
        }
        let et = self.e0.transpose();
        let diff = crate::linalg::max_abs_diff(self.rho.homogeneity().entries(), et.entries());
        if diff > 1e-10 {
            return Err(SynthesisError::HomogeneityMismatch { max_diff: diff });
        }
        let max_grid = *self.grid.n.iter().max().unwrap();
        if self.spectral.lattice_n < max_grid {
            return Err(SynthesisError::LatticeTooSmall {
                lattice: self.spectral.lattice_n,
                grid: max_grid,
            });
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.e0.dim()
    }
}

/// One synthesized grid realization.
#[derive(Debug, Clone)]
pub struct FieldRealization {
    pub values: GridNd,
    pub spec: Arc<FieldSpec>,
    pub replicate: u32,
}

/// One spectral cell of the discretization (refinement rings only; the
/// main lattice is kept implicit in FFT order).
#[derive(Debug, Clone)]
struct RingCell {
    freq: Vec<f64>,
    weight: f64,
    stream_id: u64,
}

/// Cells of one coordinate plane k_axis = 0, split into PLANE_SPLIT
/// sub-masses at off-plane frequencies. Cells with two or more zero
/// components (d >= 3 only) stay in this slab at their in-plane position;
/// their codimension-2 measure makes the residual placement error
/// negligible at the tested scales.
struct PlaneSlab {
    axis: usize,
    /// Frequencies of the sub-masses along the degenerate axis.
    offsets: Vec<f64>,
    /// Lattice dims of the remaining axes, in axis order.
    inplane_dims: Vec<usize>,
    /// weights[s][inplane_flat]; in-plane index 0 (the lattice origin
    /// column) belongs to the refinement rings and carries weight 0.
    weights: Vec<Vec<f64>>,
}

/// Precomputed, replicate-independent synthesis state: spectral weights
/// for the main lattice, plane slabs, ring cells, and phase tables.
pub struct SynthesisPlan {
    spec: Arc<FieldSpec>,
    /// Main-lattice weight per FFT index, symmetrized so that an index and
    /// its Hermitian mirror carry the same weight. Zero on coordinate
    /// planes (handled by `planes`) and at the origin (handled by rings).
    weights: Vec<f64>,
    lattice_dims: Vec<usize>,
    planes: Vec<PlaneSlab>,
    /// Ring cells in the canonical half-space (each also stands for its
    /// mirror cell).
    ring_cells: Vec<RingCell>,
    /// ring_phase[cell][axis][m] = exp(i m dx_axis freq_axis).
    ring_phase: Vec<Vec<Vec<C64>>>,
    /// plane_phase[plane][s][m] = exp(i m dx_axis offset_s).
    plane_phase: Vec<Vec<Vec<C64>>>,
}

fn mirror_index(idx: &[usize], dims: &[usize]) -> Vec<usize> {
    idx.iter()
        .zip(dims)
        .map(|(&t, &n)| if t == 0 { 0 } else { n - t })
        .collect()
}

fn signed_freq_steps(idx: &[usize], dims: &[usize]) -> Vec<i64> {
    idx.iter()
        .zip(dims)
        .map(|(&t, &n)| {
            if t < n / 2 {
                t as i64
            } else {
                t as i64 - n as i64
            }
        })
        .collect()
}

impl SynthesisPlan {
    pub fn new(spec: Arc<FieldSpec>) -> Result<Self, SynthesisError> {
        spec.validate()?;
        let d = spec.dim();
        let nl = spec.spectral.lattice_n;
        let lattice_dims = vec![nl; d];
        let dxi: Vec<f64> = spec
            .grid
            .dx
            .iter()
            .map(|&dx| 2.0 * std::f64::consts::PI / (nl as f64 * dx))
            .collect();
        let cell_vol: f64 = dxi.iter().product();
        let density_exp = -2.0 * spec.h0 - spec.e0.trace();
        let period: Vec<f64> = spec
            .grid
            .dx
            .iter()
            .map(|&dx| 2.0 * std::f64::consts::PI / dx)
            .collect();
        // Main lattice weights, indexed in FFT order. The weight of an
        // index and of its mirror must agree for the field to be real;
        // both pseudo-norm families are even so evaluating at the
        // canonical representative's frequency is enough.
        let total: usize = lattice_dims.iter().product();
        let probe = GridNd::zeros(&lattice_dims);
        let weights: Vec<f64> = (0..total)
            .into_par_iter()
            .map(|flat| {
                let idx = unflatten(flat, &lattice_dims);
                let mir = mirror_index(&idx, &lattice_dims);
                let canon_flat = probe.flat_index(&idx).min(probe.flat_index(&mir));
                let canon = unflatten(canon_flat, &lattice_dims);
                let steps = signed_freq_steps(&canon, &lattice_dims);
                // Origin and coordinate-plane cells are carried by the
                // rings and plane slabs instead.
                if steps.iter().any(|&s| s == 0) {
                    return 0.0;
                }
                let xi: Vec<f64> = steps
                    .iter()
                    .zip(&dxi)
                    .map(|(&s, &dz)| s as f64 * dz)
                    .collect();
                let ridge = steps.iter().any(|&s| s.abs() <= RIDGE_HALO);
                let density = cell_density(&spec.rho, density_exp, &xi, &dxi, &period, ridge);
                (cell_vol * density).sqrt()
            })
            .collect();
        // Coordinate-plane slabs: cells with k_axis = 0 split into
        // PLANE_SPLIT sub-masses across the cell width. A cell with
        // several zero components belongs to the slab of its first zero
        // axis.
        let mut planes = Vec::with_capacity(d);
        for axis in 0..d {
            let inplane_dims: Vec<usize> = (0..d).filter(|&a| a != axis).map(|a| lattice_dims[a]).collect();
            let inplane_axes: Vec<usize> = (0..d).filter(|&a| a != axis).collect();
            let inplane_total: usize = inplane_dims.iter().product();
            let offsets: Vec<f64> = (0..PLANE_SPLIT)
                .map(|s| ((s as f64 + 0.5) / PLANE_SPLIT as f64 - 0.5) * dxi[axis])
                .collect();
            let sub_vol = cell_vol / PLANE_SPLIT as f64;
            let mut sub_cell = dxi.clone();
            sub_cell[axis] /= PLANE_SPLIT as f64;
            let weights: Vec<Vec<f64>> = (0..PLANE_SPLIT)
                .map(|s| {
                    (0..inplane_total)
                        .into_par_iter()
                        .map(|flat| {
                            let idx = unflatten(flat, &inplane_dims);
                            let steps = signed_freq_steps(&idx, &inplane_dims);
                            // Origin column is the rings'; earlier-axis
                            // zeros belong to an earlier slab.
                            if steps.iter().all(|&v| v == 0) {
                                return 0.0;
                            }
                            if steps
                                .iter()
                                .enumerate()
                                .any(|(i, &v)| v == 0 && inplane_axes[i] < axis)
                            {
                                return 0.0;
                            }
                            let mut center = vec![0.0; d];
                            for (i, &a) in inplane_axes.iter().enumerate() {
                                center[a] = steps[i] as f64 * dxi[a];
                            }
                            center[axis] = offsets[s];
                            let density = cell_density(
                                &spec.rho,
                                density_exp,
                                &center,
                                &sub_cell,
                                &period,
                                true,
                            );
                            (sub_vol * density).sqrt()
                        })
                        .collect()
                })
                .collect();
            planes.push(PlaneSlab {
                axis,
                offsets,
                inplane_dims,
                weights,
            });
        }
        let plane_phase: Vec<Vec<Vec<C64>>> = planes
            .iter()
            .map(|slab| {
                slab.offsets
                    .iter()
                    .map(|&delta| {
                        let step = spec.grid.dx[slab.axis] * delta;
                        (0..spec.grid.n[slab.axis])
                            .map(|m| C64::from_polar(1.0, m as f64 * step))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        // Refinement rings inside the origin cell.
        let mut ring_cells = Vec::new();
        let res = RING_RESOLUTION;
        for ring in 1..=spec.spectral.refine_rings {
            // Outer half-width of this ring, per axis.
            let outer: Vec<f64> = dxi.iter().map(|&dz| dz / 2.0 * 0.5f64.powi(ring as i32 - 1)).collect();
            let cell: Vec<f64> = outer.iter().map(|&h| h / res as f64).collect();
            let ring_vol: f64 = cell.iter().product();
            let mut offsets = vec![-res; d];
            'cells: loop {
                let inside_hole = offsets
                    .iter()
                    .all(|&i| i >= -res / 2 && i < res / 2);
                if !inside_hole {
                    let mirror: Vec<i64> = offsets.iter().map(|&i| -i - 1).collect();
                    if offsets.as_slice() < mirror.as_slice() {
                        let freq: Vec<f64> = offsets
                            .iter()
                            .zip(&cell)
                            .map(|(&i, &c)| (i as f64 + 0.5) * c)
                            .collect();
                        // Ring cells hug the origin where the density has
                        // its ridges: always average in-cell.
                        let density =
                            cell_density(&spec.rho, density_exp, &freq, &cell, &period, true);
                        let weight = (ring_vol * density).sqrt();
                        let mut id = ring as u64;
                        for &i in &offsets {
                            id = id * (2 * res as u64 + 1) + (i + res) as u64;
                        }
                        ring_cells.push(RingCell {
                            freq,
                            weight,
                            stream_id: id,
                        });
                    }
                }
                // Advance the odometer over [-res, res) per axis.
                let mut axis = d;
                loop {
                    if axis == 0 {
                        break 'cells;
                    }
                    axis -= 1;
                    offsets[axis] += 1;
                    if offsets[axis] < res {
                        break;
                    }
                    offsets[axis] = -res;
                }
            }
        }
        // Phase tables: exp(i m dx freq) per ring cell, axis and grid step.
        let ring_phase: Vec<Vec<Vec<C64>>> = ring_cells
            .par_iter()
            .map(|rc| {
                (0..d)
                    .map(|a| {
                        let step = spec.grid.dx[a] * rc.freq[a];
                        (0..spec.grid.n[a])
                            .map(|m| C64::from_polar(1.0, m as f64 * step))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            spec,
            weights,
            lattice_dims,
            planes,
            ring_cells,
            ring_phase,
            plane_phase,
        })
    }

    pub fn spec(&self) -> &Arc<FieldSpec> {
        &self.spec
    }

    /// Main-lattice weights in FFT index order (diagnostics and tests).
    pub fn main_weights(&self) -> &[f64] {
        &self.weights
    }

    /// Synthesizes one replicate. Deterministic in (spec.seed, replicate).
    pub fn realize(&self, replicate: u32) -> FieldRealization {
        let d = self.spec.dim();
        let rep_rng = CounterRng::new(self.spec.seed).substream(u64::from(replicate));
        let main_rng = rep_rng.substream(STREAM_MAIN);
        let ring_rng = rep_rng.substream(STREAM_RING);
        let dims = &self.lattice_dims;
        let total: usize = dims.iter().product();
        let probe = GridNd::zeros(dims);

        // Hermitian-symmetric spectral noise on the main lattice.
        let mut w: Vec<C64> = (0..total)
            .into_par_iter()
            .map(|flat| {
                let idx = unflatten(flat, dims);
                let mir = mirror_index(&idx, dims);
                let mir_flat = probe.flat_index(&mir);
                let amp = self.weights[flat];
                if amp == 0.0 {
                    return C64::new(0.0, 0.0);
                }
                if mir_flat == flat {
                    // Self-conjugate bin: real Gaussian keeps the field real.
                    C64::new(amp * main_rng.std_normal_at(flat as u64), 0.0)
                } else {
                    let canon = flat.min(mir_flat);
                    let (g1, g2) = main_rng.gauss_pair_at(canon as u64);
                    let g = C64::new(g1, g2) / 2f64.sqrt();
                    if flat == canon {
                        amp * g
                    } else {
                        amp * g.conj()
                    }
                }
            })
            .collect();

        // Unnormalized inverse DFT: Y[m] = sum_t W[t] e^{+2 pi i m.t / N}.
        let mut planner = FftPlanner::new();
        inverse_fft_nd(&mut w, dims, &mut planner);

        // Ring weights for this replicate.
        let ring_w: Vec<C64> = self
            .ring_cells
            .iter()
            .map(|rc| {
                let (g1, g2) = ring_rng.gauss_pair_at(rc.stream_id);
                rc.weight * C64::new(g1, g2) / 2f64.sqrt()
            })
            .collect();
        // Constant term from the -1 in the kernel: sum over cells and
        // their mirrors of Re(W).
        let ring_const: f64 = ring_w.iter().map(|v| 2.0 * v.re).sum();

        // Plane-slab noise: the Hermitian mirror of sub-offset s at one
        // in-plane index is sub-offset S-1-s at the mirrored index, so
        // every mass is complex and pairs across slabs of one plane.
        let plane_rng = rep_rng.substream(STREAM_PLANE);
        let mut plane_lines: Vec<Vec<Vec<C64>>> = Vec::with_capacity(self.planes.len());
        let mut plane_const = 0.0f64;
        for (p, slab) in self.planes.iter().enumerate() {
            let total_ip: usize = slab.inplane_dims.iter().product();
            let s_count = slab.offsets.len();
            let mut arrays = vec![vec![C64::new(0.0, 0.0); total_ip]; s_count];
            for s in 0..s_count {
                for flat in 0..total_ip {
                    let idx = unflatten(flat, &slab.inplane_dims);
                    let mir = mirror_index(&idx, &slab.inplane_dims);
                    let mir_flat = flatten(&mir, &slab.inplane_dims);
                    let s_mir = s_count - 1 - s;
                    let canonical = (s, flat) <= (s_mir, mir_flat);
                    let (cs, cf) = if canonical { (s, flat) } else { (s_mir, mir_flat) };
                    let wc = slab.weights[cs][cf];
                    if wc == 0.0 {
                        continue;
                    }
                    let counter =
                        (p as u64 * s_count as u64 + cs as u64) * total_ip as u64 + cf as u64;
                    let (g1, g2) = plane_rng.gauss_pair_at(counter);
                    let g = C64::new(g1, g2) / 2f64.sqrt();
                    arrays[s][flat] = if canonical { wc * g } else { wc * g.conj() };
                }
            }
            for arr in arrays.iter_mut() {
                inverse_fft_nd(arr, &slab.inplane_dims, &mut planner);
            }
            for arr in arrays.iter() {
                plane_const += arr[0].re;
            }
            plane_lines.push(arrays);
        }

        let n = &self.spec.grid.n;
        let mut out = GridNd::zeros(n);
        let y0 = w[0].re;
        let last = d - 1;
        let row_len = n[last];
        let rows: usize = n.iter().product::<usize>() / row_len;
        let row_dims = &n[..last];
        let out_rows: Vec<Vec<f64>> = (0..rows)
            .into_par_iter()
            .map(|row| {
                let row_idx = unflatten(row, row_dims);
                // Main-lattice part: read the FFT output at grid positions.
                let mut vals = vec![0.0f64; row_len];
                let mut lattice_base = 0usize;
                for (a, &i) in row_idx.iter().enumerate() {
                    lattice_base = lattice_base * dims[a] + i;
                }
                lattice_base *= dims[last];
                for (m, v) in vals.iter_mut().enumerate() {
                    *v = w[lattice_base + m].re - y0;
                }
                // Ring part: 2 Re(W ph) - 2 Re(W) per canonical cell.
                let mut acc = vec![C64::new(0.0, 0.0); row_len];
                for (c, rw) in ring_w.iter().enumerate() {
                    let mut pre = *rw;
                    for (a, &i) in row_idx.iter().enumerate() {
                        pre *= self.ring_phase[c][a][i];
                    }
                    let tab = &self.ring_phase[c][last];
                    for (m, slot) in acc.iter_mut().enumerate() {
                        *slot += pre * tab[m];
                    }
                }
                for (m, v) in vals.iter_mut().enumerate() {
                    *v += 2.0 * acc[m].re - ring_const;
                }
                // Plane slabs.
                for (p, slab) in self.planes.iter().enumerate() {
                    let r = slab.axis;
                    if r == last {
                        // In-plane coordinates are exactly the row index.
                        let ip_flat = flatten(&row_idx, &slab.inplane_dims);
                        for (s, line) in plane_lines[p].iter().enumerate() {
                            let c = line[ip_flat];
                            let tab = &self.plane_phase[p][s];
                            for (m, v) in vals.iter_mut().enumerate() {
                                *v += c.re * tab[m].re - c.im * tab[m].im;
                            }
                        }
                    } else {
                        // The inner loop runs along an in-plane axis with
                        // stride 1; the plane phase is fixed for the row.
                        let mut base = 0usize;
                        let mut i_ip = 0;
                        for (a, &coord) in row_idx.iter().enumerate() {
                            if a == r {
                                continue;
                            }
                            base = base * slab.inplane_dims[i_ip] + coord;
                            i_ip += 1;
                        }
                        base *= slab.inplane_dims[i_ip];
                        for (s, line) in plane_lines[p].iter().enumerate() {
                            let ph = self.plane_phase[p][s][row_idx[r]];
                            for (m, v) in vals.iter_mut().enumerate() {
                                let c = line[base + m];
                                *v += c.re * ph.re - c.im * ph.im;
                            }
                        }
                    }
                }
                for v in vals.iter_mut() {
                    *v -= plane_const;
                }
                vals
            })
            .collect();
        for (row, vals) in out_rows.into_iter().enumerate() {
            let base = row * row_len;
            out.data_mut()[base..base + row_len].copy_from_slice(&vals);
        }
        FieldRealization {
            values: out,
            spec: Arc::clone(&self.spec),
            replicate,
        }
    }

    /// Deterministic spectral sum E(X(x+h) - X(x))^2 implied by the
    /// discretization, optionally with a reduced number of rings. Valid
    /// for on-grid lags (the alias folds share their phase factors there).
    pub fn theoretical_variogram(&self, h: &[f64], rings: Option<usize>) -> f64 {
        let d = self.spec.dim();
        let dims = &self.lattice_dims;
        let dxi: Vec<f64> = self
            .spec
            .grid
            .dx
            .iter()
            .zip(dims)
            .map(|(&dx, &n)| 2.0 * std::f64::consts::PI / (n as f64 * dx))
            .collect();
        let mut total = 0.0;
        for (flat, &amp) in self.weights.iter().enumerate() {
            if amp == 0.0 {
                continue;
            }
            let idx = unflatten(flat, dims);
            let steps = signed_freq_steps(&idx, dims);
            let dot: f64 = steps
                .iter()
                .zip(&dxi)
                .zip(h)
                .map(|((&s, &dz), &hv)| s as f64 * dz * hv)
                .sum();
            total += amp * amp * (2.0 - 2.0 * dot.cos());
        }
        for slab in &self.planes {
            let inplane_axes: Vec<usize> = (0..d).filter(|&a| a != slab.axis).collect();
            for (s, &delta) in slab.offsets.iter().enumerate() {
                for (flat, &w) in slab.weights[s].iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    let idx = unflatten(flat, &slab.inplane_dims);
                    let steps = signed_freq_steps(&idx, &slab.inplane_dims);
                    let mut dot = delta * h[slab.axis];
                    for (i, &a) in inplane_axes.iter().enumerate() {
                        dot += steps[i] as f64 * dxi[a] * h[a];
                    }
                    total += w * w * (2.0 - 2.0 * dot.cos());
                }
            }
        }
        let max_ring = rings.unwrap_or(self.spec.spectral.refine_rings);
        for rc in &self.ring_cells {
            let ring_of_cell = (rc.stream_id
                / (2 * RING_RESOLUTION as u64 + 1).pow(self.spec.dim() as u32))
                as usize;
            if ring_of_cell > max_ring {
                continue;
            }
            let dot: f64 = rc.freq.iter().zip(h).map(|(&f, &hv)| f * hv).sum();
            // Canonical cell stands for itself and its mirror.
            total += 2.0 * rc.weight * rc.weight * (2.0 - 2.0 * dot.cos());
        }
        total
    }
}

/// Spectral density rho^{density_exp} of one cell, folded over aliases.
///
/// The value at the cell center is summed with the values at its alias
/// images center + 2 pi j / dx for 0 < |j|_inf <= FOLD_RADIUS. When
/// `average` is set the in-band term is averaged over SUBCELLS^d midpoints
/// of the cell instead of using the midpoint alone. Alias terms are far
/// from both the origin and the coordinate hyperplanes, so midpoint values
/// suffice there.
fn cell_density(
    rho: &PseudoNorm,
    density_exp: f64,
    center: &[f64],
    cell: &[f64],
    period: &[f64],
    average: bool,
) -> f64 {
    let d = center.len();
    let in_band = if average {
        let mut acc = 0.0;
        let mut sub = vec![0usize; d];
        let count = SUBCELLS.pow(d as u32);
        let mut xi = vec![0.0; d];
        for _ in 0..count {
            for a in 0..d {
                let frac = (sub[a] as f64 + 0.5) / SUBCELLS as f64 - 0.5;
                xi[a] = center[a] + frac * cell[a];
            }
            acc += rho.evaluate(&xi).powf(density_exp);
            let mut a = d;
            loop {
                if a == 0 {
                    break;
                }
                a -= 1;
                sub[a] += 1;
                if sub[a] < SUBCELLS {
                    break;
                }
                sub[a] = 0;
            }
        }
        acc / count as f64
    } else {
        rho.evaluate(center).powf(density_exp)
    };
    let mut total = in_band;
    let mut j = vec![-FOLD_RADIUS; d];
    let mut xi = vec![0.0; d];
    'fold: loop {
        if j.iter().any(|&v| v != 0) {
            for a in 0..d {
                xi[a] = center[a] + j[a] as f64 * period[a];
            }
            total += rho.evaluate(&xi).powf(density_exp);
        }
        let mut a = d;
        loop {
            if a == 0 {
                break 'fold;
            }
            a -= 1;
            j[a] += 1;
            if j[a] <= FOLD_RADIUS {
                break;
            }
            j[a] = -FOLD_RADIUS;
        }
    }
    total
}

fn unflatten(mut flat: usize, dims: &[usize]) -> Vec<usize> {
    let mut idx = vec![0usize; dims.len()];
    for a in (0..dims.len()).rev() {
        idx[a] = flat % dims[a];
        flat /= dims[a];
    }
    idx
}

fn flatten(idx: &[usize], dims: &[usize]) -> usize {
    let mut flat = 0usize;
    for (a, &i) in idx.iter().enumerate() {
        flat = flat * dims[a] + i;
    }
    flat
}

/// In-place unnormalized inverse DFT along every axis of a row-major
/// complex array.
fn inverse_fft_nd(data: &mut [C64], dims: &[usize], planner: &mut FftPlanner<f64>) {
    let total: usize = dims.iter().product();
    debug_assert_eq!(data.len(), total);
    for axis in 0..dims.len() {
        let len = dims[axis];
        if len <= 1 {
            continue;
        }
        let fft = planner.plan_fft_inverse(len);
        let stride: usize = dims[axis + 1..].iter().product();
        let lines = total / len;
        let mut buf = vec![C64::new(0.0, 0.0); len];
        for line in 0..lines {
            let outer = line / stride;
            let inner = line % stride;
            let base = outer * (len * stride) + inner;
            for (t, b) in buf.iter_mut().enumerate() {
                *b = data[base + t * stride];
            }
            fft.process(&mut buf);
            for (t, b) in buf.iter().enumerate() {
                data[base + t * stride] = *b;
            }
        }
    }
}

/// Synthesizes a single replicate of the field.
pub fn synthesize_field(
    spec: &Arc<FieldSpec>,
    replicate: u32,
) -> Result<FieldRealization, SynthesisError> {
    let plan = SynthesisPlan::new(Arc::clone(spec))?;
    Ok(plan.realize(replicate))
}

/// Synthesizes replicates 0..count in parallel (bit-identical to the
/// serial order by the counter-based randomness).
pub fn synthesize_many(
    spec: &Arc<FieldSpec>,
    count: u32,
) -> Result<Vec<FieldRealization>, SynthesisError> {
    let plan = SynthesisPlan::new(Arc::clone(spec))?;
    Ok((0..count)
        .into_par_iter()
        .map(|r| plan.realize(r))
        .collect())
}

/// Empirical variogram estimates at a list of on-grid displacements.
#[derive(Debug, Clone, PartialEq)]
pub struct Variogram {
    /// Physical displacement vectors.
    pub lags: Vec<Vec<f64>>,
    /// Mean over replicates and base points of (X(x+h) - X(x))^2.
    pub v: Vec<f64>,
    /// Standard error over replicate-level means.
    pub stderr: Vec<f64>,
}

fn lag_to_steps(h: &[f64], dx: &[f64]) -> Result<Vec<i64>, SynthesisError> {
    let mut steps = Vec::with_capacity(h.len());
    for (hv, &s) in h.iter().zip(dx) {
        let exact = hv / s;
        let rounded = exact.round();
        if (exact - rounded).abs() > 1e-9 * exact.abs().max(1.0) {
            return Err(SynthesisError::OffGridLag(h.to_vec()));
        }
        steps.push(rounded as i64);
    }
    Ok(steps)
}

/// Mean squared increment at integer-step lag for one realization,
/// averaged over all base points with both ends on the grid.
fn mean_sq_increment(values: &GridNd, steps: &[i64]) -> f64 {
    let dims = values.dims();
    let d = dims.len();
    if steps.iter().all(|&s| s == 0) {
        return 0.0;
    }
    let lo: Vec<usize> = steps.iter().map(|&s| if s < 0 { (-s) as usize } else { 0 }).collect();
    let hi: Vec<usize> = dims
        .iter()
        .zip(steps)
        .map(|(&n, &s)| n - if s > 0 { s as usize } else { 0 })
        .collect();
    if lo.iter().zip(&hi).any(|(&l, &h)| l >= h) {
        return f64::NAN;
    }
    let mut offset: i64 = 0;
    for a in 0..d {
        let stride: i64 = dims[a + 1..].iter().product::<usize>() as i64;
        offset += steps[a] * stride;
    }
    let data = values.data();
    let mut sum = 0.0;
    let mut count = 0usize;
    let mut idx = lo.clone();
    'outer: loop {
        let base = values.flat_index(&idx);
        let shifted = (base as i64 + offset) as usize;
        let diff = data[shifted] - data[base];
        sum += diff * diff;
        count += 1;
        let mut a = d;
        loop {
            if a == 0 {
                break 'outer;
            }
            a -= 1;
            idx[a] += 1;
            if idx[a] < hi[a] {
                break;
            }
            idx[a] = lo[a];
        }
    }
    sum / count as f64
}

/// Estimates the variogram from replicates sharing one spec. Valid because
/// the increments are stationary: the average runs over base points as
/// well as replicates.
pub fn variogram_estimate(
    realizations: &[FieldRealization],
    lags: &[Vec<f64>],
) -> Result<Variogram, SynthesisError> {
    if realizations.len() < 2 {
        return Err(SynthesisError::BadRealizations(format!(
            "need at least 2 realizations, got {}",
            realizations.len()
        )));
    }
    let spec = &realizations[0].spec;
    for r in realizations {
        if r.spec.as_ref() != spec.as_ref() {
            return Err(SynthesisError::BadRealizations(
                "realizations come from different specs".into(),
            ));
        }
    }
    let mut v = Vec::with_capacity(lags.len());
    let mut stderr = Vec::with_capacity(lags.len());
    for h in lags {
        let steps = lag_to_steps(h, &spec.grid.dx)?;
        let per_rep: Vec<f64> = realizations
            .par_iter()
            .map(|r| mean_sq_increment(&r.values, &steps))
            .collect();
        if per_rep.iter().any(|x| x.is_nan()) {
            return Err(SynthesisError::OffGridLag(h.clone()));
        }
        v.push(stats::mean(&per_rep));
        stderr.push(stats::stderr_mean(&per_rep));
    }
    Ok(Variogram {
        lags: lags.to_vec(),
        v,
        stderr,
    })
}

/// One compared lag in a scaling-law report.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingLawEntry {
    pub h: Vec<f64>,
    pub v_h: f64,
    /// Image of h under the anisotropic dilation a^{E0}.
    pub h_scaled: Vec<f64>,
    /// Variogram at the scaled lag (log-multilinear interpolation between
    /// on-grid lags when the image is off-grid).
    pub v_scaled: f64,
    /// Exponent implied by this lag pair: log(v_scaled/v_h) / (2 log a).
    pub implied_h: f64,
    /// Relative deviation from the scaling law at the declared H0.
    pub rel_discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingLawReport {
    pub a: f64,
    pub entries: Vec<ScalingLawEntry>,
    /// Mean implied exponent (None when a = 1).
    pub fitted_h: Option<f64>,
    pub max_rel_discrepancy: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Compares the law of X(a^{E0} x) with a^{H0} X(x) through variograms at
/// matched lags and fits the implied exponent.
pub fn scaling_law_check(
    spec: &Arc<FieldSpec>,
    a: f64,
    replicates: u32,
    threshold: f64,
) -> Result<ScalingLawReport, SynthesisError> {
    let fields = synthesize_many(spec, replicates.max(2))?;
    scaling_law_check_on(&fields, a, threshold)
}

/// Same check over already-synthesized realizations (they must share one
/// spec), so several scale factors can reuse one batch.
pub fn scaling_law_check_on(
    fields: &[FieldRealization],
    a: f64,
    threshold: f64,
) -> Result<ScalingLawReport, SynthesisError> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(SynthesisError::BadGeometry(format!(
            "scaling factor must be positive, got {a}"
        )));
    }
    if fields.len() < 2 {
        return Err(SynthesisError::BadRealizations(
            "need at least 2 realizations".into(),
        ));
    }
    let spec = Arc::clone(&fields[0].spec);
    let d = spec.dim();
    // Base lags skip the very smallest steps: increments there are
    // dominated by the Nyquist band limit of the synthesis, not by the
    // scaling law.
    let base_steps: [i64; 4] = [3, 4, 6, 8];
    // On-demand variogram cache over integer step vectors.
    let mut cache: std::collections::HashMap<Vec<i64>, f64> = std::collections::HashMap::new();
    fn v_at_steps(
        cache: &mut std::collections::HashMap<Vec<i64>, f64>,
        steps: &[i64],
        fields: &[FieldRealization],
    ) -> f64 {
        if let Some(&v) = cache.get(steps) {
            return v;
        }
        let per_rep: Vec<f64> = fields
            .par_iter()
            .map(|r| mean_sq_increment(&r.values, steps))
            .collect();
        let v = stats::mean(&per_rep);
        cache.insert(steps.to_vec(), v);
        v
    }
    // log-multilinear interpolation of the variogram at a real-valued lag
    // expressed in grid steps.
    fn v_interp(
        cache: &mut std::collections::HashMap<Vec<i64>, f64>,
        t: &[f64],
        fields: &[FieldRealization],
    ) -> f64 {
        let d = t.len();
        let corners = 1usize << d;
        let lo: Vec<i64> = t.iter().map(|&x| x.floor() as i64).collect();
        let frac: Vec<f64> = t.iter().zip(&lo).map(|(&x, &l)| x - l as f64).collect();
        let mut acc = 0.0;
        for c in 0..corners {
            let mut wgt = 1.0;
            let mut steps = vec![0i64; d];
            for a in 0..d {
                if c >> a & 1 == 1 {
                    wgt *= frac[a];
                    steps[a] = lo[a] + 1;
                } else {
                    wgt *= 1.0 - frac[a];
                    steps[a] = lo[a];
                }
            }
            if wgt == 0.0 {
                continue;
            }
            let v = v_at_steps(cache, &steps, fields);
            acc += wgt * v.max(1e-300).ln();
        }
        acc.exp()
    }
    let e0_pow = spec.e0.power(a)?;
    let mut entries = Vec::new();
    for axis in 0..d {
        for &m in &base_steps {
            let mut h = vec![0.0; d];
            h[axis] = m as f64 * spec.grid.dx[axis];
            let mut steps = vec![0i64; d];
            steps[axis] = m;
            let v_h = v_at_steps(&mut cache, &steps, fields);
            // Image of the lag under the dilation, in grid steps.
            let mut h_scaled = vec![0.0; d];
            for r in 0..d {
                h_scaled[r] = e0_pow[(r, axis)] * h[axis];
            }
            let t: Vec<f64> = h_scaled
                .iter()
                .zip(&spec.grid.dx)
                .map(|(&hv, &dx)| hv / dx)
                .collect();
            if t.iter()
                .zip(spec.grid.n.iter())
                .any(|(&tv, &n)| tv.abs() >= (n / 2) as f64)
            {
                continue;
            }
            let v_scaled = v_interp(&mut cache, &t, fields);
            let implied_h = if (a - 1.0).abs() < 1e-12 {
                f64::NAN
            } else {
                (v_scaled / v_h).ln() / (2.0 * a.ln())
            };
            let target = a.powf(2.0 * spec.h0) * v_h;
            let rel_discrepancy = (v_scaled - target).abs() / target;
            entries.push(ScalingLawEntry {
                h,
                v_h,
                h_scaled,
                v_scaled,
                implied_h,
                rel_discrepancy,
            });
        }
    }
    let max_rel_discrepancy = entries
        .iter()
        .map(|e| e.rel_discrepancy)
        .fold(0.0f64, f64::max);
    let fitted_h = if (a - 1.0).abs() < 1e-12 {
        None
    } else {
        let hs: Vec<f64> = entries.iter().map(|e| e.implied_h).collect();
        Some(stats::mean(&hs))
    };
    Ok(ScalingLawReport {
        a,
        entries,
        fitted_h,
        max_rel_discrepancy,
        threshold,
        pass: max_rel_discrepancy <= threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pseudonorm::diagonal_pseudonorm;

    pub(crate) fn test_spec(
        lambda: [f64; 2],
        h0: f64,
        n: usize,
        lattice: usize,
        seed: u64,
    ) -> Arc<FieldSpec> {
        let e0 = AnisotropyMatrix::diagonal(&lambda).unwrap();
        let rho = diagonal_pseudonorm(&lambda).unwrap();
        Arc::new(FieldSpec {
            e0,
            h0,
            rho,
            grid: GridGeometry {
                n: vec![n, n],
                dx: vec![1.0, 1.0],
            },
            spectral: SpectralSettings {
                lattice_n: lattice,
                refine_rings: 8,
            },
            seed,
        })
    }

    #[test]
    fn origin_value_is_exactly_zero() {
        let spec = test_spec([1.0, 1.0], 0.5, 32, 32, 7);
        let f = synthesize_field(&spec, 0).unwrap();
        assert_eq!(f.values.get(&[0, 0]), 0.0);
        assert!(f.values.data().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn determinism_same_seed_same_bits() {
        let spec = test_spec([1.2, 0.8], 0.4, 32, 32, 99);
        let f1 = synthesize_field(&spec, 3).unwrap();
        let f2 = synthesize_field(&spec, 3).unwrap();
        assert_eq!(f1.values.data(), f2.values.data());
        let g = synthesize_field(&spec, 4).unwrap();
        assert_ne!(f1.values.data(), g.values.data());
    }

    #[test]
    fn determinism_across_thread_counts() {
        let spec = test_spec([1.2, 0.8], 0.4, 32, 32, 5);
        let pool1 = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let pool4 = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = pool1.install(|| synthesize_many(&spec, 3).unwrap());
        let b = pool4.install(|| synthesize_many(&spec, 3).unwrap());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.values.data(), y.values.data());
        }
    }

    #[test]
    fn invalid_hurst_is_rejected() {
        let e0 = AnisotropyMatrix::diagonal(&[1.2, 0.8]).unwrap();
        let rho = diagonal_pseudonorm(&[1.2, 0.8]).unwrap();
        let spec = Arc::new(FieldSpec {
            e0,
            h0: 0.9, // >= rho_min = 0.8
            rho,
            grid: GridGeometry {
                n: vec![16, 16],
                dx: vec![1.0, 1.0],
            },
            spectral: SpectralSettings {
                lattice_n: 16,
                refine_rings: 4,
            },
            seed: 0,
        });
        assert!(matches!(
            synthesize_field(&spec, 0),
            Err(SynthesisError::InvalidHurst { .. })
        ));
    }

    #[test]
    fn undersized_lattice_is_rejected() {
        let spec = FieldSpec {
            spectral: SpectralSettings {
                lattice_n: 16,
                refine_rings: 4,
            },
            ..(*test_spec([1.0, 1.0], 0.5, 32, 32, 1)).clone()
        };
        assert!(matches!(
            spec.validate(),
            Err(SynthesisError::LatticeTooSmall { .. })
        ));
    }

    #[test]
    fn variogram_zero_lag_is_zero() {
        let spec = test_spec([1.0, 1.0], 0.5, 32, 32, 11);
        let fields = synthesize_many(&spec, 3).unwrap();
        let vg = variogram_estimate(&fields, &[vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(vg.v[0], 0.0);
        assert!(vg.v[1] > 0.0);
    }

    #[test]
    fn variogram_rejects_off_grid_lags() {
        let spec = test_spec([1.0, 1.0], 0.5, 32, 32, 11);
        let fields = synthesize_many(&spec, 2).unwrap();
        assert!(matches!(
            variogram_estimate(&fields, &[vec![0.5, 0.0]]),
            Err(SynthesisError::OffGridLag(_))
        ));
    }

    #[test]
    fn variogram_matches_spectral_sum() {
        // Monte Carlo vs the deterministic spectral sum of the same
        // discretization.
        let spec = test_spec([1.0, 1.0], 0.5, 32, 32, 123);
        let plan = SynthesisPlan::new(Arc::clone(&spec)).unwrap();
        let fields: Vec<_> = (0..600).into_par_iter().map(|r| plan.realize(r)).collect();
        for steps in [[1i64, 0], [0, 2], [3, 3]] {
            let mc: Vec<f64> = fields
                .iter()
                .map(|f| mean_sq_increment(&f.values, &steps))
                .collect();
            let mc_mean = stats::mean(&mc);
            let h = [steps[0] as f64, steps[1] as f64];
            let exact = plan.theoretical_variogram(&h, None);
            let err = (mc_mean - exact).abs() / exact;
            assert!(err < 0.15, "lag {steps:?}: mc {mc_mean} vs exact {exact}");
        }
    }

    #[test]
    fn scaling_law_at_a_equal_one_is_exact() {
        let spec = test_spec([1.0, 1.0], 0.5, 32, 32, 17);
        let rep = scaling_law_check(&spec, 1.0, 2, 0.25).unwrap();
        assert!(rep.fitted_h.is_none());
        assert!(rep.max_rel_discrepancy < 1e-12);
        assert!(rep.pass);
    }

    #[test]
    fn spectral_weight_sum_converges_in_rings() {
        let spec = test_spec([1.2, 0.8], 0.4, 32, 32, 3);
        let plan = SynthesisPlan::new(Arc::clone(&spec)).unwrap();
        let h = [1.0, 1.0];
        let prev = plan.theoretical_variogram(&h, Some(7));
        let last = plan.theoretical_variogram(&h, Some(8));
        assert!((last - prev).abs() / last < 0.01, "rings not converged");
    }
}
