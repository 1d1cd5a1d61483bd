//! Reduced-scale executable checks of the library's documented invariants,
//! behind `osgrf selftest`. Every check runs at a scale that keeps the
//! whole suite within a couple of minutes; the full-scale statistical
//! gates live in the acceptance test suite.

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::besov::{self, BesovSpec};
use crate::estimate;
use crate::grid::GridNd;
use crate::linalg::{self, AnisotropyMatrix};
use crate::pseudonorm::{
    diagonal_pseudonorm, equivalence_constants, integral_pseudonorm, polar_decompose, PseudoNorm,
    RadialProfile,
};
use crate::rng::CounterRng;
use crate::stats;
use crate::synthesis::{
    synthesize_field, synthesize_many, FieldSpec, GridGeometry, SpectralSettings, SynthesisPlan,
};
use crate::wavelet::{
    anisotropic_wavelet_transform, anisotropic_wavelet_transform_with_filters, build_index_set,
    reconstruct, BranchType, DiagonalAnisotropy, Filters, WaveletIndex,
};

/// Faults that can be injected to prove the suite detects them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Flip one scaling-filter tap: breaks filter orthonormality.
    FlipFilterTap,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SelfTestOptions {
    pub fault: Option<Fault>,
}

#[derive(Debug, Clone)]
pub struct CheckReport {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(
    reports: &mut Vec<CheckReport>,
    name: &'static str,
    run: impl FnOnce() -> Result<String, String>,
) {
    let (passed, detail) = match run() {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    reports.push(CheckReport {
        name,
        passed,
        detail,
    });
}

fn random_eplus(rng: &CounterRng, counter: u64, d: usize) -> DMatrix<f64> {
    let sub = rng.substream(counter);
    let mut m = DMatrix::zeros(d, d);
    for i in 0..d {
        for k in 0..d {
            m[(i, k)] = 2.0 * sub.f64_at((i * d + k) as u64) - 1.0;
        }
    }
    let evs = m.complex_eigenvalues();
    let min_re = evs.iter().map(|e| e.re).fold(f64::INFINITY, f64::min);
    let shift = 0.3 + if min_re < 0.0 { -min_re } else { 0.0 };
    m + DMatrix::identity(d, d) * shift
}

fn small_spec(lambda: [f64; 2], h0: f64, n: usize, seed: u64) -> Arc<FieldSpec> {
    let e0 = AnisotropyMatrix::diagonal(&lambda).expect("valid anisotropy");
    let rho = diagonal_pseudonorm(&lambda).expect("valid pseudo-norm");
    Arc::new(FieldSpec {
        e0,
        h0,
        rho,
        grid: GridGeometry {
            n: vec![n, n],
            dx: vec![1.0, 1.0],
        },
        spectral: SpectralSettings {
            lattice_n: n,
            refine_rings: 8,
        },
        seed,
    })
}

/// Runs every invariant check; failures are reported, not panicked.
pub fn run_selftest(opts: &SelfTestOptions) -> Vec<CheckReport> {
    let mut reports = Vec::new();
    let r = &mut reports;

    // ---- linalg ----------------------------------------------------------
    check(r, "linalg-power-group-law", || {
        let rng = CounterRng::new(101).substream(0);
        let mut worst = 0.0f64;
        for t in 0..60u64 {
            let d = if t % 2 == 0 { 2 } else { 3 };
            let m = random_eplus(&rng, t, d);
            let sub = rng.substream(500 + t);
            let a = 0.1 + 9.9 * sub.f64_at(0);
            let b = 0.1 + 9.9 * sub.f64_at(1);
            let pa = linalg::matrix_power(&m, a).map_err(|e| e.to_string())?;
            let pb = linalg::matrix_power(&m, b).map_err(|e| e.to_string())?;
            let pab = linalg::matrix_power(&m, a * b).map_err(|e| e.to_string())?;
            worst = worst.max(linalg::max_abs_diff(&(&pa * &pb), &pab) / pab.amax());
        }
        if worst <= 1e-10 {
            Ok(format!("max relative defect {worst:.2e}"))
        } else {
            Err(format!("group law defect {worst:.2e} > 1e-10"))
        }
    });

    check(r, "linalg-power-inverse-law", || {
        let rng = CounterRng::new(102).substream(0);
        let mut worst = 0.0f64;
        for t in 0..40u64 {
            let m = random_eplus(&rng, t, 2);
            let a = 0.1 + 9.9 * rng.substream(900 + t).f64_at(0);
            let inv = linalg::matrix_power(&m, a)
                .map_err(|e| e.to_string())?
                .try_inverse()
                .ok_or("singular power")?;
            let direct = linalg::matrix_power(&m, 1.0 / a).map_err(|e| e.to_string())?;
            worst = worst.max(linalg::max_abs_diff(&inv, &direct) / direct.amax().max(1.0));
        }
        if worst <= 1e-10 {
            Ok(format!("max relative defect {worst:.2e}"))
        } else {
            Err(format!("inverse law defect {worst:.2e} > 1e-10"))
        }
    });

    check(r, "linalg-jordan-recomposition", || {
        let rng = CounterRng::new(103).substream(0);
        for t in 0..120u64 {
            let d = if t % 2 == 0 { 2 } else { 3 };
            let m = random_eplus(&rng, t, d);
            let j = linalg::jordan_additive_decompose(&m).map_err(|e| e.to_string())?;
            let recomposed = &j.d + &j.s + &j.n;
            if linalg::max_abs_diff(&recomposed, &m) > 1e-10 {
                return Err(format!("recomposition defect at sample {t}"));
            }
            for (x, y) in [(&j.d, &j.s), (&j.d, &j.n), (&j.s, &j.n)] {
                if (x * y - y * x).amax() > 1e-10 {
                    return Err(format!("commutator defect at sample {t}"));
                }
            }
            let mut npow = j.n.clone();
            for _ in 1..d {
                npow = &npow * &j.n;
            }
            if npow.amax() > 1e-10 {
                return Err(format!("nilpotency defect at sample {t}"));
            }
        }
        Ok("120 random matrices in d = 2, 3".into())
    });

    check(r, "linalg-power-factorization", || {
        let rng = CounterRng::new(104).substream(0);
        let mut worst = 0.0f64;
        for t in 0..40u64 {
            let m = random_eplus(&rng, t, 2);
            let j = linalg::jordan_additive_decompose(&m).map_err(|e| e.to_string())?;
            let a = 0.3 + 3.0 * rng.substream(700 + t).f64_at(0);
            let whole = linalg::matrix_power(&m, a).map_err(|e| e.to_string())?;
            let parts = linalg::matrix_power(&j.d, a).map_err(|e| e.to_string())?
                * linalg::matrix_power(&j.s, a).map_err(|e| e.to_string())?
                * linalg::matrix_power(&j.n, a).map_err(|e| e.to_string())?;
            worst = worst.max(linalg::max_abs_diff(&whole, &parts) / whole.amax());
        }
        if worst <= 1e-9 {
            Ok(format!("max relative defect {worst:.2e}"))
        } else {
            Err(format!("factorization defect {worst:.2e} > 1e-9"))
        }
    });

    // ---- pseudonorm ------------------------------------------------------
    check(r, "pseudonorm-homogeneity-diagonal", || {
        let rho = diagonal_pseudonorm(&[1.2, 0.8]).map_err(|e| e.to_string())?;
        let rng = CounterRng::new(201).substream(0);
        let mut worst = 0.0f64;
        for i in 0..2000u64 {
            let sub = rng.substream(i);
            let a = 0.1 + 9.9 * sub.f64_at(0);
            let ang = 2.0 * std::f64::consts::PI * sub.f64_at(1);
            let x = [ang.cos(), ang.sin()];
            let ax = rho.homogeneity().power_apply(a, &x).map_err(|e| e.to_string())?;
            let lhs = rho.evaluate(&ax);
            let rhs = a * rho.evaluate(&x);
            worst = worst.max((lhs - rhs).abs() / rhs.abs());
        }
        if worst <= 1e-12 {
            Ok(format!("max relative error {worst:.2e} over 2000 samples"))
        } else {
            Err(format!("homogeneity error {worst:.2e} > 1e-12"))
        }
    });

    check(r, "pseudonorm-homogeneity-integral", || {
        let e = AnisotropyMatrix::diagonal(&[1.2, 0.8]).map_err(|e| e.to_string())?;
        let rho = integral_pseudonorm(e, RadialProfile::smooth_bump(1.0, 2.0).unwrap())
            .map_err(|e| e.to_string())?;
        let rng = CounterRng::new(202).substream(0);
        let worst = (0..60u64)
            .into_par_iter()
            .map(|i| {
                let sub = rng.substream(i);
                let a = 0.1 + 9.9 * sub.f64_at(0);
                let ang = 2.0 * std::f64::consts::PI * sub.f64_at(1);
                let x = [ang.cos(), ang.sin()];
                let ax = rho.homogeneity().power_apply(a, &x).expect("a > 0");
                let lhs = rho.evaluate(&ax);
                let rhs = a * rho.evaluate(&x);
                (lhs - rhs).abs() / rhs.abs()
            })
            .reduce(|| 0.0, f64::max);
        if worst <= 1e-3 {
            Ok(format!("max relative error {worst:.2e} over 60 samples"))
        } else {
            Err(format!("homogeneity error {worst:.2e} > 1e-3"))
        }
    });

    check(r, "pseudonorm-quasi-triangle", || {
        let rho = diagonal_pseudonorm(&[1.5, 0.5]).map_err(|e| e.to_string())?;
        let rng = CounterRng::new(203).substream(0);
        let sample_max = |count: u64| -> f64 {
            (0..count)
                .into_par_iter()
                .map(|i| {
                    let sub = rng.substream(i);
                    let rx = 10f64.powf(-2.0 + 4.0 * sub.f64_at(0));
                    let ry = 10f64.powf(-2.0 + 4.0 * sub.f64_at(1));
                    let ax = 2.0 * std::f64::consts::PI * sub.f64_at(2);
                    let ay = 2.0 * std::f64::consts::PI * sub.f64_at(3);
                    let x = [rx * ax.cos(), rx * ax.sin()];
                    let y = [ry * ay.cos(), ry * ay.sin()];
                    let s = [x[0] + y[0], x[1] + y[1]];
                    rho.evaluate(&s) / (rho.evaluate(&x) + rho.evaluate(&y))
                })
                .reduce(|| 0.0, f64::max)
        };
        let c_small = sample_max(20_000);
        let c_large = sample_max(100_000);
        if c_large.is_finite() && c_large <= 1.2 * c_small {
            Ok(format!("C stabilizes: {c_small:.4} -> {c_large:.4}"))
        } else {
            Err(format!("triangle constant still growing: {c_small:.4} -> {c_large:.4}"))
        }
    });

    check(r, "pseudonorm-polar-roundtrip", || {
        let rho = diagonal_pseudonorm(&[1.2, 0.8]).map_err(|e| e.to_string())?;
        let rng = CounterRng::new(204).substream(0);
        let mut worst = 0.0f64;
        let mut theta_lo = f64::INFINITY;
        let mut theta_hi = 0.0f64;
        for i in 0..1000u64 {
            let sub = rng.substream(i);
            let rad = 10f64.powf(-3.0 + 6.0 * sub.f64_at(0));
            let ang = 2.0 * std::f64::consts::PI * sub.f64_at(1);
            let x = [rad * ang.cos(), rad * ang.sin()];
            let p = polar_decompose(&rho, &x).map_err(|e| e.to_string())?;
            let back = rho.homogeneity().power_apply(p.r, &p.theta).map_err(|e| e.to_string())?;
            let err = ((back[0] - x[0]).powi(2) + (back[1] - x[1]).powi(2)).sqrt()
                / (x[0] * x[0] + x[1] * x[1]).sqrt();
            worst = worst.max(err).max((rho.evaluate(&p.theta) - 1.0).abs());
            let norm = (p.theta[0].powi(2) + p.theta[1].powi(2)).sqrt();
            theta_lo = theta_lo.min(norm);
            theta_hi = theta_hi.max(norm);
        }
        if worst <= 1e-8 && theta_lo > 1e-3 && theta_hi < 1e3 {
            Ok(format!(
                "max defect {worst:.2e}; |theta| in [{theta_lo:.3}, {theta_hi:.3}]"
            ))
        } else {
            Err(format!(
                "roundtrip defect {worst:.2e} or unbounded sphere [{theta_lo:.2e}, {theta_hi:.2e}]"
            ))
        }
    });

    check(r, "pseudonorm-log-comparison", || {
        // Same real diagonalizable part (identity), different imaginary
        // parts: ratio envelope growth is bounded by d/rho_min(D) + 0.5.
        let rho1 = PseudoNorm::euclidean(2);
        let e2 = AnisotropyMatrix::from_rows(2, &[1.0, -0.5, 0.5, 1.0]).map_err(|e| e.to_string())?;
        let rho2 = integral_pseudonorm(e2, RadialProfile::smooth_bump(1.0, 2.0).unwrap())
            .map_err(|e| e.to_string())?;
        let rep = equivalence_constants(&rho2, &rho1, 400, 11).map_err(|e| e.to_string())?;
        let bound = 2.0 / 1.0 + 0.5;
        if rep.log_exponent_fit <= bound {
            Ok(format!(
                "envelope exponent {:.3} <= {bound}; C in [{:.3}, {:.3}]",
                rep.log_exponent_fit, rep.c_low, rep.c_high
            ))
        } else {
            Err(format!(
                "envelope exponent {:.3} exceeds {bound}",
                rep.log_exponent_fit
            ))
        }
    });

    // ---- synthesis -------------------------------------------------------
    check(r, "synthesis-origin-zero", || {
        let spec = small_spec([1.2, 0.8], 0.4, 32, 7);
        let f = synthesize_field(&spec, 0).map_err(|e| e.to_string())?;
        if f.values.get(&[0, 0]) == 0.0 && f.values.data().iter().all(|v| v.is_finite()) {
            Ok("X(0) = 0 exactly; all values finite".into())
        } else {
            Err(format!("X(0) = {}", f.values.get(&[0, 0])))
        }
    });

    check(r, "synthesis-determinism", || {
        let spec = small_spec([1.2, 0.8], 0.4, 32, 9);
        let a = synthesize_field(&spec, 5).map_err(|e| e.to_string())?;
        let b = synthesize_field(&spec, 5).map_err(|e| e.to_string())?;
        if a.values.data() != b.values.data() {
            return Err("same (seed, replicate) differ".into());
        }
        let pool1 = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .map_err(|e| e.to_string())?;
        let c = pool1.install(|| synthesize_field(&spec, 5).map_err(|e| e.to_string()))?;
        if a.values.data() != c.values.data() {
            return Err("thread count changes output".into());
        }
        Ok("bit-identical across reruns and thread counts".into())
    });

    check(r, "synthesis-gaussianity", || {
        let spec = small_spec([1.0, 1.0], 0.5, 32, 13);
        let fields = synthesize_many(&spec, 800).map_err(|e| e.to_string())?;
        let samples: Vec<f64> = fields.iter().map(|f| f.values.get(&[13, 21])).collect();
        let k = stats::kurtosis(&samples);
        if (k - 3.0).abs() <= 0.3 {
            Ok(format!("kurtosis {k:.3} within 3 +- 0.3 over 800 replicates"))
        } else {
            Err(format!("kurtosis {k:.3} outside 3 +- 0.3"))
        }
    });

    check(r, "synthesis-stationary-increments", || {
        let spec = small_spec([1.0, 1.0], 0.5, 32, 17);
        let fields = synthesize_many(&spec, 400).map_err(|e| e.to_string())?;
        let h = [3usize, 2];
        let bases = [[0usize, 0], [7, 11], [19, 5], [25, 24]];
        let mut means = Vec::new();
        let mut errs = Vec::new();
        for b in bases {
            let sq: Vec<f64> = fields
                .iter()
                .map(|f| {
                    let d = f.values.get(&[b[0] + h[0], b[1] + h[1]]) - f.values.get(&b);
                    d * d
                })
                .collect();
            means.push(stats::mean(&sq));
            errs.push(stats::stderr_mean(&sq));
        }
        let grand = stats::mean(&means);
        for (i, m) in means.iter().enumerate() {
            if (m - grand).abs() > 3.0 * errs[i] {
                return Err(format!(
                    "increment variance at base {:?} deviates: {m:.4} vs {grand:.4} (3se {:.4})",
                    bases[i],
                    3.0 * errs[i]
                ));
            }
        }
        Ok(format!("4 base points within 3 standard errors of {grand:.4}"))
    });

    check(r, "synthesis-spectral-weight-convergence", || {
        let spec = small_spec([1.2, 0.8], 0.4, 32, 3);
        let plan = SynthesisPlan::new(Arc::clone(&spec)).map_err(|e| e.to_string())?;
        let h = [1.0, 1.0];
        let prev = plan.theoretical_variogram(&h, Some(7));
        let last = plan.theoretical_variogram(&h, Some(8));
        let rel = (last - prev).abs() / last;
        if rel < 0.01 {
            Ok(format!("ring L=7 -> L=8 relative change {rel:.2e} < 1%"))
        } else {
            Err(format!("ring refinement not converged: {rel:.2e}"))
        }
    });

    check(r, "synthesis-variogram-spectral-match", || {
        let spec = small_spec([1.0, 1.0], 0.5, 32, 123);
        let plan = SynthesisPlan::new(Arc::clone(&spec)).map_err(|e| e.to_string())?;
        let fields: Vec<_> = (0..400).into_par_iter().map(|i| plan.realize(i)).collect();
        let lags = [vec![1.0, 0.0], vec![0.0, 2.0], vec![3.0, 3.0]];
        let vg = crate::synthesis::variogram_estimate(&fields, &lags).map_err(|e| e.to_string())?;
        for (i, lag) in lags.iter().enumerate() {
            let exact = plan.theoretical_variogram(lag, None);
            let rel = (vg.v[i] - exact).abs() / exact;
            if rel > 0.2 {
                return Err(format!("lag {lag:?}: Monte Carlo {:.3} vs spectral {exact:.3}", vg.v[i]));
            }
        }
        Ok("Monte Carlo variogram matches the deterministic spectral sum".into())
    });

    // ---- wavelet ---------------------------------------------------------
    let filters = match opts.fault {
        Some(Fault::FlipFilterTap) => Filters::daubechies(4)
            .expect("table exists")
            .with_flipped_tap(),
        None => Filters::daubechies(4).expect("table exists"),
    };

    check(r, "wavelet-parseval", || {
        let rng = CounterRng::new(301).substream(0);
        let mut g = GridNd::zeros(&[64, 64]);
        for (i, v) in g.data_mut().iter_mut().enumerate() {
            *v = rng.std_normal_at(i as u64);
        }
        for lambda in [[1.0, 1.0], [1.2, 0.8], [1.5, 0.5]] {
            let aniso = DiagonalAnisotropy::new(&lambda).map_err(|e| e.to_string())?;
            let set = anisotropic_wavelet_transform_with_filters(&g, &aniso, u32::MAX, &filters)
                .map_err(|e| e.to_string())?;
            let vol = 1.0 / (64.0 * 64.0);
            let grid_energy: f64 = g.data().iter().map(|v| v * v * vol).sum();
            let coeff_energy: f64 = set
                .branches()
                .iter()
                .map(|b| {
                    let s = 2f64.powf(-f64::from(b.trace()));
                    b.values.data().iter().map(|c| c * c * s).sum::<f64>()
                })
                .sum();
            let rel = (coeff_energy - grid_energy).abs() / grid_energy;
            if rel > 1e-8 {
                return Err(format!(
                    "Parseval identity broken for lambda {lambda:?}: relative defect {rel:.3e}"
                ));
            }
        }
        Ok("energy preserved to 1e-8 for three anisotropies".into())
    });

    check(r, "wavelet-reconstruction", || {
        let rng = CounterRng::new(302).substream(0);
        let mut g = GridNd::zeros(&[64, 64]);
        for (i, v) in g.data_mut().iter_mut().enumerate() {
            *v = rng.std_normal_at(i as u64);
        }
        for lambda in [[1.0, 1.0], [1.2, 0.8]] {
            let aniso = DiagonalAnisotropy::new(&lambda).map_err(|e| e.to_string())?;
            let set = anisotropic_wavelet_transform_with_filters(&g, &aniso, u32::MAX, &filters)
                .map_err(|e| e.to_string())?;
            let back = reconstruct(&set, &[64, 64]).map_err(|e| e.to_string())?;
            let num: f64 = back
                .data()
                .iter()
                .zip(g.data())
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            if num / g.l2_norm() > 1e-8 {
                return Err(format!("roundtrip defect {} for lambda {lambda:?}", num / g.l2_norm()));
            }
        }
        Ok("analysis-synthesis identity to 1e-8".into())
    });

    check(r, "wavelet-index-sets", || {
        for lambda in [[1.0, 1.0], [1.5, 0.5], [1.2, 0.8], [2.4, 1.6]] {
            let a = DiagonalAnisotropy::new_unnormalized(&lambda).map_err(|e| e.to_string())?;
            for j in 0..=6u32 {
                let set = build_index_set(&a, j);
                for (g, gamma) in &set {
                    let idx = WaveletIndex {
                        j,
                        g: g.clone(),
                        gamma: gamma.clone(),
                        k: vec![0, 0],
                    };
                    if !idx.is_valid(&a) {
                        return Err(format!("invalid member at lambda {lambda:?} j {j}"));
                    }
                }
                // Exhaustive cross-check on a bounding box.
                let cap = (0..2).map(|ax| a.level(ax, j) + 2).max().unwrap();
                let mut count = 0;
                for gc in 1..4u32 {
                    let g = vec![
                        if gc & 1 == 1 { BranchType::M } else { BranchType::F },
                        if gc & 2 == 2 { BranchType::M } else { BranchType::F },
                    ];
                    for g1 in 0..=cap {
                        for g2 in 0..=cap {
                            let idx = WaveletIndex {
                                j,
                                g: g.clone(),
                                gamma: vec![g1, g2],
                                k: vec![0, 0],
                            };
                            if idx.is_valid(&a) {
                                count += 1;
                            }
                        }
                    }
                }
                let expected = if j == 0 { 1 } else { count };
                if j > 0 && set.len() != expected {
                    return Err(format!(
                        "enumeration mismatch at lambda {lambda:?} j {j}: {} vs {expected}",
                        set.len()
                    ));
                }
            }
        }
        Ok("matches exhaustive enumeration for four anisotropies".into())
    });

    check(r, "wavelet-trace-bracket", || {
        for lambda in [[1.0, 1.0], [1.5, 0.5], [1.2, 0.8]] {
            let a = DiagonalAnisotropy::new(&lambda).map_err(|e| e.to_string())?;
            for j in 2..=9u32 {
                for (_, gamma) in build_index_set(&a, j) {
                    let tr: u32 = gamma.iter().sum();
                    if f64::from(tr) < f64::from(j - 2) * 2.0 || tr > 2 * j {
                        return Err(format!("trace {tr} outside bracket at j {j}"));
                    }
                }
            }
        }
        Ok("2^{(j-2)d} <= 2^{Tr} <= 2^{jd} for j in 2..=9".into())
    });

    check(r, "wavelet-vanishing-moments", || {
        let g = GridNd::from_vec(&[32, 32], vec![2.5; 1024]).map_err(|e| e.to_string())?;
        let aniso = DiagonalAnisotropy::new(&[1.2, 0.8]).map_err(|e| e.to_string())?;
        let set = anisotropic_wavelet_transform(&g, &aniso, u32::MAX, 4).map_err(|e| e.to_string())?;
        for b in set.branches() {
            if b.g.iter().any(|&t| t == BranchType::M) && b.values.max_abs() > 1e-10 * 2.5 {
                return Err(format!("constant leaks into branch j={} {:?}", b.j, b.gamma));
            }
        }
        Ok("constants annihilated by every wavelet branch".into())
    });

    check(r, "wavelet-cell-count-growth", || {
        for lambda in [[1.0f64, 1.0], [1.2, 0.8]] {
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for j in 4..=14u32 {
                let n = estimate::gamma_cell_count(&lambda, j) as f64;
                xs.push(f64::from(j));
                ys.push((n / f64::from(j).powi(2)).log2());
            }
            let fit = stats::ols_fit(&xs, &ys).ok_or("degenerate fit")?;
            if (fit.slope - 2.0).abs() > 0.1 {
                return Err(format!("cell count slope {:.3} not d +- 0.1", fit.slope));
            }
        }
        Ok("slope of log2(n_j / j^d) equals d to 0.1".into())
    });

    check(r, "wavelet-coefficient-stationarity", || {
        let spec = small_spec([1.2, 0.8], 0.4, 64, 19);
        let fields = synthesize_many(&spec, 60).map_err(|e| e.to_string())?;
        let aniso = DiagonalAnisotropy::new(&[1.2, 0.8]).map_err(|e| e.to_string())?;
        // Variance of one mid-scale branch over k-blocks must not depend
        // on the block.
        let mut block_means: Vec<Vec<f64>> = vec![Vec::new(); 4];
        for f in &fields {
            let set = anisotropic_wavelet_transform(&f.values, &aniso, u32::MAX, 4)
                .map_err(|e| e.to_string())?;
            let b = set
                .branches()
                .iter()
                .find(|b| b.j == 4 && b.g.iter().all(|&t| t == BranchType::M))
                .ok_or("missing all-wavelet branch at j=4")?;
            let dims = b.values.dims().to_vec();
            let half = [dims[0] / 2, dims[1] / 2];
            let mut acc = [0.0f64; 4];
            let mut cnt = [0usize; 4];
            for idx in b.values.indices() {
                let quad = (idx[0] >= half[0]) as usize * 2 + (idx[1] >= half[1]) as usize;
                acc[quad] += b.values.get(&idx).powi(2);
                cnt[quad] += 1;
            }
            for q in 0..4 {
                block_means[q].push(acc[q] / cnt[q] as f64);
            }
        }
        let per_block: Vec<f64> = block_means.iter().map(|v| stats::mean(v)).collect();
        let errs: Vec<f64> = block_means.iter().map(|v| stats::stderr_mean(v)).collect();
        let grand = stats::mean(&per_block);
        for q in 0..4 {
            if (per_block[q] - grand).abs() > 3.0 * errs[q] {
                return Err(format!(
                    "block {q} variance {:.4} deviates from {grand:.4} beyond 3se",
                    per_block[q]
                ));
            }
        }
        Ok("k-block variances within 3 standard errors".into())
    });

    check(r, "wavelet-weak-correlation", || {
        let spec = small_spec([1.0, 1.0], 0.5, 64, 23);
        let fields = synthesize_many(&spec, 200).map_err(|e| e.to_string())?;
        let aniso = DiagonalAnisotropy::new(&[1.0, 1.0]).map_err(|e| e.to_string())?;
        // Correlation of same-branch coefficients at increasing k-offsets
        // along axis 0, pooled over replicates.
        let mut num = vec![0.0f64; 9];
        let mut den = 0.0f64;
        for f in &fields {
            let set = anisotropic_wavelet_transform(&f.values, &aniso, u32::MAX, 4)
                .map_err(|e| e.to_string())?;
            let b = set
                .branches()
                .iter()
                .find(|b| b.j == 5 && b.g.iter().all(|&t| t == BranchType::M))
                .ok_or("missing branch")?;
            let dims = b.values.dims().to_vec();
            for idx in b.values.indices() {
                let v = b.values.get(&idx);
                den += v * v;
                for (o, slot) in num.iter_mut().enumerate() {
                    let mut shifted = idx.clone();
                    shifted[0] = (idx[0] + o) % dims[0];
                    *slot += v * b.values.get(&shifted);
                }
            }
        }
        let corr: Vec<f64> = num.iter().map(|n| (n / den).abs()).collect();
        // Envelope exponent of |corr| against offset.
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for o in 1..corr.len() {
            if corr[o] > 1e-6 {
                xs.push((o as f64).ln());
                ys.push(corr[o].ln());
            }
        }
        let fit = stats::ols_fit(&xs, &ys).ok_or("degenerate fit")?;
        if fit.slope <= -1.0 + 0.3 {
            Ok(format!("correlation envelope exponent {:.2} <= -0.7", fit.slope))
        } else {
            Err(format!("correlation decays too slowly: exponent {:.2}", fit.slope))
        }
    });

    check(r, "wavelet-variance-scaling", || {
        let spec = small_spec([1.2, 0.8], 0.4, 128, 29);
        let fields = synthesize_many(&spec, 24).map_err(|e| e.to_string())?;
        let aniso = DiagonalAnisotropy::new(&[1.2, 0.8]).map_err(|e| e.to_string())?;
        let mut per_j: std::collections::BTreeMap<u32, (f64, usize)> = Default::default();
        for f in &fields {
            let set = anisotropic_wavelet_transform(&f.values, &aniso, u32::MAX, 4)
                .map_err(|e| e.to_string())?;
            for b in set.branches() {
                if !b.canonical || b.j == 0 {
                    continue;
                }
                let e = per_j.entry(b.j).or_insert((0.0, 0));
                e.0 += b.values.data().iter().map(|c| c * c).sum::<f64>();
                e.1 += b.values.len();
            }
        }
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (&j, &(sum, cnt)) in &per_j {
            if (2..=5).contains(&j) {
                xs.push(f64::from(j));
                ys.push((sum / cnt as f64).log2());
            }
        }
        let fit = stats::ols_fit(&xs, &ys).ok_or("degenerate fit")?;
        // Reduced scale: the acceptance suite pins the tight tolerance.
        if (fit.slope + 0.8).abs() <= 0.4 {
            Ok(format!("pooled variance slope {:.3} near -2H = -0.8", fit.slope))
        } else {
            Err(format!("variance slope {:.3} far from -0.8", fit.slope))
        }
    });

    // ---- besov -----------------------------------------------------------
    check(r, "besov-monotonicity-in-s", || {
        let aniso = DiagonalAnisotropy::isotropic(2);
        let set = besov::synthetic_coefficients(&aniso, &[64, 64], 2, |j| 4f64.powi(-(j as i32) - 1));
        let mut prev = 0.0;
        for k in 0..6 {
            let s = 0.1 + 0.15 * k as f64;
            let v = besov::besov_norm(
                &set,
                &BesovSpec {
                    s,
                    p: 2.0,
                    q: 2.0,
                    beta: 0.0,
                    anisotropy: aniso.clone(),
                },
            )
            .map_err(|e| e.to_string())?;
            if v < prev {
                return Err(format!("norm decreased at s = {s}"));
            }
            prev = v;
        }
        Ok("norm nondecreasing in s on small-coefficient input".into())
    });

    check(r, "besov-log-weight-ordering", || {
        let aniso = DiagonalAnisotropy::isotropic(2);
        let set = besov::synthetic_coefficients(&aniso, &[64, 64], 2, |j| 2f64.powi(-(j as i32)));
        let norm = |beta: f64| {
            besov::besov_norm(
                &set,
                &BesovSpec {
                    s: 0.5,
                    p: 2.0,
                    q: 2.0,
                    beta,
                    anisotropy: aniso.clone(),
                },
            )
            .map_err(|e| e.to_string())
        };
        let (plus, zero, minus) = (norm(1.0)?, norm(0.0)?, norm(-1.0)?);
        if plus <= zero && zero <= minus {
            Ok(format!("{plus:.4} <= {zero:.4} <= {minus:.4}"))
        } else {
            Err(format!("ordering violated: {plus:.4}, {zero:.4}, {minus:.4}"))
        }
    });

    check(r, "besov-rescaling-consistency", || {
        let spec = small_spec([1.2, 0.8], 0.4, 128, 31);
        let f = synthesize_field(&spec, 0).map_err(|e| e.to_string())?;
        let base = DiagonalAnisotropy::new(&[1.2, 0.8]).map_err(|e| e.to_string())?;
        let set = anisotropic_wavelet_transform(&f.values, &base, u32::MAX, 4)
            .map_err(|e| e.to_string())?;
        let jmax = set.max_canonical_scale();
        let est = besov::critical_exponent_estimate(&set, 2.0, 2.0, (2, jmax - 1))
            .map_err(|e| e.to_string())?;
        // alpha(k D)/k computed through the same per-axis measurements.
        let kappa = 2.0;
        let scaled: f64 = est
            .axis_exponents
            .iter()
            .zip(base.lambda())
            .map(|(&s, &l)| kappa * l * s)
            .fold(f64::INFINITY, f64::min)
            / kappa;
        if (scaled - est.alpha_hat).abs() <= 1e-12 {
            Ok(format!("alpha(2D)/2 = alpha(D) = {:.4}", est.alpha_hat))
        } else {
            Err(format!("rescaling mismatch: {scaled} vs {}", est.alpha_hat))
        }
    });

    check(r, "besov-estimator-consistency", || {
        let spec = small_spec([1.2, 0.8], 0.4, 128, 37);
        let fields = synthesize_many(&spec, 16).map_err(|e| e.to_string())?;
        let aniso = DiagonalAnisotropy::new(&[1.2, 0.8]).map_err(|e| e.to_string())?;
        let alphas: Vec<f64> = fields
            .par_iter()
            .map(|f| {
                let set = anisotropic_wavelet_transform(&f.values, &aniso, u32::MAX, 4)
                    .expect("transform");
                let jmax = set.max_canonical_scale();
                besov::critical_exponent_estimate(&set, 2.0, 2.0, (2, jmax - 1))
                    .expect("estimate")
                    .alpha_hat
            })
            .collect();
        let singles = stats::stddev(&alphas);
        let pairs: Vec<f64> = alphas.chunks(2).map(stats::mean).collect();
        let paired = stats::stddev(&pairs);
        if paired < singles {
            Ok(format!(
                "alpha spread shrinks with averaging: {singles:.4} -> {paired:.4}"
            ))
        } else {
            Err(format!("spread did not shrink: {singles:.4} -> {paired:.4}"))
        }
    });

    // ---- estimate --------------------------------------------------------
    check(r, "estimate-argmax-scale-invariance", || {
        let spec = small_spec([1.2, 0.8], 0.4, 128, 41);
        let fields = synthesize_many(&spec, 2).map_err(|e| e.to_string())?;
        let family = estimate::candidate_grid(2, 0.8, 1.2, 0.2).map_err(|e| e.to_string())?;
        let base = estimate::anisotropy_search(&fields, &family, 2.0, 2.0)
            .map_err(|e| e.to_string())?;
        let mut scaled_fields = fields.clone();
        for f in &mut scaled_fields {
            f.values.scale(7.5);
        }
        let scaled = estimate::anisotropy_search(&scaled_fields, &family, 2.0, 2.0)
            .map_err(|e| e.to_string())?;
        let same_argmax = base.argmax == scaled.argmax;
        let max_alpha_diff = base
            .curve
            .iter()
            .zip(&scaled.curve)
            .map(|(a, b)| (a.alpha_hat - b.alpha_hat).abs())
            .fold(0.0f64, f64::max);
        if same_argmax && max_alpha_diff <= 1e-9 {
            Ok(format!("alpha curve invariant to field scaling ({max_alpha_diff:.2e})"))
        } else {
            Err(format!(
                "scaling changed the curve (diff {max_alpha_diff:.2e}) or argmax"
            ))
        }
    });

    check(r, "estimate-curve-shape", || {
        // Balanced per-axis weights keep the desk-scale constants of the
        // two axis terms comparable (the acceptance configuration).
        let lam0 = [1.2f64, 0.8];
        let jgrid = 8.0;
        let w: Vec<f64> = lam0
            .iter()
            .map(|l| 2f64.powf((jgrid - 2.65) * (1.0 / l - 1.0)))
            .collect();
        let rho = PseudoNorm::diagonal_sum_weighted(&lam0, 1.0, 1.0, &w)
            .map_err(|e| e.to_string())?;
        let spec = Arc::new(FieldSpec {
            e0: AnisotropyMatrix::diagonal(&lam0).map_err(|e| e.to_string())?,
            h0: 0.4,
            rho,
            grid: GridGeometry {
                n: vec![256, 256],
                dx: vec![1.0, 1.0],
            },
            spectral: SpectralSettings {
                lattice_n: 256,
                refine_rings: 8,
            },
            seed: 43,
        });
        let fields = synthesize_many(&spec, 6).map_err(|e| e.to_string())?;
        let family = estimate::candidate_grid(2, 0.6, 1.4, 0.2).map_err(|e| e.to_string())?;
        let res = estimate::anisotropy_search(&fields, &family, 2.0, 2.0)
            .map_err(|e| e.to_string())?;
        let lam = res.argmax.lambda()[0];
        if res.tent_r2 >= 0.8 && (lam - 1.2).abs() <= 0.21 {
            Ok(format!(
                "argmax lambda {lam}, H {:.3}, tent R2 {:.3}",
                res.h_hat, res.tent_r2
            ))
        } else {
            Err(format!(
                "argmax lambda {lam}, tent R2 {:.3} below 0.8",
                res.tent_r2
            ))
        }
    });

    check(r, "estimate-normalized-statistics", || {
        let spec = small_spec([1.2, 0.8], 0.4, 128, 47);
        let f = synthesize_field(&spec, 0).map_err(|e| e.to_string())?;
        let aniso = DiagonalAnisotropy::new(&[1.2, 0.8]).map_err(|e| e.to_string())?;
        let set = anisotropic_wavelet_transform(&f.values, &aniso, u32::MAX, 4)
            .map_err(|e| e.to_string())?;
        let rows2 = estimate::normalized_coefficient_stats(&set, 2.0).map_err(|e| e.to_string())?;
        for row in &rows2 {
            if (row.mean_p - 1.0).abs() > 0.05 {
                return Err(format!("mean |g|^2 = {:.4} at j={}", row.mean_p, row.j));
            }
            if row.n_j >= 1000 && !(0.5..=3.0).contains(&row.max_norm) {
                return Err(format!("max statistic {:.3} outside [0.5, 3] at j={}", row.max_norm, row.j));
            }
        }
        let rows1 = estimate::normalized_coefficient_stats(&set, 1.0).map_err(|e| e.to_string())?;
        let target = (2.0 / std::f64::consts::PI).sqrt();
        for row in &rows1 {
            if row.n_j >= 10_000 && (row.mean_p - target).abs() / target > 0.05 {
                return Err(format!("mean |g| = {:.4} at j={} (target {target:.4})", row.mean_p, row.j));
            }
        }
        Ok("LLN and maxima statistics within bands".into())
    });

    reports
}
