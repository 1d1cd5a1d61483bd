//! Acceptance suite: one test per criterion, each printing a pass/fail
//! line with the measured statistic against its pinned tolerance.
//!
//! Criteria 7-9 and 11 share one 200-replicate batch of the anisotropic
//! reference field (E0 = diag(1.2, 0.8), H0 = 0.4, 256^2 grid); the batch
//! is synthesized once behind a lock.

use std::sync::{Arc, OnceLock};

use osgrf::besov;
use osgrf::estimate::{self, candidate_grid};
use osgrf::linalg::{self, AnisotropyMatrix};
use osgrf::pseudonorm::{
    diagonal_pseudonorm, integral_pseudonorm, polar_decompose, PseudoNorm, RadialProfile,
};
use osgrf::rng::CounterRng;
use osgrf::stats;
use osgrf::synthesis::{
    scaling_law_check_on, synthesize_many, variogram_estimate, FieldRealization, FieldSpec,
    GridGeometry, SpectralSettings,
};
use osgrf::wavelet::{
    anisotropic_wavelet_transform, build_index_set, reconstruct, BranchType, DiagonalAnisotropy,
    WaveletIndex,
};

const REFERENCE_LAMBDA: [f64; 2] = [1.2, 0.8];
const REFERENCE_H: f64 = 0.4;

/// Balanced per-axis weights for the reference pseudo-norm: puts the two
/// axis terms of the gauge on a common scale at the analysis atoms of a
/// 2^J-point grid.
fn balanced_weights(lambda: &[f64], grid_levels: f64) -> Vec<f64> {
    lambda
        .iter()
        .map(|l| 2f64.powf((grid_levels - 2.65) * (1.0 / l - 1.0)))
        .collect()
}

fn reference_spec(n: usize, seed: u64) -> Arc<FieldSpec> {
    let w = balanced_weights(&REFERENCE_LAMBDA, (n as f64).log2());
    let rho = PseudoNorm::diagonal_sum_weighted(&REFERENCE_LAMBDA, 1.0, 1.0, &w)
        .expect("valid pseudo-norm");
    Arc::new(FieldSpec {
        e0: AnisotropyMatrix::diagonal(&REFERENCE_LAMBDA).expect("valid anisotropy"),
        h0: REFERENCE_H,
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

fn reference_batch() -> &'static [FieldRealization] {
    static BATCH: OnceLock<Vec<FieldRealization>> = OnceLock::new();
    BATCH.get_or_init(|| {
        let spec = reference_spec(256, 20240);
        synthesize_many(&spec, 200).expect("reference batch synthesizes")
    })
}

fn report(criterion: &str, pass: bool, detail: &str) {
    println!(
        "criterion {criterion}: {} - {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion}: {detail}");
}

#[test]
fn criterion_01_pseudo_norm_homogeneity() {
    // Diagonal-sum: 1e-12 relative over 10^4 sampled (a, xi); integral:
    // 1e-3.
    let rng = CounterRng::new(1001).substream(0);
    let diag = diagonal_pseudonorm(&REFERENCE_LAMBDA).unwrap();
    let weighted = PseudoNorm::diagonal_sum_weighted(
        &REFERENCE_LAMBDA,
        1.0,
        1.0,
        &balanced_weights(&REFERENCE_LAMBDA, 8.0),
    )
    .unwrap();
    let mut worst_diag = 0.0f64;
    for i in 0..10_000u64 {
        let sub = rng.substream(i);
        let a = 10f64.powf(-1.0 + 2.0 * sub.f64_at(0));
        let r = 10f64.powf(-2.0 + 4.0 * sub.f64_at(1));
        let ang = 2.0 * std::f64::consts::PI * sub.f64_at(2);
        let x = [r * ang.cos(), r * ang.sin()];
        for rho in [&diag, &weighted] {
            let ax = rho.homogeneity().power_apply(a, &x).unwrap();
            let lhs = rho.evaluate(&ax);
            let rhs = a * rho.evaluate(&x);
            worst_diag = worst_diag.max((lhs - rhs).abs() / rhs.abs().max(1e-300));
        }
    }
    let e = AnisotropyMatrix::diagonal(&REFERENCE_LAMBDA).unwrap();
    let integral = integral_pseudonorm(e, RadialProfile::smooth_bump(1.0, 2.0).unwrap()).unwrap();
    let worst_int: f64 = (0..10_000u64)
        .map(|i| {
            let sub = rng.substream(1_000_000 + i);
            let a = 10f64.powf(-1.0 + 2.0 * sub.f64_at(0));
            let ang = 2.0 * std::f64::consts::PI * sub.f64_at(1);
            let x = [ang.cos(), ang.sin()];
            let ax = integral.homogeneity().power_apply(a, &x).unwrap();
            let lhs = integral.evaluate(&ax);
            let rhs = a * integral.evaluate(&x);
            (lhs - rhs).abs() / rhs.abs()
        })
        .fold(0.0, f64::max);
    report(
        "1 (pseudo-norm homogeneity)",
        worst_diag <= 1e-12 && worst_int <= 1e-3,
        &format!("diagonal-sum max rel err {worst_diag:.2e} (<= 1e-12), integral {worst_int:.2e} (<= 1e-3), 10^4 samples each"),
    );
}

#[test]
fn criterion_02_polar_roundtrip() {
    let rng = CounterRng::new(1002).substream(0);
    let diag = diagonal_pseudonorm(&REFERENCE_LAMBDA).unwrap();
    let e = AnisotropyMatrix::diagonal(&REFERENCE_LAMBDA).unwrap();
    let integral =
        integral_pseudonorm(e, RadialProfile::smooth_bump(1.0, 2.0).unwrap()).unwrap();
    let mut worst_rt = 0.0f64;
    let mut worst_unit = 0.0f64;
    for (k, rho) in [&diag, &integral].into_iter().enumerate() {
        for i in 0..10_000u64 {
            let sub = rng.substream((k as u64) << 32 | i);
            let r = 10f64.powf(-3.0 + 6.0 * sub.f64_at(0));
            let ang = 2.0 * std::f64::consts::PI * sub.f64_at(1);
            let x = [r * ang.cos(), r * ang.sin()];
            let p = polar_decompose(rho, &x).unwrap();
            let back = rho.homogeneity().power_apply(p.r, &p.theta).unwrap();
            let err = ((back[0] - x[0]).powi(2) + (back[1] - x[1]).powi(2)).sqrt()
                / (x[0] * x[0] + x[1] * x[1]).sqrt();
            worst_rt = worst_rt.max(err);
            worst_unit = worst_unit.max((rho.evaluate(&p.theta) - 1.0).abs());
        }
    }
    report(
        "2 (polar roundtrip)",
        worst_rt <= 1e-8 && worst_unit <= 1e-8,
        &format!("max |r^E theta - x|/|x| = {worst_rt:.2e}, max |rho(theta)-1| = {worst_unit:.2e} over 10^4 x per kind"),
    );
}

#[test]
fn criterion_03_jordan_decomposition() {
    let rng = CounterRng::new(1003).substream(0);
    let mut checked = 0;
    for t in 0..1000u64 {
        let d = if t % 2 == 0 { 2 } else { 3 };
        let sub = rng.substream(t);
        let mut m = nalgebra_matrix(d, &sub);
        // Shift the spectrum strictly into the right half plane.
        let (rho_min, _) = linalg::spectral_bounds(&m).unwrap();
        let min_re = spectrum_min_re(&m);
        let shift = 0.3 + if min_re < 0.0 { -min_re } else { 0.0 };
        m += nalgebra::DMatrix::identity(d, d) * shift;
        let _ = rho_min;
        let j = linalg::jordan_additive_decompose(&m).unwrap();
        let recomposed = &j.d + &j.s + &j.n;
        assert!(
            linalg::max_abs_diff(&recomposed, &m) <= 1e-10,
            "recomposition at sample {t}"
        );
        for (x, y) in [(&j.d, &j.s), (&j.d, &j.n), (&j.s, &j.n)] {
            assert!((x * y - y * x).amax() <= 1e-10, "commutator at sample {t}");
        }
        let mut npow = j.n.clone();
        for _ in 1..d {
            npow = &npow * &j.n;
        }
        assert!(npow.amax() <= 1e-10, "nilpotency at sample {t}");
        for ev in j.d.complex_eigenvalues().iter() {
            assert!(ev.im.abs() <= 1e-8, "D spectrum at sample {t}");
        }
        for ev in j.s.complex_eigenvalues().iter() {
            assert!(ev.re.abs() <= 1e-8, "S spectrum at sample {t}");
        }
        checked += 1;
    }
    report(
        "3 (additive Jordan decomposition)",
        checked == 1000,
        "1000 random positive-spectrum matrices in d = 2, 3 within type tolerances",
    );
}

fn nalgebra_matrix(d: usize, sub: &CounterRng) -> nalgebra::DMatrix<f64> {
    let mut m = nalgebra::DMatrix::zeros(d, d);
    for i in 0..d {
        for k in 0..d {
            m[(i, k)] = 2.0 * sub.f64_at((i * d + k) as u64) - 1.0;
        }
    }
    m
}

fn spectrum_min_re(m: &nalgebra::DMatrix<f64>) -> f64 {
    m.complex_eigenvalues()
        .iter()
        .map(|e| e.re)
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn criterion_04_wavelet_orthonormality() {
    let rng = CounterRng::new(1004).substream(0);
    let mut g = osgrf::GridNd::zeros(&[64, 64]);
    for (i, v) in g.data_mut().iter_mut().enumerate() {
        *v = rng.std_normal_at(i as u64);
    }
    let mut worst_parseval = 0.0f64;
    let mut worst_roundtrip = 0.0f64;
    for lambda in [[1.0, 1.0], [1.2, 0.8], [1.5, 0.5]] {
        let aniso = DiagonalAnisotropy::new(&lambda).unwrap();
        let set = anisotropic_wavelet_transform(&g, &aniso, u32::MAX, 4).unwrap();
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
        worst_parseval = worst_parseval.max((coeff_energy - grid_energy).abs() / grid_energy);
        let back = reconstruct(&set, &[64, 64]).unwrap();
        let err: f64 = back
            .data()
            .iter()
            .zip(g.data())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
            / g.l2_norm();
        worst_roundtrip = worst_roundtrip.max(err);
    }
    report(
        "4 (wavelet orthonormality)",
        worst_parseval <= 1e-8 && worst_roundtrip <= 1e-8,
        &format!("Parseval defect {worst_parseval:.2e}, reconstruction defect {worst_roundtrip:.2e} on periodized 64^2 grids, three anisotropies"),
    );
}

#[test]
fn criterion_05_index_sets_and_cell_counts() {
    // Exact index-set match against brute-force enumeration for j <= 8.
    for lambda in [[1.0, 1.0], [1.5, 0.5], [1.2, 0.8]] {
        let a = DiagonalAnisotropy::new(&lambda).unwrap();
        for j in 0..=8u32 {
            let mut set = build_index_set(&a, j);
            set.sort();
            let mut oracle = index_set_brute_force(&a, j);
            oracle.sort();
            assert_eq!(set, oracle, "index sets differ at lambda {lambda:?} j {j}");
        }
    }
    // Cell-count growth: slope of log2(n_j / j^d) over j equals d +- 0.1.
    let mut worst = 0.0f64;
    for lambda in [[1.0, 1.0], [1.5, 0.5], [1.2, 0.8]] {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for j in 4..=14u32 {
            let n = estimate::gamma_cell_count(&lambda, j) as f64;
            xs.push(f64::from(j));
            ys.push((n / f64::from(j).powi(2)).log2());
        }
        let fit = stats::ols_fit(&xs, &ys).unwrap();
        worst = worst.max((fit.slope - 2.0).abs());
    }
    report(
        "5 (index sets and cell counts)",
        worst <= 0.1,
        &format!("brute-force match for j <= 8; cell-count slope within {worst:.3} of d"),
    );
}

fn index_set_brute_force(
    a: &DiagonalAnisotropy,
    j: u32,
) -> Vec<(Vec<BranchType>, Vec<u32>)> {
    let d = a.dim();
    if j == 0 {
        return vec![(vec![BranchType::F; d], vec![0; d])];
    }
    let mut out = Vec::new();
    let cap: u32 = (0..d).map(|r| a.level(r, j) + 2).max().unwrap();
    for gc in 1..(1usize << d) {
        let g: Vec<BranchType> = (0..d)
            .map(|r| {
                if gc >> r & 1 == 1 {
                    BranchType::M
                } else {
                    BranchType::F
                }
            })
            .collect();
        let mut gamma = vec![0u32; d];
        'enumerate: loop {
            let idx = WaveletIndex {
                j,
                g: g.clone(),
                gamma: gamma.clone(),
                k: vec![0; d],
            };
            if idx.is_valid(a) {
                out.push((g.clone(), gamma.clone()));
            }
            let mut r = d;
            loop {
                if r == 0 {
                    break 'enumerate;
                }
                r -= 1;
                gamma[r] += 1;
                if gamma[r] <= cap {
                    break;
                }
                gamma[r] = 0;
            }
        }
    }
    out
}

#[test]
fn criterion_06_isotropic_sanity() {
    // 256^2, H0 = 0.5, 200 replicates: variogram log-log slope 1.00 +-
    // 0.10 and scaling-law exponent 0.50 +- 0.05.
    let spec = Arc::new(FieldSpec {
        e0: AnisotropyMatrix::diagonal(&[1.0, 1.0]).unwrap(),
        h0: 0.5,
        rho: PseudoNorm::euclidean(2),
        grid: GridGeometry {
            n: vec![256, 256],
            dx: vec![1.0, 1.0],
        },
        spectral: SpectralSettings {
            lattice_n: 256,
            refine_rings: 8,
        },
        seed: 60606,
    });
    let fields = synthesize_many(&spec, 200).unwrap();
    let ms = [3i64, 4, 6, 8, 12, 16, 24];
    let lags: Vec<Vec<f64>> = ms
        .iter()
        .flat_map(|&m| vec![vec![m as f64, 0.0], vec![0.0, m as f64]])
        .collect();
    let vg = variogram_estimate(&fields, &lags).unwrap();
    let xs: Vec<f64> = vg
        .lags
        .iter()
        .map(|h| (h[0] * h[0] + h[1] * h[1]).sqrt().ln())
        .collect();
    let ys: Vec<f64> = vg.v.iter().map(|v| v.ln()).collect();
    let slope = stats::ols_fit(&xs, &ys).unwrap().slope;
    let law = scaling_law_check_on(&fields, 4.0, 0.25).unwrap();
    let h_hat = law.fitted_h.unwrap();
    report(
        "6 (isotropic sanity)",
        (slope - 1.0).abs() <= 0.10 && (h_hat - 0.5).abs() <= 0.05,
        &format!("variogram slope {slope:.3} (1.00 +- 0.10), scaling exponent {h_hat:.3} (0.50 +- 0.05), 200 replicates"),
    );
}

#[test]
fn criterion_07_operator_scaling_law() {
    let fields = reference_batch();
    let mut details = Vec::new();
    let mut pass = true;
    for a in [2.0, 4.0] {
        let law = scaling_law_check_on(fields, a, 0.25).unwrap();
        let h_hat = law.fitted_h.unwrap();
        pass &= (h_hat - REFERENCE_H).abs() <= 0.05 && law.pass;
        details.push(format!(
            "a={a}: H {h_hat:.3} (0.40 +- 0.05), max discrepancy {:.3}",
            law.max_rel_discrepancy
        ));
    }
    report("7 (operator-scaling law)", pass, &details.join("; "));
}

#[test]
fn criterion_08_coefficient_variance_scaling() {
    // Per-branch variance law: within each branch type the constants
    // cancel, so the slope is read per G-chain over j in [2, 6] and the
    // chains are combined by their coefficient counts.
    let fields = &reference_batch()[..48];
    let aniso = DiagonalAnisotropy::new(&REFERENCE_LAMBDA).unwrap();
    let mut per: std::collections::BTreeMap<(String, u32), (f64, usize)> = Default::default();
    for f in fields {
        let set = anisotropic_wavelet_transform(&f.values, &aniso, u32::MAX, 4).unwrap();
        for b in set.branches() {
            if !b.canonical || b.j == 0 {
                continue;
            }
            let e = per.entry((b.g_code(), b.j)).or_insert((0.0, 0));
            e.0 += b.values.data().iter().map(|c| c * c).sum::<f64>();
            e.1 += b.values.len();
        }
    }
    let mut slopes = Vec::new();
    let mut weights = Vec::new();
    let mut chain_info = Vec::new();
    for code in ["FM", "MF", "MM"] {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut cells = 0usize;
        for ((g, j), (sum, cnt)) in &per {
            if g == code && (2..=6).contains(j) {
                xs.push(f64::from(*j));
                ys.push((sum / *cnt as f64).log2());
                cells += cnt;
            }
        }
        if xs.len() >= 3 {
            let fit = stats::ols_fit(&xs, &ys).unwrap();
            slopes.push(fit.slope);
            weights.push(cells as f64);
            chain_info.push(format!("{code} {:.3}", fit.slope));
        }
    }
    let wsum: f64 = weights.iter().sum();
    let slope = slopes
        .iter()
        .zip(&weights)
        .map(|(s, w)| s * w)
        .sum::<f64>()
        / wsum;
    report(
        "8 (coefficient variance scaling)",
        (slope + 2.0 * REFERENCE_H).abs() <= 0.15,
        &format!(
            "count-weighted chain slope {slope:.3} over j in [2,6] (-0.80 +- 0.15); chains: {}",
            chain_info.join(", ")
        ),
    );
}

#[test]
fn criterion_09_exponent_formulas() {
    let fields = &reference_batch()[..24];
    let cases = [
        ([1.2, 0.8], 0.40, "D = E0"),
        ([1.0, 1.0], 1.0 / 3.0, "D = Id"),
        ([0.8, 1.2], 0.4 * (0.8 / 1.2), "D = diag(0.8, 1.2)"),
    ];
    let mut pass = true;
    let mut details = Vec::new();
    for (lambda, target, label) in cases {
        let aniso = DiagonalAnisotropy::new(&lambda).unwrap();
        let alphas: Vec<f64> = fields
            .iter()
            .map(|f| {
                let set = anisotropic_wavelet_transform(&f.values, &aniso, u32::MAX, 4).unwrap();
                let jm = set.max_canonical_scale();
                besov::critical_exponent_estimate(&set, 2.0, 2.0, (2, jm - 1))
                    .unwrap()
                    .alpha_hat
            })
            .collect();
        let mean = stats::mean(&alphas);
        pass &= (mean - target).abs() <= 0.10;
        details.push(format!("{label}: alpha {mean:.3} (target {target:.3} +- 0.10)"));
    }
    report("9 (exponent formulas)", pass, &details.join("; "));
}

#[test]
fn criterion_10_optimality_search() {
    // 20 seeds, lambda grid 0.6..1.4 step 0.1: the argmax lands in
    // {1.1, 1.2, 1.3} in >= 90% of runs with modal value 1.2, the mean
    // H is 0.40 +- 0.10 and the tent fit explains the curve.
    let family = candidate_grid(2, 0.6, 1.4, 0.1).unwrap();
    let runs: Vec<(f64, f64, f64)> = (0..20u64)
        .map(|seed| {
            let spec = reference_spec(256, 77_000 + seed);
            let fields = synthesize_many(&spec, 4).unwrap();
            let res = estimate::anisotropy_search(&fields, &family, 2.0, 2.0).unwrap();
            (res.argmax.lambda()[0], res.h_hat, res.tent_r2)
        })
        .collect();
    let near: usize = runs
        .iter()
        .filter(|(lam, _, _)| (1.1..=1.3).contains(lam))
        .count();
    let modal = {
        let mut counts = std::collections::HashMap::new();
        for (lam, _, _) in &runs {
            *counts.entry((lam * 10.0).round() as i64).or_insert(0usize) += 1;
        }
        counts
            .into_iter()
            .max_by_key(|&(_, c)| c)
            .map(|(k, _)| k as f64 / 10.0)
            .unwrap()
    };
    let h_mean = stats::mean(&runs.iter().map(|r| r.1).collect::<Vec<f64>>());
    let r2s: Vec<f64> = runs.iter().map(|r| r.2).collect();
    let mut r2_sorted = r2s.clone();
    r2_sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let r2_median = r2_sorted[r2_sorted.len() / 2];
    let pass = near >= 18
        && (modal - 1.2).abs() < 1e-9
        && (h_mean - REFERENCE_H).abs() <= 0.10
        && r2_median >= 0.8;
    report(
        "10 (optimality search)",
        pass,
        &format!(
            "argmax in {{1.1,1.2,1.3}} in {near}/20 runs, modal {modal}, mean H {h_mean:.3} (0.40 +- 0.10), median tent R2 {r2_median:.3} (>= 0.8)"
        ),
    );
}

#[test]
fn criterion_11_normalized_coefficient_statistics() {
    let fields = &reference_batch()[..24];
    let aniso = DiagonalAnisotropy::new(&REFERENCE_LAMBDA).unwrap();
    // Aggregate per scale across replicates: effective sample size is the
    // summed cell count.
    let mut agg: std::collections::BTreeMap<u32, (f64, f64, usize, Vec<f64>)> = Default::default();
    for f in fields {
        let set = anisotropic_wavelet_transform(&f.values, &aniso, u32::MAX, 4).unwrap();
        let rows1 = estimate::normalized_coefficient_stats(&set, 1.0).unwrap();
        let rows2 = estimate::normalized_coefficient_stats(&set, 2.0).unwrap();
        for (r1, r2) in rows1.iter().zip(&rows2) {
            let e = agg.entry(r1.j).or_insert((0.0, 0.0, 0, Vec::new()));
            e.0 += r1.mean_p * r1.n_j as f64;
            e.1 += r2.mean_p * r2.n_j as f64;
            e.2 += r1.n_j;
            if r1.n_j >= 1000 {
                e.3.push(r1.max_norm);
            }
        }
    }
    let target1 = (2.0 / std::f64::consts::PI).sqrt();
    let mut pass = true;
    let mut details = Vec::new();
    let mut checked_lln = 0;
    let mut checked_max = 0;
    for (j, (sum1, sum2, n, maxes)) in &agg {
        let n_eff = *n as f64;
        if *n >= 10_000 {
            let m1 = sum1 / n_eff;
            let m2 = sum2 / n_eff;
            let ok = (m1 - target1).abs() / target1 <= 0.05 && (m2 - 1.0).abs() <= 0.05;
            if !ok {
                details.push(format!("j={j}: mean|g| {m1:.4}, mean|g|^2 {m2:.4}"));
            }
            pass &= ok;
            checked_lln += 1;
        }
        for m in maxes {
            if !(0.5..=3.0).contains(m) {
                pass = false;
                details.push(format!("j={j}: max statistic {m:.3} outside [0.5, 3.0]"));
            }
            checked_max += 1;
        }
    }
    report(
        "11 (normalized coefficient statistics)",
        pass && checked_lln >= 2 && checked_max > 0,
        &format!(
            "mean |g| within 5% of sqrt(2/pi) and mean |g|^2 within 5% of 1 at {checked_lln} scales with n_j >= 10^4; {checked_max} max statistics within [0.5, 3.0]{}",
            if details.is_empty() { String::new() } else { format!("; defects: {}", details.join(", ")) }
        ),
    );
}

#[test]
fn criterion_12_pseudo_norm_independence() {
    // Two specs differing only in the pseudo-norm kind; the critical
    // exponents agree within twice the combined standard errors.
    let n = 128usize;
    let reps = 32u32;
    let e0 = AnisotropyMatrix::diagonal(&REFERENCE_LAMBDA).unwrap();
    let spec_diag = Arc::new(FieldSpec {
        e0: e0.clone(),
        h0: REFERENCE_H,
        rho: PseudoNorm::diagonal_sum_weighted(
            &REFERENCE_LAMBDA,
            1.0,
            1.0,
            &balanced_weights(&REFERENCE_LAMBDA, 7.0),
        )
        .unwrap(),
        grid: GridGeometry {
            n: vec![n, n],
            dx: vec![1.0, 1.0],
        },
        spectral: SpectralSettings {
            lattice_n: n,
            refine_rings: 8,
        },
        seed: 121212,
    });
    let spec_int = Arc::new(FieldSpec {
        rho: integral_pseudonorm(e0.clone(), RadialProfile::smooth_bump(1.0, 2.0).unwrap())
            .unwrap(),
        ..(*spec_diag).clone()
    });
    let aniso = DiagonalAnisotropy::new(&REFERENCE_LAMBDA).unwrap();
    let estimate_alpha = |spec: &Arc<FieldSpec>| -> (f64, f64) {
        let fields = synthesize_many(spec, reps).unwrap();
        let alphas: Vec<f64> = fields
            .iter()
            .map(|f| {
                let set = anisotropic_wavelet_transform(&f.values, &aniso, u32::MAX, 4).unwrap();
                let jm = set.max_canonical_scale();
                besov::critical_exponent_estimate(&set, 2.0, 2.0, (2, jm - 1))
                    .unwrap()
                    .alpha_hat
            })
            .collect();
        (stats::mean(&alphas), stats::stderr_mean(&alphas))
    };
    let (a1, se1) = estimate_alpha(&spec_diag);
    let (a2, se2) = estimate_alpha(&spec_int);
    let gate = 2.0 * (se1 + se2);
    report(
        "12 (pseudo-norm independence)",
        (a1 - a2).abs() <= gate,
        &format!(
            "alpha {a1:.4} +- {se1:.4} (diagonal-sum) vs {a2:.4} +- {se2:.4} (integral): |diff| {:.4} <= {gate:.4}",
            (a1 - a2).abs()
        ),
    );
}
