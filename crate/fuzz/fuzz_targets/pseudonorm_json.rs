#![no_main]
//! Pseudo-norm specs parsed from untrusted JSON must evaluate without
//! panicking on a handful of probe points.

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(json) = serde_json::from_slice::<osgrf::io::PseudoNormJson>(data) else {
        return;
    };
    let Ok(rho) = osgrf::io::pseudo_norm_from_json(&json) else {
        return;
    };
    if rho.dim() > 4 {
        return;
    }
    let probes = [0.0, 1.0, -3.5, 1e-9, 1e9];
    for &a in &probes {
        let x: Vec<f64> = (0..rho.dim()).map(|i| a + i as f64).collect();
        let _ = rho.evaluate(&x);
    }
});
