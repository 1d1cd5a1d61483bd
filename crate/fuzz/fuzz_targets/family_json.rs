#![no_main]
//! Candidate-family loader must never panic on arbitrary bytes.

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = osgrf::io::family_from_slice(data);
});
