#![no_main]
//! Field-spec loader must reject arbitrary bytes gracefully: no panics,
//! no unbounded allocation.

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(spec) = osgrf::io::field_spec_from_slice(data) {
        // Accepted specs must re-serialize and re-parse to the same value.
        let json = serde_json::to_vec(&osgrf::io::field_spec_to_json(&spec)).unwrap();
        let again = osgrf::io::field_spec_from_slice(&json).expect("roundtrip parses");
        assert_eq!(again, spec);
    }
});
