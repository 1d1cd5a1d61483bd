#![no_main]
//! Realization loader: header JSON plus raw payload, split by a 2-byte
//! length prefix. Must reject mismatched or corrupt parts gracefully.

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if data.len() < 2 {
        return;
    }
    let split = u16::from_le_bytes([data[0], data[1]]) as usize;
    let rest = &data[2..];
    if split > rest.len() {
        return;
    }
    let (header, payload) = rest.split_at(split);
    let _ = osgrf::io::realization_from_parts(header, payload);
});
