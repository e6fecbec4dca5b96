#![no_main]
use libfuzzer_sys::fuzz_target;
use spintoda::liealg::parse_root_key;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        let _ = parse_root_key(s);
    }
});
