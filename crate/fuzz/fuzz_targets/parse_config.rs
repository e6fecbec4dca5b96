#![no_main]
use libfuzzer_sys::fuzz_target;
use spintoda_cli::config::parse_config;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = parse_config(text) {
        // anything accepted must survive a write/read cycle
        let again = serde_json::to_string(&cfg).unwrap();
        parse_config(&again).unwrap();
    }
});
