#![no_main]

use libfuzzer_sys::fuzz_target;
use pbf_safety::config::ScenarioConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        // must never panic; a valid parse must also survive validation
        if let Ok(cfg) = ScenarioConfig::parse_str(text) {
            let _ = cfg.validate();
            let _ = cfg.compensation();
        }
    }
});
