#![no_main]

use libfuzzer_sys::fuzz_target;
use roughman::scenario::ScenarioConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = ScenarioConfig::from_json(text) {
        let _ = cfg.name();
        let json = serde_json::to_string(&cfg).expect("config serializes");
        let again = ScenarioConfig::from_json(&json).expect("serialized config parses");
        assert_eq!(again, cfg);
    }
});
