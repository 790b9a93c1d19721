#![no_main]

use libfuzzer_sys::fuzz_target;
use roughman::scenario::DriverSpec;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(spec) = DriverSpec::from_json(text) {
        let json = serde_json::to_string(&spec).expect("driver spec serializes");
        assert_eq!(DriverSpec::from_json(&json).expect("serialized spec parses"), spec);
        if let Ok(driver) = spec.build() {
            let h = driver.horizon();
            let _ = driver.eval(0.0, 0.5 * h);
        }
    }
});
