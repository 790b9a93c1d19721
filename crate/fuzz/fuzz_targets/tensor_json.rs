#![no_main]

use libfuzzer_sys::fuzz_target;
use roughman::TruncatedTensor;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(t) = TruncatedTensor::from_json(text) {
        let again = TruncatedTensor::from_json(&t.to_json()).expect("serialized tensor parses");
        assert_eq!(again, t);
        if t.scalar() != 0.0 && t.max_abs().is_finite() {
            let _ = t.log();
            let _ = t.group_inverse();
        }
    }
});
