#![no_main]

use ioml::inverse::FitResult;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(r) = FitResult::from_json(s) {
        assert!(r.c_hat.iter().all(|v| v.is_finite()));
        let back = FitResult::from_json(&r.to_json()).expect("serialized fit parses");
        assert_eq!(back.c_hat, r.c_hat);
    }
});
