#![no_main]

use ioml::pop::PopInstance;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(pop) = PopInstance::from_json(s) {
        let back = PopInstance::from_json(&pop.to_json()).expect("serialized instance parses");
        assert_eq!(back.n(), pop.n());
        assert_eq!(back.m(), pop.m());
        assert_eq!(back.q(), pop.q());
    }
});
