#![no_main]

use ioml::regions::{locate_region, RegionMap};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(map) = RegionMap::from_json(s) {
        let centre: Vec<f64> = map.bx.iter().map(|&(lo, hi)| 0.5 * (lo + hi)).collect();
        if let Ok(k) = locate_region(&map, &centre) {
            let _ = map.regions[k].x_star(&centre);
        }
        let back = RegionMap::from_json(&map.to_json()).expect("serialized map parses");
        assert_eq!(back.len(), map.len());
    }
});
