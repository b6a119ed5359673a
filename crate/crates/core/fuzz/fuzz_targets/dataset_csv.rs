#![no_main]

use ioml::pop::{Dataset, DatasetMeta};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let meta = DatasetMeta { generator: "fuzz".into(), seed: 0, k: 0, bx: None };
    if let Ok(d) = Dataset::read_csv(data, meta.clone()) {
        assert_eq!(d.u.len(), d.x.len());
        let mut buf = Vec::new();
        d.write_csv(&mut buf).expect("writes to memory");
        let back = Dataset::read_csv(buf.as_slice(), meta).expect("written dataset parses");
        assert_eq!(back.u, d.u);
        assert_eq!(back.x, d.x);
    }
});
