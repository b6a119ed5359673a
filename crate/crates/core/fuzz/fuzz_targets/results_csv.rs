#![no_main]

use ioml::bench::ResultsTable;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(t) = ResultsTable::read_csv(data) {
        let csv = t.to_csv_string();
        let back = ResultsTable::read_csv(csv.as_bytes()).expect("written table parses");
        assert_eq!(back.rows.len(), t.rows.len());
        assert_eq!(back.to_csv_string(), csv);
    }
});
