#![no_main]

use libfuzzer_sys::fuzz_target;
use pbf_safety::report::{read_certificate_csv, write_certificate_csv};

fuzz_target!(|data: &[u8]| {
    if let Ok(records) = read_certificate_csv(data) {
        // anything we accept must survive a write/read round trip
        let mut buf = Vec::new();
        write_certificate_csv(&records, &mut buf).unwrap();
        let back = read_certificate_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), records.len());
    }
});
