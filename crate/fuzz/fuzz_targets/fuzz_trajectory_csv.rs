#![no_main]

use libfuzzer_sys::fuzz_target;
use pbf_safety::report::read_trajectory_csv;

fuzz_target!(|data: &[u8]| {
    let _ = read_trajectory_csv(data);
});
