#![no_main]

use libfuzzer_sys::fuzz_target;
use quadba::rational::{fmt_rational, parse_rational, parse_rational_vector};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(v) = parse_rational_vector(s) {
        for r in &v {
            assert_eq!(&parse_rational(&fmt_rational(r)).unwrap(), r);
        }
    }
});
