#![no_main]

use libfuzzer_sys::fuzz_target;
use quadba::QuadraticForm;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(q) = QuadraticForm::parse(s) {
        // a parsed form survives its own serialization
        let back = QuadraticForm::parse(&q.to_string()).expect("display form reparses");
        assert_eq!(back.signed_coeffs(), q.signed_coeffs());
    }
});
