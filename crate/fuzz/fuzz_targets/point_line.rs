#![no_main]

use libfuzzer_sys::fuzz_target;
use quadba::lattice::LatticePoint;
use quadba::QuadraticForm;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    let q = QuadraticForm::parse("1,1,-1").unwrap();
    if let Ok(p) = LatticePoint::from_json_line(&q, s) {
        assert_eq!(LatticePoint::from_json_line(&q, &p.to_json_line()).unwrap(), p);
    }
});
