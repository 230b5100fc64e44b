#![no_main]

use libfuzzer_sys::fuzz_target;
use quadba::QuadraticForm;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    let Ok(q) = QuadraticForm::parse(&format!("[{s}]")) else { return };
    if let Some(m) = q.transform() {
        // the transform carries the diagonal form back onto the input matrix
        let v: Vec<_> = (0..q.dim()).map(|i| quadba::rational::int(i as i64 + 1)).collect();
        let x = quadba::forms::mat_vec(m, &v);
        assert_eq!(q.evaluate_general(&x).unwrap(), q.evaluate(&v).unwrap());
    }
});
