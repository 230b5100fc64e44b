#![no_main]

use libfuzzer_sys::fuzz_target;
use quadba::game::{parse_script, BallSpec};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    let _ = serde_json::from_str::<BallSpec>(s);
    if let Ok(moves) = parse_script(s) {
        let text = serde_json::to_string(&moves).unwrap();
        if moves.iter().all(|m| m.center.iter().all(|c| c.is_finite()) && m.radius.is_finite()) {
            assert_eq!(parse_script(&text).unwrap(), moves);
        }
    }
});
