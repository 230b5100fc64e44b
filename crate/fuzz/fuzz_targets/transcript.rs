#![no_main]

use libfuzzer_sys::fuzz_target;
use quadba::game::Transcript;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(t) = Transcript::from_json(s) {
        let again = Transcript::from_json(&t.to_json()).expect("encoded transcript decodes");
        assert_eq!(again.to_json(), t.to_json());
    }
});
