//! Input: domain text, a NUL byte, problem text.
#![no_main]

use beliefplan::{parse_problem, serialize_problem};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let (domain, problem) = text.split_once('\0').unwrap_or((text, ""));
    if let Ok(p) = parse_problem(domain, problem) {
        let (d, q) = serialize_problem(&p);
        let back = parse_problem(&d, &q).expect("serialized problem parses");
        assert_eq!(back, p);
    }
});
