#![no_main]

use beliefplan::table_io::{parse_table, write_entries};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(t) = parse_table(text) {
        let entries: Vec<_> = t.entries.iter().map(|(k, v)| (k, *v)).collect();
        let again = parse_table(&write_entries(&t.header, &entries)).expect("written table parses");
        assert_eq!(again, t);
    }
});
