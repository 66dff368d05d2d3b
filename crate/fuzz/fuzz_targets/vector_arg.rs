#![no_main]

use inertia_lab::formats::{fmt_f64, parse_vector};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(v) = parse_vector(data) {
        assert!(v.iter().all(|x| x.is_finite()));
        let text: Vec<String> = v.iter().map(|x| fmt_f64(*x)).collect();
        assert_eq!(parse_vector(&text.join(",")).unwrap(), v);
    }
});
