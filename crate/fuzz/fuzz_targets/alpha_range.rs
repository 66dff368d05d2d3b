#![no_main]

use inertia_lab::formats::{parse_alpha_range, MAX_RANGE_POINTS};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(alphas) = parse_alpha_range(data) {
        assert!(!alphas.is_empty() && alphas.len() <= MAX_RANGE_POINTS);
    }
});
