#![no_main]

use inertia_lab::cli::{report_table, ReportArgs};
use inertia_lab::formats::parse_table;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    let Ok(table) = parse_table(data) else { return };
    for envelope in [false, true] {
        let args = ReportArgs {
            input: "fuzz.csv".into(),
            fit_window: 0.5,
            envelope,
            x: None,
            y: "gap".into(),
        };
        let _ = report_table(&table, &args);
    }
});
