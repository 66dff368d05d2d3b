#![no_main]

use inertia_lab::problems::ProblemSpec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(spec) = ProblemSpec::parse(data) {
        // generated instances run a long reference solve; keep iterations fast
        if spec.family != "lasso" {
            let _ = spec.build();
        }
    }
});
