#![no_main]
use libfuzzer_sys::fuzz_target;

// Parsing plus everything a run resolves before computing.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(spec) = fvp_core::parse_problem(text) else {
        return;
    };
    let _ = spec.source();
    let _ = spec.boundary();
    let _ = spec.initial_state();
    let _ = spec.final_state();
});
