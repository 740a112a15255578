#![no_main]
use libfuzzer_sys::fuzz_target;
use serde_json::Value;

fuzz_target!(|data: &[u8]| {
    let Ok(value) = serde_json::from_slice::<Value>(data) else {
        return;
    };
    let _ = fvp_core::problem::decode_matrix(&value, "");
    let _ = fvp_core::problem::decode_vector(&value, "");
    let _ = fvp_core::problem::decode_scalar(&value, "");
});
