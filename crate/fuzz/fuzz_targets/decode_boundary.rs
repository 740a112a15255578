#![no_main]
use fvp_core::duhamel::ClusterEnd;
use fvp_core::{HeatDomain, TimeGrid};
use libfuzzer_sys::fuzz_target;
use serde_json::Value;

fuzz_target!(|data: &[u8]| {
    let Some((&selector, rest)) = data.split_first() else {
        return;
    };
    let Ok(value) = serde_json::from_slice::<Value>(rest) else {
        return;
    };
    let domain = if selector & 1 == 0 {
        HeatDomain::interval(1.0, 8)
    } else {
        HeatDomain::rectangle([1.0, 2.0], [4, 4])
    };
    let grid = TimeGrid::graded(1.0, 1 + (selector >> 1) as usize % 16, 2.0, ClusterEnd::End).unwrap();
    let _ = fvp_core::problem::decode_boundary(&value, "", &domain, &grid);
});
