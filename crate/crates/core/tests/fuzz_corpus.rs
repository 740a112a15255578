//! Replays the checked-in fuzz seeds through the same entry points as the
//! fuzz targets.

use std::fs;
use std::path::Path;

use fvp_core::duhamel::ClusterEnd;
use fvp_core::problem::{decode_boundary, decode_matrix, decode_scalar, decode_vector};
use fvp_core::{parse_problem, HeatDomain, TimeGrid};

fn seeds(target: &str) -> Vec<Vec<u8>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir).unwrap().map(|e| fs::read(e.unwrap().path()).unwrap()).collect();
    assert!(!out.is_empty(), "no seeds in {}", dir.display());
    out.sort();
    out
}

#[test]
fn problem_seeds_parse_and_resolve() {
    for seed in seeds("parse_problem").iter().chain(&seeds("build_problem")) {
        let spec = parse_problem(std::str::from_utf8(seed).unwrap()).unwrap();
        let _ = spec.source();
        let _ = spec.boundary();
        let _ = spec.initial_state();
        let _ = spec.final_state();
    }
}

#[test]
fn matrix_seeds_decode() {
    for seed in seeds("decode_matrix") {
        let value: serde_json::Value = serde_json::from_slice(&seed).unwrap();
        let _ = decode_matrix(&value, "");
        let _ = decode_vector(&value, "");
        let _ = decode_scalar(&value, "");
    }
}

#[test]
fn boundary_seeds_decode() {
    for seed in seeds("decode_boundary") {
        let (&selector, rest) = seed.split_first().unwrap();
        let value: serde_json::Value = serde_json::from_slice(rest).unwrap();
        let domain = if selector & 1 == 0 {
            HeatDomain::interval(1.0, 8)
        } else {
            HeatDomain::rectangle([1.0, 2.0], [4, 4])
        };
        let grid = TimeGrid::graded(1.0, 1 + (selector >> 1) as usize % 16, 2.0, ClusterEnd::End).unwrap();
        decode_boundary(&value, "", &domain, &grid).unwrap();
    }
}
