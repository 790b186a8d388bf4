//! Shared inputs for the criterion benchmarks.

use grasploop_core::{generate_suite, BenchmarkSuite, GraspRect, SuiteConfig};

pub const REFERENCE_PROGRAM: &str = "let bottles = find(image, \"bottle\");
let ordered = sort_by(bottles, \"center_x\", \"asc\");
let target = ordered[1];
let grasp = grasp_detection(target)[0];
return grasp;
";

pub const ORDINAL_QUERY: &str = "grasp the second bottle from the left";

/// `n` overlapping rectangle pairs on a fixed sweep of offsets and angles.
pub fn rect_pairs(n: usize) -> Vec<(GraspRect, GraspRect)> {
    (0..n)
        .map(|i| {
            let t = i as f64;
            let a = GraspRect::new(
                200.0,
                200.0,
                40.0 + t % 17.0,
                20.0 + t % 11.0,
                (t * 7.0) % 180.0,
            )
            .expect("valid rect");
            let b = GraspRect::new(
                200.0 + t % 13.0,
                195.0 + t % 9.0,
                35.0,
                25.0,
                (t * 13.0) % 180.0,
            )
            .expect("valid rect");
            (a, b)
        })
        .collect()
}

pub fn suite(n_cases: usize, seed: u64) -> BenchmarkSuite {
    let config = SuiteConfig {
        n_cases,
        ..Default::default()
    };
    generate_suite(&config, seed).expect("default mix generates")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inputs_are_usable() {
        assert!(rect_pairs(64)
            .iter()
            .all(|(a, b)| grasploop_core::rotated_iou(a, b) > 0.0));
        assert!(grasploop_core::parse(REFERENCE_PROGRAM).is_ok());
        assert_eq!(suite(10, 1).cases.len(), 10);
    }
}
