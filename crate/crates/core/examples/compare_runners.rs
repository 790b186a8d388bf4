//! Generates the default suite and prints closed-loop and baseline results.
//!
//! cargo run --release -p grasploop-core --example compare_runners -- 42

use grasploop_core::benchmark::{evaluate, generate_suite, EvalConfig, Runner, SuiteConfig};
use grasploop_core::toolset::MockConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args()
        .nth(1)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(42);
    let suite = generate_suite(&SuiteConfig::default(), seed)?;
    for runner in [Runner::Loop, Runner::Baseline] {
        let config = EvalConfig {
            runner,
            tools: MockConfig::noiseless(seed),
            ..Default::default()
        };
        print!("{}", evaluate(&suite, &config)?.summary());
    }
    Ok(())
}
