//! `stone check`: the built-in verification battery.

use stone_core::verify::{run_battery, BatteryConfig, CheckOutcome};

/// Runs every check and returns the outcomes; the caller decides how to report them.
pub fn cmd_check(config: &BatteryConfig) -> Vec<CheckOutcome> {
    run_battery(config)
}

pub fn render(outcomes: &[CheckOutcome]) -> String {
    outcomes
        .iter()
        .map(|c| {
            let status = if c.passed { "PASS" } else { "FAIL" };
            format!("{status} {:<28} {}\n", c.name, c.detail)
        })
        .collect()
}
