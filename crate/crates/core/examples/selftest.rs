//! The property suite behind `riemmix selftest`, printed group by group.

use riemmix::checks::selftest_groups;

fn main() {
    for group in selftest_groups(0, 0.0).unwrap() {
        println!("{} ({})", group.name, if group.passed() { "pass" } else { "FAIL" });
        for r in &group.reports {
            println!("  {r}");
        }
    }
}
