//! One PASS/FAIL line per reproduction criterion; exits non-zero when any
//! criterion fails.

use sphere_blasso::commands::thread_count;
use sphere_blasso::repro;
use sphere_blasso_core::solver::SolverConfig;

fn main() {
    let threads = thread_count().unwrap_or(1);
    let criteria = match repro::run(&SolverConfig::default(), threads) {
        Ok(c) => c,
        Err(e) => {
            println!("FAIL reproduction aborted: {e}");
            std::process::exit(1);
        }
    };
    for c in &criteria {
        println!("{}", c.line());
    }
    let failed = criteria.iter().filter(|c| !c.passed).count();
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
