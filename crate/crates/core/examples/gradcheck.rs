//! Runs the finite-difference gradient suite: every tape op, the unrolled
//! decoder loss in both LSTM input modes, and one deliberately broken op
//! that the checker must flag.
//!
//! ```text
//! cargo run --release --example gradcheck [trials]
//! ```

use std::time::Instant;

use cha::autograd::gradcheck::{check_faulty_op, check_ops};
use cha::cli::gradcheck_line;
use cha::train::gradcheck::check_decoder;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let trials = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(6);
    let start = Instant::now();
    let mut outcomes = check_ops(trials, 0)?;
    outcomes.extend(check_decoder(trials, 0)?);
    for o in &outcomes {
        println!("{}", gradcheck_line(o));
    }
    let cases: usize = outcomes.iter().map(|o| o.trials).sum();
    let passed = outcomes.iter().all(|o| o.passed());
    println!(
        "{cases} cases, {} in {:.2}s",
        if passed { "all passed" } else { "FAILURES" },
        start.elapsed().as_secs_f64()
    );

    let faulty = check_faulty_op(trials, 0)?;
    println!("\nwith a wrong backward rule:\n{}", gradcheck_line(&faulty));
    Ok(())
}
