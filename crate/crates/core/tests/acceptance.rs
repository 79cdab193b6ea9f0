use std::process::ExitCode;

use gdft::verify::{self, CriterionReport};

fn main() -> ExitCode {
    let checks: Vec<fn() -> CriterionReport> = vec![
        verify::criterion_1,
        verify::criterion_2,
        verify::criterion_3,
        verify::criterion_4,
        verify::criterion_5,
        verify::criterion_6,
        verify::criterion_7,
        verify::criterion_8,
        || verify::criterion_9(verify::PROPERTY_TRIALS),
    ];
    let reports: Vec<CriterionReport> = std::thread::scope(|s| {
        let handles: Vec<_> = checks.iter().map(|f| s.spawn(f)).collect();
        handles.into_iter().map(|h| h.join().expect("criterion thread panicked")).collect()
    });
    println!("\nacceptance criteria");
    for r in &reports {
        println!("{}", r.line());
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    println!("acceptance: {} passed; {failed} failed", reports.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
