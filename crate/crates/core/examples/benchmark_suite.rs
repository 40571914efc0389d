//! The desk suite over two seeds, printed as a detection table. Pass a
//! directory to also write the report files.

use idt_core::bench::{run_benchmark, Suite};
use idt_core::cli::write_bench_outputs;

fn main() -> idt_core::Result<()> {
    let seeds = [0, 1];
    let report = run_benchmark(&Suite::desk(), &seeds)?;
    print!("{}", report.summary.to_text());
    for c in &report.conditions {
        let union = c.summary.row("union").expect("union row");
        println!("{:<24} union {:>5.1}%", c.name, union.detection_rate_pct);
    }
    if let Some(dir) = std::env::args().nth(1) {
        write_bench_outputs(dir.as_ref(), &seeds, &report)?;
        println!("wrote {dir}");
    }
    Ok(())
}
