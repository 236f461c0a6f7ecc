//! Smallest calibration set for the conditional false-alarm guarantee, and
//! how it grows with the number of scores.

use conformal_ood::multiple_testing::bh_condition;
use conformal_ood::{required_cal_size, required_cal_size_bonferroni, CalSizeRequest};

fn main() -> conformal_ood::Result<()> {
    let req = CalSizeRequest::new(0.1, 1.0, 0.1, 5)?;
    let n = required_cal_size(&req)?;
    println!("alpha = 0.1, epsilon = 1, delta = 0.1, K = 5 -> n_cal = {n}");

    let check = bh_condition(&req, n);
    for r in &check.rungs {
        println!(
            "  rung {}: Beta({}, {}) at {:.5} -> {:.6} (target {:.6})",
            r.j,
            r.a,
            r.b,
            r.x,
            r.cdf.unwrap_or(f64::NAN),
            check.target
        );
    }

    println!("\n K   BH  Bonferroni");
    for k in 1..=8 {
        let req = CalSizeRequest { k, ..req };
        println!(
            "{k:>2} {:>5} {:>10}",
            required_cal_size(&req)?,
            required_cal_size_bonferroni(&req)?
        );
    }
    Ok(())
}
