//! Power of BH and Bonferroni on the same alternatives, as the shift grows.

use conformal_ood::simulation::{estimate_power, DetectorSpec, SyntheticModel};
use conformal_ood::{required_cal_size, CalSizeRequest, DetectorConfig, Method};

fn main() -> conformal_ood::Result<()> {
    let k = 6;
    let bh = DetectorConfig::bh(0.1, 1.0, 0.1, k)?;
    let bonf = bh.with_method(Method::Bonferroni);
    let n_cal = required_cal_size(&CalSizeRequest::from_config(&bh, 1_000_000)?)?;
    let null = SyntheticModel::iid_normal(k, 0)?;
    println!("n_cal = {n_cal}");
    println!("shifted  shift      BH  Bonferroni");
    for shifted in [1, 2, 6] {
        for shift in [2.0, 3.0, 4.0, 6.0] {
            let mean: Vec<f64> = (0..k).map(|i| if i < shifted { shift } else { 0.0 }).collect();
            let alt = SyntheticModel::shifted(mean, 1)?;
            let p = |cfg| estimate_power(&null, &alt, &DetectorSpec::Combined(cfg), n_cal, 10_000, 3, 4);
            println!(
                "{shifted:>7} {shift:>6} {:>7.4} {:>11.4}",
                p(bh)?.estimate,
                p(bonf)?.estimate
            );
        }
    }
    Ok(())
}
