use gibbs_causal::dgp::{default_spec, generate, DgpId};
use gibbs_causal::numerics::Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = 2000;
    println!("--- Built-in data-generating processes (n = {n}) ---\n");
    println!("{:<4} {:<54} {:>3} {:>8} {:>8} {:>7}", "id", "description", "d", "ATE", "naive", "treated");

    for id in DgpId::ALL {
        let spec = default_spec(id);
        let ds = generate(&spec, n, &mut Rng::new(7, 0))?;

        // Difference in arm means ignores confounding, so it drifts from the truth.
        let (mut s1, mut s0) = (0.0, 0.0);
        for (a, y) in ds.a().iter().zip(ds.y()) {
            if *a == 1 {
                s1 += y;
            } else {
                s0 += y;
            }
        }
        let n1 = ds.arm_count(1) as f64;
        let naive = s1 / n1 - s0 / (n as f64 - n1);
        println!(
            "{:<4} {:<54} {:>3} {:>8.4} {:>8.4} {:>6.1}%",
            id.to_string(),
            id.description(),
            ds.dim(),
            spec.ate(),
            naive,
            100.0 * n1 / n as f64
        );
    }

    // Parameters can be overridden; the truth follows.
    let tweaked = default_spec(DgpId::D1).with_param("tau", -1.0);
    let ds = generate(&tweaked, 50, &mut Rng::new(7, 1))?;
    let path = std::env::temp_dir().join("gbc_d1_tau_minus_one.csv");
    ds.write_csv(&path)?;
    println!("\nD1 with tau = -1 has ATE {}; 50 rows written to {}", tweaked.ate(), path.display());
    Ok(())
}
