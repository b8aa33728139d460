use gibbs_causal::bench::{orthogonality_slopes, tv_stability};
use gibbs_causal::dgp::{default_spec, DgpId};
use gibbs_causal::pseudo::Strategy;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = default_spec(DgpId::D1);

    // Perturb the true nuisances by delta and watch the point estimate move.
    println!("--- Point-estimate shift vs nuisance error (D1, n = 100000) ---\n");
    let deltas = [0.2, 0.1, 0.05, 0.025];
    for s in orthogonality_slopes(&spec, &deltas, 100_000, 1)? {
        let shifts: Vec<String> = s.shifts.iter().map(|v| format!("{v:.2e}")).collect();
        println!("{:<4} shifts [{}]  log-log slope {:.2}", s.strategy.to_string(), shifts.join(", "), s.slope);
    }

    // Total variation between feasible and oracle posteriors as n grows.
    println!("\n--- TV(feasible, oracle) with nuisance error n^-beta ---\n");
    let grid = [500, 2000, 8000];
    for (strategy, beta) in [(Strategy::Dr, 0.3), (Strategy::Ipw, 0.3), (Strategy::Dr, 0.1), (Strategy::Ipw, 0.1)] {
        let points = tv_stability(&spec, strategy, beta, &grid, 20, 1)?;
        let tv: Vec<String> = points.iter().map(|p| format!("{:.3}±{:.3}", p.tv_mean, p.tv_se)).collect();
        println!("{:<4} beta {beta}: {}", strategy.to_string(), tv.join("  "));
    }
    Ok(())
}
