use gibbs_causal::dgp::{default_spec, generate, DgpId};
use gibbs_causal::numerics::{mean, sample_variance, Rng};
use gibbs_causal::nuisance::{cross_fit, NuisanceConfig};
use gibbs_causal::pseudo::{cross_fitted_pseudo, pseudo_with, Strategy};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = default_spec(DgpId::D2);
    let ds = generate(&spec, 3000, &mut Rng::new(11, 0))?;

    // Nuisances are fitted on four folds and evaluated on the fifth.
    let config = NuisanceConfig::default();
    let cf = cross_fit(&ds, &config, &mut Rng::new(11, 1))?;
    println!("--- Cross-fitted pseudo-outcomes on D2 (true ATE {:.3}) ---", spec.ate());
    println!("folds: {:?}\n", cf.folds.sizes());

    let held_out = cf.held_out(&ds);
    for i in 0..3 {
        let nv = held_out[i];
        println!(
            "row {i}: a={} y={:>7.3}  e_hat={:.3} (true {:.3})  m0_hat={:>6.3}  m1_hat={:>6.3}",
            ds.a()[i],
            ds.y()[i],
            nv.e,
            spec.propensity(ds.x().row(i)),
            nv.m0,
            nv.m1
        );
    }

    println!("\n{:<5} {:>10} {:>10} {:>12}", "", "mean", "sd", "oracle mean");
    for s in Strategy::ALL {
        let fitted = cross_fitted_pseudo(&ds, &cf, s)?;
        let oracle = pseudo_with(&ds, &spec, s);
        println!(
            "{:<5} {:>10.4} {:>10.4} {:>12.4}",
            s.to_string(),
            fitted.mean(),
            sample_variance(&fitted.values).sqrt(),
            mean(&oracle.values)
        );
    }
    Ok(())
}
