use gibbs_causal::calibrate::plugin_omega;
use gibbs_causal::dgp::{default_spec, generate, DgpId};
use gibbs_causal::gibbs_cate::{exact_gp_posterior, pointwise_intervals, svgp_fit, KernelParams, PointwisePosterior};
use gibbs_causal::numerics::{Matrix, OptimizerConfig, Rng};
use gibbs_causal::nuisance::{cross_fit, NuisanceConfig};
use gibbs_causal::pseudo::{cross_fitted_pseudo, Strategy};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = default_spec(DgpId::D2);
    let ds = generate(&spec, 1000, &mut Rng::new(21, 0))?;
    let cf = cross_fit(&ds, &NuisanceConfig::default(), &mut Rng::new(21, 1))?;
    let pseudo = cross_fitted_pseudo(&ds, &cf, Strategy::Dr)?;
    let omega = plugin_omega(&pseudo)?;
    let kernel = KernelParams::default();

    // Sparse GP with 20 inducing points drawn from the training covariates.
    let sparse = svgp_fit(ds.x(), &pseudo, &kernel, omega, 20, &OptimizerConfig::default(), &mut Rng::new(21, 2))?;
    let exact = exact_gp_posterior(ds.x(), &pseudo, &kernel, omega)?;

    // Slice along x1 with x2 held at zero.
    let grid: Vec<Vec<f64>> = (0..9).map(|i| vec![-2.0 + 0.5 * i as f64, 0.0]).collect();
    let xq = Matrix::from_rows(&grid)?;
    let (sm, sv) = sparse.predict(&xq)?;
    let (em, _) = exact.predict(&xq)?;
    let cis = pointwise_intervals(&sm, &sv, 0.05)?;

    println!("--- CATE on D2 along x1 (x2 = 0), omega = {omega:.4} ---\n");
    println!("{:>6} {:>8} {:>9} {:>9} {:>20}", "x1", "truth", "sparse", "exact", "95% CrI (sparse)");
    for (i, x) in grid.iter().enumerate() {
        println!(
            "{:>6.2} {:>8.3} {:>9.3} {:>9.3}   [{:>6.3}, {:>6.3}]",
            x[0],
            spec.cate(x),
            sm[i],
            em[i],
            cis[i].0,
            cis[i].1
        );
    }
    println!("\nsparse fit: constant mean {:.4}, final objective {:.3}", sparse.const_mean, sparse.neg_elbo);
    Ok(())
}
