use gibbs_causal::calibrate::plugin_omega;
use gibbs_causal::dgp::{default_spec, generate, DgpId};
use gibbs_causal::gibbs_ate::{closed_form_posterior, credible_interval, vi_posterior, NormalPrior};
use gibbs_causal::numerics::{OptimizerConfig, Rng};
use gibbs_causal::nuisance::{cross_fit, NuisanceConfig};
use gibbs_causal::pseudo::{cross_fitted_pseudo, Strategy};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = default_spec(DgpId::D9);
    let ds = generate(&spec, 1000, &mut Rng::new(3, 0))?;
    let cf = cross_fit(&ds, &NuisanceConfig::default(), &mut Rng::new(3, 1))?;
    println!("--- ATE posteriors on D9, n = {} (true ATE {:.4}) ---\n", ds.n(), spec.ate());

    let priors = [
        ("N(0,1)", NormalPrior::default()),
        ("N(5,0.01)", NormalPrior::new(5.0, 0.01)?),
        ("flat", NormalPrior::diffuse()),
    ];
    for s in Strategy::ALL {
        let pseudo = cross_fitted_pseudo(&ds, &cf, s)?;
        let omega = plugin_omega(&pseudo)?;
        println!("{s}: omega = {omega:.4}");
        for (name, prior) in &priors {
            let post = closed_form_posterior(&pseudo, prior, omega)?;
            let (lo, hi) = credible_interval(&post, 0.05)?;
            println!("  prior {name:<10} mean {:>7.4}  sd {:.4}  95% CrI [{lo:.4}, {hi:.4}]", post.m_p, post.sd());
        }
    }

    // The Gaussian variational engine should land on the same answer.
    let pseudo = cross_fitted_pseudo(&ds, &cf, Strategy::Dr)?;
    let omega = plugin_omega(&pseudo)?;
    let prior = NormalPrior::default();
    let exact = closed_form_posterior(&pseudo, &prior, omega)?;
    let vi = vi_posterior(&pseudo, &prior, omega, &OptimizerConfig::default(), &mut Rng::new(3, 2))?;
    println!("\nDR closed form: mean {:.5} sd {:.5}", exact.m_p, exact.sd());
    println!("DR variational: mean {:.5} sd {:.5}", vi.m_p, vi.sd());
    Ok(())
}
