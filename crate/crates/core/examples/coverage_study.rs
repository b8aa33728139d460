use gibbs_causal::bench::{length_sweep, markdown_table, run_ate_bench, write_reports_csv, BenchSettings, CalibrationMode};
use gibbs_causal::dgp::{default_spec, DgpId};
use gibbs_causal::gibbs_ate::NormalPrior;
use gibbs_causal::pseudo::Strategy;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let settings = BenchSettings::default();
    let prior = NormalPrior::default();
    let reps = 30;

    // A slice of the headline study; the full one runs through `gbc bench`.
    let mut reports = Vec::new();
    for id in [DgpId::D1, DgpId::D4, DgpId::D6, DgpId::D9] {
        for s in Strategy::ALL {
            reports.push(run_ate_bench(&default_spec(id), s, 500, reps, &prior, &CalibrationMode::Plugin, 1, &settings)?);
        }
    }
    println!("--- Coverage of 95% credible intervals, {reps} repetitions ---\n");
    print!("{}", markdown_table(&reports));

    let mut csv = Vec::new();
    write_reports_csv(&reports, &mut csv)?;
    println!("CSV form:\n{}", String::from_utf8(csv)?);

    // Interval length shrinks with n.
    let sweep = length_sweep(
        &default_spec(DgpId::D1),
        &[Strategy::Dr],
        &[100, 250, 500, 1000],
        reps,
        &NormalPrior::diffuse(),
        &CalibrationMode::Plugin,
        1,
        &settings,
    )?;
    println!("DR median interval length on D1:");
    for r in &sweep {
        println!("  n = {:>4}: {:.4}", r.n, r.median_length);
    }
    Ok(())
}
