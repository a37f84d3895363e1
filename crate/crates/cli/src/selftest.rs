//! Built-in checks against known verdicts, run through the same config path
//! as the other subcommands.

use diversity_core::classify::{classify_diversity, DiversityStatus, Rule};
use diversity_core::feller::{classify, EndpointVerdict};
use diversity_core::simulate::monte_carlo_hitting;

use crate::commands::feller_problem;
use crate::config::ExperimentConfig;
use crate::error::CliError;

type Check = Result<(), String>;

fn cfg(text: &str) -> Result<ExperimentConfig, String> {
    ExperimentConfig::parse(text).map_err(|e| e.to_string())
}

fn verdict(text: &str, status: DiversityStatus, rule: Rule) -> Check {
    let c = cfg(text)?;
    let m = c.model().map_err(|e| e.to_string())?;
    let v = classify_diversity(m.n, &m.spec().map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    if (v.status, v.rule) == (status, rule) {
        Ok(())
    } else {
        Err(format!("got {:?} by {}", v.status, v.rule.as_str()))
    }
}

fn feller(text: &str, alpha: EndpointVerdict, beta: EndpointVerdict) -> Check {
    let c = cfg(text)?;
    let prob = feller_problem(&c).map_err(|e| e.to_string())?;
    let r = classify(&prob).map_err(|e| e.to_string())?;
    let got = (r.alpha.map(|e| e.verdict), r.beta.map(|e| e.verdict));
    if got == (Some(alpha), Some(beta)) {
        Ok(())
    } else {
        Err(format!("got {got:?}"))
    }
}

fn determinism() -> Check {
    let c = cfg(
        "[model]\nn = 2\ndelta = 0.2\nfamily = \"power_law\"\np = 0.05\nq = 1.0\n\
                 [sim]\nhorizon = 1.0\nn_paths = 32\nseed = 11\n",
    )?;
    let market = c
        .model()
        .and_then(|m| m.market())
        .map_err(|e| e.to_string())?;
    let params = c.sim_params().map_err(|e| e.to_string())?;
    let a = monte_carlo_hitting(&market, &params).map_err(|e| e.to_string())?;
    let b = monte_carlo_hitting(&market, &params).map_err(|e| e.to_string())?;
    let (a, b) = (
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap(),
    );
    if a == b {
        Ok(())
    } else {
        Err("reports differ".into())
    }
}

const TWO_STOCK: &str = "[model]\nn = 2\ndelta = 0.2\nfamily = \"power_law\"\nq = 1.0\n";

/// Prints one line per check; all passing is exit 0, any failure exit 3.
pub fn run(quiet: bool) -> Result<(), CliError> {
    use EndpointVerdict::*;
    let checks: Vec<(&str, Check)> = vec![
        (
            "two stocks, p = 0.25: diverse",
            verdict(&format!("{TWO_STOCK}p = 0.25\n"), DiversityStatus::Diverse, Rule::TwoStockIff),
        ),
        (
            "two stocks, p = 0.1: not diverse",
            verdict(&format!("{TWO_STOCK}p = 0.1\n"), DiversityStatus::NotDiverse, Rule::TwoStockIff),
        ),
        (
            "five stocks, p = 0.12: open gap",
            verdict(
                "[model]\nn = 5\ndelta = 0.2\nfamily = \"patched_power_law\"\np = 0.12\nq = 1.0\nc = 0.5\nx_switch = 0.1\n",
                DiversityStatus::Inconclusive,
                Rule::Gap,
            ),
        ),
        (
            "five stocks, q = 2: diverse",
            verdict(
                "[model]\nn = 5\ndelta = 0.2\nfamily = \"patched_power_law\"\np = 0.01\nq = 2.0\nc = 0.5\nx_switch = 0.1\n",
                DiversityStatus::Diverse,
                Rule::ManyStockDiverse,
            ),
        ),
        (
            "weight diffusion, p = 0.25: upper end not hit",
            feller(
                &format!("{TWO_STOCK}p = 0.25\n[feller]\ndiffusion = \"weight_n2\"\n"),
                NoHitAS,
                NoHitAS,
            ),
        ),
        (
            "weight diffusion, p = 0.1: upper end hit",
            feller(
                &format!("{TWO_STOCK}p = 0.1\n[feller]\ndiffusion = \"weight_n2\"\n"),
                HitsWithPositiveProb,
                HitsWithPositiveProb,
            ),
        ),
        (
            "Brownian motion on (0, 1): both ends hit",
            feller(
                "[feller]\ndiffusion = \"custom\"\nalpha = 0.0\nbeta = 1.0\nx0 = 0.5\ndiffusion_sq = [[1.0, 0.0]]\n",
                HitsWithPositiveProb,
                HitsWithPositiveProb,
            ),
        ),
        ("Monte Carlo report is reproducible", determinism()),
    ];
    let mut failed = 0;
    for (name, result) in &checks {
        match result {
            Ok(()) => {
                if !quiet {
                    println!("PASS  {name}");
                }
            }
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    if !quiet {
        println!(
            "selftest: {} passed, {failed} failed",
            checks.len() - failed
        );
    }
    if failed > 0 {
        Err(CliError::Numeric(format!(
            "{failed} selftest check(s) failed"
        )))
    } else {
        Ok(())
    }
}
