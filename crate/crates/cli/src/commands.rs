use std::fs;
use std::io::Write as _;
use std::path::Path;

use diversity_core::classify::{classify_diversity, DiversityStatus, DiversityVerdict, Rule};
use diversity_core::export::{max_weight_svg, to_json, write_trajectory_csv};
use diversity_core::feller::{classify, FellerProblem, FellerReport};
use diversity_core::noise::CounterNoise;
use diversity_core::simulate::{
    aggregate, ito_consistency_check, run_path_with, simulate_paths, MarketConfig,
    MonteCarloReport, PathResult, SimParams, EVIDENCE_NOTE,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{build_spec, power_sum, DiffusionChoice, ExperimentConfig, FamilyName, Format};
use crate::error::CliError;

/// A file to be written once all computation has succeeded.
pub struct Artifact {
    pub name: &'static str,
    pub contents: String,
}

pub struct Outcome {
    pub stdout: Option<String>,
    pub summary: String,
    pub artifacts: Vec<Artifact>,
}

fn json<T: Serialize>(v: &T) -> Result<String, CliError> {
    to_json(v).map_err(|e| CliError::Numeric(format!("cannot serialize result: {e}")))
}

/// Writes every artifact under `dir`, creating it if needed.
pub fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> Result<(), CliError> {
    if artifacts.is_empty() {
        return Ok(());
    }
    let io = |e: std::io::Error, what: &Path| CliError::Io(format!("{}: {e}", what.display()));
    fs::create_dir_all(dir).map_err(|e| io(e, dir))?;
    for a in artifacts {
        let path = dir.join(a.name);
        let mut f = fs::File::create(&path).map_err(|e| io(e, &path))?;
        f.write_all(a.contents.as_bytes())
            .map_err(|e| io(e, &path))?;
    }
    Ok(())
}

pub fn cmd_classify(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let model = cfg.model()?;
    let spec = model.spec()?;
    let verdict = classify_diversity(model.n, &spec).map_err(CliError::from_core)?;
    let text = json(&verdict)?;
    let artifacts = if cfg.outputs_given() && cfg.outputs().formats.contains(&Format::Json) {
        vec![Artifact {
            name: "verdict.json",
            contents: text.clone(),
        }]
    } else {
        Vec::new()
    };
    Ok(Outcome {
        summary: format!(
            "{}: {:?} by {} (n={}, delta={})",
            spec.label(),
            verdict.status,
            verdict.rule.as_str(),
            model.n,
            model.delta
        ),
        stdout: Some(text),
        artifacts,
    })
}

/// Reruns the first `k` paths with trajectories recorded. Path results are
/// pure functions of `(seed, path)`, so these match the unrecorded run.
fn recorded(config: &MarketConfig, params: &SimParams, k: usize) -> Vec<PathResult> {
    let noise = CounterNoise::new(params.seed);
    (0..k.min(params.n_paths) as u64)
        .into_par_iter()
        .map(|i| run_path_with(config, params, i, &noise, true))
        .collect()
}

pub fn cmd_simulate(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let market = cfg.model()?.market()?;
    let params = cfg.sim_params()?;
    let out = cfg.outputs();

    let paths = simulate_paths(&market, &params, false).map_err(CliError::from_core)?;
    let report: MonteCarloReport = aggregate(&market, &params, &paths);

    let mut artifacts = Vec::new();
    if out.formats.contains(&Format::Json) {
        artifacts.push(Artifact {
            name: "report.json",
            contents: json(&report)?,
        });
    }
    let wants_traj = out.formats.contains(&Format::Csv) || out.formats.contains(&Format::Svg);
    let sample = if wants_traj {
        recorded(&market, &params, out.recorded_paths)
    } else {
        Vec::new()
    };
    if out.formats.contains(&Format::Csv) {
        let mut buf = Vec::new();
        write_trajectory_csv(&sample, &mut buf).map_err(|e| CliError::Io(e.to_string()))?;
        artifacts.push(Artifact {
            name: "trajectories.csv",
            contents: String::from_utf8(buf).expect("csv is ascii"),
        });
    }
    if out.formats.contains(&Format::Svg) {
        let title = format!(
            "{}, n={}, seed={}",
            market.spec.label(),
            market.n,
            params.seed
        );
        artifacts.push(Artifact {
            name: "max_weight.svg",
            contents: max_weight_svg(
                &sample,
                market.spec.right_end(),
                params.horizon,
                out.recorded_paths,
                &title,
            ),
        });
    }
    let (lo, hi) = report.wilson_ci_95;
    Ok(Outcome {
        stdout: None,
        summary: format!(
            "{} hits of {} paths, frequency {:.4}, 95% CI ({lo:.4}, {hi:.4}); {}",
            report.n_hits, report.n_paths, report.hit_frequency, EVIDENCE_NOTE
        ),
        artifacts,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyRow {
    pub n: usize,
    pub delta: f64,
    pub p: f64,
    pub q: f64,
    pub family: String,
    pub verdict: DiversityStatus,
    pub rule: Rule,
    pub n_paths: usize,
    pub n_hits: usize,
    pub hit_frequency: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub consistency_gap: Option<f64>,
    pub consistency_order: Option<f64>,
    pub warning: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyTable {
    pub evidence_note: &'static str,
    pub sim: SimParams,
    pub rows: Vec<VerifyRow>,
}

pub const VERIFY_HEADER: &str =
    "n,delta,p,q,family,verdict,rule,n_paths,n_hits,hit_frequency,ci_low,ci_high,consistency_gap,consistency_order,warning";

/// Quotes a CSV field when it holds a delimiter, quote or newline.
fn field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn verify_csv(rows: &[VerifyRow]) -> String {
    let mut s = String::from(VERIFY_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{:?},{},{},{},{},{},{},{},{},{}\n",
            r.n,
            r.delta,
            r.p,
            r.q,
            field(&r.family),
            r.verdict,
            r.rule.as_str(),
            r.n_paths,
            r.n_hits,
            r.hit_frequency,
            r.ci_low,
            r.ci_high,
            opt(r.consistency_gap),
            opt(r.consistency_order),
            field(r.warning.as_deref().unwrap_or(""))
        ));
    }
    s
}

fn warning(verdict: DiversityStatus, report: &MonteCarloReport) -> Option<String> {
    match verdict {
        DiversityStatus::Diverse if report.wilson_ci_95.0 > 0.0 => {
            Some("Diverse verdict but hit-frequency CI excludes 0 (finite dt)".into())
        }
        DiversityStatus::NotDiverse if report.n_hits == 0 => {
            Some("NotDiverse verdict but no hits within the horizon".into())
        }
        _ => None,
    }
}

pub fn cmd_verify(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let v = cfg
        .verify
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [verify] section".into()))?;
    let params = cfg.sim_params()?;
    let mut grid = Vec::new();
    for &n in &v.n {
        for &delta in &v.delta {
            for &p in &v.p {
                for &q in &v.q {
                    let family = v.family.unwrap_or(if n == 2 {
                        FamilyName::PowerLaw
                    } else {
                        FamilyName::PatchedPowerLaw
                    });
                    let spec = match family {
                        FamilyName::PowerLaw => build_spec(family, delta, p, q, None, None)?,
                        FamilyName::PatchedPowerLaw => {
                            build_spec(family, delta, p, q, Some(v.c), Some(v.x_switch))?
                        }
                    };
                    let market = MarketConfig::new(n, spec, None).map_err(CliError::from_core)?;
                    grid.push((p, q, market));
                }
            }
        }
    }
    if grid.is_empty() {
        return Err(CliError::Config("verify grid is empty".into()));
    }
    let ito_params = SimParams {
        horizon: v.ito_horizon,
        n_paths: v.ito_paths,
        ..params
    };
    if v.ito_check {
        ito_params.validate().map_err(CliError::from_core)?;
    }

    let rows: Vec<VerifyRow> = grid
        .par_iter()
        .map(|(p, q, market)| -> Result<VerifyRow, CliError> {
            let verdict: DiversityVerdict =
                classify_diversity(market.n, &market.spec).map_err(CliError::from_core)?;
            let paths = simulate_paths(market, &params, false).map_err(CliError::from_core)?;
            let report = aggregate(market, &params, &paths);
            let ito = if v.ito_check {
                Some(ito_consistency_check(market, &ito_params).map_err(CliError::from_core)?)
            } else {
                None
            };
            Ok(VerifyRow {
                n: market.n,
                delta: market.spec.delta(),
                p: *p,
                q: *q,
                family: market.spec.label(),
                verdict: verdict.status,
                rule: verdict.rule,
                n_paths: report.n_paths,
                n_hits: report.n_hits,
                hit_frequency: report.hit_frequency,
                ci_low: report.wilson_ci_95.0,
                ci_high: report.wilson_ci_95.1,
                consistency_gap: ito.as_ref().map(|r| r.max_abs_weight_gap),
                consistency_order: ito.as_ref().map(|r| r.convergence_order_estimate),
                warning: warning(verdict.status, &report),
            })
        })
        .collect::<Result<_, _>>()?;

    let flagged = rows.iter().filter(|r| r.warning.is_some()).count();
    let out = cfg.outputs();
    let mut artifacts = Vec::new();
    if out.formats.contains(&Format::Csv) {
        artifacts.push(Artifact {
            name: "verify.csv",
            contents: verify_csv(&rows),
        });
    }
    if out.formats.contains(&Format::Json) {
        artifacts.push(Artifact {
            name: "verify.json",
            contents: json(&VerifyTable {
                evidence_note: EVIDENCE_NOTE,
                sim: params,
                rows: rows.clone(),
            })?,
        });
    }
    Ok(Outcome {
        stdout: None,
        summary: format!(
            "{} rows, {flagged} flagged (warnings, not failures)",
            rows.len()
        ),
        artifacts,
    })
}

pub fn feller_problem(cfg: &ExperimentConfig) -> Result<FellerProblem, CliError> {
    let f = cfg
        .feller
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [feller] section".into()))?;
    match f.diffusion {
        DiffusionChoice::WeightN2 => {
            let model = cfg.model()?;
            if model.n != 2 {
                return Err(CliError::Config(format!(
                    "diffusion = \"weight_n2\" needs n = 2 in [model], got {}",
                    model.n
                )));
            }
            if f.alpha.is_some()
                || f.beta.is_some()
                || f.x0.is_some()
                || !f.drift.is_empty()
                || !f.diffusion_sq.is_empty()
            {
                return Err(CliError::Config(
                    "alpha, beta, x0, drift and diffusion_sq only apply to diffusion = \"custom\""
                        .into(),
                ));
            }
            FellerProblem::two_stock_weight(&model.spec()?).map_err(CliError::from_core)
        }
        DiffusionChoice::Custom => {
            let (Some(alpha), Some(beta), Some(x0)) = (f.alpha, f.beta, f.x0) else {
                return Err(CliError::Config(
                    "custom diffusion needs alpha, beta and x0".into(),
                ));
            };
            if f.diffusion_sq.is_empty() {
                return Err(CliError::Config(
                    "custom diffusion needs diffusion_sq terms".into(),
                ));
            }
            let drift = f.drift.clone();
            let diff = f.diffusion_sq.clone();
            FellerProblem::new(
                "custom",
                alpha,
                beta,
                x0,
                move |x| power_sum(&drift, x),
                move |x| power_sum(&diff, x),
            )
            .map_err(CliError::from_core)
        }
    }
}

pub fn cmd_feller(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let prob = feller_problem(cfg)?;
    let report: FellerReport = classify(&prob).map_err(CliError::from_core)?;
    let text = json(&report)?;
    let verdicts = [&report.alpha, &report.beta]
        .iter()
        .map(|e| {
            e.as_ref()
                .map(|e| format!("{:?} at {}", e.verdict, e.endpoint))
                .unwrap_or_default()
        })
        .collect::<Vec<_>>()
        .join(", ");
    let artifacts = if cfg.outputs_given() && cfg.outputs().formats.contains(&Format::Json) {
        vec![Artifact {
            name: "feller.json",
            contents: text.clone(),
        }]
    } else {
        Vec::new()
    };
    Ok(Outcome {
        stdout: Some(text),
        summary: format!("{}: {verdicts}", report.problem),
        artifacts,
    })
}
