use std::fmt::Write;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use rusamp_core::distortion::{figure1_data, figure3_data, Panel};
use rusamp_core::qcore::fidelity;
use rusamp_core::rus::{build_rus_unitary, run_rus, success_probability};
use rusamp_core::table::{fmt_real, mean_std, FigureTable};
use rusamp_core::tcost::{evaluate_all, figure2_data, CostQuery, CostTable, ReflectionPolicy};
use rusamp_core::{Error, RngStream, RusSpec};
use serde_json::{json, Value};

use crate::manifest::write_with_manifest;
use crate::protocol::{PsiSpec, Protocol};
use crate::{CliError, FigureName};

/// Largest tolerated fraction of trials abandoned at the attempt cap.
pub const MAX_EXHAUSTION_RATE: f64 = 1e-3;

pub struct SimulateArgs {
    pub spec: PathBuf,
    pub protocol: Protocol,
    pub psi: PsiSpec,
    pub trials: usize,
    pub seed: u64,
    pub max_attempts: usize,
    pub out: PathBuf,
}

struct Trial {
    attempts: usize,
    outcomes: Option<Vec<usize>>,
    fidelity: Option<f64>,
}

pub fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    if args.trials == 0 || args.max_attempts == 0 {
        return Err(CliError::Config("--trials and --max-attempts must be at least 1".into()));
    }
    let text = fs::read_to_string(&args.spec)
        .map_err(|e| CliError::Config(format!("{}: {e}", args.spec.display())))?;
    let spec = RusSpec::from_json(&text)?;
    let circuit = build_rus_unitary(&spec)?;
    let psi = args.psi.state(args.seed)?;
    let (amplified, protocol) = args.protocol.apply(&circuit)?;
    let before = success_probability(&circuit, &psi)?;
    let after = success_probability(&amplified, &psi)?;
    let ideal = circuit.target().apply(&psi)?;

    let trials: Vec<Trial> = (0..args.trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = RngStream::substream(args.seed, t);
            match run_rus(&amplified, &psi, &mut rng, args.max_attempts) {
                Ok(rec) => Ok(Trial {
                    attempts: rec.attempts,
                    fidelity: Some(fidelity(&ideal, &rec.final_state)?),
                    outcomes: Some(rec.outcomes),
                }),
                Err(Error::MaxAttemptsExceeded(n)) => Ok(Trial { attempts: n, outcomes: None, fidelity: None }),
                Err(e) => Err(e),
            }
        })
        .collect::<rusamp_core::Result<_>>()?;

    let mut runs = String::from("trial,attempts,exhausted,outcomes,fidelity\n");
    for (t, trial) in trials.iter().enumerate() {
        let outcomes = trial
            .outcomes
            .as_ref()
            .map(|o| o.iter().map(usize::to_string).collect::<Vec<_>>().join(";"))
            .unwrap_or_default();
        let fid = trial.fidelity.map(fmt_real).unwrap_or_default();
        writeln!(runs, "{t},{},{},{outcomes},{fid}", trial.attempts, u8::from(trial.outcomes.is_none())).unwrap();
    }

    let done: Vec<&Trial> = trials.iter().filter(|t| t.outcomes.is_some()).collect();
    let exhausted = trials.len() - done.len();
    let rate = exhausted as f64 / trials.len() as f64;
    let attempts: Vec<f64> = done.iter().map(|t| t.attempts as f64).collect();
    let fids: Vec<f64> = done.iter().filter_map(|t| t.fidelity).collect();
    let (mean_attempts, std_attempts) = if attempts.is_empty() { (f64::NAN, f64::NAN) } else { mean_std(&attempts) };
    let (mean_fid, _) = if fids.is_empty() { (f64::NAN, f64::NAN) } else { mean_std(&fids) };
    let min_fid = fids.iter().copied().fold(f64::INFINITY, f64::min);

    let mut summary = String::from(
        "protocol,trials,completed,exhausted,exhaustion_rate,mean_attempts,std_attempts,success_before,success_after,mean_fidelity,min_fidelity\n",
    );
    writeln!(
        summary,
        "{},{},{},{},{},{},{},{},{},{},{}",
        protocol["name"].as_str().unwrap_or(""),
        trials.len(),
        done.len(),
        exhausted,
        fmt_real(rate),
        fmt_real(mean_attempts),
        fmt_real(std_attempts),
        fmt_real(before),
        fmt_real(after),
        fmt_real(mean_fid),
        fmt_real(if fids.is_empty() { f64::NAN } else { min_fid }),
    )
    .unwrap();

    let amps: Vec<[f64; 2]> = psi.amps().iter().map(|z| [z.re, z.im]).collect();
    let config = json!({
        "spec": serde_json::to_value(&spec).expect("spec serializes"),
        "protocol": protocol,
        "psi": amps,
        "trials": args.trials,
        "max_attempts": args.max_attempts,
        "seed": args.seed,
    });
    write_with_manifest(&args.out, "runs.csv", &runs, "simulate", args.seed, &config)?;
    write_with_manifest(&args.out, "summary.csv", &summary, "simulate", args.seed, &config)?;
    print!("{summary}");

    if rate > MAX_EXHAUSTION_RATE {
        return Err(CliError::Quality(format!(
            "{exhausted} of {} trials hit the attempt cap of {} ({:.3}% > {:.1}%)",
            trials.len(),
            args.max_attempts,
            100.0 * rate,
            100.0 * MAX_EXHAUSTION_RATE
        )));
    }
    Ok(())
}

fn write_figure(out: &Path, file: &str, table: &FigureTable, seed: u64) -> Result<(), CliError> {
    let path = write_with_manifest(out, file, &table.to_csv(), "figure", seed, &table.metadata)?;
    println!("{}", path.display());
    Ok(())
}

fn write_costs(out: &Path, prefix: &str, delta: f64, seed: u64) -> Result<(), CliError> {
    for ct_a in [1.0, 100.0] {
        let table: CostTable = figure2_data(ct_a, delta)?;
        let file = format!("{prefix}_cta{ct_a}.csv");
        let path = write_with_manifest(out, &file, &table.to_csv(), "figure", seed, &table.metadata)?;
        println!("{}", path.display());
    }
    Ok(())
}

pub fn figure(name: FigureName, seed: u64, out: &Path) -> Result<(), CliError> {
    match name {
        FigureName::Fig1Left => write_figure(out, "fig1_left.csv", &figure1_data(Panel::Left, seed), seed),
        FigureName::Fig1Right => write_figure(out, "fig1_right.csv", &figure1_data(Panel::Right, seed), seed),
        FigureName::Fig3 => write_figure(out, "fig3.csv", &figure3_data(seed), seed),
        FigureName::Fig2 => write_costs(out, "fig2", 1e-6, seed),
        FigureName::FigD1 => write_costs(out, "figd1", 1e-3, seed),
    }
}

fn cell<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_else(|| "-".into())
}

pub fn tcost(lambda0: f64, delta: f64, ct_a: f64, policy: ReflectionPolicy) -> Result<(), CliError> {
    let query = CostQuery::new(lambda0, delta, ct_a, policy)?;
    let results = evaluate_all(&query)?;
    println!("{:<18} {:>14} {:>5} {:>3} {:>5} {:>5} {:>12}", "strategy", "total_t", "j", "k", "L", "n_S", "epsilon");
    for r in &results {
        let p = &r.params;
        println!(
            "{:<18} {:>14} {:>5} {:>3} {:>5} {:>5} {:>12}",
            r.strategy.id(),
            r.total_t,
            cell(p.j),
            cell(p.k),
            cell(p.length),
            p.n_s,
            p.epsilon.map(|e| format!("{e:.3e}")).unwrap_or_else(|| "-".into())
        );
    }
    let doc: Value = json!({ "query": query, "results": results });
    println!("{}", serde_json::to_string_pretty(&doc).expect("results serialize"));
    Ok(())
}
