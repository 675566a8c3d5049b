use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use softpg_core::agent::Checkpoint;
use softpg_core::env::{grid_optimum, AttributeId, AttributeSchedule, EnvSpec, FORMAT_VERSION};
use softpg_core::gradcheck::{run_tiny, GradcheckConfig};
use softpg_core::stats::{
    analyze, read_published, replay, sweep_all, write_report_csv, Aggregation, CorrelationReport,
    PValueMethod, Thresholds,
};
use softpg_core::trainer::{eval_episodes, metrics_csv_string, Trainer};
use softpg_core::{Environment, PolicyParams};

use crate::config::{check_version, load_fixture, read_text, resolve};
use crate::error::{CliError, CliResult};
use crate::{
    AggregationArg, AnalyzeArgs, Cli, Command, EvalArgs, FixtureArgs, GradcheckArgs, OracleArgs,
    PMethodArg, TrainArgs,
};

pub fn run(cli: Cli) -> CliResult<()> {
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    match &cli.command {
        Command::Fixture(a) => fixture(&cli, a, &out),
        Command::Train(a) => train(&cli, a, &out),
        Command::Eval(a) => eval(&cli, a),
        Command::Analyze(a) => analyze_cmd(&cli, a, &out),
        Command::Oracle(a) => oracle(&cli, a),
        Command::Gradcheck(a) => gradcheck(&cli, a),
    }
}

fn pretty(v: &impl Serialize) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::user(format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, contents)
        .map_err(|e| CliError::user(format!("cannot write {}: {e}", path.display())))
}

/// Prints `doc` and, when `--out` was given, also stores it as `name`.
fn emit(cli: &Cli, name: &str, doc: &impl Serialize) -> CliResult<()> {
    let text = pretty(doc)?;
    if let Some(dir) = &cli.out {
        write_file(&dir.join(name), &text)?;
    }
    print!("{text}");
    Ok(())
}

fn schedule_of(attrs: &[AttributeId]) -> CliResult<Option<AttributeSchedule>> {
    if attrs.is_empty() {
        return Ok(None);
    }
    Ok(Some(AttributeSchedule::new(attrs.to_vec())?))
}

fn fixture(cli: &Cli, a: &FixtureArgs, out: &Path) -> CliResult<()> {
    let mut spec = EnvSpec {
        seed: cli.seed.unwrap_or(0),
        ..EnvSpec::default()
    };
    let set = |slot: &mut usize, v: Option<usize>| {
        if let Some(v) = v {
            *slot = v;
        }
    };
    set(&mut spec.obs_dim, a.obs_dim);
    set(&mut spec.eps_dim, a.eps_dim);
    set(&mut spec.dims_per_layer, a.dims_per_layer);
    set(&mut spec.n_layers, a.layers);
    set(&mut spec.n_probe, a.probe);
    if let Some(b) = a.bandwidth {
        spec.bandwidth = b;
    }
    if let Some(s) = schedule_of(&a.schedule)? {
        spec.schedule = s;
    }
    spec.reward_table = a.reward_table.clone();
    spec.validate()?;
    Environment::from_spec(&spec)?;

    let path = out.join("fixture.json");
    if path.exists() && !a.force {
        return Err(CliError::user(format!(
            "{} exists; pass --force to overwrite",
            path.display()
        )));
    }
    write_file(&path, &spec.to_json()?)?;
    info!("wrote {}", path.display());
    Ok(())
}

fn train(cli: &Cli, a: &TrainArgs, out: &Path) -> CliResult<()> {
    let mut train = serde_json::Map::new();
    let mut put = |k: &str, v: Option<Value>| {
        if let Some(v) = v {
            train.insert(k.to_string(), v);
        }
    };
    put("mode", a.mode.map(|m| json!(softpg_core::trainer::Mode::from(m))));
    put("iterations", a.iterations.map(|v| json!(v)));
    put("alpha", a.alpha.map(|v| json!(v)));
    put("k", a.k.map(|v| json!(v)));
    put("batch_episodes", a.batch_episodes.map(|v| json!(v)));
    put("lr", a.lr.map(|v| json!(v)));
    put("eval_every", a.eval_every.map(|v| json!(v)));
    put("eval_episodes", a.eval_episodes.map(|v| json!(v)));
    put("seed", cli.seed.map(|v| json!(v)));
    let mut overrides = json!({ "train": Value::Object(train) });
    if let Some(s) = schedule_of(&a.schedule)? {
        overrides["env"] = json!({ "schedule": s });
    }
    let mut cfg = resolve(
        cli.preset.map(Into::into),
        cli.config.as_deref(),
        a.fixture.as_deref(),
        overrides,
    )?;
    let out = cli.out.clone().or_else(|| cfg.out.clone()).unwrap_or(out.to_path_buf());
    cfg.out = Some(out.clone());
    let resolved = serde_json::to_value(&cfg)?;
    write_file(&out.join("run.json"), &pretty(&cfg)?)?;

    let env = Environment::from_spec(&cfg.env)?;
    let mut trainer = Trainer::new(cfg.train.clone(), &cfg.policy, &env)?;
    let checkpoint = |t: &Trainer<f64>| -> CliResult<()> {
        let c = Checkpoint::capture(
            t.params(),
            &cfg.policy,
            resolved.clone(),
            cfg.train.seed,
            t.iteration() as u64,
        );
        write_file(&out.join("checkpoint.json"), &c.to_json()?)
    };
    let result = trainer.run(|t, _| {
        write_file(&out.join("metrics.csv"), &metrics_csv_string(t.rows()))
            .and_then(|_| checkpoint(t))
            .map_err(|e| softpg_core::Error::Input(e.to_string()))
    });
    if let Err(e) = result {
        warn!("training stopped at iteration {}: {e}", trainer.iteration());
        write_file(&out.join("metrics.csv"), &metrics_csv_string(trainer.rows()))?;
        checkpoint(&trainer)?;
        return Err(e.into());
    }
    if let Some(best) = trainer.best_row() {
        info!(
            "best greedy score {:.5} at iteration {}",
            best.greedy_eval_score, best.iteration
        );
    }
    Ok(())
}

fn env_for_checkpoint(
    ck: &Checkpoint,
    fixture: Option<&Path>,
    schedule: &[AttributeId],
) -> CliResult<EnvSpec> {
    let mut spec = match fixture {
        Some(p) => load_fixture(p)?,
        None => {
            let v = ck.config.get("env").cloned().ok_or_else(|| {
                CliError::user("checkpoint records no environment; pass --fixture")
            })?;
            serde_json::from_value(v)?
        }
    };
    if let Some(s) = schedule_of(schedule)? {
        spec.schedule = s;
    }
    spec.validate()?;
    Ok(spec)
}

#[derive(Serialize)]
struct EvalReport {
    format_version: u32,
    seed: u64,
    episodes: usize,
    checkpoint_iteration: u64,
    env: EnvSpec,
    greedy_actions: Vec<Vec<usize>>,
    greedy_scores: Vec<f64>,
    mean: f64,
    optimum_scores: Option<Vec<f64>>,
    optimum_mean: Option<f64>,
    optimum_gap: Option<f64>,
}

fn eval(cli: &Cli, a: &EvalArgs) -> CliResult<()> {
    if a.episodes == 0 {
        return Err(CliError::user("--episodes must be positive"));
    }
    let ck = Checkpoint::from_json(&read_text(&a.checkpoint)?)
        .map_err(|e| CliError::user(format!("{}: {e}", a.checkpoint.display())))?;
    check_version(ck.format_version, "checkpoint")?;
    let spec = env_for_checkpoint(&ck, a.fixture.as_deref(), &a.schedule)?;
    let env = Environment::from_spec(&spec)?;
    if ck.obs_dim != env.obs_dim() || ck.n_bins != env.actions().n_bins {
        return Err(CliError::user(format!(
            "checkpoint expects obs_dim {} and {} bins, fixture has obs_dim {} and {} bins",
            ck.obs_dim,
            ck.n_bins,
            env.obs_dim(),
            env.actions().n_bins
        )));
    }
    let params: PolicyParams = ck.restore()?;
    let seed = cli.seed.unwrap_or(ck.master_seed);
    let starts = eval_episodes(&env, seed, a.episodes)?;
    let mut actions = Vec::with_capacity(starts.len());
    let mut scores = Vec::with_capacity(starts.len());
    for s in &starts {
        let t = params.greedy(&env, s)?;
        actions.push(t.actions);
        scores.push(t.reward);
    }
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    let optimum_scores = if spec.schedule.len() <= softpg_core::env::MAX_ORACLE_ATTRIBUTES {
        Some(
            starts
                .iter()
                .map(|s| grid_optimum(&env, s).map(|o| o.best_score))
                .collect::<Result<Vec<_>, _>>()?,
        )
    } else {
        warn!("schedule longer than the oracle limit; optimum_gap omitted");
        None
    };
    let optimum_mean = optimum_scores
        .as_ref()
        .map(|o| o.iter().sum::<f64>() / o.len() as f64);
    let report = EvalReport {
        format_version: FORMAT_VERSION,
        seed,
        episodes: a.episodes,
        checkpoint_iteration: ck.iteration,
        env: spec,
        greedy_actions: actions,
        greedy_scores: scores,
        mean,
        optimum_gap: optimum_mean.map(|o| (o - mean) / o),
        optimum_scores,
        optimum_mean,
    };
    emit(cli, "eval.json", &report)
}

fn spec_from_args(cli: &Cli, fixture: Option<&Path>, schedule: &[AttributeId]) -> CliResult<EnvSpec> {
    let mut spec = match (fixture, cli.config.as_deref()) {
        (Some(p), _) => load_fixture(p)?,
        (None, Some(_)) => resolve(cli.preset.map(Into::into), cli.config.as_deref(), None, json!({}))?.env,
        (None, None) => {
            return Err(CliError::user("pass --fixture or --config"));
        }
    };
    if let Some(s) = schedule_of(schedule)? {
        spec.schedule = s;
    }
    spec.validate()?;
    Ok(spec)
}

#[derive(Serialize)]
struct OracleEpisode {
    index: usize,
    best_values: Vec<f64>,
    best_indices: Vec<usize>,
    best_score: f64,
    evaluations: u64,
}

fn oracle(cli: &Cli, a: &OracleArgs) -> CliResult<()> {
    if a.episodes == 0 {
        return Err(CliError::user("--episodes must be positive"));
    }
    let spec = spec_from_args(cli, a.fixture.as_deref(), &a.schedule)?;
    let seed = match cli.seed {
        Some(s) => s,
        None => match cli.config.as_deref() {
            Some(_) => resolve(cli.preset.map(Into::into), cli.config.as_deref(), None, json!({}))?
                .train
                .seed,
            None => 0,
        },
    };
    let env = Environment::from_spec(&spec)?;
    let starts = eval_episodes(&env, seed, a.episodes)?;
    let mut rows = Vec::with_capacity(starts.len());
    for (i, s) in starts.iter().enumerate() {
        let o = grid_optimum(&env, s)?;
        info!("episode {i}: {} evaluations", o.evaluations);
        rows.push(OracleEpisode {
            index: i,
            best_values: o.values,
            best_indices: o.indices,
            best_score: o.best_score,
            evaluations: o.evaluations,
        });
    }
    let mean = rows.iter().map(|r| r.best_score).sum::<f64>() / rows.len() as f64;
    let first = &rows[0];
    let doc = json!({
        "format_version": FORMAT_VERSION,
        "seed": seed,
        "env": spec,
        "best_values": first.best_values,
        "best_score": first.best_score,
        "evaluations": first.evaluations,
        "mean_best_score": mean,
        "episodes": rows,
    });
    emit(cli, "oracle.json", &doc)
}

#[derive(Deserialize)]
struct LabelRow {
    layer: usize,
    dim: usize,
    label: String,
}

fn read_labels(path: &Path) -> CliResult<BTreeMap<AttributeId, String>> {
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|e| CliError::user(format!("{}: {e}", path.display())))?;
    let mut out = BTreeMap::new();
    for rec in rdr.deserialize() {
        let r: LabelRow = rec.map_err(|e| CliError::user(format!("{}: {e}", path.display())))?;
        out.insert(AttributeId::new(r.layer, r.dim), r.label);
    }
    Ok(out)
}

#[derive(Serialize)]
struct AnalyzeReport<'a> {
    format_version: u32,
    source: &'static str,
    images: Option<usize>,
    seed: Option<u64>,
    thresholds: Thresholds,
    env: Option<EnvSpec>,
    rows: &'a [CorrelationReport],
    selected: Vec<String>,
}

fn analyze_cmd(cli: &Cli, a: &AnalyzeArgs, out: &Path) -> CliResult<()> {
    let seed = cli.seed.unwrap_or(0);
    let thresholds = Thresholds {
        min_abs_rho: a.min_abs_rho,
        max_p_value: a.max_p_value,
        aggregation: match a.aggregation {
            AggregationArg::Pooled => Aggregation::Pooled,
            AggregationArg::PerImageMean => Aggregation::PerImageMean,
        },
        method: match a.p_method {
            PMethodArg::TApprox => PValueMethod::TApprox,
            PMethodArg::Permutation => PValueMethod::Permutation { seed },
        },
    };
    let (rows, source, env, images) = match &a.replay {
        Some(path) => {
            let file = fs::File::open(path)
                .map_err(|e| CliError::user(format!("cannot read {}: {e}", path.display())))?;
            (replay(read_published(file)?, &thresholds), "replay", None, None)
        }
        None => {
            if a.images == 0 {
                return Err(CliError::user("--images must be positive"));
            }
            let spec = spec_from_args(cli, a.fixture.as_deref(), &[])?;
            let env = Environment::from_spec(&spec)?;
            let labels = a.labels.as_deref().map(read_labels).transpose()?.unwrap_or_default();
            let sweeps = sweep_all(&env, a.images, seed)?;
            (analyze(&sweeps, &labels, &thresholds)?, "sweep", Some(spec), Some(a.images))
        }
    };
    if let Some(bad) = rows
        .iter()
        .find(|r| r.selected && !(r.rho.abs() > thresholds.min_abs_rho && r.p_value < thresholds.max_p_value))
    {
        return Err(CliError::Numeric(format!(
            "self-check failed: {} selected with rho {} and p {}",
            bad.attribute, bad.rho, bad.p_value
        )));
    }
    let mut csv_buf = Vec::new();
    write_report_csv(&mut csv_buf, &rows)?;
    write_file(
        &out.join("correlations.csv"),
        &String::from_utf8(csv_buf).map_err(|e| CliError::user(e.to_string()))?,
    )?;
    let selected: Vec<String> = rows
        .iter()
        .filter(|r| r.selected)
        .map(|r| r.attribute.to_string())
        .collect();
    println!("selected: {}", selected.join(" "));
    let report = AnalyzeReport {
        format_version: FORMAT_VERSION,
        source,
        images,
        seed: (source == "sweep").then_some(seed),
        thresholds,
        env,
        rows: &rows,
        selected,
    };
    write_file(&out.join("correlations.json"), &pretty(&report)?)
}

fn gradcheck(cli: &Cli, a: &GradcheckArgs) -> CliResult<()> {
    let cfg = GradcheckConfig {
        seed: cli.seed.unwrap_or(GradcheckConfig::default().seed),
        sign_flip: a.sign_flip.clone(),
        ..GradcheckConfig::default()
    };
    let report = run_tiny(&cfg)?;
    for b in &report.blocks {
        eprintln!(
            "{:<18} {:>4}  rel {:.3e}  {}",
            b.name,
            b.len,
            b.rel_error,
            if b.passed { "ok" } else { "FAIL" }
        );
    }
    let doc = json!({
        "format_version": FORMAT_VERSION,
        "size": "tiny",
        "passed": report.passed(),
        "report": report,
    });
    emit(cli, "gradcheck.json", &doc)?;
    if report.passed() {
        Ok(())
    } else {
        let failed: Vec<&str> = report
            .blocks
            .iter()
            .filter(|b| !b.passed)
            .map(|b| b.name.as_str())
            .collect();
        Err(CliError::Numeric(format!(
            "gradient mismatch in {}",
            failed.join(", ")
        )))
    }
}
