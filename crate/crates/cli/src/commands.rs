use std::fs;
use std::path::Path;

use evokg::eval::{evaluate_links, evaluate_time, evaluate_time_constant_gap, ranks_to_csv};
use evokg::model::{read_checkpoint, write_checkpoint, Dims, DynamicState, ModelParams, Weights};
use evokg::tkg::{read_event_file, simulate as simulate_log, write_event_file, EventLog};
use evokg::train::{grad_check as check_gradients, history_to_csv, Trainer};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::CliError;

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

/// Validates the config, creates the output directory and persists the
/// resolved settings there.
fn prepare(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out).map_err(|e| io_err(&cfg.out, e))?;
    write(&cfg.out.join("config.resolved"), &cfg.to_text())
}

fn load_checkpoint(cfg: &RunConfig) -> Result<ModelParams, CliError> {
    let path = cfg.checkpoint_path();
    if !path.exists() {
        return Err(CliError::Data(format!(
            "checkpoint {} not found",
            path.display()
        )));
    }
    read_checkpoint(&path).map_err(|e| io_err(&path, e))
}

fn load_split(cfg: &RunConfig) -> Result<(EventLog, EventLog), CliError> {
    let path = cfg
        .events
        .as_ref()
        .ok_or_else(|| CliError::Usage("no event file given (--events or `events =`)".into()))?;
    let parsed = read_event_file(path, cfg.has_header)?;
    if parsed.duplicates_dropped > 0 {
        println!("dropped {} duplicate events", parsed.duplicates_dropped);
    }
    let log = parsed.log;
    match cfg.split_time {
        Some(t) => Ok(log.split_by_time(t)?),
        None => {
            let n = (log.len() as f64 * cfg.split_fraction).round() as usize;
            Ok(log.split_at_index(n))
        }
    }
}

pub fn simulate(cfg: &RunConfig) -> Result<(), CliError> {
    prepare(cfg)?;
    let dims = cfg.dims()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let truth = ModelParams::random(
        dims,
        cfg.n_entities,
        cfg.n_relations,
        cfg.truth_scale,
        &mut rng,
    )
    .with_numerics(cfg.numerics());
    let log = simulate_log(
        &truth,
        cfg.n_entities,
        cfg.n_relations,
        cfg.n_events,
        cfg.seed,
    )?;
    let events = cfg.out.join("events.tsv");
    write_event_file(&log, &events)?;
    write_checkpoint(&truth, &cfg.out.join("truth.json"))?;
    println!(
        "simulated {} events over {} entities and {} relations, t in [0, {}] -> {}",
        log.len(),
        cfg.n_entities,
        cfg.n_relations,
        log.last_time().unwrap_or(0.0),
        events.display()
    );
    Ok(())
}

pub fn train(cfg: &RunConfig) -> Result<(), CliError> {
    prepare(cfg)?;
    let (train, _) = load_split(cfg)?;
    let config = cfg.train_config()?;
    let mut trainer = Trainer::new(&train, config)?;
    let checkpoint = cfg.out.join("checkpoint.json");
    let history = cfg.out.join("loss_history.csv");

    let mut failure = None;
    for _ in 0..cfg.max_iter {
        if let Err(e) = trainer.step() {
            failure = Some(e);
            break;
        }
    }
    // on failure these still hold the last good parameters
    write_checkpoint(trainer.params(), &checkpoint)?;
    write(&history, &history_to_csv(trainer.history()))?;
    let optimizer = serde_json::to_string_pretty(trainer.optimizer())
        .map_err(|e| CliError::Data(e.to_string()))?;
    write(&cfg.out.join("optimizer.json"), &optimizer)?;
    if let Some(e) = failure {
        eprintln!(
            "training stopped after {} windows; last good parameters saved to {}",
            trainer.history().len(),
            checkpoint.display()
        );
        return Err(e.into());
    }
    match trainer.history().last() {
        Some(last) => println!(
            "trained {} windows on {} events; final window loss {} (event {}, survival {})",
            trainer.history().len(),
            train.len(),
            last.loss.total,
            last.loss.event_nll,
            last.loss.survival
        ),
        None => println!("max_iter = 0; wrote initial parameters"),
    }
    println!("checkpoint -> {}", checkpoint.display());
    Ok(())
}

pub fn eval_link(cfg: &RunConfig) -> Result<(), CliError> {
    prepare(cfg)?;
    let params = load_checkpoint(cfg)?;
    let (train, test) = load_split(cfg)?;
    let result = evaluate_links(&params, &train, &test, cfg.n_slides, cfg.subject_slot)?;
    write(&cfg.out.join("link_metrics.csv"), &result.report.to_csv())?;
    write(
        &cfg.out.join("link_ranks.csv"),
        &ranks_to_csv(&result.ranks),
    )?;
    if let Some(sr) = &result.subject_ranks {
        write(&cfg.out.join("link_subject_ranks.csv"), &ranks_to_csv(sr))?;
    }
    let o = &result.report.overall;
    println!(
        "{} test events: MAR {:.4} (filtered {:.4}), std {:.4}, HITS@10 {:.4} (filtered {:.4})",
        test.len(),
        o.raw.mar,
        o.filtered.mar,
        o.raw.std,
        o.raw.hits_at_10,
        o.filtered.hits_at_10
    );
    Ok(())
}

pub fn eval_time(cfg: &RunConfig) -> Result<(), CliError> {
    prepare(cfg)?;
    let params = load_checkpoint(cfg)?;
    let (train, test) = load_split(cfg)?;
    let result = evaluate_time(&params, &train, &test)?;
    write(&cfg.out.join("time_predictions.csv"), &result.to_csv())?;
    let baseline = evaluate_time_constant_gap(&train, &test)
        .map(|b| format!(" (constant-gap baseline {:.6})", b.mae))
        .unwrap_or_default();
    println!("MAE {:.6}{baseline}", result.mae);
    Ok(())
}

pub fn grad_check(cfg: &RunConfig) -> Result<(), CliError> {
    prepare(cfg)?;
    let dims = Dims::new(cfg.gc_dim, cfg.gc_dim, 2).map_err(CliError::from_config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let params = if cfg.zero_params {
        ModelParams::zeros(dims, cfg.gc_entities, cfg.gc_relations)
    } else {
        ModelParams::random(
            dims,
            cfg.gc_entities,
            cfg.gc_relations,
            cfg.gc_scale,
            &mut rng,
        )
    }
    .with_numerics(cfg.numerics());
    let n = cfg.gc_history + cfg.gc_window;
    let log = simulate_log(&params, cfg.gc_entities, cfg.gc_relations, n, cfg.seed)?;
    let (history, window) = log.events().split_at(cfg.gc_history);
    let mut state = DynamicState::new(&params);
    for ev in history {
        state.apply_event(&params, ev)?;
    }
    let report = check_gradients(&params, &state, window, cfg.fd_step)?;
    println!(
        "max relative error {:.3e} over {} coordinates (threshold {:e})",
        report.max_relative_error, report.coordinates, cfg.threshold
    );
    for (name, err) in Weights::NAMES.iter().zip(report.per_array) {
        println!("  {name}: {err:.3e}");
    }
    if report.max_relative_error < cfg.threshold {
        Ok(())
    } else {
        Err(CliError::Numeric(format!(
            "gradient check error {:.3e} is not below {:e}",
            report.max_relative_error, cfg.threshold
        )))
    }
}
