//! The five subcommands. Each returns a short human-readable summary; all
//! artifacts go under the configured output directory.

use std::fs;
use std::path::Path;

use eqhard::decoders::DecoderBank;
use eqhard::em::{pretrain, train_with, Checkpoint, RngState, TimingBreakdown, TrainLog};
use eqhard::metrics::{MetricsReport, TABLE_COLUMNS};
use eqhard::pipeline::{evaluate_bank, train_samples, Decoding};
use eqhard::synthdata::{gen_corpus, load_corpus, save_corpus, LabeledCorpus};

use crate::config::{ExperimentConfig, ReportFormat, RunPaths, SweepAxis};
use crate::error::{CliError, CliResult};

fn io_context(path: &Path) -> impl FnOnce(eqhard::Error) -> CliError + '_ {
    move |e| match e {
        eqhard::Error::Io(io) => CliError::Io(format!("{}: {io}", path.display())),
        other => other.into(),
    }
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Generates the corpus into `<out>/corpus`.
pub fn cmd_gen(config: &ExperimentConfig) -> CliResult<String> {
    let paths = config.paths();
    let (corpus, dedup) = gen_corpus(&config.corpus)?;
    save_corpus(&paths.corpus(), &corpus).map_err(io_context(&paths.corpus()))?;
    Ok(format!(
        "wrote {}: train={} valid={} test={} (dedup removed valid={} test={})",
        paths.corpus().display(),
        corpus.train.len(),
        corpus.valid.len(),
        corpus.test.len(),
        dedup.valid_removed,
        dedup.test_removed
    ))
}

/// Loads `<dir>/corpus` and checks it was generated from the configured spec.
pub fn load_run_corpus(config: &ExperimentConfig, dir: &Path) -> CliResult<LabeledCorpus> {
    let path = dir.join("corpus");
    let corpus = load_corpus(&path).map_err(io_context(&path))?;
    if corpus.spec != config.corpus {
        return Err(CliError::Config(format!(
            "corpus in {} was generated from a different spec; rerun `gen`",
            path.display()
        )));
    }
    Ok(corpus)
}

fn save_state(paths: &RunPaths, ck: Checkpoint, log: &TrainLog) -> eqhard::Result<()> {
    ck.save(&paths.checkpoint())?;
    let tmp = paths.train_log().with_extension("jsonl.tmp");
    log.write_jsonl(fs::File::create(&tmp)?)?;
    fs::rename(tmp, paths.train_log())?;
    Ok(())
}

/// Both training stages on `corpus`, checkpointing into `paths` after stage
/// one and after every EM epoch. On failure the last checkpoint stays.
pub fn run_training(config: &ExperimentConfig, corpus: &LabeledCorpus, paths: &RunPaths) -> CliResult<TrainLog> {
    let tc = &config.train;
    if corpus.train.len() < tc.estep_batch {
        return Err(CliError::Config(format!(
            "train split has {} samples, fewer than estep_batch {}",
            corpus.train.len(),
            tc.estep_batch
        )));
    }
    fs::create_dir_all(&paths.root)?;
    write_file(&paths.root.join("config.toml"), &config.to_toml())?;
    let data = train_samples(corpus);
    let mut bank = DecoderBank::new(&config.model, &corpus.model, tc.n_decoders, tc.seed)?;
    let history = pretrain(&mut bank, &data, tc)?;
    if let Some(last) = history.last() {
        eprintln!("pretrained {} epochs, mean log-likelihood {last:.4}", history.len());
    }
    let prior = tc.initial_prior(corpus.vocab().size());
    let start = RngState {
        seed: tc.seed,
        ..RngState::default()
    };
    let initial = Checkpoint::new(tc.clone(), bank.clone(), prior.clone(), start);
    save_state(paths, initial, &TrainLog::new()).map_err(io_context(&paths.root))?;

    let trained = train_with(tc, &data, bank, prior, |t| {
        if let Some(r) = t.log.last() {
            eprintln!("epoch {}/{}: iterations {}, last mll {:.4}", t.rng.epochs_done, tc.epochs, t.log.len(), r.mll);
        }
        save_state(paths, Checkpoint::new(tc.clone(), t.bank.clone(), t.prior.clone(), t.rng), &t.log)
    })?;
    save_state(paths, Checkpoint::new(tc.clone(), trained.bank, trained.prior, trained.rng), &trained.log)
        .map_err(io_context(&paths.root))?;
    Ok(trained.log)
}

pub fn cmd_train(config: &ExperimentConfig) -> CliResult<String> {
    let paths = config.paths();
    let corpus = load_run_corpus(config, &paths.root)?;
    let log = run_training(config, &corpus, &paths)?;
    Ok(format!(
        "trained {} ({} decoders, {} iterations); wrote {} and {}",
        config.train.variant,
        config.train.n_decoders,
        log.len(),
        paths.checkpoint().display(),
        paths.train_log().display()
    ))
}

fn read_log(path: &Path) -> CliResult<TrainLog> {
    let file = fs::File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(TrainLog::read_jsonl(std::io::BufReader::new(file))?)
}

fn plot_data(report: &MetricsReport) -> Option<String> {
    let stats = report.assignment.as_ref()?;
    let mut out = String::from("# decoder mean_share std_share\n");
    for (k, s) in stats.iter().enumerate() {
        out.push_str(&format!("{k} {:.6} {:.6}\n", s.mean, s.std));
    }
    Some(out)
}

fn write_report(config: &ExperimentConfig, paths: &RunPaths, report: &MetricsReport) -> CliResult<()> {
    for format in &config.output.formats {
        match format {
            ReportFormat::Csv => write_file(&paths.report_csv(), &report.to_csv())?,
            ReportFormat::KeyValue => write_file(&paths.report_txt(), &report.to_key_values())?,
        }
    }
    if config.output.plot_data {
        if let Some(data) = plot_data(report) {
            write_file(&paths.plot_data(), &data)?;
        }
    }
    Ok(())
}

/// Scores the checkpoint (and log, when present) in `run` on the test split.
pub fn evaluate_run(
    config: &ExperimentConfig,
    corpus: &LabeledCorpus,
    run: &RunPaths,
    decoding: Decoding,
) -> CliResult<MetricsReport> {
    let ck = Checkpoint::load(&run.checkpoint()).map_err(io_context(&run.checkpoint()))?;
    let log = if run.train_log().exists() {
        Some(read_log(&run.train_log())?)
    } else {
        None
    };
    Ok(evaluate_bank(&ck.bank, corpus, &corpus.test, decoding, &config.eval, log.as_ref())?)
}

/// [`evaluate_run`] on the configured run directory, then writes reports there.
pub fn run_eval(config: &ExperimentConfig, corpus: &LabeledCorpus, decoding: Decoding) -> CliResult<MetricsReport> {
    let paths = config.paths();
    let report = evaluate_run(config, corpus, &paths, decoding)?;
    write_report(config, &paths, &report)?;
    Ok(report)
}

pub fn cmd_eval(config: &ExperimentConfig) -> CliResult<String> {
    let paths = config.paths();
    let corpus = load_run_corpus(config, &paths.root)?;
    let report = run_eval(config, &corpus, config.decode)?;
    Ok(report.to_key_values())
}

fn csv_field(s: &str) -> String {
    s.replace([',', '\n', '\r'], ";")
}

/// One comparison-table row: label, status, then [`TABLE_COLUMNS`].
fn sweep_row(label: &str, outcome: &CliResult<MetricsReport>) -> String {
    match outcome {
        Ok(report) => format!("{label},ok,{}", report.table_cells().join(",")),
        Err(e) => format!(
            "{label},{}{}",
            csv_field(&format!("error: {e}")),
            ",".repeat(TABLE_COLUMNS.len())
        ),
    }
}

fn train_and_eval(config: &ExperimentConfig, corpus: &LabeledCorpus, decoding: Decoding) -> CliResult<MetricsReport> {
    config.validate()?;
    let paths = config.paths();
    run_training(config, corpus, &paths)?;
    run_eval(config, corpus, decoding)
}

/// Runs every configuration on the axis over one shared corpus (generated
/// if `<out>/corpus` is absent) and writes `sweep.csv`. A failing row is
/// recorded and the sweep continues. The decoder-count axis adds, per `K`,
/// a row for a single decoder decoded with beam width `K`.
pub fn cmd_sweep(config: &ExperimentConfig) -> CliResult<String> {
    let paths = config.paths();
    let axis = config.sweep.axis()?;
    if !paths.corpus().join("spec.json").exists() {
        eprintln!("{}", cmd_gen(config)?);
    }
    let corpus = load_run_corpus(config, &paths.root)?;
    let mut rows = vec![format!("config,status,{}", TABLE_COLUMNS.join(","))];
    let sub = |label: &str| {
        let mut c = config.clone();
        c.output.dir = paths.sweep_row(label);
        c
    };
    match axis {
        SweepAxis::Variants(variants) => {
            for v in variants {
                let mut c = sub(v.name());
                c.train.variant = v;
                let outcome = train_and_eval(&c, &corpus, config.decode);
                eprintln!("{}", sweep_row(v.name(), &outcome));
                rows.push(sweep_row(v.name(), &outcome));
            }
        }
        SweepAxis::Decoders(ks) => {
            let mut single = sub("single");
            single.train.n_decoders = 1;
            if let Some(q) = single.train.per_decoder {
                single.train.estep_batch = q;
            }
            let single_trained = config
                .validate()
                .and_then(|_| single.validate())
                .and_then(|_| run_training(&single, &corpus, &single.paths()));
            for k in ks {
                let label = format!("K{k}");
                let mut c = sub(&label);
                c.train.n_decoders = k;
                if let Some(q) = c.train.per_decoder {
                    c.train.estep_batch = q * k;
                }
                let outcome = train_and_eval(&c, &corpus, Decoding::Greedy);
                eprintln!("{}", sweep_row(&label, &outcome));
                rows.push(sweep_row(&label, &outcome));

                let beam_label = format!("beam{k}");
                let mut b = single.clone();
                b.output.dir = paths.sweep_row(&beam_label);
                let outcome = match &single_trained {
                    Ok(_) => evaluate_run(&b, &corpus, &single.paths(), Decoding::Beam { width: k }).and_then(|r| {
                        write_report(&b, &b.paths(), &r)?;
                        Ok(r)
                    }),
                    Err(e) => Err(CliError::Runtime(format!("single-decoder baseline failed: {e}"))),
                };
                rows.push(sweep_row(&beam_label, &outcome));
            }
        }
    }
    let table = rows.join("\n") + "\n";
    write_file(&paths.sweep_csv(), &table)?;
    Ok(table)
}

/// Aggregates the E-step, M-step and Hungarian wall-time shares of a log.
pub fn cmd_timing(config: &ExperimentConfig, log_path: Option<&Path>) -> CliResult<String> {
    let paths = config.paths();
    let path = log_path.map_or_else(|| paths.train_log(), Path::to_path_buf);
    let log = read_log(&path)?;
    let text = TimingBreakdown::from_log(&log).to_key_values();
    let out = paths.timing();
    write_file(&out, &text)?;
    Ok(text)
}
