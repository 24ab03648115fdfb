use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context};
use chrono::Utc;
use domwatch_core::characterize::{
    rank_registrars, rank_tlds, render_bars, trend, write_rank_csv, write_trend_csv,
};
use domwatch_core::eval::{
    ratio_sweep, run_experiments, run_experiments_folds, train_classifier, write_report_csv,
    ExperimentConfig, SplitConfig, SweepConfig, TrainSeeds,
};
use domwatch_core::features::{
    build_reputation, featurize, masked_matrix, read_features, write_features, FeatureRow,
    LifetimeMode,
};
use domwatch_core::ingest::{
    attach_whois, load_domains, partition, read_dataset, write_dataset, write_enrichment,
    write_skips, Dataset, SkipEntry,
};
use domwatch_core::ml::save_model;
use domwatch_core::model::{DomainName, Label};
use domwatch_core::whois::{fetch_batch, BatchConfig, BatchOutcome, FixtureTransport, TcpTransport};
use domwatch_core::wordseg::{extract_keywords, write_keywords, Lexicon};

use crate::manifest::RunManifest;
use crate::{
    CharacterizeArgs, Cli, Command, ExperimentArgs, FeaturizeArgs, IngestArgs, SegmentArgs,
    TrainArgs, WhoisArgs,
};

pub fn run(cli: &Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Ingest(args) => cmd_ingest(cli, args),
        Command::Featurize(args) => cmd_featurize(cli, args),
        Command::Train(args) => cmd_train(cli, args),
        Command::Experiment(args) => cmd_experiment(cli, args),
        Command::Characterize(args) => cmd_characterize(cli, args),
        Command::Segment(args) => cmd_segment(cli, args),
        Command::Whois(args) => cmd_whois(cli, args),
    }
}

fn source_name(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("feed")
        .to_string()
}

/// Manifest path for a command whose primary output is a single file.
fn sibling_manifest(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}

fn cmd_ingest(cli: &Cli, args: &IngestArgs) -> anyhow::Result<()> {
    let reference_date = cli
        .reference_date
        .unwrap_or_else(|| Utc::now().date_naive());
    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;

    let mut manifest = RunManifest::new("ingest");
    manifest.set("seed", cli.seed);
    manifest.set("reference_date", reference_date.to_string());

    let mut records = Vec::new();
    let mut skip_files: Vec<(String, Vec<SkipEntry>)> = Vec::new();
    let mut skipped_rows = 0usize;
    let feeds = [
        (&args.malicious, Label::Malicious),
        (&args.benign, Label::Benign),
    ];
    for (paths, label) in feeds {
        for path in paths {
            manifest.add_input(path)?;
            let source = source_name(path);
            let outcome = load_domains(path, label, &source)
                .with_context(|| format!("loading {}", path.display()))?;
            eprintln!(
                "{}: {} {} records, {} rows skipped",
                source,
                outcome.records.len(),
                label,
                outcome.skips.len()
            );
            skipped_rows += outcome.skips.len();
            if !outcome.skips.is_empty() {
                skip_files.push((format!("skips_{source}.jsonl"), outcome.skips));
            }
            records.extend(outcome.records);
        }
    }
    if records.is_empty() {
        bail!("the feeds contained no usable records");
    }

    let mut matched = 0usize;
    if let Some(whois_path) = &args.whois {
        manifest.add_input(whois_path)?;
        let outcome = attach_whois(std::mem::take(&mut records), whois_path)
            .with_context(|| format!("attaching {}", whois_path.display()))?;
        matched = outcome.matched;
        skipped_rows += outcome.skips.len();
        if !outcome.skips.is_empty() {
            skip_files.push(("skips_whois.jsonl".to_string(), outcome.skips));
        }
        records = outcome.records;
    }

    let (dataset, stats) = Dataset::from_records(records, reference_date);
    if stats.label_conflicts > 0 {
        eprintln!(
            "warning: {} label conflicts resolved to malicious",
            stats.label_conflicts
        );
    }
    manifest.set("records", dataset.len());
    manifest.set("malicious", dataset.count_label(Label::Malicious));
    manifest.set("benign", dataset.count_label(Label::Benign));
    manifest.set("duplicates", stats.duplicates);
    manifest.set("label_conflicts", stats.label_conflicts);
    manifest.set("whois_matched", matched);
    manifest.set("skipped_rows", skipped_rows);

    let dataset_path = args.out.join("dataset.jsonl");
    write_dataset(&dataset_path, &dataset)?;
    let total = dataset.len();
    let parts = partition(dataset);
    let complete_path = args.out.join("whois_complete.jsonl");
    let incomplete_path = args.out.join("whois_incomplete.jsonl");
    write_dataset(&complete_path, &parts.with_whois)?;
    write_dataset(&incomplete_path, &parts.without_whois)?;
    manifest.set("whois_complete", parts.with_whois.len());

    manifest.add_output(&dataset_path)?;
    manifest.add_output(&complete_path)?;
    manifest.add_output(&incomplete_path)?;
    for (name, skips) in &skip_files {
        let path = args.out.join(name);
        write_skips(&path, skips)?;
        manifest.add_output(&path)?;
    }
    manifest.write(&args.out.join("manifest.json"))?;
    eprintln!(
        "dataset: {} records ({} with complete whois) -> {}",
        total,
        parts.with_whois.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_featurize(cli: &Cli, args: &FeaturizeArgs) -> anyhow::Result<()> {
    let dataset = read_dataset(&args.dataset)
        .with_context(|| format!("reading {}", args.dataset.display()))?;
    if dataset.is_empty() {
        bail!("dataset {} has no records", args.dataset.display());
    }
    let reference_date = cli.reference_date.unwrap_or(dataset.reference_date);
    let mode = if args.strict {
        LifetimeMode::Strict
    } else {
        LifetimeMode::Lenient
    };

    let rep = build_reputation(&dataset)?;
    let mut rows = Vec::with_capacity(dataset.len());
    let mut clamped = 0usize;
    for record in &dataset.records {
        let featurized = featurize(record, &rep, reference_date, mode)
            .with_context(|| format!("featurizing {}", record.domain.canonical()))?;
        clamped += usize::from(featurized.clamped);
        rows.push(FeatureRow {
            domain: record.domain.canonical().to_string(),
            vector: featurized.vector,
        });
    }
    if clamped > 0 {
        eprintln!("warning: clamped negative lifetimes on {clamped} records");
    }
    write_features(&args.out, &rows)?;

    let mut manifest = RunManifest::new("featurize");
    manifest.set("seed", cli.seed);
    manifest.set("reference_date", reference_date.to_string());
    manifest.set("strict", args.strict);
    manifest.set("rows", rows.len());
    manifest.set("clamped", clamped);
    manifest.add_input(&args.dataset)?;
    manifest.add_output(&args.out)?;
    manifest.write(&sibling_manifest(&args.out))?;
    eprintln!("features: {} rows -> {}", rows.len(), args.out.display());
    Ok(())
}

fn cmd_train(cli: &Cli, args: &TrainArgs) -> anyhow::Result<()> {
    let rows = read_features(&args.features)
        .with_context(|| format!("reading {}", args.features.display()))?;
    if rows.is_empty() {
        bail!("feature file {} has no rows", args.features.display());
    }
    let (matrix, labels) = masked_matrix(&rows, &args.mask)?;
    let seeds = TrainSeeds::derive(cli.seed);
    let model = train_classifier(args.model, &matrix, &labels, &args.mask, seeds)?;
    save_model(&args.out, &model)?;

    let mut manifest = RunManifest::new("train");
    manifest.set("seed", cli.seed);
    manifest.set("model", args.model.name());
    manifest.set("features", args.mask.names());
    manifest.set("rows", rows.len());
    manifest.add_input(&args.features)?;
    manifest.add_output(&args.out)?;
    manifest.write(&sibling_manifest(&args.out))?;
    eprintln!(
        "trained {} on {} rows -> {}",
        args.model.name(),
        rows.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_experiment(cli: &Cli, args: &ExperimentArgs) -> anyhow::Result<()> {
    let rows = read_features(&args.features)
        .with_context(|| format!("reading {}", args.features.display()))?;
    let mut manifest = RunManifest::new("experiment");
    manifest.set("seed", cli.seed);
    manifest.set("test_fraction", args.test_fraction);
    manifest.set("omit_timing", args.omit_timing);
    manifest.add_input(&args.features)?;

    let reports = if args.sweep {
        manifest.set("mode", "sweep");
        manifest.set("classifier", args.classifier.name());
        manifest.set("features", args.mask.names());
        manifest.set(
            "methods",
            args.methods.iter().map(|m| m.name()).collect::<Vec<_>>(),
        );
        manifest.set(
            "ratios",
            args.ratios.iter().map(|r| r.to_string()).collect::<Vec<_>>(),
        );
        let cfg = SweepConfig {
            split: SplitConfig {
                test_fraction: args.test_fraction,
                seed: cli.seed,
                stratified: true,
            },
            methods: args.methods.clone(),
            ratios: args.ratios.clone(),
            classifier: args.classifier,
            seed: cli.seed,
        };
        let table = ratio_sweep(&rows, &args.mask, &cfg)?;
        let best = &table.rows[table.best];
        manifest.set("best_method", best.method.name());
        manifest.set("best_ratio", best.ratio.to_string());
        manifest.set("best_f1", best.outcome.f1);
        eprintln!(
            "best sweep row: {} {} (f1 {:.4})",
            best.method.name(),
            best.ratio,
            best.outcome.f1
        );
        table.rows
    } else {
        manifest.set("mode", "experiments");
        manifest.set("method", args.method.name());
        manifest.set("ratio", args.ratio.to_string());
        manifest.set("folds", args.folds);
        let cfg = ExperimentConfig {
            seed: cli.seed,
            test_fraction: args.test_fraction,
            method: args.method,
            ratio: args.ratio,
        };
        if args.folds > 1 {
            run_experiments_folds(&rows, &cfg, args.folds)?
        } else {
            run_experiments(&rows, &cfg)?
        }
    };
    write_report_csv(&args.out, &reports, !args.omit_timing)?;
    manifest.set("report_rows", reports.len());
    manifest.add_output(&args.out)?;
    manifest.write(&sibling_manifest(&args.out))?;
    eprintln!(
        "report: {} rows -> {}",
        reports.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_characterize(cli: &Cli, args: &CharacterizeArgs) -> anyhow::Result<()> {
    let dataset = read_dataset(&args.dataset)
        .with_context(|| format!("reading {}", args.dataset.display()))?;
    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;

    let registrars = rank_registrars(&dataset.records, args.top);
    let tlds = rank_tlds(&dataset.records, args.top);
    let series = trend(&dataset.records);
    if series.total() == 0 {
        eprintln!("warning: no dated malicious records; the trend table is empty");
    }
    if args.bars {
        eprintln!("top registrars:\n{}", render_bars(&registrars, 40));
        eprintln!("top TLDs:\n{}", render_bars(&tlds, 40));
    }

    let registrars_path = args.out.join("registrars.csv");
    let tlds_path = args.out.join("tlds.csv");
    let trend_path = args.out.join("trend.csv");
    write_rank_csv(&registrars_path, &registrars, "registrar")?;
    write_rank_csv(&tlds_path, &tlds, "tld")?;
    write_trend_csv(&trend_path, &series)?;

    let mut manifest = RunManifest::new("characterize");
    manifest.set("seed", cli.seed);
    manifest.set("top", args.top);
    manifest.set("registrar_universe", registrars.universe_size);
    manifest.set("tld_universe", tlds.universe_size);
    manifest.set("undated", series.undated);
    manifest.set("peaks", series.peaks());
    manifest.add_input(&args.dataset)?;
    manifest.add_output(&registrars_path)?;
    manifest.add_output(&tlds_path)?;
    manifest.add_output(&trend_path)?;
    manifest.write(&args.out.join("manifest.json"))?;
    eprintln!(
        "characterized {} malicious records -> {}",
        tlds.universe_size,
        args.out.display()
    );
    Ok(())
}

fn cmd_segment(cli: &Cli, args: &SegmentArgs) -> anyhow::Result<()> {
    let dataset = read_dataset(&args.dataset)
        .with_context(|| format!("reading {}", args.dataset.display()))?;
    let lexicon = match &args.lexicon {
        Some(path) => {
            Lexicon::from_file(path).with_context(|| format!("loading {}", path.display()))?
        }
        None => Lexicon::builtin(),
    };

    let domains: Vec<DomainName> = dataset
        .records
        .iter()
        .filter(|r| r.label == Label::Malicious)
        .map(|r| r.domain.clone())
        .collect();
    let mut keywords = extract_keywords(&domains, &lexicon);
    if args.min_count > 1 {
        keywords.retain(|k| k.count >= args.min_count);
    }
    write_keywords(&args.out, &keywords)?;

    let mut manifest = RunManifest::new("segment");
    manifest.set("seed", cli.seed);
    manifest.set(
        "lexicon",
        args.lexicon
            .as_ref()
            .map_or_else(|| "builtin".to_string(), |p| p.display().to_string()),
    );
    manifest.set("lexicon_words", lexicon.len());
    manifest.set("min_count", args.min_count);
    manifest.set("domains", domains.len());
    manifest.set("keywords", keywords.len());
    manifest.add_input(&args.dataset)?;
    if let Some(path) = &args.lexicon {
        manifest.add_input(path)?;
    }
    manifest.add_output(&args.out)?;
    manifest.write(&sibling_manifest(&args.out))?;
    eprintln!(
        "keywords: {} from {} malicious domains -> {}",
        keywords.len(),
        domains.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_whois(cli: &Cli, args: &WhoisArgs) -> anyhow::Result<()> {
    let outcome = load_domains(&args.domains, Label::Benign, "whois-input")
        .with_context(|| format!("loading {}", args.domains.display()))?;
    if !outcome.skips.is_empty() {
        eprintln!("warning: skipped {} malformed rows", outcome.skips.len());
    }
    let domains: Vec<DomainName> = outcome.records.into_iter().map(|r| r.domain).collect();
    if domains.is_empty() {
        bail!("{} contained no domains", args.domains.display());
    }

    let cfg = BatchConfig {
        server: args.server.clone(),
        timeout: Duration::from_millis(args.timeout_ms),
        concurrency: args.concurrency.max(1),
        politeness: Duration::from_millis(args.politeness_ms),
    };
    let batch: BatchOutcome = match &args.fixture_dir {
        Some(dir) => {
            let transport = FixtureTransport::new(dir);
            fetch_batch(&transport, &domains, &cfg)
        }
        None => {
            let transport = TcpTransport::default();
            fetch_batch(&transport, &domains, &cfg)
        }
    };
    for (domain, error) in &batch.errors {
        eprintln!("whois {domain}: {error}");
    }
    let fetched = batch.rows.len();
    let errors = batch.errors.len();
    write_enrichment(&args.out, batch.rows)?;

    let mut manifest = RunManifest::new("whois");
    manifest.set("seed", cli.seed);
    manifest.set("server", &cfg.server);
    manifest.set("timeout_ms", args.timeout_ms);
    manifest.set("concurrency", cfg.concurrency);
    manifest.set("politeness_ms", args.politeness_ms);
    manifest.set("offline_fixtures", args.fixture_dir.is_some());
    manifest.set("domains", fetched);
    manifest.set("errors", errors);
    manifest.add_input(&args.domains)?;
    manifest.add_output(&args.out)?;
    manifest.write(&sibling_manifest(&args.out))?;
    eprintln!(
        "whois: {} domains, {} errors -> {}",
        fetched,
        errors,
        args.out.display()
    );
    Ok(())
}
