use std::collections::{BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use stlab::analysis::{analyze, Pair};
use stlab::augment::{expand_with_speed, sample_masks};
use stlab::config::Config;
use stlab::corpus::{filter_pair, load_manifest, mix, stats, Manifest};
use stlab::decode::{read_decodes, write_decodes};
use stlab::metrics::score;
use stlab::model::{checkpoint, init, vocab::Vocab};
use stlab::sweep::{read_records, render_tables, run_grid_with, select_best, Grid, RunOutcome, SweepOptions};
use stlab::synth::{generate, SynthSpec};
use stlab::training::{decode_examples, joint_finetune, load_examples, train, Example, TargetEpochs};
use stlab::{Error, Result};

#[derive(Parser)]
#[command(name = "stlab", version, about = "Speech translation lab")]
struct Cli {
    /// Flat TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args)]
struct Data {
    /// Training manifest (TSV).
    #[arg(long)]
    train: PathBuf,
    /// Dev manifest (TSV).
    #[arg(long)]
    dev: PathBuf,
    /// Directory that relative audio paths resolve against; defaults to
    /// each manifest's directory.
    #[arg(long)]
    audio_root: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate manifests and print corpus statistics.
    Prepare { manifests: Vec<PathBuf> },
    /// Expand a manifest with speed factors, or preview SpecAugment masks.
    Augment {
        #[arg(long, required_unless_present = "preview_masks")]
        manifest: Option<PathBuf>,
        /// Print this many sampled mask sets instead.
        #[arg(long)]
        preview_masks: Option<usize>,
        #[arg(long, default_value_t = 300)]
        frames: usize,
        #[arg(long, default_value_t = 80)]
        bins: usize,
    },
    /// Train a model with early stopping on dev BLEU.
    Train {
        #[command(flatten)]
        data: Data,
    },
    /// Joint training on a mixed corpus, then target-only fine-tuning.
    FinetuneJoint {
        /// Target-pair training manifest.
        #[arg(long)]
        target: PathBuf,
        /// Auxiliary-pair training manifest mixed in for phase 1.
        #[arg(long)]
        aux: PathBuf,
        #[arg(long)]
        dev: PathBuf,
        #[arg(long)]
        audio_root: Option<PathBuf>,
        /// Phase-2 epochs: a count or `convergence`.
        #[arg(long, default_value = "1")]
        k: TargetEpochs,
    },
    /// Decode a manifest with a trained checkpoint.
    Decode {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        audio_root: Option<PathBuf>,
        /// Overrides the configured beam size.
        #[arg(long)]
        beam: Option<usize>,
    },
    /// Score hypotheses against references (plain lines or id-keyed TSVs).
    Score {
        #[arg(long)]
        hyp: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
    },
    /// Run a hyperparameter grid.
    Sweep {
        #[arg(long)]
        grid: PathBuf,
        #[command(flatten)]
        data: Data,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long, default_value_t = 1)]
        parallel: usize,
    },
    /// Length buckets and numeral audit for decoded output.
    Analyze {
        #[arg(long)]
        decodes: PathBuf,
        /// Reference manifest or id-keyed TSV.
        #[arg(long = "ref")]
        reference: PathBuf,
    },
    /// Render sweep records as a result table.
    Report {
        #[arg(long)]
        records: PathBuf,
        /// table3, table4, table5 or table6.
        #[arg(long, default_value = "table6")]
        layout: String,
    },
    /// Write a synthetic tone corpus.
    Synth {
        #[arg(long, default_value_t = 20)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        pitch_scale: f64,
        #[arg(long, default_value = "bho")]
        src_lang: String,
        #[arg(long, default_value = "syn")]
        id_prefix: String,
        #[arg(long, default_value = "train")]
        name: String,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::io(path, e)
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(io_err(path))
}

fn audio_root(explicit: &Option<PathBuf>, manifest: &Path) -> PathBuf {
    explicit
        .clone()
        .or_else(|| manifest.parent().map(Path::to_path_buf))
        .unwrap_or_default()
}

/// Character inventory of the training targets, in code point order.
fn corpus_vocab<'a>(manifests: impl IntoIterator<Item = &'a Manifest>) -> Result<Vocab> {
    let chars: BTreeSet<char> = manifests
        .into_iter()
        .flat_map(|m| m.utterances.iter().flat_map(|u| u.tgt_text.chars()))
        .collect();
    Vocab::from_chars(chars)
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let out = cli.out.as_path();
    std::fs::create_dir_all(out).map_err(io_err(out))?;

    match cli.cmd {
        Command::Prepare { manifests } => {
            if manifests.is_empty() {
                return Err(Error::config("manifests", "no manifest given"));
            }
            let mut all = serde_json::Map::new();
            for p in &manifests {
                let m = load_manifest(p)?;
                let s = stats(&m)?;
                let v = serde_json::json!({ "split": m.split, "stats": s });
                println!("{}: {}", p.display(), v);
                all.insert(p.display().to_string(), v);
            }
            write(&out.join("stats.json"), &serde_json::to_string_pretty(&all).expect("json"))?;
        }
        Command::Augment {
            manifest,
            preview_masks,
            frames,
            bins,
        } => {
            let policy = cfg.policy();
            if let Some(n) = preview_masks {
                let mut rng = ChaCha8Rng::seed_from_u64(policy.seed);
                for i in 0..n {
                    let masks: Vec<_> = sample_masks(frames, bins, &policy, &mut rng)
                        .iter()
                        .map(|m| serde_json::json!({"axis": format!("{:?}", m.axis).to_lowercase(), "start": m.start, "width": m.width}))
                        .collect();
                    println!("{}", serde_json::json!({ "set": i, "masks": masks }));
                }
                return Ok(());
            }
            let path = manifest.expect("clap requires --manifest");
            let m = load_manifest(&path)?;
            let sp = stlab::augment::AugmentPolicy {
                sp_enabled: true,
                ..policy
            };
            let expanded = expand_with_speed(&m, &sp)?;
            let name = path.file_name().map_or("manifest.tsv".into(), |n| n.to_string_lossy().to_string());
            let dest = out.join(format!("sp_{name}"));
            expanded.save(&dest)?;
            println!("{} -> {} utterances: {}", m.len(), expanded.len(), dest.display());
        }
        Command::Train { data } => {
            let train_m = expand_with_speed(&load_manifest(&data.train)?, &cfg.policy())?;
            let dev_m = load_manifest(&data.dev)?;
            let vocab = corpus_vocab([&train_m])?;
            let tr = load_examples(&train_m, &audio_root(&data.audio_root, &data.train), &vocab)?;
            let dv = load_examples(&dev_m, &audio_root(&data.audio_root, &data.dev), &vocab)?;
            let model = init(&cfg.model(vocab.size()), cfg.seed)?;
            let (state, log) = train(model, &tr, &dv, &vocab, &cfg.hyper(), &cfg.policy())?;
            checkpoint::save(&state, &vocab, &out.join("model.ckpt"))?;
            write(&out.join("train_log.jsonl"), &log.to_jsonl())?;
            println!("{}", log.summary_json());
        }
        Command::FinetuneJoint {
            target,
            aux,
            dev,
            audio_root: root,
            k,
        } => {
            let policy = cfg.policy();
            let target_m = expand_with_speed(&load_manifest(&target)?, &policy)?;
            let aux_m = expand_with_speed(&load_manifest(&aux)?, &policy)?;
            let mixed_m = mix(&target_m, &aux_m, cfg.seed)?;
            let dev_m = load_manifest(&dev)?;
            let vocab = corpus_vocab([&mixed_m])?;
            // `mix` may prefix ids with the pair tag; look examples up by (pair, original id)
            let mut by_id: HashMap<(String, String), Example> = HashMap::new();
            for (m, p) in [(&target_m, &target), (&aux_m, &aux)] {
                for (u, e) in m.utterances.iter().zip(load_examples(m, &audio_root(&root, p), &vocab)?) {
                    by_id.insert((u.pair().to_string(), u.id.clone()), e);
                }
            }
            let target_pair = target_m.utterances.first().ok_or(Error::EmptyCorpus)?.pair();
            let mixed: Vec<Example> = mixed_m
                .utterances
                .iter()
                .map(|u| {
                    let pair = u.pair().to_string();
                    let original = u.id.strip_prefix(&format!("{pair}:")).unwrap_or(&u.id).to_string();
                    let key = if by_id.contains_key(&(pair.clone(), u.id.clone())) { u.id.clone() } else { original };
                    let mut e = by_id[&(pair, key)].clone();
                    e.id = u.id.clone();
                    e
                })
                .collect();
            let target_only_m = filter_pair(&target_m, &target_pair.src);
            let target_only = load_examples(&target_only_m, &audio_root(&root, &target), &vocab)?;
            let dv = load_examples(&dev_m, &audio_root(&root, &dev), &vocab)?;
            let model = init(&cfg.model(vocab.size()), cfg.seed)?;
            let (state, log) = joint_finetune(model, &mixed, &target_only, &dv, &vocab, &cfg.hyper(), &policy, k)?;
            checkpoint::save(&state, &vocab, &out.join("model.ckpt"))?;
            write(&out.join("train_log.jsonl"), &log.to_jsonl())?;
            println!("{}", log.phase1.summary_json());
            if let Some(p2) = &log.phase2 {
                println!("{}", p2.summary_json());
            }
        }
        Command::Decode {
            model,
            manifest,
            audio_root: root,
            beam,
        } => {
            let (state, vocab) = checkpoint::load(&model)?;
            let m = load_manifest(&manifest)?;
            let data = load_examples(&m, &audio_root(&root, &manifest), &vocab)?;
            let lines = decode_examples(&state, &data, &vocab, beam.unwrap_or(cfg.beam_size))?;
            let dest = out.join("decodes.tsv");
            write_decodes(&dest, &lines)?;
            let hyps: Vec<&str> = lines.iter().map(|l| l.text.as_str()).collect();
            let refs: Vec<&str> = data.iter().map(|e| e.reference.as_str()).collect();
            println!("{}", serde_json::to_string(&score(&hyps, &refs)?).expect("json"));
        }
        Command::Score { hyp, reference } => {
            let (h, r) = paired_texts(&hyp, &reference)?;
            let report = score(&h, &r)?;
            let json = serde_json::to_string_pretty(&report).expect("json");
            write(&out.join("score.json"), &json)?;
            println!("{json}");
        }
        Command::Sweep {
            grid,
            data,
            budget,
            parallel,
        } => {
            let grid = Grid::load(&grid)?;
            let base = cfg.hyper();
            let train_raw = load_manifest(&data.train)?;
            let dev_m = load_manifest(&data.dev)?;
            let train_root = audio_root(&data.audio_root, &data.train);
            let vocab = corpus_vocab([&train_raw])?;
            let dv = load_examples(&dev_m, &audio_root(&data.audio_root, &data.dev), &vocab)?;
            let plain = load_examples(&train_raw, &train_root, &vocab)?;
            let sp_policy = stlab::augment::AugmentPolicy {
                sp_enabled: true,
                ..cfg.policy()
            };
            let needs_sp = grid.sp.contains(&true);
            let expanded = if needs_sp {
                load_examples(&expand_with_speed(&train_raw, &sp_policy)?, &train_root, &vocab)?
            } else {
                Vec::new()
            };
            let opts = SweepOptions {
                budget,
                parallel,
                records_path: Some(out.join("records.jsonl")),
            };
            let records = run_grid_with(&grid, &base, &opts, |c| {
                let policy = stlab::augment::AugmentPolicy {
                    sp_enabled: c.sp,
                    sa_enabled: c.sa,
                    ..cfg.policy()
                };
                let tr = if c.sp { &expanded } else { &plain };
                let model = init(&cfg.model(vocab.size()), c.hyper.seed)?;
                let (state, log) = train(model, tr, &dv, &vocab, &c.hyper, &policy)?;
                let lines = decode_examples(&state, &dv, &vocab, c.hyper.beam_size)?;
                let hyps: Vec<&str> = lines.iter().map(|l| l.text.as_str()).collect();
                let refs: Vec<&str> = dv.iter().map(|e| e.reference.as_str()).collect();
                let s = score(&hyps, &refs)?;
                Ok(RunOutcome {
                    dev_bleu: s.bleu,
                    dev_chrf: s.chrf_pp,
                    best_epoch: log.best_epoch,
                })
            })?;
            let best = select_best(&records)?;
            println!("{}", serde_json::to_string(best).expect("json"));
        }
        Command::Analyze { decodes, reference } => {
            let lines = read_decodes(&decodes)?;
            let refs = keyed_texts(&reference)?.ok_or_else(|| Error::Parse {
                line: 1,
                message: format!("{}: expected a manifest or id-keyed TSV", reference.display()),
            })?;
            let pairs = lines
                .iter()
                .map(|l| {
                    let r = refs.get(&l.id).ok_or_else(|| Error::Parse {
                        line: 0,
                        message: format!("no reference for id `{}`", l.id),
                    })?;
                    Ok(Pair {
                        id: l.id.clone(),
                        hyp: l.text.clone(),
                        reference: r.clone(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let report = analyze(&pairs, cfg.low_bleu_threshold);
            write(&out.join("analysis.md"), &report.to_markdown())?;
            write(&out.join("analysis.jsonl"), &report.to_jsonl())?;
            print!("{}", report.to_markdown());
        }
        Command::Report { records, layout } => {
            let mut recs = read_records(&records)?;
            recs.sort_by_key(|r| r.run);
            let table = render_tables(&recs, &layout)?;
            write(&out.join(format!("{layout}.md")), &table)?;
            print!("{table}");
            if let Ok(best) = select_best(&recs) {
                println!("\nbest: {}", serde_json::to_string(best).expect("json"));
            }
        }
        Command::Synth {
            n,
            pitch_scale,
            src_lang,
            id_prefix,
            name,
        } => {
            let spec = SynthSpec {
                n_utterances: n,
                pitch_scale,
                src_lang,
                id_prefix,
                seed: cfg.seed,
                ..SynthSpec::default()
            };
            let m = generate(out, &spec)?;
            let dest = out.join(format!("{name}.tsv"));
            m.save(&dest)?;
            println!("{} utterances: {}", m.len(), dest.display());
        }
    }
    Ok(())
}

/// Reads an id-keyed file: a manifest (by `tgt_text`) or a TSV whose first
/// two columns are id and text. Returns `None` for plain text.
fn keyed_texts(path: &Path) -> Result<Option<HashMap<String, String>>> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    if text.starts_with("id\t") {
        let m = Manifest::from_tsv(&text, stlab::corpus::Split::from_file_name(path))?;
        return Ok(Some(m.utterances.into_iter().map(|u| (u.id, u.tgt_text)).collect()));
    }
    let lines: Vec<&str> = text.lines().filter(|l| !l.is_empty()).collect();
    if lines.is_empty() || !lines.iter().all(|l| l.contains('\t')) {
        return Ok(None);
    }
    let mut out = HashMap::new();
    for (i, l) in lines.iter().enumerate() {
        let mut f = l.split('\t');
        let id = f.next().unwrap_or_default().to_string();
        let t = f.next().unwrap_or_default().to_string();
        if out.insert(id.clone(), t).is_some() {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("duplicate id `{id}`"),
            });
        }
    }
    Ok(Some(out))
}

fn paired_texts(hyp: &Path, reference: &Path) -> Result<(Vec<String>, Vec<String>)> {
    match (keyed_texts(hyp)?, keyed_texts(reference)?) {
        (Some(h), Some(r)) => {
            let mut ids: Vec<&String> = h.keys().collect();
            ids.sort();
            if h.len() != r.len() || ids.iter().any(|id| !r.contains_key(*id)) {
                return Err(Error::Pairing {
                    hyps: h.len(),
                    refs: r.len(),
                });
            }
            Ok(ids.iter().map(|id| (h[*id].clone(), r[*id].clone())).unzip())
        }
        _ => {
            let read = |p: &Path| -> Result<Vec<String>> {
                Ok(std::fs::read_to_string(p)
                    .map_err(io_err(p))?
                    .lines()
                    .map(str::to_string)
                    .collect())
            };
            Ok((read(hyp)?, read(reference)?))
        }
    }
}
