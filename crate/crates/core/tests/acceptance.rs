//! End-to-end acceptance checks. Each test prints one PASS/FAIL line.

use std::collections::BTreeSet;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stlab::analysis::{bucket_from_counts, classify_lengths, numeral_audit, LengthCategory, Pair, Verdict};
use stlab::augment::{expand_with_speed, sample_masks, AugmentPolicy, Axis};
use stlab::corpus::{mix, Manifest, Split, Utterance};
use stlab::decode::{beam_search, exhaustive_oracle, greedy};
use stlab::dsp::{speed_perturb, FeatureMatrix, Waveform};
use stlab::metrics::{chrf_pp, corpus_bleu};
use stlab::model::gradcheck::{grad_check_with, GradCheckOptions};
use stlab::model::tape::Tensor;
use stlab::model::vocab::{Vocab, BOS, EOS, PAD};
use stlab::model::{checkpoint, init, ModelConfig};
use stlab::sweep::{render_table, select_best, ExperimentRecord, Grid, Layout};
use stlab::synth::{generate, SynthSpec};
use stlab::training::loss::{batch_loss_and_grads, label_smoothed_loss, Batch};
use stlab::training::{
    decode_examples, evaluate, joint_finetune, load_examples, lr_at_step, train, EarlyStopper, Example, HyperParams,
    StopDecision, StopReason, TargetEpochs,
};

fn verdict(n: u32, name: &str, ok: bool, detail: impl std::fmt::Display) {
    println!("{} criterion {n:>2} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {n} ({name}) failed: {detail}");
}

fn toy_config(vocab_size: usize, bins: usize) -> ModelConfig {
    ModelConfig {
        d_model: 8,
        n_heads: 2,
        enc_layers: 1,
        dec_layers: 1,
        ff_dim: 12,
        conv_subsample_factor: 4,
        dropout: 0.0,
        vocab_size,
        input_dim: bins,
    }
}

fn random_features(frames: usize, bins: usize, rng: &mut impl Rng) -> FeatureMatrix {
    FeatureMatrix::new(frames, bins, (0..frames * bins).map(|_| rng.random_range(-1.0..1.0)).collect())
}

/// Writes a synthetic corpus and returns it featurized with a vocabulary
/// built from its targets.
fn synth_examples(dir: &Path, spec: &SynthSpec) -> (Manifest, Vec<Example>, Vocab) {
    let m = generate(dir, spec).unwrap();
    let chars: BTreeSet<char> = m.utterances.iter().flat_map(|u| u.tgt_text.chars()).collect();
    let vocab = Vocab::from_chars(chars).unwrap();
    let ex = load_examples(&m, dir, &vocab).unwrap();
    (m, ex, vocab)
}

#[test]
fn c01_gradient_check() {
    let start = Instant::now();
    let state = init(&toy_config(9, 6), 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let batch = Batch {
        features: vec![random_features(9, 6, &mut rng), random_features(14, 6, &mut rng)],
        targets: vec![vec![BOS, 4, 6, 5, 8, EOS], vec![BOS, 7, EOS, PAD]],
    };
    let mut worst = 0.0f64;
    let mut ok = true;
    let mut min_coords = usize::MAX;
    for eps in [0.0, 0.1, 0.2] {
        let opts = GradCheckOptions {
            label_smoothing: eps,
            samples: 256,
            seed: 7,
            ..Default::default()
        };
        let r = grad_check_with(&state, &batch, 1e-4, &opts).unwrap();
        min_coords = min_coords.min(r.coordinates.len());
        worst = worst.max(r.max_rel_error);
        ok &= r.passed && r.max_rel_error < 1e-4;
    }
    let elapsed = start.elapsed();
    ok &= min_coords >= 200 && elapsed < Duration::from_secs(60);
    verdict(
        1,
        "gradient check",
        ok,
        format!("max rel error {worst:.2e} over >= {min_coords} coordinates per eps, {elapsed:.1?}"),
    );
}

#[test]
fn c02_metric_parity() {
    let b = corpus_bleu(&["the cat sat on the mat"], &["the cat is on the mat"]).unwrap().bleu;
    let refs = ["मैं घर जा रहा हूँ", "the quick brown fox jumps over the lazy dog", "नदी में पानी है"];
    let same = corpus_bleu(&refs, &refs).unwrap().bleu;
    let chrf_same = chrf_pp(&refs, &refs).unwrap();
    let chrf_empty = chrf_pp(&[""], &["the cat is on the mat"]).unwrap();
    let ok = (b - 38.0).abs() <= 0.1 && same == 100.0 && chrf_same == 100.0 && chrf_empty == 0.0;
    verdict(
        2,
        "metric parity",
        ok,
        format!("cat/mat BLEU {b:.4}, identical BLEU {same}, chrF++ identical {chrf_same}, empty {chrf_empty}"),
    );
}

#[test]
fn c03_beam_correctness() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut greedy_agree = 0;
    for seed in 0..50u64 {
        let vocab_size = rng.random_range(5..=14);
        let bins = rng.random_range(3..=8);
        let state = init(&toy_config(vocab_size, bins), seed).unwrap();
        let f = random_features(rng.random_range(4..=24), bins, &mut rng);
        let max_len = rng.random_range(1..=12);
        if greedy(&state, &f, max_len).unwrap() == beam_search(&state, &f, 1, max_len).unwrap() {
            greedy_agree += 1;
        }
    }
    let mut oracle_cases = 0;
    let mut oracle_agree = 0;
    for content in 1..=4usize {
        let vocab_size = 4 + content;
        // UNK is emittable, so each step offers content + 1 body tokens plus EOS
        let choices = content + 2;
        for max_len in 1..=4usize {
            for seed in 0..3u64 {
                let state = init(&toy_config(vocab_size, 6), 100 * content as u64 + seed).unwrap();
                let f = random_features(8 + seed as usize, 6, &mut rng);
                let width = choices.pow(max_len as u32);
                let b = beam_search(&state, &f, width, max_len).unwrap();
                let o = exhaustive_oracle(&state, &f, max_len).unwrap();
                oracle_cases += 1;
                oracle_agree += (b == o) as usize;
            }
        }
    }
    let elapsed = start.elapsed();
    let ok = greedy_agree == 50 && oracle_agree == oracle_cases && elapsed < Duration::from_secs(30);
    verdict(
        3,
        "beam correctness",
        ok,
        format!("beam=1 == greedy {greedy_agree}/50, saturated beam == oracle {oracle_agree}/{oracle_cases}, {elapsed:.1?}"),
    );
}

#[test]
fn c04_augmentation_arithmetic() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let policy = AugmentPolicy {
        sp_enabled: true,
        sa_enabled: true,
        ..AugmentPolicy::default()
    };
    let mut tripled = true;
    for n in [1usize, 2, 7, 50] {
        let utts = (0..n)
            .map(|i| Utterance {
                id: format!("u{i}"),
                audio_path: format!("u{i}.wav"),
                duration_sec: rng.random_range(0.5..10.0),
                src_lang: "bho".into(),
                tgt_lang: "hi".into(),
                src_text: String::new(),
                tgt_text: "घर".into(),
            })
            .collect();
        let m = Manifest::new(Split::Train, utts).unwrap();
        let e = expand_with_speed(&m, &policy).unwrap();
        tripled &= e.len() == 3 * n;
    }
    let mut widest = (0usize, 0usize);
    let mut total = 0;
    let mut sample_rng = ChaCha8Rng::seed_from_u64(99);
    while total < 10_000 {
        let frames = sample_rng.random_range(20..600);
        for m in sample_masks(frames, 80, &policy, &mut sample_rng) {
            match m.axis {
                Axis::Time => widest.0 = widest.0.max(m.width),
                Axis::Frequency => widest.1 = widest.1.max(m.width),
            }
            total += 1;
        }
    }
    let draw = |seed| {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        (0..100).map(|_| sample_masks(300, 80, &policy, &mut r)).collect::<Vec<_>>()
    };
    let reproducible = draw(5) == draw(5) && draw(5) != draw(6);
    let ok = tripled && widest.0 <= 30 && widest.1 <= 30 && reproducible;
    verdict(
        4,
        "augmentation arithmetic",
        ok,
        format!(
            "3N expansion {tripled}, widest of {total} masks: time {} / freq {}, seeded reproducible {reproducible}",
            widest.0, widest.1
        ),
    );
}

#[test]
fn c05_speed_perturb_duration() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(1..20_000);
        let factor = [0.9, 1.0, 1.1][rng.random_range(0..3)];
        let w = Waveform::new((0..n).map(|_| rng.random_range(-0.5..0.5)).collect());
        let out = speed_perturb(&w, factor).unwrap();
        worst = worst.max((out.len() as f64 - n as f64 / factor).abs());
    }
    verdict(5, "speed-perturb duration", worst <= 1.0, format!("max |len(out) - len(in)/factor| = {worst:.3}"));
}

#[test]
fn c06_schedule() {
    let hp = HyperParams {
        lr_peak: 1e-5,
        warmup_steps: 250,
        ..Default::default()
    };
    let at_peak = lr_at_step(250, &hp) == hp.lr_peak;
    let rising = (0..250).all(|t| lr_at_step(t + 1, &hp) > lr_at_step(t, &hp));
    let falling = (250..20_000).all(|t| lr_at_step(t + 1, &hp) < lr_at_step(t, &hp));
    // both branches evaluated at the boundary
    let w = hp.warmup_steps as f64;
    let warm_branch = hp.lr_peak * w / w;
    let decay_branch = hp.lr_peak * (w / w).sqrt();
    let gap = (warm_branch - lr_at_step(250, &hp)).abs().max((decay_branch - lr_at_step(250, &hp)).abs());
    let ok = at_peak && rising && falling && gap <= 1e-12;
    verdict(
        6,
        "learning-rate schedule",
        ok,
        format!("lr(250) = {:e}, increasing {rising}, decreasing {falling}, boundary gap {gap:e}", lr_at_step(250, &hp)),
    );
}

#[test]
fn c07_loss_degeneracy() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let (rows, cols) = (rng.random_range(1..6), rng.random_range(2..9));
        let logits = Tensor::new(rows, cols, (0..rows * cols).map(|_| rng.random_range(-5.0..5.0)).collect());
        let gold: Vec<u32> = (0..rows).map(|_| rng.random_range(0..cols as u32)).collect();
        let (loss, _) = label_smoothed_loss(&[&logits], &[&gold], 0.0, u32::MAX).unwrap();
        let ce: f64 = (0..rows)
            .map(|r| {
                let row = logits.row(r);
                let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lse = m + row.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
                lse - row[gold[r] as usize]
            })
            .sum::<f64>()
            / rows as f64;
        worst = worst.max((loss - ce).abs());
    }
    let state = init(&toy_config(9, 6), 1).unwrap();
    let batch = Batch {
        features: vec![random_features(10, 6, &mut rng), random_features(7, 6, &mut rng)],
        targets: vec![vec![BOS, PAD, PAD], vec![BOS, PAD]],
    };
    let (pad_loss, grads) = batch_loss_and_grads(&state, &batch, 0.1, None).unwrap();
    let zero_grads = grads.iter().all(|g| g.data.iter().all(|&v| v == 0.0));
    let ok = worst <= 1e-12 && pad_loss == 0.0 && zero_grads;
    verdict(
        7,
        "loss degeneracy",
        ok,
        format!("max |ls(eps=0) - CE| = {worst:.1e}, all-PAD loss {pad_loss}, zero gradients {zero_grads}"),
    );
}

#[test]
fn c08_early_stopping() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut gaps_ok = true;
    let mut stopped_runs = 0;
    for _ in 0..500 {
        let patience = rng.random_range(1..12);
        let mut st = EarlyStopper::new(patience);
        for epoch in 1..=200 {
            let bleu = rng.random_range(0..30) as f64;
            if st.observe(epoch, bleu, 0.0) == StopDecision::Stop {
                gaps_ok &= epoch - st.best_epoch() == patience;
                stopped_runs += 1;
                break;
            }
        }
    }

    let dir = tempfile::tempdir().unwrap();
    let (_, data, vocab) = synth_examples(
        dir.path(),
        &SynthSpec {
            n_utterances: 8,
            ..SynthSpec::default()
        },
    );
    let cfg = ModelConfig {
        d_model: 32,
        n_heads: 4,
        ff_dim: 64,
        vocab_size: vocab.size(),
        ..ModelConfig::default()
    };
    let hp = HyperParams {
        lr_peak: 3e-3,
        batch_size: 4,
        warmup_steps: 40,
        patience: 4,
        max_epochs: 300,
        seed: 1,
        ..Default::default()
    };
    let (model, log) = train(init(&cfg, 2).unwrap(), &data, &data, &vocab, &hp, &AugmentPolicy::default()).unwrap();
    let run_gap = log.records.len() - log.best_epoch;
    let stopped = log.stop_reason == StopReason::Patience;
    let path = dir.path().join("best.ckpt");
    checkpoint::save(&model, &vocab, &path).unwrap();
    let (restored, _) = checkpoint::load(&path).unwrap();
    let (bleu, chrf) = evaluate(&restored, &data, &vocab).unwrap();
    let logged = &log.records[log.best_epoch - 1];
    let bit_identical = bleu.to_bits() == log.best_dev_bleu.to_bits()
        && bleu.to_bits() == logged.dev_bleu.to_bits()
        && chrf.to_bits() == logged.dev_chrf.to_bits();
    let ok = gaps_ok
        && stopped_runs > 100
        && stopped
        && run_gap == hp.patience
        && log.best_dev_bleu > 0.0
        && bit_identical;
    verdict(
        8,
        "early stopping",
        ok,
        format!(
            "{stopped_runs} synthetic sequences stop at best + patience: {gaps_ok}; training run stopped at epoch {} with best {} (gap {run_gap}), re-scored BLEU {bleu} == logged {}: {bit_identical}",
            log.records.len(),
            log.best_epoch,
            log.best_dev_bleu
        ),
    );
}

#[test]
fn c09_end_to_end_overfit() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let (_, data, vocab) = synth_examples(dir.path(), &SynthSpec::default());
    let cfg = ModelConfig {
        vocab_size: vocab.size(),
        ..ModelConfig::default()
    };
    let hp = HyperParams {
        lr_peak: 2e-3,
        label_smoothing: 0.1,
        batch_size: 4,
        warmup_steps: 250,
        patience: 10,
        beam_size: 10,
        max_epochs: 300,
        seed: 0,
    };
    let (model, log) = train(init(&cfg, 0).unwrap(), &data, &data, &vocab, &hp, &AugmentPolicy::default()).unwrap();
    let lines = decode_examples(&model, &data, &vocab, hp.beam_size).unwrap();
    let hyps: Vec<&str> = lines.iter().map(|l| l.text.as_str()).collect();
    let refs: Vec<&str> = data.iter().map(|e| e.reference.as_str()).collect();
    let bleu = corpus_bleu(&hyps, &refs).unwrap().bleu;
    let elapsed = start.elapsed();
    let ok = data.len() == 20 && bleu >= 90.0 && log.records.len() <= 300 && elapsed < Duration::from_secs(600);
    verdict(
        9,
        "end-to-end overfit",
        ok,
        format!(
            "train BLEU {bleu:.2} (beam 10) after {} epochs (best {}), {elapsed:.1?}",
            log.records.len(),
            log.best_epoch
        ),
    );
}

#[test]
fn c10_joint_protocol() {
    let dir = tempfile::tempdir().unwrap();
    let bho_dir = dir.path().join("bho");
    let mr_dir = dir.path().join("mr");
    let bho_spec = SynthSpec {
        n_utterances: 8,
        ..SynthSpec::default()
    };
    let mr_spec = SynthSpec {
        n_utterances: 6,
        src_lang: "mr".into(),
        pitch_scale: 1.3,
        id_prefix: "mr".into(),
        seed: 1,
        ..SynthSpec::default()
    };
    let bho = generate(&bho_dir, &bho_spec).unwrap();
    let mr = generate(&mr_dir, &mr_spec).unwrap();
    let mixed_manifest = mix(&bho, &mr, 3).unwrap();
    let chars: BTreeSet<char> = mixed_manifest.utterances.iter().flat_map(|u| u.tgt_text.chars()).collect();
    let vocab = Vocab::from_chars(chars).unwrap();
    let bho_ex = load_examples(&bho, &bho_dir, &vocab).unwrap();
    let mr_ex = load_examples(&mr, &mr_dir, &vocab).unwrap();
    let mixed: Vec<Example> = mixed_manifest
        .utterances
        .iter()
        .map(|u| bho_ex.iter().chain(&mr_ex).find(|e| e.id == u.id).unwrap().clone())
        .collect();
    let cfg = ModelConfig {
        d_model: 16,
        n_heads: 2,
        enc_layers: 1,
        dec_layers: 1,
        ff_dim: 32,
        vocab_size: vocab.size(),
        ..ModelConfig::default()
    };
    let hp = HyperParams {
        lr_peak: 3e-3,
        batch_size: 4,
        warmup_steps: 20,
        patience: 2,
        max_epochs: 6,
        ..Default::default()
    };
    let (_, log) = joint_finetune(
        init(&cfg, 0).unwrap(),
        &mixed,
        &bho_ex,
        &bho_ex,
        &vocab,
        &hp,
        &AugmentPolicy::default(),
        TargetEpochs::Fixed(1),
    )
    .unwrap();
    let p2 = log.phase2.as_ref().unwrap();
    let jsonl = log.to_jsonl();
    let phases: Vec<u64> = jsonl
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["phase"].as_u64().unwrap())
        .collect();
    let ok = mixed_manifest.len() == bho.len() + mr.len()
        && log.phase1.n_train == bho.len() + mr.len()
        && p2.n_train == bho.len()
        && p2.records.len() == 1
        && p2.stop_reason == StopReason::FixedEpochs
        && phases.iter().filter(|&&p| p == 2).count() == 1
        && phases.iter().filter(|&&p| p == 1).count() == log.phase1.records.len();
    verdict(
        10,
        "joint protocol",
        ok,
        format!(
            "phase 1 on {} = {} + {} utterances for {} epochs; phase 2 on {} target utterances for {} epoch",
            log.phase1.n_train,
            bho.len(),
            mr.len(),
            log.phase1.records.len(),
            p2.n_train,
            p2.records.len()
        ),
    );
}

#[allow(clippy::too_many_arguments)]
fn table_record(run: usize, batch: usize, sp: bool, sa: bool, warmup: u64, patience: usize, beam: usize, bleu: f64) -> ExperimentRecord {
    let mut r = ExperimentRecord::from_config(&Grid::default().config(0, &HyperParams::default()));
    r.run = run;
    r.lr = 1e-5;
    r.label_smoothing = 0.1;
    r.batch_size = batch;
    r.sp = sp;
    r.sa = sa;
    r.warmup_steps = warmup;
    r.patience = patience;
    r.beam_size = beam;
    r.dev_bleu = Some(bleu);
    r
}

#[test]
fn c11_sweep_fidelity() {
    let table6 = vec![
        table_record(0, 10, false, false, 100, 5, 5, 33.1),
        table_record(1, 10, false, false, 100, 5, 10, 33.8),
        table_record(2, 32, false, false, 100, 5, 10, 34.0),
        table_record(3, 32, false, true, 250, 5, 10, 35.3),
        table_record(4, 32, false, true, 250, 10, 10, 36.4),
        table_record(5, 32, false, true, 250, 20, 10, 35.6),
    ];
    let best = select_best(&table6).unwrap();
    let picked = best.sa && best.patience == 10 && best.beam_size == 10 && best.run == 4;
    let table5 = vec![
        table_record(0, 10, false, false, 250, 10, 10, 31.8),
        table_record(1, 10, false, true, 250, 10, 10, 33.7),
        table_record(2, 10, true, false, 250, 10, 10, 32.7),
        table_record(3, 10, true, true, 250, 10, 10, 32.4),
    ];
    let expected5 = "\
| SP | SA | BLEU |
| :---: | :---: | ---: |
| False | False | 31.8 |
| False | True | 33.7 |
| True | False | 32.7 |
| True | True | 32.4 |
";
    let expected6 = "\
| LR | LS | Batch size | SP | SA | Warm up steps | Patience | Beam size | BLEU |
| :--- | ---: | ---: | ---: | ---: | ---: | ---: | ---: | ---: |
| 1e-5 | 0.1 | 10 | False | False | 100 | 5 | 5 | 33.1 |
| 1e-5 | 0.1 | 10 | False | False | 100 | 5 | 10 | 33.8 |
| 1e-5 | 0.1 | 32 | False | False | 100 | 5 | 10 | 34.0 |
| 1e-5 | 0.1 | 32 | False | True | 250 | 5 | 10 | 35.3 |
| 1e-5 | 0.1 | 32 | False | True | 250 | 10 | 10 | 36.4 |
| 1e-5 | 0.1 | 32 | False | True | 250 | 20 | 10 | 35.6 |
";
    let r5 = render_table(&table5, Layout::Augmentation);
    let r6 = render_table(&table6, Layout::Full);
    let stable = r5 == render_table(&table5, Layout::Augmentation) && r6 == render_table(&table6, Layout::Full);
    let ok = picked && r5 == expected5 && r6 == expected6 && stable;
    if !ok {
        println!("{r5}\n{r6}");
    }
    verdict(
        11,
        "sweep fidelity",
        ok,
        format!(
            "best row {} (BLEU {:.1}, SA {}, patience {}, beam {}); Table 5 and Table 6 layouts byte-exact: {}",
            best.run,
            best.dev_bleu.unwrap(),
            best.sa,
            best.patience,
            best.beam_size,
            r5 == expected5 && r6 == expected6
        ),
    );
}

#[test]
fn c12_error_analysis() {
    let value = numeral_audit("a", "8 crores 74 lakhs", "87.4 lakhs");
    let script = numeral_audit("b", "Fifteen", "पन्द्रह");
    let values_ok = value.hyp_values.len() == 1
        && value.hyp_values[0] == 87_400_000.into()
        && value.ref_values.len() == 1
        && value.ref_values[0] == 8_740_000.into();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let words = ["घर", "पानी", "नदी", "आम", "दस", "जल", "the", "cat"];
    let sentence = |rng: &mut ChaCha8Rng| {
        let n = rng.random_range(0..12);
        (0..n).map(|_| words[rng.random_range(0..words.len())]).collect::<Vec<_>>().join(" ")
    };
    let pairs: Vec<Pair> = (0..300)
        .map(|i| Pair {
            id: format!("p{i}"),
            hyp: sentence(&mut rng),
            reference: sentence(&mut rng),
        })
        .collect();
    let buckets = classify_lengths(&pairs, 15.0);
    let counts = [LengthCategory::RefLonger, LengthCategory::Equal, LengthCategory::HypLonger]
        .map(|c| buckets.iter().filter(|b| b.category == c).count());
    let partition = counts.iter().sum::<usize>() == pairs.len()
        && buckets
            .iter()
            .all(|b| [b.hyp_words < b.ref_words, b.hyp_words == b.ref_words, b.hyp_words > b.ref_words].iter().filter(|&&x| x).count() == 1);
    let example = bucket_from_counts("x", 6, 10, 8.0, 15.0);
    let flagged = example.category == LengthCategory::RefLonger && example.flags.len() == 2;
    let ok = value.verdict == Verdict::ValueMismatch
        && values_ok
        && script.verdict == Verdict::ScriptMismatchOnly
        && partition
        && flagged;
    verdict(
        12,
        "error analysis",
        ok,
        format!(
            "{:?} ({} vs {}), {:?}, buckets {:?} partition {} pairs: {partition}",
            value.verdict,
            value.hyp_values[0],
            value.ref_values[0],
            script.verdict,
            counts,
            pairs.len()
        ),
    );
}
