//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use finkey::corpus::{Document, SentimentLabel};
use finkey::encoder::EncoderConfig;
use finkey::evaluation::{
    accuracy, ensemble_train_select, entity_prf, member_sentiments, run_pipeline, score_predictions, vote_sentiment,
    BowBaseline, EnsembleSpec, PipelineConfig, PipelineModels,
};
use finkey::gradcheck::model_gradient_errors;
use finkey::synthetic::{matcher_corpus, mrc_corpus, pipeline_corpus, sentiment_corpus};
use finkey::tasks::{
    best_span, binary_cross_entropy, build_question, detect_key_entities, extract_span, focal_loss,
    predict_sentiment, score_entity, ClassicalConfig, ClassicalKind, EncodedExample, FocalConfig, LossKind, Model,
    SentimentPrediction, Supervision, Task, DEFAULT_TEMPLATE,
};
use finkey::tokenizer::{build_vocab, encode_pair, encode_single, tokenize};
use finkey::training::{kfold_split, train_documents, Checkpoint, EncoderShape, TaskDataset, TrainConfig};

struct Verdict {
    ok: bool,
    detail: String,
}

fn check(ok: bool, detail: impl Into<String>) -> Verdict {
    Verdict { ok, detail: detail.into() }
}

fn small(task: Task, epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        learning_rate: 2e-3,
        max_len: 40,
        encoder: EncoderShape { d_model: 32, n_heads: 4, n_layers: 2, d_ff: 64, dropout_rate: 0.1 },
        ..TrainConfig::for_task(task)
    }
}

fn bce_oracle(p: f64, y: f64) -> f64 {
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

fn loss_equivalence() -> Verdict {
    let cfg = FocalConfig { gamma: 0.0, alpha: None };
    let mut worst = 0.0f64;
    for i in 1..=99 {
        let p = i as f64 / 100.0;
        for y in [false, true] {
            let f = focal_loss(p, y, &cfg);
            worst = worst.max((f - bce_oracle(p, y as u8 as f64)).abs());
            worst = worst.max((f - binary_cross_entropy(p, y)).abs());
        }
    }
    check(worst <= 1e-9, format!("max |focal - bce| = {worst:.1e} over 198 points"))
}

fn gradient_correctness() -> Verdict {
    let text = "acme bank was not fined while zeta trust grew , rivals were quiet";
    let vocab = build_vocab(tokenize(text).into_iter().map(|t| t.text), 1, 100).unwrap();
    let config = EncoderConfig {
        vocab_size: vocab.len(),
        d_model: 8,
        n_heads: 2,
        n_layers: 2,
        d_ff: 16,
        max_len: 16,
        dropout_rate: 0.1,
    };
    let single = encode_single(text, &vocab, 16).unwrap();
    let pair = encode_pair("zeta trust", text, &vocab, 16).unwrap();
    let focal = |gamma, alpha| LossKind::Focal(FocalConfig { gamma, alpha });
    let cases = [
        ("sentiment/ce", Task::Sentiment, single, Supervision::Sentiment(0), LossKind::CrossEntropy),
        ("match/ce", Task::Match, pair.clone(), Supervision::Match(true), LossKind::CrossEntropy),
        ("match/focal", Task::Match, pair.clone(), Supervision::Match(false), focal(2.0, None)),
        ("match/focal-alpha", Task::Match, pair.clone(), Supervision::Match(true), focal(1.5, Some(0.25))),
        ("mrc/span", Task::Mrc, pair, Supervision::Span { start: 5, end: 6 }, LossKind::CrossEntropy),
    ];
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for (name, task, seq, target, loss) in cases {
        let model = Model::init(config.clone(), task, vocab.clone(), &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let example = EncodedExample { seq, target };
        let e = model_gradient_errors(&model, &example, &loss, Some(4), 1e-5)
            .unwrap()
            .into_iter()
            .fold(0.0, f64::max);
        worst = worst.max(e);
        parts.push(format!("{name} {e:.1e}"));
    }
    check(worst < 1e-4, format!("max relative error {worst:.2e} ({})", parts.join(", ")))
}

/// Counts by scanning the universe element by element.
fn prf_oracle(preds: &[Vec<usize>], golds: &[Vec<usize>], universe: usize) -> (usize, usize, usize) {
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (p, g) in preds.iter().zip(golds) {
        for x in 0..universe {
            match (p.contains(&x), g.contains(&x)) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                _ => {}
            }
        }
    }
    (tp, fp, fn_)
}

fn metric_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let names: Vec<String> = (0..8).map(|i| format!("E{i}")).collect();
    let mut mismatches = 0;
    for _ in 0..1000 {
        let n_texts = rng.gen_range(0..6);
        let draw = |rng: &mut ChaCha8Rng| -> Vec<usize> { (0..8).filter(|_| rng.gen_bool(0.3)).collect() };
        let preds: Vec<Vec<usize>> = (0..n_texts).map(|_| draw(&mut rng)).collect();
        let golds: Vec<Vec<usize>> = (0..n_texts).map(|_| draw(&mut rng)).collect();
        let as_sets = |v: &[Vec<usize>]| -> Vec<BTreeSet<String>> {
            v.iter().map(|s| s.iter().map(|&i| names[i].clone()).collect()).collect()
        };
        let m = entity_prf(&as_sets(&preds), &as_sets(&golds)).unwrap();
        let (tp, fp, fn_) = prf_oracle(&preds, &golds, 8);
        let p = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
        let r = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
        let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        if (m.tp, m.fp, m.fn_) != (tp, fp, fn_) || m.precision != p || m.recall != r || m.f1 != f {
            mismatches += 1;
        }
    }
    let set = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<BTreeSet<String>>();
    let worked = entity_prf(&[set(&["A", "C"]), set(&["D"])], &[set(&["A", "B"]), set(&["D"])]).unwrap();
    let worked_ok = (worked.tp, worked.fp, worked.fn_) == (2, 1, 1)
        && [worked.precision, worked.recall, worked.f1].iter().all(|v| (v - 2.0 / 3.0).abs() < 1e-15);
    let zero = entity_prf(&[set(&[])], &[set(&[])]).unwrap();
    let zero_ok = (zero.precision, zero.recall, zero.f1) == (0.0, 0.0, 0.0);
    check(
        mismatches == 0 && worked_ok && zero_ok,
        format!("{mismatches} mismatches in 1000 collections; worked example {worked_ok}; zero denominators {zero_ok}"),
    )
}

fn threshold_monotonicity(matcher: &Checkpoint) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut violations = 0;
    for _ in 0..1000 {
        let n = rng.gen_range(0..10);
        let scores: Vec<(String, f64)> = (0..n).map(|i| (format!("e{i}"), rng.gen::<f64>())).collect();
        let low: BTreeSet<String> = detect_key_entities(&scores, 0.2).unwrap().into_iter().collect();
        let high: BTreeSet<String> = detect_key_entities(&scores, 0.5).unwrap().into_iter().collect();
        violations += !high.is_subset(&low) as usize;
    }

    // a quick sentiment filter for event texts, then the trained matcher
    let docs = pipeline_corpus(900, 40);
    let (tr, rest) = docs.split_at(500);
    let (dev, test) = rest.split_at(100);
    let sentiment = train_documents(tr, &small(Task::Sentiment, 3), dev).unwrap().checkpoint;
    let (s, m) = (vec![sentiment], vec![matcher.clone()]);
    let models = PipelineModels { sentiment: &s, matcher: &m, mrc: None, lexicon: None };
    let recall = |threshold| {
        let cfg = PipelineConfig { threshold, ..PipelineConfig::default() };
        let res = run_pipeline(test, &models, &cfg).unwrap();
        score_predictions(&res.outputs, test).unwrap().entities.unwrap().recall
    };
    let (r_low, r_high) = (recall(0.2), recall(0.5));
    check(
        violations == 0 && r_low >= r_high,
        format!("{violations} superset violations; pipeline recall {r_low:.4} at 0.2 vs {r_high:.4} at 0.5"),
    )
}

/// Exhaustive search with the same tie rule: larger sum, then smaller i, then smaller j.
fn span_oracle(start: &[f64], end: &[f64], valid: &[usize], max_len: usize) -> (usize, usize) {
    let mut best: Option<(f64, usize, usize)> = None;
    for &i in valid {
        for &j in valid {
            if j < i || j - i >= max_len {
                continue;
            }
            let s = start[i] + end[j];
            let better = match best {
                None => true,
                Some((b, bi, bj)) => s > b || (s == b && (i, j) < (bi, bj)),
            };
            if better {
                best = Some((s, i, j));
            }
        }
    }
    let (_, i, j) = best.expect("valid is non-empty");
    (i, j)
}

fn span_correctness() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut mismatches = 0;
    for case in 0..500 {
        let len = rng.gen_range(1..32);
        // integer scores on some cases force ties
        let draw = |rng: &mut ChaCha8Rng| {
            if case % 3 == 0 {
                rng.gen_range(-3..3) as f64
            } else {
                rng.gen_range(-5.0..5.0)
            }
        };
        let start: Vec<f64> = (0..len).map(|_| draw(&mut rng)).collect();
        let end: Vec<f64> = (0..len).map(|_| draw(&mut rng)).collect();
        let mut valid: Vec<usize> = (0..len).filter(|_| rng.gen_bool(0.6)).collect();
        if valid.is_empty() {
            valid.push(rng.gen_range(0..len));
        }
        let max_len = rng.gen_range(1..=len + 2);
        if best_span(&start, &end, &valid, max_len).unwrap() != span_oracle(&start, &end, &valid, max_len) {
            mismatches += 1;
        }
    }

    // extract_span on a real (untrained) model against the oracle over its scores
    let docs = mrc_corpus(30, 6);
    let vocab = build_vocab(docs.iter().flat_map(|d| tokenize(&d.cleaned_text)).map(|t| t.text), 1, 1000).unwrap();
    let mut cfg = small(Task::Mrc, 1).encoder_config(vocab.len());
    cfg.max_len = 32;
    let model = Model::init(cfg, Task::Mrc, vocab.clone(), &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
    let mut model_mismatches = 0;
    for (k, d) in docs.iter().enumerate() {
        let q = build_question(d.tag.as_deref().unwrap(), DEFAULT_TEMPLATE).unwrap();
        let max_len = 1 + k % 5;
        let got = extract_span(&model, &q, &d.cleaned_text, max_len).unwrap();
        let seq = encode_pair(&q, &d.cleaned_text, &vocab, 32).unwrap();
        let (s, e) = model.span_scores(&seq).unwrap();
        let valid: Vec<usize> = seq.context_positions().collect();
        let want = span_oracle(s.as_slice().unwrap(), e.as_slice().unwrap(), &valid, max_len);
        model_mismatches += ((got.start_token, got.end_token) != want) as usize;
    }
    check(
        mismatches == 0 && model_mismatches == 0,
        format!("{mismatches}/500 score-tensor mismatches; {model_mismatches}/30 model mismatches"),
    )
}

fn determinism() -> Verdict {
    let docs = sentiment_corpus(260, 7);
    let (tr, dev) = docs.split_at(200);
    let mut cfg = small(Task::Sentiment, 2);
    cfg.encoder = EncoderShape { d_model: 16, n_heads: 2, n_layers: 2, d_ff: 32, dropout_rate: 0.1 };
    cfg.seed = 17;
    let bytes = |cfg: &TrainConfig| train_documents(tr, cfg, dev).unwrap().checkpoint.to_bytes().unwrap();
    let (a, b) = (bytes(&cfg), bytes(&cfg));
    let other = bytes(&TrainConfig { seed: 18, ..cfg.clone() });
    let identical = a == b && a != other;

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut bad = 0;
    for _ in 0..100 {
        let n = rng.gen_range(2..200);
        let k = rng.gen_range(2..=n.min(12));
        let seed = rng.gen();
        let split = kfold_split(n, k, seed).unwrap();
        let again = kfold_split(n, k, seed).unwrap();
        let mut all: Vec<usize> = (0..k).flat_map(|f| split.dev_indices(f)).collect();
        all.sort_unstable();
        let partition = all == (0..n).collect::<Vec<_>>();
        let sizes: Vec<usize> = (0..k).map(|f| split.dev_indices(f).len()).collect();
        let balanced = sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1;
        let complement = (0..k).all(|f| {
            let dev: BTreeSet<usize> = split.dev_indices(f).into_iter().collect();
            let tr: BTreeSet<usize> = split.train_indices(f).into_iter().collect();
            dev.is_disjoint(&tr) && dev.len() + tr.len() == n
        });
        let same = (0..k).all(|f| split.dev_indices(f) == again.dev_indices(f));
        bad += !(partition && balanced && complement && same) as usize;
    }
    check(
        identical && bad == 0,
        format!("checkpoints byte-identical {identical} ({} bytes); {bad}/100 bad splits", a.len()),
    )
}

struct EndToEnd {
    verdict: Verdict,
    matcher: Checkpoint,
}

fn synthetic_end_to_end() -> EndToEnd {
    let docs = sentiment_corpus(3000, 20);
    let (tr, rest) = docs.split_at(1500);
    let (dev, test) = rest.split_at(500);
    let sent = train_documents(tr, &small(Task::Sentiment, 10), dev).unwrap().checkpoint;
    let gold: Vec<SentimentLabel> = test.iter().map(|d| d.sentiment.unwrap()).collect();
    let preds: Vec<SentimentLabel> = test.iter().map(|d| predict_sentiment(&sent.model, d).unwrap().label).collect();
    let acc = accuracy(&preds, &gold).unwrap();
    let lr = BowBaseline::fit(ClassicalKind::Lr, tr, 40, &ClassicalConfig::default()).unwrap();
    let lr_acc = lr.accuracy(test).unwrap();

    let docs = matcher_corpus(3500, 21);
    let (tr, rest) = docs.split_at(2500);
    let (dev, test) = rest.split_at(400);
    let matcher = train_documents(tr, &small(Task::Match, 15), dev).unwrap().checkpoint;
    let pred_sets: Vec<BTreeSet<String>> = test
        .iter()
        .map(|d| {
            let scores: Vec<(String, f64)> = d
                .entity_list
                .as_ref()
                .unwrap()
                .iter()
                .map(|e| (e.clone(), score_entity(&matcher.model, e, &d.cleaned_text).unwrap()))
                .collect();
            detect_key_entities(&scores, 0.5).unwrap().into_iter().collect()
        })
        .collect();
    let gold_sets: Vec<BTreeSet<String>> = test.iter().map(Document::key_set).collect();
    let f1 = entity_prf(&pred_sets, &gold_sets).unwrap().f1;

    let docs = mrc_corpus(2250, 22);
    let (tr, rest) = docs.split_at(1500);
    let (dev, test) = rest.split_at(250);
    let cfg = small(Task::Mrc, 8);
    let mrc = train_documents(tr, &cfg, dev).unwrap().checkpoint;
    let hits = test
        .iter()
        .filter(|d| {
            let q = build_question(d.tag.as_deref().unwrap(), &cfg.question_template).unwrap();
            extract_span(&mrc.model, &q, &d.cleaned_text, cfg.max_span_len).unwrap().text == d.key_entities.as_ref().unwrap()[0]
        })
        .count();
    let em = hits as f64 / test.len() as f64;

    let ok = acc >= 0.95 && acc - lr_acc >= 0.05 && f1 >= 0.90 && em >= 0.90;
    EndToEnd {
        verdict: check(
            ok,
            format!(
                "(a) sentiment acc {acc:.4} (b) bow+LR {lr_acc:.4}, margin {:.4} (c) matcher F1 {f1:.4} (d) mrc EM {em:.4}",
                acc - lr_acc
            ),
        ),
        matcher,
    }
}

fn vote_oracle(members: &[(bool, f64)]) -> (bool, f64) {
    let neg = members.iter().filter(|m| m.0).count();
    let pos = members.len() - neg;
    let mean = members.iter().map(|m| m.1).sum::<f64>() / members.len() as f64;
    let negative = if neg != pos { neg > pos } else { mean >= 0.5 };
    (negative, mean)
}

fn ensemble_properties() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let n = rng.gen_range(1..13);
        let raw: Vec<(bool, f64)> = (0..n).map(|_| (rng.gen_bool(0.5), rng.gen::<f64>())).collect();
        let members: Vec<SentimentPrediction> = raw
            .iter()
            .map(|&(neg, p)| SentimentPrediction {
                label: if neg { SentimentLabel::Negative } else { SentimentLabel::Positive },
                prob_negative: p,
            })
            .collect();
        let v = vote_sentiment(&members).unwrap();
        let (neg, mean) = vote_oracle(&raw);
        if (v.label == SentimentLabel::Negative) != neg || (v.prob_negative - mean).abs() > 1e-12 {
            mismatches += 1;
        }
    }

    let docs = sentiment_corpus(1900, 30);
    let (tr, rest) = docs.split_at(1000);
    let (dev, test) = rest.split_at(300);
    let trd = TaskDataset::from_documents(Task::Sentiment, tr, DEFAULT_TEMPLATE).unwrap();
    let dvd = TaskDataset::from_documents(Task::Sentiment, dev, DEFAULT_TEMPLATE).unwrap();
    let mut cfg = small(Task::Sentiment, 6);
    cfg.encoder = EncoderShape { d_model: 24, n_heads: 4, n_layers: 2, d_ff: 48, dropout_rate: 0.1 };
    let spec = EnsembleSpec { seeds: (0..7).collect(), top_m: 5 };
    let sel = ensemble_train_select(&trd, &cfg, &spec, &dvd).unwrap();
    let kept: Vec<f64> = sel.members.iter().filter(|m| m.kept).map(|m| m.dev_score).collect();
    let dropped: Vec<f64> = sel.members.iter().filter(|m| !m.kept).map(|m| m.dev_score).collect();
    let separated = kept.len() == 5
        && sel.kept.len() == 5
        && kept.iter().cloned().fold(f64::INFINITY, f64::min) >= dropped.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        && sel.kept.windows(2).all(|w| w[0].dev_score >= w[1].dev_score);

    let gold: Vec<SentimentLabel> = test.iter().map(|d| d.sentiment.unwrap()).collect();
    let mut singles: Vec<f64> = sel
        .kept
        .iter()
        .map(|c| {
            let p: Vec<_> = test.iter().map(|d| predict_sentiment(&c.model, d).unwrap().label).collect();
            accuracy(&p, &gold).unwrap()
        })
        .collect();
    singles.sort_by(f64::total_cmp);
    let median = singles[singles.len() / 2];
    let voted: Vec<_> = test
        .iter()
        .map(|d| vote_sentiment(&member_sentiments(&sel.kept, &d.cleaned_text).unwrap()).unwrap().label)
        .collect();
    let ens = accuracy(&voted, &gold).unwrap();
    check(
        mismatches == 0 && separated && ens >= median - 0.01,
        format!("{mismatches}/1000 vote mismatches; kept/dropped separated {separated}; ensemble {ens:.4} vs median member {median:.4}"),
    )
}

fn report(id: usize, name: &str, limit: Duration, f: impl FnOnce() -> Verdict) -> bool {
    let t = Instant::now();
    let v = f();
    let elapsed = t.elapsed();
    let in_time = elapsed <= limit;
    let ok = v.ok && in_time;
    println!(
        "[{}] {id}. {name}: {} ({:.1} s, limit {} s)",
        if ok { "PASS" } else { "FAIL" },
        v.detail,
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    ok
}

fn main() {
    let secs = Duration::from_secs;
    let mut results = Vec::new();
    results.push(report(1, "loss equivalence", secs(1), loss_equivalence));
    results.push(report(2, "gradient correctness", secs(120), gradient_correctness));
    results.push(report(3, "metric oracle", secs(10), metric_oracle));
    results.push(report(5, "span oracle", secs(30), span_correctness));
    results.push(report(6, "determinism", secs(300), determinism));
    let mut matcher = None;
    results.push(report(7, "synthetic end-to-end", secs(900), || {
        let e = synthetic_end_to_end();
        matcher = Some(e.matcher);
        e.verdict
    }));
    let matcher = matcher.expect("criterion 7 trains the matcher");
    results.push(report(4, "threshold monotonicity", secs(30), || threshold_monotonicity(&matcher)));
    results.push(report(8, "ensemble properties", secs(600), ensemble_properties));
    let passed = results.iter().filter(|&&r| r).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
