use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serfiq::dataset::{self, EmbeddingDataset, EmbeddingRecord, Format, QualityTable};
use serfiq::densenet::{self, NetSpec, OutputActivation};
use serfiq::metrics;
use serfiq::{Net, Qualities};
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_serfiq")).args(args).output().expect("spawn serfiq")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "serfiq {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(args: &[&str]) -> i32 {
    run(args).status.code().expect("exit code")
}

fn p(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn corpus(dir: &TempDir, extra: &[&str]) -> (PathBuf, PathBuf) {
    let emb = p(dir, "corpus.emb1");
    let truth = p(dir, "truth.csv");
    let mut args = vec!["synth-gen", "--output", s(&emb), "--quality-output", s(&truth)];
    args.extend_from_slice(extra);
    ok(&args);
    (emb, truth)
}

#[test]
fn synth_gen_defaults_are_loadable() {
    let dir = TempDir::new().unwrap();
    let (emb, truth) = corpus(&dir, &[]);
    let ds: serfiq::Dataset = dataset::load_embeddings(&emb, Format::Emb1).unwrap();
    assert_eq!(ds.len(), 100);
    assert_eq!(ds.dim(), 64);
    assert_eq!(ds.identity_count(), 10);
    let q: Qualities = dataset::load_quality_table(&truth).unwrap();
    assert_eq!(q.len(), 100);

    let csv = p(&dir, "corpus.csv");
    ok(&["synth-gen", "--identities", "3", "--images-per-identity", "4", "--dim", "5", "--output", s(&csv)]);
    let back: serfiq::Dataset = dataset::load_embeddings(&csv, Format::Csv).unwrap();
    assert_eq!((back.len(), back.dim()), (12, 5));
}

#[test]
fn synth_gen_is_byte_identical() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let (ea, ta) = corpus(&a, &["--dim", "8"]);
    let (eb, tb) = corpus(&b, &["--dim", "8"]);
    assert_eq!(fs::read(ea).unwrap(), fs::read(eb).unwrap());
    assert_eq!(fs::read(ta).unwrap(), fs::read(tb).unwrap());
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let out = p(&dir, "x.emb1");
    assert_eq!(code(&["synth-gen", "--noise-low", "0.5", "--noise-high", "0.1", "--output", s(&out)]), 2);
    assert_eq!(code(&["synth-gen", "--no-such-flag"]), 2);
    assert_eq!(code(&["score", "--mode", "sideways", "--model", "a", "--input", "b", "--output", "c"]), 2);
    assert_eq!(code(&[]), 2);

    let missing = p(&dir, "missing.emb1");
    let q = p(&dir, "q.csv");
    assert_eq!(code(&["score", "--model", s(&missing), "--input", s(&missing), "--output", s(&q)]), 1);
    assert_eq!(code(&["histogram", "--quality", s(&missing), "--output", s(&q)]), 1);
    assert!(!run(&["histogram", "--quality", s(&missing), "--output", s(&q)]).stderr.is_empty());

    let (emb, _) = corpus(&dir, &["--dim", "4", "--identities", "3", "--images-per-identity", "3"]);
    let hist = p(&dir, "h.csv");
    assert_eq!(code(&["histogram", "--quality", s(&q), "--bins", "0", "--output", s(&hist)]), 2);
    let od = p(&dir, "out");
    assert_eq!(
        code(&["evaluate", "--input", s(&emb), "--quality", s(&q), "--ratios", "0.5,0.2", "--out-dir", s(&od)]),
        2
    );
}

#[test]
fn train_zero_epochs_keeps_initialization() {
    let dir = TempDir::new().unwrap();
    let (emb, _) = corpus(&dir, &["--dim", "6", "--identities", "4", "--images-per-identity", "3"]);
    let model = p(&dir, "m.bin");
    let hist = p(&dir, "h.csv");
    ok(&["train", "--input", s(&emb), "--model", s(&model), "--epochs", "0", "--seed", "9", "--history", s(&hist)]);
    let net: Net = densenet::load_model(&model).unwrap();
    let fresh: Net = densenet::init_net(&NetSpec::on_top(6, 4, 0.5, 9).unwrap()).unwrap();
    assert_eq!(net, fresh);
    assert_eq!(fs::read_to_string(&hist).unwrap(), "epoch,mean_loss\n");
}

#[test]
fn train_reduces_loss_and_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let (emb, _) = corpus(&dir, &["--dim", "8", "--identities", "5", "--images-per-identity", "6"]);
    let args = |model: &Path, hist: &Path| {
        ok(&[
            "train", "--input", s(&emb), "--model", s(model), "--epochs", "200", "--batch-size", "32", "--lr", "1",
            "--hidden", "16,32", "--history", s(hist),
        ]);
    };
    let (m1, h1, m2, h2) = (p(&dir, "m1.bin"), p(&dir, "h1.csv"), p(&dir, "m2.bin"), p(&dir, "h2.csv"));
    args(&m1, &h1);
    args(&m2, &h2);
    assert_eq!(fs::read(&m1).unwrap(), fs::read(&m2).unwrap());
    assert_eq!(fs::read(&h1).unwrap(), fs::read(&h2).unwrap());

    let history = fs::read_to_string(&h1).unwrap();
    let losses: Vec<f64> = history.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(losses.len(), 200);
    assert!(losses[199] < losses[0]);
    let net: Net = densenet::load_model(&m1).unwrap();
    assert_eq!(net.spec().layer_dims, vec![8, 16, 32, 8, 5]);
}

#[test]
fn score_without_dropout_gives_unit_quality() {
    let dir = TempDir::new().unwrap();
    let (emb, _) = corpus(&dir, &["--dim", "6", "--identities", "3", "--images-per-identity", "4"]);
    let model = p(&dir, "m.bin");
    ok(&["train", "--input", s(&emb), "--model", s(&model), "--epochs", "2", "--dropout", "0"]);
    for mode in ["on-top", "same-model"] {
        let q = p(&dir, &format!("{mode}.csv"));
        ok(&["score", "--model", s(&model), "--input", s(&emb), "--m", "10", "--mode", mode, "--output", s(&q)]);
        let table: Qualities = dataset::load_quality_table(&q).unwrap();
        assert_eq!(table.len(), 12);
        assert!(table.values().all(|v| v == 1.0), "{mode}");
    }
}

#[test]
fn score_ignores_input_order() {
    let dir = TempDir::new().unwrap();
    let (emb, _) = corpus(&dir, &["--dim", "6", "--identities", "4", "--images-per-identity", "4"]);
    let ds: serfiq::Dataset = dataset::load_embeddings(&emb, Format::Emb1).unwrap();
    let mut records: Vec<EmbeddingRecord<f64>> = ds.records().to_vec();
    records.reverse();
    records.swap(1, 7);
    let permuted = p(&dir, "permuted.csv");
    dataset::save_embeddings(&EmbeddingDataset::from_records(6, records).unwrap(), &permuted, Format::Csv).unwrap();

    let model = p(&dir, "m.bin");
    ok(&["train", "--input", s(&emb), "--model", s(&model), "--epochs", "3"]);
    let (qa, qb) = (p(&dir, "qa.csv"), p(&dir, "qb.csv"));
    ok(&["score", "--model", s(&model), "--input", s(&emb), "--m", "12", "--seed", "4", "--output", s(&qa)]);
    ok(&["score", "--model", s(&model), "--input", s(&permuted), "--m", "12", "--seed", "4", "--output", s(&qb)]);
    let a = fs::read(&qa).unwrap();
    assert_eq!(a, fs::read(&qb).unwrap());

    let table: Qualities = dataset::load_quality_table(&qa).unwrap();
    assert!(table.values().all(|v| v > 0.0 && v <= 1.0));
    let qc = p(&dir, "qc.csv");
    ok(&["score", "--model", s(&model), "--input", s(&emb), "--m", "12", "--seed", "4", "--output", s(&qc)]);
    assert_eq!(a, fs::read(&qc).unwrap());
}

fn curve(path: &Path) -> Vec<(f64, f64)> {
    metrics::read_curve(path).unwrap().into_iter().map(|r| (r.ratio, r.error)).collect()
}

#[test]
fn evaluate_single_ratio_equals_full_set_error() {
    let dir = TempDir::new().unwrap();
    let (emb, truth) = corpus(&dir, &["--dim", "8", "--noise-high", "0.6"]);
    let pairs = p(&dir, "pairs.csv");
    ok(&["pairs", "--input", s(&emb), "--impostors", "2000", "--seed", "3", "--output", s(&pairs)]);
    let out = p(&dir, "out");
    ok(&[
        "evaluate", "--input", s(&emb), "--pairs", s(&pairs), "--quality", s(&truth), "--ratios", "0", "--fmr", "0.01",
        "--eer", "--out-dir", s(&out),
    ]);

    let ds: serfiq::Dataset = dataset::load_embeddings(&emb, Format::Emb1).unwrap();
    let protocol = dataset::load_pairs(&pairs, &ds).unwrap();
    let scores = metrics::compute_scores(&ds, &protocol).unwrap();
    let (g, i) = (scores.genuine_scores(), scores.impostor_scores());
    let t = metrics::threshold_at_fmr(&i, 0.01).unwrap().threshold;

    let fnmr_curve = curve(&out.join("truth_fnmr_at_fmr_0.01.csv"));
    assert_eq!(fnmr_curve, vec![(0.0, metrics::fnmr(&g, t).unwrap())]);
    let eer_curve = curve(&out.join("truth_eer.csv"));
    assert_eq!(eer_curve, vec![(0.0, metrics::eer(&g, &i).unwrap().eer)]);
}

#[test]
fn evaluate_rejects_incomplete_quality_table() {
    let dir = TempDir::new().unwrap();
    let (emb, truth) = corpus(&dir, &["--dim", "4", "--identities", "3", "--images-per-identity", "3"]);
    let full: Qualities = dataset::load_quality_table(&truth).unwrap();
    let partial: QualityTable<f64> = full.iter().skip(1).map(|(k, v)| (k.to_string(), v)).collect();
    let q = p(&dir, "partial.csv");
    dataset::save_quality_table(&partial, &q).unwrap();
    let out = p(&dir, "out");
    assert_eq!(code(&["evaluate", "--input", s(&emb), "--quality", s(&q), "--out-dir", s(&out)]), 1);
}

#[test]
fn evaluate_ground_truth_beats_random() {
    let dir = TempDir::new().unwrap();
    let (emb, truth) = corpus(&dir, &["--dim", "16", "--identities", "20", "--images-per-identity", "15", "--noise-high", "0.5"]);
    let ds: serfiq::Dataset = dataset::load_embeddings(&emb, Format::Emb1).unwrap();
    let random: QualityTable<f64> = ds
        .records()
        .iter()
        .map(|r| (r.image_id.clone(), serfiq::seed::unit_f64(serfiq::seed::hash_str(&r.image_id))))
        .collect();
    let rq = p(&dir, "random.csv");
    dataset::save_quality_table(&random, &rq).unwrap();

    let out = p(&dir, "out");
    let summary = ok(&[
        "evaluate", "--input", s(&emb), "--impostors", "20000", "--seed", "1", "--quality", s(&truth), "--quality",
        s(&rq), "--fmr", "0.01", "--ratios", "0:0.1:0.5", "--out-dir", s(&out),
    ]);
    let summary = String::from_utf8(summary.stdout).unwrap();
    assert!(summary.starts_with("quality,operating_point,area\n"));

    let t = curve(&out.join("truth_fnmr_at_fmr_0.01.csv"));
    assert_eq!(t.len(), 6);
    assert!(t.windows(2).all(|w| w[1].1 <= w[0].1 + 0.02), "{t:?}");
    assert!(t[5].1 < t[0].1);

    let r = curve(&out.join("random_fnmr_at_fmr_0.01.csv"));
    let n = r.len() as f64;
    let (mx, my) = (r.iter().map(|x| x.0).sum::<f64>() / n, r.iter().map(|x| x.1).sum::<f64>() / n);
    let slope = r.iter().map(|x| (x.0 - mx) * (x.1 - my)).sum::<f64>() / r.iter().map(|x| (x.0 - mx).powi(2)).sum::<f64>();
    let truth_drop = (t[5].1 - t[0].1) / 0.5;
    assert!(slope.abs() < truth_drop.abs() / 2.0, "random slope {slope}, truth slope {truth_drop}");
}

#[test]
fn histogram_counts_and_bins() {
    let dir = TempDir::new().unwrap();
    let constant: QualityTable<f64> = (0..7).map(|i| (format!("img{i}"), 0.42)).collect();
    let spread: QualityTable<f64> = (0..9).map(|i| (format!("img{i}"), i as f64 / 10.0)).collect();
    let (qc, qs) = (p(&dir, "c.csv"), p(&dir, "s.csv"));
    dataset::save_quality_table(&constant, &qc).unwrap();
    dataset::save_quality_table(&spread, &qs).unwrap();
    let (hc, hs) = (p(&dir, "hc.csv"), p(&dir, "hs.csv"));
    ok(&["histogram", "--quality", s(&qc), "--output", s(&hc)]);
    ok(&["histogram", "--quality", s(&qs), "--output", s(&hs)]);

    let bc = metrics::read_histogram(&hc).unwrap();
    let bs = metrics::read_histogram(&hs).unwrap();
    assert_eq!(bc.len(), 20);
    assert_eq!(bc.iter().filter(|b| b.count > 0).count(), 1);
    assert_eq!(bc.iter().map(|b| b.count).sum::<usize>(), 7);
    assert_eq!(bs.iter().map(|b| b.count).sum::<usize>(), 9);
    let edges = |b: &[metrics::HistogramBin]| b.iter().map(|x| (x.low, x.high)).collect::<Vec<_>>();
    assert_eq!(edges(&bc), edges(&bs));
}

#[test]
fn pipeline_end_to_end() {
    let dir = TempDir::new().unwrap();
    let (emb, truth) = corpus(&dir, &["--dim", "12", "--identities", "6", "--images-per-identity", "8"]);
    let model = p(&dir, "m.bin");
    ok(&["train", "--input", s(&emb), "--model", s(&model), "--epochs", "30", "--batch-size", "32", "--lr", "1"]);
    let net: Net = densenet::load_model(&model).unwrap();
    assert_eq!(net.spec().output, OutputActivation::Sigmoid);

    let deployed = p(&dir, "deployed.csv");
    ok(&["embed", "--model", s(&model), "--input", s(&emb), "--output", s(&deployed)]);
    let embedded: serfiq::Dataset = dataset::load_embeddings(&deployed, Format::Csv).unwrap();
    assert_eq!((embedded.len(), embedded.dim()), (48, 12));

    let (same, top) = (p(&dir, "same.csv"), p(&dir, "ontop.csv"));
    ok(&["score", "--model", s(&model), "--input", s(&emb), "--m", "20", "--output", s(&same)]);
    ok(&["score", "--model", s(&model), "--input", s(&emb), "--m", "20", "--mode", "on-top", "--output", s(&top)]);
    assert_ne!(fs::read(&same).unwrap(), fs::read(&top).unwrap());

    let out = p(&dir, "curves");
    ok(&[
        "evaluate", "--input", s(&deployed), "--impostors", "500", "--quality", s(&same), "--quality", s(&top),
        "--quality", s(&truth), "--out-dir", s(&out),
    ]);
    for stem in ["same", "ontop", "truth"] {
        for tag in ["eer", "fnmr_at_fmr_0.01", "fnmr_at_fmr_0.001"] {
            let c = curve(&out.join(format!("{stem}_{tag}.csv")));
            assert!(!c.is_empty() && c[0].0 == 0.0, "{stem}_{tag}");
        }
    }
    let hist = p(&dir, "hist.csv");
    ok(&["histogram", "--quality", s(&same), "--output", s(&hist)]);
    assert_eq!(metrics::read_histogram(&hist).unwrap().iter().map(|b| b.count).sum::<usize>(), 48);
}
