use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serfiq::dataset::{self, Format, QualityTable};
use serfiq::densenet::{self, DenseNet, Loss, NetSpec, OutputActivation, TrainConfig};
use serfiq::metrics::{self, OperatingPoint};
use serfiq::serfiq::{Mode, SerConfig};
use serfiq::synth::{self, SynthSpec};
use serfiq::{Dataset, Net, Qualities};

use crate::{usage, EmbedArgs, EvaluateArgs, FileFormat, HistogramArgs, LossArg, ModeArg, PairsArgs, ScoreArgs, SynthGenArgs, TrainArgs};

fn format_for(path: &Path, flag: Option<FileFormat>) -> Format {
    match flag {
        Some(FileFormat::Csv) => Format::Csv,
        Some(FileFormat::Emb1) => Format::Emb1,
        None => Format::from_path(path),
    }
}

fn load_dataset(path: &Path) -> Result<Dataset> {
    Ok(dataset::load_embeddings(path, Format::from_path(path))?)
}

pub fn synth_gen(a: &SynthGenArgs) -> Result<()> {
    let spec = SynthSpec {
        n_identities: a.identities,
        images_per_identity: a.images_per_identity,
        dim: a.dim,
        prototype_seed: a.prototype_seed,
        noise_low: a.noise_low,
        noise_high: a.noise_high,
        noise_seed: a.noise_seed,
    };
    spec.validate().map_err(|e| usage(e.to_string()))?;
    let (ds, truth) = synth::generate::<f64>(&spec)?;
    dataset::save_embeddings(&ds, &a.output, format_for(&a.output, a.format))?;
    if let Some(q) = &a.quality_output {
        dataset::save_quality_table(&truth, q)?;
    }
    Ok(())
}

pub fn pairs(a: &PairsArgs) -> Result<()> {
    let ds = load_dataset(&a.input)?;
    let protocol = dataset::generate_pairs(&ds, a.impostors, a.seed)?;
    dataset::save_pairs(&protocol, &a.output)?;
    Ok(())
}

fn parse_widths(s: &str) -> Result<Vec<usize>> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|w| match w.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(usage(format!("invalid layer width {w:?} in --hidden"))),
        })
        .collect()
}

pub fn train(a: &TrainArgs) -> Result<()> {
    if a.batch_size == 0 {
        return Err(usage("--batch-size must be positive"));
    }
    if !(a.lr > 0.0 && a.lr.is_finite()) || !(a.eps > 0.0 && a.eps.is_finite()) {
        return Err(usage("--lr and --eps must be positive"));
    }
    if !(a.rho > 0.0 && a.rho < 1.0) {
        return Err(usage("--rho must lie in (0, 1)"));
    }
    if !(0.0..1.0).contains(&a.dropout) {
        return Err(usage("--dropout must lie in [0, 1)"));
    }
    let hidden = parse_widths(&a.hidden)?;

    let ds = load_dataset(&a.input)?;
    let n_emb = ds.dim();
    let mut dims = vec![n_emb];
    dims.extend(hidden);
    dims.extend([n_emb, ds.identity_count()]);
    let loss = match a.loss {
        LossArg::Bce => Loss::Bce,
        LossArg::Softmax => Loss::SoftmaxCe,
    };
    let spec = NetSpec::new(dims, a.dropout, loss.output(), a.seed)?;
    let mut net: Net = densenet::init_net(&spec)?;
    let cfg = TrainConfig {
        batch_size: a.batch_size,
        epochs: a.epochs,
        lr: a.lr,
        rho: a.rho,
        eps: a.eps,
        shuffle_seed: a.shuffle_seed,
        loss,
    };
    let report = densenet::train(&mut net, &ds, &cfg)?;
    densenet::save_model(&net, &a.model)?;

    if let Some(path) = &a.history {
        let mut out = String::from("epoch,mean_loss\n");
        for (i, l) in report.loss_history.iter().enumerate() {
            out.push_str(&format!("{},{}\n", i + 1, l));
        }
        fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

/// Drops a classification head so that same-model passes act on the embedding layer.
fn deployed(net: Net) -> Result<Net> {
    match net.spec().output {
        OutputActivation::Sigmoid | OutputActivation::Softmax if net.depth() > 1 => Ok(net.truncated(net.depth() - 1)?),
        _ => Ok(net),
    }
}

pub fn score(a: &ScoreArgs) -> Result<()> {
    if a.m < 2 {
        return Err(usage("--m must be at least 2"));
    }
    let net: Net = densenet::load_model(&a.model)?;
    let ds = load_dataset(&a.input)?;
    let (net, mode) = match a.mode {
        ModeArg::OnTop => (net, Mode::OnTop),
        ModeArg::SameModel => (deployed(net)?, Mode::SameModel),
    };
    let cfg = SerConfig {
        m: a.m,
        mode,
        master_seed: a.seed,
        normalize: a.normalize,
    };
    let table = serfiq::serfiq::score_dataset(&ds, &net, &cfg)?;
    dataset::save_quality_table(&table, &a.output)?;
    Ok(())
}

pub fn embed(a: &EmbedArgs) -> Result<()> {
    let net: DenseNet<f64> = densenet::load_model(&a.model)?;
    let ds = load_dataset(&a.input)?;
    let out = serfiq::serfiq::embed_dataset(&ds, &net)?;
    dataset::save_embeddings(&out, &a.output, format_for(&a.output, a.format))?;
    Ok(())
}

fn parse_f64(s: &str, flag: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| usage(format!("invalid number {s:?} in {flag}")))
}

fn parse_ratios(s: &str) -> Result<Vec<f64>> {
    let ratios = if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(usage("--ratios range must be start:step:end"));
        }
        let (start, step, end) = (
            parse_f64(parts[0], "--ratios")?,
            parse_f64(parts[1], "--ratios")?,
            parse_f64(parts[2], "--ratios")?,
        );
        if step <= 0.0 || end < start {
            return Err(usage("--ratios range needs a positive step and start <= end"));
        }
        let n = ((end - start) / step + 1e-9).floor() as usize;
        (0..=n).map(|i| start + i as f64 * step).collect()
    } else {
        s.split(',').map(|r| parse_f64(r, "--ratios")).collect::<Result<Vec<_>>>()?
    };
    if ratios.iter().any(|r| !(0.0..1.0).contains(r)) || ratios.windows(2).any(|w| w[0] >= w[1]) {
        return Err(usage("--ratios must be strictly increasing values in [0, 1)"));
    }
    Ok(ratios)
}

fn label_of(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "quality".into())
}

pub fn evaluate(a: &EvaluateArgs) -> Result<()> {
    let ratios = parse_ratios(&a.ratios)?;
    let mut ops = Vec::new();
    if a.eer {
        ops.push(OperatingPoint::Eer);
    }
    for &t in &a.fmr {
        if !(t > 0.0 && t < 1.0) {
            return Err(usage(format!("--fmr {t} outside (0, 1)")));
        }
        ops.push(OperatingPoint::FnmrAtFmr(t));
    }
    if ops.is_empty() {
        ops = vec![OperatingPoint::Eer, OperatingPoint::FnmrAtFmr(0.01), OperatingPoint::FnmrAtFmr(0.001)];
    }
    let mut labels = BTreeSet::new();
    for q in &a.qualities {
        if !labels.insert(label_of(q)) {
            return Err(usage(format!("two quality tables share the file stem {:?}", label_of(q))));
        }
    }

    let ds = load_dataset(&a.input)?;
    let protocol = match &a.pairs {
        Some(p) => dataset::load_pairs(p, &ds)?,
        None => dataset::generate_pairs(&ds, a.impostors, a.seed)?,
    };
    let scores = metrics::compute_scores(&ds, &protocol)?;
    let tables = a
        .qualities
        .iter()
        .map(|p| Ok((label_of(p), dataset::load_quality_table::<f64>(p)?)))
        .collect::<Result<Vec<(String, Qualities)>>>()?;

    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let mut summary = String::from("quality,operating_point,area\n");
    for (label, table) in &tables {
        check_coverage(table, &protocol, label)?;
        for &op in &ops {
            let curve = metrics::error_versus_reject(&scores, table, &ratios, op)?.labeled(label.clone());
            let path = a.out_dir.join(format!("{label}_{}.csv", op.tag()));
            metrics::export_curve(&curve, &path)?;
            summary.push_str(&format!("{label},{},{}\n", op.tag(), curve.area()));
        }
    }
    std::io::stdout().write_all(summary.as_bytes())?;
    Ok(())
}

fn check_coverage(table: &QualityTable<f64>, protocol: &dataset::PairProtocol, label: &str) -> Result<()> {
    let missing = protocol
        .genuine
        .iter()
        .chain(&protocol.impostor)
        .flat_map(|p| [p.first(), p.second()])
        .find(|id| table.get(id).is_none());
    match missing {
        Some(id) => anyhow::bail!("quality table {label} has no entry for protocol image {id}"),
        None => Ok(()),
    }
}

pub fn histogram(a: &HistogramArgs) -> Result<()> {
    if a.bins == 0 {
        return Err(usage("--bins must be positive"));
    }
    let parts: Vec<&str> = a.range.split(',').collect();
    if parts.len() != 2 {
        return Err(usage("--range must be lo,hi"));
    }
    let (lo, hi) = (parse_f64(parts[0], "--range")?, parse_f64(parts[1], "--range")?);
    if lo >= hi {
        return Err(usage("--range needs lo < hi"));
    }
    let table: Qualities = dataset::load_quality_table(&a.quality)?;
    let bins = metrics::histogram(table.values(), a.bins, lo, hi)?;
    metrics::write_histogram(&bins, &a.output)?;
    Ok(())
}
